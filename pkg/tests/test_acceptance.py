"""End-to-end acceptance gate for the shipped models and calibration.

Each test covers one numbered criterion of the package contract and
prints a single pass/fail line with the measured values, so a log of
this module reads as the full scorecard.
"""

import time
from dataclasses import replace

import numpy as np

from phaserelay import (
    ChannelModelSpec,
    Geometry,
    RelayConfig,
    SPEED_OF_LIGHT,
    ToneSweep,
    TxEvent,
    estimate_distance,
    ks_critical_value,
    propagate,
    run_sweep,
    simulate_timeline,
)
from phaserelay.harness import (
    bundled_scenario_path,
    load_scenario,
    parse_scenario_text,
    run_manipulation_sweep,
    run_ota_relay,
    run_reciprocity_experiment,
    run_rss_access,
    run_tdd_trace,
    scenario_from_mapping,
)

PASS_DELAY_M = 8.99377374
MEAN_TOL_M = 0.5
QUANT_TOL_M = 0.061


def _report(num: str, label: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num}: {status} [{label}] {detail}", flush=True)
    assert ok, f"criterion {num} [{label}] {detail}"


def _cfg(text: str):
    return scenario_from_mapping(parse_scenario_text(text))


def _direct_estimate(distance_m: float, f_step_hz: float) -> float:
    sweep = ToneSweep(f_step_hz=f_step_hz)
    geometry = Geometry(node_a=(0.0, 0.0), node_b=(distance_m, 0.0))
    resp = propagate(geometry, ChannelModelSpec(), "node_a", "node_b", sweep.frequencies_hz())
    obs = run_sweep(sweep, resp, resp)
    return estimate_distance(obs, sweep).mean_m


def test_criterion_01_estimator_round_trip():
    rng = np.random.default_rng(20260816)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        f_step = rng.uniform(0.5e6, 4e6)
        unamb = SPEED_OF_LIGHT / (2.0 * f_step)
        dist = rng.uniform(0.01, 0.999 * unamb)
        err = abs(_direct_estimate(dist, f_step) - dist)
        worst = max(worst, err)
    elapsed = time.perf_counter() - started
    ok = worst < 1e-6 and elapsed < 5.0
    _report("1", "estimator round-trip", ok, f"worst error {worst:.2e} m, {elapsed:.2f} s")


BIAS_BASE = """
experiment = sweep
seed = 20260816
grid.distances_m = 10
attack.enabled = false
"""


def test_criterion_02_forwarding_delay_bias():
    assert RelayConfig().t_relay_ns == 30.0
    exact = run_manipulation_sweep(
        _cfg(BIAS_BASE + "reps = 1\nnoise.phase_sigma_rad = 0.0\n")
    )
    bias_exact = exact.summary["cells"]["d10:off"]["mean_m"] - 10.0
    noisy = run_manipulation_sweep(
        _cfg(BIAS_BASE + "reps = 100\nnoise.phase_sigma_rad = 0.05\n")
    )
    bias_noisy = noisy.summary["cells"]["d10:off"]["mean_m"] - 10.0
    ok = abs(bias_exact - 8.994) < 1e-3 and abs(bias_noisy - 8.994) < 0.3
    _report(
        "2",
        "forwarding delay bias",
        ok,
        f"exact {bias_exact:.6f} m, noisy mean {bias_noisy:.4f} m",
    )


GRID_BASE = """
experiment = sweep
seed = 20260816
grid.distances_m = 5, 10, 23
grid.include_off = false
attack.d_set_m = 1, 5, 10, 25, 50
"""


def test_criterion_03_manipulation_grid():
    started = time.perf_counter()
    noisy = run_manipulation_sweep(
        _cfg(GRID_BASE + "reps = 100\nnoise.phase_sigma_rad = 0.05\n")
    )
    exact = run_manipulation_sweep(
        _cfg(GRID_BASE + "reps = 1\nnoise.phase_sigma_rad = 0.0\n")
    )
    elapsed = time.perf_counter() - started

    worst_mean = 0.0
    worst_quant = 0.0
    for cid, stats in noisy.summary["cells"].items():
        target = stats["d_set_m"]
        worst_mean = max(worst_mean, abs(stats["mean_m"] - target))
    for cid, stats in exact.summary["cells"].items():
        target = stats["d_set_m"]
        worst_quant = max(worst_quant, abs(stats["mean_m"] - target))
    ok = worst_mean < MEAN_TOL_M and worst_quant <= QUANT_TOL_M and elapsed < 30.0
    _report(
        "3",
        "manipulation grid",
        ok,
        f"worst mean error {worst_mean:.3f} m, worst quantization {worst_quant:.4f} m, "
        f"{elapsed:.1f} s over {len(noisy.summary['cells'])} cells",
    )


def test_criterion_04_long_range_relay():
    cfg = load_scenario(bundled_scenario_path("ota"))
    result = run_ota_relay(cfg)
    worst_off = 0.0
    worst_on = 0.0
    for key, link in result.summary["links"].items():
        total = link["total_path_m"]
        off = result.summary["cells"][f"{key}:off"]["mean_m"]
        on = result.summary["cells"][f"{key}:on"]["mean_m"]
        worst_off = max(worst_off, abs(off - (total + PASS_DELAY_M)))
        worst_on = max(worst_on, abs(on - 2.0))
    ok = worst_off < 0.5 and worst_on < 0.5
    _report(
        "4",
        "long-range relay",
        ok,
        f"worst baseline error {worst_off:.3f} m, worst manipulated error {worst_on:.3f} m "
        f"over {len(result.summary['links'])} positions",
    )


def test_criterion_05_wrap_ambiguity():
    estimate = _direct_estimate(160.0, 1e6)
    ok = abs(estimate - 10.104) < 1e-3
    _report("5", "wrap ambiguity", ok, f"160 m reads as {estimate:.6f} m")


def test_criterion_06_switch_clipping():
    config = RelayConfig()
    events = [
        TxEvent(source="A", t_start_us=0.0, duration_us=44.0, frequency_hz=2.402e9, power_at_primary_dbm=-30.0),
        TxEvent(source="A", t_start_us=10000.0, duration_us=2128.0, frequency_hz=2.402e9, power_at_primary_dbm=-30.0),
    ]
    result = simulate_timeline(events, config)
    short_pct = result.fates[0].clipped_fraction * 100.0
    long_pct = result.fates[1].clipped_fraction * 100.0
    ok = abs(short_pct - 0.795) < 1e-3 and abs(long_pct - 0.016) < 1e-3
    _report(
        "6",
        "switch clipping",
        ok,
        f"44 us clipped {short_pct:.4f}%, 2128 us clipped {long_pct:.4f}%",
    )


def test_criterion_07_reciprocity_ordering():
    cfg = load_scenario(bundled_scenario_path("reciprocity"))
    assert cfg.reps == 200
    arms = run_reciprocity_experiment(cfg).summary["arms"]
    uni = arms["unidirectional"]["median"]
    bi = arms["bidirectional"]["median"]
    legit = arms["legitimate"]["median"]
    ok = uni > bi > legit and (bi - legit) < (uni - legit)
    _report(
        "7",
        "reciprocity ordering",
        ok,
        f"medians unidirectional {uni:.2f} > bidirectional {bi:.2f} > legitimate {legit:.2f}",
    )


def test_criterion_08_equalization_blends_in():
    base = load_scenario(bundled_scenario_path("reciprocity"))
    base = replace(
        base,
        reps=100,
        recip=replace(base.recip, arms=("legitimate", "bidirectional", "equalized")),
    )
    critical = ks_critical_value(100, 100)
    hidden = 0
    exposed = 0
    runs = 50
    for i in range(runs):
        summary = run_reciprocity_experiment(replace(base, seed=base.seed + i)).summary
        assert summary["ks_critical_value"] == critical
        if summary["arms"]["equalized"]["ks_vs_legitimate"] < critical:
            hidden += 1
        if summary["arms"]["bidirectional"]["ks_vs_legitimate"] > critical:
            exposed += 1
    ok = hidden >= 45 and exposed >= 45
    _report(
        "8",
        "equalization blends in",
        ok,
        f"equalized below critical in {hidden}/{runs}, plain relay above in {exposed}/{runs} "
        f"(critical {critical:.4f})",
    )


FAKE_BASE = """
experiment = sweep
seed = 20260816
grid.distances_m = 10
grid.include_off = false
attack.d_set_m = 1
attack.fake_pulses = 3
"""


def test_criterion_09_fake_pulse_countermeasure():
    noisy = FAKE_BASE + "reps = 100\nnoise.phase_sigma_rad = 0.05\n"
    fooled = run_manipulation_sweep(_cfg(noisy))
    moved = abs(fooled.summary["cells"]["d10:set1"]["mean_m"] - 1.0)

    oracle_text = noisy + "attack.inference = frequency-oracle\n"
    oracle = run_manipulation_sweep(_cfg(oracle_text))
    held = abs(oracle.summary["cells"]["d10:set1"]["mean_m"] - 1.0)

    exact_text = FAKE_BASE + (
        "reps = 1\nnoise.phase_sigma_rad = 0.0\nattack.inference = frequency-oracle\n"
    )
    exact = run_manipulation_sweep(_cfg(exact_text))
    held_exact = abs(exact.summary["cells"]["d10:set1"]["mean_m"] - 1.0)

    ok = moved >= 1.0 and held < MEAN_TOL_M and held_exact <= QUANT_TOL_M
    _report(
        "9",
        "fake pulse countermeasure",
        ok,
        f"count-based attacker pushed {moved:.3f} m off target, "
        f"oracle attacker off by {held:.3f} m (noiseless {held_exact:.4f} m)",
    )


def test_criterion_10_byte_identical_reruns(tmp_path):
    repeats = {
        "sweep": (run_manipulation_sweep, 5),
        "ota": (run_ota_relay, 5),
        "reciprocity": (run_reciprocity_experiment, 30),
        "rss": (run_rss_access, None),
    }
    stable = []
    for name, (runner, reps) in repeats.items():
        cfg = load_scenario(bundled_scenario_path(name)).with_overrides(reps=reps)
        first = runner(cfg).render_csv().encode("utf-8")
        second = runner(cfg).render_csv().encode("utf-8")
        stable.append(first == second)

    trace_cfg = load_scenario(bundled_scenario_path("tdd-trace"))
    paths = (tmp_path / "first.csv", tmp_path / "second.csv")
    for path in paths:
        run_tdd_trace(trace_cfg).trace.write_csv(path)
    stable.append(paths[0].read_bytes() == paths[1].read_bytes())

    ok = all(stable)
    _report(
        "10",
        "byte-identical reruns",
        ok,
        f"{sum(stable)}/{len(stable)} scenarios reproduced exactly",
    )


def test_criterion_rss_calibrated_qualitative():
    cfg = load_scenario(bundled_scenario_path("rss"))
    assert cfg.placement.link_antenna_gain_dbi > 0.0
    summary = run_rss_access(cfg).summary
    thr = summary["thresholds_dbm"]
    ordered = thr["engine"] > thr["unlock"] > thr["lock"]

    nested = True
    extended = True
    for preset in ("hand", "jacket", "trouser", "trouser-back"):
        direct = summary["boundaries"][f"{preset}:direct"]
        relay = summary["boundaries"][f"{preset}:relay"]
        nested = nested and direct["unlock_max_m"] < direct["reach_max_m"]
        extended = extended and relay["unlock_max_m"] > direct["unlock_max_m"]

    ok = ordered and nested and extended
    hand_direct = summary["boundaries"]["hand:direct"]
    hand_relay = summary["boundaries"]["hand:relay"]
    _report(
        "rss",
        "signal-strength gate",
        ok,
        f"unlock reach {hand_direct['unlock_max_m']:g} m direct vs "
        f"{hand_relay['unlock_max_m']:g} m relayed",
    )
