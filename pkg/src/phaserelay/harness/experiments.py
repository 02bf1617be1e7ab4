"""Experiment runners: grid sweep, over-the-air relay, reciprocity,
received-signal-strength access control, and the switching trace.

Randomness discipline: every run derives all generators from the
scenario seed through ``numpy.random.SeedSequence`` spawn keys, namespaced
as (0,) for scenario-level hardware draws and (1, cell, rep) for
per-repetition measurement noise. Cells therefore do not share streams
and adding repetitions never disturbs earlier ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..channel import SPEED_OF_LIGHT, propagate, Geometry
from ..detection import (
    calibrate_epsilon,
    ks_critical_value,
    ks_statistic,
    reciprocity_dissimilarity,
)
from ..ranging import estimate_distance, run_sweep
from ..relay import RelayState
from ..tdd import (
    SweepNotDetectedError,
    SweepStartPattern,
    TxEvent,
    count_sweep_tones,
    simulate_timeline,
)
from .composition import (
    AttackSchedule,
    CellLink,
    HopPlan,
    assemble_observation_responses,
    build_direct_cell,
    build_relayed_cell,
    chain_equalization,
    derive_schedule,
    make_program,
    passthrough_schedule,
    sweep_event_stream,
)
from .config import ScenarioConfig, ScenarioError
from .results import ScenarioResult, make_row, summarize_estimates


def _setup_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def _rep_rng(seed: int, cell_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, cell_index, rep)))


def _hardware_draws(cfg: ScenarioConfig) -> dict[str, np.ndarray]:
    """Fixed-order per-scenario draws: chain and node gain flatness error.

    All four vectors are drawn regardless of their sigmas so the stream
    layout is stable when one of them is disabled.
    """
    rng = _setup_rng(cfg.seed)
    n = cfg.sweep.carrier_count
    chain_sigma = cfg.placement.chain_ripple_sigma_db
    node_sigma = cfg.detection.node_ripple_sigma_db
    return {
        "chain_ab": rng.standard_normal(n) * chain_sigma,
        "chain_ba": rng.standard_normal(n) * chain_sigma,
        "node_a": rng.standard_normal(n) * node_sigma,
        "node_b": rng.standard_normal(n) * node_sigma,
    }


def _run_cell_reps(
    cfg: ScenarioConfig,
    cell: CellLink,
    cell_index: int,
    scenario_id: str,
    d_set_m: float | None,
    schedule: AttackSchedule,
    broken_schedule: AttackSchedule | None,
    program,
    hardware: dict[str, np.ndarray],
    rows: list[dict],
) -> None:
    """Repeat one cell's sweep measurement and append result rows."""
    miss_reps = set(cfg.attack.pattern_miss_reps)
    # The assembled responses depend only on the cell and the schedule,
    # so build each variant once and reuse it across repetitions.
    normal = assemble_observation_responses(
        cell,
        program,
        schedule,
        node_ripple_a=hardware["node_a"],
        node_ripple_b=hardware["node_b"],
    )
    broken = (
        assemble_observation_responses(
            cell,
            program,
            broken_schedule,
            node_ripple_a=hardware["node_a"],
            node_ripple_b=hardware["node_b"],
        )
        if broken_schedule is not None
        else None
    )
    for rep in range(cfg.reps):
        fwd, rev = broken if (rep in miss_reps and broken is not None) else normal
        rng = _rep_rng(cfg.seed, cell_index, rep)
        obs = run_sweep(
            cell.sweep,
            fwd,
            rev,
            phase_noise_sigma_rad=cfg.noise.phase_sigma_rad,
            rng=rng,
            amplitude_noise_sigma_db=cfg.noise.amplitude_sigma_db,
        )
        estimate = estimate_distance(obs, cell.sweep, sweep_id=rep)
        rows.append(
            make_row(
                scenario_id=scenario_id,
                rep=rep,
                seed=cfg.seed,
                d_true_m=cell.path_fwd_m,
                d_set_m=d_set_m,
                d_est_m=estimate.mean_m,
            )
        )


def run_manipulation_sweep(cfg: ScenarioConfig) -> ScenarioResult:
    """Distance grid x target grid, relay in line over cabled hops.

    For each true distance the relay is placed inline (cabled to node A
    and to its counterpart station, radiating to node B over the last
    hop, which carries the full node separation so the believed distance
    matches the direct one). Cells with the attack off give the
    relay-only baseline.
    """
    cfg = cfg.validated()
    hardware = _hardware_draws(cfg)
    rows: list[dict] = []
    cell_stats: dict[str, dict] = {}
    cell_index = 0

    for d in cfg.grid.distances_m:
        hops = (
            HopPlan(cfg.placement.hop_a, 0.0),
            HopPlan(cfg.placement.hop_link, 0.0),
            HopPlan(cfg.placement.hop_b, d),
        )
        targets: list[float | None] = []
        if cfg.grid.include_off:
            targets.append(None)
        if cfg.attack.enabled:
            targets.extend(cfg.attack.d_set_m)

        for d_set in targets:
            cell = build_relayed_cell(
                cfg.sweep,
                cfg.relay,
                cfg.channel,
                cfg.placement,
                hops,
                chain_ripple_ab_db=hardware["chain_ab"],
                chain_ripple_ba_db=hardware["chain_ba"],
                direct_distance_m=d,
            )
            if d_set is None:
                scenario_id = f"d{d:g}:off"
                schedule = passthrough_schedule(cfg.sweep.carrier_count)
                broken = None
                program = None
            else:
                scenario_id = f"d{d:g}:set{d_set:g}"
                schedule = derive_schedule(cfg.sweep, cfg.relay, cfg.attack, cfg.tdd)
                broken = (
                    derive_schedule(cfg.sweep, cfg.relay, cfg.attack, cfg.tdd, break_pattern=True)
                    if cfg.attack.pattern_miss_reps
                    else None
                )
                beta = chain_equalization(cell) if cfg.attack.equalize else None
                program = make_program(cell, cfg.attack, d_set, beta_db=beta)
            _run_cell_reps(
                cfg,
                cell,
                cell_index,
                scenario_id,
                d_set,
                schedule,
                broken,
                program,
                hardware,
                rows,
            )
            cell_index += 1

    cell_stats = summarize_estimates(rows)
    summary = {"cells": cell_stats}
    return ScenarioResult(
        experiment=cfg.experiment,
        seed=cfg.seed,
        rows=rows,
        summary=summary,
        config_echo=cfg.to_mapping(),
    )


def _single_tone_rss_dbm(cfg: ScenarioConfig, distance_m: float, tx_power_dbm: float) -> float:
    freqs = np.array([cfg.sweep.f_start_hz])
    geometry = Geometry(node_a=(0.0, 0.0), node_b=(distance_m, 0.0))
    resp = propagate(geometry, cfg.channel, "node_a", "node_b", freqs)
    return tx_power_dbm + 20.0 * math.log10(float(resp.magnitude[0]))


def run_ota_relay(cfg: ScenarioConfig) -> ScenarioResult:
    """Long over-the-air relay between nodes parked out of direct range.

    One cell pair per terminal hop length: relay forwarding only, and
    relay manipulating toward the configured target. The direct path must
    be below receiver sensitivity, otherwise the placement premise fails
    and the run aborts.
    """
    cfg = cfg.validated()
    hardware = _hardware_draws(cfg)
    rows: list[dict] = []
    link_rss = {}
    cell_index = 0

    for b in cfg.ota.b_distances_m:
        total = cfg.ota.a_to_primary_m + cfg.ota.link_m + b
        rss_direct = _single_tone_rss_dbm(cfg, total, cfg.ota.tx_power_dbm)
        if rss_direct >= cfg.ota.receiver_sensitivity_dbm:
            raise ScenarioError(
                f"direct path at {total:g} m is above receiver sensitivity; "
                "nodes are not out of direct range"
            )
        hops = (
            HopPlan("air", cfg.ota.a_to_primary_m),
            HopPlan("air", cfg.ota.link_m),
            HopPlan("air", b),
        )
        link_rss[f"b{b:g}"] = {"rss_direct_dbm": rss_direct, "total_path_m": total}

        for attacked in (False, True) if cfg.attack.enabled else (False,):
            cell = build_relayed_cell(
                cfg.sweep,
                cfg.relay,
                cfg.channel,
                cfg.placement,
                hops,
                chain_ripple_ab_db=hardware["chain_ab"],
                chain_ripple_ba_db=hardware["chain_ba"],
                direct_distance_m=total,
            )
            if attacked:
                d_set = cfg.attack.d_set_m[0]
                scenario_id = f"b{b:g}:on"
                schedule = derive_schedule(cfg.sweep, cfg.relay, cfg.attack, cfg.tdd)
                beta = chain_equalization(cell) if cfg.attack.equalize else None
                program = make_program(cell, cfg.attack, d_set, beta_db=beta)
            else:
                d_set = None
                scenario_id = f"b{b:g}:off"
                schedule = passthrough_schedule(cfg.sweep.carrier_count)
                program = None
            _run_cell_reps(
                cfg,
                cell,
                cell_index,
                scenario_id,
                d_set,
                schedule,
                None,
                program,
                hardware,
                rows,
            )
            cell_index += 1

    summary = {"cells": summarize_estimates(rows), "links": link_rss}
    return ScenarioResult(
        experiment=cfg.experiment,
        seed=cfg.seed,
        rows=rows,
        summary=summary,
        config_echo=cfg.to_mapping(),
    )


def _build_recip_cell(cfg: ScenarioConfig, arm: str, hardware: dict[str, np.ndarray]) -> CellLink:
    recip = cfg.recip
    if arm == "legitimate":
        return build_direct_cell(cfg.sweep, cfg.relay, cfg.channel, recip.legit_distance_m)
    offset = recip.antenna_offset_m
    hops = (
        HopPlan("air", offset),
        HopPlan("air", recip.node_distance_m - 2.0 * offset),
        HopPlan("air", offset),
    )
    from dataclasses import replace

    mode = "unidirectional" if arm == "unidirectional" else "bidirectional"
    placement = replace(cfg.placement, mode=mode)
    return build_relayed_cell(
        cfg.sweep,
        cfg.relay,
        cfg.channel,
        placement,
        hops,
        chain_ripple_ab_db=hardware["chain_ab"],
        chain_ripple_ba_db=hardware["chain_ba"],
        direct_distance_m=recip.node_distance_m,
    )


def run_reciprocity_experiment(cfg: ScenarioConfig) -> ScenarioResult:
    """Magnitude-reciprocity detector against relay variants.

    Arms share one hardware draw. The detection threshold is calibrated
    on the legitimate arm's dissimilarities at the configured quantile,
    then applied to every row. The summary carries per-arm statistics,
    flag rates and two-sample KS distances against the legitimate arm.
    """
    cfg = cfg.validated()
    if "legitimate" not in cfg.recip.arms:
        raise ScenarioError("reciprocity experiment needs the legitimate arm for calibration")
    hardware = _hardware_draws(cfg)
    rows: list[dict] = []
    arm_values: dict[str, list[float]] = {}
    arm_estimates: dict[str, list[float]] = {}

    arms = list(cfg.recip.arms)
    arms.sort(key=lambda a: 0 if a == "legitimate" else 1)

    for cell_index, arm in enumerate(arms):
        cell = _build_recip_cell(cfg, arm, hardware)
        if arm == "legitimate":
            schedule = passthrough_schedule(cfg.sweep.carrier_count)
            program = None
            d_set = None
        else:
            d_set = cfg.attack.d_set_m[0]
            schedule = derive_schedule(cfg.sweep, cfg.relay, cfg.attack, cfg.tdd)
            beta = chain_equalization(cell) if arm == "equalized" else None
            program = make_program(cell, cfg.attack, d_set, beta_db=beta)
        values: list[float] = []
        estimates: list[float] = []
        fwd, rev = assemble_observation_responses(
            cell,
            program,
            schedule,
            node_ripple_a=hardware["node_a"],
            node_ripple_b=hardware["node_b"],
        )
        for rep in range(cfg.reps):
            rng = _rep_rng(cfg.seed, cell_index, rep)
            obs = run_sweep(
                cell.sweep,
                fwd,
                rev,
                phase_noise_sigma_rad=cfg.noise.phase_sigma_rad,
                rng=rng,
                amplitude_noise_sigma_db=cfg.noise.amplitude_sigma_db,
            )
            estimate = estimate_distance(obs, cell.sweep, sweep_id=rep)
            dissim = reciprocity_dissimilarity(
                obs.magnitude_forward,
                obs.magnitude_reverse,
                metric_domain=cfg.detection.metric_domain,
            )
            values.append(dissim)
            estimates.append(estimate.mean_m)
            rows.append(
                make_row(
                    scenario_id=arm,
                    rep=rep,
                    seed=cfg.seed,
                    d_true_m=cell.path_fwd_m,
                    d_set_m=d_set,
                    d_est_m=estimate.mean_m,
                    dissimilarity=dissim,
                )
            )
        arm_values[arm] = values
        arm_estimates[arm] = estimates

    epsilon = calibrate_epsilon(np.asarray(arm_values["legitimate"]), quantile=cfg.detection.quantile)
    for row in rows:
        row["verdict"] = "attack" if row["dissimilarity"] > epsilon else "clean"

    arm_summary = {}
    legit = np.asarray(arm_values["legitimate"])
    for arm in arms:
        vals = np.asarray(arm_values[arm])
        flags = float(np.mean(vals > epsilon))
        entry = {
            "count": int(vals.size),
            "median": float(np.median(vals)),
            "mean": float(vals.mean()),
            "flag_rate": flags,
            "mean_estimate_m": float(np.mean(arm_estimates[arm])),
        }
        if arm != "legitimate":
            entry["ks_vs_legitimate"] = ks_statistic(vals, legit)
        arm_summary[arm] = entry

    summary = {
        "epsilon": epsilon,
        "quantile": cfg.detection.quantile,
        "arms": arm_summary,
        "ks_critical_value": ks_critical_value(cfg.reps, cfg.reps),
    }
    return ScenarioResult(
        experiment=cfg.experiment,
        seed=cfg.seed,
        rows=rows,
        summary=summary,
        config_echo=cfg.to_mapping(),
    )


def _rss_decision(rss_dbm: float, engine_dbm: float, unlock_dbm: float, lock_dbm: float) -> str:
    if rss_dbm >= engine_dbm:
        return "engine"
    if rss_dbm >= unlock_dbm:
        return "unlock"
    if rss_dbm >= lock_dbm:
        return "hold"
    return "none"


def resolved_rss_thresholds(cfg: ScenarioConfig) -> tuple[float, float, float]:
    """(engine, unlock, lock) thresholds in dBm.

    Explicit values win; otherwise each threshold is the free-space
    received power at its calibration distance with no body shadowing.
    """
    rss = cfg.rss

    def calibrated(distance_m: float) -> float:
        fspl_db = 20.0 * math.log10(
            4.0 * math.pi * distance_m * rss.frequency_hz / SPEED_OF_LIGHT
        )
        return rss.tx_power_dbm - fspl_db

    engine = rss.engine_threshold_dbm if rss.engine_threshold_dbm is not None else calibrated(rss.engine_calibration_m)
    unlock = rss.unlock_threshold_dbm if rss.unlock_threshold_dbm is not None else calibrated(rss.unlock_calibration_m)
    lock = rss.lock_threshold_dbm if rss.lock_threshold_dbm is not None else calibrated(rss.lock_calibration_m)
    if not engine >= unlock >= lock:
        raise ScenarioError("rss thresholds must order engine >= unlock >= lock")
    return engine, unlock, lock


def _fspl_db(distance_m: float, frequency_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def run_rss_access(cfg: ScenarioConfig) -> ScenarioResult:
    """Signal-strength gated access, with and without the relay.

    The phone transmits from a grid of distances under each carry
    preset. The direct arm attenuates over the phone-to-vehicle path;
    the relay arm runs phone -> secondary -> link -> primary -> vehicle
    with the chain gain and link antennas. The model is deterministic,
    so the scenario usually runs a single repetition per point.
    """
    cfg = cfg.validated()
    engine_thr, unlock_thr, lock_thr = resolved_rss_thresholds(cfg)
    rss_cfg = cfg.rss
    f = rss_cfg.frequency_hz
    rows: list[dict] = []

    distances = []
    d = rss_cfg.phone_min_m
    while d <= rss_cfg.phone_max_m + 1e-9:
        distances.append(round(d, 9))
        d += rss_cfg.phone_step_m

    arms = ("direct", "relay") if cfg.placement.enabled else ("direct",)
    boundaries: dict[str, dict] = {}
    for preset in rss_cfg.presets:
        shadow = rss_cfg.shadow_db(preset)
        for mode in arms:
            decisions = []
            amp = None
            for dist in distances:
                if mode == "direct":
                    rss = rss_cfg.tx_power_dbm - shadow - _fspl_db(dist, f)
                else:
                    chain = cfg.relay.gain_ba_db + 2.0 * cfg.placement.link_antenna_gain_dbi
                    rss = (
                        rss_cfg.tx_power_dbm
                        - shadow
                        - _fspl_db(dist, f)
                        + chain
                        - _fspl_db(rss_cfg.link_m, f)
                        - _fspl_db(rss_cfg.primary_offset_m, f)
                    )
                decision = _rss_decision(rss, engine_thr, unlock_thr, lock_thr)
                decisions.append((dist, rss, decision))
                for rep in range(cfg.reps):
                    rows.append(
                        make_row(
                            scenario_id=f"{preset}:{mode}:d{dist:g}",
                            rep=rep,
                            seed=cfg.seed,
                            d_true_m=dist,
                            rss_dbm=rss,
                            decision=decision,
                        )
                    )
            def last_at(predicate):
                hit = [dist for dist, _, dec in decisions if predicate(dec)]
                return max(hit) if hit else None

            boundaries[f"{preset}:{mode}"] = {
                "engine_max_m": last_at(lambda dec: dec == "engine"),
                "unlock_max_m": last_at(lambda dec: dec in ("engine", "unlock")),
                "reach_max_m": last_at(lambda dec: dec != "none"),
            }

    summary = {
        "thresholds_dbm": {"engine": engine_thr, "unlock": unlock_thr, "lock": lock_thr},
        "boundaries": boundaries,
    }
    return ScenarioResult(
        experiment=cfg.experiment,
        seed=cfg.seed,
        rows=rows,
        summary=summary,
        config_echo=cfg.to_mapping(),
    )


@dataclass
class TraceRun:
    """Output of the switching-trace experiment."""

    trace: object
    fates: tuple
    summary: dict
    config_echo: dict[str, str]
    seed: int


def run_tdd_trace(cfg: ScenarioConfig) -> "TraceRun":
    """One full ranging exchange through the switching model.

    Returns a :class:`TraceRun` carrying the detector trace, every
    event's fate and aggregate clipping statistics.
    """
    cfg = cfg.validated()
    events, tone_starts = sweep_event_stream(
        cfg.sweep,
        cfg.tdd,
        fake_pulses=cfg.attack.fake_pulses,
        fake_after_tone=cfg.attack.fake_after_tone,
    )
    for k in range(cfg.tdd.interferer_count):
        events.append(
            TxEvent(
                source="interferer",
                t_start_us=cfg.tdd.interferer_start_us + k * cfg.tdd.interferer_period_us,
                duration_us=cfg.tdd.interferer_duration_us,
                frequency_hz=cfg.sweep.f_start_hz,
                power_at_primary_dbm=cfg.tdd.interferer_power_dbm,
            )
        )
    result = simulate_timeline(events, cfg.relay)
    pattern = SweepStartPattern(
        pulse_durations_us=cfg.tdd.pattern_pulses_us,
        gap_durations_us=cfg.tdd.pattern_gaps_us,
        tolerance=cfg.tdd.pattern_tolerance,
    )
    state = RelayState()
    try:
        tones_counted = count_sweep_tones(result.trace, pattern, state=state)
        pattern_found = True
    except SweepNotDetectedError:
        tones_counted = 0
        pattern_found = False

    per_source: dict[str, dict] = {}
    for fate in result.fates:
        entry = per_source.setdefault(
            fate.event.source, {"forwarded": 0, "clipped": 0, "ignored": 0, "lost": 0, "max_clip_fraction": 0.0}
        )
        entry[fate.status] += 1
        entry["max_clip_fraction"] = max(entry["max_clip_fraction"], fate.clipped_fraction)

    summary = {
        "pattern_found": pattern_found,
        "tones_counted": tones_counted,
        "events": len(events),
        "per_source": per_source,
        "first_tone_start_us": tone_starts[0] if tone_starts else None,
    }
    return TraceRun(
        trace=result.trace,
        fates=result.fates,
        summary=summary,
        config_echo=cfg.to_mapping(),
        seed=cfg.seed,
    )


RUNNERS = {
    "sweep": run_manipulation_sweep,
    "ota": run_ota_relay,
    "reciprocity": run_reciprocity_experiment,
    "rss": run_rss_access,
    "tdd-trace": run_tdd_trace,
}
