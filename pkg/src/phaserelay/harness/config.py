"""Scenario files: flat ``key = value`` text with dotted namespaces.

A scenario fully determines one experiment run: every field has a default
and every run echoes the complete resolved mapping, so results remain
reproducible from their own metadata. Unknown keys are rejected rather
than ignored.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..channel import ChannelModelSpec
from ..ranging import ToneSweep
from ..relay import RelayConfig

EXPERIMENTS = ("sweep", "ota", "reciprocity", "rss", "tdd-trace")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


def _as_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(f"expected a number, got {text!r}") from None


def _as_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(f"expected an integer, got {text!r}") from None


def _as_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ScenarioError(f"expected a boolean, got {text!r}")


def _as_str(text: str) -> str:
    return text.strip()


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _as_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(_as_float(part) for part in _split_list(text))


def _as_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(_as_int(part) for part in _split_list(text))


def _as_str_tuple(text: str) -> tuple[str, ...]:
    return tuple(_split_list(text))


def _as_taps(text: str) -> tuple[tuple[float, complex], ...]:
    """Taps encode as ``delay_ns:magnitude:phase_rad`` entries, comma separated."""
    taps = []
    for part in _split_list(text):
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ScenarioError(f"tap entry {part!r} must be delay_ns:magnitude:phase_rad")
        delay, mag, phase = (_as_float(p) for p in pieces)
        taps.append((delay, mag * cmath.exp(1j * phase)))
    return tuple(taps)


def _fmt_taps(taps) -> str:
    parts = []
    for delay_ns, gain in taps:
        parts.append(f"{_fmt(float(delay_ns))}:{_fmt(abs(gain))}:{_fmt(cmath.phase(gain))}")
    return ", ".join(parts)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class NoiseConfig:
    phase_sigma_rad: float = 0.05
    amplitude_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.phase_sigma_rad < 0 or self.amplitude_sigma_db < 0:
            raise ScenarioError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class AttackConfig:
    """What the adversary tries to do during ranging sweeps."""

    enabled: bool = True
    d_set_m: tuple[float, ...] = (2.0,)
    inference: str = "count-based"  # "count-based" | "frequency-oracle"
    self_compensate: bool = True
    believed_distance_m: float | None = None
    equalize: bool = False
    fake_pulses: int = 0
    fake_after_tone: int = 10
    pattern_miss_reps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.inference not in ("count-based", "frequency-oracle"):
            raise ScenarioError(f"unknown inference mode: {self.inference!r}")
        if self.fake_pulses < 0 or self.fake_after_tone < 0:
            raise ScenarioError("fake pulse settings must be non-negative")


@dataclass(frozen=True)
class PlacementConfig:
    """Where the relay sits and what each hop of the relayed path is."""

    enabled: bool = True
    mode: str = "bidirectional"  # "bidirectional" | "unidirectional"
    hop_a: str = "cable"  # node A to primary antenna
    hop_link: str = "cable"  # primary to secondary station
    hop_b: str = "air"  # secondary antenna to node B
    cable_loss_db: float = 0.0
    link_antenna_gain_dbi: float = 0.0
    chain_ripple_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("bidirectional", "unidirectional"):
            raise ScenarioError(f"unknown relay mode: {self.mode!r}")
        for hop in (self.hop_a, self.hop_link, self.hop_b):
            if hop not in ("cable", "air"):
                raise ScenarioError(f"hop kind must be cable or air, got {hop!r}")
        if self.cable_loss_db < 0 or self.chain_ripple_sigma_db < 0:
            raise ScenarioError("losses and ripple sigma must be non-negative")


@dataclass(frozen=True)
class DetectionConfig:
    quantile: float = 0.99
    metric_domain: str = "db"
    node_ripple_sigma_db: float = 0.5

    def __post_init__(self) -> None:
        if self.metric_domain not in ("db", "linear"):
            raise ScenarioError("metric_domain must be db or linear")
        if self.node_ripple_sigma_db < 0:
            raise ScenarioError("node ripple sigma must be non-negative")


@dataclass(frozen=True)
class TddTimingConfig:
    """Pre-sweep pattern, stream timing and detector-level event powers."""

    pattern_pulses_us: tuple[float, ...] = (80.0, 80.0, 80.0)
    pattern_gaps_us: tuple[float, ...] = (120.0, 120.0)
    pattern_tolerance: float = 0.1
    stream_start_us: float = 12000.0
    a_power_dbm: float = -30.0
    b_power_dbm: float = -55.0
    interferer_power_dbm: float = -50.0
    interferer_count: int = 0
    interferer_start_us: float = 0.0
    interferer_period_us: float = 400.0
    interferer_duration_us: float = 60.0
    fake_pulse_duration_us: float = 20.0


@dataclass(frozen=True)
class GridConfig:
    distances_m: tuple[float, ...] = (5.0, 10.0, 23.0)
    include_off: bool = True


@dataclass(frozen=True)
class OtaConfig:
    a_to_primary_m: float = 1.0
    link_m: float = 86.0
    b_distances_m: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    tx_power_dbm: float = 0.0
    receiver_sensitivity_dbm: float = -70.0


@dataclass(frozen=True)
class RecipConfig:
    node_distance_m: float = 15.0
    legit_distance_m: float = 2.0
    antenna_offset_m: float = 0.3
    arms: tuple[str, ...] = ("legitimate", "unidirectional", "bidirectional", "equalized")

    def __post_init__(self) -> None:
        known = {"legitimate", "unidirectional", "bidirectional", "equalized"}
        for arm in self.arms:
            if arm not in known:
                raise ScenarioError(f"unknown reciprocity arm: {arm!r}")


@dataclass(frozen=True)
class RssConfig:
    """Access-control model of the keyless entry reproduction.

    Thresholds may be given directly in dBm; otherwise they are derived
    from the calibration distances under the free-space law at
    ``frequency_hz`` (hand preset, no shadowing).
    """

    tx_power_dbm: float = 0.0
    frequency_hz: float = 2.402e9
    unlock_calibration_m: float = 5.0
    lock_calibration_m: float = 13.0
    engine_calibration_m: float = 2.0
    unlock_threshold_dbm: float | None = None
    lock_threshold_dbm: float | None = None
    engine_threshold_dbm: float | None = None
    phone_min_m: float = 0.5
    phone_max_m: float = 20.0
    phone_step_m: float = 0.5
    presets: tuple[str, ...] = ("hand", "jacket", "trouser", "trouser-back")
    shadow_hand_db: float = 0.0
    shadow_jacket_db: float = 2.0
    shadow_trouser_db: float = 4.0
    shadow_trouser_back_db: float = 10.0
    primary_offset_m: float = 0.2
    link_m: float = 65.0

    def shadow_db(self, preset: str) -> float:
        table = {
            "hand": self.shadow_hand_db,
            "jacket": self.shadow_jacket_db,
            "trouser": self.shadow_trouser_db,
            "trouser-back": self.shadow_trouser_back_db,
        }
        if preset not in table:
            raise ScenarioError(f"unknown carry preset: {preset!r}")
        return table[preset]


@dataclass(frozen=True)
class ScenarioConfig:
    experiment: str = "sweep"
    seed: int | None = None
    reps: int = 100
    sweep: ToneSweep = field(default_factory=ToneSweep)
    channel: ChannelModelSpec = field(default_factory=ChannelModelSpec)
    relay: RelayConfig = field(default_factory=RelayConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    tdd: TddTimingConfig = field(default_factory=TddTimingConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    ota: OtaConfig = field(default_factory=OtaConfig)
    recip: RecipConfig = field(default_factory=RecipConfig)
    rss: RssConfig = field(default_factory=RssConfig)

    def validated(self) -> "ScenarioConfig":
        if self.experiment not in EXPERIMENTS:
            raise ScenarioError(f"unknown experiment: {self.experiment!r}")
        if self.seed is None:
            raise ScenarioError("scenario must declare a seed")
        if self.seed < 0:
            raise ScenarioError("seed must be a non-negative integer")
        if self.reps < 1:
            raise ScenarioError("reps must be at least 1")
        if not 0.0 < self.detection.quantile < 1.0:
            raise ScenarioError("degenerate quantile")
        if self.attack.enabled and not self.attack.self_compensate and self.attack.believed_distance_m is None:
            raise ScenarioError("attack needs either self_compensate or an explicit believed_distance_m")
        return self

    def with_overrides(
        self,
        seed: int | None = None,
        reps: int | None = None,
    ) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if reps is not None:
            cfg = replace(cfg, reps=reps)
        return cfg

    def to_mapping(self) -> dict[str, str]:
        """Flat, fully resolved key/value echo of this configuration."""
        out: dict[str, str] = {
            "experiment": self.experiment,
            "seed": _fmt(self.seed),
            "reps": str(self.reps),
        }
        sections = {
            "sweep": self.sweep,
            "channel": self.channel,
            "relay": self.relay,
            "noise": self.noise,
            "attack": self.attack,
            "placement": self.placement,
            "detection": self.detection,
            "tdd": self.tdd,
            "grid": self.grid,
            "ota": self.ota,
            "recip": self.recip,
            "rss": self.rss,
        }
        for prefix, section in sections.items():
            for f in fields(section):
                if not f.init:
                    continue
                value = getattr(section, f.name)
                if prefix == "channel" and f.name == "taps":
                    out[f"{prefix}.{f.name}"] = _fmt_taps(value)
                else:
                    out[f"{prefix}.{f.name}"] = _fmt(value)
        return dict(sorted(out.items()))


# Maps every accepted dotted key to (section, attribute, parser). The
# section names match ScenarioConfig fields; top-level keys use "".
_KEY_TABLE: dict[str, tuple[str, str, object]] = {
    "experiment": ("", "experiment", _as_str),
    "seed": ("", "seed", _as_int),
    "reps": ("", "reps", _as_int),
    "sweep.carriers": ("sweep", "carrier_count", _as_int),
    "sweep.f_start_hz": ("sweep", "f_start_hz", _as_float),
    "sweep.f_step_hz": ("sweep", "f_step_hz", _as_float),
    "sweep.tone_duration_us": ("sweep", "tone_duration_us", _as_float),
    "sweep.turnaround_gap_us": ("sweep", "turnaround_gap_us", _as_float),
    "channel.model": ("channel", "kind", _as_str),
    "channel.path_loss_exponent": ("channel", "path_loss_exponent", _as_float),
    "channel.reference_loss_db": ("channel", "reference_loss_db", _as_float),
    "channel.antenna_gain_dbi": ("channel", "antenna_gain_dbi", _as_float),
    "channel.taps": ("channel", "taps", _as_taps),
    "relay.gain_ab_db": ("relay", "gain_ab_db", _as_float),
    "relay.gain_ba_db": ("relay", "gain_ba_db", _as_float),
    "relay.t_relay_ns": ("relay", "t_relay_ns", _as_float),
    "relay.detector_threshold_dbm": ("relay", "detector_threshold_dbm", _as_float),
    "relay.release_hysteresis_db": ("relay", "release_hysteresis_db", _as_float),
    "relay.reaction_delay_us": ("relay", "reaction_delay_us", _as_float),
    "relay.phase_bits": ("relay", "phase_bits", _as_int),
    "relay.attenuator_step_db": ("relay", "attenuator_step_db", _as_float),
    "relay.attenuator_range_db": ("relay", "attenuator_range_db", _as_float),
    "noise.phase_sigma_rad": ("noise", "phase_sigma_rad", _as_float),
    "noise.amplitude_sigma_db": ("noise", "amplitude_sigma_db", _as_float),
    "attack.enabled": ("attack", "enabled", _as_bool),
    "attack.d_set_m": ("attack", "d_set_m", _as_float_tuple),
    "attack.inference": ("attack", "inference", _as_str),
    "attack.self_compensate": ("attack", "self_compensate", _as_bool),
    "attack.believed_distance_m": ("attack", "believed_distance_m", _as_float),
    "attack.equalize": ("attack", "equalize", _as_bool),
    "attack.fake_pulses": ("attack", "fake_pulses", _as_int),
    "attack.fake_after_tone": ("attack", "fake_after_tone", _as_int),
    "attack.pattern_miss_reps": ("attack", "pattern_miss_reps", _as_int_tuple),
    "placement.enabled": ("placement", "enabled", _as_bool),
    "placement.mode": ("placement", "mode", _as_str),
    "placement.hop_a": ("placement", "hop_a", _as_str),
    "placement.hop_link": ("placement", "hop_link", _as_str),
    "placement.hop_b": ("placement", "hop_b", _as_str),
    "placement.cable_loss_db": ("placement", "cable_loss_db", _as_float),
    "placement.link_antenna_gain_dbi": ("placement", "link_antenna_gain_dbi", _as_float),
    "placement.chain_ripple_sigma_db": ("placement", "chain_ripple_sigma_db", _as_float),
    "detection.quantile": ("detection", "quantile", _as_float),
    "detection.metric_domain": ("detection", "metric_domain", _as_str),
    "detection.node_ripple_sigma_db": ("detection", "node_ripple_sigma_db", _as_float),
    "tdd.pattern_pulses_us": ("tdd", "pattern_pulses_us", _as_float_tuple),
    "tdd.pattern_gaps_us": ("tdd", "pattern_gaps_us", _as_float_tuple),
    "tdd.pattern_tolerance": ("tdd", "pattern_tolerance", _as_float),
    "tdd.stream_start_us": ("tdd", "stream_start_us", _as_float),
    "tdd.a_power_dbm": ("tdd", "a_power_dbm", _as_float),
    "tdd.b_power_dbm": ("tdd", "b_power_dbm", _as_float),
    "tdd.interferer_power_dbm": ("tdd", "interferer_power_dbm", _as_float),
    "tdd.interferer_count": ("tdd", "interferer_count", _as_int),
    "tdd.interferer_start_us": ("tdd", "interferer_start_us", _as_float),
    "tdd.interferer_period_us": ("tdd", "interferer_period_us", _as_float),
    "tdd.interferer_duration_us": ("tdd", "interferer_duration_us", _as_float),
    "tdd.fake_pulse_duration_us": ("tdd", "fake_pulse_duration_us", _as_float),
    "grid.distances_m": ("grid", "distances_m", _as_float_tuple),
    "grid.include_off": ("grid", "include_off", _as_bool),
    "ota.a_to_primary_m": ("ota", "a_to_primary_m", _as_float),
    "ota.link_m": ("ota", "link_m", _as_float),
    "ota.b_distances_m": ("ota", "b_distances_m", _as_float_tuple),
    "ota.tx_power_dbm": ("ota", "tx_power_dbm", _as_float),
    "ota.receiver_sensitivity_dbm": ("ota", "receiver_sensitivity_dbm", _as_float),
    "recip.node_distance_m": ("recip", "node_distance_m", _as_float),
    "recip.legit_distance_m": ("recip", "legit_distance_m", _as_float),
    "recip.antenna_offset_m": ("recip", "antenna_offset_m", _as_float),
    "recip.arms": ("recip", "arms", _as_str_tuple),
    "rss.tx_power_dbm": ("rss", "tx_power_dbm", _as_float),
    "rss.frequency_hz": ("rss", "frequency_hz", _as_float),
    "rss.unlock_calibration_m": ("rss", "unlock_calibration_m", _as_float),
    "rss.lock_calibration_m": ("rss", "lock_calibration_m", _as_float),
    "rss.engine_calibration_m": ("rss", "engine_calibration_m", _as_float),
    "rss.unlock_threshold_dbm": ("rss", "unlock_threshold_dbm", _as_float),
    "rss.lock_threshold_dbm": ("rss", "lock_threshold_dbm", _as_float),
    "rss.engine_threshold_dbm": ("rss", "engine_threshold_dbm", _as_float),
    "rss.phone_min_m": ("rss", "phone_min_m", _as_float),
    "rss.phone_max_m": ("rss", "phone_max_m", _as_float),
    "rss.phone_step_m": ("rss", "phone_step_m", _as_float),
    "rss.presets": ("rss", "presets", _as_str_tuple),
    "rss.shadow_hand_db": ("rss", "shadow_hand_db", _as_float),
    "rss.shadow_jacket_db": ("rss", "shadow_jacket_db", _as_float),
    "rss.shadow_trouser_db": ("rss", "shadow_trouser_db", _as_float),
    "rss.shadow_trouser_back_db": ("rss", "shadow_trouser_back_db", _as_float),
    "rss.primary_offset_m": ("rss", "primary_offset_m", _as_float),
    "rss.link_m": ("rss", "link_m", _as_float),
}

_SECTION_TYPES = {
    "sweep": ToneSweep,
    "channel": ChannelModelSpec,
    "relay": RelayConfig,
    "noise": NoiseConfig,
    "attack": AttackConfig,
    "placement": PlacementConfig,
    "detection": DetectionConfig,
    "tdd": TddTimingConfig,
    "grid": GridConfig,
    "ota": OtaConfig,
    "recip": RecipConfig,
    "rss": RssConfig,
}


def parse_scenario_text(text: str) -> dict[str, str]:
    """Raw key/value pairs from scenario text; no interpretation yet."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ScenarioError(f"line {lineno}: empty key")
        if key in mapping:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def scenario_from_mapping(mapping: dict[str, str]) -> ScenarioConfig:
    top: dict[str, object] = {}
    per_section: dict[str, dict[str, object]] = {name: {} for name in _SECTION_TYPES}
    for key, raw_value in mapping.items():
        if key not in _KEY_TABLE:
            raise ScenarioError(f"unknown scenario key: {key!r}")
        section, attr, parser = _KEY_TABLE[key]
        try:
            value = parser(raw_value)
        except ScenarioError as exc:
            raise ScenarioError(f"{key}: {exc}") from None
        if section == "":
            top[attr] = value
        else:
            per_section[section][attr] = value

    kwargs: dict[str, object] = dict(top)
    for name, cls in _SECTION_TYPES.items():
        try:
            kwargs[name] = cls(**per_section[name])
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"section {name!r}: {exc}") from None
    try:
        return ScenarioConfig(**kwargs).validated()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return scenario_from_mapping(parse_scenario_text(text))
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def bundled_scenario_path(experiment: str) -> Path:
    """Path of the scenario file shipped for one experiment."""
    if experiment not in EXPERIMENTS:
        raise ScenarioError(f"unknown experiment: {experiment!r}")
    name = experiment.replace("-", "_") + ".cfg"
    return Path(__file__).resolve().parent.parent / "scenarios" / name
