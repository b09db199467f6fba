"""Experiment configuration: JSON schema mirroring the runtime objects, strict
loading with field-path diagnostics, dotted-path overrides, and the single
dBm-to-watt conversion point (all physics downstream is SI)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import Geometry, PathlossConfig
from .environment import REWARD_POWER_UNITS
from .jammer import JAMMER_KINDS

APPROACHES = ("wolf-phc", "q-learning", "greedy", "no-irs", "random")
SWEEP_AXES = ("p_max", "m_elements")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


@dataclass
class GeometryConfig:
    bs_position: list = field(default_factory=lambda: [0.0, 0.0])
    irs_position: list = field(default_factory=lambda: [75.0, 100.0])
    jammer_position: list = field(default_factory=lambda: [100.0, 50.0])
    ue_region: list = field(default_factory=lambda: [50.0, 150.0, 0.0, 100.0])
    ue_positions: list | None = None
    min_ue_separation: float = 1.0

    def validate(self, path: str):
        for name in ("bs_position", "irs_position", "jammer_position"):
            if len(getattr(self, name)) != 2:
                raise ConfigError(f"{path}.{name}: expected [x, y]")
        if len(self.ue_region) != 4 or self.ue_region[0] >= self.ue_region[1] \
                or self.ue_region[2] >= self.ue_region[3]:
            raise ConfigError(f"{path}.ue_region: expected [xmin, xmax, ymin, ymax] "
                              "with xmin < xmax and ymin < ymax")
        if self.min_ue_separation <= 0:
            raise ConfigError(f"{path}.min_ue_separation: must be positive")

    def resolve(self, n_ue: int, rng: np.random.Generator) -> Geometry:
        """Concrete geometry: explicit UE positions win over random placement."""
        if self.ue_positions is not None:
            if len(self.ue_positions) != n_ue:
                raise ConfigError(f"geometry.ue_positions: expected {n_ue} entries")
            return Geometry(self.bs_position, self.irs_position, self.jammer_position,
                            np.asarray(self.ue_positions, dtype=float), tuple(self.ue_region))
        return Geometry.with_random_ues(self.bs_position, self.irs_position,
                                        self.jammer_position, self.ue_region, n_ue,
                                        rng, self.min_ue_separation)


@dataclass
class SystemConfig:
    n_bs_antennas: int = 8
    n_jam_antennas: int = 8
    n_irs_elements: int = 60
    n_ue: int = 4
    noise_dbm: float = -100.0
    p_max_dbm: float = 30.0

    def validate(self, path: str):
        for name in ("n_bs_antennas", "n_jam_antennas", "n_irs_elements", "n_ue"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{path}.{name}: must be >= 1")

    @property
    def noise_watts(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def p_max_watts(self) -> float:
        return dbm_to_watts(self.p_max_dbm)


@dataclass
class RewardConfig:
    lambda1: float = 1.0
    power_unit: str = "watt"

    def validate(self, path: str):
        if self.lambda1 < 0:
            raise ConfigError(f"{path}.lambda1: must be non-negative")
        if self.power_unit not in REWARD_POWER_UNITS:
            raise ConfigError(f"{path}.power_unit: expected one of "
                              f"{sorted(REWARD_POWER_UNITS)}")


@dataclass
class JammerConfig:
    kind: str = "q-learning"
    power_grid_dbm: list = field(default_factory=lambda: [15.0, 20.0, 25.0, 30.0, 35.0, 40.0])
    direction: str = "matched"
    power_dbm: float | None = None  # fixed behavior only; defaults to the grid max
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    estimate_noise_std: float = 0.0

    def validate(self, path: str):
        if self.kind not in JAMMER_KINDS:
            raise ConfigError(f"{path}.kind: expected one of {list(JAMMER_KINDS)}")
        if not self.power_grid_dbm or sorted(self.power_grid_dbm) != list(self.power_grid_dbm):
            raise ConfigError(f"{path}.power_grid_dbm: must be a non-empty ascending list")
        if self.direction not in ("matched", "random"):
            raise ConfigError(f"{path}.direction: expected 'matched' or 'random'")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"{path}.alpha: must be in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"{path}.gamma: must be in (0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"{path}.epsilon: must be in [0, 1]")
        if self.estimate_noise_std < 0:
            raise ConfigError(f"{path}.estimate_noise_std: must be non-negative")

    @property
    def power_grid_watts(self) -> list:
        return [dbm_to_watts(p) for p in self.power_grid_dbm]

    @property
    def power_watts(self) -> float | None:
        return None if self.power_dbm is None else dbm_to_watts(self.power_dbm)


@dataclass
class CodecConfig:
    power_fractions: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    n_phase_levels: int = 4
    n_phase_groups: int = 4
    n_jam_bins: int = 4
    n_sinr_bins: int = 4
    n_mag_bins: int = 3
    jam_edges_dbm: list | None = None   # defaults to the jammer grid span
    sinr_edges_db: list | None = None   # defaults to [-10, 30] dB split evenly
    mag_edges_db: list | None = None    # defaults to warm-up quantiles
    warmup_draws: int = 64

    def validate(self, path: str):
        fr = self.power_fractions
        if not fr or sorted(fr) != list(fr) or fr[0] < 0 or fr[-1] > 1 \
                or len(set(fr)) != len(fr):
            raise ConfigError(f"{path}.power_fractions: must be strictly ascending "
                              "within [0, 1]")
        for name in ("n_phase_levels", "n_phase_groups", "n_jam_bins",
                     "n_sinr_bins", "n_mag_bins", "warmup_draws"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{path}.{name}: must be >= 1")
        for name in ("jam_edges_dbm", "sinr_edges_db", "mag_edges_db"):
            edges = getattr(self, name)
            if edges is not None and (len(edges) < 2 or sorted(edges) != list(edges)):
                raise ConfigError(f"{path}.{name}: must be an ascending list of edges")


@dataclass
class AgentConfig:
    alpha: float = 5e-3
    gamma: float = 0.9
    epsilon: float = 0.1
    delta_win: float = 0.04
    delta_lose: float = 0.16
    selection: str = "policy"
    alpha_decay: float = 1.0

    def validate(self, path: str):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"{path}.alpha: must be in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"{path}.gamma: must be in (0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"{path}.epsilon: must be in [0, 1]")
        if not 0 < self.delta_win <= self.delta_lose <= 1:
            raise ConfigError(f"{path}.delta_win/delta_lose: "
                              "need 0 < delta_win <= delta_lose <= 1")
        if self.selection not in ("policy", "epsilon-greedy"):
            raise ConfigError(f"{path}.selection: expected 'policy' or 'epsilon-greedy'")
        if not 0 < self.alpha_decay <= 1:
            raise ConfigError(f"{path}.alpha_decay: must be in (0, 1]")


@dataclass
class ScheduleConfig:
    n_episodes: int = 500
    steps_per_episode: int = 200
    smoothing_window: int | None = None  # defaults to the final-plateau span

    def validate(self, path: str):
        if self.n_episodes < 1 or self.steps_per_episode < 1:
            raise ConfigError(f"{path}: episode and step counts must be >= 1")
        if self.smoothing_window is not None and self.smoothing_window < 1:
            raise ConfigError(f"{path}.smoothing_window: must be >= 1")

    @property
    def n_steps(self) -> int:
        return self.n_episodes * self.steps_per_episode

    @property
    def window(self) -> int:
        # Matching the window to the plateau span makes the trailing moving
        # average coincide with the plateau, so the convergence step always
        # exists on a finite trace.
        return self.smoothing_window or max(1, int(np.ceil(0.1 * self.n_steps)))


@dataclass
class SweepConfig:
    p_max_dbm: list = field(default_factory=lambda: [15.0, 20.0, 25.0, 30.0, 35.0, 40.0])
    m_elements: list = field(default_factory=lambda: [20, 60, 100])

    def validate(self, path: str):
        if not self.p_max_dbm or not self.m_elements:
            raise ConfigError(f"{path}: sweep axes must be non-empty")


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    pathloss: PathlossConfig = field(default_factory=PathlossConfig)
    system: SystemConfig = field(default_factory=SystemConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    jammer: JammerConfig = field(default_factory=JammerConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seeds: list = field(default_factory=lambda: [0])
    approaches: list = field(default_factory=lambda: ["wolf-phc", "q-learning",
                                                      "greedy", "no-irs"])

    def validate(self):
        for f in fields(self):
            section = getattr(self, f.name)
            if hasattr(section, "validate"):
                try:
                    section.validate(f.name)
                except ConfigError:
                    raise
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{f.name}: {exc}") from exc
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: must be distinct")
        for a in self.approaches:
            if a not in APPROACHES:
                raise ConfigError(f"approaches: unknown approach {a!r}; "
                                  f"expected one of {list(APPROACHES)}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replaced(self, **section_updates) -> "ExperimentConfig":
        """New config with whole or partial sections replaced, re-validated."""
        d = self.to_dict()
        for key, val in section_updates.items():
            if isinstance(val, dict):
                d[key].update(val)
            else:
                d[key] = val
        return config_from_dict(d)

    @property
    def power_levels_watts(self) -> np.ndarray:
        return np.asarray(self.codec.power_fractions) * self.system.p_max_watts

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _build_section(cls, raw: dict, path: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SECTION_TYPES = {
    "geometry": GeometryConfig,
    "pathloss": PathlossConfig,
    "system": SystemConfig,
    "reward": RewardConfig,
    "jammer": JammerConfig,
    "codec": CodecConfig,
    "agent": AgentConfig,
    "schedule": ScheduleConfig,
    "sweep": SweepConfig,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object of sections")
    known = set(_SECTION_TYPES) | {"seeds", "approaches"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    kwargs = {}
    for name, value in raw.items():
        if name in ("seeds", "approaches"):
            kwargs[name] = list(value)
        elif isinstance(value, dict):
            kwargs[name] = _build_section(_SECTION_TYPES[name], value, name)
        else:
            raise ConfigError(f"{name}: expected an object")
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw)


def parse_override(text: str) -> tuple[list[str], object]:
    """Parse one ``section.key=value`` override; the value is JSON when it
    parses, a bare string otherwise."""
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected key=value")
    key, _, val = text.partition("=")
    pathparts = key.strip().split(".")
    if not all(pathparts):
        raise ConfigError(f"override {text!r}: empty path component")
    try:
        value = json.loads(val)
    except json.JSONDecodeError:
        value = val
    return pathparts, value


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply dotted-path overrides to a raw config dict (copy returned)."""
    out = json.loads(json.dumps(raw))
    for text in overrides:
        pathparts, value = parse_override(text)
        node = out
        for part in pathparts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[pathparts[-1]] = value
    return out


def load_config_with_overrides(path, overrides=()) -> tuple[ExperimentConfig, dict]:
    """Load, apply overrides, validate. Returns the config and the raw dict
    (post-override) for echoing into run metadata."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    raw = apply_overrides(raw, overrides)
    return config_from_dict(raw), raw
