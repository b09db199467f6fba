"""Bridges the continuous physics and the tabular learners: bins observations
into a single state index and enumerates the joint (power split, grouped phase)
action space, excluding power combinations that break the budget."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import PhaseShiftMatrix, TWO_PI
from .environment import PowerAllocation, RawObservation


def _bin_index(value: float, edges: np.ndarray) -> int:
    """Right-open bins over ``edges`` (last bin right-closed); values outside
    the span clamp into the end bins."""
    idx = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(idx, 0), len(edges) - 2)


def _to_dbm(watts: float) -> float:
    if watts <= 0:
        return -np.inf
    return 10.0 * np.log10(watts) + 30.0


def _to_db(linear: float) -> float:
    if linear <= 0:
        return -np.inf
    return 10.0 * np.log10(linear)


def _mag_db(mag: float) -> float:
    if mag <= 0:
        return -np.inf
    return 20.0 * np.log10(mag)


def _check_edges(name: str, edges: np.ndarray):
    if edges.size < 2:
        raise ValueError(f"{name} needs at least two edges")
    if np.any(np.diff(edges) <= 0):
        raise ValueError(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class StateCodec:
    """Maps a RawObservation to one index. Per-terminal values are aggregated
    by their mean before binning so the state count stays independent of K.

    Edges are full bin boundaries: B bins need B+1 edges. Jamming power bins
    are in dBm, SINR bins in dB, channel-magnitude bins in amplitude dB.
    """

    jam_edges_dbm: np.ndarray
    sinr_edges_db: np.ndarray
    mag_edges_db: np.ndarray

    def __post_init__(self):
        for name in ("jam_edges_dbm", "sinr_edges_db", "mag_edges_db"):
            edges = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, edges)
            _check_edges(name, edges)

    @property
    def n_jam_bins(self) -> int:
        return self.jam_edges_dbm.size - 1

    @property
    def n_sinr_bins(self) -> int:
        return self.sinr_edges_db.size - 1

    @property
    def n_mag_bins(self) -> int:
        return self.mag_edges_db.size - 1

    @property
    def n_states(self) -> int:
        return self.n_jam_bins * self.n_sinr_bins * self.n_mag_bins

    def quantize(self, obs: RawObservation) -> int:
        """Mixed-radix index over (jam bin, SINR bin, magnitude bin)."""
        for name in ("prev_jam_powers", "prev_sinrs", "channel_magnitudes"):
            if not np.all(np.isfinite(getattr(obs, name))):
                raise ValueError(f"observation field {name} contains NaN or inf")
        jam_bin = _bin_index(_to_dbm(float(np.mean(obs.prev_jam_powers))), self.jam_edges_dbm)
        sinr_bin = _bin_index(_to_db(float(np.mean(obs.prev_sinrs))), self.sinr_edges_db)
        mag_bin = _bin_index(_mag_db(float(np.mean(obs.channel_magnitudes))), self.mag_edges_db)
        return (jam_bin * self.n_sinr_bins + sinr_bin) * self.n_mag_bins + mag_bin

    def summary(self) -> dict:
        return {
            "n_states": self.n_states,
            "jam_edges_dbm": self.jam_edges_dbm.tolist(),
            "sinr_edges_db": self.sinr_edges_db.tolist(),
            "mag_edges_db": self.mag_edges_db.tolist(),
        }


def mag_edges_from_samples(samples_db, n_bins: int) -> np.ndarray:
    """Quantile edges (e.g. terciles for 3 bins) from warm-up magnitude samples
    already converted to dB. Degenerate samples fall back to a unit-width bin
    ladder so the edges stay strictly increasing."""
    samples = np.asarray(samples_db, dtype=float)
    edges = np.quantile(samples, np.linspace(0.0, 1.0, n_bins + 1))
    if np.any(np.diff(edges) <= 0):
        lo = float(samples.min())
        edges = lo + np.arange(n_bins + 1, dtype=float)
    return edges


def aggregate_magnitude_db(magnitudes) -> float:
    """Same aggregation the codec applies when binning channel magnitudes."""
    return _mag_db(float(np.mean(np.asarray(magnitudes, dtype=float))))


def feasible_power_combos(power_levels, p_max: float, n_ue: int) -> list[tuple[int, ...]]:
    """All per-terminal level index tuples whose total power fits the budget,
    in lexicographic order (so the all-lowest combo comes first)."""
    levels = np.asarray(power_levels, dtype=float)
    combos = [c for c in itertools.product(range(levels.size), repeat=n_ue)
              if levels[list(c)].sum() <= p_max * (1 + 1e-12)]
    if not combos:
        raise ValueError("no feasible power combination under the budget")
    return combos


@dataclass(frozen=True)
class DecodedAction:
    """A decoded joint action plus the level-index tuples it came from."""

    power: PowerAllocation
    phases: PhaseShiftMatrix
    power_choice: tuple[int, ...]
    phase_choice: tuple[int, ...]


class ActionCodec:
    """Joint action enumeration: feasible power combos (major axis) times
    per-group phase levels (minor axis, mixed radix). Elements are partitioned
    into contiguous groups that share one phase angle."""

    def __init__(self, power_levels, p_max: float, n_phase_levels: int,
                 n_phase_groups: int, n_elements: int, n_ue: int):
        levels = np.asarray(power_levels, dtype=float)
        if np.any(levels < 0):
            raise ValueError("power levels must be non-negative")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("power levels must be strictly increasing")
        if n_phase_levels < 1:
            raise ValueError("need at least one phase level")
        if not 1 <= n_phase_groups <= n_elements:
            raise ValueError("phase group count must be in [1, n_elements]")
        self.power_levels = levels
        self.p_max = float(p_max)
        self.n_phase_levels = int(n_phase_levels)
        self.n_phase_groups = int(n_phase_groups)
        self.n_elements = int(n_elements)
        self.n_ue = int(n_ue)
        self.combos = feasible_power_combos(levels, p_max, n_ue)
        self._combo_index = {c: i for i, c in enumerate(self.combos)}
        # contiguous groups, earlier groups absorb the remainder
        base, extra = divmod(n_elements, n_phase_groups)
        sizes = [base + (1 if g < extra else 0) for g in range(n_phase_groups)]
        self.group_ids = np.repeat(np.arange(n_phase_groups), sizes)
        self.phase_angles = TWO_PI * np.arange(n_phase_levels) / n_phase_levels

    @property
    def n_power_combos(self) -> int:
        return len(self.combos)

    @property
    def n_phase_configs(self) -> int:
        return self.n_phase_levels ** self.n_phase_groups

    @property
    def n_actions(self) -> int:
        return self.n_power_combos * self.n_phase_configs

    def power_for(self, power_choice) -> PowerAllocation:
        return PowerAllocation(self.power_levels[list(power_choice)], self.p_max)

    def phases_for(self, phase_choice) -> PhaseShiftMatrix:
        thetas = self.phase_angles[np.asarray(phase_choice)][self.group_ids]
        return PhaseShiftMatrix(thetas)

    def decode(self, index: int) -> DecodedAction:
        if not 0 <= index < self.n_actions:
            raise IndexError(f"action index {index} out of range [0, {self.n_actions})")
        combo_idx, phase_idx = divmod(int(index), self.n_phase_configs)
        power_choice = self.combos[combo_idx]
        phase_choice = tuple(int(d) for d in np.unravel_index(
            phase_idx, (self.n_phase_levels,) * self.n_phase_groups))
        return DecodedAction(self.power_for(power_choice), self.phases_for(phase_choice),
                             power_choice, phase_choice)

    def encode(self, power_choice, phase_choice) -> int:
        combo_idx = self._combo_index[tuple(power_choice)]
        phase_idx = int(np.ravel_multi_index(
            tuple(phase_choice), (self.n_phase_levels,) * self.n_phase_groups))
        return combo_idx * self.n_phase_configs + phase_idx

    def all_phase_coefficients(self) -> np.ndarray:
        """(n_phase_configs, n_elements) complex reflection coefficients in
        phase-index order; used by vectorized whole-space evaluation."""
        grids = np.meshgrid(*([self.phase_angles] * self.n_phase_groups), indexing="ij")
        group_thetas = np.stack([g.ravel() for g in grids], axis=1)
        return np.exp(1j * group_thetas[:, self.group_ids])

    def summary(self) -> dict:
        return {
            "n_actions": self.n_actions,
            "n_power_combos": self.n_power_combos,
            "n_phase_configs": self.n_phase_configs,
            "power_levels_w": self.power_levels.tolist(),
            "n_phase_levels": self.n_phase_levels,
            "n_phase_groups": self.n_phase_groups,
            "n_elements": self.n_elements,
        }
