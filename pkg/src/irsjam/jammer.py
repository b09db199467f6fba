"""Multi-antenna jammer behaviors: fixed split, target sweeping, reactive
targeting, and a tabular-learning jammer that adapts against the downlink."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, DegenerateChannelError

JAMMER_KINDS = ("fixed", "sweep", "reactive", "q-learning")


@dataclass(frozen=True)
class JammerAction:
    """Per-terminal jamming: unit-norm steering rows (K, NJ) plus the emitted
    power per terminal in watts. The power budget is carried by the scalars,
    not the vectors."""

    jam_powers: np.ndarray
    jam_vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "jam_powers", np.asarray(self.jam_powers, dtype=float))
        if np.any(self.jam_powers < 0):
            raise ValueError("jamming powers must be non-negative")
        if self.jam_vectors.shape[0] != self.jam_powers.size:
            raise ValueError("one steering vector per terminal is required")

    @property
    def total_power(self) -> float:
        return float(self.jam_powers.sum())


@dataclass(frozen=True)
class JammerView:
    """What the jammer can observe before acting: the previous step's SINRs and
    system rate (zeros at the start of a coherence block) and the step index."""

    prev_sinrs: np.ndarray
    prev_rate: float
    step_index: int


def matched_vector(h: np.ndarray) -> np.ndarray:
    """Unit-norm direction aligned with the victim channel ``h``."""
    n = np.linalg.norm(h)
    if n == 0:
        raise DegenerateChannelError("cannot match a zero jammer channel")
    return h / n


def random_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Isotropic complex unit vector of length ``n``."""
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    norm = np.linalg.norm(v)
    while norm == 0:  # pragma: no cover - probability zero
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        norm = np.linalg.norm(v)
    return v / norm


def jam_vector(k: int, ch: ChannelSet, mode: str = "matched",
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Steering vector for terminal ``k``: matched to its jammer channel by
    default, or an isotropic random unit vector."""
    if mode == "matched":
        return matched_vector(ch.g_jam_ue[k])
    if mode == "random":
        if rng is None:
            raise ValueError("random steering requires an rng")
        return random_unit_vector(ch.n_jam_antennas, rng)
    raise ValueError(f"unknown steering mode {mode!r}")


class Jammer:
    """Base class: concrete behaviors implement ``_powers``; the budget
    invariant (total emitted power <= the largest grid level) holds for all."""

    kind = "base"

    def __init__(self, n_ue: int, power_grid_watts, direction: str = "matched"):
        self.n_ue = n_ue
        self.power_grid = np.sort(np.asarray(power_grid_watts, dtype=float))
        if self.power_grid.size == 0 or np.any(self.power_grid <= 0):
            raise ValueError("power grid must contain positive levels")
        if direction not in ("matched", "random"):
            raise ValueError(f"unknown steering mode {direction!r}")
        self.direction = direction

    def _vectors(self, ch: ChannelSet, rng: np.random.Generator) -> np.ndarray:
        return np.stack([jam_vector(k, ch, self.direction, rng) for k in range(self.n_ue)])

    def _powers(self, view: JammerView, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def decide(self, view: JammerView, ch: ChannelSet, rng: np.random.Generator) -> JammerAction:
        powers = self._powers(view, rng)
        if powers.sum() > self.power_grid[-1] * (1 + 1e-12):
            raise ValueError("jammer behavior exceeded its power budget")
        return JammerAction(powers, self._vectors(ch, rng))

    def feedback(self, sinrs: np.ndarray, rate: float) -> None:
        """Called after the step it acted in; only learning behaviors use it."""


class FixedJammer(Jammer):
    """Constant total power split evenly across terminals."""

    kind = "fixed"

    def __init__(self, n_ue, power_grid_watts, direction="matched", power_watts=None):
        super().__init__(n_ue, power_grid_watts, direction)
        self.power = float(self.power_grid[-1] if power_watts is None else power_watts)

    def _powers(self, view, rng):
        return np.full(self.n_ue, self.power / self.n_ue)


class SweepJammer(Jammer):
    """Rotates full power through the terminals, one per step."""

    kind = "sweep"

    def _powers(self, view, rng):
        powers = np.zeros(self.n_ue)
        powers[view.step_index % self.n_ue] = self.power_grid[-1]
        return powers


class ReactiveJammer(Jammer):
    """Concentrates maximum power on the terminal with the highest previous
    SINR (lowest index on ties)."""

    kind = "reactive"

    def _powers(self, view, rng):
        powers = np.zeros(self.n_ue)
        powers[int(np.argmax(view.prev_sinrs))] = self.power_grid[-1]
        return powers


class LearningJammer(Jammer):
    """Tabular Q-learning jammer. State: (terminal with the best previous SINR,
    its own previous target), which is enough memory to lock onto deterministic
    downlink policies. Action: (target terminal, grid power level). Reward: the
    negative of the system rate it observes after acting."""

    kind = "q-learning"

    def __init__(self, n_ue, power_grid_watts, direction="matched",
                 alpha=0.1, gamma=0.9, epsilon=0.1):
        super().__init__(n_ue, power_grid_watts, direction)
        if not 0 < alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 < gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.n_actions = n_ue * self.power_grid.size
        self.q = np.zeros((n_ue * n_ue, self.n_actions))
        self._prev_target = 0
        self._pending: tuple[int, int] | None = None

    def _state(self, sinrs) -> int:
        return int(np.argmax(sinrs)) * self.n_ue + self._prev_target

    def _powers(self, view, rng):
        s = self._state(view.prev_sinrs)
        if rng.random() < self.epsilon:
            a = int(rng.integers(self.n_actions))
        else:
            a = int(np.argmax(self.q[s]))
        target, level = divmod(a, self.power_grid.size)
        self._pending = (s, a)
        self._prev_target = target
        powers = np.zeros(self.n_ue)
        powers[target] = self.power_grid[level]
        return powers

    def feedback(self, sinrs, rate):
        if self._pending is None:
            return
        s, a = self._pending
        self._pending = None
        s_next = self._state(sinrs)
        target = -rate + self.gamma * self.q[s_next].max()
        self.q[s, a] = (1 - self.alpha) * self.q[s, a] + self.alpha * target


def make_jammer(kind: str, n_ue: int, power_grid_watts, direction: str = "matched",
                power_watts=None, alpha=0.1, gamma=0.9, epsilon=0.1) -> Jammer:
    """Factory keyed on the behavior name."""
    if kind == "fixed":
        return FixedJammer(n_ue, power_grid_watts, direction, power_watts)
    if kind == "sweep":
        return SweepJammer(n_ue, power_grid_watts, direction)
    if kind == "reactive":
        return ReactiveJammer(n_ue, power_grid_watts, direction)
    if kind == "q-learning":
        return LearningJammer(n_ue, power_grid_watts, direction, alpha, gamma, epsilon)
    raise ValueError(f"unknown jammer kind {kind!r}; expected one of {JAMMER_KINDS}")
