"""Downlink physics and one-step dynamics: fixed transmit beamforming, per-UE
SINR, sum rate, the rate-minus-power-cost reward, and the observation fed back
to the learning agent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (ChannelSet, DegenerateChannelError, Geometry,
                      PathlossConfig, PhaseShiftMatrix, effective_channel,
                      generate_channels)
from .jammer import Jammer, JammerAction, JammerView

REWARD_POWER_UNITS = {"watt": 1.0, "milliwatt": 1e3}


@dataclass(frozen=True)
class PowerAllocation:
    """Per-terminal transmit powers in watts under a total budget."""

    powers: np.ndarray
    p_max: float

    def __post_init__(self):
        powers = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "powers", powers)
        if np.any(powers < 0):
            raise ValueError("transmit powers must be non-negative")
        if powers.sum() > self.p_max * (1 + 1e-12) + 1e-300:
            raise ValueError(
                f"power budget violated: sum {powers.sum():.6g} W > p_max {self.p_max:.6g} W")

    @property
    def total(self) -> float:
        return float(self.powers.sum())


@dataclass(frozen=True)
class TransmitBeamformers:
    """Unit-norm transmit directions, one row per terminal (K, N)."""

    vectors: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every beamforming vector must have unit norm")


@dataclass(frozen=True)
class RawObservation:
    """Continuous observation: last step's jamming powers and SINRs, the current
    per-terminal composite channel magnitudes, and the noise floor."""

    prev_jam_powers: np.ndarray
    prev_sinrs: np.ndarray
    channel_magnitudes: np.ndarray
    noise_power: float

    def __post_init__(self):
        for name in ("prev_jam_powers", "prev_sinrs", "channel_magnitudes"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass(frozen=True)
class StepOutcome:
    """Result of one transition: linear SINRs, sum rate (bits/s/Hz), reward,
    and the observation for the next decision."""

    sinrs: np.ndarray
    rate: float
    reward: float
    next_observation: RawObservation


def transmit_beamformer(ch: ChannelSet) -> TransmitBeamformers:
    """Fixed transmit beamformer shared by all terminals: the unit vector
    maximizing the power received at the surface, i.e. the principal right
    singular direction of the BS-to-surface block."""
    g = ch.g_bs_irs
    if not np.any(g):
        raise DegenerateChannelError("BS-to-surface channel is identically zero")
    _, _, vh = np.linalg.svd(g, full_matrices=False)
    w = np.conj(vh[0])
    w = w / np.linalg.norm(w)
    return TransmitBeamformers(np.tile(w, (ch.n_ue, 1)))


def jamming_gains(ch: ChannelSet, jam: JammerAction) -> np.ndarray:
    """|h_k^H z_k|^2 for every terminal."""
    return np.abs(np.einsum("kn,kn->k", np.conj(ch.g_jam_ue), jam.jam_vectors)) ** 2


def _sinr_from_rows(heff: np.ndarray, powers: np.ndarray, w: TransmitBeamformers,
                    jam_terms: np.ndarray, noise: float) -> np.ndarray:
    """SINRs for all terminals given composite rows ``heff`` (K, N)."""
    a = np.abs(heff @ w.vectors.T) ** 2        # a[k, i] = |h_k^H w_i|^2
    received = a @ powers                       # desired + inter-user per terminal
    desired = powers * np.diag(a)
    return desired / (received - desired + jam_terms + noise)


def compute_sinr(k: int, pa: PowerAllocation, phi: PhaseShiftMatrix,
                 w: TransmitBeamformers, jam: JammerAction, ch: ChannelSet,
                 noise: float) -> float:
    """Linear SINR of terminal ``k``: its received power over inter-user
    interference plus jamming plus noise."""
    if noise <= 0:
        raise ValueError("noise power must be positive")
    if not 0 <= k < ch.n_ue:
        raise IndexError(f"UE index {k} out of range [0, {ch.n_ue})")
    heff = np.stack([effective_channel(i, phi, ch) for i in range(ch.n_ue)])
    jam_terms = jam.jam_powers * jamming_gains(ch, jam)
    return float(_sinr_from_rows(heff, pa.powers, w, jam_terms, noise)[k])


def system_rate(pa: PowerAllocation, phi: PhaseShiftMatrix, w: TransmitBeamformers,
                jam: JammerAction, ch: ChannelSet, noise: float) -> float:
    """Sum of log2(1 + SINR_k) over all terminals, in bits/s/Hz."""
    if noise <= 0:
        raise ValueError("noise power must be positive")
    heff = np.stack([effective_channel(i, phi, ch) for i in range(ch.n_ue)])
    jam_terms = jam.jam_powers * jamming_gains(ch, jam)
    sinrs = _sinr_from_rows(heff, pa.powers, w, jam_terms, noise)
    return float(np.log2(1.0 + sinrs).sum())


def reward(rate: float, pa: PowerAllocation, lambda1: float,
           power_unit: str = "watt") -> float:
    """Sum rate minus lambda1 times the total transmit power, the latter
    expressed in the configured unit."""
    if lambda1 < 0:
        raise ValueError("lambda1 must be non-negative")
    scale = REWARD_POWER_UNITS[power_unit]
    return rate - lambda1 * pa.total * scale


class AntiJamEnv:
    """Episodic downlink against a jammer.

    Channels are redrawn once per coherence block (`new_episode`) and held
    fixed within it; the transmit beamformer is recomputed from each draw. With
    ``irs_enabled=False`` the surface contributes nothing and only the direct
    links carry signal.
    """

    def __init__(self, geometry: Geometry, pathloss: PathlossConfig,
                 n_bs_antennas: int = 8, n_irs_elements: int = 60,
                 n_jam_antennas: int = 8, noise_watts: float = 1e-13,
                 p_max_watts: float = 1.0, lambda1: float = 1.0,
                 reward_power_unit: str = "watt", irs_enabled: bool = True,
                 jam_estimate_noise_std: float = 0.0):
        if noise_watts <= 0:
            raise ValueError("noise power must be positive")
        if reward_power_unit not in REWARD_POWER_UNITS:
            raise ValueError(f"unknown reward power unit {reward_power_unit!r}")
        self.geometry = geometry
        self.pathloss = pathloss
        self.n_bs_antennas = n_bs_antennas
        self.n_irs_elements = n_irs_elements
        self.n_jam_antennas = n_jam_antennas
        self.noise = noise_watts
        self.p_max = p_max_watts
        self.lambda1 = lambda1
        self.reward_power_unit = reward_power_unit
        self.irs_enabled = irs_enabled
        self.jam_estimate_noise_std = jam_estimate_noise_std
        self._ch: ChannelSet | None = None
        self._w: TransmitBeamformers | None = None
        self.last_jam_action: JammerAction | None = None
        self._prev_sinrs = np.zeros(geometry.n_ue)
        self._prev_rate = 0.0
        self._step_index = 0

    @property
    def n_ue(self) -> int:
        return self.geometry.n_ue

    @property
    def channels(self) -> ChannelSet:
        if self._ch is None:
            raise RuntimeError("call new_episode before using the environment")
        return self._ch

    @property
    def beamformers(self) -> TransmitBeamformers:
        if self._w is None:
            raise RuntimeError("call new_episode before using the environment")
        return self._w

    def new_episode(self, rng: np.random.Generator) -> RawObservation:
        """Redraw channels for a fresh coherence block and return the initial
        observation (no jamming or SINR history, magnitudes under zero phases)."""
        self._ch = generate_channels(self.geometry, self.pathloss, self.n_bs_antennas,
                                     self.n_irs_elements, self.n_jam_antennas, rng)
        self._w = transmit_beamformer(self._ch)
        self.last_jam_action = None
        self._prev_sinrs = np.zeros(self.n_ue)
        self._prev_rate = 0.0
        self._step_index = 0
        zeros = np.zeros(self.n_ue)
        mags = self._magnitudes(PhaseShiftMatrix.zeros(self.n_irs_elements))
        return RawObservation(zeros, zeros, mags, self.noise)

    def _effective_rows(self, phi: PhaseShiftMatrix) -> np.ndarray:
        ch = self.channels
        if not self.irs_enabled:
            return np.conj(ch.g_bs_ue)
        return (np.conj(ch.g_irs_ue) * phi.coefficients) @ ch.g_bs_irs + np.conj(ch.g_bs_ue)

    def _magnitudes(self, phi: PhaseShiftMatrix) -> np.ndarray:
        return np.linalg.norm(self._effective_rows(phi), axis=1)

    def evaluate(self, pa: PowerAllocation, phi: PhaseShiftMatrix,
                 jam: JammerAction) -> tuple[np.ndarray, float, float]:
        """Physics only, no state change: (sinrs, rate, reward) of applying
        ``pa`` and ``phi`` against a known jammer action."""
        jam_terms = jam.jam_powers * jamming_gains(self.channels, jam)
        sinrs = _sinr_from_rows(self._effective_rows(phi), pa.powers, self._w,
                                jam_terms, self.noise)
        rate = float(np.log2(1.0 + sinrs).sum())
        return sinrs, rate, reward(rate, pa, self.lambda1, self.reward_power_unit)

    def zero_jam_action(self) -> JammerAction:
        """Placeholder action for steps where no jamming has been observed yet."""
        k = self.n_ue
        vecs = np.zeros((k, self.n_jam_antennas), dtype=complex)
        vecs[:, 0] = 1.0
        return JammerAction(np.zeros(k), vecs)

    def step(self, pa: PowerAllocation, phi: PhaseShiftMatrix, jammer: Jammer,
             rng: np.random.Generator) -> StepOutcome:
        """One transition: the jammer acts against the current view, the
        physics are evaluated, the jammer sees the result, and the next
        observation carries this step's jamming powers and SINRs."""
        if pa.total > self.p_max * (1 + 1e-12):
            raise ValueError("infeasible allocation reached the environment; "
                             "the action codec must enforce the power budget")
        view = JammerView(self._prev_sinrs, self._prev_rate, self._step_index)
        jam = jammer.decide(view, self.channels, rng)
        sinrs, rate, rew = self.evaluate(pa, phi, jam)
        jammer.feedback(sinrs, rate)

        observed_jam = jam.jam_powers.copy()
        if self.jam_estimate_noise_std > 0:
            factor = 1.0 + self.jam_estimate_noise_std * rng.standard_normal(self.n_ue)
            observed_jam = np.clip(observed_jam * factor, 0.0, None)
        next_obs = RawObservation(observed_jam, sinrs, self._magnitudes(phi), self.noise)

        self.last_jam_action = jam
        self._prev_sinrs = sinrs
        self._prev_rate = rate
        self._step_index += 1
        return StepOutcome(sinrs, rate, rew, next_obs)
