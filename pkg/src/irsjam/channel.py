"""Propagation model: geometry, log-distance pathloss, Rayleigh fading, IRS composition.

All quantities are SI (meters, watts, linear power gains). Channel blocks are
complex baseband coefficients; the reflect surface applies per-element unit-modulus
phase rotations to the BS-to-surface block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateChannelError(ValueError):
    """A channel block is identically zero where a direction is required."""


@dataclass(frozen=True)
class Geometry:
    """Node placement on the 2-D plane.

    ``ue_region`` is (xmin, xmax, ymin, ymax) and describes where user terminals
    may be dropped when positions are randomized.
    """

    bs_position: np.ndarray
    irs_position: np.ndarray
    jammer_position: np.ndarray
    ue_positions: np.ndarray  # (K, 2)
    ue_region: tuple[float, float, float, float] = (50.0, 150.0, 0.0, 100.0)

    def __post_init__(self):
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float))
        object.__setattr__(self, "irs_position", np.asarray(self.irs_position, dtype=float))
        object.__setattr__(self, "jammer_position", np.asarray(self.jammer_position, dtype=float))
        ues = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        object.__setattr__(self, "ue_positions", ues)
        if ues.shape[0] < 1 or ues.shape[1] != 2:
            raise ValueError("ue_positions must be a (K, 2) array with K >= 1")

    @classmethod
    def with_random_ues(cls, bs_position, irs_position, jammer_position, ue_region,
                        n_ue, rng, min_separation=1.0):
        """Drop ``n_ue`` terminals uniformly in ``ue_region``.

        Draws that land within ``min_separation`` meters of the BS, surface or
        jammer are resampled so every pathloss distance stays positive.
        """
        xmin, xmax, ymin, ymax = ue_region
        anchors = np.asarray([bs_position, irs_position, jammer_position], dtype=float)
        ues = np.empty((n_ue, 2))
        for k in range(n_ue):
            for _ in range(1000):
                p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
                if np.linalg.norm(anchors - p, axis=1).min() >= min_separation:
                    ues[k] = p
                    break
            else:
                raise ValueError("could not place UE %d with the requested separation" % k)
        return cls(bs_position, irs_position, jammer_position, ues, tuple(ue_region))

    @property
    def n_ue(self) -> int:
        return self.ue_positions.shape[0]

    def d_bs_irs(self) -> float:
        return float(np.linalg.norm(self.irs_position - self.bs_position))

    def d_bs_ue(self) -> np.ndarray:
        return np.linalg.norm(self.ue_positions - self.bs_position, axis=1)

    def d_irs_ue(self) -> np.ndarray:
        return np.linalg.norm(self.ue_positions - self.irs_position, axis=1)

    def d_jam_ue(self) -> np.ndarray:
        return np.linalg.norm(self.ue_positions - self.jammer_position, axis=1)


@dataclass(frozen=True)
class PathlossConfig:
    """Log-distance pathloss parameters: reference loss pl0_db at distance d0,
    plus one exponent per link class (BS-UE, BS-IRS, IRS-UE, jammer-UE)."""

    pl0_db: float = 30.0
    d0: float = 1.0
    beta_bu: float = 3.75
    beta_br: float = 2.2
    beta_ru: float = 2.2
    beta_ju: float = 2.5

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        for name in ("beta_bu", "beta_br", "beta_ru", "beta_ju"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def pathloss_gain(d, beta, cfg: PathlossConfig):
    """Linear channel power gain at distance ``d`` for exponent ``beta``.

    Gain in dB is -(pl0_db + 10*beta*log10(d/d0)), so it decays monotonically
    with distance and equals 10^(-pl0_db/10) at the reference distance.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    loss_db = cfg.pl0_db + 10.0 * beta * np.log10(d / cfg.d0)
    gain = 10.0 ** (-loss_db / 10.0)
    return float(gain) if gain.ndim == 0 else gain


def sample_fading(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (rows, cols) i.i.d. circularly-symmetric complex Gaussian entries,
    zero mean, unit variance (Rayleigh envelope)."""
    if rows < 1 or cols < 1:
        raise ValueError("fading block must have at least one row and column")
    re = rng.standard_normal((rows, cols))
    im = rng.standard_normal((rows, cols))
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelSet:
    """One coherence interval's channel blocks.

    g_bs_irs: (M, N)  BS to surface
    g_bs_ue:  (K, N)  direct BS to terminal rows
    g_irs_ue: (K, M)  surface to terminal rows
    g_jam_ue: (K, NJ) jammer to terminal rows
    """

    g_bs_irs: np.ndarray
    g_bs_ue: np.ndarray
    g_irs_ue: np.ndarray
    g_jam_ue: np.ndarray

    def __post_init__(self):
        m, n = self.g_bs_irs.shape
        k = self.g_bs_ue.shape[0]
        if self.g_bs_ue.shape[1] != n:
            raise ValueError("g_bs_ue column count must match the BS antenna count")
        if self.g_irs_ue.shape != (k, m):
            raise ValueError("g_irs_ue must be (K, M)")
        if self.g_jam_ue.shape[0] != k:
            raise ValueError("g_jam_ue row count must match K")
        for name in ("g_bs_irs", "g_bs_ue", "g_irs_ue", "g_jam_ue"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n_ue(self) -> int:
        return self.g_bs_ue.shape[0]

    @property
    def n_bs_antennas(self) -> int:
        return self.g_bs_ue.shape[1]

    @property
    def n_irs_elements(self) -> int:
        return self.g_bs_irs.shape[0]

    @property
    def n_jam_antennas(self) -> int:
        return self.g_jam_ue.shape[1]


@dataclass(frozen=True)
class PhaseShiftMatrix:
    """Diagonal reflection coefficients of the surface: unit amplitude, one
    phase angle in [0, 2*pi] per element."""

    thetas: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        if thetas.ndim != 1 or thetas.size < 1:
            raise ValueError("thetas must be a non-empty 1-D array")
        if np.any(thetas < 0.0) or np.any(thetas > TWO_PI):
            raise ValueError("phase angles must lie in [0, 2*pi]")

    @classmethod
    def zeros(cls, m: int) -> "PhaseShiftMatrix":
        return cls(np.zeros(m))

    @property
    def m(self) -> int:
        return self.thetas.size

    @property
    def amplitudes(self) -> np.ndarray:
        return np.ones(self.m)

    @property
    def coefficients(self) -> np.ndarray:
        """Complex reflection coefficients e^{j*theta_m}."""
        return np.exp(1j * self.thetas)


def generate_channels(geom: Geometry, cfg: PathlossConfig, n_bs_antennas: int,
                      n_irs_elements: int, n_jam_antennas: int,
                      rng: np.random.Generator, fading=sample_fading) -> ChannelSet:
    """Draw one coherence interval: sqrt(pathloss) scaled small-scale fading for
    every link. ``fading`` is injectable so tests can pin the small-scale part."""
    k = geom.n_ue
    g_bs_irs = np.sqrt(pathloss_gain(geom.d_bs_irs(), cfg.beta_br, cfg)) \
        * fading(n_irs_elements, n_bs_antennas, rng)
    g_bs_ue = np.sqrt(pathloss_gain(geom.d_bs_ue(), cfg.beta_bu, cfg))[:, None] \
        * fading(k, n_bs_antennas, rng)
    g_irs_ue = np.sqrt(pathloss_gain(geom.d_irs_ue(), cfg.beta_ru, cfg))[:, None] \
        * fading(k, n_irs_elements, rng)
    g_jam_ue = np.sqrt(pathloss_gain(geom.d_jam_ue(), cfg.beta_ju, cfg))[:, None] \
        * fading(k, n_jam_antennas, rng)
    return ChannelSet(g_bs_irs, g_bs_ue, g_irs_ue, g_jam_ue)


def effective_channel(k: int, phi: PhaseShiftMatrix, ch: ChannelSet) -> np.ndarray:
    """Composite downlink row for terminal ``k`` (zero-based): the surface-reflected
    path plus the direct path, as a length-N complex vector."""
    if not 0 <= k < ch.n_ue:
        raise IndexError(f"UE index {k} out of range [0, {ch.n_ue})")
    reflected = (np.conj(ch.g_irs_ue[k]) * phi.coefficients) @ ch.g_bs_irs
    return reflected + np.conj(ch.g_bs_ue[k])
