"""System configuration, link budget, and multipath channel generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LN2 = math.log(2.0)


class ConfigError(ValueError):
    """Raised when a system or training configuration is invalid."""


def _broadcast(values, m: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 1:
        arr = np.full(m, float(arr[0]))
    if arr.size != m:
        raise ConfigError(f"{name}: expected 1 or {m} entries, got {arr.size}")
    return arr


@dataclass
class SystemConfig:
    """Physical-layer and QoS parameters.

    Rate requirements and transmit power are given in file-facing units
    (bits/s, dBm) and converted exactly once, here, to the internal units
    used by every computation: ``Pmax`` in watts, ``RL``/``RS`` in nats/s.
    Per-user fields (rates, eps) accept a single value, broadcast to all
    M users, or one value per user.
    """

    M: int = 2
    F: int = 40
    L: int = 12                      # subcarriers per RB
    B: float = 30e3                  # subcarrier spacing, Hz
    tau: float = 0.5e-3              # slot duration, s
    Nr: int = 64                     # receive antennas
    pmax_dbm: float = 23.0
    rate_L_bps: tuple = (6e6,)
    rate_S_bps: tuple = (512e3,)
    eps: tuple = (1e-5,)             # decoding error probability, in (0, 0.5)
    distance_m: float = 150.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    penetration_db: float = 20.0
    interference_margin_db: float = 2.0
    path_count: int = 10
    aoa_range_rad: float = math.pi / 3
    delay_spread_s: float = 1e-6

    # internal units, derived once
    Pmax: float = field(init=False)
    RL: np.ndarray = field(init=False)
    RS: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.F < 1:
            raise ConfigError("F must be >= 1")
        for name in ("L", "B", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.Nr < 1:
            raise ConfigError("Nr must be >= 1")
        if self.path_count < 1:
            raise ConfigError("path_count must be >= 1")
        self.Pmax = 10.0 ** ((self.pmax_dbm - 30.0) / 10.0)
        self.RL = _broadcast(self.rate_L_bps, self.M, "rate_L_bps") * LN2
        self.RS = _broadcast(self.rate_S_bps, self.M, "rate_S_bps") * LN2
        self.eps = _broadcast(self.eps, self.M, "eps")
        if np.any(self.RL < 0) or np.any(self.RS < 0):
            raise ConfigError("rate_L_bps/rate_S_bps must be non-negative")
        if np.any(self.eps <= 0) or np.any(self.eps >= 0.5):
            raise ConfigError("eps must lie in (0, 0.5)")

    @property
    def lb(self) -> float:
        """Per-RB noise/rate bandwidth L*B in Hz."""
        return self.L * self.B


@dataclass
class ChannelState:
    """Noise-normalized effective channel gains, shape (M, F), all > 0."""

    gamma: np.ndarray
    seed: int


def link_budget(config: SystemConfig) -> tuple[float, float]:
    """Return (alpha, sigma2): linear large-scale gain and per-RB noise power.

    Path loss is 35.3 + 37.6*log10(d) dB plus the penetration loss; noise
    integrates the PSD over the per-RB bandwidth L*B and adds the receiver
    noise figure and interference margin.
    """
    if config.distance_m <= 0:
        raise ConfigError("distance_m must be positive")
    pl_db = 35.3 + 37.6 * math.log10(config.distance_m) + config.penetration_db
    alpha = 10.0 ** (-pl_db / 10.0)
    sigma2_dbm = (
        config.noise_psd_dbm_hz
        + 10.0 * math.log10(config.lb)
        + config.noise_figure_db
        + config.interference_margin_db
    )
    sigma2 = 10.0 ** ((sigma2_dbm - 30.0) / 10.0)
    return alpha, sigma2


def sample_channel(config: SystemConfig, seed: int) -> ChannelState:
    """Draw one multipath channel realization, deterministic in ``seed``.

    Each user sees ``path_count`` scattered paths with i.i.d. CN(0, 1/P)
    gains, AoA uniform in [-aoa_range, aoa_range] hitting a half-wavelength
    ULA of Nr elements, and delays uniform in [0, delay_spread_s]. Per-RB
    coefficients are evaluated at the RB center frequencies, so gains are
    flat within an RB but frequency-selective across RBs.
    """
    alpha, sigma2 = link_budget(config)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    scale = alpha / sigma2
    centers = (np.arange(config.F) + 0.5) * config.lb
    antennas = np.arange(config.Nr)
    p = config.path_count
    gamma = np.empty((config.M, config.F))
    for m in range(config.M):
        while True:
            gains = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) * math.sqrt(0.5 / p)
            aoa = rng.uniform(-config.aoa_range_rad, config.aoa_range_rad, p)
            delays = rng.uniform(0.0, config.delay_spread_s, p)
            steer = np.exp(-1j * np.pi * np.outer(np.sin(aoa), antennas))   # (P, Nr)
            phases = np.exp(-2j * np.pi * np.outer(delays, centers))        # (P, F)
            h = (gains[:, None] * phases).T @ steer                         # (F, Nr)
            norms = np.einsum("fn,fn->f", h, h.conj()).real
            if np.all(norms > 0):   # zero-norm draw has probability zero; resample
                break
        gamma[m] = scale * norms
    return ChannelState(gamma=gamma, seed=int(seed))


def sample_seed(master_seed: int, index: int) -> int:
    """Derive the per-sample integer seed for sample ``index`` of a dataset."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_dataset(config: SystemConfig, master_seed: int, count: int) -> list[ChannelState]:
    """Generate ``count`` independent channel states from one master seed."""
    return [sample_channel(config, sample_seed(master_seed, i)) for i in range(count)]


def sort_rbs(channel) -> np.ndarray:
    """Permutation of RB indices used as the canonical network input order.

    For one user the RBs are sorted by descending gain. For several users,
    position k is filled by the RB, among those not yet placed, on which
    user (k mod M) has the largest gain; ties go to the smaller RB index.
    """
    gamma = channel.gamma if isinstance(channel, ChannelState) else np.asarray(channel)
    m_count, f_count = gamma.shape
    if m_count == 1:
        return np.argsort(-gamma[0], kind="stable")
    remaining = list(range(f_count))
    order = np.empty(f_count, dtype=int)
    for k in range(f_count):
        user = k % m_count
        best = max(remaining, key=lambda f: (gamma[user, f], -f))
        order[k] = best
        remaining.remove(best)
    return order
