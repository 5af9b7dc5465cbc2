"""Rate and QoS-gap computations for long- and short-blocklength transmission."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcinv

from .sysmodel import ChannelState, SystemConfig

# Relative tolerance factor for rate comparisons; the absolute tolerance on a
# rate in nats/s is RATE_TOL * L * B.
RATE_TOL = 1e-9


def q_inv(eps: float) -> float:
    """Inverse Gaussian Q-function: the x with 0.5*erfc(x/sqrt(2)) = eps.

    Reflected into the lower half where erfcinv is well conditioned, which
    also makes q_inv(1 - e) = -q_inv(e) hold to float precision.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"q_inv: eps must lie in (0, 1), got {eps}")
    if eps > 0.5:
        return -math.sqrt(2.0) * float(erfcinv(2.0 * (1.0 - eps)))
    return math.sqrt(2.0) * float(erfcinv(2.0 * eps))


def _check_rate_args(gamma_row, p_row):
    gamma_row = np.asarray(gamma_row, dtype=float)
    p_row = np.asarray(p_row, dtype=float)
    if gamma_row.shape != p_row.shape:
        raise ValueError("gain and power rows must have equal length")
    if np.any(p_row < 0):
        raise ValueError("powers must be non-negative")
    return gamma_row, p_row


def lbt_rate(gamma_row, p_row, config: SystemConfig) -> float:
    """Shannon rate L*B * sum ln(1 + gamma*p) in nats/s."""
    gamma_row, p_row = _check_rate_args(gamma_row, p_row)
    return config.lb * float(np.sum(np.log1p(gamma_row * p_row)))


def sbt_rate_bounded(gamma_row, p_row, eps: float, config: SystemConfig) -> float:
    """Short-blocklength rate with the dispersion term bounded by 1.

    NS is the number of RBs carrying positive power; with NS = 0 the rate
    is 0 by convention (no SBT RBs).
    """
    gamma_row, p_row = _check_rate_args(gamma_row, p_row)
    ns = int(np.count_nonzero(p_row > 0))
    if ns == 0:
        return 0.0
    lb = config.lb
    penalty = q_inv(eps) * math.sqrt(ns * lb / config.tau)
    return lb * float(np.sum(np.log1p(gamma_row * p_row))) - penalty


def sbt_rate_exact(gamma_row, p_row, eps: float, config: SystemConfig) -> float:
    """Short-blocklength rate with the exact per-RB channel dispersion.

    Evaluation-facing only; optimization uses the bounded form. The
    dispersion of an active RB is 1 - (1 + gamma*p)^-2.
    """
    gamma_row, p_row = _check_rate_args(gamma_row, p_row)
    active = p_row > 0
    if not np.any(active):
        return 0.0
    lb = config.lb
    snr1 = 1.0 + gamma_row[active] * p_row[active]
    dispersion = 1.0 - 1.0 / snr1**2
    penalty = math.sqrt(lb * config.tau * float(np.sum(dispersion))) * q_inv(eps) / config.tau
    return lb * float(np.sum(np.log(snr1))) - penalty


@dataclass
class Allocation:
    """Per-user, per-RB powers for LBT and SBT, shape (M, F) each.

    The binary RB indicators are derived: an RB belongs to a (user, block)
    pair iff the corresponding power is positive.
    """

    pL: np.ndarray
    pS: np.ndarray

    @classmethod
    def zeros(cls, config: SystemConfig) -> "Allocation":
        return cls(np.zeros((config.M, config.F)), np.zeros((config.M, config.F)))

    @property
    def xL(self) -> np.ndarray:
        return self.pL > 0

    @property
    def xS(self) -> np.ndarray:
        return self.pS > 0

    def total_per_rb(self) -> np.ndarray:
        return self.pL.sum(axis=0) + self.pS.sum(axis=0)

    def occupied_count(self, floor: float = 1e-12) -> int:
        """RBs whose total allocated power exceeds the numerical floor."""
        return int(np.count_nonzero(self.total_per_rb() > floor))

    def validate(self, config: SystemConfig, budget_slack: float = 1e-9) -> None:
        """Raise if exclusivity, non-negativity, or the power budget fails."""
        if self.pL.shape != (config.M, config.F) or self.pS.shape != (config.M, config.F):
            raise ValueError("allocation shape mismatch")
        if np.any(self.pL < 0) or np.any(self.pS < 0):
            raise ValueError("negative power in allocation")
        positives = np.count_nonzero(self.pL > 0, axis=0) + np.count_nonzero(self.pS > 0, axis=0)
        if np.any(positives > 1):
            raise ValueError("an RB serves more than one (user, block) pair")
        per_user = self.pL.sum(axis=1) + self.pS.sum(axis=1)
        if np.any(per_user > config.Pmax + budget_slack):
            raise ValueError("per-user power budget exceeded")


@dataclass
class QosGap:
    """Requirement minus achieved rate, nats/s; positive means violated."""

    cL: np.ndarray
    cS: np.ndarray


def qos_gaps(alloc: Allocation, channel: ChannelState, config: SystemConfig) -> QosGap:
    """Exact (unsmoothed) QoS gaps under the bounded SBT rate model."""
    gamma = channel.gamma
    if gamma.shape != (config.M, config.F):
        raise ValueError("channel shape mismatch")
    c_l = np.empty(config.M)
    c_s = np.empty(config.M)
    for m in range(config.M):
        c_l[m] = config.RL[m] - lbt_rate(gamma[m], alloc.pL[m], config)
        c_s[m] = config.RS[m] - sbt_rate_bounded(gamma[m], alloc.pS[m], config.eps[m], config)
    return QosGap(cL=c_l, cS=c_s)
