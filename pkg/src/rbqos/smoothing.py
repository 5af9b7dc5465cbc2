"""Discrete allocation operators, their smooth surrogates, and the adaptive
smoothing-parameter solvers.

The exact operators are the piecewise maximal function (a power survives
only if it strictly dominates every contender on its RB) and the positive
indicator. Their surrogates are a per-element-tempered softmax and a
shifted tanh; the solvers pick tempering parameters that hit a prescribed
surrogate-gradient magnitude, which is what keeps training gradients from
vanishing or exploding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TIE_EPS = 1e-12


def _zeta_root() -> float:
    # unique root of e^z + z - z e^z + 1 on (1, inf)
    f = lambda z: math.exp(z) + z - z * math.exp(z) + 1.0
    lo, hi = 1.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


ZETA = _zeta_root()


@dataclass
class SmoothingState:
    """Per-iteration smoothing targets and constants."""

    V: float                 # gradient requirement for RB-occupancy indicators
    Vbar: float              # gradient requirement for the softmax surrogate
    kappa: float             # penalty ceiling
    rho: float = 30.0        # exponent making e^-rho numerically negligible
    w_grad_req: float = 0.4  # gradient requirement inside the penalty q
    zeta: float = ZETA


@dataclass
class ScheduleSpec:
    """Endpoints of the training-time parameter schedules."""

    v_start: float = 10.0
    v_peak: float = 80.0
    v_end: float = 20.0
    warmup_frac: float = 0.25
    vbar_start: float = 1e-3
    vbar_end: float = 1e-5
    kappa_start: float = 0.5
    kappa_end: float = 20.0


def g_exact(powers_on_rb, idx: int) -> float:
    """powers[idx] if it strictly dominates every other entry, else 0."""
    p = np.asarray(powers_on_rb, dtype=float)
    others = np.delete(p, idx)
    if others.size == 0 or p[idx] > np.max(others):
        return float(p[idx])
    return 0.0


def g_smooth(powers_on_rb, idx: int, u) -> float:
    """Tempered-softmax surrogate: powers[idx] / sum_j exp(u_j (p_j - p_idx))."""
    p = np.asarray(powers_on_rb, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("smoothing parameters u must be non-negative")
    denom = float(np.sum(np.exp(u * (p - p[idx]))))
    return float(p[idx]) / denom


def indicator_smooth(gtilde, v):
    """Shifted-sigmoid surrogate of the positive indicator.

    2/(1 + e^{-v g}) - 1, evaluated as tanh(v g / 2) (the same function,
    overflow-free for any sign of the argument).
    """
    t = np.asarray(v, dtype=float) * np.asarray(gtilde, dtype=float)
    return np.tanh(0.5 * t)


def indicator_grad(gtilde, v):
    """d indicator_smooth / d gtilde = (v/2) sech^2(v g / 2)."""
    v = np.asarray(v, dtype=float)
    t = v * np.asarray(gtilde, dtype=float)
    return 0.5 * v * (1.0 - np.tanh(0.5 * t) ** 2)


def _hz(z):
    """Gradient in z = v*g coordinates: indicator_grad = hz(z)/g."""
    e = np.exp(-z)
    return 2.0 * z * e / (1.0 + e) ** 2


_HZ_MAX = float(_hz(ZETA))


_Z_MAX = 1400.0   # hz(1400) underflows to 0: a universal upper bracket


def solve_v_array(gtilde, v_req, iters: int = 64) -> np.ndarray:
    """Vectorized solve_v; ``v_req`` may be a scalar or match gtilde's shape.

    Entries with gtilde <= 0 get v = 0 (dead input: the surrogate and its
    gradient are then identically zero).
    """
    g = np.asarray(gtilde, dtype=float)
    target = np.broadcast_to(np.asarray(v_req, dtype=float) * g, g.shape)
    out = np.zeros_like(g)
    alive = g > 0
    if not np.any(alive):
        return out
    t = target[alive]
    feasible = _HZ_MAX > t
    z = np.full(t.shape, ZETA)
    if np.any(feasible):
        tf = t[feasible]
        # hz decreases monotonically beyond zeta, so [zeta, Z_MAX] brackets
        # every attainable target; bisection needs ~50 rounds regardless
        lo = np.full(tf.shape, ZETA)
        hi = np.full(tf.shape, _Z_MAX)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            high_side = _hz(mid) > tf
            lo = np.where(high_side, mid, lo)
            hi = np.where(high_side, hi, mid)
        z[feasible] = 0.5 * (lo + hi)
    out[alive] = z / g[alive]
    return out


def solve_v(gtilde: float, v_req: float) -> float:
    """Smoothing parameter for the indicator surrogate at input gtilde.

    If the requested gradient magnitude is attainable, returns the larger
    of the two matching parameters (the one with the smaller approximation
    error); otherwise returns zeta/gtilde, the gradient-maximizing value.
    """
    if gtilde <= 0 or v_req <= 0:
        raise ValueError("solve_v needs gtilde > 0 and V > 0")
    return float(solve_v_array(np.array([gtilde]), v_req)[0])


def solve_u(powers_on_rb, idx: int, vbar: float, rho: float = 30.0) -> np.ndarray:
    """Smoothing parameters for one softmax surrogate target.

    Strict-maximum targets get exact suppression of every contender. For a
    dominated target, the closed form matches the surrogate's l1 gradient
    requirement when attainable (sum of exponentials equals 1/Vbar), else
    maximizes the attainable gradient.
    """
    p = np.asarray(powers_on_rb, dtype=float)
    n = p.size
    d = p - p[idx]
    above = d >= _TIE_EPS
    below = d <= -_TIE_EPS
    u = np.zeros(n)
    n_above = int(np.count_nonzero(above))
    if n_above == 0:
        u[below] = -rho / d[below]
        return u
    if 1.0 / (1.0 + n_above) >= vbar:
        x = (1.0 / vbar - n + n_above) / n_above
        if x >= 1.0:
            u[above] = np.log(x) / d[above]
            return u
        # 1/Vbar below the element count: suppress the dominated entries and
        # put the whole budget on the dominating ones
        n_tied = int(np.count_nonzero(~above & ~below)) - 1
        x = (1.0 / vbar - 1.0 - n_tied) / n_above
        if x >= 1.0:
            u[above] = np.log(x) / d[above]
            u[below] = -rho / d[below]
            return u
    u[below] = -rho / d[below]
    return u


def solve_u_array(powers, vbar: float, rho: float = 30.0) -> np.ndarray:
    """Batched solve_u over every target index at once.

    ``powers`` has shape (..., n); the result has shape (..., n, n) where
    axis -2 is the target index and axis -1 runs over the contenders.
    """
    p = np.asarray(powers, dtype=float)
    n = p.shape[-1]
    d = p[..., None, :] - p[..., :, None]          # d[..., t, j] = p_j - p_t
    above = d >= _TIE_EPS
    below = d <= -_TIE_EPS
    n_above = np.count_nonzero(above, axis=-1)
    n_below = np.count_nonzero(below, axis=-1)
    n_tied = n - 1 - n_above - n_below
    safe_above = np.maximum(n_above, 1)
    x = (1.0 / vbar - n + n_above) / safe_above
    x2 = (1.0 / vbar - 1.0 - n_tied) / safe_above
    feas = (n_above >= 1) & (1.0 / (1.0 + n_above) >= vbar)
    use_x = feas & (x >= 1.0)
    use_x2 = feas & ~(x >= 1.0) & (x2 >= 1.0)
    coeff = np.where(use_x, np.log(np.maximum(x, 1.0)),
                     np.where(use_x2, np.log(np.maximum(x2, 1.0)), 0.0))
    suppress = ~use_x                               # per-target lane
    u = np.zeros_like(d)
    np.divide(coeff[..., None], d, out=u, where=above)
    u_below = np.zeros_like(d)
    np.divide(-rho, d, out=u_below, where=below & suppress[..., None])
    return u + u_below


def penalty_q(c: float, lam: float, kappa: float, w: float) -> float:
    """Nonlinear constraint penalty: amplifies positive gaps toward kappa,
    decays the multiplier (at unit rate at most) when satisfied."""
    if c > 0:
        return kappa * (2.0 / (1.0 + math.exp(-w * c)) - 1.0)
    return -min(lam / 2.0, 1.0)


def schedule(iteration: int, total_iters: int, spec: ScheduleSpec) -> tuple[float, float, float]:
    """(V, Vbar, kappa) at one training iteration.

    V ramps linearly start->peak over the warmup fraction, then peak->end;
    Vbar is linear over the full run; kappa is geometric.
    """
    if not 0 <= iteration < total_iters:
        raise ValueError("iteration outside [0, total_iters)")
    t = iteration / (total_iters - 1) if total_iters > 1 else 0.0
    wf = spec.warmup_frac
    if t <= wf and wf > 0:
        v = spec.v_start + (spec.v_peak - spec.v_start) * (t / wf)
    else:
        v = spec.v_peak + (spec.v_end - spec.v_peak) * ((t - wf) / (1.0 - wf))
    vbar = spec.vbar_start + (spec.vbar_end - spec.vbar_start) * t
    kappa = spec.kappa_start * (spec.kappa_end / spec.kappa_start) ** t
    return v, vbar, kappa
