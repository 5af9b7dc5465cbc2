import math

import numpy as np
import pytest

from rbqos.sysmodel import SystemConfig


def make_config(M=1, F=6, rate_L_bps=1.2e6, rate_S_bps=100e3, eps=1e-2, **kw):
    """Small desk-scale config used across the suite."""
    as_tuple = lambda v: tuple(v) if isinstance(v, (tuple, list)) else (v,)
    return SystemConfig(M=M, F=F, rate_L_bps=as_tuple(rate_L_bps),
                        rate_S_bps=as_tuple(rate_S_bps), eps=as_tuple(eps), **kw)


def bisect_q_inv(eps: float, tol: float = 1e-12) -> float:
    """Independent inverse-Q oracle: bisection on 0.5*erfc(x/sqrt(2))."""
    from scipy.special import erfc

    q = lambda x: 0.5 * erfc(x / math.sqrt(2.0))
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if q(mid) > eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def grid_waterfill_rate(gains, budget, lb, points=200_000, seed=0):
    """Monte-Carlo/grid oracle for the max sum-rate under a power budget."""
    rng = np.random.default_rng(seed)
    g = np.asarray(gains, dtype=float)
    raw = rng.dirichlet(np.ones(g.size), size=points) * budget
    rates = np.sum(np.log1p(g[None, :] * raw), axis=1)
    return lb * float(np.max(rates))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
