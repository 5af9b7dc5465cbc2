import math

import numpy as np
import pytest

from rbqos.ratecalc import (Allocation, lbt_rate, q_inv, qos_gaps, sbt_rate_bounded,
                            sbt_rate_exact)
from rbqos.sysmodel import ChannelState

from conftest import bisect_q_inv, make_config


def test_q_inv_half_is_zero():
    assert q_inv(0.5) == pytest.approx(0.0, abs=1e-12)


def test_q_inv_against_bisection_oracle():
    assert q_inv(1e-5) == pytest.approx(bisect_q_inv(1e-5), abs=1e-10)
    assert q_inv(1e-5) == pytest.approx(4.26489, abs=1e-4)
    assert q_inv(0.0227501) == pytest.approx(2.0, abs=1e-3)


def test_q_inv_domain_and_symmetry():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            q_inv(bad)
    # 1 - e is itself only half-ulp faithful, which bounds the attainable match
    for e in (1e-6, 1e-3, 0.2, 0.49):
        assert q_inv(1 - e) == pytest.approx(-q_inv(e), rel=1e-9, abs=1e-10)
    # strictly decreasing
    xs = [q_inv(e) for e in (1e-6, 1e-4, 1e-2, 0.3, 0.7, 0.999)]
    assert all(a > b for a, b in zip(xs, xs[1:]))


def test_lbt_rate_values():
    cfg = make_config()
    assert lbt_rate([1.0, 2.0], [0.0, 0.0], cfg) == 0.0
    one_nat = make_config(L=1, B=1.0)
    assert lbt_rate([1.0], [math.e - 1.0], one_nat) == pytest.approx(1.0, rel=1e-12)
    assert lbt_rate([10.0, 10.0], [0.9, 0.0], cfg) == pytest.approx(360e3 * math.log(10), rel=1e-12)


def test_lbt_rate_rejects_negative_power():
    cfg = make_config()
    with pytest.raises(ValueError):
        lbt_rate([1.0], [-0.1], cfg)
    with pytest.raises(ValueError):
        lbt_rate([1.0, 2.0], [0.1], cfg)


def test_sbt_rate_bounded_conventions():
    cfg = make_config()
    assert sbt_rate_bounded([5.0, 5.0], [0.0, 0.0], 1e-5, cfg) == 0.0
    # eps = 0.5 kills the penalty term entirely
    assert sbt_rate_bounded([10.0], [0.1], 0.5, cfg) == pytest.approx(
        lbt_rate([10.0], [0.1], cfg), rel=1e-12)


def test_sbt_rate_bounded_single_rb():
    # independent evaluation: LB*ln2 - Qinv(1e-5)*sqrt(LB/tau)
    cfg = make_config()
    expected = 360e3 * math.log(2) - bisect_q_inv(1e-5) * math.sqrt(360e3 / 0.5e-3)
    got = sbt_rate_bounded([10.0], [0.1], 1e-5, cfg)
    assert got == pytest.approx(expected, rel=1e-9)
    assert got == pytest.approx(135093.96, rel=1e-6)


def test_sbt_rate_exact_cases():
    cfg = make_config()
    assert sbt_rate_exact([5.0], [0.0], 1e-5, cfg) == 0.0
    # infinite SNR: dispersion -> 1, exact and bounded coincide
    high = sbt_rate_exact([1e14], [1.0], 1e-5, cfg)
    bounded = sbt_rate_bounded([1e14], [1.0], 1e-5, cfg)
    assert high == pytest.approx(bounded, rel=1e-9)
    # gamma*p = 1: dispersion 0.75 scales the penalty by sqrt(0.75)
    pen_full = q_inv(1e-5) * math.sqrt(cfg.lb / cfg.tau)
    exact = sbt_rate_exact([10.0], [0.1], 1e-5, cfg)
    assert exact == pytest.approx(cfg.lb * math.log(2) - math.sqrt(0.75) * pen_full, rel=1e-12)


def test_exact_dominates_bounded(rng):
    cfg = make_config()
    for _ in range(200):
        n = int(rng.integers(1, 6))
        g = rng.uniform(0.5, 50.0, size=n)
        p = rng.uniform(0.0, 0.2, size=n)
        eps = float(rng.uniform(1e-6, 0.49))
        assert sbt_rate_exact(g, p, eps, cfg) >= sbt_rate_bounded(g, p, eps, cfg) - 1e-9


def test_lbt_rate_monotone(rng):
    cfg = make_config()
    g = rng.uniform(0.5, 20.0, size=4)
    p = rng.uniform(0.0, 0.3, size=4)
    base = lbt_rate(g, p, cfg)
    p2 = p.copy()
    p2[2] += 0.05
    assert lbt_rate(g, p2, cfg) >= base
    g2 = g.copy()
    g2[1] *= 1.5
    assert lbt_rate(g2, p, cfg) >= base


def test_qos_gaps_trivial_cases():
    cfg = make_config(M=1, F=2, rate_L_bps=0.0, rate_S_bps=0.0)
    ch = ChannelState(gamma=np.ones((1, 2)), seed=0)
    alloc = Allocation.zeros(cfg)
    gaps = qos_gaps(alloc, ch, cfg)
    assert gaps.cL[0] == 0.0 and gaps.cS[0] == 0.0

    cfg2 = make_config(M=1, F=2, rate_L_bps=1e6, rate_S_bps=0.0)
    gaps2 = qos_gaps(Allocation.zeros(cfg2), ch, cfg2)
    assert gaps2.cL[0] == pytest.approx(cfg2.RL[0])


def test_allocation_validate():
    cfg = make_config(M=1, F=3)
    alloc = Allocation.zeros(cfg)
    alloc.validate(cfg)
    alloc.pL[0, 0] = 0.1
    alloc.pS[0, 0] = 0.1  # same RB used by both blocks
    with pytest.raises(ValueError):
        alloc.validate(cfg)
    alloc.pS[0, 0] = 0.0
    alloc.pL[0, 1] = cfg.Pmax  # budget blown
    with pytest.raises(ValueError):
        alloc.validate(cfg)
