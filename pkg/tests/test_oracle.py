import math

import numpy as np
import pytest

from rbqos.oracle import BudgetExceededError, exhaustive_solve, feasible_given_assignment
from rbqos.ratecalc import lbt_rate, qos_gaps, sbt_rate_bounded
from rbqos.su_opt import solve_single_user
from rbqos.sysmodel import ChannelState, sample_channel

from conftest import make_config


def test_all_unused_assignment():
    cfg0 = make_config(M=1, F=2, rate_L_bps=0.0, rate_S_bps=0.0)
    ch = ChannelState(gamma=np.full((1, 2), 5.0), seed=0)
    alloc = feasible_given_assignment([None, None], ch, cfg0)
    assert alloc is not None and alloc.occupied_count() == 0

    cfg1 = make_config(M=1, F=2, rate_L_bps=1e6, rate_S_bps=0.0)
    assert feasible_given_assignment([None, None], ch, cfg1) is None


def test_two_rb_split_assignment_matches_water_levels():
    # gamma = [10, 10], Pmax = 1, eps = 0.5, RS/(L*B) = ln 2: feasible iff
    # RL <= L*B*ln(10)
    cfg = make_config(M=1, F=2, pmax_dbm=30.0, rate_L_bps=0.0, rate_S_bps=360e3)
    cfg.eps[0] = 0.5
    cfg.RS[0] = cfg.lb * math.log(2)
    ch = ChannelState(gamma=np.full((1, 2), 10.0), seed=0)
    assignment = [(0, "L"), (0, "S")]

    cfg.RL[0] = cfg.lb * math.log(10.0) * 0.999
    alloc = feasible_given_assignment(assignment, ch, cfg)
    assert alloc is not None
    assert alloc.pL[0, 0] == pytest.approx(0.9, rel=1e-9)
    assert alloc.pS[0, 1] == pytest.approx(0.1, rel=1e-9)

    cfg.RL[0] = cfg.lb * math.log(10.0) * 1.001
    assert feasible_given_assignment(assignment, ch, cfg) is None


def test_malformed_assignment():
    cfg = make_config(M=1, F=2)
    ch = ChannelState(gamma=np.ones((1, 2)), seed=0)
    with pytest.raises(ValueError):
        feasible_given_assignment([(0, "X"), None], ch, cfg)
    with pytest.raises(ValueError):
        feasible_given_assignment([(3, "L"), None], ch, cfg)


def test_single_rb_cannot_serve_both_blocks():
    cfg = make_config(M=1, F=1, rate_L_bps=1e3, rate_S_bps=1e3, eps=1e-2)
    ch = ChannelState(gamma=np.full((1, 1), 1e4), seed=0)
    res = exhaustive_solve(ch, cfg)
    assert not res.feasible


def test_budget_refusal():
    cfg = make_config(M=2, F=10)
    ch = ChannelState(gamma=np.ones((2, 10)), seed=0)
    with pytest.raises(BudgetExceededError):
        exhaustive_solve(ch, cfg, max_states=1000)


def test_oracle_matches_single_user_solver(rng):
    cfg = make_config(M=1, F=6, rate_L_bps=1.0e6, rate_S_bps=90e3, eps=1e-2)
    agreements = 0
    for _ in range(60):
        ch = sample_channel(cfg, int(rng.integers(0, 2**50)))
        su = solve_single_user(ch.gamma[0], cfg)
        ora = exhaustive_solve(ch, cfg)
        assert su.feasible == ora.feasible
        if su.feasible:
            assert su.occupied == ora.occupied
            agreements += 1
    assert agreements >= 40


def test_oracle_solution_satisfies_problem_constraints(rng):
    cfg = make_config(M=2, F=4, rate_L_bps=0.4e6, rate_S_bps=50e3, eps=1e-2)
    tol = 1e-9 * cfg.lb
    checked = 0
    for _ in range(25):
        ch = sample_channel(cfg, int(rng.integers(0, 2**50)))
        res = exhaustive_solve(ch, cfg)
        if not res.feasible:
            continue
        res.allocation.validate(cfg)
        gaps = qos_gaps(res.allocation, ch, cfg)
        assert np.all(gaps.cL <= tol)
        assert np.all(gaps.cS <= tol)
        checked += 1
    assert checked >= 15


def test_symmetric_two_user_instance():
    cfg = make_config(M=2, F=4, rate_L_bps=0.3e6, rate_S_bps=40e3, eps=1e-2)
    gamma = np.array([[200.0, 150.0, 30.0, 20.0],
                      [30.0, 20.0, 200.0, 150.0]])
    res = exhaustive_solve(ChannelState(gamma=gamma, seed=0), cfg)
    assert res.feasible
    assert res.occupied % 2 == 0  # symmetric users need symmetric RB counts


def test_occupied_count_monotone_in_power(rng):
    lo = make_config(M=1, F=6, pmax_dbm=17.0, rate_L_bps=1.2e6, rate_S_bps=80e3, eps=1e-2)
    hi = make_config(M=1, F=6, pmax_dbm=26.0, rate_L_bps=1.2e6, rate_S_bps=80e3, eps=1e-2)
    for _ in range(20):
        seed = int(rng.integers(0, 2**50))
        ch = sample_channel(lo, seed)
        r_lo = exhaustive_solve(ch, lo)
        r_hi = exhaustive_solve(ch, hi)
        if r_lo.feasible:
            assert r_hi.feasible
            assert r_hi.occupied <= r_lo.occupied
