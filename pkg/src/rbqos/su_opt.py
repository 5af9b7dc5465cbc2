"""Hierarchical optimal single-user solver.

Outer loop grows the occupied set over the best-gain RBs; the inner loop
sweeps the SBT block count, resolves the concave-objective case structure,
and reduces each case to a cardinality-constrained subset-sum query over
the log-gains. Powers follow the two-water-level closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ratecalc import RATE_TOL, Allocation, q_inv
from .subsetsum import MAX_AT_MOST, MIN_ABOVE, SubsetQuery, solve_subset
from .sysmodel import SystemConfig

INTERIOR = "interior"
XSTAR_BELOW_LB = "xstar_below_lb"
XSTAR_ABOVE_UB = "xstar_above_ub"


class DegenerateSplitError(ValueError):
    """A block type was left with zero RBs where both are required."""


class InfeasibleSplitError(ValueError):
    """Water-level positivity fails for the requested split."""


@dataclass
class WaterLevels:
    """Two-level power structure: p = wl - 1/gamma per block type."""

    wl_L: float
    wl_S: float


@dataclass
class CaseAnalysis:
    """Case data for one SBT-count choice: interval bounds on the selected
    log-gain sum X, its unconstrained optimizer, and the threshold psi."""

    NS: int
    NL: int
    Xlb: float
    Xub: float
    Xstar: float
    psi: float
    case: str
    pin: Optional[str] = None   # "L"/"S": minimal-gain RB pinned to that block


@dataclass
class AllocationResult:
    allocation: Allocation
    occupied: int
    feasible: bool
    detail: dict = field(default_factory=dict)


@dataclass
class SplitSolution:
    """Inner-problem outcome for one fixed occupied set (gains sorted desc)."""

    feasible: bool
    xS_mask: np.ndarray
    powers: np.ndarray
    lbt_value: float
    used: int


def _user_req(config: SystemConfig, user: int) -> tuple[float, float, float]:
    return float(config.RL[user]), float(config.RS[user]), float(config.eps[user])


def waterfill_maxrate(gammas, budget: float, config: SystemConfig) -> tuple[float, np.ndarray]:
    """Classic single-level water-filling over the given gains.

    Returns (max sum rate in nats/s, per-RB powers in the input order).
    """
    g = np.asarray(gammas, dtype=float)
    if g.size == 0 or budget <= 0:
        raise ValueError("need at least one gain and a positive budget")
    order = np.argsort(-g, kind="stable")
    inv = 1.0 / g[order]
    csum = np.cumsum(inv)
    n = g.size
    powers_sorted = np.zeros(n)
    for active in range(n, 0, -1):
        mu = (budget + csum[active - 1]) / active
        if mu > inv[active - 1]:
            powers_sorted[:active] = mu - inv[:active]
            break
    powers = np.zeros(n)
    powers[order] = powers_sorted
    rate = config.lb * float(np.sum(np.log1p(g * powers)))
    return rate, powers


def n_min(sorted_gains, config: SystemConfig, user: int = 0) -> int:
    """Smallest N with water-filling rate over the N best RBs >= RL + RS.

    Returns F + 1 when even the full band falls short. Binary search over
    the (monotone) prefix rates; RL = RS = 0 yields 1 by convention.
    """
    g = np.asarray(sorted_gains, dtype=float)
    rl, rs, _ = _user_req(config, user)
    target = rl + rs
    tol = RATE_TOL * config.lb
    if target <= tol:
        return 1
    f = g.size

    def reaches(n: int) -> bool:
        rate, _ = waterfill_maxrate(g[:n], config.Pmax, config)
        return rate >= target - tol

    if not reaches(f):
        return f + 1
    lo, hi = 1, f
    while lo < hi:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def water_levels(gammas_in_n, xs_mask, config: SystemConfig, user: int = 0) -> WaterLevels:
    """Closed-form two water levels for a fixed LBT/SBT split.

    wl_S makes the bounded SBT rate hit RS exactly; wl_L then spends the
    rest of the budget on the LBT RBs.
    """
    g = np.asarray(gammas_in_n, dtype=float)
    mask = np.asarray(xs_mask, dtype=bool)
    ns = int(np.count_nonzero(mask))
    nl = g.size - ns
    if ns == 0 or nl == 0:
        raise DegenerateSplitError("split needs at least one RB per block type")
    rl, rs, eps = _user_req(config, user)
    lb = config.lb
    base = rs / lb + q_inv(eps) * math.sqrt(ns / (lb * config.tau))
    wl_s = math.exp((base - float(np.sum(np.log(g[mask])))) / ns)
    wl_l = (config.Pmax + float(np.sum(1.0 / g)) - ns * wl_s) / nl
    return WaterLevels(wl_L=wl_l, wl_S=wl_s)


def power_alloc(gammas_in_n, xs_mask, wl: WaterLevels) -> np.ndarray:
    """Per-RB powers wl - 1/gamma; raises if any power is non-positive."""
    g = np.asarray(gammas_in_n, dtype=float)
    mask = np.asarray(xs_mask, dtype=bool)
    powers = np.where(mask, wl.wl_S, wl.wl_L) - 1.0 / g
    if np.any(powers <= 0):
        raise InfeasibleSplitError("water level at or below an inverse gain")
    return powers


def case_select(gammas_in_n, ns: int, config: SystemConfig, user: int = 0) -> list[CaseAnalysis]:
    """Case analysis for one SBT count: one interior descriptor, or the two
    boundary branches with the minimal-gain RB pinned to LBT and to SBT.

    Interval bounds use the gain minima each branch implies: the pinned
    side's minimum is the overall minimum exactly; the opposite side can at
    worst contain the second-smallest gain."""
    g = np.asarray(gammas_in_n, dtype=float)
    n = g.size
    if not 1 <= ns <= n - 1:
        raise ValueError(f"NS={ns} outside [1, {n - 1}]")
    nl = n - ns
    rl, rs, eps = _user_req(config, user)
    lb = config.lb
    denom = config.Pmax + float(np.sum(1.0 / g))
    psi = n / denom
    base = rs / lb + q_inv(eps) * math.sqrt(ns / (lb * config.tau))
    xstar = base + ns * math.log(n / denom)
    gsorted = np.sort(g)
    gmin, gsec = float(gsorted[0]), float(gsorted[1])

    def xlb(gmin_l: float) -> float:
        arg = denom - nl / gmin_l
        if arg <= 0:
            return math.inf
        return base - ns * math.log(arg / ns)

    def xub(gmin_s: float) -> float:
        return base + ns * math.log(gmin_s)

    if gmin > psi:
        return [CaseAnalysis(NS=ns, NL=nl, Xlb=xlb(gmin), Xub=xub(gmin),
                             Xstar=xstar, psi=psi, case=INTERIOR, pin=None)]
    return [
        CaseAnalysis(NS=ns, NL=nl, Xlb=xlb(gmin), Xub=xub(gsec),
                     Xstar=xstar, psi=psi, case=XSTAR_BELOW_LB, pin="L"),
        CaseAnalysis(NS=ns, NL=nl, Xlb=xlb(gsec), Xub=xub(gmin),
                     Xstar=xstar, psi=psi, case=XSTAR_ABOVE_UB, pin="S"),
    ]


def objective_J(gammas_in_n, xs_mask, config: SystemConfig, user: int = 0) -> float:
    """Maximized LBT rate of a split, via the reduced concave objective.

    Equals lbt_rate over the reconstructed water-level powers; the two
    formulas are independent routes to the same number.
    """
    g = np.asarray(gammas_in_n, dtype=float)
    mask = np.asarray(xs_mask, dtype=bool)
    ns = int(np.count_nonzero(mask))
    nl = g.size - ns
    if ns == 0 or nl == 0:
        raise DegenerateSplitError("split needs at least one RB per block type")
    rl, rs, eps = _user_req(config, user)
    lb = config.lb
    base = rs / lb + q_inv(eps) * math.sqrt(ns / (lb * config.tau))
    x = float(np.sum(np.log(g[mask])))
    arg = config.Pmax + float(np.sum(1.0 / g)) - ns * math.exp((base - x) / ns)
    if arg <= 0:
        raise InfeasibleSplitError("no residual budget for the LBT water level")
    y = -x + nl * math.log(arg)
    return lb * (float(np.sum(np.log(g))) + y - nl * math.log(nl))


def solve_given_rbs(g_desc, config: SystemConfig, user: int = 0) -> SplitSolution:
    """Feasibility and best split for a fixed occupied set (gains desc).

    Sweeps the SBT count with the case logic; the all-LBT and all-SBT edge
    policies cover zero requirements on either side.
    """
    g = np.asarray(g_desc, dtype=float)
    n = g.size
    rl, rs, eps = _user_req(config, user)
    lb = config.lb
    tol = RATE_TOL * lb
    empty = SplitSolution(False, np.zeros(n, dtype=bool), np.zeros(n), -math.inf, 0)

    if rs <= tol:
        rate, powers = waterfill_maxrate(g, config.Pmax, config)
        if rate >= rl - tol:
            return SplitSolution(True, np.zeros(n, dtype=bool), powers,
                                 rate, int(np.count_nonzero(powers > 0)))
        return empty
    if rl <= tol:
        _, powers = waterfill_maxrate(g, config.Pmax, config)
        ns = int(np.count_nonzero(powers > 0))
        rate = lb * float(np.sum(np.log1p(g * powers))) - q_inv(eps) * math.sqrt(ns * lb / config.tau)
        if rate >= rs - tol:
            return SplitSolution(True, powers > 0, powers, 0.0, ns)
        return empty

    log_g = np.log(g)
    best_j = -math.inf
    best_mask = None
    for ns in range(1, n):
        for case in case_select(g, ns, config, user):
            if not case.Xlb < case.Xub:
                continue
            queries = []
            if case.case == INTERIOR:
                queries.append((SubsetQuery(list(log_g), ns, case.Xlb, case.Xub,
                                            MAX_AT_MOST, case.Xstar), None))
                queries.append((SubsetQuery(list(log_g), ns, case.Xlb, case.Xub,
                                            MIN_ABOVE, case.Xstar), None))
            elif case.pin == "L":
                # minimal-gain RB forced to LBT: select NS among the rest
                queries.append((SubsetQuery(list(log_g[:-1]), ns, case.Xlb, case.Xub,
                                            MIN_ABOVE, case.Xlb), "L"))
            else:
                # minimal-gain RB forced to SBT: its log-gain shifts the target
                shift = float(log_g[-1])
                queries.append((SubsetQuery(list(log_g[:-1]), ns - 1,
                                            case.Xlb - shift, case.Xub - shift,
                                            MAX_AT_MOST, case.Xub - shift), "S"))
            for query, pin in queries:
                sol = solve_subset(query)
                if sol is None:
                    continue
                mask = np.zeros(n, dtype=bool)
                width = n - 1 if pin is not None else n
                mask[:width] = np.asarray(sol.mask, dtype=bool)
                if pin == "S":
                    mask[-1] = True
                try:
                    j = objective_J(g, mask, config, user)
                except InfeasibleSplitError:
                    continue
                if j > best_j:
                    best_j = j
                    best_mask = mask
    if best_mask is None or best_j < rl - tol:
        return empty
    wl = water_levels(g, best_mask, config, user)
    powers = power_alloc(g, best_mask, wl)
    return SplitSolution(True, best_mask, powers, best_j, n)


def solve_single_user(gamma_row, config: SystemConfig, user: int = 0) -> AllocationResult:
    """Minimal-RB feasible allocation for one user, or infeasible status.

    RBs are sorted by descending gain; N runs upward from the water-filling
    lower bound until the inner problem is feasible. The occupied RBs are
    always a prefix of the sorted order.
    """
    gamma_row = np.asarray(gamma_row, dtype=float)
    f = gamma_row.size
    alloc = Allocation(np.zeros((config.M, f)), np.zeros((config.M, f)))
    rl, rs, _ = _user_req(config, user)
    tol = RATE_TOL * config.lb
    if rl <= tol and rs <= tol:
        return AllocationResult(alloc, 0, True, {"N": 0})
    order = np.argsort(-gamma_row, kind="stable")
    g_sorted = gamma_row[order]
    start = n_min(g_sorted, config, user)
    if start > f:
        return AllocationResult(alloc, 0, False)
    for n in range(start, f + 1):
        sol = solve_given_rbs(g_sorted[:n], config, user)
        if not sol.feasible:
            continue
        rbs = order[:n]
        alloc.pS[user, rbs[sol.xS_mask]] = sol.powers[sol.xS_mask]
        lmask = (~sol.xS_mask) & (sol.powers > 0)
        alloc.pL[user, rbs[lmask]] = sol.powers[lmask]
        detail = {"N": n, "NS": int(np.count_nonzero(sol.xS_mask)),
                  "rbs": rbs, "xS_mask": sol.xS_mask, "powers": sol.powers,
                  "J": sol.lbt_value}
        return AllocationResult(alloc, sol.used, True, detail)
    return AllocationResult(alloc, 0, False)
