"""Exhaustive-search ground truth for small instances.

Enumerates every RB-to-(user, block) assignment in layers of increasing
occupied-RB count; the first feasible assignment is therefore a minimal-RB
solution. Powers per assignment come from the same closed forms the
single-user solver uses, so positivity failure certifies infeasibility of
that fully-active split.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .ratecalc import RATE_TOL, Allocation, lbt_rate, q_inv, sbt_rate_bounded
from .su_opt import AllocationResult, InfeasibleSplitError, power_alloc, waterfill_maxrate, water_levels
from .sysmodel import ChannelState, SystemConfig


class BudgetExceededError(RuntimeError):
    """The assignment space exceeds the enumeration budget."""


def feasible_given_assignment(assignment, channel: ChannelState, config: SystemConfig):
    """Optimal-power feasibility check for one fixed assignment.

    ``assignment`` holds one label per RB: None for unused, else a
    (user, block) pair with block "L" or "S". Returns the Allocation on
    success, None when the assignment cannot meet every requirement.
    """
    gamma = channel.gamma
    m_count, f_count = gamma.shape
    lsets: list[list[int]] = [[] for _ in range(m_count)]
    ssets: list[list[int]] = [[] for _ in range(m_count)]
    for f, label in enumerate(assignment):
        if label is None:
            continue
        m, block = label
        if not (0 <= m < m_count) or block not in ("L", "S"):
            raise ValueError(f"malformed assignment label {label!r} at RB {f}")
        (lsets[m] if block == "L" else ssets[m]).append(f)
    tol = RATE_TOL * config.lb
    alloc = Allocation(np.zeros((m_count, f_count)), np.zeros((m_count, f_count)))
    for m in range(m_count):
        lset, sset = lsets[m], ssets[m]
        rl, rs, eps = float(config.RL[m]), float(config.RS[m]), float(config.eps[m])
        if not lset and not sset:
            if rl > tol or rs > tol:
                return None
            continue
        if lset and sset:
            rbs = lset + sset
            g = gamma[m, rbs]
            mask = np.zeros(len(rbs), dtype=bool)
            mask[len(lset):] = True
            try:
                wl = water_levels(g, mask, config, user=m)
                powers = power_alloc(g, mask, wl)
            except InfeasibleSplitError:
                return None
            if lbt_rate(g[~mask], powers[~mask], config) < rl - tol:
                return None
            alloc.pL[m, lset] = powers[~mask]
            alloc.pS[m, sset] = powers[mask]
        elif sset:
            if rl > tol:
                return None
            _, powers = waterfill_maxrate(gamma[m, sset], config.Pmax, config)
            if sbt_rate_bounded(gamma[m, sset], powers, eps, config) < rs - tol:
                return None
            alloc.pS[m, sset] = powers
        else:
            if rs > tol:
                return None
            rate, powers = waterfill_maxrate(gamma[m, lset], config.Pmax, config)
            if rate < rl - tol:
                return None
            alloc.pL[m, lset] = powers
    return alloc


def exhaustive_solve(channel: ChannelState, config: SystemConfig,
                     max_states: int = 10_000_000) -> AllocationResult:
    """Layered enumeration over all assignments, minimal occupied count first.

    Refuses to run when (2M+1)^F exceeds ``max_states``. Ties within a
    layer resolve by enumeration order (lexicographic RB subsets, then
    label tuples ordered by user then block).
    """
    gamma = channel.gamma
    m_count, f_count = gamma.shape
    states = (2 * m_count + 1) ** f_count
    if states > max_states:
        raise BudgetExceededError(
            f"(2M+1)^F = {states} exceeds the enumeration budget {max_states}")
    labels = [(m, block) for m in range(m_count) for block in ("L", "S")]
    assignment = [None] * f_count
    for k in range(f_count + 1):
        for subset in itertools.combinations(range(f_count), k):
            for lab in itertools.product(labels, repeat=k):
                for f, label in zip(subset, lab):
                    assignment[f] = label
                alloc = feasible_given_assignment(assignment, channel, config)
                for f in subset:
                    assignment[f] = None
                if alloc is not None:
                    return AllocationResult(alloc, k, True, {"assignment_rbs": list(subset)})
    empty = Allocation(np.zeros((m_count, f_count)), np.zeros((m_count, f_count)))
    return AllocationResult(empty, 0, False)
