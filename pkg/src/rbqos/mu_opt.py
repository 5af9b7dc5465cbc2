"""Multiuser heuristic: sequential best-RB claiming with per-user re-solves.

Each round, every unsatisfied user (in index order) claims its best
unclaimed RB, then re-solves its single-user problem over everything it has
claimed. Satisfied users exit and release any claimed RB their final
solution leaves unpowered.
"""

from __future__ import annotations

import numpy as np

from .ratecalc import RATE_TOL, Allocation
from .su_opt import AllocationResult, solve_given_rbs
from .sysmodel import ChannelState, SystemConfig


def solve_multi_user(channel: ChannelState, config: SystemConfig) -> AllocationResult:
    gamma = channel.gamma
    m_count, f_count = gamma.shape
    tol = RATE_TOL * config.lb
    pool = set(range(f_count))
    claimed: list[list[int]] = [[] for _ in range(m_count)]
    satisfied = [config.RL[m] <= tol and config.RS[m] <= tol for m in range(m_count)]
    alloc = Allocation(np.zeros((m_count, f_count)), np.zeros((m_count, f_count)))
    used_total = 0
    rounds = []

    while not all(satisfied) and pool:
        for m in range(m_count):
            if satisfied[m] or not pool:
                continue
            best = max(pool, key=lambda f: (gamma[m, f], -f))
            pool.remove(best)
            claimed[m].append(best)
        progressed = []
        for m in range(m_count):
            if satisfied[m] or not claimed[m]:
                continue
            rbs = np.array(claimed[m])
            order = np.argsort(-gamma[m, rbs], kind="stable")
            rbs = rbs[order]
            sol = solve_given_rbs(gamma[m, rbs], config, user=m)
            if not sol.feasible:
                continue
            satisfied[m] = True
            progressed.append(m)
            active = sol.powers > 0
            s_rbs = rbs[sol.xS_mask & active]
            l_rbs = rbs[(~sol.xS_mask) & active]
            alloc.pS[m, s_rbs] = sol.powers[sol.xS_mask & active]
            alloc.pL[m, l_rbs] = sol.powers[(~sol.xS_mask) & active]
            used_total += sol.used
            for f in rbs[~active]:   # claimed but unused: release to the pool
                pool.add(int(f))
                claimed[m].remove(int(f))
        rounds.append(progressed)

    feasible = all(satisfied)
    return AllocationResult(alloc, used_total, feasible,
                            {"claimed": claimed, "rounds": len(rounds)})
