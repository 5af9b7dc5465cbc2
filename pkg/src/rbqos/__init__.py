"""Joint uplink power and RB allocation under long-/short-blocklength QoS.

Solvers (exact single-user, multiuser heuristic, exhaustive oracle) plus a
primal-dual learning pipeline with adaptive smoothing of the discrete
allocation operators.
"""

from .sysmodel import ChannelState, ConfigError, SystemConfig, link_budget, sample_channel, sort_rbs
from .ratecalc import Allocation, QosGap, lbt_rate, q_inv, qos_gaps, sbt_rate_bounded, sbt_rate_exact
from .su_opt import AllocationResult, solve_single_user
from .mu_opt import solve_multi_user
from .oracle import exhaustive_solve

__all__ = [
    "Allocation",
    "AllocationResult",
    "ChannelState",
    "ConfigError",
    "QosGap",
    "SystemConfig",
    "exhaustive_solve",
    "lbt_rate",
    "link_budget",
    "q_inv",
    "qos_gaps",
    "sample_channel",
    "sbt_rate_bounded",
    "sbt_rate_exact",
    "solve_multi_user",
    "solve_single_user",
    "sort_rbs",
]
