"""Primal-dual training of the power-allocation policy with smoothed
discrete operators, a nonlinear violation penalty, and multiplier networks.

The loss per sample is  sum_f 1~(g~_f, v_f) + sum_{s,m} lambda^s_m q(c~^s_m)
with every smoothing parameter recomputed from the current batch and then
treated as a constant during differentiation. All gradients here are
analytic; a finite-difference audit is part of the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import neuralnet as nn
from .ratecalc import RATE_TOL, Allocation, q_inv
from .smoothing import (ScheduleSpec, SmoothingState, indicator_grad, indicator_smooth,
                        schedule, solve_u_array, solve_v_array)
from .sysmodel import SystemConfig, sort_rbs

MODES = ("proposed", "fixed-parameter", "annealing", "default-constr",
         "incr-require", "fixed-multiplier")

_NS_GRAD_CLAMP = 1e-9
_NORM_GUARD = 1e-12
# The multiplier decay -lambda stalls below this value: under Adam, a
# sign-consistent vanishing gradient still drives full-size steps, so an
# unbounded decay buries the multiplier heads too deep to recover.
_LAMBDA_DECAY_FLOOR = 1e-2
# Multiplier ascent runs without momentum (no coasting past the floor).
_MULTIPLIER_BETAS = (0.0, 0.999)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the iteration index."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class TrainConfig:
    batch_size: int = 400
    total_iters: int = 10_000
    lr_policy: float = 5e-3
    lr_multiplier: float = 1e-3
    seed: int = 0
    eval_cadence: int = 200
    holdout: int = 500
    hidden: tuple = (128, 128, 128)
    mode: str = "proposed"
    sort_inputs: bool = True
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    rho: float = 30.0
    w_grad_req: float = 0.4
    fixed_v: float = 50.0
    fixed_u: float = 200.0
    anneal_v: tuple = (50.0, 400.0)
    anneal_u: tuple = (200.0, 500.0)
    fixed_lambda: float = 100.0
    lr_policy_end: float = 5e-4      # decay target for the plain primal-dual modes
    incr_rl_factor: float = 1.05
    incr_eps_delta: float = 1e-8
    train_eps: Optional[float] = None
    head_bias: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.batch_size < 1 or self.total_iters < 0:
            raise ValueError("batch_size must be >= 1 and total_iters >= 0")
        if self.lr_policy <= 0 or self.lr_multiplier <= 0:
            raise ValueError("learning rates must be positive")


@dataclass
class SmoothParams:
    """Smoothing parameters frozen for one loss evaluation."""

    u: np.ndarray       # (B, F, 2M, 2M)
    v_rb: np.ndarray    # (B, F)
    v_sbt: np.ndarray   # (B, M, F)
    w_l: np.ndarray     # (B, M)
    w_s: np.ndarray     # (B, M)


@dataclass
class MultiplierOutput:
    lamL: np.ndarray
    lamS: np.ndarray


@dataclass
class TrainResult:
    policy: nn.NetworkParams
    lam_l: nn.NetworkParams
    lam_s: nn.NetworkParams
    log: list
    train_config: TrainConfig


def _train_requirements(config: SystemConfig, tcfg: TrainConfig):
    """(RL, RS, eps) used inside the training loss."""
    rl = config.RL.copy()
    rs = config.RS.copy()
    eps = config.eps.copy() if tcfg.train_eps is None else np.full(config.M, tcfg.train_eps)
    if tcfg.mode == "incr-require":
        rl = rl * tcfg.incr_rl_factor
        eps = np.maximum(eps - tcfg.incr_eps_delta, 1e-300)
    return rl, rs, eps


def _smoothed_quantities(powers_rb: np.ndarray, u: np.ndarray):
    """E, D, Gt for the tempered-softmax surrogate, batched per RB."""
    d = powers_rb[..., None, :] - powers_rb[..., :, None]
    e = np.exp(u * d)
    denom = e.sum(axis=-1)
    gt = powers_rb / denom
    return d, e, denom, gt


def compute_smoothing_params(gamma: np.ndarray, powers: np.ndarray,
                             state: SmoothingState, config: SystemConfig,
                             mode: str = "proposed", anneal_t: float = 0.0,
                             fixed_v: float = 50.0, fixed_u: float = 200.0,
                             anneal_v=(50.0, 400.0), anneal_u=(200.0, 500.0),
                             req=None) -> SmoothParams:
    """Solve every smoothing parameter at the current batch state.

    ``powers`` is (B, 2M, F). Entries whose surrogate input is zero get a
    zero parameter, which makes the corresponding indicator identically
    zero with zero gradient.
    """
    m_count = config.M
    b, n, f = powers.shape
    pt = powers.transpose(0, 2, 1)                      # (B, F, 2M)
    if mode == "fixed-parameter":
        v_const, u_const = fixed_v, fixed_u
    elif mode == "annealing":
        v_const = anneal_v[0] + (anneal_v[1] - anneal_v[0]) * anneal_t
        u_const = anneal_u[0] + (anneal_u[1] - anneal_u[0]) * anneal_t
    else:
        v_const = u_const = None

    if u_const is None:
        u = solve_u_array(pt, state.Vbar, state.rho)
    else:
        u = np.full((b, f, n, n), float(u_const))
    _, _, _, gt = _smoothed_quantities(pt, u)
    gt_f = gt.sum(axis=-1)                              # (B, F)
    gts = gt[..., m_count:].transpose(0, 2, 1)          # (B, M, F)
    rl, rs, eps = req if req is not None else (config.RL, config.RS, config.eps)
    if v_const is None:
        v_rb = solve_v_array(gt_f, state.V)
        v_sbt = solve_v_array(gts, state.V)
        c_l, c_s, _ = _smoothed_gaps(gamma, gt, v_sbt, config, rl, rs, eps)
        # one batched bisection for both penalty smoothing parameters
        packed = np.concatenate([np.maximum(c_l, 0.0).ravel(),
                                 np.maximum(c_s, 0.0).ravel()])
        w = solve_v_array(packed, state.w_grad_req)
        w_l = w[:c_l.size].reshape(c_l.shape)
        w_s = w[c_l.size:].reshape(c_s.shape)
    else:
        v_rb = np.full(gt_f.shape, float(v_const))
        v_sbt = np.full(gts.shape, float(v_const))
        c_l, c_s, _ = _smoothed_gaps(gamma, gt, v_sbt, config, rl, rs, eps)
        w_l = np.full(c_l.shape, float(v_const))
        w_s = np.full(c_s.shape, float(v_const))
    return SmoothParams(u=u, v_rb=v_rb, v_sbt=v_sbt, w_l=w_l, w_s=w_s)


def _gap_scales(rl, rs):
    """Per-user normalizers for the training-time gaps.

    The loss expresses gaps in units of the requirement: q is scale-free
    (its smoothing parameter adapts as zeta/c), but the gradient balance is
    not, and nats/s gaps (~1e6) would pin the multiplier equilibrium at
    ~1e-4 where the softplus heads cannot live.
    """
    return np.maximum(rl, 1.0), np.maximum(rs, 1.0)


def _smoothed_gaps(gamma, gt, v_sbt, config, rl, rs, eps):
    """Requirement-relative smoothed QoS gaps and the smoothed SBT RB count."""
    m_count = config.M
    lb = config.lb
    gtl = gt[..., :m_count].transpose(0, 2, 1)          # (B, M, F)
    gts = gt[..., m_count:].transpose(0, 2, 1)
    rate_l = lb * np.log1p(gamma * gtl).sum(axis=-1)    # (B, M)
    sbt_sum = lb * np.log1p(gamma * gts).sum(axis=-1)
    ns_smooth = indicator_smooth(gts, v_sbt).sum(axis=-1)
    qinv = np.array([q_inv(float(e)) for e in eps])
    penalty = qinv[None, :] * np.sqrt(lb / config.tau) * np.sqrt(ns_smooth)
    scale_l, scale_s = _gap_scales(rl, rs)
    c_l = (rl[None, :] - rate_l) / scale_l[None, :]
    c_s = (rs[None, :] - sbt_sum + penalty) / scale_s[None, :]
    return c_l, c_s, ns_smooth


def build_loss(gamma: np.ndarray, powers: np.ndarray, lam_l: np.ndarray,
               lam_s: np.ndarray, state: SmoothingState, config: SystemConfig,
               mode: str = "proposed", params: Optional[SmoothParams] = None,
               req=None, anneal_t: float = 0.0, tcfg: Optional[TrainConfig] = None):
    """Loss, dLoss/dPowers, and dLoss/dMultipliers for one batch.

    ``gamma`` is (B, M, F) in the same RB order as ``powers`` (B, 2M, F);
    multipliers are (B, M) each. Smoothing parameters are taken from
    ``params`` when given (finite-difference audits freeze them), else
    solved here. Returns (loss, dP, (dlamL, dlamS), params).
    """
    m_count = config.M
    b = powers.shape[0]
    lb = config.lb
    rl, rs, eps = req if req is not None else (config.RL, config.RS, config.eps)
    if params is None:
        kw = {}
        if tcfg is not None:
            kw = dict(fixed_v=tcfg.fixed_v, fixed_u=tcfg.fixed_u,
                      anneal_v=tcfg.anneal_v, anneal_u=tcfg.anneal_u)
        params = compute_smoothing_params(gamma, powers, state, config, mode,
                                          anneal_t, req=(rl, rs, eps), **kw)
    pt = powers.transpose(0, 2, 1)
    _, e, denom, gt = _smoothed_quantities(pt, params.u)
    gt_f = gt.sum(axis=-1)
    c_l, c_s, ns_smooth = _smoothed_gaps(gamma, gt, params.v_sbt, config, rl, rs, eps)

    term1 = indicator_smooth(gt_f, params.v_rb).sum(axis=-1)        # (B,)
    plain = mode in ("default-constr", "incr-require")
    if plain:
        q_l, q_s = c_l, c_s
        dq_l = np.ones_like(c_l)
        dq_s = np.ones_like(c_s)
        dlam_l, dlam_s = c_l, c_s
    else:
        c_l_pos = np.maximum(c_l, 0.0)   # the satisfied branch never reads these
        c_s_pos = np.maximum(c_s, 0.0)
        q_l = np.where(c_l > 0, state.kappa * indicator_smooth(c_l_pos, params.w_l),
                       -np.minimum(lam_l / 2.0, 1.0))
        q_s = np.where(c_s > 0, state.kappa * indicator_smooth(c_s_pos, params.w_s),
                       -np.minimum(lam_s / 2.0, 1.0))
        dq_l = np.where(c_l > 0, state.kappa * indicator_grad(c_l_pos, params.w_l), 0.0)
        dq_s = np.where(c_s > 0, state.kappa * indicator_grad(c_s_pos, params.w_s), 0.0)
        dlam_l = np.where(c_l > 0, q_l, np.where(lam_l < 2.0, -lam_l, -1.0))
        dlam_s = np.where(c_s > 0, q_s, np.where(lam_s < 2.0, -lam_s, -1.0))
        dlam_l = np.where((c_l <= 0) & (lam_l < _LAMBDA_DECAY_FLOOR), 0.0, dlam_l)
        dlam_s = np.where((c_s <= 0) & (lam_s < _LAMBDA_DECAY_FLOOR), 0.0, dlam_s)
    loss = float(np.mean(term1 + (lam_l * q_l).sum(axis=-1) + (lam_s * q_s).sum(axis=-1)))
    if not math.isfinite(loss):
        raise TrainingDiverged(-1, "non-finite loss")

    # dLoss/dGt, assembled per surrogate target (B, F, 2M)
    d_gt = np.repeat(indicator_grad(gt_f, params.v_rb)[..., None], 2 * m_count, axis=-1)
    gtl = gt[..., :m_count].transpose(0, 2, 1)
    gts = gt[..., m_count:].transpose(0, 2, 1)
    scale_l, scale_s = _gap_scales(rl, rs)
    coef_l = (lam_l * dq_l / scale_l[None, :])[:, :, None]           # (B, M, 1)
    coef_s = (lam_s * dq_s / scale_s[None, :])[:, :, None]
    d_gt[..., :m_count] += (coef_l * (-lb * gamma / (1.0 + gamma * gtl))).transpose(0, 2, 1)
    qinv = np.array([q_inv(float(x)) for x in eps])
    ns_factor = 0.5 / np.sqrt(np.maximum(ns_smooth, _NS_GRAD_CLAMP))  # (B, M)
    dcs_dgts = (-lb * gamma / (1.0 + gamma * gts)
                + (qinv[None, :] * math.sqrt(lb / config.tau) * ns_factor)[:, :, None]
                * indicator_grad(gts, params.v_sbt))
    d_gt[..., m_count:] += (coef_s * dcs_dgts).transpose(0, 2, 1)

    # back through the tempered softmax: Gt[t] = p_t / D[t]
    w_mat = params.u * e
    idx = np.arange(2 * m_count)
    w_mat[..., idx, idx] = 0.0
    su = w_mat.sum(axis=-1)                                          # (B, F, 2M)
    own = d_gt * (1.0 / denom + pt * su / denom**2)
    scaled = d_gt * pt / denom**2                                    # (B, F, 2M)
    cross = np.einsum("bft,bftk->bfk", scaled, w_mat)
    d_pt = (own - cross) / b
    d_powers = d_pt.transpose(0, 2, 1)
    return loss, d_powers, (dlam_l / b, dlam_s / b), params


def normalize_powers(raw: np.ndarray, m_count: int, pmax: float):
    """Per-user sum normalization of the (B, 2M, F) ReLU head output."""
    b, n, f = raw.shape
    y = raw.reshape(b, 2, m_count, f)
    s = y.sum(axis=(1, 3))                                           # (B, M)
    denom = np.maximum(s, _NORM_GUARD)
    p = (pmax * y / denom[:, None, :, None]).reshape(b, n, f)
    return p, s


def normalize_backward(d_p: np.ndarray, raw: np.ndarray, s: np.ndarray,
                       m_count: int, pmax: float,
                       scale_floor: float = 1e-6) -> np.ndarray:
    """Gradient through normalize_powers; constant denominator under the guard.

    The backward scale is floored at pmax/scale_floor rather than the exact
    pmax/1e-12 of the forward guard: the exact value poisons Adam's second
    moments for thousands of steps whenever a user's head output collapses.
    """
    b, n, f = raw.shape
    y = raw.reshape(b, 2, m_count, f)
    dp = d_p.reshape(b, 2, m_count, f)
    denom = np.maximum(s, _NORM_GUARD)
    dot = (dp * y).sum(axis=(1, 3))                                  # (B, M)
    live = (s > _NORM_GUARD)[:, None, :, None]
    scale = pmax / np.maximum(denom, scale_floor)[:, None, :, None]
    d_y = scale * np.where(live, dp - (dot / denom)[:, None, :, None], dp)
    return d_y.reshape(b, n, f)


def _sorted_inputs(gammas: np.ndarray, enabled: bool):
    """Per-sample RB permutations and the flattened network inputs."""
    n_samp, m_count, f_count = gammas.shape
    if not enabled:
        perms = np.tile(np.arange(f_count), (n_samp, 1))
        return perms, gammas.reshape(n_samp, -1)
    perms = np.empty((n_samp, f_count), dtype=int)
    for i in range(n_samp):
        perms[i] = sort_rbs(gammas[i])
    sorted_g = np.take_along_axis(gammas, perms[:, None, :], axis=2)
    return perms, sorted_g.reshape(n_samp, -1)


def _policy_lr(tcfg: TrainConfig, iteration: int) -> float:
    if tcfg.mode in ("default-constr", "incr-require") and tcfg.total_iters > 1:
        t = iteration / (tcfg.total_iters - 1)
        return tcfg.lr_policy + (tcfg.lr_policy_end - tcfg.lr_policy) * t
    return tcfg.lr_policy


def train(gammas: np.ndarray, config: SystemConfig, tcfg: TrainConfig) -> TrainResult:
    """Primal-dual loop: Adam descent on the policy, ascent on multipliers.

    ``gammas`` is (Nsamples, M, F); the first ``holdout`` samples are the
    held-out evaluation set, the rest feed the batches. Deterministic in
    tcfg.seed.
    """
    gammas = np.asarray(gammas, dtype=float)
    if gammas.ndim != 3 or gammas.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (N, M, F) array")
    n_samp, m_count, f_count = gammas.shape
    if (m_count, f_count) != (config.M, config.F):
        raise ValueError("dataset shape does not match the system config")
    holdout = min(tcfg.holdout, max(n_samp - 1, 0))
    eval_g = gammas[:holdout]
    train_g = gammas[holdout:] if holdout < n_samp else gammas
    perms, flat = _sorted_inputs(train_g, tcfg.sort_inputs)

    rng = np.random.default_rng(tcfg.seed)
    dims_p = [m_count * f_count, *tcfg.hidden, 2 * m_count * f_count]
    dims_m = [m_count * f_count, *tcfg.hidden, m_count]
    acts_hidden = ["softplus"] * len(tcfg.hidden)
    policy = nn.init_network(dims_p, acts_hidden + ["relu"], tcfg.seed)
    # multiplier nets end in a linear layer; the softplus that makes the
    # multipliers non-negative is applied here, and its Jacobian is skipped
    # in the update: the sigmoid factor otherwise silences exactly the
    # entries that most need to grow (buried heads with violated gaps)
    lam_l_net = nn.init_network(dims_m, acts_hidden + ["linear"], tcfg.seed + 1)
    lam_s_net = nn.init_network(dims_m, acts_hidden + ["linear"], tcfg.seed + 2)
    # positive head biases: every output starts alive (a dead ReLU row cannot
    # recover through its own gradient) and multipliers start near one
    policy.biases[-1][:] = tcfg.head_bias
    lam_l_net.biases[-1][:] = tcfg.head_bias
    lam_s_net.biases[-1][:] = tcfg.head_bias
    nn.fit_standardization(policy, flat)
    lam_l_net.input_mean = policy.input_mean.copy()
    lam_l_net.input_std = policy.input_std.copy()
    lam_s_net.input_mean = policy.input_mean.copy()
    lam_s_net.input_std = policy.input_std.copy()

    req = _train_requirements(config, tcfg)
    fixed_multi = tcfg.mode == "fixed-multiplier"
    log: list[dict] = []
    for it in range(tcfg.total_iters):
        v, vbar, kappa = schedule(it, tcfg.total_iters, tcfg.schedule)
        state = SmoothingState(V=v, Vbar=vbar, kappa=kappa, rho=tcfg.rho,
                               w_grad_req=tcfg.w_grad_req)
        idx = rng.integers(0, flat.shape[0], size=tcfg.batch_size)
        x = flat[idx]
        gam = x.reshape(-1, m_count, f_count)
        out, cache_p = nn.forward(policy, x)
        raw = out.reshape(-1, 2 * m_count, f_count)
        powers, s_user = normalize_powers(raw, m_count, config.Pmax)
        if fixed_multi:
            lam_l = np.full((tcfg.batch_size, m_count), tcfg.fixed_lambda)
            lam_s = np.full((tcfg.batch_size, m_count), tcfg.fixed_lambda)
        else:
            z_l, cache_l = nn.forward(lam_l_net, x)
            z_s, cache_s = nn.forward(lam_s_net, x)
            lam_l = _softplus(z_l)
            lam_s = _softplus(z_s)
        anneal_t = it / (tcfg.total_iters - 1) if tcfg.total_iters > 1 else 0.0
        try:
            loss, d_p, (dl_l, dl_s), _ = build_loss(
                gam, powers, lam_l, lam_s, state, config, tcfg.mode,
                req=req, anneal_t=anneal_t, tcfg=tcfg)
        except TrainingDiverged as exc:
            raise TrainingDiverged(it, "non-finite loss") from exc
        d_raw = normalize_backward(d_p, raw, s_user, m_count, config.Pmax)
        grads_p, _ = nn.backward(policy, cache_p, d_raw.reshape(tcfg.batch_size, -1))
        nn.adam_step(policy, grads_p, _policy_lr(tcfg, it), direction="descend")
        if not fixed_multi:
            grads_l, _ = nn.backward(lam_l_net, cache_l, dl_l)
            grads_s, _ = nn.backward(lam_s_net, cache_s, dl_s)
            nn.adam_step(lam_l_net, grads_l, tcfg.lr_multiplier,
                         betas=_MULTIPLIER_BETAS, direction="ascend")
            nn.adam_step(lam_s_net, grads_s, tcfg.lr_multiplier,
                         betas=_MULTIPLIER_BETAS, direction="ascend")
        if it % tcfg.eval_cadence == 0 or it == tcfg.total_iters - 1:
            metrics = evaluate(policy, eval_g, config, sort_inputs=tcfg.sort_inputs) \
                if eval_g.shape[0] else {"avg_occupied_rbs": math.nan,
                                         "violation_fraction_L": math.nan,
                                         "violation_fraction_S": math.nan}
            log.append({"iter": it, "loss": loss,
                        "avg_rbs": metrics["avg_occupied_rbs"],
                        "viol_L": metrics["violation_fraction_L"],
                        "viol_S": metrics["violation_fraction_S"],
                        "V": v, "Vbar": vbar, "kappa": kappa})
    return TrainResult(policy, lam_l_net, lam_s_net, log, tcfg)


def _discrete_powers(policy: nn.NetworkParams, gammas: np.ndarray,
                     config: SystemConfig, sort_inputs: bool = True):
    """Batched inference: forward, normalize, exact piecewise max, un-permute."""
    n_samp, m_count, f_count = gammas.shape
    perms, flat = _sorted_inputs(gammas, sort_inputs)
    out, _ = nn.forward(policy, flat)
    raw = out.reshape(n_samp, 2 * m_count, f_count)
    powers, _ = normalize_powers(raw, m_count, config.Pmax)
    top2 = np.partition(powers, -2, axis=1)
    top, second = top2[:, -1, :], top2[:, -2, :]
    keep = (powers == top[:, None, :]) & (top > second)[:, None, :]
    kept = np.where(keep, powers, 0.0)
    inv = np.argsort(perms, axis=1)
    kept = np.take_along_axis(kept, inv[:, None, :], axis=2)
    return kept[:, :m_count, :], kept[:, m_count:, :]


def infer(policy: nn.NetworkParams, gamma: np.ndarray, config: SystemConfig,
          sort_inputs: bool = True) -> Allocation:
    """Discrete allocation for one channel realization."""
    p_l, p_s = _discrete_powers(policy, np.asarray(gamma, dtype=float)[None],
                                config, sort_inputs)
    return Allocation(pL=p_l[0], pS=p_s[0])


def evaluate(policy: nn.NetworkParams, gammas: np.ndarray, config: SystemConfig,
             sort_inputs: bool = True, power_floor: float = 1e-12) -> dict:
    """Exact-gap metrics of the discrete policy over a test set."""
    gammas = np.asarray(gammas, dtype=float)
    if gammas.shape[0] == 0:
        raise ValueError("empty test set")
    p_l, p_s = _discrete_powers(policy, gammas, config, sort_inputs)
    lb = config.lb
    tol = RATE_TOL * lb
    rate_l = lb * np.log1p(gammas * p_l).sum(axis=-1)                # (N, M)
    ns = np.count_nonzero(p_s > 0, axis=-1)
    qinv = np.array([q_inv(float(e)) for e in config.eps])
    sbt = lb * np.log1p(gammas * p_s).sum(axis=-1) \
        - qinv[None, :] * np.sqrt(ns * lb / config.tau)
    sbt = np.where(ns > 0, sbt, 0.0)
    gap_l = config.RL[None, :] - rate_l
    gap_s = config.RS[None, :] - sbt
    occupied = np.count_nonzero((p_l.sum(axis=1) + p_s.sum(axis=1)) > power_floor, axis=-1)
    qs = np.linspace(0.0, 1.0, 101)
    return {
        "avg_occupied_rbs": float(np.mean(occupied)),
        "violation_fraction_L": float(np.mean(gap_l > tol)),
        "violation_fraction_S": float(np.mean(gap_s > tol)),
        "occupied": occupied,
        "gapL": gap_l.ravel(),
        "gapS": gap_s.ravel(),
        "gapL_quantiles": np.quantile(gap_l, qs),
        "gapS_quantiles": np.quantile(gap_s, qs),
    }
