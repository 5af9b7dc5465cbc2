"""Command-line entry point: dataset generation, solvers, training,
evaluation, and the runtime benchmark.

All dB/bits conversions happen once, at config load. Solver outputs are
JSONL and byte-reproducible from (config, seed); timing is measurement
data and therefore lives on stderr and in the dedicated bench command.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import figures, neuralnet as nn, trainer
from .mu_opt import solve_multi_user
from .oracle import BudgetExceededError, exhaustive_solve
from .ratecalc import qos_gaps
from .smoothing import ScheduleSpec
from .su_opt import solve_single_user
from .sysmodel import LN2, ChannelState, ConfigError, SystemConfig, sample_channel, sample_seed
from .trainer import TrainConfig

_SYSTEM_FIELDS = {f.name for f in dataclasses.fields(SystemConfig) if f.init}
_REQUIRED_SYSTEM = ("rate_L_bps", "rate_S_bps", "eps")
_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}
_SCHEDULE_FIELDS = {f.name for f in dataclasses.fields(ScheduleSpec)}


def config_to_dict(config: SystemConfig) -> dict:
    """File-unit dict of a system config (bits/s, dBm)."""
    return {
        "M": config.M, "F": config.F, "L": config.L, "B": config.B,
        "tau": config.tau, "Nr": config.Nr, "pmax_dbm": config.pmax_dbm,
        "rate_L_bps": [float(x) for x in np.atleast_1d(config.rate_L_bps)],
        "rate_S_bps": [float(x) for x in np.atleast_1d(config.rate_S_bps)],
        "eps": [float(x) for x in config.eps],
        "distance_m": config.distance_m,
        "noise_psd_dbm_hz": config.noise_psd_dbm_hz,
        "noise_figure_db": config.noise_figure_db,
        "penetration_db": config.penetration_db,
        "interference_margin_db": config.interference_margin_db,
        "path_count": config.path_count,
        "aoa_range_rad": config.aoa_range_rad,
        "delay_spread_s": config.delay_spread_s,
    }


def _system_from_dict(d: dict) -> SystemConfig:
    for key in d:
        if key not in _SYSTEM_FIELDS:
            raise ConfigError(f"unknown system config field: {key}")
    for key in _REQUIRED_SYSTEM:
        if key not in d:
            raise ConfigError(f"missing system config field: {key}")
    return SystemConfig(**d)


def _train_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    sched = d.pop("schedule", {})
    for key in d:
        if key not in _TRAIN_FIELDS:
            raise ConfigError(f"unknown train config field: {key}")
    for key in sched:
        if key not in _SCHEDULE_FIELDS:
            raise ConfigError(f"unknown schedule field: {key}")
    kwargs = dict(d)
    for key in ("hidden", "anneal_v", "anneal_u"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    kwargs["schedule"] = ScheduleSpec(**sched)
    return TrainConfig(**kwargs)


def load_config(path) -> tuple[SystemConfig, TrainConfig]:
    """Read a JSON config file with a required "system" section and an
    optional "train" section."""
    with open(path) as fh:
        doc = json.load(fh)
    if "system" not in doc:
        raise ConfigError("missing system config section: system")
    for key in doc:
        if key not in ("system", "train"):
            raise ConfigError(f"unknown config section: {key}")
    system = _system_from_dict(doc["system"])
    train_cfg = _train_from_dict(doc.get("train", {}))
    return system, train_cfg


def dump_config(system: SystemConfig, train_cfg: TrainConfig | None = None) -> dict:
    doc = {"system": config_to_dict(system)}
    if train_cfg is not None:
        td = dataclasses.asdict(train_cfg)
        td["hidden"] = list(td["hidden"])
        td["anneal_v"] = list(td["anneal_v"])
        td["anneal_u"] = list(td["anneal_u"])
        doc["train"] = td
    return doc


def write_dataset(path, config: SystemConfig, states: list[ChannelState]) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"config": config_to_dict(config)}, sort_keys=True) + "\n")
        for st in states:
            fh.write(json.dumps({"seed": st.seed, "gamma": st.gamma.tolist()}) + "\n")


def read_dataset(path) -> tuple[SystemConfig, list[ChannelState]]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if "config" not in header:
            raise ConfigError("dataset missing config header record")
        config = _system_from_dict(header["config"])
        states = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            states.append(ChannelState(gamma=np.asarray(rec["gamma"], dtype=float),
                                       seed=int(rec["seed"])))
    return config, states


def _cmd_gen_data(args) -> int:
    config, _ = load_config(args.config)
    states = [sample_channel(config, sample_seed(args.seed, i)) for i in range(args.samples)]
    write_dataset(args.out, config, states)
    print(f"wrote {args.samples} samples to {args.out}", file=sys.stderr)
    return 0


def _solve_common(args, solver_name: str) -> int:
    config, _ = load_config(args.config) if args.config else (None, None)
    ds_config, states = read_dataset(args.dataset)
    if config is None:
        config = ds_config
    t0 = time.perf_counter()
    with open(args.out, "w") as fh:
        for i, st in enumerate(states):
            if solver_name == "su":
                if config.M != 1:
                    raise ConfigError("solve-su requires an M=1 config")
                res = solve_single_user(st.gamma[0], config)
            elif solver_name == "mu":
                res = solve_multi_user(st, config)
            else:
                res = exhaustive_solve(st, config, max_states=args.max_states)
            gaps = qos_gaps(res.allocation, st, config)
            rec = {
                "index": i, "seed": st.seed,
                "occupied": res.occupied, "feasible": res.feasible,
                "pL": res.allocation.pL.tolist(), "pS": res.allocation.pS.tolist(),
                "xL": res.allocation.xL.astype(int).tolist(),
                "xS": res.allocation.xS.astype(int).tolist(),
                "gapL": gaps.cL.tolist(), "gapS": gaps.cS.tolist(),
            }
            fh.write(json.dumps(rec) + "\n")
    dt = time.perf_counter() - t0
    print(f"solved {len(states)} instances in {dt:.3f}s "
          f"({dt / max(len(states), 1):.4f}s each)", file=sys.stderr)
    return 0


def _write_log_csv(path, rows: list) -> None:
    cols = ["iter", "loss", "avg_rbs", "viol_L", "viol_S", "V", "Vbar", "kappa"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in rows:
            writer.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def _cmd_train(args) -> int:
    _, tcfg = load_config(args.config)
    if args.mode:
        tcfg = dataclasses.replace(tcfg, mode=args.mode)
    config, states = read_dataset(args.dataset)
    gammas = np.stack([st.gamma for st in states])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = trainer.train(gammas, config, tcfg)
    _write_log_csv(out_dir / "log.csv", result.log)
    nn.save_checkpoint(out_dir / "checkpoint.json", {
        "policy": nn.params_to_dict(result.policy),
        "lam_l": nn.params_to_dict(result.lam_l),
        "lam_s": nn.params_to_dict(result.lam_s),
        "system": config_to_dict(config),
        "train": dump_config(config, tcfg)["train"],
    })
    figures.render_training_curves(result.log, out_dir / "learning_curve.png")
    print(f"trained {tcfg.total_iters} iterations; outputs in {out_dir}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    doc = nn.load_checkpoint(args.checkpoint)
    policy = nn.params_from_dict(doc["policy"])
    sort_inputs = bool(doc.get("train", {}).get("sort_inputs", True))
    config, states = read_dataset(args.dataset)
    gammas = np.stack([st.gamma for st in states])
    metrics = trainer.evaluate(policy, gammas, config, sort_inputs=sort_inputs)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {k: metrics[k] for k in
               ("avg_occupied_rbs", "violation_fraction_L", "violation_fraction_S")}
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(out_dir / "gap_cdf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantile", "gapL", "gapS"])
        qs = np.linspace(0.0, 1.0, 101)
        for q, gl, gs in zip(qs, metrics["gapL_quantiles"], metrics["gapS_quantiles"]):
            writer.writerow([repr(float(q)), repr(float(gl)), repr(float(gs))])
    figures.render_gap_cdf(metrics["gapL"], metrics["gapS"], out_dir / "gap_cdf.png")
    print(json.dumps(summary), file=sys.stdout)
    return 0


def _scaled_config(base: SystemConfig, f_count: int, rl_scale: float) -> SystemConfig:
    d = config_to_dict(base)
    d["F"] = f_count
    d["rate_L_bps"] = [x * rl_scale for x in d["rate_L_bps"]]
    return _system_from_dict(d)


def _cmd_bench(args) -> int:
    if args.config:
        base, _ = load_config(args.config)
    else:
        # demanding defaults: most instances need close to every RB, so the
        # oracle walks deep into its enumeration layers at every F
        base = SystemConfig(M=1, F=6, rate_L_bps=(5.5e6,), rate_S_bps=(300e3,),
                            eps=(1e-3,))
    f_values = [int(x) for x in args.f_values.split(",")]
    rl_scales = [float(x) for x in args.rl_scales.split(",")]
    rows = []
    rng_policy_cfg = TrainConfig(batch_size=32, total_iters=60, hidden=(32, 32),
                                 eval_cadence=1000, holdout=0, seed=args.seed)

    def time_methods(config, instances, sweep, value):
        gammas = np.stack([sample_channel(config, sample_seed(args.seed, i)).gamma
                           for i in range(instances)])
        result = trainer.train(gammas, config, rng_policy_cfg)
        # warm every path once before timing (first-call allocations)
        warm = ChannelState(gamma=gammas[0], seed=0)
        solve_single_user(warm.gamma[0], config)
        exhaustive_solve(warm, config)
        trainer.infer(result.policy, warm.gamma, config)
        timings = {"solve_su": 0.0, "oracle": 0.0, "infer": 0.0}
        for i in range(instances):
            st = ChannelState(gamma=gammas[i], seed=0)
            t0 = time.perf_counter()
            solve_single_user(st.gamma[0], config)
            timings["solve_su"] += time.perf_counter() - t0
            t0 = time.perf_counter()
            exhaustive_solve(st, config)
            timings["oracle"] += time.perf_counter() - t0
            t0 = time.perf_counter()
            trainer.infer(result.policy, st.gamma, config)
            timings["infer"] += time.perf_counter() - t0
        for method, total in timings.items():
            rows.append({"sweep": sweep, "value": value, "method": method,
                         "mean_seconds": total / instances, "instances": instances})

    for f_count in f_values:
        time_methods(_scaled_config(base, f_count, 1.0), args.instances, "F", f_count)
    for scale in rl_scales:
        cfg = _scaled_config(base, f_values[-1], scale)
        time_methods(cfg, args.instances, "RL", cfg.RL[0] / LN2 / 1e6)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["sweep", "value", "method",
                                                "mean_seconds", "instances"])
        writer.writeheader()
        writer.writerows(rows)
    figures.render_bench(rows, out_dir / "bench.png")
    print(f"benchmark written to {out_dir}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbqos",
                                     description="Joint uplink power and RB allocation "
                                                 "under two-blocklength QoS constraints")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a channel dataset (JSONL)")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    for name, help_text in (("solve-su", "optimal single-user solver"),
                            ("solve-mu", "multiuser heuristic solver")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--dataset", required=True)
        p.add_argument("--config", default=None,
                       help="override the dataset's embedded system config")
        p.add_argument("--out", required=True)
        p.set_defaults(func=lambda a, n=name: _solve_common(a, n.split("-")[1]))

    p = sub.add_parser("oracle", help="exhaustive minimal-RB search (small instances)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--max-states", type=int, default=10_000_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=lambda a: _solve_common(a, "oracle"))

    p = sub.add_parser("train", help="primal-dual training of the policy")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=trainer.MODES, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="runtime comparison across F and rate targets")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--f-values", default="4,5,6,7")
    p.add_argument("--rl-scales", default="0.5,1.0,1.5,2.0")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)
    return parser


def cli_dispatch(argv=None) -> int:
    """Parse and run one subcommand; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
