"""Calibration run for the toy-scale training acceptance criterion."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from rbqos import mu_opt, sysmodel as sm, trainer as tr


def main():
    cfg = sm.SystemConfig(M=2, F=8, rate_L_bps=(1.2e6,), rate_S_bps=(102.4e3,), eps=(1e-2,))
    n_train, n_hold = 20_000, 500
    t0 = time.time()
    gammas = np.stack([sm.sample_channel(cfg, sm.sample_seed(42, i)).gamma
                       for i in range(n_train + n_hold)])
    print(f"dataset {gammas.shape} in {time.time()-t0:.1f}s", flush=True)

    # reference: multiuser heuristic on the held-out set
    t0 = time.time()
    mu_counts, mu_feas = [], 0
    for i in range(n_hold):
        ch = sm.ChannelState(gamma=gammas[i], seed=0)
        r = mu_opt.solve_multi_user(ch, cfg)
        if r.feasible:
            mu_feas += 1
            mu_counts.append(r.occupied)
    mu_avg = float(np.mean(mu_counts))
    print(f"mu: feasible {mu_feas}/{n_hold}, avg occupied {mu_avg:.3f} "
          f"({time.time()-t0:.1f}s)", flush=True)

    for mode in ("proposed", "default-constr"):
        tcfg = tr.TrainConfig(batch_size=100, total_iters=50_000, holdout=n_hold,
                              hidden=(128, 128, 128), eval_cadence=1000, seed=0,
                              mode=mode)
        t0 = time.time()
        res = tr.train(gammas, cfg, tcfg)
        dt = time.time() - t0
        final = res.log[-1]
        print(f"[{mode}] {dt/60:.1f} min; final: avg_rbs={final['avg_rbs']:.3f} "
              f"violL={final['viol_L']:.4f} violS={final['viol_S']:.4f} "
              f"ratio_vs_mu={final['avg_rbs']/mu_avg:.3f}", flush=True)
        for row in res.log[::5]:
            print("   ", {k: (round(v, 5) if isinstance(v, float) else v)
                          for k, v in row.items()}, flush=True)


if __name__ == "__main__":
    main()
