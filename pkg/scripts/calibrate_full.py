"""Full-scale validation of the toy-training and sorting-benefit criteria."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from rbqos import mu_opt, sysmodel as sm, trainer as tr

MODE = sys.argv[1] if len(sys.argv) > 1 else "proposed"
SORTED = sys.argv[2] != "unsorted" if len(sys.argv) > 2 else True
SEED = int(sys.argv[3]) if len(sys.argv) > 3 else 0

cfg = sm.SystemConfig(M=2, F=8, rate_L_bps=(1.2e6,), rate_S_bps=(102.4e3,), eps=(1e-2,))
n_train, n_hold = 20_000, 500
gammas = np.stack([sm.sample_channel(cfg, sm.sample_seed(42, i)).gamma
                   for i in range(n_train + n_hold)])

mu_counts = []
for i in range(n_hold):
    r = mu_opt.solve_multi_user(sm.ChannelState(gamma=gammas[i], seed=0), cfg)
    if r.feasible:
        mu_counts.append(r.occupied)
mu_avg = float(np.mean(mu_counts))
print(f"mu avg occupied {mu_avg:.3f} over {len(mu_counts)} feasible", flush=True)

tcfg = tr.TrainConfig(batch_size=100, total_iters=50_000, holdout=n_hold,
                      hidden=(128, 128, 128), eval_cadence=250, seed=SEED,
                      mode=MODE, sort_inputs=SORTED)
t0 = time.time()
res = tr.train(gammas, cfg, tcfg)
dt = time.time() - t0
final = res.log[-1]
tail = [r for r in res.log if r["iter"] >= tcfg.total_iters - 200]
level = float(np.mean([r["avg_rbs"] for r in tail]))
first = next((r["iter"] for r in res.log if r["avg_rbs"] <= level), None)
comb = (final["viol_L"] + final["viol_S"]) / 2
print(f"[{MODE} sorted={SORTED} seed={SEED}] {dt/60:.1f} min "
      f"final_rbs={final['avg_rbs']:.3f} violL={final['viol_L']:.4f} "
      f"violS={final['viol_S']:.4f} combined={comb:.4f} "
      f"ratio={final['avg_rbs']/mu_avg:.3f} tail_level={level:.3f} "
      f"first_hit_iter={first}", flush=True)
for row in res.log[::20]:
    print("   ", {k: (round(v, 5) if isinstance(v, float) else v)
                  for k, v in row.items()}, flush=True)
