"""Calibration: lqr method matrix across 5 seeds (criterion 11 feasibility)."""
import json
import time

from mpcmfrl.config import ExperimentConfig
from mpcmfrl.curves import best_so_far_curve, read_evals_csv
from mpcmfrl.harness import evaluate_run_checkpoints, run_experiment

ROOT = "/tmp/calib2/lqr"
SEEDS = (0, 1, 2, 3, 4)
BASE = dict(env="lqr", total_steps=20000, eval_period=2000, eval_episodes=10,
            seeds=SEEDS, agent_episodes_per_iteration=5)
HALF = 10000

t0 = time.time()

def log(msg):
    print(f"[{time.time()-t0:7.0f}s] {msg}", flush=True)

mfrl = ExperimentConfig(method="mpc-mfrl", out_dir=f"{ROOT}/mpc-mfrl", **BASE)
run_experiment(mfrl, quiet=True)
log("mpc-mfrl done")

mfs = ExperimentConfig(method="mf-s", out_dir=f"{ROOT}/mf-s", **BASE)
run_experiment(mfs, quiet=True)
mfd = mfs.with_overrides(method="mf-d", label="mf-d", out_dir=f"{ROOT}/mf-d")
evaluate_run_checkpoints(mfs.resolved_out_dir(), mfd, mfd.resolved_out_dir(), SEEDS, quiet=True)
log("mf done")

rand = ExperimentConfig(method="mpc-random", out_dir=f"{ROOT}/mpc-random", **BASE)
run_experiment(rand, quiet=True)
cem = rand.with_overrides(method="mpc-cem", label="mpc-cem", planner_strategy="cem",
                          out_dir=f"{ROOT}/mpc-cem")
evaluate_run_checkpoints(rand.resolved_out_dir(), cem, cem.resolved_out_dir(), SEEDS, quiet=True)
log("mpc baselines done")

summary = {}
for label in ("mpc-mfrl", "mf-s", "mf-d", "mpc-random", "mpc-cem"):
    recs = read_evals_csv(f"{ROOT}/{label}/evals.csv")
    by_seed = {s: sorted([r for r in recs if r.seed == s], key=lambda r: r.steps)
               for s in SEEDS}
    curve = best_so_far_curve(by_seed, resamples=200)
    half_pt = [pt for pt in curve if pt.steps == HALF][0]
    summary[label] = {"half_mean": half_pt.mean, "half_per_seed": half_pt.per_seed_best,
                      "final_mean": curve[-1].mean}
    log(f"{label}: half {half_pt.mean:.2f} final {curve[-1].mean:.2f} "
        f"per-seed {[round(v, 1) for v in half_pt.per_seed_best]}")

with open(f"{ROOT}/summary.json", "w") as f:
    json.dump(summary, f, indent=1)
log("DONE")
