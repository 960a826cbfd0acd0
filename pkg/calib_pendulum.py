"""Calibration: pendulum matrix across 5 seeds (criteria 8-11 feasibility)."""
import json
import time

from mpcmfrl.config import ExperimentConfig
from mpcmfrl.curves import best_so_far_curve, read_evals_csv
from mpcmfrl.harness import evaluate_run_checkpoints, heldout_error_report, run_experiment

ROOT = "/tmp/calib3/pendulum"
SEEDS = (0, 1, 2, 3, 4)
BASE = dict(env="pendulum", total_steps=96000, eval_period=4000, eval_episodes=10,
            seeds=SEEDS, agent_episodes_per_iteration=10)
HALF = 48000

results = {}
t0 = time.time()

def log(msg):
    print(f"[{time.time()-t0:7.0f}s] {msg}", flush=True)

def curve_of(out_dir, seeds=SEEDS):
    recs = read_evals_csv(f"{out_dir}/evals.csv")
    by_seed = {s: sorted([r for r in recs if r.seed == s], key=lambda r: r.steps)
               for s in seeds}
    return best_so_far_curve(by_seed, resamples=200), by_seed

# --- joint mpc-mfrl training (shared by sampling/terminal/soft-greedy variants)
mfrl_cfg = ExperimentConfig(method="mpc-mfrl", out_dir=f"{ROOT}/mpc-mfrl", **BASE)
run_experiment(mfrl_cfg, stop_after_steps=HALF, quiet=True)
log("mpc-mfrl trained")

variant_list = [
    ("Z=U", dict(planner_strategy="uniform")),
    ("H2-V", dict(planner_horizon=2)),
    ("H2-0", dict(planner_horizon=2, planner_terminal="zero")),
]
for label, overrides in variant_list:
    v = mfrl_cfg.with_overrides(label=label, out_dir=f"{ROOT}/{label}", **overrides)
    evaluate_run_checkpoints(mfrl_cfg.resolved_out_dir(), v, v.resolved_out_dir(),
                             SEEDS, quiet=True)
    log(f"re-eval {label}")

# --- model-free baselines (one training, two eval modes)
mfs_cfg = ExperimentConfig(method="mf-s", out_dir=f"{ROOT}/mf-s", **BASE)
run_experiment(mfs_cfg, stop_after_steps=HALF, quiet=True)
mfd_cfg = mfs_cfg.with_overrides(method="mf-d", label="mf-d", out_dir=f"{ROOT}/mf-d")
evaluate_run_checkpoints(mfs_cfg.resolved_out_dir(), mfd_cfg, mfd_cfg.resolved_out_dir(),
                         SEEDS, quiet=True)
log("mf baselines done")

# --- model-based baselines (one training, two eval modes)
rand_cfg = ExperimentConfig(method="mpc-random", out_dir=f"{ROOT}/mpc-random", **BASE)
run_experiment(rand_cfg, stop_after_steps=HALF, quiet=True)
cem_cfg = rand_cfg.with_overrides(method="mpc-cem", label="mpc-cem",
                                  planner_strategy="cem", out_dir=f"{ROOT}/mpc-cem")
evaluate_run_checkpoints(rand_cfg.resolved_out_dir(), cem_cfg, cem_cfg.resolved_out_dir(),
                         SEEDS, quiet=True)
log("mpc baselines done")

# --- summary at the half-budget checkpoint
summary = {}
for label in ("mpc-mfrl", "Z=U", "H2-V", "H2-0", "mf-s", "mf-d", "mpc-random", "mpc-cem"):
    curve, by_seed = curve_of(f"{ROOT}/{label}")
    half_pt = [pt for pt in curve if pt.steps == HALF][0]
    summary[label] = {"half_mean": half_pt.mean, "half_per_seed": half_pt.per_seed_best}
    log(f"{label}: half-budget best-so-far mean {half_pt.mean:.0f} "
        f"per-seed {[round(v) for v in half_pt.per_seed_best]}")

# --- collector ablation at the 50k budget (criterion 8)
col_base = ExperimentConfig(env="pendulum", total_steps=50000, eval_period=10000,
                            eval_episodes=10, seeds=SEEDS,
                            agent_episodes_per_iteration=10,
                            out_dir=f"{ROOT}/collector")
pol_cfg = col_base.with_overrides(method="mpc-mfrl", label="policy",
                                  out_dir=f"{ROOT}/collector/policy")
run_experiment(pol_cfg, quiet=True)
log("collector: policy run done")
rnd_cfg = col_base.with_overrides(method="mpc-random", label="random+mpc",
                                  planner_strategy="uniform", planner_terminal="zero",
                                  planner_top_e=1, out_dir=f"{ROOT}/collector/random+mpc")
run_experiment(rnd_cfg, quiet=True)
log("collector: random run done")
rows = heldout_error_report(pol_cfg.resolved_out_dir(), rnd_cfg.resolved_out_dir(),
                            pol_cfg, SEEDS, f"{ROOT}/collector/heldout_error.csv")
final = {}
for seed in SEEDS:
    fp = [r["error"] for r in rows if r["seed"] == seed and r["collector"] == "policy"
          and r["steps"] == 50000][0]
    fr = [r["error"] for r in rows if r["seed"] == seed and r["collector"] == "random+mpc"
          and r["steps"] == 50000][0]
    final[seed] = (fp, fr, fp < fr)
    log(f"collector seed {seed}: policy {fp:.5f} random+mpc {fr:.5f} policy wins: {fp < fr}")
summary["collector_final"] = {str(k): v for k, v in final.items()}

with open(f"{ROOT}/summary.json", "w") as f:
    json.dump(summary, f, indent=1)
log("DONE")
