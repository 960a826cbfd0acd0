"""Experiment orchestration: training loops, offline evaluation, persistence.

Per-seed runs are fully deterministic and resumable. All training randomness
comes from one serialized stream; offline evaluations use streams derived
from ``[seed, 7, checkpoint_steps]`` so they are independent of training
progress, shared across planner variants (common initial states), and
reproducible post hoc from saved checkpoints. Run directory layout:

    <out_dir>/config.txt
    <out_dir>/seed_<k>/state/            resumable snapshot (latest checkpoint)
    <out_dir>/seed_<k>/checkpoints/step_<n>/   frozen networks + meta
    <out_dir>/seed_<k>/evals.csv         per-seed evaluation records
    <out_dir>/seed_<k>/diagnostics.csv   per-iteration policy-update metrics
    <out_dir>/evals.csv, curve.csv       merged across seeds
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .agent import (AgentConfig, GaussianPolicy, PolicyBehavior, UniformBehavior,
                    ValueFunction, collect_rollouts, compute_returns_and_advantages,
                    fit_value, trpo_update)
from .config import MODEL_METHODS, POLICY_METHODS, ExperimentConfig, save_config
from .curves import EvalRecord, best_so_far_curve, read_evals_csv, write_curve_csv, write_evals_csv
from .dynamics import DynamicsModel, TransitionDataset, held_out_error, train_model
from .envs import Env, make_env
from .errors import ConfigError, StateError
from .neuralnet import Adam
from .planner import (CemStrategy, PlannerConfig, PolicyStrategy, UniformStrategy,
                      ValueTerminal, ZeroTerminal, plan)

EVAL_STREAM = 7      # salt for evaluation rng derivation
TRAIN_STREAM = 11    # salt for the training stream
TESTSET_STREAM = 13  # salt for held-out test-set collection


class PlannerBehavior:
    """Data collection by executing the planner at every step."""

    def __init__(self, model, planner_config: PlannerConfig):
        self.model = model
        self.planner_config = planner_config

    def act(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return plan(self.model, state, self.planner_config, rng)


def agent_config_from(config: ExperimentConfig) -> AgentConfig:
    return AgentConfig(
        gamma=config.agent_gamma, lam=config.agent_lam, kl_delta=config.agent_kl_delta,
        cg_iters=config.agent_cg_iters, cg_damping=config.agent_cg_damping,
        value_epochs=config.agent_value_epochs, value_batch_size=config.agent_value_batch_size,
        value_lr=config.agent_value_lr,
        episodes_per_iteration=config.agent_episodes_per_iteration)


def build_planner_config(
    config: ExperimentConfig, env: Env,
    policy: GaussianPolicy | None, value_fn: ValueFunction | None, *,
    strategy: str | None = None, terminal: str | None = None, top_e: int | None = None,
    horizon: int | None = None,
) -> PlannerConfig:
    """Runtime planner configuration with network snapshots plugged in."""
    strategy = strategy or config.planner_strategy
    terminal = terminal or config.planner_terminal
    if strategy == "uniform":
        strat = UniformStrategy()
    elif strategy == "policy":
        if policy is None:
            raise ConfigError("policy sampling strategy requires a policy snapshot")
        strat = PolicyStrategy(policy)
    elif strategy == "cem":
        strat = CemStrategy(population=config.cem_population, elite_frac=config.cem_elite_frac,
                            iterations=config.cem_iterations, alpha=config.cem_alpha,
                            init_std=config.cem_init_std)
    else:
        raise ConfigError(f"unknown strategy {strategy!r}")
    if terminal == "value":
        if value_fn is None:
            raise ConfigError("value terminal mode requires a value-function snapshot")
        term = ValueTerminal(value_fn)
    elif terminal == "zero":
        term = ZeroTerminal()
    else:
        raise ConfigError(f"unknown terminal mode {terminal!r}")
    n = config.cem_population if strategy == "cem" else config.planner_n
    return PlannerConfig(
        n_trajectories=n, horizon=horizon or config.planner_horizon,
        top_e=top_e or config.planner_top_e, gamma=config.planner_gamma,
        strategy=strat, terminal=term, reward_fn=env.reward,
        action_low=env.spec.action_low, action_high=env.spec.action_high,
        terminal_on_final_state=config.planner_terminal_on_final_state)


def make_actor(config: ExperimentConfig, env: Env, policy, value_fn, model):
    """Action-selection callable (state, rng) -> action for offline evaluation."""
    method = config.method
    if method == "mf-s":
        return lambda state, rng: policy.sample(state, rng)
    if method == "mf-d":
        return lambda state, rng: policy.mean_action(state)
    pcfg = build_planner_config(config, env, policy, value_fn)
    snapshot = model.frozen()
    return lambda state, rng: plan(snapshot, state, pcfg, rng)


def evaluate_offline(env: Env, actor, episodes: int, parent_rng: np.random.Generator) -> list[float]:
    """Undiscounted full-episode returns under frozen parameters.

    Each episode gets its own child stream, so results do not depend on how
    episodes would be distributed over workers.
    """
    returns = []
    for ep_rng in parent_rng.spawn(episodes):
        state = env.reset(ep_rng)
        total = 0.0
        for _ in range(env.spec.horizon):
            action = actor(state, ep_rng)
            state, reward = env.step(state, action)
            total += reward
        returns.append(total)
    return returns


class SeedRun:
    """All mutable state of one (config, seed) experiment."""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.env = make_env(config.env)
        self.agent_cfg = agent_config_from(config)
        self.steps = 0
        self.iterations = 0
        self.records: list[EvalRecord] = []
        self.diagnostics: list[dict] = []
        self.train_rng = np.random.default_rng([seed, TRAIN_STREAM])
        spec = self.env.spec
        init_rng = np.random.default_rng([seed, 5])
        self.policy = self.value_fn = None
        self.model = self.dataset = None
        self.value_opt = self.dyn_opt = None
        if config.method in POLICY_METHODS:
            self.policy = GaussianPolicy(spec.state_dim, spec.action_dim,
                                         hidden=config.policy_hidden, rng=init_rng)
            self.value_fn = ValueFunction(spec.state_dim, hidden=config.value_hidden, rng=init_rng)
            self.value_opt = Adam(self.value_fn.net.n_params, lr=config.agent_value_lr)
        if config.method in MODEL_METHODS:
            self.model = DynamicsModel(spec.state_dim, spec.action_dim,
                                       hidden=config.dynamics_hidden, mode=config.dynamics_mode,
                                       action_low=spec.action_low, action_high=spec.action_high,
                                       rng=init_rng)
            self.dataset = TransitionDataset(spec.state_dim, spec.action_dim)
            self.dyn_opt = Adam(self.model.net.n_params, lr=config.dynamics_lr)

    # --- one outer iteration -------------------------------------------------
    def train_iteration(self) -> None:
        config = self.config
        if config.method in POLICY_METHODS:
            trajectories = collect_rollouts(self.env, PolicyBehavior(self.policy),
                                            config.iteration_steps, self.train_rng)
            if not config.disable_mfrl_updates:
                batch = compute_returns_and_advantages(
                    trajectories, self.value_fn, self.agent_cfg.gamma, self.agent_cfg.lam)
                diag = trpo_update(self.policy, batch.states, batch.actions,
                                   batch.advantages, self.agent_cfg)
                fit_value(self.value_fn, batch.states, batch.returns,
                          self.agent_cfg.value_epochs, self.train_rng,
                          batch_size=self.agent_cfg.value_batch_size, optimizer=self.value_opt)
                diag = dict(diag)
            else:
                diag = {"accepted": False, "kl": 0.0, "improvement": 0.0,
                        "step_fraction": 0.0, "grad_norm": 0.0}
        else:
            if self.steps < config.random_fraction * config.total_steps:
                behavior = UniformBehavior(self.env)
            else:
                pcfg = build_planner_config(config, self.env, None, None,
                                            strategy="uniform", terminal="zero", top_e=1)
                behavior = PlannerBehavior(self.model.frozen(), pcfg)
            trajectories = collect_rollouts(self.env, behavior,
                                            config.iteration_steps, self.train_rng)
            diag = None

        self.steps += config.iteration_steps
        self.iterations += 1
        if diag is not None:
            diag.update(iteration=self.iterations, steps=self.steps)
            self.diagnostics.append(diag)
        if self.model is not None:
            for traj in trajectories:
                self.dataset.append(traj)
            if self.steps % config.model_train_period == 0:
                train_model(self.model, self.dataset, config.dynamics_epochs,
                            config.dynamics_batch_size, self.train_rng,
                            optimizer=self.dyn_opt,
                            max_steps=config.dynamics_max_steps_per_fit or None)

    def evaluate(self) -> EvalRecord:
        parent = np.random.default_rng([self.seed, EVAL_STREAM, self.steps])
        actor = make_actor(self.config, self.env, self.policy, self.value_fn, self.model)
        returns = evaluate_offline(self.env, actor, self.config.eval_episodes, parent)
        record = EvalRecord(seed=self.seed, steps=self.steps, returns=returns)
        self.records.append(record)
        return record

    # --- persistence ----------------------------------------------------------
    def seed_dir(self) -> str:
        return os.path.join(self.config.resolved_out_dir(), f"seed_{self.seed}")

    def save_checkpoint(self) -> str:
        ckpt = os.path.join(self.seed_dir(), "checkpoints", f"step_{self.steps:09d}")
        os.makedirs(ckpt, exist_ok=True)
        meta = {"env": self.config.env, "method": self.config.method,
                "label": self.config.label, "seed": self.seed, "steps": self.steps,
                "eval_episodes": self.config.eval_episodes}
        if self.policy is not None:
            self.policy_to_file(os.path.join(ckpt, "policy.json"))
            self.value_to_file(os.path.join(ckpt, "value.json"))
        if self.model is not None:
            with open(os.path.join(ckpt, "model.json"), "w") as f:
                json.dump(self.model.to_dict(), f)
        with open(os.path.join(ckpt, "meta.json"), "w") as f:
            json.dump(meta, f, indent=1)
        return ckpt

    def policy_to_file(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.policy.to_dict(), f)

    def value_to_file(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.value_fn.to_dict(), f)

    def save_state(self) -> None:
        state_dir = os.path.join(self.seed_dir(), "state")
        os.makedirs(state_dir, exist_ok=True)
        if self.policy is not None:
            self.policy_to_file(os.path.join(state_dir, "policy.json"))
            self.value_to_file(os.path.join(state_dir, "value.json"))
            with open(os.path.join(state_dir, "value_opt.json"), "w") as f:
                json.dump(self.value_opt.state_dict(), f)
        if self.model is not None:
            with open(os.path.join(state_dir, "model.json"), "w") as f:
                json.dump(self.model.to_dict(), f)
            with open(os.path.join(state_dir, "dyn_opt.json"), "w") as f:
                json.dump(self.dyn_opt.state_dict(), f)
            self.dataset.save_csv(os.path.join(state_dir, "dataset.csv"))
        write_evals_csv(os.path.join(self.seed_dir(), "evals.csv"), self.records)
        self._write_diagnostics()
        with open(os.path.join(state_dir, "rng.json"), "w") as f:
            json.dump(self.train_rng.bit_generator.state, f)
        # progress.json is written last: it marks the snapshot as complete
        with open(os.path.join(state_dir, "progress.json"), "w") as f:
            json.dump({"steps": self.steps, "iterations": self.iterations}, f)

    def _write_diagnostics(self) -> None:
        path = os.path.join(self.seed_dir(), "diagnostics.csv")
        cols = ["iteration", "steps", "accepted", "kl", "improvement",
                "step_fraction", "grad_norm"]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(cols)
            for d in self.diagnostics:
                writer.writerow([d["iteration"], d["steps"], int(d["accepted"]),
                                 repr(float(d["kl"])), repr(float(d["improvement"])),
                                 repr(float(d["step_fraction"])), repr(float(d["grad_norm"]))])

    def load_state(self) -> bool:
        state_dir = os.path.join(self.seed_dir(), "state")
        progress_path = os.path.join(state_dir, "progress.json")
        if not os.path.exists(progress_path):
            return False
        with open(progress_path) as f:
            progress = json.load(f)
        self.steps = progress["steps"]
        self.iterations = progress["iterations"]
        if self.policy is not None:
            with open(os.path.join(state_dir, "policy.json")) as f:
                self.policy = GaussianPolicy.from_dict(json.load(f))
            with open(os.path.join(state_dir, "value.json")) as f:
                self.value_fn = ValueFunction.from_dict(json.load(f))
            with open(os.path.join(state_dir, "value_opt.json")) as f:
                self.value_opt = Adam.from_state_dict(json.load(f))
        if self.model is not None:
            with open(os.path.join(state_dir, "model.json")) as f:
                self.model = DynamicsModel.from_dict(json.load(f))
            with open(os.path.join(state_dir, "dyn_opt.json")) as f:
                self.dyn_opt = Adam.from_state_dict(json.load(f))
            spec = self.env.spec
            self.dataset = TransitionDataset.load_csv(
                os.path.join(state_dir, "dataset.csv"), spec.state_dim, spec.action_dim)
        evals_path = os.path.join(self.seed_dir(), "evals.csv")
        self.records = read_evals_csv(evals_path) if os.path.exists(evals_path) else []
        self.diagnostics = self._read_diagnostics()
        with open(os.path.join(state_dir, "rng.json")) as f:
            self.train_rng.bit_generator.state = json.load(f)
        return True

    def _read_diagnostics(self) -> list[dict]:
        path = os.path.join(self.seed_dir(), "diagnostics.csv")
        if not os.path.exists(path):
            return []
        out = []
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                out.append({"iteration": int(row["iteration"]), "steps": int(row["steps"]),
                            "accepted": bool(int(row["accepted"])), "kl": float(row["kl"]),
                            "improvement": float(row["improvement"]),
                            "step_fraction": float(row["step_fraction"]),
                            "grad_norm": float(row["grad_norm"])})
        return out


def run_seed(config: ExperimentConfig, seed: int, resume: bool = False,
             stop_after_steps: int | None = None, quiet: bool = False) -> list[EvalRecord]:
    """Train one seed to its budget, evaluating and checkpointing periodically."""
    run = SeedRun(config, seed)
    os.makedirs(run.seed_dir(), exist_ok=True)
    if resume:
        run.load_state()
    target = config.total_steps if stop_after_steps is None else min(
        config.total_steps, stop_after_steps)
    while run.steps < target:
        run.train_iteration()
        if run.steps % config.eval_period == 0:
            record = run.evaluate()
            run.save_checkpoint()
            run.save_state()
            if not quiet:
                print(f"[{config.label} seed {seed}] steps {run.steps}: "
                      f"mean return {record.mean:.2f}", flush=True)
    return run.records


def run_experiment(config: ExperimentConfig, seeds: tuple[int, ...] | None = None,
                   resume: bool = False, stop_after_steps: int | None = None,
                   quiet: bool = False) -> dict:
    """Run every seed, then write the merged eval CSV and the aggregate curve."""
    out_dir = config.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    save_config(config, os.path.join(out_dir, "config.txt"))
    records_by_seed = {}
    for seed in seeds or config.seeds:
        records_by_seed[seed] = run_seed(config, seed, resume=resume,
                                         stop_after_steps=stop_after_steps, quiet=quiet)
    all_records = [r for recs in records_by_seed.values() for r in recs]
    evals_path = os.path.join(out_dir, "evals.csv")
    write_evals_csv(evals_path, all_records)
    curve = best_so_far_curve(records_by_seed, resamples=config.bootstrap_resamples,
                              bootstrap_seed=config.bootstrap_seed)
    curve_path = os.path.join(out_dir, "curve.csv")
    write_curve_csv(curve_path, curve)
    return {"out_dir": out_dir, "evals": evals_path, "curve": curve_path}


# --- post-hoc evaluation of saved checkpoints ---------------------------------

def list_checkpoints(seed_dir: str) -> list[str]:
    root = os.path.join(seed_dir, "checkpoints")
    if not os.path.isdir(root):
        raise StateError(f"no checkpoints under {seed_dir}")
    return [os.path.join(root, name) for name in sorted(os.listdir(root))]


def load_checkpoint(ckpt_dir: str) -> dict:
    out = {}
    with open(os.path.join(ckpt_dir, "meta.json")) as f:
        out["meta"] = json.load(f)
    for name, loader in (("policy", GaussianPolicy.from_dict),
                         ("value", ValueFunction.from_dict),
                         ("model", DynamicsModel.from_dict)):
        path = os.path.join(ckpt_dir, f"{name}.json")
        if os.path.exists(path):
            with open(path) as f:
                out[name] = loader(json.load(f))
        else:
            out[name] = None
    return out


def evaluate_checkpoint(ckpt_dir: str, config: ExperimentConfig,
                        model_override: DynamicsModel | None = None) -> EvalRecord:
    """Offline evaluation of a saved checkpoint under ``config``'s method.

    Uses the same rng derivation as the original run, so re-evaluating a
    checkpoint with its own config reproduces the recorded returns exactly.
    """
    snap = load_checkpoint(ckpt_dir)
    meta = snap["meta"]
    env = make_env(config.env)
    model = model_override if model_override is not None else snap["model"]
    actor = make_actor(config, env, snap["policy"], snap["value"], model)
    parent = np.random.default_rng([meta["seed"], EVAL_STREAM, meta["steps"]])
    returns = evaluate_offline(env, actor, config.eval_episodes, parent)
    return EvalRecord(seed=meta["seed"], steps=meta["steps"], returns=returns)


def evaluate_run_checkpoints(
    train_out_dir: str, variant: ExperimentConfig, variant_out_dir: str,
    seeds: tuple[int, ...], model_source_dir: str | None = None, quiet: bool = False,
) -> dict:
    """Re-evaluate a finished run's checkpoints under a planner variant.

    ``model_source_dir``, when given, takes the dynamics model from another
    run's checkpoints at matching step counts (data-collector comparison).
    """
    os.makedirs(variant_out_dir, exist_ok=True)
    save_config(variant, os.path.join(variant_out_dir, "config.txt"))
    records_by_seed: dict[int, list[EvalRecord]] = {}
    for seed in seeds:
        records = []
        for ckpt in list_checkpoints(os.path.join(train_out_dir, f"seed_{seed}")):
            model_override = None
            if model_source_dir is not None:
                other = os.path.join(model_source_dir, f"seed_{seed}", "checkpoints",
                                     os.path.basename(ckpt))
                model_override = load_checkpoint(other)["model"]
            records.append(evaluate_checkpoint(ckpt, variant, model_override))
        records_by_seed[seed] = records
        if not quiet:
            print(f"[{variant.label} seed {seed}] re-evaluated "
                  f"{len(records)} checkpoints", flush=True)
    all_records = [r for recs in records_by_seed.values() for r in recs]
    evals_path = os.path.join(variant_out_dir, "evals.csv")
    write_evals_csv(evals_path, all_records)
    curve = best_so_far_curve(records_by_seed, resamples=variant.bootstrap_resamples,
                              bootstrap_seed=variant.bootstrap_seed)
    curve_path = os.path.join(variant_out_dir, "curve.csv")
    write_curve_csv(curve_path, curve)
    return {"out_dir": variant_out_dir, "evals": evals_path, "curve": curve_path}


# --- data-collector comparison (held-out model error) --------------------------

def collect_heldout_test_set(
    config: ExperimentConfig, seed: int,
    policy: GaussianPolicy, mpc_model: DynamicsModel, episodes: int = 10,
) -> TransitionDataset:
    """Fixed test set: half policy rollouts, half uniform-random + MPC rollouts.

    Collected with a dedicated stream after training, for measurement only;
    these interactions are not part of any training budget. Within the
    random+MPC half the uniform/planned episode split mirrors the training
    split (``random_fraction``).
    """
    env = make_env(config.env)
    rng = np.random.default_rng([seed, TESTSET_STREAM])
    test = TransitionDataset(env.spec.state_dim, env.spec.action_dim)
    half = max(1, episodes // 2)
    for traj in collect_rollouts(env, PolicyBehavior(policy), half * env.spec.horizon, rng):
        test.append(traj)
    n_uniform = max(1, int(round(config.random_fraction * half)))
    for traj in collect_rollouts(env, UniformBehavior(env),
                                 n_uniform * env.spec.horizon, rng):
        test.append(traj)
    pcfg = build_planner_config(config, env, None, None,
                                strategy="uniform", terminal="zero", top_e=1)
    behavior = PlannerBehavior(mpc_model, pcfg)
    for traj in collect_rollouts(env, behavior,
                                 (half - n_uniform) * env.spec.horizon, rng):
        test.append(traj)
    return test


def heldout_error_report(
    policy_run_dir: str, random_run_dir: str, config: ExperimentConfig,
    seeds: tuple[int, ...], out_csv: str, episodes: int = 10,
) -> list[dict]:
    """Held-out dynamics error of both collectors' models at every checkpoint."""
    rows = []
    for seed in seeds:
        policy_ckpts = list_checkpoints(os.path.join(policy_run_dir, f"seed_{seed}"))
        random_ckpts = list_checkpoints(os.path.join(random_run_dir, f"seed_{seed}"))
        final_policy = load_checkpoint(policy_ckpts[-1])["policy"]
        final_random_model = load_checkpoint(random_ckpts[-1])["model"]
        test = collect_heldout_test_set(config, seed, final_policy, final_random_model,
                                        episodes=episodes)
        for collector, ckpts in (("policy", policy_ckpts), ("random+mpc", random_ckpts)):
            for ckpt in ckpts:
                snap = load_checkpoint(ckpt)
                rows.append({"collector": collector, "seed": seed,
                             "steps": snap["meta"]["steps"],
                             "error": held_out_error(snap["model"], test)})
    with open(out_csv, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["collector", "seed", "steps", "error"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "error": repr(float(row["error"]))})
    return rows


# --- ablation matrix -----------------------------------------------------------

ABLATION_AXES = ("collector", "sampling", "terminal-horizon", "soft-greedy", "model-width")


def ablation_matrix(config: ExperimentConfig, axis: str) -> list[ExperimentConfig]:
    """Expand a base configuration into the variant set for one ablation axis."""
    base_out = config.out_dir
    if axis == "collector":
        return [
            config.with_overrides(method="mpc-mfrl", label="policy",
                                  out_dir=os.path.join(base_out, "policy")),
            config.with_overrides(method="mpc-random", label="random+mpc",
                                  planner_strategy="uniform", planner_terminal="zero",
                                  planner_top_e=1,
                                  out_dir=os.path.join(base_out, "random+mpc")),
        ]
    if axis == "sampling":
        return [
            config.with_overrides(method="mpc-mfrl", label="Z=pi", planner_strategy="policy",
                                  out_dir=os.path.join(base_out, "Z=pi")),
            config.with_overrides(method="mpc-mfrl", label="Z=U", planner_strategy="uniform",
                                  out_dir=os.path.join(base_out, "Z=U")),
        ]
    if axis == "terminal-horizon":
        variants = []
        for terminal, tag in (("value", "V"), ("zero", "0")):
            for horizon in (2, 5, 20):
                label = f"Rphi={tag},H={horizon}"
                variants.append(config.with_overrides(
                    method="mpc-mfrl", label=label, planner_terminal=terminal,
                    planner_horizon=horizon, out_dir=os.path.join(base_out, label)))
        return variants
    if axis == "soft-greedy":
        top_e = config.planner_top_e if config.planner_top_e > 1 else 10
        return [
            config.with_overrides(method="mpc-mfrl", label="w-SG", planner_top_e=top_e,
                                  out_dir=os.path.join(base_out, "w-SG")),
            config.with_overrides(method="mpc-mfrl", label="wo-SG", planner_top_e=1,
                                  out_dir=os.path.join(base_out, "wo-SG")),
        ]
    if axis == "model-width":
        return [config.with_overrides(method="mpc-mfrl", label=f"width-{w}",
                                      dynamics_hidden=(w, w),
                                      out_dir=os.path.join(base_out, f"width-{w}"))
                for w in (16, 64, 256)]
    raise ConfigError(f"unknown ablation axis {axis!r}; choose from {ABLATION_AXES}")


def run_ablation(config: ExperimentConfig, axis: str, resume: bool = False,
                 quiet: bool = False) -> dict:
    """Run one ablation axis end to end.

    Axes that only change evaluation-time planning (sampling, terminal
    mode/horizon, soft-greedy) share a single training run per seed and
    re-evaluate its checkpoints per variant. The collector axis trains both
    data-collection schemes and additionally reports held-out model error on
    a shared test set plus the mixed evaluation (policy/value from the policy
    run, dynamics model from the random+MPC run).
    """
    variants = ablation_matrix(config, axis)
    out_root = config.resolved_out_dir()
    os.makedirs(out_root, exist_ok=True)
    results = {"axis": axis, "variants": {}}

    if axis in ("sampling", "terminal-horizon", "soft-greedy"):
        train_cfg = config.with_overrides(method="mpc-mfrl", label="shared-train",
                                          out_dir=os.path.join(config.out_dir, "shared-train"))
        run_experiment(train_cfg, resume=resume, quiet=quiet)
        for variant in variants:
            results["variants"][variant.label] = evaluate_run_checkpoints(
                train_cfg.resolved_out_dir(), variant, variant.resolved_out_dir(),
                config.seeds, quiet=quiet)
        return results

    if axis == "collector":
        policy_cfg, random_cfg = variants
        results["variants"]["policy"] = run_experiment(policy_cfg, resume=resume, quiet=quiet)
        results["variants"]["random+mpc"] = run_experiment(random_cfg, resume=resume, quiet=quiet)
        heldout_csv = os.path.join(out_root, "heldout_error.csv")
        heldout_error_report(policy_cfg.resolved_out_dir(), random_cfg.resolved_out_dir(),
                             policy_cfg, config.seeds, heldout_csv)
        results["heldout"] = heldout_csv
        mixed = policy_cfg.with_overrides(
            label="mpc-mfrl-random-model",
            out_dir=os.path.join(config.out_dir, "mpc-mfrl-random-model"))
        results["variants"][mixed.label] = evaluate_run_checkpoints(
            policy_cfg.resolved_out_dir(), mixed, mixed.resolved_out_dir(), config.seeds,
            model_source_dir=random_cfg.resolved_out_dir(), quiet=quiet)
        return results

    for variant in variants:  # model-width: training differs per variant
        results["variants"][variant.label] = run_experiment(variant, resume=resume, quiet=quiet)
    return results
