"""Sampling-based MPC with a jointly trained policy, value function, and
learned forward dynamics model, plus the model-free and model-based baselines
and an experiment harness for offline evaluation."""

from .agent import (AgentConfig, GaussianPolicy, ValueFunction,
                    compute_returns_and_advantages, fit_value, trpo_update)
from .config import ExperimentConfig, load_config
from .dynamics import (DynamicsModel, TransitionDataset, TrueDynamicsModel,
                       dynamics_loss, held_out_error, sample_batch, train_model)
from .envs import Env, EnvSpec, Trajectory, lqr_optimal_action, make_env, riccati_gain
from .harness import run_ablation, run_experiment
from .neuralnet import Adam, Mlp
from .planner import (CemStrategy, PlannerConfig, PolicyStrategy, UniformStrategy,
                      ValueTerminal, ZeroTerminal, cem_refine, evaluate_trajectories,
                      plan, sample_trajectories, select_action_greedy,
                      select_action_soft_greedy)

__version__ = "0.1.0"
