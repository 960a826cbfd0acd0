"""Best-so-far learning curves with bootstrap confidence intervals."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import StateError


@dataclass
class EvalRecord:
    """One offline evaluation: frozen parameters, several full episodes."""

    seed: int
    steps: int
    returns: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))


@dataclass
class CurvePoint:
    steps: int
    per_seed_best: list[float]   # running-max mean return, one entry per seed
    mean: float
    ci_low: float
    ci_high: float


def bootstrap_ci(values: np.ndarray, resamples: int, rng: np.random.Generator,
                 low: float = 2.5, high: float = 97.5) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    idx = rng.integers(0, len(values), size=(resamples, len(values)))
    means = values[idx].mean(axis=1)
    return float(np.percentile(means, low)), float(np.percentile(means, high))


def best_so_far_curve(
    records_by_seed: dict[int, list[EvalRecord]],
    resamples: int = 1000,
    bootstrap_seed: int = 0,
) -> list[CurvePoint]:
    """Per-seed running maxima of checkpoint means, aggregated across seeds.

    All seeds must share the same checkpoint grid. The bootstrap rng is seeded
    once, so the curve is reproducible for a fixed input.
    """
    if not records_by_seed:
        raise StateError("no evaluation records")
    seeds = sorted(records_by_seed)
    grids = [tuple(r.steps for r in records_by_seed[s]) for s in seeds]
    if len(set(grids)) != 1:
        raise StateError("seeds have mismatched checkpoint grids")
    best = {s: np.maximum.accumulate([r.mean for r in records_by_seed[s]]) for s in seeds}
    rng = np.random.default_rng(bootstrap_seed)
    curve = []
    for i, steps in enumerate(grids[0]):
        values = np.array([best[s][i] for s in seeds])
        ci_low, ci_high = bootstrap_ci(values, resamples, rng)
        curve.append(CurvePoint(steps=int(steps), per_seed_best=values.tolist(),
                                mean=float(values.mean()), ci_low=ci_low, ci_high=ci_high))
    return curve


def write_evals_csv(path: str, records: list[EvalRecord]) -> None:
    """Columns: steps, seed, one column per episode return, mean."""
    if not records:
        raise StateError("no evaluation records to write")
    n_episodes = len(records[0].returns)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["steps", "seed"] + [f"return_{i}" for i in range(n_episodes)] + ["mean"])
        for rec in sorted(records, key=lambda r: (r.steps, r.seed)):
            writer.writerow([rec.steps, rec.seed] + [repr(float(v)) for v in rec.returns] + [repr(float(rec.mean))])


def read_evals_csv(path: str) -> list[EvalRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        n_episodes = len(header) - 3
        for row in reader:
            records.append(EvalRecord(seed=int(row[1]), steps=int(row[0]),
                                      returns=[float(v) for v in row[2 : 2 + n_episodes]]))
    return records


def write_curve_csv(path: str, curve: list[CurvePoint]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["steps", "mean", "ci_low", "ci_high"])
        for pt in curve:
            writer.writerow([pt.steps, repr(float(pt.mean)), repr(float(pt.ci_low)), repr(float(pt.ci_high))])


def read_curve_csv(path: str) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [{"steps": int(r["steps"]), "mean": float(r["mean"]),
                 "ci_low": float(r["ci_low"]), "ci_high": float(r["ci_high"])} for r in reader]
