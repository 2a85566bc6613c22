"""Accuracy-versus-perturbation sweeps and frequency-response profiles."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import violation_fraction
from .filters import max_abs_response
from .gnn import GnnModel, forward, model_checksum
from .graphs import format_float
from .training import awgn_perturb, pgd_attack

PERTURBATIONS = ("awgn", "pgd")
METRICS = ("accuracy", "mse")


@dataclass
class SweepConfig:
    perturbation: str = "awgn"
    magnitudes: tuple = (0.0,)
    trials: int = 1
    seed: int = 0
    pgd_steps: int = 20
    pgd_step_size: float | None = None
    metric: str = "accuracy"
    loss: str = "cross_entropy_with_logits"

    def __post_init__(self):
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"perturbation must be one of {PERTURBATIONS}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.size == 0 or np.any(mags < 0) or np.any(np.diff(mags) <= 0):
            raise ValueError("magnitudes must be nonnegative and strictly ascending")
        self.magnitudes = tuple(float(m) for m in mags)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def step_for(self, eps: float) -> float:
        if self.pgd_step_size is not None:
            return self.pgd_step_size
        return 2.5 * eps / self.pgd_steps


@dataclass
class SweepRow:
    method: str
    perturbation: str
    magnitude: float
    trial_count: int
    metric_mean: float
    metric_stderr: float
    evaluations: int


@dataclass
class RobustnessReport:
    rows: list
    clean: dict
    metric: str
    metadata: dict = field(default_factory=dict)

    def curve(self, method: str, perturbation: str | None = None):
        rows = [r for r in self.rows if r.method == method
                and (perturbation is None or r.perturbation == perturbation)]
        return (np.array([r.magnitude for r in rows]), np.array([r.metric_mean for r in rows]))

    def value(self, method: str, perturbation: str, magnitude: float) -> float:
        for r in self.rows:
            if r.method == method and r.perturbation == perturbation and r.magnitude == magnitude:
                return r.metric_mean
        raise KeyError((method, perturbation, magnitude))

    def extend(self, other: "RobustnessReport") -> None:
        self.rows.extend(other.rows)
        self.clean.update(other.clean)
        self.metadata.update(other.metadata)

    def to_csv(self, path) -> None:
        lines = ["method,perturbation,magnitude,trial_count,metric_mean,metric_stderr"]
        for r in self.rows:
            lines.append(f"{r.method},{r.perturbation},{format_float(r.magnitude)},{r.trial_count},"
                         f"{format_float(r.metric_mean)},{format_float(r.metric_stderr)}")
        Path(path).write_text("\n".join(lines) + "\n")


def evaluate(model: GnnModel, s, x, y, metric: str = "accuracy") -> float:
    out = forward(model, s, x)
    if metric == "accuracy":
        hits = (np.argmax(out, axis=-1) == np.asarray(y)).astype(np.float64).ravel()
        return math.fsum(hits) / hits.size
    diff = (out - np.asarray(y, dtype=np.float64)).ravel()
    return math.fsum(diff * diff) / diff.size


def _mean_stderr(values) -> tuple[float, float]:
    vals = [float(v) for v in values]
    # Shifted by the first value so identical trials average to that value exactly.
    mean = vals[0] + math.fsum(v - vals[0] for v in vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def run_sweep(models: dict, data, cfg: SweepConfig, workers: int = 1) -> RobustnessReport:
    """Evaluate every model at every perturbation magnitude.

    AWGN trials draw noise from streams keyed by ``(seed, magnitude index,
    trial)``, shared by all models. PGD is deterministic per model, so it runs
    a single trial.
    """
    s, x, y = data
    s = np.asarray(s, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    count = x.shape[0]
    clean = {name: evaluate(m, s, x, y, cfg.metric) for name, m in models.items()}

    def one(task):
        name, j, trial = task
        model, mag = models[name], cfg.magnitudes[j]
        if mag == 0:
            return clean[name]
        if cfg.perturbation == "awgn":
            xp = awgn_perturb(x, mag, [cfg.seed, j, trial])
        else:
            xp = pgd_attack(model, s, x, y, mag, cfg.pgd_steps, cfg.step_for(mag), cfg.loss)
        return evaluate(model, s, xp, y, cfg.metric)

    trials = cfg.trials if cfg.perturbation == "awgn" else 1
    tasks = [(name, j, t) for name in models for j in range(len(cfg.magnitudes)) for t in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, tasks))
    else:
        values = [one(t) for t in tasks]
    rows, pos = [], 0
    for name in models:
        for mag in cfg.magnitudes:
            mean, se = _mean_stderr(values[pos:pos + trials])
            pos += trials
            rows.append(SweepRow(name, cfg.perturbation, mag, trials, mean, se, trials * count))
    meta = {"checksums": {name: model_checksum(m) for name, m in models.items()},
            "sweep": {"perturbation": cfg.perturbation, "magnitudes": list(cfg.magnitudes),
                      "trials": trials, "seed": cfg.seed, "pgd_steps": cfg.pgd_steps}}
    return RobustnessReport(rows, clean, cfg.metric, meta)


@dataclass
class ResponseProfile:
    lambdas: np.ndarray
    h_star: dict
    bounds: dict
    violation: dict

    def to_csv(self, path) -> None:
        lines = ["model,lambda,h_star"]
        for name, vals in self.h_star.items():
            lines += [f"{name},{format_float(a)},{format_float(b)}" for a, b in zip(self.lambdas, vals)]
        Path(path).write_text("\n".join(lines) + "\n")


def profile_frequency_response(models: dict, interval, grid_points: int,
                               bounds: dict | None = None) -> ResponseProfile:
    """``H*(lambda)`` of each model on a uniform grid over ``interval``.

    For models listed in ``bounds`` (name -> c) the fraction of grid points
    with ``H* > c`` is also reported.
    """
    a, b = interval
    if not a < b:
        raise ValueError(f"interval needs a < b, got [{a}, {b}]")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    grid = np.linspace(a, b, int(grid_points))
    h_star = {name: max_abs_response(m, grid) for name, m in models.items()}
    bounds = dict(bounds or {})
    viol = {name: violation_fraction(models[name], grid, c) for name, c in bounds.items()}
    return ResponseProfile(grid, h_star, bounds, viol)
