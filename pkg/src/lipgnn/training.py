"""Projected SGD over filter tensors, plus the noise and adversarial baselines.

``method="lipschitz"`` runs the projected loop: after every minibatch step
each filter of every layer is projected back onto the constraint box.
``awgn_augment`` adds fresh Gaussian noise to each batch, and
``pgd_adversarial`` trains on l-infinity PGD examples of each batch.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import ConstraintSpec, check_feasibility, project_bank
from .gnn import GnnModel, backward_from_output, forward, loss_and_grad, per_sample_loss

METHODS = ("unconstrained", "lipschitz", "awgn_augment", "pgd_adversarial")
SCHEDULES = ("constant", "inv_sqrt")


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, trace: "TrainTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class TrainConfig:
    method: str = "unconstrained"
    step_size: float = 0.1
    schedule: str = "constant"
    batch_size: int = 32
    epochs: int = 10
    constraint: ConstraintSpec | None = None
    layer_bounds: list | None = None
    readout_bound: float | None = None
    noise_sigma: float = 0.0
    pgd_epsilon: float = 0.0
    pgd_steps: int = 10
    pgd_step_size: float | None = None
    loss: str = "cross_entropy_with_logits"
    seed: int = 0
    check_every_epoch: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.method == "lipschitz" and self.constraint is None:
            raise ValueError("lipschitz training needs a constraint spec")
        if self.noise_sigma < 0 or self.pgd_epsilon < 0:
            raise ValueError("noise_sigma and pgd_epsilon must be nonnegative")
        if self.readout_bound is not None and not self.readout_bound > 0:
            raise ValueError("readout_bound must be positive")

    @property
    def attack_step(self) -> float:
        if self.pgd_step_size is not None:
            return self.pgd_step_size
        return 2.5 * self.pgd_epsilon / max(self.pgd_steps, 1)

    def eta(self, t: int) -> float:
        if self.schedule == "inv_sqrt":
            return self.step_size / math.sqrt(t)
        return self.step_size


@dataclass
class TrainTrace:
    epoch: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    violation: list = field(default_factory=list)
    response_violation: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def append(self, epoch, loss, violation, response_violation, seconds):
        self.epoch.append(int(epoch))
        self.loss.append(float(loss))
        self.violation.append(violation)
        self.response_violation.append(response_violation)
        self.seconds.append(float(seconds))

    def as_dict(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss, "violation": self.violation,
                "response_violation": self.response_violation, "seconds": self.seconds}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainTrace":
        return cls(list(d["epoch"]), list(d["loss"]), list(d["violation"]),
                   list(d["response_violation"]), list(d["seconds"]))

    def to_csv(self, path, seconds: bool = True) -> None:
        """Columns epoch, loss, violation, [seconds], response_violation.

        Violations print as ``n/a`` for unprojected methods.
        """
        def fmt(v):
            return "n/a" if v is None else repr(float(v))
        head = ["epoch", "loss", "violation"] + (["seconds"] if seconds else []) + ["response_violation"]
        lines = [",".join(head)]
        for i in range(len(self.epoch)):
            row = [str(self.epoch[i]), fmt(self.loss[i]), fmt(self.violation[i])]
            if seconds:
                row.append(f"{self.seconds[i]:.6f}")
            row.append(fmt(self.response_violation[i]))
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")


def awgn_perturb(x, sigma: float, seed) -> np.ndarray:
    """``X + sigma * N(0, I)`` from a PCG64 stream seeded with ``seed``."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    arr = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return arr.copy()
    return arr + sigma * np.random.default_rng(seed).standard_normal(arr.shape)


def pgd_attack(model: GnnModel, s, x, y, epsilon: float, steps: int, step_size: float,
               loss_kind: str = "cross_entropy_with_logits") -> np.ndarray:
    """l-infinity PGD: signed input-gradient ascent, clipped to the eps-ball.

    Every sample keeps the highest-loss iterate seen, the clean input
    included, so the attack never lowers the loss.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    x0 = np.asarray(x, dtype=np.float64)
    if epsilon == 0 or steps < 1:
        return x0.copy()
    squeeze = x0.ndim == 2
    base = x0[None] if squeeze else x0
    yb = np.asarray(y)[None] if squeeze else np.asarray(y)
    lo, hi = base - epsilon, base + epsilon
    cur = base.copy()
    best = base.copy()
    best_loss = np.full(base.shape[0], -np.inf)
    for i in range(steps + 1):
        out, cache = forward(model, s, cur, return_cache=True)
        per = per_sample_loss(out, yb, loss_kind)
        better = per > best_loss
        best[better] = cur[better]
        best_loss = np.where(better, per, best_loss)
        if i == steps:
            break
        _, dout = loss_and_grad(out, yb, loss_kind)
        dx = backward_from_output(model, s, cache, dout)[3]
        cur = np.clip(cur + step_size * np.sign(dx), lo, hi)
    return best[0] if squeeze else best


def project_model(model: GnnModel, cfg: TrainConfig) -> None:
    """Project filters (and the readout, if bounded) in place."""
    if cfg.constraint is not None and cfg.method == "lipschitz":
        bounds = cfg.layer_bounds or [cfg.constraint.bound_c] * len(model.layers)
        if len(bounds) != len(model.layers):
            raise ValueError(f"need {len(model.layers)} layer bounds, got {len(bounds)}")
        for q, c in enumerate(bounds):
            model.layers[q] = project_bank(model.layers[q], cfg.constraint, c)
    if cfg.readout_bound is not None and cfg.method == "lipschitz":
        u, sv, vt = np.linalg.svd(model.readout_weight, full_matrices=False)
        if sv[0] > cfg.readout_bound:
            model.readout_weight = (u * np.minimum(sv, cfg.readout_bound)) @ vt


def _feasibility(model, cfg):
    if cfg.method != "lipschitz":
        return None, None
    rep = check_feasibility(model, cfg.constraint, bounds=cfg.layer_bounds)
    return rep.box_violation, rep.max_violation


def _slice_shift(s, idx):
    return s[idx] if s.ndim == 3 else s


def train(model: GnnModel, data, cfg: TrainConfig, start_epoch: int = 0,
          trace: TrainTrace | None = None, log=None):
    """Run minibatch SGD from ``start_epoch`` up to ``cfg.epochs``.

    Args:
        model: initial model; it is copied, not modified.
        data: ``(S, X, y)``; S is (n, n) or one (n, n) graph per sample.
        cfg: training configuration.
        start_epoch: epochs already completed (resuming from a checkpoint).
        trace: trace of the completed epochs, extended in place.
        log: optional callable receiving one progress string per epoch.

    Sample order and noise of epoch e depend only on ``(cfg.seed, e)``, so
    resuming reproduces an uninterrupted run exactly.

    Returns:
        (trained model, trace).
    """
    s, x, y = data
    s = np.asarray(s, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    count = x.shape[0]
    if count == 0:
        raise ValueError("empty training set")
    model = model.copy()
    trace = trace if trace is not None else TrainTrace()
    if start_epoch == 0:
        project_model(model, cfg)
    nbatch = math.ceil(count / cfg.batch_size)
    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(count)
        losses = []
        for j in range(nbatch):
            idx = np.sort(order[j * cfg.batch_size:(j + 1) * cfg.batch_size])
            sb, xb, yb = _slice_shift(s, idx), x[idx], y[idx]
            if cfg.method == "awgn_augment" and cfg.noise_sigma > 0:
                xb = xb + cfg.noise_sigma * rng.standard_normal(xb.shape)
            elif cfg.method == "pgd_adversarial" and cfg.pgd_epsilon > 0:
                xb = pgd_attack(model, sb, xb, yb, cfg.pgd_epsilon, cfg.pgd_steps,
                                cfg.attack_step, cfg.loss)
            out, cache = forward(model, sb, xb, return_cache=True)
            value, dout = loss_and_grad(out, yb, cfg.loss)
            if not math.isfinite(value):
                raise TrainingDiverged(f"loss became {value} at epoch {epoch}, batch {j}", trace)
            grads, g_w, g_b, _ = backward_from_output(model, sb, cache, dout)
            eta = cfg.eta(epoch * nbatch + j + 1)
            for q, g in enumerate(grads):
                model.layers[q] = model.layers[q] - eta * g
            model.readout_weight = model.readout_weight - eta * g_w
            model.readout_bias = model.readout_bias - eta * g_b
            project_model(model, cfg)
            losses.append(value)
        if not all(np.all(np.isfinite(p)) for p in model.parameters()):
            raise TrainingDiverged(f"parameters became non-finite at epoch {epoch}", trace)
        box_v, resp_v = _feasibility(model, cfg) if cfg.check_every_epoch else (None, None)
        epoch_loss = math.fsum(losses) / len(losses)
        trace.append(epoch + 1, epoch_loss, box_v, resp_v, time.perf_counter() - t0)
        if log is not None:
            viol = "n/a" if box_v is None else f"{box_v:.3e}"
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {epoch_loss:.6f} violation {viol}")
    return model, trace


def accuracy(model: GnnModel, s, x, y) -> float:
    pred = np.argmax(forward(model, s, x), axis=-1)
    return float(np.mean(pred == np.asarray(y)))
