"""Polynomial graph filters and their frequency responses."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import GraphShiftOperator, format_float


def as_taps(h) -> np.ndarray:
    taps = np.asarray(h, dtype=np.float64).ravel()
    if taps.size == 0:
        raise ValueError("filter needs at least one tap")
    if not np.all(np.isfinite(taps)):
        raise ValueError("filter taps must be finite")
    return taps


def frequency_response(h, lam):
    """Evaluate ``H(lam) = sum_k h[k] lam^k`` by Horner's rule.

    ``lam`` may be a scalar or an array; the result has its shape.
    """
    taps = as_taps(h)
    x = np.asarray(lam, dtype=np.float64)
    out = np.full(x.shape, taps[-1])
    for hk in taps[-2::-1]:
        out = out * x + hk
    return float(out) if out.ndim == 0 else out


def bank_response(coefficients, lam) -> np.ndarray:
    """Responses of every filter in a bank of shape (..., K) at each ``lam``.

    Returns an array of shape ``coefficients.shape[:-1] + lam.shape``.
    """
    c = np.asarray(coefficients, dtype=np.float64)
    x = np.asarray(lam, dtype=np.float64)
    lead = c.shape[:-1]
    xb = x.reshape((1,) * len(lead) + x.shape)
    out = np.broadcast_to(c[..., -1].reshape(lead + (1,) * x.ndim), lead + x.shape).copy()
    for k in range(c.shape[-1] - 2, -1, -1):
        out = out * xb + c[..., k].reshape(lead + (1,) * x.ndim)
    return out


@dataclass(frozen=True, eq=False)
class VandermondeMatrix:
    lambdas: np.ndarray
    matrix: np.ndarray

    @property
    def taps(self) -> int:
        return self.matrix.shape[1]


def build_vandermonde(lambdas, taps: int) -> VandermondeMatrix:
    """Rows ``(1, lam_i, ..., lam_i^(K-1))`` for each sample point.

    Raises:
        ValueError: when there are fewer points than taps. Sample more
            eigenvalues (e.g. from a Gershgorin interval) or use fewer taps.
    """
    lam = np.asarray(lambdas, dtype=np.float64).ravel()
    if taps < 1:
        raise ValueError(f"taps must be >= 1, got {taps}")
    if lam.size < taps:
        raise ValueError(
            f"Vandermonde needs at least K={taps} points, got {lam.size}; "
            "add sampled eigenvalues or reduce the filter length"
        )
    return VandermondeMatrix(lam, np.vander(lam, taps, increasing=True))


def lipschitz_constant(h, s) -> float:
    """Exact 2-norm Lipschitz constant of a filter: ``max |H(lam)|`` over the spectrum."""
    op = s if isinstance(s, GraphShiftOperator) else GraphShiftOperator(s)
    return float(np.max(np.abs(frequency_response(h, op.eigenvalues))))


def filter_banks(model):
    """Filter tensors of a model (anything with ``.layers``) or a list of them."""
    layers = getattr(model, "layers", model)
    return [np.asarray(t, dtype=np.float64) for t in layers]


def max_abs_response(model, lam):
    """Largest ``|H(lam)|`` over every filter of every layer of ``model``."""
    banks = filter_banks(model)
    if not banks:
        raise ValueError("model has no layers")
    x = np.asarray(lam, dtype=np.float64)
    best = np.zeros(x.shape)
    for coeffs in banks:
        resp = np.abs(bank_response(coeffs.reshape(-1, coeffs.shape[-1]), x))
        best = np.maximum(best, resp.max(axis=0))
    return float(best) if best.ndim == 0 else best


def integral_lipschitz_transform(h) -> np.ndarray:
    """Taps of ``lam * dH/dlam``: tap k (0-based) is scaled by k."""
    taps = as_taps(h)
    return taps * np.arange(taps.size)


def integral_lipschitz_constant(h, lambdas) -> float:
    """``max |lam H'(lam)|`` over the given points."""
    return float(np.max(np.abs(frequency_response(integral_lipschitz_transform(h), lambdas))))


def write_response_profile(path, lambdas, h_star) -> None:
    """CSV with columns ``lambda,H_star``."""
    lines = ["lambda,H_star"]
    lines += [f"{format_float(a)},{format_float(b)}" for a, b in zip(lambdas, h_star)]
    Path(path).write_text("\n".join(lines) + "\n")
