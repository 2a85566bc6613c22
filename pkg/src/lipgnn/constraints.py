"""Frequency-response constraint sets and the rotated-box projection.

A constraint set is a finite list of frequencies ``lambdas`` with a bound
``c``. It is compiled into the thin SVD ``U diag(s) V^T`` of the Vandermonde
matrix on ``lambdas``; the training-time feasible set is the box
``|s_i (V^T h)_i| <= c`` in the rotated coordinates ``V^T h``.

That box and the true constraint ``max_i |H(lambda_i)| <= c`` coincide only
when ``U`` preserves the infinity norm, so :func:`check_feasibility` reports
both.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .filters import bank_response, build_vandermonde, filter_banks
from .graphs import DynamicGraphSequence, GraphShiftOperator
from .linalg import ThinSVD, thin_svd

DEDUP_TOL = 1e-9
SIGMA_FLOOR_REL = 1e-10


def scenario_sample_size(epsilon: float, delta: float, taps: int) -> int:
    """Scenarios needed so a K-tap constraint generalizes at level (epsilon, delta).

    ``ceil((4 / eps) * (K ln(12 / eps) + ln(2 / delta)))``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if int(taps) != taps or taps < 1:
        raise ValueError(f"K must be a positive integer, got {taps}")
    value = (4.0 / epsilon) * (taps * math.log(12.0 / epsilon) + math.log(2.0 / delta))
    return int(math.ceil(value))


def dedup_sorted(values, tol: float = DEDUP_TOL) -> np.ndarray:
    """Sort and drop values within ``tol`` of the previously kept one."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        return v
    keep = [v[0]]
    for x in v[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.asarray(keep)


@dataclass(frozen=True)
class ScenarioPlan:
    interval_a: float
    interval_b: float
    epsilon: float
    delta: float
    taps: int
    m_required: int
    m_used: int
    seed: int
    undersampled_override: bool = False

    @classmethod
    def create(
        cls,
        a: float,
        b: float,
        epsilon: float,
        delta: float,
        taps: int,
        seed: int,
        m: int | None = None,
        allow_undersampled: bool = False,
    ) -> "ScenarioPlan":
        """Plan ``m`` uniform draws on ``[a, b]``; ``m`` defaults to the required count."""
        if not a < b:
            raise ValueError(f"scenario interval needs a < b, got [{a}, {b}]")
        required = scenario_sample_size(epsilon, delta, taps)
        used = required if m is None else int(m)
        return cls(float(a), float(b), float(epsilon), float(delta), int(taps),
                   required, used, int(seed), bool(allow_undersampled))

    def sample(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.interval_a, self.interval_b, self.m_used)


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Compiled constraint set over ``lambdas`` with bound ``bound_c``."""

    lambdas: np.ndarray
    bound_c: float
    svd: ThinSVD
    sigma_floor: float
    kind: str = "static"
    plan: ScenarioPlan | None = None
    interval: tuple | None = field(default=None)

    @property
    def taps(self) -> int:
        return self.svd.right_vectors.shape[0]

    @property
    def box_halfwidths(self) -> np.ndarray:
        """Per-coordinate bounds ``c / s_i``; ``inf`` where ``s_i`` is at the floor."""
        return halfwidths(self, self.bound_c)

    @property
    def free_directions(self) -> int:
        return int(np.sum(self.svd.singular_values <= self.sigma_floor))

    def with_bound(self, c: float) -> "ConstraintSpec":
        if not c > 0:
            raise ValueError(f"bound c must be positive, got {c}")
        return ConstraintSpec(self.lambdas, float(c), self.svd, self.sigma_floor,
                              self.kind, self.plan, self.interval)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "taps": self.taps,
            "bound_c": self.bound_c,
            "sigma_floor_rel": SIGMA_FLOOR_REL,
            "interval": list(self.interval) if self.interval else None,
            "plan": asdict(self.plan) if self.plan else None,
            "lambdas": [float(x) for x in self.lambdas],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSpec":
        plan = ScenarioPlan(**d["plan"]) if d.get("plan") else None
        interval = tuple(d["interval"]) if d.get("interval") else None
        return compile_spec(d["lambdas"], d["taps"], d["bound_c"], kind=d["kind"],
                            plan=plan, interval=interval)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ConstraintSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def compile_spec(lambdas, taps: int, c: float, kind: str = "static",
                 plan: ScenarioPlan | None = None, interval=None) -> ConstraintSpec:
    """Deduplicate ``lambdas`` and factor their Vandermonde matrix."""
    if not c > 0:
        raise ValueError(f"bound c must be positive, got {c}")
    lam = dedup_sorted(lambdas)
    vde = build_vandermonde(lam, taps)
    svd = thin_svd(vde.matrix)
    floor = SIGMA_FLOOR_REL * float(svd.singular_values[0]) if svd.singular_values.size else 0.0
    return ConstraintSpec(lam, float(c), svd, floor, kind, plan,
                          tuple(float(v) for v in interval) if interval is not None else None)


def build_static_spec(s: GraphShiftOperator, taps: int, c: float) -> ConstraintSpec:
    """Constraint set over the (deduplicated) spectrum of ``s``."""
    op = s if isinstance(s, GraphShiftOperator) else GraphShiftOperator(s)
    lam = dedup_sorted(op.eigenvalues)
    if lam.size < taps:
        n = op.n
        raise ValueError(
            f"operator has {lam.size} distinct eigenvalues but K={taps} taps; "
            f"sample extra frequencies from the Gershgorin interval [{-n + 1}, {n}] "
            "(build_scenario_spec) or reduce K"
        )
    return compile_spec(lam, taps, c, kind="static",
                        interval=(float(lam[0]), float(lam[-1])))


def build_scenario_spec(plan: ScenarioPlan, taps: int, c: float) -> ConstraintSpec:
    """Constraint set over ``plan.m_used`` uniform draws from the plan's interval."""
    if plan.m_used < plan.m_required and not plan.undersampled_override:
        raise ValueError(
            f"scenario plan uses m={plan.m_used} draws but the VC sample-complexity "
            f"bound requires m >= {plan.m_required} for epsilon={plan.epsilon}, "
            f"delta={plan.delta}, K={plan.taps}; pass allow_undersampled to override"
        )
    if taps != plan.taps:
        raise ValueError(f"plan was sized for K={plan.taps}, got K={taps}")
    if plan.m_used < taps:
        raise ValueError(f"need at least K={taps} scenarios, plan has {plan.m_used}")
    return compile_spec(plan.sample(), taps, c, kind="scenario", plan=plan,
                        interval=(plan.interval_a, plan.interval_b))


class Interval(NamedTuple):
    low: float
    high: float

    @property
    def degenerate(self) -> bool:
        return not self.low < self.high


def harvest_interval(seq: DynamicGraphSequence | Sequence[GraphShiftOperator]) -> Interval:
    """Smallest interval holding every eigenvalue of every operator in ``seq``."""
    ops = list(seq)
    if not ops:
        raise ValueError("cannot harvest an interval from an empty sequence")
    lows = [float(op.eigenvalues[0]) for op in ops]
    highs = [float(op.eigenvalues[-1]) for op in ops]
    return Interval(min(lows), max(highs))


# -- projection -------------------------------------------------------------


def halfwidths(spec: ConstraintSpec, c: float) -> np.ndarray:
    s = spec.svd.singular_values
    with np.errstate(divide="ignore"):
        hw = np.where(s > spec.sigma_floor, c / np.where(s > 0, s, 1.0), np.inf)
    return hw


def project_bank(coefficients, spec: ConstraintSpec, c: float | None = None) -> np.ndarray:
    """Project every filter (last axis) of a coefficient array onto the rotated box.

    Filters already inside the box come back bit-for-bit unchanged; for the
    others only the clipped rotated coordinates are moved.
    """
    coeffs = np.asarray(coefficients, dtype=np.float64)
    if coeffs.shape[-1] != spec.taps:
        raise ValueError(f"filter length {coeffs.shape[-1]} does not match spec K={spec.taps}")
    v = spec.svd.right_vectors
    hw = halfwidths(spec, spec.bound_c if c is None else c)
    z = coeffs @ v
    clipped = np.clip(z, -hw, hw)
    delta = clipped - z
    out = coeffs.copy()
    moved = np.any(delta != 0.0, axis=-1)
    if np.any(moved):
        out[moved] = coeffs[moved] + delta[moved] @ v.T
    return out


def project_filter(g, spec: ConstraintSpec, c: float | None = None) -> np.ndarray:
    """Euclidean projection of one filter onto ``{h : |s_i (V^T h)_i| <= c}``."""
    taps = np.asarray(g, dtype=np.float64).ravel()
    return project_bank(taps[None, :], spec, c)[0]


def box_norm(coefficients, spec: ConstraintSpec) -> np.ndarray:
    """``max_i |s_i (V^T h)_i|`` over constrained coordinates, per filter."""
    coeffs = np.asarray(coefficients, dtype=np.float64)
    s = spec.svd.singular_values
    z = np.abs(coeffs @ spec.svd.right_vectors) * s
    z = z[..., s > spec.sigma_floor]
    if z.shape[-1] == 0:
        return np.zeros(coeffs.shape[:-1])
    return z.max(axis=-1)


@dataclass
class FeasibilityReport:
    """Largest constraint excess over all filters; negative means strictly feasible.

    ``max_violation`` is ``max |H(lambda)| - c`` over the spec frequencies,
    ``box_violation`` the same excess measured in the rotated box, and
    ``grid_violation_fraction`` the share of a dense grid on the spec interval
    where ``H* > c``.
    """

    max_violation: float
    box_violation: float
    bound_c: float
    grid_violation_fraction: float | None = None
    grid_points: int | None = None
    free_directions: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _layer_bounds(nlayers: int, spec: ConstraintSpec, bounds) -> list:
    if bounds is None:
        return [spec.bound_c] * nlayers
    if len(bounds) != nlayers:
        raise ValueError(f"need {nlayers} per-layer bounds, got {len(bounds)}")
    return [float(b) for b in bounds]


def check_feasibility(model, spec: ConstraintSpec, grid_points: int | None = None,
                      bounds: Sequence[float] | None = None) -> FeasibilityReport:
    """Measure how far a model's filters are from the constraint set.

    Args:
        model: GnnModel (or list of filter tensors).
        spec: the constraint set.
        grid_points: if given and the spec has an interval, also report the
            fraction of a uniform grid of that many points where the
            maximum response exceeds the bound.
        bounds: optional per-layer bounds overriding ``spec.bound_c``.
    """
    banks = filter_banks(model)
    cs = _layer_bounds(len(banks), spec, bounds)
    resp_v, box_v = -np.inf, -np.inf
    for coeffs, c in zip(banks, cs):
        flat = coeffs.reshape(-1, coeffs.shape[-1])
        resp = np.abs(bank_response(flat, spec.lambdas))
        resp_v = max(resp_v, float(resp.max()) - c)
        box_v = max(box_v, float(box_norm(flat, spec).max()) - c)
    frac = None
    if grid_points and spec.interval is not None:
        grid = np.linspace(spec.interval[0], spec.interval[1], int(grid_points))
        frac = violation_fraction(banks, grid, cs)
    return FeasibilityReport(resp_v, box_v, spec.bound_c, frac,
                             int(grid_points) if frac is not None else None,
                             spec.free_directions)


def violation_fraction(model, lambdas, bounds) -> float:
    """Fraction of ``lambdas`` where some filter exceeds its layer's bound."""
    banks = filter_banks(model)
    if np.isscalar(bounds):
        bounds = [float(bounds)] * len(banks)
    lam = np.asarray(lambdas, dtype=np.float64)
    bad = np.zeros(lam.shape, dtype=bool)
    for coeffs, c in zip(banks, bounds):
        resp = np.abs(bank_response(coeffs.reshape(-1, coeffs.shape[-1]), lam))
        bad |= (resp > c).any(axis=0)
    return float(bad.mean())
