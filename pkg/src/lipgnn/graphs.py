"""Graph shift operators, graph convolution and random graph generators.

All randomness comes from ``numpy.random.default_rng(seed)``, i.e. the PCG64
bit generator, so a given seed reproduces the same graphs on any platform
running the same numpy major version.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import EigenDecomposition, as_matrix, check_symmetric, symmetric_eig

KINDS = ("adjacency", "laplacian", "normalized_adjacency")


@dataclass(frozen=True, eq=False)
class GraphShiftOperator:
    """Symmetric n x n shift operator with a lazily cached spectrum."""

    matrix: np.ndarray
    kind: str = "adjacency"

    def __post_init__(self):
        m = as_matrix(self.matrix, "shift operator")
        check_symmetric(m, "shift operator")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def spectrum(self) -> EigenDecomposition:
        return symmetric_eig(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def lambda_max(self) -> float:
        """Largest eigenvalue magnitude (spectral norm)."""
        return float(np.max(np.abs(self.eigenvalues)))

    def scaled(self, factor: float, kind: str | None = None) -> "GraphShiftOperator":
        return GraphShiftOperator(self.matrix * factor, kind or self.kind)

    @classmethod
    def from_adjacency(cls, adjacency, kind: str = "adjacency", scale: float | None = None):
        """Build an operator from a symmetric adjacency matrix.

        ``normalized_adjacency`` divides by the spectral norm of ``adjacency``
        unless an explicit ``scale`` divisor is given (used to share one
        normalization across a dynamic sequence).
        """
        a = as_matrix(adjacency, "adjacency")
        if kind == "adjacency":
            return cls(a, "adjacency")
        if kind == "laplacian":
            return cls(np.diag(a.sum(axis=1)) - a, "laplacian")
        if kind == "normalized_adjacency":
            if scale is None:
                scale = float(np.max(np.abs(symmetric_eig(a).eigenvalues)))
            if scale <= 0:
                # Empty graph: nothing to normalize.
                scale = 1.0
            return cls(a / scale, "normalized_adjacency")
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


@dataclass(frozen=True, eq=False)
class DynamicGraphSequence:
    """Ordered operators on a fixed node set, optionally with agent positions."""

    operators: tuple
    positions: np.ndarray | None = field(default=None)

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise ValueError("a dynamic graph sequence needs at least one operator")
        n = ops[0].n
        if any(op.n != n for op in ops):
            raise ValueError("all operators in a sequence must have the same node count")
        object.__setattr__(self, "operators", ops)

    @property
    def n(self) -> int:
        return self.operators[0].n

    def __len__(self) -> int:
        return len(self.operators)

    def __getitem__(self, i) -> GraphShiftOperator:
        return self.operators[i]

    def __iter__(self):
        return iter(self.operators)

    def normalized(self, kind: str = "normalized_adjacency") -> "DynamicGraphSequence":
        """Rescale every operator by 1/lambda_max of the first one."""
        scale = self.operators[0].lambda_max or 1.0
        ops = tuple(GraphShiftOperator(op.matrix / scale, kind) for op in self.operators)
        return DynamicGraphSequence(ops, self.positions)


def _as_operator(s) -> GraphShiftOperator:
    return s if isinstance(s, GraphShiftOperator) else GraphShiftOperator(s)


def graph_convolve(h, s, x) -> np.ndarray:
    """Apply the graph filter ``sum_k h[k] S^k x`` by repeated shifting.

    Args:
        h: filter taps, length K >= 1.
        s: GraphShiftOperator or symmetric matrix.
        x: signal of shape (n,) or (n, d).
    """
    taps = np.asarray(h, dtype=np.float64).ravel()
    if taps.size == 0:
        raise ValueError("filter needs at least one tap")
    mat = _as_operator(s).matrix
    sig = np.asarray(x, dtype=np.float64)
    if sig.shape[0] != mat.shape[0]:
        raise ValueError(f"signal has {sig.shape[0]} rows, operator has {mat.shape[0]} nodes")
    out = taps[0] * sig
    shifted = sig
    for hk in taps[1:]:
        shifted = mat @ shifted
        out = out + hk * shifted
    return out


def permutation_matrix(perm) -> np.ndarray:
    p = np.asarray(perm)
    n = p.size
    if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(n)):
        raise ValueError("perm must be a permutation of 0..n-1")
    mat = np.zeros((n, n))
    mat[np.arange(n), p] = 1.0
    return mat


def permute(s, x, perm):
    """Relabel nodes: returns ``(P S P^T, P X)`` with ``(P X)[i] = X[perm[i]]``."""
    op = _as_operator(s)
    p = np.asarray(perm)
    permutation_matrix(p)
    sig = np.asarray(x, dtype=np.float64)
    if sig.shape[0] != op.n:
        raise ValueError(f"signal has {sig.shape[0]} rows, operator has {op.n} nodes")
    return GraphShiftOperator(op.matrix[np.ix_(p, p)], op.kind), sig[p]


def sbm_communities(n: int, communities: int) -> np.ndarray:
    """Community index of each node; contiguous equal blocks."""
    if communities < 1 or n % communities:
        raise ValueError(f"communities ({communities}) must divide n ({n})")
    return np.repeat(np.arange(communities), n // communities)


def generate_sbm(n: int, communities: int, p_in: float, p_out: float, seed: int) -> GraphShiftOperator:
    """Stochastic block model adjacency with equal contiguous communities.

    Edge indicators for pairs i < j are drawn in row-major order as
    ``rng.random() < p`` from a PCG64 stream seeded with ``seed``.
    """
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    labels = sbm_communities(n, communities)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    edges = rng.random(iu.size) < prob
    a = np.zeros((n, n))
    a[iu[edges], ju[edges]] = 1.0
    a = a + a.T
    return GraphShiftOperator(a, "adjacency")


def generate_rgg_sequence(
    n: int, radius: float, steps: int, step_scale: float, seed: int
) -> DynamicGraphSequence:
    """Random geometric graphs over agents random-walking in the unit square.

    Agents start uniform in [0, 1]^2; between steps each coordinate moves by
    ``step_scale * N(0, 1)`` and is clipped back into the square. Two agents
    are adjacent when their distance is at most ``radius``.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    ops, track = [], []
    for t in range(steps):
        if t > 0:
            pos = np.clip(pos + step_scale * rng.standard_normal((n, 2)), 0.0, 1.0)
        track.append(pos.copy())
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        a = (dist <= radius).astype(np.float64)
        np.fill_diagonal(a, 0.0)
        ops.append(GraphShiftOperator(a, "adjacency"))
    return DynamicGraphSequence(tuple(ops), np.stack(track))


# -- file formats -----------------------------------------------------------


def write_edge_list(path, adjacency) -> None:
    """Write ``n m`` then one ``i j`` line per undirected edge (i < j)."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    iu, ju = np.nonzero(np.triu(a, k=1))
    lines = [f"{n} {iu.size}"] + [f"{i} {j}" for i, j in zip(iu, ju)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> np.ndarray:
    """Parse an edge-list file into a symmetric 0/1 adjacency matrix."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: first line must be 'n m'")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) - 1 != m:
        raise ValueError(f"{path}: header declares {m} edges, found {len(rows) - 1}")
    a = np.zeros((n, n))
    for k, row in enumerate(rows[1:], start=2):
        i, j = int(row[0]), int(row[1])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"{path}:{k}: invalid edge {i} {j}")
        a[i, j] = a[j, i] = 1.0
    return a


def format_float(v: float) -> str:
    return repr(float(v))


def write_signal(path, x) -> None:
    """One CSV row per node, one column per feature."""
    sig = np.asarray(x, dtype=np.float64)
    if sig.ndim == 1:
        sig = sig[:, None]
    text = "\n".join(",".join(format_float(v) for v in row) for row in sig)
    Path(path).write_text(text + "\n")


def read_signal(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def stack_operators(ops: Sequence[GraphShiftOperator]) -> np.ndarray:
    return np.stack([op.matrix for op in ops])
