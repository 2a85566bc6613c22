"""Source-localization datasets on static and dynamic graphs.

A sample diffuses a unit impulse at a source node for ``t`` steps of the
normalized shift ``S / lambda_max`` and labels it with the source's group
(its SBM community, or a contiguous block of agent ids on dynamic graphs).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .graphs import (
    DynamicGraphSequence,
    GraphShiftOperator,
    format_float,
    generate_sbm,
    read_edge_list,
    sbm_communities,
    write_edge_list,
)
from .linalg import symmetric_eig

DATASET_FORMAT = "lipgnn-dataset/v1"
SPLIT_FRACTIONS = (0.6, 0.2, 0.2)


@dataclass(eq=False)
class SourceLocDataset:
    """Diffused impulses on one or more graphs.

    ``operators`` holds the normalized shift of every graph; sample i lives on
    ``operators[steps[i]]``. A static dataset has a single operator.
    """

    adjacency: list
    operators: list
    scale: float
    kind: str
    x: np.ndarray
    y: np.ndarray
    sources: np.ndarray
    times: np.ndarray
    steps: np.ndarray
    groups: np.ndarray
    splits: dict
    horizon: int
    params: dict = field(default_factory=dict)

    @property
    def S(self) -> GraphShiftOperator:
        return self.operators[0]

    @property
    def n(self) -> int:
        return self.operators[0].n

    @property
    def num_classes(self) -> int:
        return int(self.groups.max()) + 1

    @property
    def is_static(self) -> bool:
        return len(self.operators) == 1

    def shift_for(self, idx) -> np.ndarray:
        """Shift operator(s) for the given samples: (n, n) if static, else (B, n, n)."""
        if self.is_static:
            return self.operators[0].matrix
        return self.operator_stack[self.steps[idx]]

    @cached_property
    def operator_stack(self) -> np.ndarray:
        return np.stack([op.matrix for op in self.operators])

    def subset(self, split: str):
        """``(S, X, y)`` for one split."""
        idx = self.splits[split]
        return self.shift_for(idx), self.x[idx], self.y[idx]


def _normalized(adjacency: np.ndarray, kind: str, scale: float | None) -> tuple:
    if kind == "laplacian":
        mat = np.diag(adjacency.sum(axis=1)) - adjacency
    elif kind == "adjacency":
        mat = adjacency
    else:
        raise ValueError(f"operator kind must be adjacency or laplacian, got {kind!r}")
    if scale is None:
        scale = float(np.max(np.abs(symmetric_eig(mat).eigenvalues))) or 1.0
    out_kind = "normalized_adjacency" if kind == "adjacency" else "laplacian"
    return mat / scale, scale, out_kind


def _diffuse(ops, n: int, sources, times, steps, horizon: int, window: int) -> np.ndarray:
    x = np.empty((sources.size, n, window))
    for step, op in enumerate(ops):
        # powers[t] = S^t, built by repeated shifting.
        powers = [np.eye(n)]
        for _ in range(horizon):
            powers.append(op.matrix @ powers[-1])
        sel = np.nonzero(steps == step)[0]
        for i in sel:
            for c in range(window):
                t = max(int(times[i]) - window + 1 + c, 0)
                x[i, :, c] = powers[t][:, sources[i]]
    return x


def _splits(rng, count: int) -> dict:
    perm = rng.permutation(count)
    n_train = int(round(SPLIT_FRACTIONS[0] * count))
    n_val = int(round(SPLIT_FRACTIONS[1] * count))
    return {"train": np.sort(perm[:n_train]),
            "val": np.sort(perm[n_train:n_train + n_val]),
            "test": np.sort(perm[n_train + n_val:])}


def _sample(adjacency, groups, num_samples, horizon, seed, window, kind, scale, params):
    if horizon < 1:
        raise ValueError(f"diffusion horizon T must be >= 1, got {horizon}")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if window < 1:
        raise ValueError("window must be >= 1")
    n = adjacency[0].shape[0]
    if scale is None:
        _, scale, _ = _normalized(adjacency[0], kind, None)
    ops = []
    for a in adjacency:
        mat, _, out_kind = _normalized(a, kind, scale)
        ops.append(GraphShiftOperator(mat, out_kind))
    rng = np.random.default_rng([seed, 1])
    sources = rng.integers(0, n, num_samples)
    times = rng.integers(1, horizon + 1, num_samples)
    splits = _splits(rng, num_samples)
    steps = rng.integers(0, len(ops), num_samples)
    x = _diffuse(ops, n, sources, times, steps, horizon, window)
    return SourceLocDataset(list(adjacency), ops, float(scale), kind, x, groups[sources],
                            sources, times, steps, groups, splits, horizon, params)


def gen_source_localization(n: int = 50, communities: int = 5, p_in: float = 0.8,
                            p_out: float = 0.1, num_samples: int = 2000, T: int = 8,
                            seed: int = 0, window: int = 1,
                            kind: str = "adjacency") -> SourceLocDataset:
    """SBM graph plus diffused-impulse samples labeled by source community.

    With ``window > 1`` each sample stacks ``S^(t-window+1) e_s ... S^t e_s``
    as channels (exponents clamped at 0).
    """
    s = generate_sbm(n, communities, p_in, p_out, seed)
    params = {"task": "source_localization", "n": n, "communities": communities,
              "p_in": p_in, "p_out": p_out, "num_samples": num_samples, "T": T,
              "seed": seed, "window": window, "kind": kind}
    return _sample([s.matrix], sbm_communities(n, communities), num_samples, T, seed,
                   window, kind, None, params)


def gen_dynamic_task(sequence: DynamicGraphSequence, num_samples: int, T: int, seed: int,
                     groups: int = 4, window: int = 1, kind: str = "adjacency",
                     params: dict | None = None) -> SourceLocDataset:
    """Source localization where each sample lives on one graph of a sequence.

    Every graph is normalized by the spectral norm of the first one. Labels
    are contiguous blocks of ``groups`` node ids.
    """
    seq = sequence if isinstance(sequence, DynamicGraphSequence) else DynamicGraphSequence(sequence)
    adj = [op.matrix for op in seq]
    p = {"task": "dynamic", "num_samples": num_samples, "T": T, "seed": seed,
         "groups": groups, "window": window, "kind": kind}
    p.update(params or {})
    return _sample(adj, sbm_communities(seq.n, groups), num_samples, T, seed, window,
                   kind, None, p)


# -- serialization ----------------------------------------------------------


def manifest(ds: SourceLocDataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "params": ds.params,
        "kind": ds.kind,
        "scale": ds.scale,
        "horizon": ds.horizon,
        "num_graphs": len(ds.adjacency),
        "num_samples": int(ds.y.size),
        "features": int(ds.x.shape[2]),
        "groups": [int(g) for g in ds.groups],
        "splits": {k: [int(i) for i in v] for k, v in ds.splits.items()},
    }


def write_dataset(directory, ds: SourceLocDataset) -> Path:
    """Edge list per graph, ``signals.csv``, ``labels.csv`` and ``manifest.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, a in enumerate(ds.adjacency):
        write_edge_list(out / f"graph_{i:04d}.edges", a)
    d = ds.x.shape[2]
    lines = ["sample,node," + ",".join(f"f{j}" for j in range(d))]
    for i in range(ds.x.shape[0]):
        for v in range(ds.x.shape[1]):
            lines.append(f"{i},{v}," + ",".join(format_float(val) for val in ds.x[i, v]))
    (out / "signals.csv").write_text("\n".join(lines) + "\n")
    rows = ["sample,label,source,time,step"]
    rows += [f"{i},{ds.y[i]},{ds.sources[i]},{ds.times[i]},{ds.steps[i]}" for i in range(ds.y.size)]
    (out / "labels.csv").write_text("\n".join(rows) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest(ds), indent=2, sort_keys=True) + "\n")
    return out


def read_dataset(directory) -> SourceLocDataset:
    src = Path(directory)
    man = json.loads((src / "manifest.json").read_text())
    if man.get("format") != DATASET_FORMAT:
        raise ValueError(f"{src}: unsupported dataset format {man.get('format')!r}")
    adjacency = [read_edge_list(src / f"graph_{i:04d}.edges") for i in range(man["num_graphs"])]
    ops = []
    for a in adjacency:
        mat, _, out_kind = _normalized(a, man["kind"], man["scale"])
        ops.append(GraphShiftOperator(mat, out_kind))
    n = adjacency[0].shape[0]
    sig = np.loadtxt(src / "signals.csv", delimiter=",", skiprows=1, ndmin=2)
    x = sig[:, 2:].reshape(man["num_samples"], n, man["features"])
    lab = np.loadtxt(src / "labels.csv", delimiter=",", skiprows=1, ndmin=2).astype(np.int64)
    splits = {k: np.asarray(v, dtype=np.int64) for k, v in man["splits"].items()}
    return SourceLocDataset(adjacency, ops, man["scale"], man["kind"], x, lab[:, 1], lab[:, 2],
                            lab[:, 3], lab[:, 4], np.asarray(man["groups"]), splits,
                            man["horizon"], man["params"])
