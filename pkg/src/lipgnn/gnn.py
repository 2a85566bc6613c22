"""Graph neural network built from polynomial filter banks.

Layer q maps an (n, G_{q-1}) signal to (n, G_q)::

    X_q = sigma( sum_k  S^k X_{q-1} H_q[:, :, k] )

with the shifted signals computed by repeated multiplication by S. Signals
are batched as (B, n, G); the shift operator is either one (n, n) matrix
shared by the batch or a (B, n, n) stack with one graph per sample.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import GraphShiftOperator

NONLINEARITIES = ("relu", "tanh", "identity")
READOUTS = ("node", "mean", "flatten")
LOSSES = ("cross_entropy_with_logits", "mean_squared_error")
CHECKPOINT_FORMAT = "lipgnn-checkpoint/v1"


@dataclass
class GnnModel:
    """Filter tensors of shape (G_in, G_out, K) per layer plus an affine readout.

    ``readout`` selects how node features reach the output: ``node`` applies
    the dense map at every node, ``mean`` pools over nodes first, ``flatten``
    feeds all n * G_Q features to one dense map (needs ``n_nodes``).
    """

    layers: list
    readout_weight: np.ndarray
    readout_bias: np.ndarray
    nonlinearity: str = "relu"
    readout: str = "node"
    n_nodes: int | None = None

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if not self.layers:
            raise ValueError("model needs at least one layer")
        self.layers = [np.asarray(t, dtype=np.float64) for t in self.layers]
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"layer dims do not chain: {a.shape} then {b.shape}")
        self.readout_weight = np.asarray(self.readout_weight, dtype=np.float64)
        self.readout_bias = np.asarray(self.readout_bias, dtype=np.float64)
        expect = self.feature_dims[-1]
        if self.readout == "flatten":
            if self.n_nodes is None:
                raise ValueError("flatten readout needs n_nodes")
            expect *= self.n_nodes
        if self.readout_weight.shape[0] != expect:
            raise ValueError(f"readout expects {expect} inputs, weight is {self.readout_weight.shape}")
        if self.readout_bias.shape != (self.readout_weight.shape[1],):
            raise ValueError("readout bias does not match readout weight")

    @property
    def feature_dims(self) -> tuple:
        return (self.layers[0].shape[0],) + tuple(t.shape[1] for t in self.layers)

    @property
    def taps(self) -> tuple:
        return tuple(t.shape[2] for t in self.layers)

    @property
    def out_dim(self) -> int:
        return self.readout_weight.shape[1]

    def copy(self) -> "GnnModel":
        return GnnModel([t.copy() for t in self.layers], self.readout_weight.copy(),
                        self.readout_bias.copy(), self.nonlinearity, self.readout, self.n_nodes)

    def parameters(self) -> list:
        return list(self.layers) + [self.readout_weight, self.readout_bias]

    def architecture(self) -> dict:
        return {
            "feature_dims": list(self.feature_dims),
            "taps": list(self.taps),
            "out_dim": self.out_dim,
            "nonlinearity": self.nonlinearity,
            "readout": self.readout,
            "n_nodes": self.n_nodes,
        }


def init_model(feature_dims, taps: int, out_dim: int, nonlinearity: str = "relu",
               readout: str = "node", n_nodes: int | None = None, seed: int = 0) -> GnnModel:
    """Random model: taps uniform in +-1/(K G_in), Glorot-uniform readout, zero bias."""
    dims = list(feature_dims)
    if len(dims) < 2:
        raise ValueError("feature_dims needs at least (G_0, G_1)")
    rng = np.random.default_rng(seed)
    layers = []
    for g_in, g_out in zip(dims, dims[1:]):
        bound = 1.0 / (taps * g_in)
        layers.append(rng.uniform(-bound, bound, (g_in, g_out, taps)))
    fan_in = dims[-1] * (n_nodes if readout == "flatten" else 1)
    lim = np.sqrt(6.0 / (fan_in + out_dim))
    weight = rng.uniform(-lim, lim, (fan_in, out_dim))
    return GnnModel(layers, weight, np.zeros(out_dim), nonlinearity, readout, n_nodes)


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(kind: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if kind == "relu":
        # Derivative taken as 0 at the kink.
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - out * out
    return np.ones_like(z)


def _shift_matrix(s) -> np.ndarray:
    if isinstance(s, GraphShiftOperator):
        return s.matrix
    return np.asarray(s, dtype=np.float64)


def _batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None], True
    if arr.ndim == 3:
        return arr, False
    raise ValueError(f"signal must be (n, d) or (B, n, d), got shape {arr.shape}")


@dataclass
class ForwardCache:
    shifts: list = field(default_factory=list)   # per layer: (K, B, n, G_in)
    pre: list = field(default_factory=list)      # per layer: (B, n, G_out)
    post: list = field(default_factory=list)     # per layer: (B, n, G_out)
    squeezed: bool = False


def forward(model: GnnModel, s, x, return_cache: bool = False):
    """Evaluate the model.

    Returns:
        Output of shape (B, n, out) for ``node`` readout or (B, out)
        otherwise; the batch axis is dropped for unbatched input. With
        ``return_cache`` also the intermediates needed by :func:`backward`.
    """
    mat = _shift_matrix(s)
    h, squeezed = _batch(x)
    n = mat.shape[-1]
    if h.shape[1] != n:
        raise ValueError(f"signal has {h.shape[1]} nodes, operator has {n}")
    if h.shape[2] != model.feature_dims[0]:
        raise ValueError(f"signal has {h.shape[2]} features, model expects {model.feature_dims[0]}")
    cache = ForwardCache(squeezed=squeezed)
    for coeffs in model.layers:
        k = coeffs.shape[2]
        shifts = [h]
        for _ in range(k - 1):
            shifts.append(mat @ shifts[-1])
        stack = np.stack(shifts)
        z = np.einsum("kbnf,fgk->bng", stack, coeffs, optimize=True)
        h = _activate(model.nonlinearity, z)
        cache.shifts.append(stack)
        cache.pre.append(z)
        cache.post.append(h)
    out = _readout(model, h)
    if squeezed:
        out = out[0]
    return (out, cache) if return_cache else out


def _readout(model: GnnModel, h: np.ndarray) -> np.ndarray:
    if model.readout == "node":
        return h @ model.readout_weight + model.readout_bias
    if model.readout == "mean":
        return h.mean(axis=1) @ model.readout_weight + model.readout_bias
    if h.shape[1] != model.n_nodes:
        raise ValueError(f"flatten readout built for {model.n_nodes} nodes, got {h.shape[1]}")
    return h.reshape(h.shape[0], -1) @ model.readout_weight + model.readout_bias


def loss_and_grad(pred, y, kind: str):
    """Scalar loss (mean over samples) and its gradient with respect to ``pred``.

    Cross-entropy takes logits on the last axis and integer class labels of
    the leading shape; mean squared error averages over every entry.
    """
    p = np.asarray(pred, dtype=np.float64)
    if kind == "mean_squared_error":
        t = np.asarray(y, dtype=np.float64)
        if t.shape != p.shape:
            raise ValueError(f"target shape {t.shape} does not match prediction {p.shape}")
        diff = p - t
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    if kind == "cross_entropy_with_logits":
        labels = np.asarray(y)
        if labels.shape != p.shape[:-1]:
            raise ValueError(f"label shape {labels.shape} does not match logits {p.shape}")
        flat = p.reshape(-1, p.shape[-1])
        lab = labels.reshape(-1).astype(np.int64)
        shifted = flat - flat.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        count = flat.shape[0]
        value = float(np.mean(logz - shifted[np.arange(count), lab]))
        grad = np.exp(shifted - logz[:, None])
        grad[np.arange(count), lab] -= 1.0
        return value, (grad / count).reshape(p.shape)
    raise ValueError(f"loss kind must be one of {LOSSES}, got {kind!r}")


def loss(pred, y, kind: str) -> float:
    return loss_and_grad(pred, y, kind)[0]


def per_sample_loss(pred, y, kind: str) -> np.ndarray:
    """Loss of each sample along the leading axis (averaged over the rest)."""
    p = np.asarray(pred, dtype=np.float64)
    if kind == "mean_squared_error":
        diff = p - np.asarray(y, dtype=np.float64)
        return (diff * diff).reshape(p.shape[0], -1).mean(axis=1)
    if kind == "cross_entropy_with_logits":
        lab = np.asarray(y).astype(np.int64)
        shifted = p - p.max(axis=-1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=-1))
        picked = np.take_along_axis(shifted, lab[..., None], axis=-1)[..., 0]
        return (logz - picked).reshape(p.shape[0], -1).mean(axis=1)
    raise ValueError(f"loss kind must be one of {LOSSES}, got {kind!r}")


@dataclass
class Gradients:
    layers: list
    readout_weight: np.ndarray
    readout_bias: np.ndarray
    inputs: np.ndarray
    loss: float

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.layers]
                              + [self.readout_weight.ravel(), self.readout_bias.ravel()])


def backward_from_output(model: GnnModel, s, cache: ForwardCache, dout) -> tuple:
    """Propagate an output gradient back through a cached forward pass.

    Returns:
        (layer gradients, readout weight gradient, readout bias gradient,
        input gradient), the input gradient shaped like the batched input.
    """
    mat = _shift_matrix(s)
    mat_t = np.swapaxes(mat, -1, -2)
    d = np.asarray(dout, dtype=np.float64)
    if cache.squeezed:
        d = d[None]
    h_last = cache.post[-1]
    bsz, n, g_last = h_last.shape
    if model.readout == "node":
        g_w = np.einsum("bng,bno->go", h_last, d)
        g_b = d.sum(axis=(0, 1))
        dh = d @ model.readout_weight.T
    elif model.readout == "mean":
        pooled = h_last.mean(axis=1)
        g_w = pooled.T @ d
        g_b = d.sum(axis=0)
        dh = np.broadcast_to((d @ model.readout_weight.T)[:, None, :] / n, h_last.shape).copy()
    else:
        flat = h_last.reshape(bsz, -1)
        g_w = flat.T @ d
        g_b = d.sum(axis=0)
        dh = (d @ model.readout_weight.T).reshape(h_last.shape)
    grads = [None] * len(model.layers)
    for q in range(len(model.layers) - 1, -1, -1):
        coeffs = model.layers[q]
        dz = dh * _activate_grad(model.nonlinearity, cache.pre[q], cache.post[q])
        grads[q] = np.einsum("kbnf,bng->fgk", cache.shifts[q], dz, optimize=True)
        k = coeffs.shape[2]
        # Horner form of sum_k (S^T)^k dz H_k^T.
        dh = dz @ coeffs[:, :, k - 1].T
        for j in range(k - 2, -1, -1):
            dh = mat_t @ dh + dz @ coeffs[:, :, j].T
    return grads, g_w, g_b, dh


def backward(model: GnnModel, s, x, y, kind: str) -> Gradients:
    """Exact gradients of the mean loss with respect to every parameter and the input."""
    out, cache = forward(model, s, x, return_cache=True)
    value, dout = loss_and_grad(out, y, kind)
    grads, g_w, g_b, dx = backward_from_output(model, s, cache, dout)
    if cache.squeezed:
        dx = dx[0]
    return Gradients(grads, g_w, g_b, dx, value)


def predict_labels(model: GnnModel, s, x) -> np.ndarray:
    return np.argmax(forward(model, s, x), axis=-1)


# -- checkpoints ------------------------------------------------------------


def _encode(a: np.ndarray) -> dict:
    arr = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(arr.shape), "dtype": "<f8",
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).astype(np.float64)


def checkpoint_dict(model: GnnModel, meta: dict | None = None) -> dict:
    tensors = {f"layer{q}": _encode(t) for q, t in enumerate(model.layers)}
    tensors["readout_weight"] = _encode(model.readout_weight)
    tensors["readout_bias"] = _encode(model.readout_bias)
    return {"format": CHECKPOINT_FORMAT, "architecture": model.architecture(),
            "meta": meta or {}, "tensors": tensors}


def save_checkpoint(path, model: GnnModel, meta: dict | None = None) -> None:
    """JSON header plus base64 little-endian float64 blocks; reload is bit-exact."""
    Path(path).write_text(json.dumps(checkpoint_dict(model, meta), indent=1, sort_keys=True) + "\n")


def model_from_checkpoint(doc: dict) -> GnnModel:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    arch = doc["architecture"]
    t = doc["tensors"]
    layers = [_decode(t[f"layer{q}"]) for q in range(len(arch["taps"]))]
    return GnnModel(layers, _decode(t["readout_weight"]), _decode(t["readout_bias"]),
                    arch["nonlinearity"], arch["readout"], arch["n_nodes"])


def load_checkpoint(path) -> tuple[GnnModel, dict]:
    doc = json.loads(Path(path).read_text())
    return model_from_checkpoint(doc), doc.get("meta", {})


def model_checksum(model: GnnModel) -> str:
    h = hashlib.sha256()
    for p in model.parameters():
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()
