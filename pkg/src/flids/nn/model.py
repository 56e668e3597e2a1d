"""Binary detectors trained from scratch.

Architectures (relu hidden activations, sigmoid output):

  dnn: input -> hidden[0] -> hidden[1] -> 1
  cnn: conv1d(filters, kernel, valid) -> relu -> maxpool(width) -> dropout
       -> flatten -> hidden[0] -> hidden[1] -> 1

Parameters live in one flat float64 vector, packed layer by layer, weights
then bias. Loss is binary cross-entropy; the probability is clamped to
[1e-7, 1 - 1e-7] in the loss value only, the gradient stays the analytic
(p - y) through the sigmoid. Dropout is inverted scaling, train mode only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng as rngmod
from ..evaluation import ConfusionCounts
from .backend import kernels as K

P_CLAMP = 1e-7


@dataclass(frozen=True)
class ArchSpec:
    kind: str = "cnn"
    input_dim: int = 31
    hidden: tuple = (16, 8)
    conv_filters: int = 22
    conv_kernel: int = 3
    pool_width: int = 2
    dropout: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("dnn", "cnn"):
            raise ValueError("kind must be 'dnn' or 'cnn'")
        if self.input_dim < 1 or len(self.hidden) != 2 or any(h < 1 for h in self.hidden):
            raise ValueError("bad layer sizes")
        if self.kind == "cnn":
            if not 1 <= self.conv_kernel <= self.input_dim:
                raise ValueError("conv_kernel must fit the input")
            if self.conv_filters < 1 or self.pool_width < 1:
                raise ValueError("bad conv geometry")
            if self.pool_out < 1:
                raise ValueError("pool output is empty")
            if not 0.0 <= self.dropout < 1.0:
                raise ValueError("dropout must lie in [0, 1)")

    @property
    def conv_out(self) -> int:
        return self.input_dim - self.conv_kernel + 1

    @property
    def pool_out(self) -> int:
        return self.conv_out // self.pool_width

    @property
    def flat_dim(self) -> int:
        if self.kind == "dnn":
            return self.input_dim
        return self.pool_out * self.conv_filters


def layer_shapes(arch: ArchSpec) -> list[tuple[tuple, tuple]]:
    shapes = []
    if arch.kind == "cnn":
        shapes.append(((arch.conv_filters, arch.conv_kernel), (arch.conv_filters,)))
    dims = [arch.flat_dim, arch.hidden[0], arch.hidden[1], 1]
    for a, b in zip(dims, dims[1:]):
        shapes.append(((a, b), (b,)))
    return shapes


_PLANS: dict = {}


def _plan(arch: ArchSpec) -> tuple:
    """(flat shapes, sizes, offsets) of the packed parameter vector, cached."""
    plan = _PLANS.get(arch)
    if plan is None:
        shapes = [s for pair in layer_shapes(arch) for s in pair]
        sizes = [int(np.prod(s)) for s in shapes]
        offsets = [0]
        for size in sizes:
            offsets.append(offsets[-1] + size)
        plan = (tuple(shapes), tuple(sizes), tuple(offsets))
        _PLANS[arch] = plan
    return plan


def param_count(arch: ArchSpec) -> int:
    return _plan(arch)[2][-1]


@dataclass
class ModelParams:
    arch: ArchSpec
    w: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.w.copy())

    def views(self) -> tuple:
        """Per-layer reshaped views into w, cached while w is the same buffer
        (in-place updates keep the cache valid)."""
        cached = getattr(self, "_views_cache", None)
        if cached is None or cached[0] is not self.w:
            cached = (self.w, _views(self.arch, self.w))
            self._views_cache = cached
        return cached[1]


def _views(arch: ArchSpec, w: np.ndarray) -> tuple:
    shapes, sizes, offsets = _plan(arch)
    return tuple(
        w[offsets[i] : offsets[i] + sizes[i]].reshape(shapes[i]) for i in range(len(shapes))
    )


def _fans(w_shape: tuple, is_conv: bool) -> tuple[int, int]:
    if is_conv:
        filters, kernel = w_shape
        return kernel, kernel * filters
    return w_shape[0], w_shape[1]


def init_params(arch: ArchSpec, seed) -> ModelParams:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else rngmod.substream(seed, rngmod.MODEL_INIT)
    chunks = []
    for li, (w_shape, b_shape) in enumerate(layer_shapes(arch)):
        fan_in, fan_out = _fans(w_shape, is_conv=(arch.kind == "cnn" and li == 0))
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=int(np.prod(w_shape))))
        chunks.append(np.zeros(int(np.prod(b_shape))))
    return ModelParams(arch, np.concatenate(chunks))


def flatten_grads(arch: ArchSpec, grads: list, out: np.ndarray | None = None) -> np.ndarray:
    """Pack per-layer gradient arrays into one flat vector (matching w)."""
    _, sizes, offsets = _plan(arch)
    if out is None:
        out = np.empty(offsets[-1])
    for i, g in enumerate(grads):
        out[offsets[i] : offsets[i] + sizes[i]] = g.ravel()
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _require_finite(X: np.ndarray) -> None:
    if not np.isfinite(X).all():
        raise ValueError("non-finite values in model input")


def _forward_views(arch: ArchSpec, views: tuple, X: np.ndarray, mask=None):
    """Probabilities plus the activations the backward pass needs.

    X must be a C-contiguous float64 (B, input_dim) matrix whose finiteness
    the caller has already checked."""
    if arch.kind == "cnn":
        Wc, bc, W1, b1, W2, b2, W3, b3 = views
        Z = K.conv1d_fwd(X, Wc, bc)
        A = np.maximum(Z, 0.0)
        P, idx = K.maxpool_fwd(A, arch.pool_width)
        if mask is not None:
            P = P * mask
        flat = P.reshape(X.shape[0], arch.flat_dim)
    else:
        W1, b1, W2, b2, W3, b3 = views
        Z = idx = None
        flat = X
    H1 = np.maximum(K.dense_fwd(flat, W1, b1), 0.0)
    H2 = np.maximum(K.dense_fwd(H1, W2, b2), 0.0)
    logits = K.dense_fwd(H2, W3, b3)[:, 0]
    return _sigmoid(logits), (flat, H1, H2, Z, idx, mask)


def bce_loss(probs: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(probs, P_CLAMP, 1.0 - P_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _grad_core(arch: ArchSpec, views: tuple, X, y, mask, gbuf, want_loss=True) -> float:
    """Gradient lands in gbuf (flat, matching the w packing); returns mean BCE.

    want_loss=False skips the loss arithmetic for callers that discard it."""
    probs, (flat, H1, H2, Z, idx, mask) = _forward_views(arch, views, X, mask)
    loss = bce_loss(probs, y) if want_loss else 0.0
    B = X.shape[0]
    dlogit = (probs - y)[:, None]
    dlogit /= B
    if arch.kind == "cnn":
        Wc, bc, W1, b1, W2, b2, W3, b3 = views
    else:
        W1, b1, W2, b2, W3, b3 = views
    dH2, dW3, db3 = K.dense_bwd(H2, W3, dlogit)
    dH2 *= H2 > 0
    dH1, dW2, db2 = K.dense_bwd(H1, W2, dH2)
    dH1 *= H1 > 0
    dflat, dW1, db1 = K.dense_bwd(flat, W1, dH1)
    grads = [dW1, db1, dW2, db2, dW3, db3]
    if arch.kind == "cnn":
        dP = dflat.reshape(B, arch.pool_out, arch.conv_filters)
        if mask is not None:
            dP *= mask
        dA = K.maxpool_bwd(dP, idx, arch.conv_out)
        dA *= Z > 0
        _, dWc, dbc = K.conv1d_bwd(X, Wc, dA)
        grads = [dWc, dbc] + grads
    flatten_grads(arch, grads, out=gbuf)
    return loss


def loss_and_grad(params: ModelParams, X: np.ndarray, y: np.ndarray, mask=None):
    """Mean BCE and its gradient as a flat vector matching params.w."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _require_finite(X)
    gbuf = np.empty(params.w.size)
    loss = _grad_core(params.arch, params.views(), X, y, mask, gbuf)
    return loss, gbuf


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    _require_finite(X)
    probs, _ = _forward_views(params.arch, params.views(), X)
    return probs


def predict(params: ModelParams, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(params, X) >= threshold).astype(np.int64)


def confusion_counts(params: ModelParams, X, y, threshold: float = 0.5) -> ConfusionCounts:
    if len(y) == 0:
        return ConfusionCounts()
    pred = predict(params, X, threshold)
    y = np.asarray(y).astype(np.int64)
    return ConfusionCounts(
        tp=int(np.sum((pred == 1) & (y == 1))),
        tn=int(np.sum((pred == 0) & (y == 0))),
        fp=int(np.sum((pred == 1) & (y == 0))),
        fn=int(np.sum((pred == 0) & (y == 1))),
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    local_epochs: int = 1
    threshold: float = 0.5


def make_dropout_mask(arch: ArchSpec, batch: int, rng) -> np.ndarray | None:
    if arch.kind != "cnn" or arch.dropout == 0.0:
        return None
    keep = rng.random((batch, arch.pool_out, arch.conv_filters)) >= arch.dropout
    return keep / (1.0 - arch.dropout)


def sgd_epoch(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    rng,
    mu: float = 0.0,
    anchor: np.ndarray | None = None,
) -> ModelParams:
    """One pass of mini-batch SGD (seeded shuffle, last partial batch kept).

    mu > 0 adds the proximal pull mu*(w - anchor) to every batch gradient."""
    arch = params.arch
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    perm = rng.permutation(n)
    Xp = np.ascontiguousarray(X[perm])
    yp = y[perm]
    _require_finite(Xp)
    w = params.w.copy()
    out = ModelParams(arch, w)
    views = out.views()
    gbuf = np.empty(w.size)
    for s in range(0, n, cfg.batch_size):
        Xb = Xp[s : s + cfg.batch_size]
        mask = make_dropout_mask(arch, Xb.shape[0], rng)
        _grad_core(arch, views, Xb, yp[s : s + cfg.batch_size], mask, gbuf, want_loss=False)
        if mu:
            gbuf += mu * (w - anchor)
        w -= cfg.learning_rate * gbuf
    return out


# ------------------------------------------------------------ weight files


def _arch_header(arch: ArchSpec) -> str:
    return (
        "flids-weights v1 kind=%s input=%d hidden=%s filters=%d kernel=%d pool=%d dropout=%s"
        % (
            arch.kind,
            arch.input_dim,
            ",".join(str(h) for h in arch.hidden),
            arch.conv_filters,
            arch.conv_kernel,
            arch.pool_width,
            repr(arch.dropout),
        )
    )


def save_params(params: ModelParams, path: str | Path) -> None:
    lines = [_arch_header(params.arch), "count=%d" % params.w.size]
    lines.extend(repr(float(v)) for v in params.w)
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path, arch: ArchSpec | None = None) -> ModelParams:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("flids-weights v1 "):
        raise ValueError("not a weights file: %s" % path)
    fields = dict(part.split("=", 1) for part in lines[0].split()[2:])
    parsed = ArchSpec(
        kind=fields["kind"],
        input_dim=int(fields["input"]),
        hidden=tuple(int(h) for h in fields["hidden"].split(",")),
        conv_filters=int(fields["filters"]),
        conv_kernel=int(fields["kernel"]),
        pool_width=int(fields["pool"]),
        dropout=float(fields["dropout"]),
    )
    if arch is not None and parsed != arch:
        raise ValueError("weights file architecture %r does not match %r" % (parsed, arch))
    count = int(lines[1].split("=", 1)[1])
    w = np.array([float(v) for v in lines[2 : 2 + count]], dtype=np.float64)
    if w.size != count or count != param_count(parsed):
        raise ValueError("weight count mismatch in %s" % path)
    return ModelParams(parsed, w)
