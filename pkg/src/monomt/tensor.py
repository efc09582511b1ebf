"""Reverse-mode automatic differentiation over dense numpy arrays.

Each operation produces a new Tensor linked to its inputs through a
backward closure; ``backward(loss)`` walks the graph once in reverse
topological order and accumulates gradients into the leaves. The
operator set is exactly what a recurrent attentional translator needs.
Values are float32 during training by convention; gradient checking
builds float64 graphs. Graphs live for one mini-batch and die with
their tensors.

Deliberately absent: GPU paths, general broadcasting (only the
row-bias case of ``add`` and the documented fused ops), operator
fusion beyond those, higher-order derivatives.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense n-dimensional value with an optional gradient slot.

    ``data`` is owned by the tensor and must not be mutated after
    creation (parameter updates by the optimizer happen between
    graphs, which is the one sanctioned exception). ``grad`` is
    allocated lazily during backward and only retained on leaves.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def backward(self):
        backward(self)

    # Operator sugar; the free functions are the contract surface.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return affine(self, -1.0, 0.0)


class Parameter(Tensor):
    """A named leaf tensor. Non-trainable parameters (fixed encoder
    embeddings) take part in forward passes but never receive
    gradients and must stay bit-identical across training."""

    __slots__ = ("name", "trainable")

    def __init__(self, data: np.ndarray, name: str, trainable: bool = True):
        super().__init__(np.asarray(data), requires_grad=trainable)
        self.name = name
        self.trainable = trainable


def tensor(values, requires_grad: bool = False, dtype=None) -> Tensor:
    """Wrap array-like ``values`` in a leaf Tensor (float32 default)."""
    data = np.asarray(values, dtype=dtype)
    if dtype is None and data.dtype not in (np.float32, np.float64):
        data = data.astype(np.float32)
    return Tensor(data, requires_grad=requires_grad)


def _accum(t: Tensor, g: np.ndarray, owned: bool):
    """Add ``g`` into t.grad. ``owned`` marks freshly allocated arrays
    that may be adopted without copying; shared arrays (pass-through
    gradients, views) are copied on first assignment so later in-place
    accumulation cannot corrupt a sibling's gradient."""
    if t.grad is None:
        t.grad = g if owned else g.copy()
    else:
        t.grad += g


def _attach(out: Tensor, parents: Sequence[Tensor], bwd: Callable[[np.ndarray], None]) -> Tensor:
    out.requires_grad = True
    out._parents = tuple(p for p in parents if p.requires_grad)
    out._backward = bwd
    return out


def _wants_grad(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors)


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into every reachable grad-requiring
    leaf. Contributions from multiple graph paths add. Raises
    ContractError unless ``loss`` is scalar."""
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
            node.grad = None  # only leaves keep gradients


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a (1, n) bias row added to
    every row of a (m, n) left operand."""
    bias = b.data.ndim == 2 and b.data.shape[0] == 1 and a.data.ndim == 2 \
        and a.data.shape[1] == b.data.shape[1] and a.data.shape != b.data.shape
    if a.data.shape != b.data.shape and not bias:
        raise ShapeError(f"add: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data + b.data)
    if _wants_grad(a, b):
        def bwd(g, a=a, b=b, bias=bias):
            if a.requires_grad:
                _accum(a, g, owned=False)
            if b.requires_grad:
                if bias:
                    _accum(b, g.sum(axis=0, keepdims=True), owned=True)
                else:
                    _accum(b, g, owned=False)
        _attach(out, (a, b), bwd)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference of equal-shaped tensors."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data - b.data)
    if _wants_grad(a, b):
        def bwd(g, a=a, b=b):
            if a.requires_grad:
                _accum(a, g, owned=False)
            if b.requires_grad:
                _accum(b, -g, owned=True)
        _attach(out, (a, b), bwd)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of equal-shaped tensors."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data * b.data)
    if _wants_grad(a, b):
        def bwd(g, a=a, b=b):
            if a.requires_grad:
                _accum(a, g * b.data, owned=True)
            if b.requires_grad:
                _accum(b, g * a.data, owned=True)
        _attach(out, (a, b), bwd)
    return out


def affine(x: Tensor, scale: float, shift: float) -> Tensor:
    """scale * x + shift with python-scalar coefficients."""
    out = Tensor(x.data * x.data.dtype.type(scale) + x.data.dtype.type(shift))
    if _wants_grad(x):
        def bwd(g, x=x, scale=scale):
            _accum(x, g * x.data.dtype.type(scale), owned=True)
        _attach(out, (x,), bwd)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-D tensors; dA = g·Bᵀ, dB = Aᵀ·g."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data @ b.data)
    if _wants_grad(a, b):
        def bwd(g, a=a, b=b):
            if a.requires_grad:
                _accum(a, g @ b.data.T, owned=True)
            if b.requires_grad:
                _accum(b, a.data.T @ g, owned=True)
        _attach(out, (a, b), bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries as a scalar tensor (64-bit accumulation)."""
    out = Tensor(np.asarray(x.data.sum(dtype=np.float64), dtype=x.data.dtype))
    if _wants_grad(x):
        def bwd(g, x=x):
            _accum(x, np.full(x.data.shape, g.item(), dtype=x.data.dtype), owned=True)
        _attach(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# activations


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    if _wants_grad(x):
        def bwd(g, x=x, y=out.data):
            _accum(x, g * (1.0 - y * y), owned=True)
        _attach(out, (x,), bwd)
    return out


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, computed without overflow on either tail."""
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.data.dtype)
    out = Tensor(y)
    if _wants_grad(x):
        def bwd(g, x=x, y=y):
            _accum(x, g * (y * (1.0 - y)), owned=True)
        _attach(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# gated/masked mixing (fused so the recurrent inner loop stays short)


def gate_mix(z: Tensor, a: Tensor, b: Tensor) -> Tensor:
    """z⊙a + (1−z)⊙b, all equal shapes (the GRU output blend)."""
    if not (z.data.shape == a.data.shape == b.data.shape):
        raise ShapeError(
            f"gate_mix: incompatible shapes {z.data.shape}, {a.data.shape}, {b.data.shape}")
    out = Tensor(z.data * a.data + (1.0 - z.data) * b.data)
    if _wants_grad(z, a, b):
        def bwd(g, z=z, a=a, b=b):
            if z.requires_grad:
                _accum(z, g * (a.data - b.data), owned=True)
            if a.requires_grad:
                _accum(a, g * z.data, owned=True)
            if b.requires_grad:
                _accum(b, g * (1.0 - z.data), owned=True)
        _attach(out, (z, a, b), bwd)
    return out


def mask_mix(new: Tensor, prev: Tensor, keep: np.ndarray) -> Tensor:
    """keep⊙new + (1−keep)⊙prev with a constant (b, 1) keep column;
    carries recurrent state through padded timesteps unchanged."""
    if new.data.shape != prev.data.shape:
        raise ShapeError(f"mask_mix: incompatible shapes {new.data.shape} and {prev.data.shape}")
    if keep.shape != (new.data.shape[0], 1):
        raise ShapeError(f"mask_mix: keep column {keep.shape} does not match batch {new.data.shape}")
    out = Tensor(keep * new.data + (1.0 - keep) * prev.data)
    if _wants_grad(new, prev):
        def bwd(g, new=new, prev=prev, keep=keep):
            if new.requires_grad:
                _accum(new, g * keep, owned=True)
            if prev.requires_grad:
                _accum(prev, g * (1.0 - keep), owned=True)
        _attach(out, (new, prev), bwd)
    return out


# ---------------------------------------------------------------------------
# shape plumbing


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along the feature axis (columns)."""
    rows = tensors[0].data.shape[0]
    for t in tensors:
        if t.data.ndim != 2 or t.data.shape[0] != rows:
            raise ShapeError(f"concat_cols: row mismatch {[t.data.shape for t in tensors]}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=1))
    if _wants_grad(*tensors):
        widths = [t.data.shape[1] for t in tensors]
        def bwd(g, tensors=tuple(tensors), widths=widths):
            offset = 0
            for t, w in zip(tensors, widths):
                if t.requires_grad:
                    _accum(t, g[:, offset:offset + w], owned=False)
                offset += w
        _attach(out, tensors, bwd)
    return out


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along the row axis."""
    cols = tensors[0].data.shape[1]
    for t in tensors:
        if t.data.ndim != 2 or t.data.shape[1] != cols:
            raise ShapeError(f"concat_rows: column mismatch {[t.data.shape for t in tensors]}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=0))
    if _wants_grad(*tensors):
        heights = [t.data.shape[0] for t in tensors]
        def bwd(g, tensors=tuple(tensors), heights=heights):
            offset = 0
            for t, h in zip(tensors, heights):
                if t.requires_grad:
                    _accum(t, g[offset:offset + h, :], owned=False)
                offset += h
        _attach(out, tensors, bwd)
    return out


def seq_stack(steps: Sequence[Tensor]) -> Tensor:
    """Stack T tensors of shape (b, d) into one (b, T, d) sequence."""
    shape = steps[0].data.shape
    for t in steps:
        if t.data.shape != shape:
            raise ShapeError(f"seq_stack: mixed step shapes {[t.data.shape for t in steps]}")
    out = Tensor(np.stack([t.data for t in steps], axis=1))
    if _wants_grad(*steps):
        def bwd(g, steps=tuple(steps)):
            for i, t in enumerate(steps):
                if t.requires_grad:
                    _accum(t, g[:, i, :], owned=False)
        _attach(out, steps, bwd)
    return out


def seq_scores(query: Tensor, seq: Tensor) -> Tensor:
    """Per-position dot products: (b, d) × (b, T, d) → (b, T)."""
    if query.data.ndim != 2 or seq.data.ndim != 3 or \
            query.data.shape[0] != seq.data.shape[0] or query.data.shape[1] != seq.data.shape[2]:
        raise ShapeError(f"seq_scores: incompatible shapes {query.data.shape} and {seq.data.shape}")
    out = Tensor(np.einsum("bd,btd->bt", query.data, seq.data))
    if _wants_grad(query, seq):
        def bwd(g, query=query, seq=seq):
            if query.requires_grad:
                _accum(query, np.einsum("bt,btd->bd", g, seq.data), owned=True)
            if seq.requires_grad:
                _accum(seq, g[:, :, None] * query.data[:, None, :], owned=True)
        _attach(out, (query, seq), bwd)
    return out


def seq_mix(weights: Tensor, seq: Tensor) -> Tensor:
    """Weighted sum over positions: (b, T) × (b, T, d) → (b, d)."""
    if weights.data.ndim != 2 or seq.data.ndim != 3 or weights.data.shape != seq.data.shape[:2]:
        raise ShapeError(f"seq_mix: incompatible shapes {weights.data.shape} and {seq.data.shape}")
    out = Tensor(np.einsum("bt,btd->bd", weights.data, seq.data))
    if _wants_grad(weights, seq):
        def bwd(g, weights=weights, seq=seq):
            if weights.requires_grad:
                _accum(weights, np.einsum("bd,btd->bt", g, seq.data), owned=True)
            if seq.requires_grad:
                _accum(seq, weights.data[:, :, None] * g[:, None, :], owned=True)
        _attach(out, (weights, seq), bwd)
    return out


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of a (V, d) table by integer id: output (len(ids), d).
    Gradients scatter-add back into the table rows."""
    ids = np.asarray(ids)
    if ids.min(initial=0) < 0 or ids.max(initial=-1) >= table.data.shape[0]:
        raise IndexError(
            f"gather_rows: ids outside [0, {table.data.shape[0]}): "
            f"[{ids.min()}, {ids.max()}]")
    out = Tensor(table.data[ids])
    if _wants_grad(table):
        def bwd(g, table=table, ids=ids):
            buf = np.zeros_like(table.data)
            np.add.at(buf, ids, g)
            _accum(table, buf, owned=True)
        _attach(out, (table,), bwd)
    return out


# ---------------------------------------------------------------------------
# stochastic regularization


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability p and scale
    survivors by 1/(1−p) so expectations match inference, which needs
    no rescaling. Callers skip the call entirely in evaluation mode."""
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return x
    keep = 1.0 - p
    mask = (rng.random(x.data.shape) < keep).astype(x.data.dtype)
    mask /= x.data.dtype.type(keep)
    out = Tensor(x.data * mask)
    if _wants_grad(x):
        def bwd(g, x=x, mask=mask):
            _accum(x, g * mask, owned=True)
        _attach(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# rowwise softmax family


def _check_finite(x: np.ndarray, op: str):
    if np.isnan(x).any():
        raise NumericError(f"{op}: input contains NaN")


def softmax_rows(x: Tensor) -> Tensor:
    """Rowwise softmax with per-row max subtraction; rows sum to 1
    within 1e-6 (sums accumulate in 64-bit)."""
    if x.data.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D tensor, got {x.data.shape}")
    _check_finite(x.data, "softmax_rows")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = (e / e.sum(axis=1, keepdims=True, dtype=np.float64)).astype(x.data.dtype)
    out = Tensor(y)
    if _wants_grad(x):
        def bwd(g, x=x, y=y):
            inner = (g * y).sum(axis=1, keepdims=True)
            _accum(x, y * (g - inner), owned=True)
        _attach(out, (x,), bwd)
    return out


def masked_softmax_rows(x: Tensor, mask: np.ndarray) -> Tensor:
    """Rowwise softmax over the positions where ``mask`` is true;
    masked positions get exactly zero weight. A fully masked row is a
    contract violation."""
    if x.data.ndim != 2 or mask.shape != x.data.shape:
        raise ShapeError(f"masked_softmax_rows: mask {mask.shape} does not match {x.data.shape}")
    if not mask.any(axis=1).all():
        raise ContractError("masked_softmax_rows: a row has no valid positions")
    neg = np.where(mask, x.data, -np.inf)
    shifted = x.data - neg.max(axis=1, keepdims=True)
    e = np.exp(shifted) * mask
    y = (e / e.sum(axis=1, keepdims=True, dtype=np.float64)).astype(x.data.dtype)
    out = Tensor(y)
    if _wants_grad(x):
        def bwd(g, x=x, y=y):
            inner = (g * y).sum(axis=1, keepdims=True)
            _accum(x, y * (g - inner), owned=True)
        _attach(out, (x,), bwd)
    return out


def log_softmax_rows(data: np.ndarray) -> np.ndarray:
    """Plain-array stable log-softmax, shared by decoding and scoring
    paths that never need gradients."""
    shifted = data - data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True, dtype=np.float64))
    return shifted - lse.astype(data.dtype)


def cross_entropy_from_logits(logits: Tensor, targets, mask) -> Tensor:
    """Mean negative log-softmax probability of ``targets`` over the
    unmasked rows of (n, V) ``logits``. Padding rows are excluded from
    the mean; out-of-range target ids raise IndexError."""
    targets = np.asarray(targets, dtype=np.int64)
    maskf = np.asarray(mask, dtype=logits.data.dtype)
    n, vocab = logits.data.shape
    if targets.shape != (n,) or maskf.shape != (n,):
        raise ShapeError(
            f"cross_entropy: targets {targets.shape} / mask {maskf.shape} "
            f"do not match logits {logits.data.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise IndexError(
            f"cross_entropy: target ids outside [0, {vocab}): [{targets.min()}, {targets.max()}]")
    n_valid = float(maskf.sum())
    if n_valid == 0:
        raise ContractError("cross_entropy: every position is masked")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, dtype=np.float64)).astype(logits.data.dtype)
    nll = lse - shifted[np.arange(n), targets]
    loss = float((nll * maskf).sum(dtype=np.float64) / n_valid)
    out = Tensor(np.asarray(loss, dtype=logits.data.dtype))
    if _wants_grad(logits):
        def bwd(g, logits=logits, targets=targets, maskf=maskf,
                shifted=shifted, lse=lse, n=n, n_valid=n_valid):
            soft = np.exp(shifted - lse[:, None])
            soft[np.arange(n), targets] -= 1.0
            soft *= (g.item() / n_valid) * maskf[:, None]
            _accum(logits, soft, owned=True)
        _attach(out, (logits,), bwd)
    return out


# ---------------------------------------------------------------------------
# verification oracle


def finite_difference_check(f: Callable[[Tensor], Tensor], x: Tensor,
                            eps: float = 1e-5) -> float:
    """Max over coordinates of |analytic − central difference| /
    max(1, |analytic|) for a scalar-valued ``f`` at ``x``. Runs in
    float64 regardless of the input dtype."""
    if not 1e-6 <= eps <= 1e-3:
        raise ContractError(f"finite_difference_check: eps {eps} outside [1e-6, 1e-3]")
    base = np.asarray(x.data, dtype=np.float64)
    probe = Tensor(base.copy(), requires_grad=True)
    loss = f(probe)
    if loss.data.size != 1:
        raise ContractError(f"finite_difference_check: f returned shape {loss.data.shape}")
    backward(loss)
    analytic = probe.grad if probe.grad is not None else np.zeros_like(base)
    numeric = np.zeros_like(base)
    flat = base.reshape(-1)
    num_flat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            up = float(f(Tensor(base)).data)
            flat[i] = saved - eps
            down = float(f(Tensor(base)).data)
            flat[i] = saved
            num_flat[i] = (up - down) / (2.0 * eps)
    denom = np.maximum(1.0, np.abs(analytic))
    return float((np.abs(analytic - numeric) / denom).max(initial=0.0))
