"""Tape-based reverse-mode autodiff on float64 numpy arrays.

Ops executed while a Tape is active (``with Tape() as tape:``) are recorded in
execution order, which is already a topological order, so ``backward`` is a
single reversed sweep.  Outside a tape, ``apply`` just computes values: that is
the inference path and it allocates no backward closures.

Every op checks its output for NaN/Inf and raises instead of training through
garbage.  All values are float64; integer data (token ids, gold indices, masks)
travels in ``attrs`` as plain ndarrays and never gets a gradient.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Tensor:
    """A value in the graph: ndarray plus an optional accumulated gradient."""

    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad=False, name=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.values.shape}{tag}, requires_grad={self.requires_grad})"


class TapeOp:
    __slots__ = ("kind", "inputs", "output", "backward")

    def __init__(self, kind, inputs, output, backward):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward = backward


_ACTIVE_TAPES = []


class Tape:
    """Ordered record of ops; recording order is the topological order."""

    def __init__(self):
        self.ops = []

    def __enter__(self):
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _ACTIVE_TAPES.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self.ops)


def _as_values(x):
    return x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def apply(kind, inputs, attrs=None):
    """Run one primitive op and record it on the active tape, if any."""
    if kind not in _OPS:
        raise ValueError(f"unknown op kind '{kind}' (known: {sorted(_OPS)})")
    attrs = attrs or {}
    values = [_as_values(x) for x in inputs]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out_values, backward = _OPS[kind](values, attrs)
    if not np.all(np.isfinite(out_values)):
        raise FloatingPointError(f"op '{kind}' produced non-finite values")
    out = Tensor(out_values)
    if _ACTIVE_TAPES:
        tensor_inputs = tuple(x for x in inputs if isinstance(x, Tensor))
        _ACTIVE_TAPES[-1].ops.append(TapeOp(kind, tensor_inputs, out, backward))
    return out


def backward(loss, tape):
    """Populate ``grad`` on every requires_grad leaf used by the tape.

    Gradients accumulate into existing ``grad`` arrays (call sites that want a
    fresh pass should clear them first, which the optimizer step does anyway).
    Leaves that appear on the tape but do not feed the loss end up with zero
    gradients rather than None.
    """
    if loss.shape != ():
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    produced = {id(op.output) for op in tape.ops}
    if id(loss) not in produced:
        raise ValueError("loss was not produced on the given tape")
    grads = {id(loss): np.ones(())}
    leaves = []
    seen_leaves = set()
    for op in tape.ops:
        for x in op.inputs:
            if x.requires_grad and id(x) not in seen_leaves and id(x) not in produced:
                seen_leaves.add(id(x))
                leaves.append(x)
    for op in reversed(tape.ops):
        g_out = grads.pop(id(op.output), None)
        if g_out is None:
            continue
        in_grads = op.backward(g_out)
        for x, g in zip(op.inputs, in_grads):
            if g is None:
                continue
            if id(x) in produced:
                acc = grads.get(id(x))
                grads[id(x)] = g if acc is None else acc + g
            elif x.requires_grad:
                if x.grad is None:
                    x.grad = np.zeros_like(x.values)
                x.grad = x.grad + g
    for x in leaves:
        if x.grad is None:
            x.grad = np.zeros_like(x.values)
        elif not np.all(np.isfinite(x.grad)):
            raise FloatingPointError(
                f"non-finite gradient for parameter {x.name or '<unnamed>'}"
            )


# ---------------------------------------------------------------------------
# primitive registry: each entry maps [input values], attrs -> (out, backward)
# where backward(d_out) returns one gradient (or None) per tensor input.


def _op_matmul(vals, attrs):
    a, b = vals
    ta = bool(attrs.get("transpose_a", False))
    tb = bool(attrs.get("transpose_b", False))
    ka = a.shape[0] if ta else a.shape[-1]
    kb = b.shape[-1] if tb else b.shape[0]
    if a.ndim != 2 or b.ndim != 2 or ka != kb:
        raise ValueError(
            f"matmul shape mismatch: {a.shape} x {b.shape}"
            f" (transpose_a={ta}, transpose_b={tb})"
        )
    aa = a.T if ta else a
    bb = b.T if tb else b
    out = aa @ bb

    def bwd(d):
        du = d @ bb.T
        dv = aa.T @ d
        return (du.T if ta else du), (dv.T if tb else dv)

    return out, bwd


def _op_bmm(vals, attrs):
    a, b = vals
    tb = bool(attrs.get("transpose_b", False))
    kb = b.shape[1] if tb else b.shape[2] if b.ndim == 3 else None
    ka = a.shape[2] if a.ndim == 3 else None
    inner_b = b.shape[2] if tb else b.shape[1]
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != inner_b:
        raise ValueError(
            f"bmm shape mismatch: {a.shape} x {b.shape} (transpose_b={tb})"
        )
    bb = b.swapaxes(1, 2) if tb else b
    out = a @ bb

    def bwd(d):
        if tb:
            return d @ b, d.swapaxes(1, 2) @ a
        return d @ b.swapaxes(1, 2), a.swapaxes(1, 2) @ d

    return out, bwd


def _op_add(vals, attrs):
    a, b = vals
    if a.shape == b.shape:
        bias = False
    elif b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1]:
        bias = True
    elif b.shape == ():
        bias = True
    else:
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = a + b

    def bwd(d):
        if not bias:
            return d, d
        axes = tuple(range(d.ndim - b.ndim))
        return d, d.sum(axis=axes) if axes else d

    return out, bwd


def _op_mul(vals, attrs):
    a, b = vals
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = a * b
    return out, lambda d: (d * b, d * a)


def _op_scale(vals, attrs):
    (a,) = vals
    c = float(attrs["c"])
    return a * c, lambda d: (d * c,)


def _op_tanh(vals, attrs):
    (a,) = vals
    out = np.tanh(a)
    return out, lambda d: (d * (1.0 - out * out),)


def _op_sigmoid(vals, attrs):
    (a,) = vals
    out = 1.0 / (1.0 + np.exp(-a))
    return out, lambda d: (d * out * (1.0 - out),)


def _op_relu(vals, attrs):
    (a,) = vals
    keep = a > 0.0
    return a * keep, lambda d: (d * keep,)


def _op_log(vals, attrs):
    (a,) = vals
    return np.log(a), lambda d: (d / a,)


def _op_concat(vals, attrs):
    axis = int(attrs.get("axis", 0))
    base = list(vals[0].shape)
    for v in vals[1:]:
        other = list(v.shape)
        if len(other) != len(base) or any(
            o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis % len(base)
        ):
            raise ValueError(
                f"concat shape mismatch along axis {axis}: "
                f"{[v.shape for v in vals]}"
            )
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]

    def bwd(d):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(d, splits, axis=axis))

    return out, bwd


def _op_slice(vals, attrs):
    (a,) = vals
    axis = int(attrs["axis"])
    start = int(attrs["start"])
    stop = int(attrs["stop"])
    if not (0 <= start <= stop <= a.shape[axis]):
        raise ValueError(
            f"slice [{start}:{stop}] out of range for axis {axis} of shape {a.shape}"
        )
    index = tuple(
        slice(start, stop) if ax == axis else slice(None) for ax in range(a.ndim)
    )
    out = a[index]

    def bwd(d):
        g = np.zeros_like(a)
        g[index] = d
        return (g,)

    return out, bwd


def _op_reshape(vals, attrs):
    (a,) = vals
    shape = tuple(int(s) for s in attrs["shape"])
    if int(np.prod(shape, dtype=np.int64)) != a.size:
        raise ValueError(f"cannot reshape {a.shape} to {shape}")
    return a.reshape(shape), lambda d: (d.reshape(a.shape),)


def _op_softmax(vals, attrs):
    (a,) = vals
    if a.ndim != 2:
        raise ValueError(f"softmax expects a 2-d input, got shape {a.shape}")
    mask = attrs.get("mask")
    if mask is None:
        z = a - a.max(axis=1, keepdims=True)
        e = np.exp(z)
    else:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != a.shape:
            raise ValueError(f"softmax mask shape {mask.shape} != input {a.shape}")
        row_live = mask.sum(axis=1)
        if np.any(row_live == 0.0):
            raise ValueError("softmax row with every position masked out")
        neg = np.where(mask > 0.0, 0.0, -np.inf)
        z = a + neg
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z) * mask
    s = e.sum(axis=1, keepdims=True)
    p = e / s

    def bwd(d):
        inner = (d * p).sum(axis=1, keepdims=True)
        return (p * (d - inner),)

    return p, bwd


def _op_pick(vals, attrs):
    (a,) = vals
    idx = np.asarray(attrs["index"], dtype=np.int64)
    if a.ndim != 2 or idx.shape != (a.shape[0],):
        raise ValueError(f"pick expects (n, m) input and (n,) index, got {a.shape} / {idx.shape}")
    if idx.min(initial=0) < 0 or (a.shape[0] and idx.max() >= a.shape[1]):
        raise ValueError(f"pick index out of range for {a.shape[1]} columns")
    rows = np.arange(a.shape[0])
    out = a[rows, idx]

    def bwd(d):
        g = np.zeros_like(a)
        g[rows, idx] = d
        return (g,)

    return out, bwd


def _op_wsum(vals, attrs):
    (a,) = vals
    w = np.asarray(attrs["weights"], dtype=np.float64)
    if w.shape != a.shape:
        raise ValueError(f"wsum weights shape {w.shape} != input {a.shape}")
    out = np.asarray((a * w).sum())
    return out, lambda d: (d * w,)


def _op_embedding(vals, attrs):
    (e,) = vals
    idx = np.asarray(attrs["indices"], dtype=np.int64)
    if e.ndim != 2:
        raise ValueError(f"embedding table must be 2-d, got shape {e.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= e.shape[0]):
        raise ValueError(
            f"embedding index out of range for table with {e.shape[0]} rows"
        )
    out = e[idx]

    def bwd(d):
        g = np.zeros_like(e)
        kernels.scatter_add_rows(g, idx.reshape(-1), d.reshape(-1, e.shape[1]))
        return (g,)

    return out, bwd


def _op_dropout(vals, attrs):
    (a,) = vals
    keep = float(attrs["keep"])
    if not 0.0 < keep <= 1.0:
        raise ValueError(f"dropout keep probability must be in (0, 1], got {keep}")
    if keep == 1.0:
        return a.copy(), lambda d: (d,)
    rng = np.random.default_rng(int(attrs["seed"]))
    m = (rng.random(a.shape) < keep).astype(np.float64) / keep
    return a * m, lambda d: (d * m,)


def _op_lstm_seq(vals, attrs):
    x, wx, wh, b = vals
    mask = np.asarray(attrs["mask"], dtype=np.float64)
    reverse = bool(attrs.get("reverse", False))
    if x.ndim != 3:
        raise ValueError(f"lstm_seq input must be (B, T, D), got shape {x.shape}")
    hdim = wh.shape[0]
    if wx.shape != (x.shape[2], 4 * hdim) or wh.shape != (hdim, 4 * hdim) or b.shape != (4 * hdim,):
        raise ValueError(
            f"lstm_seq weight shapes {wx.shape}/{wh.shape}/{b.shape} do not fit"
            f" input {x.shape}"
        )
    if mask.shape != x.shape[:2]:
        raise ValueError(f"lstm_seq mask shape {mask.shape} != {x.shape[:2]}")
    hseq, cseq, gseq = kernels.lstm_seq_forward(x, mask, wx, wh, b, reverse)

    def bwd(d):
        return kernels.lstm_seq_backward(d, x, mask, wx, wh, hseq, cseq, gseq, reverse)

    return hseq, bwd


_OPS = {
    "matmul": _op_matmul,
    "bmm": _op_bmm,
    "add": _op_add,
    "mul": _op_mul,
    "scale": _op_scale,
    "tanh": _op_tanh,
    "sigmoid": _op_sigmoid,
    "relu": _op_relu,
    "log": _op_log,
    "concat": _op_concat,
    "slice": _op_slice,
    "reshape": _op_reshape,
    "softmax": _op_softmax,
    "pick": _op_pick,
    "wsum": _op_wsum,
    "embedding": _op_embedding,
    "dropout": _op_dropout,
    "lstm_seq": _op_lstm_seq,
}

OP_KINDS = tuple(sorted(_OPS))


# thin call helpers so model code reads as math rather than apply() soup

def matmul(a, b, transpose_a=False, transpose_b=False):
    return apply("matmul", [a, b], {"transpose_a": transpose_a, "transpose_b": transpose_b})


def bmm(a, b, transpose_b=False):
    return apply("bmm", [a, b], {"transpose_b": transpose_b})


def add(a, b):
    return apply("add", [a, b])


def mul(a, b):
    return apply("mul", [a, b])


def scale(a, c):
    return apply("scale", [a], {"c": c})


def tanh(a):
    return apply("tanh", [a])


def sigmoid(a):
    return apply("sigmoid", [a])


def relu(a):
    return apply("relu", [a])


def log(a):
    return apply("log", [a])


def concat(xs, axis=0):
    return apply("concat", list(xs), {"axis": axis})


def slice_axis(a, axis, start, stop):
    return apply("slice", [a], {"axis": axis, "start": start, "stop": stop})


def reshape(a, shape):
    return apply("reshape", [a], {"shape": shape})


def softmax(a, mask=None):
    return apply("softmax", [a], {} if mask is None else {"mask": mask})


def pick(a, index):
    return apply("pick", [a], {"index": index})


def wsum(a, weights):
    return apply("wsum", [a], {"weights": weights})


def embedding(table, indices):
    return apply("embedding", [table], {"indices": indices})


def dropout(a, keep, seed):
    return apply("dropout", [a], {"keep": keep, "seed": seed})


def lstm_seq(x, wx, wh, b, mask, reverse=False):
    return apply("lstm_seq", [x, wx, wh, b], {"mask": mask, "reverse": reverse})
