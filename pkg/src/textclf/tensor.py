"""Dense float64 tensors with tape-based reverse-mode differentiation.

The tape is a Wengert list: while a `Tape` is active, every differentiable
op appends one node, and `Tape.backward` replays the nodes in exact reverse
execution order, accumulating (never overwriting) gradients.  A tape and the
tensors created under it belong to one thread; parameter tensors may be
shared across threads once nothing records on them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NumericError",
    "Tensor",
    "Tape",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "affine",
    "sigmoid",
    "tanh",
    "relu",
    "softmax",
    "cross_entropy",
    "row",
    "concat",
    "concat_cols",
    "concat_rows",
    "stack_rows",
    "max_over_time",
    "total",
    "embedding_lookup",
    "fused_op",
    "gradient_check",
]

CE_PROB_FLOOR = 1e-12  # floor inside cross_entropy: loss = -ln(p + floor)

_TAPES: list["Tape"] = []


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf where finite values are required."""


class Tensor:
    """Dense float64 array with an optional same-shape gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor values must be finite")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        # internal fast path: ops already produce float64 and finiteness is
        # checked at loss/optimizer boundaries, not per op
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = requires_grad
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))


class Tape:
    """Ordered record of executed ops, traversed in reverse for gradients."""

    def __init__(self):
        self._nodes: list = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.pop()

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor, seed: float = 1.0) -> None:
        if loss.data.ndim != 0:
            raise ValueError("backward needs a scalar loss")
        loss.accumulate(np.asarray(seed, dtype=np.float64))
        for node in reversed(self._nodes):
            node()


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def fused_op(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward) -> Tensor:
    """Register one differentiable op.

    ``backward(out_grad)`` must *add* into the inputs' grads; it runs only
    for inputs recorded under an active tape.
    """
    rg = bool(_TAPES) and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(np.asarray(out_data, dtype=np.float64), rg)
    if rg:
        def node():
            if out.grad is not None:
                backward(out.grad)
        _TAPES[-1]._nodes.append(node)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))
    return fused_op(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(-_unbroadcast(g, b.shape))
    return fused_op(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))
    return fused_op(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(-g)
    return fused_op(-a.data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    out = ad @ bd

    def backward(g):
        if ad.ndim == 1 and bd.ndim == 2:        # (k,) @ (k,m) -> (m,)
            if a.requires_grad:
                a.accumulate(bd @ g)
            if b.requires_grad:
                b.accumulate(np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 1:      # (n,k) @ (k,) -> (n,)
            if a.requires_grad:
                a.accumulate(np.outer(g, bd))
            if b.requires_grad:
                b.accumulate(g @ ad)
        else:                                    # (n,k) @ (k,m) -> (n,m)
            if a.requires_grad:
                a.accumulate(g @ bd.T)
            if b.requires_grad:
                b.accumulate(ad.T @ g)
    return fused_op(out, (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x either (n,k) or (k,)."""
    xd = x.data
    out = xd @ w.data + b.data

    def backward(g):
        if xd.ndim == 1:
            if x.requires_grad:
                x.accumulate(w.data @ g)
            if w.requires_grad:
                w.accumulate(np.outer(xd, g))
            if b.requires_grad:
                b.accumulate(g)
        else:
            if x.requires_grad:
                x.accumulate(g @ w.data.T)
            if w.requires_grad:
                w.accumulate(xd.T @ g)
            if b.requires_grad:
                b.accumulate(g.sum(axis=0))
    return fused_op(out, (x, w, b), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * out * (1.0 - out))
    return fused_op(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * (1.0 - out * out))
    return fused_op(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * (x.data > 0.0))
    return fused_op(out, (x,), backward)


def softmax(v: Tensor) -> Tensor:
    """Stable softmax of a 1-D vector (max-subtracted before exponentiation)."""
    if v.data.ndim != 1 or v.data.size == 0:
        raise ValueError("softmax needs a non-empty 1-D vector")
    shifted = v.data - v.data.max()
    e = np.exp(shifted)
    p = e / e.sum()

    def backward(g):
        if v.requires_grad:
            v.accumulate(p * (g - float(g @ p)))
    return fused_op(p, (v,), backward)


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """-ln(probs[label] + floor) for a probability vector."""
    pd = probs.data
    if pd.ndim != 1:
        raise ValueError("cross_entropy needs a 1-D probability vector")
    if abs(float(pd.sum()) - 1.0) > 1e-6:
        raise ValueError("probabilities must sum to 1")
    if not 0 <= label < pd.size:
        raise ValueError(f"label {label} out of range for {pd.size} classes")
    pl = float(pd[label]) + CE_PROB_FLOOR
    out = np.asarray(-np.log(pl))

    def backward(g):
        if probs.requires_grad:
            gv = np.zeros_like(pd)
            gv[label] = -float(g) / pl
            probs.accumulate(gv)
    return fused_op(out, (probs,), backward)


def row(x: Tensor, i: int) -> Tensor:
    out = x.data[i].copy()

    def backward(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[i] += g
    return fused_op(out, (x,), backward)


def concat(parts: list[Tensor]) -> Tensor:
    out = np.concatenate([p.data for p in parts])

    def backward(g):
        ofs = 0
        for p in parts:
            n = p.data.size
            if p.requires_grad:
                p.accumulate(g[ofs:ofs + n])
            ofs += n
    return fused_op(out, tuple(parts), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g[:, :na])
        if b.requires_grad:
            b.accumulate(g[:, na:])
    return fused_op(out, (a, b), backward)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[0]
    out = np.concatenate([a.data, b.data], axis=0)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g[:na])
        if b.requires_grad:
            b.accumulate(g[na:])
    return fused_op(out, (a, b), backward)


def stack_rows(rows: list[Tensor]) -> Tensor:
    out = np.stack([r.data for r in rows])

    def backward(g):
        for i, r in enumerate(rows):
            if r.requires_grad:
                r.accumulate(g[i])
    return fused_op(out, tuple(rows), backward)


def max_over_time(x: Tensor) -> tuple[Tensor, np.ndarray]:
    """Column-wise max of a (T, J) matrix; also the argmax position per column.

    Ties go to the earliest time step; gradient flows only to the argmax cell.
    """
    if x.data.ndim != 2 or x.data.shape[0] < 1:
        raise ValueError("max_over_time needs a non-empty (T, J) matrix")
    arg = x.data.argmax(axis=0)
    cols = np.arange(x.data.shape[1])
    out = x.data[arg, cols]

    def backward(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, (arg, cols), g)
    return fused_op(out, (x,), backward), arg


def total(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def backward(g):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g)))
    return fused_op(out, (x,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)
    out = table.data[ids]

    def backward(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids, g)
    return fused_op(out, (table,), backward)


def gradient_check(loss_fn, params, eps: float = 1e-5,
                   max_coords: int = 200, seed: int = 0) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn(params)`` must deterministically rebuild the graph and return
    the scalar loss.  At most ``max_coords`` randomly sampled coordinates are
    probed per tensor; the error at a coordinate is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn(params)
        if not np.isfinite(loss.data):
            raise NumericError("loss is not finite")
        tape.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        n = flat.size
        if n <= max_coords:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            lp = float(loss_fn(params).data)
            flat[i] = orig - eps
            lm = float(loss_fn(params).data)
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError("loss is not finite during probing")
            numeric = (lp - lm) / (2.0 * eps)
            err = abs(float(gflat[i]) - numeric) / max(1.0, abs(float(gflat[i])), abs(numeric))
            if err > worst:
                worst = err
    return worst
