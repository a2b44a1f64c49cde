"""Reverse-mode automatic differentiation on dense float64 arrays.

A ``Tape`` records every differentiable operation in append order; ``backward``
walks the record in strict reverse order composing vector-Jacobian products.
Every VJP is itself written in terms of the ops below, so running backward with
``higher_order=True`` records the gradient computation on the same tape and the
returned gradients can be differentiated again (gradient-of-gradient through
unrolled optimization loops).

Only what the rest of the package needs is implemented: 2-D matmul, elementwise
arithmetic with numpy broadcasting, a few nonlinearities, reductions, and the
two loss heads (Huber, masked cross-entropy). No convolutions, no GPU.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "NumericsError",
    "ShapeError",
    "tensor",
    "param",
    "set_finite_checks",
    "no_recording",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "broadcast_to",
    "concat",
    "narrow",
    "sum_axis",
    "sum_all",
    "mean",
    "exp",
    "log",
    "sqrt",
    "abs_",
    "relu",
    "clip_const",
    "sigmoid",
    "swish",
    "softmax",
    "gather_pairs",
    "scatter_pairs",
    "huber",
    "cross_entropy",
    "grad_check",
    "GradCheckReport",
]


class NumericsError(RuntimeError):
    """An operation produced NaN/Inf. Raised eagerly, never propagated silently."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


_FINITE_CHECKS = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle the per-op NaN/Inf guard. Returns the previous setting."""
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)
    return prev


class Tensor:
    """Dense float64 array, optionally tracked on the active tape."""

    __slots__ = ("data", "requires_grad", "_tape", "_node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._tape: Optional["Tape"] = None
        self._node = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def node_id(self) -> Optional[int]:
        return self._node if self._node >= 0 else None

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Constant copy cut off from any tape."""
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar; every overload routes through the traced ops below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        if not isinstance(p, int) or p < 1:
            raise ValueError("only positive integer powers are supported")
        out = self
        for _ in range(p - 1):
            out = mul(out, self)
        return out


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def param(data) -> Tensor:
    """Leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    """One tape entry: op kind, tracked parents, and the VJP closure."""

    __slots__ = ("op", "parents", "vjp", "shape")

    def __init__(self, op, parents, vjp, shape):
        self.op = op
        # (input_slot, parent_node_id) for each grad-requiring input
        self.parents = parents
        self.vjp = vjp
        self.shape = shape


class Tape:
    """Append-only operation record; topological order equals append order."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.recording = True
        self._leaf_ids: dict[int, int] = {}  # id(tensor) -> node id
        self._leaves: list[tuple[int, Tensor]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self):
        return len(self.nodes)

    def _add(self, node: _Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def _leaf_node(self, t: Tensor) -> int:
        """Node id for ``t`` on this tape, registering it as a leaf if new."""
        if t._tape is self and t._node >= 0:
            return t._node
        nid = self._leaf_ids.get(id(t))
        if nid is None:
            nid = self._add(_Node("leaf", (), None, t.data.shape))
            self._leaf_ids[id(t)] = nid
            self._leaves.append((nid, t))
        t._tape = self
        t._node = nid
        return nid


_TAPE_STACK: list[Tape] = []


def _active() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class no_recording:
    """Context manager: run ops without recording them (plain numpy math)."""

    def __enter__(self):
        tape = _active()
        self._tape = tape
        self._prev = tape.recording if tape is not None else None
        if tape is not None:
            tape.recording = False
        return self

    def __exit__(self, *exc):
        if self._tape is not None:
            self._tape.recording = self._prev
        return False


class _reopen:
    """Re-activate ``tape`` with an explicit recording flag (used by backward)."""

    def __init__(self, tape: Tape, recording: bool):
        self._tape = tape
        self._recording = recording

    def __enter__(self):
        self._prev = self._tape.recording
        self._tape.recording = self._recording
        _TAPE_STACK.append(self._tape)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self._tape
        self._tape.recording = self._prev
        return False


def _apply(op: str, data: np.ndarray, inputs: Sequence[Tensor], make_vjp) -> Tensor:
    """Wrap a computed forward value, recording it when the tape is live.

    ``make_vjp(needs)`` must return ``vjp(grad) -> tuple`` aligned with
    ``inputs`` (None at slots where ``needs`` is False).
    """
    data = np.asarray(data, dtype=np.float64)
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise NumericsError(f"op '{op}' produced non-finite values (shape {data.shape})")
    rg = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=rg)
    tape = _active()
    if tape is None or not tape.recording or not rg:
        return out
    needs = tuple(t.requires_grad for t in inputs)
    parents = tuple((i, tape._leaf_node(t)) for i, t in enumerate(inputs) if needs[i])
    out._tape = tape
    out._node = tape._add(_Node(op, parents, make_vjp(needs), data.shape))
    return out


def _sum_to(g: Tensor, shape) -> Tensor:
    """Reduce a broadcasted gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = len(g.shape) - len(shape)
    for _ in range(extra):
        g = sum_axis(g, 0, keepdims=False)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = sum_axis(g, i, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def make_vjp(needs):
        def vjp(g):
            return (
                _sum_to(g, a.shape) if needs[0] else None,
                _sum_to(g, b.shape) if needs[1] else None,
            )

        return vjp

    return _apply("add", a.data + b.data, (a, b), make_vjp)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def make_vjp(needs):
        def vjp(g):
            return (
                _sum_to(g, a.shape) if needs[0] else None,
                _sum_to(neg(g), b.shape) if needs[1] else None,
            )

        return vjp

    return _apply("sub", a.data - b.data, (a, b), make_vjp)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def make_vjp(needs):
        def vjp(g):
            return (
                _sum_to(mul(g, b), a.shape) if needs[0] else None,
                _sum_to(mul(g, a), b.shape) if needs[1] else None,
            )

        return vjp

    return _apply("mul", a.data * b.data, (a, b), make_vjp)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def make_vjp(needs):
        def vjp(g):
            ga = _sum_to(div(g, b), a.shape) if needs[0] else None
            gb = (
                _sum_to(neg(div(mul(g, a), mul(b, b))), b.shape) if needs[1] else None
            )
            return (ga, gb)

        return vjp

    return _apply("div", a.data / b.data, (a, b), make_vjp)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        return lambda g: (neg(g),)

    return _apply("neg", -a.data, (a,), make_vjp)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul requires [m,k]@[k,n], got {a.shape} and {b.shape}")

    def make_vjp(needs):
        def vjp(g):
            return (
                matmul(g, transpose(b)) if needs[0] else None,
                matmul(transpose(a), g) if needs[1] else None,
            )

        return vjp

    return _apply("matmul", a.data @ b.data, (a, b), make_vjp)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {a.shape}")

    def make_vjp(needs):
        return lambda g: (transpose(g),)

    return _apply("transpose", a.data.T, (a,), make_vjp)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape

    def make_vjp(needs):
        return lambda g: (reshape(g, old),)

    return _apply("reshape", a.data.reshape(shape), (a,), make_vjp)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        return lambda g: (_sum_to(g, a.shape),)

    return _apply("broadcast", np.broadcast_to(a.data, shape).copy(), (a,), make_vjp)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ValueError("concat of zero tensors")
    if axis not in (0, 1):
        raise ShapeError("concat supports axis 0 or 1")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def make_vjp(needs):
        def vjp(g):
            return tuple(
                narrow(g, axis, int(offsets[i]), sizes[i]) if needs[i] else None
                for i in range(len(parts))
            )

        return vjp

    data = np.concatenate([p.data for p in parts], axis=axis)
    return _apply("concat", data, tuple(parts), make_vjp)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    a = _as_tensor(a)
    if axis not in (0, 1):
        raise ShapeError("narrow supports axis 0 or 1")
    before, total = start, a.shape[axis]

    def make_vjp(needs):
        return lambda g: (_pad(g, axis, before, total - before - length),)

    sl = (slice(start, start + length),) if axis == 0 else (slice(None), slice(start, start + length))
    return _apply("narrow", a.data[sl].copy(), (a,), make_vjp)


def _pad(a, axis: int, before: int, after: int) -> Tensor:
    a = _as_tensor(a)
    width = [(0, 0)] * a.data.ndim
    width[axis] = (before, after)
    length = a.shape[axis]

    def make_vjp(needs):
        return lambda g: (narrow(g, axis, before, length),)

    return _apply("pad", np.pad(a.data, width), (a,), make_vjp)


# ---------------------------------------------------------------------------
# reductions and elementwise nonlinearities


def sum_axis(a, axis: int, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    in_shape = a.shape
    kd_shape = tuple(1 if i == axis else s for i, s in enumerate(in_shape))

    def make_vjp(needs):
        def vjp(g):
            gg = g if keepdims else reshape(g, kd_shape)
            return (broadcast_to(gg, in_shape),)

        return vjp

    return _apply("sum_axis", a.data.sum(axis=axis, keepdims=keepdims), (a,), make_vjp)


def sum_all(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        return lambda g: (broadcast_to(g, a.shape),)

    return _apply("sum", a.data.sum(), (a,), make_vjp)


def mean(a) -> Tensor:
    a = _as_tensor(a)
    return mul(sum_all(a), 1.0 / a.data.size)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)

    def make_vjp(needs):
        def vjp(g):
            return (mul(g, out),)

        return vjp

    out = _apply("exp", data, (a,), make_vjp)
    return out


def log(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        return lambda g: (div(g, a),)

    return _apply("log", np.log(a.data), (a,), make_vjp)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        def vjp(g):
            return (div(mul(g, 0.5), out),)

        return vjp

    out = _apply("sqrt", np.sqrt(a.data), (a,), make_vjp)
    return out


def abs_(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        def vjp(g):
            return (mul(g, Tensor(np.sign(a.data))),)

        return vjp

    return _apply("abs", np.abs(a.data), (a,), make_vjp)


def relu(a) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        def vjp(g):
            return (mul(g, Tensor((a.data > 0).astype(np.float64))),)

        return vjp

    return _apply("relu", np.maximum(a.data, 0.0), (a,), make_vjp)


def clip_const(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)

    def make_vjp(needs):
        def vjp(g):
            inside = ((a.data > lo) & (a.data < hi)).astype(np.float64)
            return (mul(g, Tensor(inside)),)

        return vjp

    return _apply("clip", np.clip(a.data, lo, hi), (a,), make_vjp)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # piecewise form avoids exp overflow for large |x|
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def make_vjp(needs):
        def vjp(g):
            return (mul(g, mul(out, sub(1.0, out))),)

        return vjp

    out = _apply("sigmoid", data, (a,), make_vjp)
    return out


def swish(a) -> Tensor:
    """x * sigmoid(x); the backward follows from the product rule."""
    a = _as_tensor(a)
    return mul(a, sigmoid(a))


def softmax(a, axis: int = 1) -> Tensor:
    a = _as_tensor(a)
    shift = Tensor(a.data.max(axis=axis, keepdims=True))  # constant shift
    e = exp(sub(a, shift))
    return div(e, sum_axis(e, axis, keepdims=True))


def gather_pairs(a, rows, cols) -> Tensor:
    """Pick a[rows[k], cols[k]] into a vector. Pairs must be distinct."""
    a = _as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    shape = a.shape

    def make_vjp(needs):
        return lambda g: (scatter_pairs(g, rows, cols, shape),)

    return _apply("gather", a.data[rows, cols], (a,), make_vjp)


def scatter_pairs(v, rows, cols, shape) -> Tensor:
    v = _as_tensor(v)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    data = np.zeros(shape, dtype=np.float64)
    np.add.at(data, (rows, cols), v.data)

    def make_vjp(needs):
        return lambda g: (gather_pairs(g, rows, cols),)

    return _apply("scatter", data, (v,), make_vjp)


# ---------------------------------------------------------------------------
# loss heads


def huber(pred, target, delta: float = 1.0) -> Tensor:
    """Mean Huber loss: 0.5 e^2 inside |e| <= delta, linear outside."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"huber operands differ: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError("huber delta must be positive")
    e = pred.data - target.data
    ae = np.abs(e)
    vals = np.where(ae <= delta, 0.5 * e * e, delta * (ae - 0.5 * delta))
    n = e.size

    def make_vjp(needs):
        def vjp(g):
            ge = mul(g, mul(clip_const(sub(pred, target), -delta, delta), 1.0 / n))
            return (
                ge if needs[0] else None,
                neg(ge) if needs[1] else None,
            )

        return vjp

    return _apply("huber", np.asarray(vals.mean()), (pred, target), make_vjp)


def cross_entropy(logits, labels, mask=None) -> Tensor:
    """Mean negative log-likelihood over unmasked rows of [n, A] logits.

    Masked rows contribute zero to the loss and receive exactly zero gradient.
    """
    logits = _as_tensor(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects [n, A] logits, got {logits.shape}")
    n, n_actions = logits.shape
    labels = np.asarray(labels, dtype=np.intp)
    if labels.shape != (n,):
        raise ShapeError(f"labels length {labels.shape} does not match {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= n_actions):
        raise ValueError(f"label index out of range for {n_actions} classes")
    if mask is None:
        mask = np.ones(n)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (n,):
        raise ShapeError(f"mask length {mask.shape} does not match {n} rows")
    count = mask.sum()
    if count == 0:
        raise ValueError("cross_entropy mask has no supervised steps")

    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    shifted = sub(logits, shift)
    lse = log(sum_axis(exp(shifted), 1, keepdims=True))
    log_probs = sub(shifted, lse)
    picked = gather_pairs(log_probs, np.arange(n, dtype=np.intp), labels)
    total = sum_all(mul(picked, Tensor(mask)))
    return neg(mul(total, 1.0 / count))


# ---------------------------------------------------------------------------
# backward


def backward(loss: Tensor, wrt: Optional[Sequence[Tensor]] = None, higher_order: bool = False):
    """Gradients of a scalar loss for every reachable leaf (or just ``wrt``).

    Returns a dict mapping leaf tensors to gradient tensors (None where the
    leaf is unreachable from the loss). With ``higher_order=True`` the backward
    pass itself is recorded, so returned gradients are differentiable.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None or loss._node < 0:
        raise ValueError("loss is not recorded on a tape (no differentiable inputs?)")

    if wrt is not None:
        targets = list(wrt)
        target_ids = []
        for t in targets:
            target_ids.append(t._node if (t._tape is tape and t._node >= 0) else -1)
        # forward reachability: nodes whose value depends on some target
        feeds = np.zeros(len(tape.nodes), dtype=bool)
        for nid in target_ids:
            if nid >= 0:
                feeds[nid] = True
        for nid, node in enumerate(tape.nodes):
            if not feeds[nid] and any(feeds[pid] for _, pid in node.parents):
                feeds[nid] = True
    else:
        feeds = None

    grads: dict[int, Tensor] = {loss._node: Tensor(np.ones(()))}
    with _reopen(tape, recording=higher_order):
        for nid in range(loss._node, -1, -1):
            g = grads.get(nid)
            if g is None:
                continue
            node = tape.nodes[nid]
            if node.vjp is None:
                continue
            parts = node.vjp(g)
            for slot, pid in node.parents:
                if feeds is not None and not feeds[pid]:
                    continue
                pg = parts[slot]
                prev = grads.get(pid)
                grads[pid] = pg if prev is None else add(prev, pg)

    if wrt is not None:
        return {t: grads.get(nid) if nid >= 0 else None for t, nid in zip(targets, target_ids)}
    return {t: grads.get(nid) for nid, t in tape._leaves}


# ---------------------------------------------------------------------------
# numerical verification


class GradCheckReport:
    """Outcome of an analytic-vs-finite-difference comparison."""

    def __init__(self, max_rel_err: float, tolerance: float, worst: str):
        self.max_rel_err = max_rel_err
        self.tolerance = tolerance
        self.worst = worst
        self.passed = max_rel_err < tolerance

    def __repr__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"GradCheckReport({verdict}: max_rel_err={self.max_rel_err:.3e} "
            f"vs tol={self.tolerance:.1e} at {self.worst})"
        )


def grad_check(
    f: Callable[..., Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    rel_floor: float = 1e-6,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Compare analytic gradients of scalar ``f(*params)`` to central differences.

    Relative error per coordinate is |a - n| / max(|a|, |n|, rel_floor); the
    report carries the max over all checked coordinates. ``max_entries`` caps
    the coordinates checked per parameter (random subset) for large tensors.
    """
    params = list(params)
    with Tape():
        loss = f(*params)
        grads = backward(loss, wrt=params)

    worst = ("", -1, 0.0)
    max_err = 0.0
    for pi, p in enumerate(params):
        g = grads.get(p)
        analytic = np.zeros_like(p.data) if g is None else g.data
        flat = p.data.reshape(-1)
        idxs = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            gen = rng if rng is not None else np.random.default_rng(0)
            idxs = gen.choice(flat.size, size=max_entries, replace=False)
        a_flat = analytic.reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(*params).item()
            flat[i] = orig - eps
            lo = f(*params).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            denom = max(abs(a_flat[i]), abs(numeric), rel_floor)
            err = abs(a_flat[i] - numeric) / denom
            if err > max_err:
                max_err = err
                worst = (f"param[{pi}]", int(i), numeric)
    where = f"{worst[0]}[{worst[1]}] (numeric={worst[2]:.6g})" if worst[0] else "n/a"
    return GradCheckReport(max_err, tolerance, where)
