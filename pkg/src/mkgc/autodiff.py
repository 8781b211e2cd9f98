"""Dense float64 vector/matrix ops with a minimal reverse-mode tape.

Every op accepts taped `Value` nodes or plain ndarrays (constants). When
no input is taped the op returns a plain ndarray, so the same forward
code serves both training and inference. All reductions are sequential:
identical inputs give bit-identical outputs across runs.

A `Tape` is confined to one thread and used for a single backward sweep;
values are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_vector(data) -> np.ndarray:
    """Validate and return a finite float64 1-d array."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def as_matrix(data) -> np.ndarray:
    """Validate and return a finite float64 row-major 2-d array."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


class Value:
    """One node of the computation record: data plus backward bookkeeping."""

    __slots__ = ("data", "tape", "_parents", "_vjp", "_grad")

    def __init__(self, data, tape, parents=(), vjp=None):
        self.data = data
        self.tape = tape
        self._parents = parents
        self._vjp = vjp
        self._grad = None

    @property
    def grad(self) -> np.ndarray:
        """Accumulated gradient; exactly zero for leaves unused by the loss."""
        if self._grad is None:
            return np.zeros_like(self.data)
        return self._grad

    def __repr__(self):
        return f"Value(shape={np.shape(self.data)}, taped={self.tape is not None})"


class Tape:
    """Ordered op record. Nodes are appended in execution order, which is a
    topological order, so one reverse sweep visits each node exactly once."""

    def __init__(self):
        self._nodes = []

    def leaf(self, data) -> Value:
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("leaf has non-finite entries")
        node = Value(arr, self)
        self._nodes.append(node)
        return node

    def backward(self, root: Value) -> None:
        if not isinstance(root, Value) or root.tape is not self:
            raise ValueError("backward root must be a Value recorded on this tape")
        if np.shape(root.data) != ():
            raise ValueError("backward root must be a scalar")
        root._grad = np.float64(1.0)
        for node in reversed(self._nodes):
            if node._grad is None or node._vjp is None:
                continue
            for parent, pgrad in zip(node._parents, node._vjp(node._grad)):
                if parent._grad is None:
                    parent._grad = np.zeros_like(parent.data)
                parent._grad = parent._grad + pgrad


def raw(x) -> np.ndarray:
    """Underlying ndarray of a Value or array-like constant."""
    return x.data if isinstance(x, Value) else np.asarray(x, dtype=np.float64)


_data = raw


def _tape(*xs):
    tapes = {x.tape for x in xs if isinstance(x, Value)}
    if len(tapes) > 1:
        raise ValueError("operands come from different tapes")
    return tapes.pop() if tapes else None


def _node(out, operands, vjp_all):
    """Build a node from `out`; `vjp_all(g)` yields one gradient per operand
    (taped or not) and the node keeps only the taped ones."""
    if not np.all(np.isfinite(out)):
        raise ValueError("operation produced non-finite values")
    tape = _tape(*operands)
    if tape is None:
        return out

    taped_idx = [i for i, x in enumerate(operands) if isinstance(x, Value)]
    parents = tuple(operands[i] for i in taped_idx)

    def vjp(g):
        grads = vjp_all(g)
        return [grads[i] for i in taped_idx]

    node = Value(out, tape, parents, vjp)
    tape._nodes.append(node)
    return node


def matmul(a, b):
    """Matrix product: (m,n)@(n,) -> (m,) or (m,n)@(n,k) -> (m,k)."""
    ad, bd = _data(a), _data(b)
    if ad.ndim != 2 or bd.ndim not in (1, 2) or ad.shape[1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")
    out = ad @ bd
    if bd.ndim == 1:
        vjp = lambda g: [np.outer(g, bd), ad.T @ g]
    else:
        vjp = lambda g: [g @ bd.T, ad.T @ g]
    return _node(out, (a, b), vjp)


def add(a, b):
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise ValueError(f"add shape mismatch: {ad.shape} vs {bd.shape}")
    return _node(ad + bd, (a, b), lambda g: [g, g])


def sub(a, b):
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise ValueError(f"sub shape mismatch: {ad.shape} vs {bd.shape}")
    return _node(ad - bd, (a, b), lambda g: [g, -g])


def scale(c: float, a):
    """Multiply by a plain (non-taped) scalar constant."""
    c = float(c)
    return _node(c * _data(a), (a,), lambda g: [c * g])


def smul(s, a):
    """Multiply tensor `a` by a taped scalar `s`; gradients flow to both."""
    sd, ad = _data(s), _data(a)
    if sd.shape != ():
        raise ValueError("smul scale factor must be a scalar")
    return _node(sd * ad, (s, a), lambda g: [np.sum(g * ad), sd * g])


def dot(a, b):
    ad, bd = _data(a), _data(b)
    if ad.ndim != 1 or ad.shape != bd.shape:
        raise ValueError(f"dot shape mismatch: {ad.shape} vs {bd.shape}")
    return _node(ad @ bd, (a, b), lambda g: [g * bd, g * ad])


def concat(parts):
    """Concatenate 1-d parts into one vector."""
    datas = [_data(p) for p in parts]
    if not datas or any(d.ndim != 1 for d in datas):
        raise ValueError("concat expects a non-empty list of vectors")
    offsets = np.cumsum([0] + [d.size for d in datas])

    def vjp_all(g):
        return [g[offsets[i]:offsets[i + 1]] for i in range(len(datas))]

    return _node(np.concatenate(datas), tuple(parts), vjp_all)


def slice_v(v, start: int, stop: int):
    """Contiguous slice of a vector."""
    vd = _data(v)
    if vd.ndim != 1 or not 0 <= start <= stop <= vd.size:
        raise ValueError(f"bad slice [{start}:{stop}] for size {np.size(vd)}")

    def vjp_all(g):
        out = np.zeros_like(vd)
        out[start:stop] = g
        return [out]

    return _node(vd[start:stop].copy(), (v,), vjp_all)


def reshape(v, shape):
    vd = _data(v)
    if int(np.prod(shape)) != vd.size:
        raise ValueError(f"cannot reshape size {vd.size} into {shape}")
    return _node(vd.reshape(shape).copy(),
                 (v,), lambda g: [np.asarray(g).reshape(vd.shape)])


def pick(v, i: int):
    """Select one coordinate of a vector as a scalar."""
    vd = _data(v)
    if vd.ndim != 1:
        raise ValueError("pick expects a vector")
    if not 0 <= i < vd.size:
        raise ValueError(f"index {i} out of range for size {vd.size}")

    def vjp_all(g):
        out = np.zeros_like(vd)
        out[i] = g
        return [out]

    return _node(vd[i], (v,), vjp_all)


def stack(scalars):
    """Stack scalars into a vector."""
    datas = [_data(s) for s in scalars]
    if not datas or any(d.shape != () for d in datas):
        raise ValueError("stack expects a non-empty list of scalars")
    return _node(np.array(datas), tuple(scalars), lambda g: list(g))


def softmax(v):
    """Numerically stable softmax over a vector (max-subtraction)."""
    vd = _data(v)
    if vd.ndim != 1 or vd.size == 0:
        raise ValueError("softmax expects a non-empty vector")
    shifted = vd - vd.max()
    e = np.exp(shifted)
    out = e / e.sum()
    return _node(out, (v,), lambda g: [out * (g - np.dot(g, out))])


def log_softmax(v):
    vd = _data(v)
    if vd.ndim != 1 or vd.size == 0:
        raise ValueError("log_softmax expects a non-empty vector")
    shifted = vd - vd.max()
    lse = np.log(np.sum(np.exp(shifted)))
    out = shifted - lse
    soft = np.exp(out)
    return _node(out, (v,), lambda g: [g - soft * np.sum(g)])


def relu(v):
    vd = _data(v)
    mask = (vd > 0).astype(np.float64)
    return _node(np.maximum(vd, 0.0), (v,), lambda g: [g * mask])


def tanh(v):
    out = np.tanh(_data(v))
    return _node(out, (v,), lambda g: [g * (1.0 - out * out)])


def sqrt_s(s):
    """Square root of a positive scalar."""
    sd = _data(s)
    if sd.shape != () or sd <= 0:
        raise ValueError("sqrt_s expects a positive scalar")
    out = np.sqrt(sd)
    return _node(out, (s,), lambda g: [g / (2.0 * out)])


def argmax_det(v) -> int:
    """Index of the maximum entry; ties broken by the lowest index."""
    vd = _data(v)
    if vd.ndim != 1 or vd.size == 0:
        raise ValueError("argmax_det expects a non-empty vector")
    return int(np.argmax(vd))


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    analytic: np.ndarray
    numeric: np.ndarray
    message: str = ""

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"grad_check {status}: max rel err {self.max_rel_err:.3e} {self.message}"


def grad_check(f, point, eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare reverse-mode gradients of `f` against central differences.

    `f` maps a taped vector Value to a taped scalar Value. Relative error per
    coordinate is |a - n| / max(|a|, |n|, 1e-6); the check passes iff the max
    over coordinates is <= tol. Non-finite values at a probe point produce a
    failing report naming the coordinate.
    """
    point = as_vector(point)
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")

    tape = Tape()
    x = tape.leaf(point)
    out = f(x)
    if not isinstance(out, Value) or np.shape(out.data) != ():
        raise ValueError("f must return a taped scalar")
    tape.backward(out)
    analytic = np.array(x.grad, dtype=np.float64, copy=True)

    def probe(p):
        t = Tape()
        return float(f(t.leaf(p)).data)

    numeric = np.zeros_like(point)
    for i in range(point.size):
        hi, lo = point.copy(), point.copy()
        hi[i] += eps
        lo[i] -= eps
        try:
            f_hi, f_lo = probe(hi), probe(lo)
        except (ValueError, FloatingPointError) as exc:
            return GradCheckReport(False, float("inf"), analytic, numeric,
                                   f"non-finite f at coordinate {i}: {exc}")
        if not (np.isfinite(f_hi) and np.isfinite(f_lo)):
            return GradCheckReport(False, float("inf"), analytic, numeric,
                                   f"non-finite f at coordinate {i}")
        numeric[i] = (f_hi - f_lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    rel = np.abs(analytic - numeric) / denom
    max_rel = float(rel.max()) if rel.size else 0.0
    return GradCheckReport(max_rel <= tol, max_rel, analytic, numeric)
