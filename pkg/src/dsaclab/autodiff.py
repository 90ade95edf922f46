"""Small dense reverse-mode autodiff over float64 numpy arrays.

Graphs are built eagerly by the op functions below and thrown away after
:func:`backward`. Non-finite values raise :class:`NonFiniteError` naming the
op that produced them. By default the check is deferred: ``backward`` checks
the loss and the final gradients and, only when something is wrong, replays
the graph to find the culprit. ``strict_checks()`` checks every op as it runs.
"""

from __future__ import annotations

import contextlib
import json
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

FORMAT_VERSION = 1

_GRAD_ENABLED = True
_STRICT = False


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf in its value or its gradient."""

    def __init__(self, op: str, where: str = "forward"):
        super().__init__(f"non-finite value produced by '{op}' ({where})")
        self.op = op
        self.where = where


class Tensor:
    __slots__ = ("data", "requires_grad", "op", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{tag})"

    # operator sugar; all dispatch to the module-level ops
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


@contextlib.contextmanager
def no_grad():
    """Evaluate ops without recording a graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def strict_checks():
    """Check every op output (and every backward product) for NaN/Inf immediately."""
    global _STRICT
    prev = _STRICT
    _STRICT = True
    try:
        yield
    finally:
        _STRICT = prev


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """Wrap an array (or a Tensor's value) as a graph constant."""
    return Tensor(x.data if isinstance(x, Tensor) else x)


def _result(data: np.ndarray, parents: tuple, backward: Callable, op: str) -> Tensor:
    if _STRICT and not np.all(np.isfinite(data)):
        raise NonFiniteError(op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    out.op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _result(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
        "mul",
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _result(ad * ad, (a,), lambda g: (2.0 * ad * g,), "square")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)
    return _result(out, (a,), lambda g: (g / ad,), "log")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = np.maximum(a.data, 0.0)
    return _result(out, (a,), lambda g: (g * (out > 0),), "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    with np.errstate(over="ignore"):
        e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def clamp(a, lo: float, hi: float) -> Tensor:
    """Hard clamp; the gradient is zero wherever the bound is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clamp")


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    return _result(
        np.where(pick_a, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)),
        "minimum",
    )


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _result(
        ad @ bd,
        (a, b),
        lambda g: (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None),
        "matmul",
    )


def linear(x, weight, bias) -> Tensor:
    """Fused ``x @ weight + bias`` for a row batch ``x`` of shape (n, in)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    xd, wd = x.data, weight.data

    def backward(g):
        return (
            g @ wd.T if x.requires_grad else None,
            xd.T @ g if weight.requires_grad else None,
            g.sum(axis=0) if bias.requires_grad else None,
        )

    return _result(xd @ wd + bias.data, (x, weight, bias), backward, "linear")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


# ---------------------------------------------------------------- reductions / layout


def sum(a, axis: int | None = None) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result(np.asarray(a.data.sum(axis=axis)), (a,), backward, "sum")


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    n = a.size if axis is None else shape[axis]

    def backward(g):
        if axis is None:
            return (np.full(shape, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, shape).copy(),)

    return _result(np.asarray(a.data.mean(axis=axis)), (a,), backward, "mean")


def concatenate(parts: Sequence, axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    ax = axis % parts[0].data.ndim
    bounds = np.cumsum([p.shape[ax] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _result(np.concatenate([p.data for p in parts], axis=ax), parts, backward, "concatenate")


def columns(a, start: int, stop: int) -> Tensor:
    """Column slice ``a[:, start:stop]`` of a 2-D tensor."""
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _result(a.data[:, start:stop], (a,), backward, "columns")


# ---------------------------------------------------------------- backward


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _first_bad_op(order: list[Tensor]) -> str:
    for node in order:
        if not np.all(np.isfinite(node.data)):
            return node.op
    return "unknown"


def backward(loss: Tensor, params: "ParamSet") -> "ParamSet":
    """Gradient of a scalar ``loss`` with respect to every tensor in ``params``.

    Parameters that the loss does not depend on get zero gradients.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    if loss.requires_grad:
        order = _topo_order(loss)
        if not np.isfinite(loss.data).all():
            raise NonFiniteError(_first_bad_op(order))
        grads[id(loss)] = np.ones_like(loss.data)
        wanted = {id(t) for t in params.values()}
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            if id(node) not in wanted:
                del grads[id(node)]
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if _STRICT and not np.all(np.isfinite(pg)):
                    raise NonFiniteError(node.op, where="backward")
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg
    out = ParamSet()
    for name, t in params.items():
        g = grads.get(id(t))
        out[name] = Tensor(np.zeros_like(t.data) if g is None else np.array(g, dtype=np.float64).reshape(t.shape))
    if not _STRICT and not all(np.isfinite(g.data).all() for g in out.values()):
        # replay with per-op checks to name the op
        with strict_checks():
            backward(loss, params)
        raise NonFiniteError("unknown", where="backward")
    return out


# ---------------------------------------------------------------- parameter sets


class ParamSet(OrderedDict):
    """Ordered name -> Tensor mapping. Shapes are fixed once a name is added."""

    def __setitem__(self, name: str, value) -> None:
        if not isinstance(value, Tensor):
            value = Tensor(value)
        if name in self and self[name].shape != value.shape:
            raise ValueError(f"shape of '{name}' is fixed at {self[name].shape}, got {value.shape}")
        super().__setitem__(name, value)

    @classmethod
    def from_arrays(cls, arrays: dict, requires_grad: bool = True) -> "ParamSet":
        ps = cls()
        for name, arr in arrays.items():
            ps[name] = Tensor(np.array(arr, dtype=np.float64), requires_grad=requires_grad, name=name)
        return ps

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.items()}

    def copy(self, requires_grad: bool | None = None) -> "ParamSet":
        return ParamSet.from_arrays(
            {k: v.data.copy() for k, v in self.items()},
            requires_grad=all(v.requires_grad for v in self.values()) if requires_grad is None else requires_grad,
        )

    def constants(self) -> "ParamSet":
        """Views of the same values that do not take part in differentiation."""
        ps = ParamSet()
        for k, v in self.items():
            ps[k] = Tensor(v.data)
        return ps

    def prefixed(self, prefix: str) -> "ParamSet":
        ps = ParamSet()
        for k, v in self.items():
            if k.startswith(prefix):
                ps[k] = v
        return ps

    def global_norm(self) -> float:
        return float(np.sqrt(np.sum([np.sum(v.data * v.data) for v in self.values()])))

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "tensors": [
                {"name": k, "shape": list(v.shape), "data": v.data.reshape(-1).tolist()}
                for k, v in self.items()
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ParamSet":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported ParamSet format_version {doc.get('format_version')!r}")
        ps = cls()
        for entry in doc["tensors"]:
            shape = tuple(int(n) for n in entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != int(np.prod(shape)):
                raise ValueError(f"tensor '{entry['name']}' has {data.size} values for shape {shape}")
            if entry["name"] in ps:
                raise ValueError(f"duplicate tensor name '{entry['name']}'")
            ps[entry["name"]] = Tensor(data.reshape(shape), requires_grad=True, name=entry["name"])
        return ps


def merge(paramsets: Iterable[ParamSet]) -> ParamSet:
    out = ParamSet()
    for ps in paramsets:
        for k, v in ps.items():
            if k in out:
                raise ValueError(f"duplicate parameter name '{k}'")
            out[k] = v
    return out


def save_params(params: ParamSet, path) -> None:
    Path(path).write_text(json.dumps(params.to_json()))


def load_params(path) -> ParamSet:
    return ParamSet.from_json(json.loads(Path(path).read_text()))
