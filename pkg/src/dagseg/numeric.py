"""Parameters, a per-sentence computation graph with reverse-mode gradients, and AdaGrad.

Values are float64 numpy arrays of rank 0, 1 or 2. A :class:`Graph` records
nodes in creation order, which is a topological order, and :meth:`Graph.backward`
walks it in reverse. Parameter gradients are accumulated straight into the
:class:`ParamStore`, so a graph is thrown away after its backward pass.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from dagseg.errors import ConfigError, DataError, NumericError

DTYPE = np.float64


@dataclass(eq=False)
class Param:
    name: str
    value: np.ndarray
    grad: np.ndarray
    accum: np.ndarray
    trainable: bool = True


class ParamStore:
    """Named trainable tensors with gradient and AdaGrad accumulators."""

    def __init__(self) -> None:
        self._params: dict[str, Param] = {}

    def add(self, name: str, shape: tuple[int, ...], trainable: bool = True) -> Param:
        if name in self._params:
            raise ConfigError(f"duplicate parameter {name!r}")
        if len(shape) > 2 or any(d <= 0 for d in shape):
            raise ConfigError(f"bad shape {shape} for {name!r}")
        p = Param(
            name,
            np.zeros(shape, dtype=DTYPE),
            np.zeros(shape, dtype=DTYPE),
            np.zeros(shape, dtype=DTYPE),
            trainable,
        )
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Param]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self:
            p.grad.fill(0.0)

    def scale_grad(self, factor: float) -> None:
        for p in self:
            p.grad *= factor

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in self if p.trainable)))

    def squared_norm(self, names: Iterable[str] | None = None) -> float:
        params = self if names is None else (self[n] for n in names)
        return float(sum(float(np.sum(p.value * p.value)) for p in params if p.trainable))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, v in values.items():
            self._params[name].value[...] = v

    def copy(self) -> ParamStore:
        other = ParamStore()
        for p in self:
            q = other.add(p.name, p.value.shape, p.trainable)
            q.value[...] = p.value
            q.accum[...] = p.accum
        return other


def init_uniform(
    store: ParamStore,
    low: float,
    high: float,
    seed: int,
    names: Iterable[str] | None = None,
) -> None:
    """Fill parameters with values strictly inside ``(low, high)``.

    Every parameter draws from its own stream keyed by ``(seed, crc32(name))``,
    so adding a parameter never shifts the values of the others.
    """
    if not low < high:
        raise ConfigError(f"empty init range ({low}, {high})")
    inner_low = np.nextafter(low, high)
    for name in names if names is not None else store.names():
        p = store[name]
        rng = np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])
        v = rng.uniform(low, high, size=p.value.shape)
        p.value[...] = np.maximum(v, inner_low)


def adagrad_step(
    store: ParamStore,
    lr: float,
    l2: float = 0.0,
    eps: float = 1e-6,
    clip_norm: float | None = None,
    decay: Callable[[str], bool] | None = None,
) -> None:
    """One AdaGrad update with L2 weight decay folded into the gradient.

    ``decay(name)`` selects the parameters the L2 term applies to (all by default).
    Gradients are zeroed afterwards.
    """
    scale = 1.0
    if clip_norm is not None:
        norm = store.grad_norm()
        if norm > clip_norm:
            scale = clip_norm / norm
    for p in store:
        if not p.trainable:
            p.grad.fill(0.0)
            continue
        g = p.grad * scale if scale != 1.0 else p.grad
        if l2 and (decay is None or decay(p.name)):
            g = g + l2 * p.value
        p.accum += g * g
        p.value -= lr * g / (np.sqrt(p.accum) + eps)
        p.grad.fill(0.0)


class Node:
    __slots__ = ("value", "grad", "backward", "op", "sink")

    def __init__(self, value: np.ndarray, op: str, backward=None, sink=None) -> None:
        self.value = value
        self.grad = None
        self.backward = backward
        self.op = op
        # parameter gradient buffer; gradients for sink nodes bypass node.grad
        self.sink = sink

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node({self.op}, shape={self.value.shape})"


def accumulate(node: Node, g: np.ndarray) -> None:
    if node.sink is not None:
        node.sink += g
    elif node.grad is None:
        node.grad = g
    else:
        node.grad = node.grad + g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Graph:
    """Dynamic computation graph for one loss evaluation."""

    def __init__(self, store: ParamStore | None = None) -> None:
        self.store = store
        self.nodes: list[Node] = []
        self._params: dict[str, Node] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, value: np.ndarray, op: str, backward=None) -> Node:
        n = Node(value, op, backward)
        self.nodes.append(n)
        return n

    def count(self, op: str) -> int:
        return sum(1 for n in self.nodes if n.op == op)

    # leaves

    def param(self, name: str) -> Node:
        n = self._params.get(name)
        if n is None:
            p = self.store[name]
            n = Node(p.value, f"param:{name}", sink=p.grad if p.trainable else None)
            self._params[name] = n
            self.nodes.append(n)
        return n

    def lookup(self, name: str, row: int) -> Node:
        p = self.store[name]
        value = p.value[row]
        if not p.trainable:
            return self.node(value, "lookup")
        grad = p.grad

        def backward(g):
            grad[row] += g

        return self.node(value, "lookup", backward)

    def constant(self, value) -> Node:
        return self.node(np.asarray(value, dtype=DTYPE), "const")

    def zeros(self, size: int) -> Node:
        return self.constant(np.zeros(size, dtype=DTYPE))

    # arithmetic

    def add(self, a: Node, b: Node) -> Node:
        _same_shape("add", a, b)

        def backward(g):
            accumulate(a, g)
            accumulate(b, g)

        return self.node(a.value + b.value, "add", backward)

    def sub(self, a: Node, b: Node) -> Node:
        _same_shape("sub", a, b)

        def backward(g):
            accumulate(a, g)
            accumulate(b, -g)

        return self.node(a.value - b.value, "sub", backward)

    def add_const(self, a: Node, c) -> Node:
        def backward(g):
            accumulate(a, g)

        return self.node(a.value + c, "add_const", backward)

    def mul(self, a: Node, b: Node) -> Node:
        _same_shape("mul", a, b)

        def backward(g):
            accumulate(a, g * b.value)
            accumulate(b, g * a.value)

        return self.node(a.value * b.value, "mul", backward)

    def scale(self, a: Node, factor: np.ndarray) -> Node:
        """Elementwise product with a constant (dropout masks)."""

        def backward(g):
            accumulate(a, g * factor)

        return self.node(a.value * factor, "scale", backward)

    def sum(self, items: Sequence[Node]) -> Node:
        """Sum of same-shaped vectors, accumulated left to right."""
        if not items:
            raise DataError("sum over an empty set")
        acc = items[0].value.copy()
        for it in items[1:]:
            _same_shape("sum", items[0], it)
            acc = acc + it.value

        def backward(g):
            for it in items:
                accumulate(it, g)

        return self.node(acc, "sum", backward)

    def dot(self, a: Node, b: Node) -> Node:
        _same_shape("dot", a, b)

        def backward(g):
            accumulate(a, g * b.value)
            accumulate(b, g * a.value)

        return self.node(np.asarray(np.dot(a.value, b.value), dtype=DTYPE), "dot", backward)

    def matvec(self, w: Node, x: Node) -> Node:
        return self.linear([(w, x)])

    def linear(self, terms: Sequence[tuple[Node, Node]], bias: Node | None = None) -> Node:
        """``sum_k W_k @ x_k (+ b)``, accumulated in the order given."""
        for w, x in terms:
            if w.value.ndim != 2 or x.value.ndim != 1 or w.value.shape[1] != x.value.shape[0]:
                raise DataError(f"linear: cannot apply {w.value.shape} to {x.value.shape}")
        w0, x0 = terms[0]
        acc = w0.value @ x0.value
        for w, x in terms[1:]:
            acc = acc + w.value @ x.value
        if bias is not None:
            _same_shape("linear bias", bias, Node(acc, "tmp"))
            acc = acc + bias.value

        def backward(g):
            for w, x in terms:
                accumulate(w, np.outer(g, x.value))
                accumulate(x, w.value.T @ g)
            if bias is not None:
                accumulate(bias, g)

        return self.node(acc, "linear", backward)

    def concat(self, items: Sequence[Node]) -> Node:
        sizes = [it.value.shape[0] for it in items]
        bounds = np.cumsum([0, *sizes])

        def backward(g):
            for it, lo, hi in zip(items, bounds[:-1], bounds[1:]):
                accumulate(it, g[lo:hi])

        return self.node(np.concatenate([it.value for it in items]), "concat", backward)

    def stack(self, rows: Sequence[Node]) -> Node:
        def backward(g):
            for k, r in enumerate(rows):
                accumulate(r, g[k])

        return self.node(np.stack([r.value for r in rows]), "stack", backward)

    # nonlinearities

    def sigmoid(self, a: Node) -> Node:
        y = _sigmoid(a.value)

        def backward(g):
            accumulate(a, g * y * (1.0 - y))

        return self.node(y, "sigmoid", backward)

    def tanh(self, a: Node) -> Node:
        y = np.tanh(a.value)

        def backward(g):
            accumulate(a, g * (1.0 - y * y))

        return self.node(y, "tanh", backward)

    # differentiation

    def backward(self, loss: Node) -> None:
        """Accumulate d loss / d param into the store, then release the graph."""
        if loss.value.size != 1:
            raise DataError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        if not np.isfinite(loss.value).all():
            raise NumericError(f"non-finite loss value {float(loss.value)!r}")
        loss.grad = np.ones_like(loss.value)
        for idx in range(len(self.nodes) - 1, -1, -1):
            n = self.nodes[idx]
            g = n.grad
            if g is None or n.backward is None:
                continue
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient at node {idx} ({n.op})")
            n.backward(g)
            n.grad = None
        for name, n in self._params.items():
            if n.sink is not None and not np.isfinite(n.sink).all():
                raise NumericError(f"non-finite gradient at node {n.op}")
        self.nodes.clear()
        self._params.clear()


def _same_shape(op: str, a: Node, b: Node) -> None:
    if a.value.shape != b.value.shape:
        raise DataError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


def numerical_gradient(
    store: ParamStore,
    fn: Callable[[], float],
    h: float = 1e-5,
    names: Iterable[str] | None = None,
) -> dict[str, np.ndarray]:
    """Central differences of ``fn`` with respect to every coordinate of the named parameters."""
    out = {}
    for name in names if names is not None else store.names():
        p = store[name]
        grad = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = fn()
            flat[k] = orig - h
            down = fn()
            flat[k] = orig
            gflat[k] = (up - down) / (2 * h)
        out[name] = grad
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)`` elementwise."""
    a = np.asarray(analytic, dtype=DTYPE)
    n = np.asarray(numeric, dtype=DTYPE)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
