"""Minimal reverse-mode differentiation over dense float64 matrices.

A Graph is an append-only list of primitive nodes (affine, relu, row-wise
l2 normalization, temperature softmax, clamped log/power, label pick,
reductions, elementwise arithmetic). Topology and shapes are fixed and
validated at construction; the batch dimension is the only free size.
Evaluation never mutates the graph: ``forward`` returns an Activations
object and ``backward`` consumes it, so concurrent read-only evaluation
is safe. Parameters change only through ``set_param``.

The hot row-wise primitives are delegated to ``srlab._kernels`` (compiled
core when built, numpy otherwise); matrix products stay on numpy/BLAS.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K

# Row norms below this pass through l2 normalization unchanged.
DEGENERATE_NORM_EPS = 1e-12
# Probabilities are clamped here before log/power so gradients stay finite.
PROB_FLOOR = 1e-7


class GraphError(ValueError):
    """Shape or structure violation; the message names the offending node."""


def as_matrix(values) -> np.ndarray:
    """Coerce to a C-contiguous, finite, float64 2-D array."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise GraphError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise GraphError("matrix contains non-finite entries")
    return a


class Node:
    """One primitive operation; ``rows`` is None for the batch dimension."""

    __slots__ = ("index", "op", "name", "args", "rows", "cols", "meta")

    def __init__(self, index, op, name, args, rows, cols, **meta):
        self.index = index
        self.op = op
        self.name = name or f"{op}:{index}"
        self.args = tuple(args)
        self.rows = rows
        self.cols = cols
        self.meta = meta


def _rows_compatible(a, b):
    return a is None or b is None or a == b


class Graph:
    """Append-only computation graph; the last node added is the output.

    ``params_store`` may be shared between graphs so that several views
    (e.g. a logits graph and a training-objective graph) see the same
    trainable parameters.
    """

    def __init__(self, params_store: dict | None = None):
        self.nodes: list[Node] = []
        self.inputs: dict[str, int] = {}
        self.params = params_store if params_store is not None else {}
        self.param_shapes: dict[str, tuple[int, int]] = {}
        self._param_nodes: dict[str, int] = {}
        self._consts: dict[int, np.ndarray] = {}

    # -- construction ----------------------------------------------------

    def _append(self, op, name, args, rows, cols, **meta) -> int:
        node = Node(len(self.nodes), op, name, args, rows, cols, **meta)
        self.nodes.append(node)
        return node.index

    def _node(self, i) -> Node:
        return self.nodes[i]

    def input(self, name: str, cols: int, rows: int | None = None) -> int:
        if name in self.inputs:
            raise GraphError(f"duplicate input name {name!r}")
        idx = self._append("input", name, (), rows, cols)
        self.inputs[name] = idx
        return idx

    def param(self, name: str, rows: int, cols: int) -> int:
        shape = (int(rows), int(cols))
        if name in self.param_shapes and self.param_shapes[name] != shape:
            raise GraphError(
                f"parameter {name!r} redeclared with shape {shape}, "
                f"was {self.param_shapes[name]}"
            )
        self.param_shapes[name] = shape
        idx = self._append("param", name, (), shape[0], shape[1])
        self._param_nodes[name] = idx
        return idx

    def const(self, values, name: str | None = None) -> int:
        a = as_matrix(values)
        idx = self._append("const", name, (), a.shape[0], a.shape[1])
        self._consts[idx] = a
        return idx

    def affine(self, x: int, w: int, b: int, name=None) -> int:
        nx, nw, nb = self._node(x), self._node(w), self._node(b)
        label = name or f"affine:{len(self.nodes)}"
        if nx.cols != nw.rows:
            raise GraphError(
                f"node {label!r}: input has {nx.cols} cols but weight expects "
                f"{nw.rows}"
            )
        if nb.rows != 1 or nb.cols != nw.cols:
            raise GraphError(
                f"node {label!r}: bias must be 1x{nw.cols}, got "
                f"{nb.rows}x{nb.cols}"
            )
        return self._append("affine", name, (x, w, b), nx.rows, nw.cols)

    def relu(self, x: int, name=None) -> int:
        n = self._node(x)
        return self._append("relu", name, (x,), n.rows, n.cols)

    def l2norm_rows(self, x: int, name=None) -> int:
        n = self._node(x)
        return self._append("l2norm", name, (x,), n.rows, n.cols)

    def softmax_tau(self, x: int, tau: float, name=None) -> int:
        if not tau > 0.0:
            raise GraphError(f"softmax temperature must be positive, got {tau}")
        n = self._node(x)
        return self._append("softmax", name, (x,), n.rows, n.cols, tau=float(tau))

    def log(self, x: int, floor: float = PROB_FLOOR, name=None) -> int:
        n = self._node(x)
        return self._append("log", name, (x,), n.rows, n.cols, floor=float(floor))

    def power(self, x: int, exponent: float, floor: float = PROB_FLOOR,
              name=None) -> int:
        n = self._node(x)
        return self._append(
            "power", name, (x,), n.rows, n.cols,
            exponent=float(exponent), floor=float(floor),
        )

    def pick(self, x: int, labels: int, name=None) -> int:
        nx, ny = self._node(x), self._node(labels)
        label = name or f"pick:{len(self.nodes)}"
        if ny.cols != 1:
            raise GraphError(f"node {label!r}: label input must have 1 col")
        if not _rows_compatible(nx.rows, ny.rows):
            raise GraphError(f"node {label!r}: row mismatch between values and labels")
        return self._append("pick", name, (x, labels), nx.rows, 1)

    def sum_rows(self, x: int, name=None) -> int:
        n = self._node(x)
        return self._append("sum_rows", name, (x,), n.rows, 1)

    def mean_all(self, x: int, name=None) -> int:
        return self._append("mean_all", name, (x,), 1, 1)

    def _binary(self, op, a, b, name):
        na, nb = self._node(a), self._node(b)
        label = name or f"{op}:{len(self.nodes)}"
        scalar_b = nb.rows == 1 and nb.cols == 1
        scalar_a = na.rows == 1 and na.cols == 1
        if scalar_b and not scalar_a:
            rows, cols = na.rows, na.cols
        elif scalar_a and not scalar_b:
            rows, cols = nb.rows, nb.cols
        elif na.cols == nb.cols and _rows_compatible(na.rows, nb.rows):
            rows = na.rows if na.rows is not None else nb.rows
            cols = na.cols
        else:
            raise GraphError(
                f"node {label!r}: incompatible shapes "
                f"{na.rows}x{na.cols} and {nb.rows}x{nb.cols}"
            )
        return self._append(op, name, (a, b), rows, cols)

    def add(self, a: int, b: int, name=None) -> int:
        return self._binary("add", a, b, name)

    def mul(self, a: int, b: int, name=None) -> int:
        return self._binary("mul", a, b, name)

    def div(self, a: int, b: int, name=None) -> int:
        return self._binary("div", a, b, name)

    def scale_shift(self, x: int, scale: float, shift: float = 0.0,
                    name=None) -> int:
        n = self._node(x)
        return self._append(
            "scale_shift", name, (x,), n.rows, n.cols,
            scale=float(scale), shift=float(shift),
        )

    # -- parameters ------------------------------------------------------

    def set_param(self, name: str, values) -> None:
        if name not in self.param_shapes:
            raise GraphError(f"unknown parameter {name!r}")
        a = as_matrix(values)
        if a.shape != self.param_shapes[name]:
            raise GraphError(
                f"parameter {name!r}: expected shape {self.param_shapes[name]}, "
                f"got {a.shape}"
            )
        self.params[name] = a

    @property
    def output_index(self) -> int:
        if not self.nodes:
            raise GraphError("empty graph")
        return len(self.nodes) - 1


class Activations:
    """Per-node values from one forward pass (read-only after creation)."""

    def __init__(self, graph: Graph, values: list, aux: dict):
        self.graph = graph
        self.values = values
        self.aux = aux

    @property
    def output(self) -> np.ndarray:
        return self.values[self.graph.output_index]


def _resolve_inputs(graph: Graph, inputs) -> dict[str, np.ndarray]:
    if isinstance(inputs, dict):
        given = dict(inputs)
    else:
        if len(graph.inputs) != 1:
            raise GraphError(
                f"graph has inputs {sorted(graph.inputs)}; pass a dict"
            )
        given = {next(iter(graph.inputs)): inputs}
    missing = set(graph.inputs) - set(given)
    extra = set(given) - set(graph.inputs)
    if missing or extra:
        raise GraphError(f"input mismatch: missing {sorted(missing)}, "
                         f"unexpected {sorted(extra)}")
    out = {}
    batch = None
    for name, raw in given.items():
        a = as_matrix(raw)
        node = graph.nodes[graph.inputs[name]]
        if a.shape[1] != node.cols:
            raise GraphError(
                f"input {name!r}: expected {node.cols} cols, got {a.shape[1]}"
            )
        if node.rows is not None:
            if a.shape[0] != node.rows:
                raise GraphError(
                    f"input {name!r}: expected {node.rows} rows, got {a.shape[0]}"
                )
        else:
            if batch is None:
                batch = a.shape[0]
            elif a.shape[0] != batch:
                raise GraphError(
                    f"input {name!r}: batch size {a.shape[0]} != {batch}"
                )
        out[name] = a
    return out


def forward(graph: Graph, inputs) -> Activations:
    """Run all nodes in topological order; returns the activation record."""
    given = _resolve_inputs(graph, inputs)
    values: list = [None] * len(graph.nodes)
    aux: dict = {}
    for node in graph.nodes:
        op = node.op
        if op == "input":
            v = given[node.name]
        elif op == "param":
            if node.name not in graph.params:
                raise GraphError(f"parameter {node.name!r} has no value")
            v = graph.params[node.name]
        elif op == "const":
            v = graph._consts[node.index]
        elif op == "affine":
            x, w, b = (values[i] for i in node.args)
            v = x @ w + b
        elif op == "relu":
            v = K.relu_fwd(values[node.args[0]])
        elif op == "l2norm":
            v, norms = K.l2norm_rows_fwd(values[node.args[0]], DEGENERATE_NORM_EPS)
            aux[node.index] = norms
        elif op == "softmax":
            v = K.softmax_tau_fwd(values[node.args[0]], node.meta["tau"])
        elif op == "log":
            v = K.log_fwd(values[node.args[0]], node.meta["floor"])
        elif op == "power":
            v = K.pow_fwd(values[node.args[0]], node.meta["exponent"],
                          node.meta["floor"])
        elif op == "pick":
            u, y = values[node.args[0]], values[node.args[1]]
            if u.shape[0] != y.shape[0]:
                raise GraphError(
                    f"node {node.name!r}: {u.shape[0]} rows vs {y.shape[0]} labels"
                )
            labels = y[:, 0]
            ints = labels.astype(np.int64)
            if np.any(labels != ints) or ints.min(initial=0) < 0 \
                    or ints.max(initial=0) >= u.shape[1]:
                raise GraphError(
                    f"node {node.name!r}: labels must be integers in [0, {u.shape[1]})"
                )
            v = u[np.arange(u.shape[0]), ints][:, None]
            aux[node.index] = ints
        elif op == "sum_rows":
            v = values[node.args[0]].sum(axis=1, keepdims=True)
        elif op == "mean_all":
            v = np.array([[values[node.args[0]].mean()]])
        elif op == "add":
            v = values[node.args[0]] + values[node.args[1]]
        elif op == "mul":
            v = values[node.args[0]] * values[node.args[1]]
        elif op == "div":
            v = values[node.args[0]] / values[node.args[1]]
        elif op == "scale_shift":
            v = node.meta["scale"] * values[node.args[0]] + node.meta["shift"]
        else:  # pragma: no cover - node set is closed
            raise GraphError(f"unknown op {op!r}")
        values[node.index] = v
    return Activations(graph, values, aux)


def evaluate(graph: Graph, inputs) -> np.ndarray:
    """Value of the final node; deterministic given inputs and parameters."""
    return forward(graph, inputs).output


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape == (1, 1):
        return np.array([[grad.sum()]])
    raise GraphError(f"cannot reduce gradient {grad.shape} to {shape}")


def _adjoint_sweep(graph: Graph, acts: Activations, seed: float) -> list:
    out = acts.values[graph.output_index]
    if out.shape != (1, 1):
        raise GraphError(
            f"backward requires a scalar (1x1) output, got {out.shape}"
        )
    adj: list = [None] * len(graph.nodes)

    def acc(i, g):
        if adj[i] is None:
            adj[i] = np.array(g, dtype=np.float64)
        else:
            adj[i] += g

    acc(graph.output_index, np.array([[float(seed)]]))
    values = acts.values
    for node in reversed(graph.nodes):
        g = adj[node.index]
        if g is None or node.op in ("input", "param", "const"):
            continue
        g = np.ascontiguousarray(g)
        op, args = node.op, node.args
        if op == "affine":
            x, w, _ = (values[i] for i in args)
            acc(args[0], g @ w.T)
            acc(args[1], x.T @ g)
            acc(args[2], g.sum(axis=0, keepdims=True))
        elif op == "relu":
            acc(args[0], K.relu_bwd(values[args[0]], g))
        elif op == "l2norm":
            acc(args[0], K.l2norm_rows_bwd(
                values[node.index], acts.aux[node.index], g, DEGENERATE_NORM_EPS))
        elif op == "softmax":
            acc(args[0], K.softmax_tau_bwd(values[node.index], g, node.meta["tau"]))
        elif op == "log":
            acc(args[0], K.log_bwd(values[args[0]], g, node.meta["floor"]))
        elif op == "power":
            acc(args[0], K.pow_bwd(values[args[0]], g, node.meta["exponent"],
                                   node.meta["floor"]))
        elif op == "pick":
            u = values[args[0]]
            du = np.zeros_like(u)
            du[np.arange(u.shape[0]), acts.aux[node.index]] = g[:, 0]
            acc(args[0], du)
        elif op == "sum_rows":
            x = values[args[0]]
            acc(args[0], np.repeat(g, x.shape[1], axis=1))
        elif op == "mean_all":
            x = values[args[0]]
            acc(args[0], np.full(x.shape, g[0, 0] / x.size))
        elif op == "add":
            a, b = values[args[0]], values[args[1]]
            acc(args[0], _unbroadcast(g, a.shape))
            acc(args[1], _unbroadcast(g, b.shape))
        elif op == "mul":
            a, b = values[args[0]], values[args[1]]
            acc(args[0], _unbroadcast(g * b, a.shape))
            acc(args[1], _unbroadcast(g * a, b.shape))
        elif op == "div":
            a, b = values[args[0]], values[args[1]]
            acc(args[0], _unbroadcast(g / b, a.shape))
            acc(args[1], _unbroadcast(-g * a / (b * b), b.shape))
        elif op == "scale_shift":
            acc(args[0], node.meta["scale"] * g)
        else:  # pragma: no cover
            raise GraphError(f"unknown op {op!r}")
    return adj


def backward(graph: Graph, acts: Activations, seed: float = 1.0) -> dict:
    """Gradients of the (scalar) output w.r.t. every parameter.

    Returns one entry per declared parameter; parameters the output does
    not depend on get zero gradients.
    """
    adj = _adjoint_sweep(graph, acts, seed)
    grads = {}
    for name, idx in graph._param_nodes.items():
        if adj[idx] is not None:
            grads[name] = adj[idx]
        else:
            grads[name] = np.zeros(graph.param_shapes[name])
    return grads


def input_gradient(graph: Graph, acts: Activations, name: str,
                   seed: float = 1.0) -> np.ndarray:
    """Gradient of the scalar output w.r.t. one named input."""
    if name not in graph.inputs:
        raise GraphError(f"unknown input {name!r}")
    idx = graph.inputs[name]
    adj = _adjoint_sweep(graph, acts, seed)
    if adj[idx] is None:
        return np.zeros_like(acts.values[idx])
    return adj[idx]


# -- vector-level primitives ---------------------------------------------


def softmax_tau(z, tau: float) -> np.ndarray:
    """Temperature softmax of a vector: exp(z_i/tau) / sum_j exp(z_j/tau).

    Computed with max subtraction; strictly positive, sums to 1. As tau
    shrinks toward 0 the output approaches the one-hot argmax vector.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    return K.softmax_tau_fwd(np.ascontiguousarray(z[None, :]), float(tau))[0]


def softmax_tau_jacobian(z, tau: float) -> np.ndarray:
    """Jacobian of the temperature softmax: (diag(s) - s s^T) / tau."""
    s = softmax_tau(z, tau)
    return (np.diag(s) - np.outer(s, s)) / tau


def l2_normalize(z) -> tuple[np.ndarray, bool]:
    """Scale a vector to unit norm; returns (vector, degenerate_flag).

    Vectors with norm below DEGENERATE_NORM_EPS come back unchanged with
    the flag set instead of dividing by (near) zero.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("l2_normalize input must be finite")
    norm = float(np.sqrt((z * z).sum()))
    if norm < DEGENERATE_NORM_EPS:
        return z.copy(), True
    return z / norm, False


def finite_diff_gradient(fn, point, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h."""
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.array(point, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = np.zeros_like(x)
        h.flat[i] = step
        hi = float(fn(x + h))
        lo = float(fn(x - h))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"non-finite function value near coordinate {i}")
        grad.flat[i] = (hi - lo) / (2.0 * step)
    return grad
