"""Dense float64 tensor expressions with reverse-mode automatic differentiation.

Values are plain numpy float64 arrays in row-major layout. An :class:`ExprGraph`
records every operation applied to them as an append-only list of eagerly
evaluated nodes; :func:`grad` walks the recording backwards accumulating
vector-Jacobian products. The backward pass itself can be recorded as new
graph nodes (``create_graph=True``), so expressions that already contain
gradients can be differentiated again. That second-order path is what lets a
loss depend on the spatial gradient of a network output and still be trained
by first-order descent.

The primitive set is deliberately small::

    matmul, add, sub, mul, reshape, transpose, concat,
    sum, mean, square, tanh, sin, relu, ln_cosh, norm_sq

Everything higher level (layers, SDE residuals, losses) is composed from
these. Every backward rule below is itself expressed in the same primitives,
which is the whole closure argument for higher-order differentiation. The
only implicit broadcasting is scalar-with-tensor; anything richer is done
explicitly with matmul against constant ones/selector matrices.

Nodes hold at most: a kind, parent ids, the evaluated value, and static
attributes (axes, target shapes). Node ids increase in creation order, so id
order is a topological order and the backward sweep is a single descending
loop. Graphs are cheap and meant to be rebuilt per training step.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Shape = tuple[int, ...]

_LN2 = float(np.log(2.0))
_HALF_PI = float(np.pi / 2.0)


class GraphError(Exception):
    """Misuse of the expression graph (foreign ref, non-scalar backward root)."""


class ShapeError(GraphError):
    """Operand shapes do not conform for the requested operation."""


def tensor_full(shape, value) -> np.ndarray:
    """Fresh tensor of the given shape with every entry equal to value.

    Rank 0 is allowed; zero or negative extents are not.
    """
    if isinstance(shape, (int, np.integer)):
        dims: Shape = (int(shape),)
    else:
        dims = tuple(int(s) for s in shape)
    if any(s <= 0 for s in dims):
        raise ShapeError(f"extents must be positive, got {dims}")
    return np.full(dims, float(value), dtype=np.float64)


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


class Node:
    __slots__ = ("kind", "parents", "value", "attrs")

    def __init__(self, kind: str, parents: tuple[int, ...], value: np.ndarray, attrs: dict | None):
        self.kind = kind
        self.parents = parents
        self.value = value
        self.attrs = attrs


class VarRef:
    """Cheap hashable handle to one node of an ExprGraph.

    Carries the node's shape so shape checks never need the graph. Arithmetic
    operators and the method set below mirror numpy's, which lets problem
    coefficients written against this surface also run on raw arrays.
    """

    __slots__ = ("graph", "id", "shape")

    def __init__(self, graph: "ExprGraph", nid: int, shape: Shape):
        self.graph = graph
        self.id = nid
        self.shape = shape

    @property
    def value(self) -> np.ndarray:
        return self.graph.nodes[self.id].value

    def __hash__(self) -> int:
        return hash((id(self.graph), self.id))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VarRef)
            and other.graph is self.graph
            and other.id == self.id
        )

    def __repr__(self) -> str:
        return f"VarRef(id={self.id}, kind={self.graph.nodes[self.id].kind!r}, shape={self.shape})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return self.graph.op("add", self, other)

    def __radd__(self, other):
        return self.graph.op("add", other, self)

    def __sub__(self, other):
        return self.graph.op("sub", self, other)

    def __rsub__(self, other):
        return self.graph.op("sub", other, self)

    def __mul__(self, other):
        return self.graph.op("mul", self, other)

    def __rmul__(self, other):
        return self.graph.op("mul", other, self)

    def __matmul__(self, other):
        return self.graph.op("matmul", self, other)

    def __neg__(self):
        return self.graph.op("mul", self, -1.0)

    def reshape(self, shape) -> "VarRef":
        return self.graph.op("reshape", self, shape=tuple(int(s) for s in shape))

    def transpose(self, axes=None) -> "VarRef":
        return self.graph.op("transpose", self, axes=None if axes is None else tuple(int(a) for a in axes))

    def sum(self, axis=None, keepdims: bool = False) -> "VarRef":
        return self.graph.op("sum", self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "VarRef":
        return self.graph.op("mean", self, axis=axis, keepdims=keepdims)

    def square(self) -> "VarRef":
        return self.graph.op("square", self)

    def tanh(self) -> "VarRef":
        return self.graph.op("tanh", self)

    def sin(self) -> "VarRef":
        return self.graph.op("sin", self)

    def relu(self) -> "VarRef":
        return self.graph.op("relu", self)

    def ln_cosh(self) -> "VarRef":
        return self.graph.op("ln_cosh", self)

    def norm_sq(self, axis=None, keepdims: bool = False) -> "VarRef":
        return self.graph.op("norm_sq", self, axis=axis, keepdims=keepdims)


# ---------------------------------------------------------------------------
# forward evaluation of primitives


def _ew_binary(name, a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(
            f"{name}: shapes {a.shape} and {b.shape} differ "
            "(only scalar-with-tensor broadcast is supported)"
        )


def _check_axis(name, x: np.ndarray, axis):
    if axis is None:
        return
    if axis not in (0, 1):
        raise ShapeError(f"{name}: axis must be None, 0 or 1, got {axis!r}")
    if x.ndim != 2:
        raise ShapeError(f"{name}: axis={axis} requires a rank-2 operand, got shape {x.shape}")


def _fw_matmul(vals, attrs):
    a, b = vals
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def _fw_add(vals, attrs):
    _ew_binary("add", *vals)
    return vals[0] + vals[1]


def _fw_sub(vals, attrs):
    _ew_binary("sub", *vals)
    return vals[0] - vals[1]


def _fw_mul(vals, attrs):
    _ew_binary("mul", *vals)
    return vals[0] * vals[1]


def _fw_reshape(vals, attrs):
    (x,) = vals
    shape = attrs.get("shape")
    if shape is None:
        raise GraphError("reshape: missing shape attribute")
    if any(s <= 0 for s in shape):
        raise ShapeError(f"reshape: extents must be positive, got {shape}")
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    return x.reshape(shape)


def _fw_transpose(vals, attrs):
    (x,) = vals
    axes = attrs["axes"]
    if axes is not None and sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation of axes of shape {x.shape}")
    return np.transpose(x, axes)


def _fw_concat(vals, attrs):
    axis = attrs.get("axis")
    if axis not in (0, 1):
        raise ShapeError(f"concat: axis must be 0 or 1, got {axis!r}")
    other = 1 - axis
    for v in vals:
        if v.ndim != 2:
            raise ShapeError(f"concat: needs rank-2 operands, got shape {v.shape}")
        if v.shape[other] != vals[0].shape[other]:
            raise ShapeError(
                f"concat: shapes {[v.shape for v in vals]} do not align on axis {other}"
            )
    return np.concatenate(vals, axis=axis)


def _fw_sum(vals, attrs):
    (x,) = vals
    _check_axis("sum", x, attrs["axis"])
    return np.sum(x, axis=attrs["axis"], keepdims=attrs["keepdims"] if attrs["axis"] is not None else False)


def _fw_mean(vals, attrs):
    (x,) = vals
    _check_axis("mean", x, attrs["axis"])
    return np.mean(x, axis=attrs["axis"], keepdims=attrs["keepdims"] if attrs["axis"] is not None else False)


def _fw_norm_sq(vals, attrs):
    (x,) = vals
    _check_axis("norm_sq", x, attrs["axis"])
    sq = x * x
    return np.sum(sq, axis=attrs["axis"], keepdims=attrs["keepdims"] if attrs["axis"] is not None else False)


def _fw_square(vals, attrs):
    return np.square(vals[0])


def _fw_tanh(vals, attrs):
    return np.tanh(vals[0])


def _fw_sin(vals, attrs):
    return np.sin(vals[0])


def _fw_relu(vals, attrs):
    return np.maximum(vals[0], 0.0)


def _fw_ln_cosh(vals, attrs):
    # ln cosh x = |x| + ln((1 + e^(-2|x|)) / 2): exact and overflow-safe.
    ax = np.abs(vals[0])
    return ax + np.log1p(np.exp(-2.0 * ax)) - _LN2


_FORWARD = {
    "matmul": _fw_matmul,
    "add": _fw_add,
    "sub": _fw_sub,
    "mul": _fw_mul,
    "reshape": _fw_reshape,
    "transpose": _fw_transpose,
    "concat": _fw_concat,
    "sum": _fw_sum,
    "mean": _fw_mean,
    "square": _fw_square,
    "tanh": _fw_tanh,
    "sin": _fw_sin,
    "relu": _fw_relu,
    "ln_cosh": _fw_ln_cosh,
    "norm_sq": _fw_norm_sq,
}

PRIMITIVE_KINDS = tuple(sorted(_FORWARD))

_REDUCTION_DEFAULTS = {"axis": None, "keepdims": False}
_DEFAULT_ATTRS = {
    "sum": _REDUCTION_DEFAULTS,
    "mean": _REDUCTION_DEFAULTS,
    "norm_sq": _REDUCTION_DEFAULTS,
    "transpose": {"axes": None},
}


class ExprGraph:
    """Append-only recording of tensor operations.

    ``leaf`` marks inputs and parameters (things one typically differentiates
    with respect to), ``const`` marks data; the distinction is documentation
    only, gradients flow to both on request.
    """

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, kind: str, parents: tuple[int, ...], value: np.ndarray, attrs=None) -> VarRef:
        self.nodes.append(Node(kind, parents, value, attrs))
        return VarRef(self, len(self.nodes) - 1, value.shape)

    def leaf(self, value) -> VarRef:
        return self._append("leaf", (), _as_array(value))

    def const(self, value) -> VarRef:
        return self._append("const", (), _as_array(value))

    def _coerce(self, x) -> VarRef:
        if isinstance(x, VarRef):
            if x.graph is not self:
                raise GraphError("operand belongs to a different ExprGraph")
            return x
        return self.const(x)

    def op(self, kind: str, *inputs, **attrs) -> VarRef:
        """Append one primitive node. Inputs may be refs, arrays, or scalars."""
        fwd = _FORWARD.get(kind)
        if fwd is None:
            raise GraphError(f"unknown op kind {kind!r}; primitives are {PRIMITIVE_KINDS}")
        defaults = _DEFAULT_ATTRS.get(kind)
        if defaults is not None:
            attrs = {**defaults, **attrs}
        refs = [self._coerce(x) for x in inputs]
        vals = [self.nodes[r.id].value for r in refs]
        out = fwd(vals, attrs)
        return self._append(kind, tuple(r.id for r in refs), _as_array(out), attrs or None)


def graph_op(graph: ExprGraph, kind: str, *inputs, **attrs) -> VarRef:
    """Functional alias for ``graph.op`` (handy for programmatic op kinds)."""
    return graph.op(kind, *inputs, **attrs)


def concat(refs: Sequence[VarRef], axis: int) -> VarRef:
    if not refs:
        raise ShapeError("concat: needs at least one operand")
    return refs[0].graph.op("concat", *refs, axis=axis)


def matmul(a: VarRef, b) -> VarRef:
    return a.graph.op("matmul", a, b)


# ---------------------------------------------------------------------------
# backward: one VJP rule per primitive, written against an ops provider so the
# same rule can either compute numbers directly or record new graph nodes.


class _ValueOps:
    """Primitive semantics applied directly to numpy arrays."""

    @staticmethod
    def const(arr):
        return _as_array(arr)

    @staticmethod
    def matmul(a, b):
        return a @ b

    @staticmethod
    def add(a, b):
        return a + b

    @staticmethod
    def sub(a, b):
        return a - b

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def reshape(x, shape):
        return x.reshape(shape)

    @staticmethod
    def transpose(x, axes=None):
        return np.transpose(x, axes)

    @staticmethod
    def sum(x, axis=None, keepdims=False):
        return np.sum(x, axis=axis, keepdims=keepdims if axis is not None else False)

    @staticmethod
    def square(x):
        return np.square(x)

    @staticmethod
    def tanh(x):
        return np.tanh(x)

    @staticmethod
    def sin(x):
        return np.sin(x)


_VALUE_OPS = _ValueOps()


class _GraphOps:
    """Primitive semantics that record nodes on a graph (create_graph path)."""

    __slots__ = ("g",)

    def __init__(self, g: ExprGraph):
        self.g = g

    def const(self, arr):
        return self.g.const(arr)

    def matmul(self, a, b):
        return self.g.op("matmul", a, b)

    def add(self, a, b):
        return self.g.op("add", a, b)

    def sub(self, a, b):
        return self.g.op("sub", a, b)

    def mul(self, a, b):
        return self.g.op("mul", a, b)

    def reshape(self, x, shape):
        return self.g.op("reshape", x, shape=tuple(shape))

    def transpose(self, x, axes=None):
        return self.g.op("transpose", x, axes=None if axes is None else tuple(axes))

    def sum(self, x, axis=None, keepdims=False):
        return self.g.op("sum", x, axis=axis, keepdims=keepdims)

    def square(self, x):
        return self.g.op("square", x)

    def tanh(self, x):
        return self.g.op("tanh", x)

    def sin(self, x):
        return self.g.op("sin", x)


def _shp(x) -> Shape:
    return x.shape


def _raw(x) -> np.ndarray:
    return x.value if isinstance(x, VarRef) else x


def _reduce_to(ops, up, shape: Shape):
    """Adapt an upstream adjoint to an operand that was scalar-broadcast."""
    if _shp(up) == shape:
        return up
    if shape != ():
        raise ShapeError(f"cannot reduce adjoint of shape {_shp(up)} to {shape}")
    return ops.sum(up)


def _vjp_matmul(ops, ins, out, up, attrs):
    a, b = ins
    return (ops.matmul(up, ops.transpose(b)), ops.matmul(ops.transpose(a), up))


def _vjp_add(ops, ins, out, up, attrs):
    a, b = ins
    return (_reduce_to(ops, up, _shp(a)), _reduce_to(ops, up, _shp(b)))


def _vjp_sub(ops, ins, out, up, attrs):
    a, b = ins
    gb = ops.mul(_reduce_to(ops, up, _shp(b)), ops.const(-1.0))
    return (_reduce_to(ops, up, _shp(a)), gb)


def _vjp_mul(ops, ins, out, up, attrs):
    a, b = ins
    ga = _reduce_to(ops, ops.mul(up, b), _shp(a))
    gb = _reduce_to(ops, ops.mul(up, a), _shp(b))
    return (ga, gb)


def _vjp_reshape(ops, ins, out, up, attrs):
    return (ops.reshape(up, _shp(ins[0])),)


def _vjp_transpose(ops, ins, out, up, attrs):
    axes = attrs["axes"]
    if axes is None:
        inv = None
    else:
        inv = tuple(int(i) for i in np.argsort(axes))
    return (ops.transpose(up, inv),)


def _vjp_concat(ops, ins, out, up, attrs):
    axis = attrs["axis"]
    total = _shp(out)[axis]
    grads = []
    off = 0
    for x in ins:
        w = _shp(x)[axis]
        sel = np.zeros((total, w)) if axis == 1 else np.zeros((w, total))
        if axis == 1:
            sel[off : off + w, :] = np.eye(w)
            grads.append(ops.matmul(up, ops.const(sel)))
        else:
            sel[:, off : off + w] = np.eye(w)
            grads.append(ops.matmul(ops.const(sel), up))
        off += w
    return tuple(grads)


def _broadcast_back(ops, up, in_shape: Shape, axis, keepdims, scale: float):
    """Spread a reduced adjoint back over in_shape, times a constant scale."""
    if axis is None:
        return ops.mul(up, ops.const(np.full(in_shape, scale)))
    m, k = in_shape
    if axis == 1:
        up2 = up if keepdims else ops.reshape(up, (m, 1))
        return ops.matmul(up2, ops.const(np.full((1, k), scale)))
    up2 = up if keepdims else ops.reshape(up, (1, k))
    return ops.matmul(ops.const(np.full((m, 1), scale)), up2)


def _vjp_sum(ops, ins, out, up, attrs):
    return (_broadcast_back(ops, up, _shp(ins[0]), attrs["axis"], attrs["keepdims"], 1.0),)


def _vjp_mean(ops, ins, out, up, attrs):
    (x,) = ins
    axis = attrs["axis"]
    count = np.prod(_shp(x)) if axis is None else _shp(x)[axis]
    return (_broadcast_back(ops, up, _shp(x), axis, attrs["keepdims"], 1.0 / float(count)),)


def _vjp_square(ops, ins, out, up, attrs):
    (x,) = ins
    return (ops.mul(up, ops.mul(ops.const(2.0), x)),)


def _vjp_tanh(ops, ins, out, up, attrs):
    return (ops.mul(up, ops.sub(ops.const(1.0), ops.square(out))),)


def _vjp_sin(ops, ins, out, up, attrs):
    # cos x = sin(x + pi/2), keeping the rule inside the primitive set.
    (x,) = ins
    return (ops.mul(up, ops.sin(ops.add(x, ops.const(_HALF_PI)))),)


def _vjp_relu(ops, ins, out, up, attrs):
    mask = (_raw(ins[0]) > 0.0).astype(np.float64)
    return (ops.mul(up, ops.const(mask)),)


def _vjp_ln_cosh(ops, ins, out, up, attrs):
    return (ops.mul(up, ops.tanh(ins[0])),)


def _vjp_norm_sq(ops, ins, out, up, attrs):
    (x,) = ins
    axis = attrs["axis"]
    two_x = ops.mul(ops.const(2.0), x)
    if axis is None:
        return (ops.mul(up, two_x),)
    spread = _broadcast_back(ops, up, _shp(x), axis, attrs["keepdims"], 1.0)
    return (ops.mul(spread, two_x),)


_VJP = {
    "matmul": _vjp_matmul,
    "add": _vjp_add,
    "sub": _vjp_sub,
    "mul": _vjp_mul,
    "reshape": _vjp_reshape,
    "transpose": _vjp_transpose,
    "concat": _vjp_concat,
    "sum": _vjp_sum,
    "mean": _vjp_mean,
    "square": _vjp_square,
    "tanh": _vjp_tanh,
    "sin": _vjp_sin,
    "relu": _vjp_relu,
    "ln_cosh": _vjp_ln_cosh,
    "norm_sq": _vjp_norm_sq,
}


def grad(
    graph: ExprGraph,
    scalar: VarRef,
    wrt: Iterable[VarRef],
    create_graph: bool = False,
):
    """Gradients of a rank-0 node with respect to each ref in wrt.

    Returns a dict keyed by the wrt refs. With ``create_graph=False`` the
    values are numpy arrays; with ``create_graph=True`` they are new VarRefs
    recorded on the same graph, so the result can be differentiated again.
    Refs that the scalar does not depend on get exact zeros.

    Accumulation order is fixed by node order, so results are deterministic.
    """
    wrt = list(wrt)
    if not (isinstance(scalar, VarRef) and scalar.graph is graph):
        raise GraphError("scalar does not belong to this graph")
    for r in wrt:
        if not (isinstance(r, VarRef) and r.graph is graph):
            raise GraphError("wrt ref does not belong to this graph")
    if scalar.shape != ():
        raise GraphError(f"grad root must be rank 0, got shape {scalar.shape}")

    nodes = graph.nodes
    limit = scalar.id
    # Forward sweep: mark nodes whose value depends on some wrt ref. Backward
    # skips everything unmarked, so weight-only chains cost nothing when
    # differentiating with respect to inputs and vice versa.
    dep = bytearray(limit + 1)
    for r in wrt:
        if r.id <= limit:
            dep[r.id] = 1
    for i in range(limit + 1):
        if dep[i]:
            continue
        for p in nodes[i].parents:
            if dep[p]:
                dep[i] = 1
                break

    ops = _GraphOps(graph) if create_graph else _VALUE_OPS
    adjoint: dict[int, object] = {}
    if dep[limit]:
        adjoint[limit] = ops.const(np.ones(()))
        for nid in range(limit, -1, -1):
            up = adjoint.get(nid)
            if up is None:
                continue
            node = nodes[nid]
            if not node.parents:
                continue
            if not any(dep[p] for p in node.parents):
                continue
            if create_graph:
                ins = [VarRef(graph, p, nodes[p].value.shape) for p in node.parents]
                out = VarRef(graph, nid, node.value.shape)
            else:
                ins = [nodes[p].value for p in node.parents]
                out = node.value
            gs = _VJP[node.kind](ops, ins, out, up, node.attrs)
            for p, gp in zip(node.parents, gs):
                if gp is None or not dep[p]:
                    continue
                have = adjoint.get(p)
                adjoint[p] = gp if have is None else ops.add(have, gp)

    result = {}
    for r in wrt:
        g = adjoint.get(r.id)
        if g is None:
            zeros = np.zeros(r.shape)
            g = graph.const(zeros) if create_graph else zeros
        result[r] = g
    return result
