"""Feed-forward networks with dense or tensor-network (two-core MPO) layers.

A TN layer replaces a dense d^2 x d^2 weight matrix by a rank-chi sum of
Kronecker factors,

    W = sum_a A_a (x) B_a,    A_a, B_a in R^(d x d),

stored as two rank-3 cores W1, W2 of shape (d, d, chi). That is 2 chi d^2
trainable weight entries instead of d^4, plus the usual d^2 bias. The matrix
is contracted afresh inside the expression graph on every forward pass, so
gradients flow to both cores; chi = d^2 recovers full expressivity and
chi = d^2 / 2 matches the dense layer's parameter count exactly.

Networks here are the three-layer shape used throughout the experiments:
dense in -> x, middle layer x -> x (dense or TN), dense x -> 1 with identity
output. Architecture bookkeeping (parameter counting, parsing labels like
"TNN(16,4)") lives in ArchitectureSpec.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .autodiff import (
    ExprGraph,
    GraphError,
    ShapeError,
    VarRef,
    _GraphOps,
    _ValueOps,
    concat,
    grad,
)

ACTIVATIONS = ("tanh", "sine", "relu", "identity")


class ArchitectureError(ValueError):
    """Malformed architecture: bad label, non-square TN width, bad widths."""


def _check_activation(name: str) -> str:
    if name not in ACTIVATIONS:
        raise ArchitectureError(f"unknown activation {name!r}; choose from {ACTIVATIONS}")
    return name


@dataclass
class DenseLayer:
    """Affine map plus activation: act(x W^T + b), W of shape (out, in)."""

    w: np.ndarray
    b: np.ndarray
    activation: str = "tanh"

    @property
    def in_width(self) -> int:
        return self.w.shape[1]

    @property
    def out_width(self) -> int:
        return self.w.shape[0]

    @property
    def param_count(self) -> int:
        return self.w.size + self.b.size


@dataclass
class TNLayer:
    """Square layer whose weight matrix is a rank-chi sum of Kronecker factors.

    Cores w1, w2 have shape (d, d, chi); the contracted matrix acts on width
    d^2. Bias is a full d^2 vector.
    """

    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray
    activation: str = "tanh"

    @property
    def d(self) -> int:
        return self.w1.shape[0]

    @property
    def chi(self) -> int:
        return self.w1.shape[2]

    @property
    def in_width(self) -> int:
        return self.d * self.d

    @property
    def out_width(self) -> int:
        return self.d * self.d

    @property
    def param_count(self) -> int:
        return self.w1.size + self.w2.size + self.b.size


Layer = DenseLayer | TNLayer


@dataclass(frozen=True)
class ArchitectureSpec:
    """One architecture from the two families compared by the experiments.

    kind "dnn": layers in -> x -> y -> 1, all dense.
    kind "tnn": layers in -> x, TN x -> x with bond dimension chi, x -> 1.
    """

    kind: str
    x: int
    y: int | None = None
    chi: int | None = None
    input_dim: int = 1

    def __post_init__(self):
        if self.kind not in ("dnn", "tnn"):
            raise ArchitectureError(f"kind must be 'dnn' or 'tnn', got {self.kind!r}")
        if self.input_dim < 1 or self.x < 1:
            raise ArchitectureError(f"widths must be positive, got input_dim={self.input_dim}, x={self.x}")
        if self.kind == "dnn":
            if self.y is None or self.y < 1:
                raise ArchitectureError(f"DNN needs a positive second width y, got {self.y!r}")
        else:
            if self.chi is None or self.chi < 1:
                raise ArchitectureError(f"TNN needs a positive bond dimension chi, got {self.chi!r}")
            d = math.isqrt(self.x)
            if d * d != self.x:
                raise ArchitectureError(
                    f"TNN width must be a perfect square so the TN layer can act on it, got {self.x}"
                )

    @property
    def label(self) -> str:
        if self.kind == "dnn":
            return f"DNN({self.x},{self.y})"
        return f"TNN({self.x},{self.chi})"

    @property
    def y_or_chi(self) -> int:
        """The second architecture number: y for dense, chi for tensorized."""
        return self.y if self.kind == "dnn" else self.chi

    @classmethod
    def parse(cls, text: str, input_dim: int) -> "ArchitectureSpec":
        """Parse labels like 'TNN(16,4)' or 'DNN(6,35)' (case-insensitive)."""
        s = text.strip().upper().replace(" ", "")
        for kind in ("TNN", "DNN"):
            if s.startswith(kind + "(") and s.endswith(")"):
                body = s[len(kind) + 1 : -1]
                parts = body.split(",")
                if len(parts) != 2:
                    break
                try:
                    a, b = int(parts[0]), int(parts[1])
                except ValueError:
                    break
                if kind == "DNN":
                    return cls(kind="dnn", x=a, y=b, input_dim=input_dim)
                return cls(kind="tnn", x=a, chi=b, input_dim=input_dim)
        raise ArchitectureError(f"cannot parse architecture label {text!r} (want e.g. 'TNN(16,4)')")

    def param_count(self) -> int:
        if self.kind == "dnn":
            return (self.input_dim + 1) * self.x + (self.x + 1) * self.y + (self.y + 1)
        return (self.input_dim + 1) * self.x + (2 * self.chi + 1) * self.x + (self.x + 1)


@dataclass
class Network:
    """Stack of layers; the last one must have output width 1 and identity act."""

    layers: list
    input_dim: int

    def __post_init__(self):
        width = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_width != width:
                raise ArchitectureError(
                    f"layer {i} expects input width {layer.in_width}, previous width is {width}"
                )
            width = layer.out_width
            _check_activation(layer.activation)
        if self.layers:
            last = self.layers[-1]
            if last.out_width != 1:
                raise ArchitectureError(f"final layer must have output width 1, got {last.out_width}")
            if last.activation != "identity":
                raise ArchitectureError("final layer must use the identity activation")

    def parameters(self) -> list:
        """Flat parameter list in a fixed order: per layer (w, b) or (w1, w2, b)."""
        out = []
        for layer in self.layers:
            if isinstance(layer, TNLayer):
                out.extend([layer.w1, layer.w2, layer.b])
            else:
                out.extend([layer.w, layer.b])
        return out

    def set_parameters(self, arrays) -> None:
        arrays = list(arrays)
        expected = len(self.parameters())
        if len(arrays) != expected:
            raise ArchitectureError(f"expected {expected} parameter arrays, got {len(arrays)}")
        k = 0
        for layer in self.layers:
            if isinstance(layer, TNLayer):
                layer.w1, layer.w2, layer.b = (np.asarray(a, dtype=np.float64) for a in arrays[k : k + 3])
                k += 3
            else:
                layer.w, layer.b = (np.asarray(a, dtype=np.float64) for a in arrays[k : k + 2])
                k += 2

    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.layers)


def param_count(network: Network) -> int:
    """Total number of trainable scalars (weights, cores, and biases)."""
    return network.param_count()


# ---------------------------------------------------------------------------
# forward pass (shared between value mode and graph mode via the ops provider)


def _contract_cores(ops, w1, w2, d: int, chi: int):
    """sum_a A_a (x) B_a by contracting the bond index, then regrouping.

    Cores reshape to (d^2, chi); their product carries indices ((i,j),(k,l)).
    Regrouping to rows (i,k) and columns (j,l) is exactly the Kronecker
    arrangement, so the result acts on width-d^2 vectors as (out, in).
    """
    a = ops.reshape(w1, (d * d, chi))
    b = ops.reshape(w2, (d * d, chi))
    prod = ops.matmul(a, ops.transpose(b))
    quad = ops.reshape(prod, (d, d, d, d))
    regrouped = ops.transpose(quad, (0, 2, 1, 3))
    return ops.reshape(regrouped, (d * d, d * d))


def tn_contract_weight(layer: TNLayer) -> np.ndarray:
    """The TN layer's full weight matrix, as a value."""
    return _contract_cores(_ValueOps, layer.w1, layer.w2, layer.d, layer.chi)


def _activate(ops, h, activation: str):
    if activation == "tanh":
        return ops.tanh(h)
    if activation == "sine":
        return ops.sin(h)
    if activation == "relu":
        return ops.relu(h)
    return h


class _GraphOpsFull(_GraphOps):
    """Graph ops plus the few extra primitives the forward pass needs."""

    __slots__ = ()

    def relu(self, x):
        return self.g.op("relu", x)


def _apply_layer(ops, layer: Layer, params: tuple, x, m: int):
    """One layer on a (m, in_width) batch; params are refs or arrays."""
    if isinstance(layer, TNLayer):
        w1, w2, b = params
        w = _contract_cores(ops, w1, w2, layer.d, layer.chi)
    else:
        w, b = params
    h = ops.matmul(x, ops.transpose(w))
    bias_rows = ops.matmul(ops.const(np.ones((m, 1))), ops.reshape(b, (1, layer.out_width)))
    return _activate(ops, ops.add(h, bias_rows), layer.activation)


def _bind_layer(graph: ExprGraph, layer: Layer) -> tuple:
    if isinstance(layer, TNLayer):
        return (graph.leaf(layer.w1), graph.leaf(layer.w2), graph.leaf(layer.b))
    return (graph.leaf(layer.w), graph.leaf(layer.b))


def layer_forward(layer: Layer, x: VarRef) -> VarRef:
    """Apply one layer to a batch ref, binding its parameters as fresh leaves."""
    if len(x.shape) != 2:
        raise ShapeError(f"layer input must be rank 2, got shape {x.shape}")
    if x.shape[1] != layer.in_width:
        raise ShapeError(f"layer expects input width {layer.in_width}, got {x.shape[1]}")
    graph = x.graph
    return _apply_layer(_GraphOpsFull(graph), layer, _bind_layer(graph, layer), x, x.shape[0])


@dataclass
class NetworkBinding:
    """A network's parameters materialized as leaves on one graph.

    Reuse one binding for every evaluation inside a training step, so the
    gradient of the step's loss lands on a single set of parameter leaves.
    """

    network: Network
    graph: ExprGraph
    layer_params: list
    params: list  # flat leaf list, same order as Network.parameters()

    def forward(self, xin: VarRef) -> VarRef:
        if xin.shape[1] != self.network.input_dim:
            raise ShapeError(
                f"network expects input width {self.network.input_dim}, got {xin.shape[1]}"
            )
        ops = _GraphOpsFull(self.graph)
        h = xin
        m = xin.shape[0]
        for layer, params in zip(self.network.layers, self.layer_params):
            h = _apply_layer(ops, layer, params, h, m)
        return h

    def eval(self, t, x):
        """u and its spatial gradient on a batch.

        t: scalar time, (m, 1) array, or ref. x: (m, d) array or ref. Returns
        (u, du) with u of shape (m, 1) and du of shape (m, d); du is recorded
        on the graph (create_graph), so losses built from it stay trainable.
        """
        graph = self.graph
        x_ref = x if isinstance(x, VarRef) else graph.leaf(x)
        m = x_ref.shape[0]
        if isinstance(t, VarRef):
            t_ref = t
        else:
            t_arr = np.asarray(t, dtype=np.float64)
            if t_arr.shape == ():
                t_arr = np.full((m, 1), float(t_arr))
            t_ref = graph.const(t_arr)
        u = self.forward(concat([t_ref, x_ref], axis=1))
        du = grad(graph, u.sum(), [x_ref], create_graph=True)[x_ref]
        return u, du


def bind(network: Network, graph: ExprGraph) -> NetworkBinding:
    layer_params = [_bind_layer(graph, layer) for layer in network.layers]
    flat = [p for params in layer_params for p in params]
    return NetworkBinding(network=network, graph=graph, layer_params=layer_params, params=flat)


def network_eval(network: Network, graph: ExprGraph, t_batch, x_batch):
    """One-off (u, du) evaluation; binds fresh parameter leaves each call."""
    return bind(network, graph).eval(t_batch, x_batch)


# ---------------------------------------------------------------------------
# construction and initialization


def build_network(
    spec: ArchitectureSpec,
    activation: str = "tanh",
    init: str = "auto",
    seed: int = 0,
) -> Network:
    """Three-layer network for an architecture spec, initialized and ready.

    init: 'glorot', 'matched' (TN cores rescaled so the contracted matrix has
    Glorot magnitude; TNN only), or 'auto' (matched for TNN, glorot for DNN).
    """
    _check_activation(activation)
    if init not in ("auto", "glorot", "matched"):
        raise ArchitectureError(f"unknown init {init!r}; choose auto, glorot or matched")
    layers: list[Layer]
    if spec.kind == "dnn":
        layers = [
            DenseLayer(np.zeros((spec.x, spec.input_dim)), np.zeros(spec.x), activation),
            DenseLayer(np.zeros((spec.y, spec.x)), np.zeros(spec.y), activation),
            DenseLayer(np.zeros((1, spec.y)), np.zeros(1), "identity"),
        ]
    else:
        d = math.isqrt(spec.x)
        layers = [
            DenseLayer(np.zeros((spec.x, spec.input_dim)), np.zeros(spec.x), activation),
            TNLayer(np.zeros((d, d, spec.chi)), np.zeros((d, d, spec.chi)), np.zeros(spec.x), activation),
            DenseLayer(np.zeros((1, spec.x)), np.zeros(1), "identity"),
        ]
    network = Network(layers=layers, input_dim=spec.input_dim)
    if init == "matched" and spec.kind == "dnn":
        raise ArchitectureError("matched-magnitude init needs a TN layer; use glorot for DNNs")
    if init == "glorot" or (init == "auto" and spec.kind == "dnn"):
        init_glorot(network, seed)
    else:
        init_matched_magnitude(network, seed)
    return network


def _glorot_std(fan_in: int, fan_out: int) -> float:
    return math.sqrt(2.0 / (fan_in + fan_out))


def _core_std(sigma: float, chi: int) -> float:
    # Entries of the contracted matrix are sums of chi products of two core
    # entries, so their stddev is sqrt(chi) * s^2; solving for s gives the
    # fourth root.
    return (sigma * sigma / chi) ** 0.25


def _draw_layer(layer: Layer, seed: int, index: int) -> None:
    if isinstance(layer, TNLayer):
        s = _core_std(_glorot_std(layer.in_width, layer.out_width), layer.chi)
        shape = (layer.d, layer.d, layer.chi)
        layer.w1 = rng.normal(shape, 0.0, s, rng.stream_key(seed, rng.INIT_STREAM, 2 * index))
        layer.w2 = rng.normal(shape, 0.0, s, rng.stream_key(seed, rng.INIT_STREAM, 2 * index + 1))
        layer.b = np.zeros(layer.in_width)
    else:
        std = _glorot_std(layer.in_width, layer.out_width)
        layer.w = rng.normal(
            (layer.out_width, layer.in_width), 0.0, std, rng.stream_key(seed, rng.INIT_STREAM, 2 * index)
        )
        layer.b = np.zeros(layer.out_width)


def init_glorot(network: Network, seed: int) -> Network:
    """Glorot-normal weights, zero biases; TN cores at the fourth-root scale."""
    for i, layer in enumerate(network.layers):
        _draw_layer(layer, seed, i)
    return network


def init_matched_magnitude(network: Network, seed: int) -> Network:
    """Glorot draw, then rescale each TN layer's cores so the contracted
    matrix's empirical stddev equals the Glorot target exactly."""
    if not any(isinstance(layer, TNLayer) for layer in network.layers):
        raise ArchitectureError("matched-magnitude init needs at least one TN layer")
    for i, layer in enumerate(network.layers):
        _draw_layer(layer, seed, i)
        if isinstance(layer, TNLayer):
            target = _glorot_std(layer.in_width, layer.out_width)
            actual = float(tn_contract_weight(layer).std())
            if actual > 0.0:
                scale = math.sqrt(target / actual)
                layer.w1 = layer.w1 * scale
                layer.w2 = layer.w2 * scale
    return network


# ---------------------------------------------------------------------------
# serialization


def save_weights(network: Network, path) -> None:
    """Shape-tagged npz snapshot; load_weights restores an identical network."""
    arrays: dict[str, np.ndarray] = {}
    meta = {"input_dim": network.input_dim, "layers": []}
    for i, layer in enumerate(network.layers):
        tag = f"layer{i:02d}"
        if isinstance(layer, TNLayer):
            arrays[f"{tag}.w1"] = layer.w1
            arrays[f"{tag}.w2"] = layer.w2
            arrays[f"{tag}.b"] = layer.b
            meta["layers"].append({"kind": "tn", "activation": layer.activation})
        else:
            arrays[f"{tag}.w"] = layer.w
            arrays[f"{tag}.b"] = layer.b
            meta["layers"].append({"kind": "dense", "activation": layer.activation})
    arrays["meta"] = np.array(json.dumps(meta))
    np.savez(path, **arrays)


def load_weights(path) -> Network:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        layers: list[Layer] = []
        for i, entry in enumerate(meta["layers"]):
            tag = f"layer{i:02d}"
            if entry["kind"] == "tn":
                layers.append(
                    TNLayer(data[f"{tag}.w1"], data[f"{tag}.w2"], data[f"{tag}.b"], entry["activation"])
                )
            else:
                layers.append(DenseLayer(data[f"{tag}.w"], data[f"{tag}.b"], entry["activation"]))
    return Network(layers=layers, input_dim=int(meta["input_dim"]))
