"""Dataflow graph model: validation, execution, and static analyzers.

A GraphSpec is an ordered list of operator nodes over a named weight store.
Nodes may only reference earlier nodes or the graph input, so the list order
is already a topological order and cycles are impossible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ExecutionError, GraphValidationError, ShapeError
from .kernels import OP_KINDS
from .kernels.shapes import SAME, VALID, conv_out_hw
from .tensor import DTYPE_WIDTH, FLOAT32, INT8Q, Tensor

INPUT_ID = "input"


@dataclass
class OperatorNode:
    id: str
    op_kind: str
    input_ids: list
    attributes: dict = field(default_factory=dict)
    weight_refs: list = field(default_factory=list)


@dataclass
class GraphSpec:
    name: str
    input_shape: tuple
    nodes: list
    output_id: str
    weights: dict
    dtype_profile: str = FLOAT32


# Required attribute keys per op kind (beyond defaults).
_ATTR_SCHEMA = {
    "conv2d": (),
    "depthwise_conv2d": (),
    "fully_connected": (),
    "pool": ("kind",),
    "resize_bilinear": ("out_h", "out_w"),
    "add": (),
    "relu": (),
    "concat_channels": (),
    "softmax": (),
}

_WEIGHT_COUNT = {"conv2d": 2, "depthwise_conv2d": 2, "fully_connected": 2}


def _stride(attrs):
    s = attrs.get("stride", (1, 1))
    return (s, s) if isinstance(s, int) else tuple(s)


def _infer_shape(node, in_shapes, weights):
    """Output shape of one node given its input shapes and weight tensors."""
    kind = node.op_kind
    a = node.attributes
    x = in_shapes[0]
    if kind in ("conv2d", "depthwise_conv2d"):
        w = weights[0].shape
        kh, kw, cin, cout = w
        if kind == "depthwise_conv2d":
            if cout != 1 or x[3] != cin:
                raise ShapeError(
                    f"depthwise channels {cin} incompatible with input {x[3]}",
                    dimension="channels",
                )
            cout = cin
        elif x[3] != cin:
            raise ShapeError(
                f"input channels {x[3]} != weight Cin {cin}", dimension="channels"
            )
        oh, ow = conv_out_hw(x[1:3], (kh, kw), _stride(a), a.get("padding", SAME))
        return (x[0], oh, ow, cout)
    if kind == "fully_connected":
        rows, cols = weights[0].shape[-2], weights[0].shape[-1]
        if x[1] * x[2] * x[3] != rows:
            raise ShapeError(
                f"flattened input {x[1] * x[2] * x[3]} != weight rows {rows}",
                dimension="rows",
            )
        return (x[0], 1, 1, cols)
    if kind == "pool":
        window = a.get("window")
        if window is None:
            return (x[0], 1, 1, x[3])
        stride = a.get("pool_stride") or tuple(window)
        oh, ow = conv_out_hw(x[1:3], tuple(window), tuple(stride), a.get("padding", VALID))
        return (x[0], oh, ow, x[3])
    if kind == "resize_bilinear":
        return (x[0], a["out_h"], a["out_w"], x[3])
    if kind == "add":
        if in_shapes[0] != in_shapes[1]:
            raise ShapeError(
                f"add operands differ: {in_shapes[0]} vs {in_shapes[1]}"
            )
        return x
    if kind == "concat_channels":
        base = x[:3]
        for s in in_shapes[1:]:
            if s[:3] != base:
                raise ShapeError(f"concat spatial mismatch: {s[:3]} vs {base}")
        return (*base, sum(s[3] for s in in_shapes))
    # relu / softmax
    return x


class Graph:
    """A validated GraphSpec annotated with per-node output shapes."""

    def __init__(self, spec, node_shapes):
        self.spec = spec
        self.node_shapes = node_shapes

    @property
    def name(self):
        return self.spec.name

    @property
    def dtype_profile(self):
        return self.spec.dtype_profile

    @property
    def output_shape(self):
        return self.node_shapes[self.spec.output_id]

    def shapes_at(self, input_shape):
        """Re-propagate node shapes for a different input resolution."""
        return _propagate(self.spec, tuple(input_shape))


def _propagate(spec, input_shape):
    shapes = {INPUT_ID: tuple(input_shape)}
    for node in spec.nodes:
        in_shapes = [shapes[i] for i in node.input_ids]
        weights = [spec.weights.get(r) for r in node.weight_refs]
        try:
            shapes[node.id] = _infer_shape(node, in_shapes, weights)
        except ShapeError as e:
            raise GraphValidationError(
                f"node {node.id!r}: {e}", node_id=node.id
            ) from e
    return shapes


def validate(spec: GraphSpec) -> Graph:
    """Check structural invariants and shape-propagate every node."""
    if len(spec.input_shape) != 4:
        raise GraphValidationError("input_shape must have 4 extents")
    seen = {INPUT_ID}
    for node in spec.nodes:
        if node.op_kind not in OP_KINDS:
            raise GraphValidationError(
                f"node {node.id!r}: unknown op {node.op_kind!r}", node_id=node.id
            )
        if node.id in seen:
            raise GraphValidationError(
                f"duplicate node id {node.id!r}", node_id=node.id
            )
        for ref in node.input_ids:
            if ref not in seen:
                raise GraphValidationError(
                    f"node {node.id!r} references {ref!r} which is not an "
                    "earlier node or the graph input",
                    node_id=node.id,
                )
        for key in _ATTR_SCHEMA[node.op_kind]:
            if key not in node.attributes:
                raise GraphValidationError(
                    f"node {node.id!r} missing attribute {key!r}", node_id=node.id
                )
        expected_w = _WEIGHT_COUNT.get(node.op_kind, 0)
        if len(node.weight_refs) != expected_w:
            raise GraphValidationError(
                f"node {node.id!r} needs {expected_w} weight refs, "
                f"got {len(node.weight_refs)}",
                node_id=node.id,
            )
        for ref in node.weight_refs:
            if ref not in spec.weights:
                raise GraphValidationError(
                    f"node {node.id!r} references missing weight {ref!r}",
                    node_id=node.id,
                )
        if spec.dtype_profile == INT8Q and node.op_kind in _WEIGHT_COUNT:
            if spec.weights[node.weight_refs[0]].dtype != INT8Q:
                raise GraphValidationError(
                    f"node {node.id!r}: weight dtype does not match int8 profile",
                    node_id=node.id,
                )
        seen.add(node.id)
    if spec.output_id not in seen or spec.output_id == INPUT_ID:
        raise GraphValidationError(f"output id {spec.output_id!r} is not a node")

    # Every node must contribute to the output.
    needed = {spec.output_id}
    for node in reversed(spec.nodes):
        if node.id in needed:
            needed.update(node.input_ids)
    for node in spec.nodes:
        if node.id not in needed:
            raise GraphValidationError(
                f"node {node.id!r} does not contribute to the output",
                node_id=node.id,
            )

    shapes = _propagate(spec, spec.input_shape)
    return Graph(spec, shapes)


def _consumer_counts(spec):
    counts = {INPUT_ID: 0}
    for node in spec.nodes:
        counts[node.id] = 0
        for ref in node.input_ids:
            counts[ref] += 1
    counts[spec.output_id] += 1  # output survives the walk
    return counts


def execute(graph: Graph, x: Tensor, kernels, observer=None) -> Tensor:
    """Topological evaluation with immediate release of dead buffers."""
    spec = graph.spec
    if x.shape != tuple(spec.input_shape):
        raise ExecutionError(
            f"input shape {x.shape} != graph input {tuple(spec.input_shape)}"
        )
    expect = FLOAT32 if spec.dtype_profile == FLOAT32 else INT8Q
    if x.dtype != expect:
        raise ExecutionError(f"input dtype {x.dtype} != profile {expect}")
    remaining = _consumer_counts(spec)
    values = {INPUT_ID: x}
    dtype = spec.dtype_profile
    for node in spec.nodes:
        ins = [values[i] for i in node.input_ids]
        weights = [spec.weights[r] for r in node.weight_refs]
        try:
            out = kernels.apply(node.op_kind, dtype, ins, weights, node.attributes)
        except KeyError:
            raise ExecutionError(
                f"backend {kernels.backend_id!r} lacks ({node.op_kind}, {dtype})",
                node_id=node.id,
            ) from None
        except MemoryError:
            # allocation failure is a real signal (memory probe), not a bug
            raise
        except Exception as e:
            raise ExecutionError(f"node {node.id!r}: {e}", node_id=node.id) from e
        values[node.id] = out
        if observer is not None:
            observer(node.id, out)
        for ref in node.input_ids:
            remaining[ref] -= 1
            if remaining[ref] == 0:
                del values[ref]
    return values[spec.output_id]


def count_params(graph) -> int:
    """Total stored weight and bias elements."""
    spec = graph.spec if isinstance(graph, Graph) else graph
    return sum(t.size for t in spec.weights.values())


def _node_macs(node, in_shapes, out_shape, weights):
    kind = node.op_kind
    if kind == "conv2d":
        kh, kw, cin, cout = weights[0].shape
        return out_shape[0] * out_shape[1] * out_shape[2] * kh * kw * cin * cout
    if kind == "depthwise_conv2d":
        kh, kw, c, _ = weights[0].shape
        return out_shape[0] * out_shape[1] * out_shape[2] * kh * kw * c
    if kind == "fully_connected":
        rows, cols = weights[0].shape[-2], weights[0].shape[-1]
        return out_shape[0] * rows * cols
    return 0


def count_macs(graph: Graph, input_shape=None) -> int:
    """Multiply-accumulate count; non-MAC ops contribute zero here."""
    spec = graph.spec
    shapes = (
        graph.node_shapes
        if input_shape is None
        else graph.shapes_at(tuple(input_shape))
    )
    total = 0
    for node in spec.nodes:
        weights = [spec.weights[r] for r in node.weight_refs]
        in_shapes = [shapes[i] for i in node.input_ids]
        total += _node_macs(node, in_shapes, shapes[node.id], weights)
    return total


def count_other_ops(graph: Graph, input_shape=None) -> int:
    """Output elements produced by non-MAC ops (pool/resize/elementwise)."""
    spec = graph.spec
    shapes = (
        graph.node_shapes
        if input_shape is None
        else graph.shapes_at(tuple(input_shape))
    )
    total = 0
    for node in spec.nodes:
        if node.op_kind in ("conv2d", "depthwise_conv2d", "fully_connected"):
            continue
        s = shapes[node.id]
        total += s[0] * s[1] * s[2] * s[3]
    return total


def peak_activation_bytes(graph: Graph, input_shape=None) -> int:
    """Max live activation bytes over a liveness-accurate execution walk.

    While a node runs, its inputs and its output buffer are live together;
    a buffer dies right after its last consumer finishes.  Weights are not
    included here (report them separately).
    """
    spec = graph.spec
    shapes = (
        graph.node_shapes
        if input_shape is None
        else graph.shapes_at(tuple(input_shape))
    )
    width = DTYPE_WIDTH[spec.dtype_profile]

    def nbytes(buf_id):
        s = shapes[buf_id]
        return s[0] * s[1] * s[2] * s[3] * width

    remaining = _consumer_counts(spec)
    live = {INPUT_ID: nbytes(INPUT_ID)}
    peak = sum(live.values())
    for node in spec.nodes:
        live[node.id] = nbytes(node.id)
        peak = max(peak, sum(live.values()))
        for ref in node.input_ids:
            remaining[ref] -= 1
            if remaining[ref] == 0:
                del live[ref]
    return peak
