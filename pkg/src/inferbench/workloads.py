"""The nine benchmark tests: canonical specs, instantiation, serialization.

Weights are always drawn from the SplitMix64 stream seeded by the workload
seed, so any two builds with the same (test_id, scale, seed) are
bit-identical.  Test 1 additionally runs a one-image float calibration pass
to pick per-node activation quantization ranges before the graph is
converted to int8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace

import numpy as np

from .errors import WorkloadError
from .graph import Graph, GraphSpec, OperatorNode, execute, validate
from .kernels import optimized
from .tensor import FLOAT32, INT8Q, QuantParams, Tensor, quantize, qparams_from_range
from .zoo import BUILDERS, WeightStream, uniform_stream

DEFAULT_SEED = 42

# Input images are uniform [0, 1]; these qparams cover that range exactly.
INPUT_QPARAMS = QuantParams(scale=1.0 / 255.0, zero_point=-128)

# test_id -> (name, builder, (H, W), quantized, accelerator_eligible,
#             budget seconds, minimum viable resolution)
_DEFAULTS = {
    1: ("image_recognition_quant", "mobilenet_v1", (224, 224), True, True, 25.0, 32),
    2: ("image_recognition_float", "inception_v3", (346, 346), False, True, 40.0, 80),
    3: ("face_recognition", "inception_resnet_v1", (512, 512), False, False, 40.0, 96),
    4: ("image_deblurring", "srcnn", (300, 300), False, True, 30.0, 8),
    5: ("super_resolution_vdsr", "vdsr", (192, 192), False, True, 40.0, 8),
    6: ("super_resolution_srgan", "srgan_generator", (512, 512), False, False, 50.0, 32),
    7: ("semantic_segmentation", "icnet", (384, 576), False, False, 20.0, 32),
    8: ("photo_enhancement", "dped", (128, 192), False, True, 25.0, 16),
    9: ("memory_probe", "srcnn", (300, 300), False, True, None, 8),
}

DEFAULT_BUDGETS_S = tuple(_DEFAULTS[t][5] for t in range(1, 9))


@dataclass(frozen=True)
class WorkloadSpec:
    test_id: int
    name: str
    architecture: str
    input_resolution: tuple  # (H, W) after scaling
    quantized: bool
    accelerator_eligible: bool
    time_budget_s: float  # None for the memory probe
    scale: float
    seed: int

    def validate(self):
        if not 1 <= self.test_id <= 9:
            raise WorkloadError(f"test_id must be 1..9, got {self.test_id}")
        if self.quantized and self.test_id != 1:
            raise WorkloadError(
                f"quantized flag is only valid for test 1, got test {self.test_id}"
            )
        eligible = self.test_id not in (3, 6, 7)
        if self.accelerator_eligible != eligible:
            raise WorkloadError(
                f"test {self.test_id} accelerator_eligible must be {eligible}"
            )
        if not 0 < self.scale <= 1:
            raise WorkloadError(f"scale must be in (0, 1], got {self.scale}")
        budget = _DEFAULTS[self.test_id][5]
        if budget is None:
            if self.time_budget_s is not None:
                raise WorkloadError("the memory probe has no time budget")
        elif abs(self.time_budget_s - budget * self.scale) > 1e-6:
            raise WorkloadError(
                f"test {self.test_id} budget must be {budget}s x scale"
            )


def _scaled_extent(d, scale, min_res):
    if scale == 1.0:
        return d
    # scaled resolutions snap to multiples of 8 and respect each
    # architecture's smallest viable input (valid-padding stems)
    r = int(round(d * scale / 8.0)) * 8
    return max(r, min_res, 8)


def _make_spec(test_id, scale, seed) -> WorkloadSpec:
    if test_id not in _DEFAULTS:
        raise WorkloadError(f"unknown test id {test_id}")
    if not 0 < scale <= 1:
        raise WorkloadError(f"scale must be in (0, 1], got {scale}")
    name, builder, (h, w), quant, eligible, budget, min_res = _DEFAULTS[test_id]
    res = (_scaled_extent(h, scale, min_res), _scaled_extent(w, scale, min_res))
    return WorkloadSpec(
        test_id=test_id,
        name=name,
        architecture=builder,
        input_resolution=res,
        quantized=quant,
        accelerator_eligible=eligible,
        time_budget_s=None if budget is None else budget * scale,
        scale=scale,
        seed=seed,
    )


def _observe_ranges(graph, x):
    """One float forward pass recording each node's output min/max."""
    ranges = {}

    def observer(node_id, out):
        ranges[node_id] = (float(out.data.min()), float(out.data.max()))

    execute(graph, x, optimized.make_kernel_set(1), observer=observer)
    return ranges


def quantize_graph(spec: GraphSpec, ranges) -> GraphSpec:
    """Float graph -> per-tensor asymmetric int8 graph.

    Weights get qparams from their own min/max; activations use the
    calibrated per-node ranges; biases stay real-valued and are converted
    to int32 at the accumulator scale inside the kernels.
    """
    weights = {}
    for name, t in spec.weights.items():
        if name.endswith("_b"):
            weights[name] = t
        else:
            qp = qparams_from_range(float(t.data.min()), float(t.data.max()))
            weights[name] = quantize(t, qp)
    nodes = []
    for node in spec.nodes:
        lo, hi = ranges[node.id]
        attrs = dict(node.attributes)
        attrs["out_qp"] = qparams_from_range(lo, hi)
        nodes.append(
            OperatorNode(node.id, node.op_kind, list(node.input_ids), attrs,
                         list(node.weight_refs))
        )
    return GraphSpec(
        name=spec.name + "_int8",
        input_shape=spec.input_shape,
        nodes=nodes,
        output_id=spec.output_id,
        weights=weights,
        dtype_profile=INT8Q,
    )


def instantiate(test_id, scale=1.0, seed=DEFAULT_SEED):
    """Build the canonical graph for one test at the given scale."""
    spec = _make_spec(test_id, scale, seed)
    h, w = spec.input_resolution
    gspec = BUILDERS[spec.architecture](h, w, WeightStream(seed))
    graph = validate(gspec)
    if spec.quantized:
        calib = generate_input(replace(spec, quantized=False), seed ^ 0xCA11B)
        graph = validate(quantize_graph(gspec, _observe_ranges(graph, calib)))
    return graph, spec


def generate_input(spec: WorkloadSpec, seed) -> Tensor:
    """Deterministic uniform [0, 1] image; int8-coded for the quantized test."""
    h, w = spec.input_resolution
    vals = uniform_stream(seed, 0, h * w * 3, 0.0, 1.0)
    t = Tensor(vals.astype(np.float32).reshape(1, h, w, 3))
    if spec.quantized:
        return quantize(t, INPUT_QPARAMS)
    return t


# --- spec files -----------------------------------------------------------


def _attrs_to_json(attrs):
    out = {}
    for k, v in attrs.items():
        if isinstance(v, QuantParams):
            out[k] = {"scale": v.scale, "zero_point": v.zero_point}
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


def _attrs_from_json(attrs):
    out = {}
    for k, v in attrs.items():
        if k == "out_qp" and v is not None:
            out[k] = QuantParams(scale=v["scale"], zero_point=v["zero_point"])
        elif k in ("stride", "window", "pool_stride") and v is not None:
            out[k] = tuple(v)
        else:
            out[k] = v
    return out


def serialize_spec(spec: WorkloadSpec, graph: Graph = None) -> dict:
    """JSON-able workload document including the architecture layer list."""
    if graph is None:
        graph, spec = instantiate(spec.test_id, spec.scale, spec.seed)
    gspec = graph.spec
    layers = [
        {
            "id": n.id,
            "op": n.op_kind,
            "inputs": list(n.input_ids),
            "attrs": _attrs_to_json(n.attributes),
            "weights": [
                {"name": r, "shape": list(gspec.weights[r].shape)}
                for r in n.weight_refs
            ],
        }
        for n in gspec.nodes
    ]
    doc = asdict(spec)
    doc["input_resolution"] = list(spec.input_resolution)
    doc["dtype_profile"] = gspec.dtype_profile
    doc["output_id"] = gspec.output_id
    doc["layers"] = layers
    return doc


def save_spec(spec: WorkloadSpec, path, graph: Graph = None):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(serialize_spec(spec, graph), f, indent=1)


def load_spec(path) -> WorkloadSpec:
    """Read and validate a workload spec file (metadata only)."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    try:
        spec = WorkloadSpec(
            test_id=doc["test_id"],
            name=doc["name"],
            architecture=doc["architecture"],
            input_resolution=tuple(doc["input_resolution"]),
            quantized=doc["quantized"],
            accelerator_eligible=doc["accelerator_eligible"],
            time_budget_s=doc["time_budget_s"],
            scale=doc["scale"],
            seed=doc["seed"],
        )
    except KeyError as e:
        raise WorkloadError(f"spec file missing field {e}") from None
    spec.validate()
    return spec


def graph_from_file(path) -> Graph:
    """Rebuild the full graph from a spec file's layer list.

    Float weights are regenerated from the stored seed in layer order;
    int8 weight codes then follow deterministically from their min/max.
    """
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    spec = load_spec(path)
    stream = WeightStream(spec.seed)
    weights = {}
    nodes = []
    for layer in doc["layers"]:
        for wdoc in layer["weights"]:
            weights[wdoc["name"]] = Tensor(stream.next(tuple(wdoc["shape"])))
        nodes.append(
            OperatorNode(
                layer["id"], layer["op"], list(layer["inputs"]),
                _attrs_from_json(layer["attrs"]),
                [wdoc["name"] for wdoc in layer["weights"]],
            )
        )
    gspec = GraphSpec(
        name=doc["name"],
        input_shape=(1, *spec.input_resolution, 3),
        nodes=nodes,
        output_id=doc["output_id"],
        weights=weights,
        dtype_profile=FLOAT32,
    )
    if doc["dtype_profile"] == INT8Q:
        # Per-node activation qparams already live in the attrs; only the
        # weight codes need rebuilding.
        qweights = {}
        for name, t in weights.items():
            if name.endswith("_b"):
                qweights[name] = t
            else:
                qp = qparams_from_range(float(t.data.min()), float(t.data.max()))
                qweights[name] = quantize(t, qp)
        gspec = GraphSpec(
            name=doc["name"],
            input_shape=gspec.input_shape,
            nodes=nodes,
            output_id=doc["output_id"],
            weights=qweights,
            dtype_profile=INT8Q,
        )
    return validate(gspec)


def weight_bytes(graph: Graph) -> int:
    """Serialized weight payload: element bytes plus 8 per qparams pair."""
    total = 0
    for t in graph.spec.weights.values():
        total += t.nbytes
        if t.qparams is not None:
            total += 8
    return total


def all_default_specs(scale=1.0, seed=DEFAULT_SEED):
    return [_make_spec(t, scale, seed) for t in range(1, 10)]
