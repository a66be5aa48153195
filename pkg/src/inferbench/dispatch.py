"""Backend registry and whole-graph dispatch with CPU-reference fallback.

A graph runs on the preferred backend only if that backend supports every
(op, dtype) pair the graph uses; otherwise the entire graph falls back to
the total-coverage reference backend.  There is no per-node partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DispatchError
from .graph import Graph, execute
from .kernels import KernelSet
from .kernels import optimized, quantized, reference
from .tensor import FLOAT32, INT8Q

REFERENCE = "reference"
OPTIMIZED = "optimized"
QUANTIZED = "quantized"

ALL_OPS_SUPPORTED = "all_ops_supported"
FALLBACK_UNSUPPORTED_OP = "fallback_unsupported_op"
FORCED_BY_FLAG = "forced_by_flag"


@dataclass(frozen=True)
class BackendCapability:
    backend_id: str
    supported_ops: frozenset  # of (op_kind, dtype) pairs
    description: str = ""


@dataclass(frozen=True)
class DispatchDecision:
    chosen_backend_id: str
    reason: str
    node_id: str = None
    op_kind: str = None


class BackendRegistry:
    """Immutable-after-setup mapping of backend ids to kernel sets."""

    def __init__(self):
        self._backends = {}

    def register(self, capability: BackendCapability, kernels: KernelSet):
        if capability.backend_id in self._backends:
            raise DispatchError(f"duplicate backend id {capability.backend_id!r}")
        self._backends[capability.backend_id] = (capability, kernels)

    def ids(self):
        return list(self._backends)

    def capability(self, backend_id) -> BackendCapability:
        return self._get(backend_id)[0]

    def kernels(self, backend_id) -> KernelSet:
        return self._get(backend_id)[1]

    def _get(self, backend_id):
        try:
            return self._backends[backend_id]
        except KeyError:
            raise DispatchError(f"unknown backend {backend_id!r}") from None

    def select_backend(self, graph: Graph, preferred: str) -> DispatchDecision:
        """Whole-graph rule: any unsupported op forces reference fallback."""
        cap = self.capability(preferred)
        dtype = graph.dtype_profile
        for node in graph.spec.nodes:
            if (node.op_kind, dtype) not in cap.supported_ops:
                return DispatchDecision(
                    REFERENCE, FALLBACK_UNSUPPORTED_OP, node.id, node.op_kind
                )
        return DispatchDecision(preferred, ALL_OPS_SUPPORTED)

    def equivalence_check(self, graph: Graph, x, backend_a, backend_b) -> float:
        """Max element deviation between two backends on one input.

        Float graphs return max |a - b|; int8 graphs return the max
        quantum distance between codes.
        """
        ya = execute(graph, x, self.kernels(backend_a))
        yb = execute(graph, x, self.kernels(backend_b))
        if graph.dtype_profile == INT8Q:
            return int(
                np.abs(ya.data.astype(np.int64) - yb.data.astype(np.int64)).max()
            )
        return float(np.abs(ya.data - yb.data).max())


def _capability(kernels: KernelSet, description):
    return BackendCapability(
        kernels.backend_id, kernels.supported_ops(), description
    )


def default_registry(threads: int = 1) -> BackendRegistry:
    """Registry with the three built-in backends.

    reference: naive loops, total coverage (float32 and int8q).
    optimized: tiled GEMM kernels, full float32 coverage, no int8.
    quantized: integer GEMM path for int8q graphs.
    """
    reg = BackendRegistry()
    ref = reference.make_kernel_set()
    opt = optimized.make_kernel_set(threads)
    qnt = quantized.make_kernel_set()
    reg.register(_capability(ref, "naive loop kernels, correctness oracle"), ref)
    reg.register(_capability(opt, "tiled im2col/GEMM float kernels"), opt)
    reg.register(_capability(qnt, "integer GEMM int8 kernels"), qnt)
    return reg
