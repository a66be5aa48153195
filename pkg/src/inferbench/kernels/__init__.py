"""Kernel sets: uniform operator tables consumed by the graph executor.

A kernel set maps (op_kind, dtype) pairs to callables with the uniform
signature ``fn(inputs, weights, attrs) -> Tensor``.  The set of keys doubles
as the backend's capability declaration for dispatch.
"""

from ..tensor import FLOAT32, INT8Q
from .shapes import SAME, VALID

OP_KINDS = (
    "conv2d",
    "depthwise_conv2d",
    "fully_connected",
    "pool",
    "resize_bilinear",
    "add",
    "relu",
    "concat_channels",
    "softmax",
)


class KernelSet:
    """Operator table for one backend."""

    def __init__(self, backend_id, ops):
        self.backend_id = backend_id
        self.ops = dict(ops)

    def supported_ops(self):
        return frozenset(self.ops)

    def supports(self, op_kind, dtype):
        return (op_kind, dtype) in self.ops

    def apply(self, op_kind, dtype, inputs, weights, attrs):
        fn = self.ops[(op_kind, dtype)]
        return fn(inputs, weights, attrs)


__all__ = ["OP_KINDS", "KernelSet", "SAME", "VALID", "FLOAT32", "INT8Q"]
