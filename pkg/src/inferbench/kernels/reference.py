"""Reference kernels: per-pixel loops with no blocking.

These are the correctness oracle for every other backend.  The float path
walks output positions one at a time; the int8 path accumulates integer
products exactly and requantizes with round-half-away-from-zero.  The
reference set covers every (op, dtype) pair by contract.
"""

from __future__ import annotations

import numpy as np

from ..errors import QuantizationError, ShapeError
from ..tensor import FLOAT32, INT8Q, QuantParams, Tensor, dequantize, quantize, round_half_away
from . import KernelSet
from .shapes import SAME, VALID, conv_out_hw, pad_amounts


def _as_vec(bias, n):
    if bias is None:
        return np.zeros(n, dtype=np.float32)
    b = bias.data if isinstance(bias, Tensor) else np.asarray(bias)
    b = b.reshape(-1)
    if b.size != n:
        raise ShapeError(f"bias length {b.size} != channels {n}", dimension="channels")
    return b


def _check_conv_shapes(x, w, depthwise=False):
    kh, kw, cin, cout = w.shape
    if depthwise:
        if cout != 1:
            raise ShapeError(
                f"depthwise weights need trailing extent 1, got {cout}",
                dimension="channel_multiplier",
            )
        if x.shape[3] != cin:
            raise ShapeError(
                f"input channels {x.shape[3]} != depthwise channels {cin}",
                dimension="channels",
            )
    elif x.shape[3] != cin:
        raise ShapeError(
            f"input channels {x.shape[3]} != weight Cin {cin}", dimension="channels"
        )
    return kh, kw, cin, cout


def _pad_float(x, kh, kw, stride, padding):
    pt, pb = pad_amounts(x.shape[1], kh, stride[0], padding)
    pl, pr = pad_amounts(x.shape[2], kw, stride[1], padding)
    if pt or pb or pl or pr:
        x = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    return x


def conv2d(x: Tensor, w: Tensor, bias, stride=(1, 1), padding=SAME) -> Tensor:
    """Naive float32 convolution: dot product per output position."""
    kh, kw, cin, cout = _check_conv_shapes(x, w)
    oh, ow = conv_out_hw(x.shape[1:3], (kh, kw), stride, padding)
    b = _as_vec(bias, cout).astype(np.float32)
    xp = _pad_float(x.data, kh, kw, stride, padding)
    wm = w.data
    out = np.empty((x.shape[0], oh, ow, cout), dtype=np.float32)
    for n in range(x.shape[0]):
        for i in range(oh):
            hs = i * stride[0]
            for j in range(ow):
                ws = j * stride[1]
                patch = xp[n, hs : hs + kh, ws : ws + kw, :]
                out[n, i, j, :] = (
                    np.tensordot(patch, wm, axes=([0, 1, 2], [0, 1, 2])) + b
                )
    return Tensor(out)


def depthwise_conv2d(x: Tensor, w: Tensor, bias, stride=(1, 1), padding=SAME) -> Tensor:
    """Per-channel convolution; channel c of the output sees only channel c."""
    kh, kw, c, _ = _check_conv_shapes(x, w, depthwise=True)
    oh, ow = conv_out_hw(x.shape[1:3], (kh, kw), stride, padding)
    b = _as_vec(bias, c).astype(np.float32)
    xp = _pad_float(x.data, kh, kw, stride, padding)
    wm = w.data[:, :, :, 0]
    out = np.empty((x.shape[0], oh, ow, c), dtype=np.float32)
    for n in range(x.shape[0]):
        for i in range(oh):
            hs = i * stride[0]
            for j in range(ow):
                ws = j * stride[1]
                patch = xp[n, hs : hs + kh, ws : ws + kw, :]
                out[n, i, j, :] = np.sum(patch * wm, axis=(0, 1)) + b
    return Tensor(out)


def fully_connected(x: Tensor, w, bias) -> Tensor:
    """Affine map on the flattened input, float32 accumulation."""
    wm = w.data if isinstance(w, Tensor) else np.asarray(w, dtype=np.float32)
    wm = wm.reshape(wm.shape[-2], wm.shape[-1]) if wm.ndim == 4 else wm
    flat = x.data.reshape(x.shape[0], -1)
    if flat.shape[1] != wm.shape[0]:
        raise ShapeError(
            f"flattened input length {flat.shape[1]} != weight rows {wm.shape[0]}",
            dimension="rows",
        )
    b = _as_vec(bias, wm.shape[1]).astype(np.float32)
    out = np.empty((x.shape[0], wm.shape[1]), dtype=np.float32)
    for n in range(x.shape[0]):
        for k in range(wm.shape[1]):
            out[n, k] = np.dot(flat[n], wm[:, k]) + b[k]
    return Tensor(out.reshape(x.shape[0], 1, 1, wm.shape[1]))


def _pool_window(x, window):
    if window is None:  # global pooling
        return (x.shape[1], x.shape[2]), (1, 1), VALID, True
    return window, None, None, False


def pool(x: Tensor, kind, window, stride=None, padding=VALID) -> Tensor:
    """Max or average pooling; avg divides by the in-bounds element count."""
    if kind not in ("max", "avg"):
        raise ValueError(f"unknown pool kind {kind!r}")
    if window is None:
        window, stride, padding = (x.shape[1], x.shape[2]), (1, 1), VALID
    if stride is None:
        stride = window
    h, w = x.shape[1], x.shape[2]
    pt, _ = pad_amounts(h, window[0], stride[0], padding)
    pl, _ = pad_amounts(w, window[1], stride[1], padding)
    oh, ow = conv_out_hw((h, w), window, stride, padding)
    out = np.empty((x.shape[0], oh, ow, x.shape[3]), dtype=x.data.dtype)
    for n in range(x.shape[0]):
        for i in range(oh):
            h0 = i * stride[0] - pt
            h1 = min(h0 + window[0], h)
            h0 = max(h0, 0)
            for j in range(ow):
                w0 = j * stride[1] - pl
                w1 = min(w0 + window[1], w)
                w0 = max(w0, 0)
                patch = x.data[n, h0:h1, w0:w1, :]
                if kind == "max":
                    out[n, i, j, :] = patch.max(axis=(0, 1))
                else:
                    out[n, i, j, :] = _avg_patch(patch)
    if x.dtype == INT8Q:
        return Tensor(out, dtype=INT8Q, qparams=x.qparams)
    return Tensor(out)


def _avg_patch(patch):
    if patch.dtype == np.int8:
        count = patch.shape[0] * patch.shape[1]
        s = patch.astype(np.int64).sum(axis=(0, 1))
        return np.clip(round_half_away(s / count), -128, 127).astype(np.int8)
    return patch.mean(axis=(0, 1), dtype=np.float32)


def resize_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear sampling with src = dst * (in/out) (align-corners false)."""
    if out_h < 1 or out_w < 1:
        raise ShapeError("output extents must be >= 1", dimension="spatial")
    n, h, w, c = x.shape
    data = x.data.astype(np.float32) if x.dtype == FLOAT32 else dequantize(x).data
    out = np.empty((n, out_h, out_w, c), dtype=np.float32)
    hs = h / out_h
    ws = w / out_w
    for i in range(out_h):
        sy = i * hs
        y0 = min(int(np.floor(sy)), h - 1)
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = j * ws
            x0 = min(int(np.floor(sx)), w - 1)
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = data[:, y0, x0, :] * (1 - fx) + data[:, y0, x1, :] * fx
            bot = data[:, y1, x0, :] * (1 - fx) + data[:, y1, x1, :] * fx
            out[:, i, j, :] = top * (1 - fy) + bot * fy
    t = Tensor(out)
    if x.dtype == INT8Q:
        return quantize(t, x.qparams)
    return t


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    return Tensor(a.data + b.data)


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))


def concat_channels(tensors) -> Tensor:
    base = tensors[0].shape[:3]
    for t in tensors[1:]:
        if t.shape[:3] != base:
            raise ShapeError(
                f"concat spatial shapes differ: {t.shape[:3]} vs {base}"
            )
    return Tensor(np.concatenate([t.data for t in tensors], axis=3))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the channel axis."""
    z = x.data - x.data.max(axis=3, keepdims=True)
    e = np.exp(z)
    return Tensor(e / e.sum(axis=3, keepdims=True))


# --- int8 path ------------------------------------------------------------

MAX_Q_KERNEL = 9
MAX_Q_CHANNELS = 1024


def _check_q_config(kh, kw, cin):
    if kh > MAX_Q_KERNEL or kw > MAX_Q_KERNEL or cin > MAX_Q_CHANNELS:
        raise QuantizationError(
            f"quantized conv limited to {MAX_Q_KERNEL}x{MAX_Q_KERNEL} kernels "
            f"and {MAX_Q_CHANNELS} input channels, got {kh}x{kw}x{cin}"
        )


def quantize_bias(bias, in_qp: QuantParams, w_qp: QuantParams):
    """Real-valued bias -> int32 at the accumulator scale in_s * w_s."""
    b = bias.data if isinstance(bias, Tensor) else np.asarray(bias)
    s = in_qp.scale * w_qp.scale
    return round_half_away(b.reshape(-1).astype(np.float64) / s).astype(np.int64)


def requantize(acc, in_qp, w_qp, out_qp):
    """int accumulator -> int8 codes under out_qp."""
    mult = (in_qp.scale * w_qp.scale) / out_qp.scale
    q = round_half_away(acc.astype(np.float64) * mult) + out_qp.zero_point
    return np.clip(q, -128, 127).astype(np.int8)


def qconv2d(x: Tensor, w: Tensor, bias_i32, stride, padding, out_qp) -> Tensor:
    """Integer convolution: exact MAC accumulation then requantization."""
    kh, kw, cin, cout = _check_conv_shapes(x, w)
    _check_q_config(kh, kw, cin)
    oh, ow = conv_out_hw(x.shape[1:3], (kh, kw), stride, padding)
    pt, pb = pad_amounts(x.shape[1], kh, stride[0], padding)
    pl, pr = pad_amounts(x.shape[2], kw, stride[1], padding)
    # Padding with the zero point represents real zeros.
    xd = x.data.astype(np.int64) - x.qparams.zero_point
    xp = np.pad(xd, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    wd = w.data.astype(np.int64) - w.qparams.zero_point
    b = np.zeros(cout, dtype=np.int64) if bias_i32 is None else np.asarray(bias_i32)
    acc = np.empty((x.shape[0], oh, ow, cout), dtype=np.int64)
    for n in range(x.shape[0]):
        for i in range(oh):
            hs = i * stride[0]
            for j in range(ow):
                ws = j * stride[1]
                patch = xp[n, hs : hs + kh, ws : ws + kw, :]
                acc[n, i, j, :] = (
                    np.tensordot(patch, wd, axes=([0, 1, 2], [0, 1, 2])) + b
                )
    return Tensor(requantize(acc, x.qparams, w.qparams, out_qp), INT8Q, out_qp)


def qdepthwise_conv2d(x: Tensor, w: Tensor, bias_i32, stride, padding, out_qp) -> Tensor:
    kh, kw, c, _ = _check_conv_shapes(x, w, depthwise=True)
    _check_q_config(kh, kw, 1)
    oh, ow = conv_out_hw(x.shape[1:3], (kh, kw), stride, padding)
    pt, pb = pad_amounts(x.shape[1], kh, stride[0], padding)
    pl, pr = pad_amounts(x.shape[2], kw, stride[1], padding)
    xd = x.data.astype(np.int64) - x.qparams.zero_point
    xp = np.pad(xd, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    wd = w.data.astype(np.int64)[:, :, :, 0] - w.qparams.zero_point
    b = np.zeros(c, dtype=np.int64) if bias_i32 is None else np.asarray(bias_i32)
    acc = np.empty((x.shape[0], oh, ow, c), dtype=np.int64)
    for n in range(x.shape[0]):
        for i in range(oh):
            hs = i * stride[0]
            for j in range(ow):
                ws = j * stride[1]
                patch = xp[n, hs : hs + kh, ws : ws + kw, :]
                acc[n, i, j, :] = np.sum(patch * wd, axis=(0, 1)) + b
    return Tensor(requantize(acc, x.qparams, w.qparams, out_qp), INT8Q, out_qp)


def qfully_connected(x: Tensor, w: Tensor, bias_i32, out_qp) -> Tensor:
    wm = w.data.reshape(w.shape[-2], w.shape[-1]).astype(np.int64) - w.qparams.zero_point
    flat = x.data.reshape(x.shape[0], -1).astype(np.int64) - x.qparams.zero_point
    if flat.shape[1] != wm.shape[0]:
        raise ShapeError(
            f"flattened input length {flat.shape[1]} != weight rows {wm.shape[0]}",
            dimension="rows",
        )
    b = np.zeros(wm.shape[1], dtype=np.int64) if bias_i32 is None else np.asarray(bias_i32)
    acc = flat @ wm + b
    q = requantize(acc, x.qparams, w.qparams, out_qp)
    return Tensor(q.reshape(x.shape[0], 1, 1, wm.shape[1]), INT8Q, out_qp)


def qrelu(x: Tensor, out_qp) -> Tensor:
    clamped = np.maximum(x.data, np.int8(x.qparams.zero_point))
    t = Tensor(clamped, INT8Q, x.qparams)
    if out_qp == x.qparams:
        return t
    return quantize(dequantize(t), out_qp)


def qadd(a: Tensor, b: Tensor, out_qp) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    s = dequantize(a).data + dequantize(b).data
    return quantize(Tensor(s), out_qp)


def qsoftmax(x: Tensor, out_qp) -> Tensor:
    return quantize(softmax(dequantize(x)), out_qp)


def qconcat_channels(tensors, out_qp) -> Tensor:
    parts = [dequantize(t) for t in tensors]
    return quantize(concat_channels(parts), out_qp)


def qresize_bilinear(x: Tensor, out_h, out_w, out_qp) -> Tensor:
    return quantize(resize_bilinear(dequantize(x), out_h, out_w), out_qp)


def qpool(x: Tensor, kind, window, stride, padding, out_qp) -> Tensor:
    out = pool(x, kind, window, stride, padding)
    if out_qp is None or out_qp == x.qparams:
        return out
    return quantize(dequantize(out), out_qp)


# --- uniform adapters -----------------------------------------------------


def _stride(attrs):
    s = attrs.get("stride", (1, 1))
    return (s, s) if isinstance(s, int) else tuple(s)


def float_adapters(funcs):
    """Build the uniform (inputs, weights, attrs) table from math functions."""
    return {
        ("conv2d", FLOAT32): lambda i, w, a: funcs["conv2d"](
            i[0], w[0], w[1], _stride(a), a.get("padding", SAME)
        ),
        ("depthwise_conv2d", FLOAT32): lambda i, w, a: funcs["depthwise_conv2d"](
            i[0], w[0], w[1], _stride(a), a.get("padding", SAME)
        ),
        ("fully_connected", FLOAT32): lambda i, w, a: funcs["fully_connected"](
            i[0], w[0], w[1]
        ),
        ("pool", FLOAT32): lambda i, w, a: funcs["pool"](
            i[0],
            a["kind"],
            a.get("window"),
            a.get("pool_stride"),
            a.get("padding", VALID),
        ),
        ("resize_bilinear", FLOAT32): lambda i, w, a: funcs["resize_bilinear"](
            i[0], a["out_h"], a["out_w"]
        ),
        ("add", FLOAT32): lambda i, w, a: funcs["add"](i[0], i[1]),
        ("relu", FLOAT32): lambda i, w, a: funcs["relu"](i[0]),
        ("concat_channels", FLOAT32): lambda i, w, a: funcs["concat_channels"](i),
        ("softmax", FLOAT32): lambda i, w, a: funcs["softmax"](i[0]),
    }


def _qbias(w, bias, x):
    if bias is None:
        return None
    return quantize_bias(bias, x.qparams, w.qparams)


def int8_adapters(qconv, qdw, qfc):
    """int8 table; conv-family kernels are backend-specific, the rest shared."""
    return {
        ("conv2d", INT8Q): lambda i, w, a: qconv(
            i[0], w[0], _qbias(w[0], w[1], i[0]), _stride(a),
            a.get("padding", SAME), a["out_qp"],
        ),
        ("depthwise_conv2d", INT8Q): lambda i, w, a: qdw(
            i[0], w[0], _qbias(w[0], w[1], i[0]), _stride(a),
            a.get("padding", SAME), a["out_qp"],
        ),
        ("fully_connected", INT8Q): lambda i, w, a: qfc(
            i[0], w[0], _qbias(w[0], w[1], i[0]), a["out_qp"]
        ),
        ("pool", INT8Q): lambda i, w, a: qpool(
            i[0], a["kind"], a.get("window"), a.get("pool_stride"),
            a.get("padding", VALID), a.get("out_qp"),
        ),
        ("resize_bilinear", INT8Q): lambda i, w, a: qresize_bilinear(
            i[0], a["out_h"], a["out_w"], a["out_qp"]
        ),
        ("add", INT8Q): lambda i, w, a: qadd(i[0], i[1], a["out_qp"]),
        ("relu", INT8Q): lambda i, w, a: qrelu(i[0], a["out_qp"]),
        ("concat_channels", INT8Q): lambda i, w, a: qconcat_channels(i, a["out_qp"]),
        ("softmax", INT8Q): lambda i, w, a: qsoftmax(i[0], a["out_qp"]),
    }


_FLOAT_FUNCS = {
    "conv2d": conv2d,
    "depthwise_conv2d": depthwise_conv2d,
    "fully_connected": fully_connected,
    "pool": pool,
    "resize_bilinear": resize_bilinear,
    "add": add,
    "relu": relu,
    "concat_channels": concat_channels,
    "softmax": softmax,
}


def make_kernel_set() -> KernelSet:
    """Total-coverage reference kernel set (every op, both dtypes)."""
    ops = float_adapters(_FLOAT_FUNCS)
    ops.update(int8_adapters(qconv2d, qdepthwise_conv2d, qfully_connected))
    return KernelSet("reference", ops)
