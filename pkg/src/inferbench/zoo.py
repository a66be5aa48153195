"""Canonical benchmark network builders.

Each builder produces a float32 GraphSpec at a given input resolution, with
weights drawn from a deterministic SplitMix64 stream so two builds from the
same seed are bit-identical.  Architecture depth and channel widths never
change with resolution; only the spatial extents do.
"""

from __future__ import annotations

import numpy as np

from .graph import INPUT_ID, GraphSpec, OperatorNode, _infer_shape
from .kernels.shapes import SAME, VALID
from .tensor import FLOAT32, Tensor

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start+1 .. start+count`` of the SplitMix64 stream at ``seed``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def uniform_stream(seed: int, start: int, count: int, lo: float, hi: float):
    """SplitMix64 words mapped to uniform [lo, hi) float64."""
    u = (splitmix64(seed, start, count) >> np.uint64(11)) * (2.0 ** -53)
    return lo + u * (hi - lo)


class WeightStream:
    """Sequential uniform [-0.1, 0.1] weight source over one SplitMix64 stream."""

    LO, HI = -0.1, 0.1

    def __init__(self, seed: int):
        self.seed = seed
        self.pos = 0

    def next(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        vals = uniform_stream(self.seed, self.pos, n, self.LO, self.HI)
        self.pos += n
        return vals.astype(np.float32).reshape(shape)


class GraphBuilder:
    """Incremental GraphSpec assembly with shape tracking and seeded weights."""

    def __init__(self, name, input_shape, stream: WeightStream):
        self.name = name
        self.input_shape = tuple(input_shape)
        self.stream = stream
        self.nodes = []
        self.weights = {}
        self.shapes = {INPUT_ID: self.input_shape}

    def _add(self, nid, op_kind, inputs, attrs=None, weight_refs=None):
        node = OperatorNode(
            nid, op_kind, list(inputs), dict(attrs or {}), list(weight_refs or [])
        )
        wts = [self.weights[r] for r in node.weight_refs]
        self.shapes[nid] = _infer_shape(
            node, [self.shapes[i] for i in node.input_ids], wts
        )
        self.nodes.append(node)
        return nid

    def channels(self, nid):
        return self.shapes[nid][3]

    def hw(self, nid):
        return self.shapes[nid][1:3]

    def conv(self, nid, src, cout, k, stride=1, padding=SAME, act=False):
        kh, kw = (k, k) if isinstance(k, int) else k
        cin = self.channels(src)
        self.weights[f"{nid}_w"] = Tensor(self.stream.next((kh, kw, cin, cout)))
        self.weights[f"{nid}_b"] = Tensor(self.stream.next((1, 1, 1, cout)))
        out = self._add(
            nid, "conv2d", [src],
            {"stride": (stride, stride) if isinstance(stride, int) else stride,
             "padding": padding},
            [f"{nid}_w", f"{nid}_b"],
        )
        return self.relu(f"{nid}_relu", out) if act else out

    def dwconv(self, nid, src, k=3, stride=1, padding=SAME, act=False):
        kh, kw = (k, k) if isinstance(k, int) else k
        c = self.channels(src)
        self.weights[f"{nid}_w"] = Tensor(self.stream.next((kh, kw, c, 1)))
        self.weights[f"{nid}_b"] = Tensor(self.stream.next((1, 1, 1, c)))
        out = self._add(
            nid, "depthwise_conv2d", [src],
            {"stride": (stride, stride) if isinstance(stride, int) else stride,
             "padding": padding},
            [f"{nid}_w", f"{nid}_b"],
        )
        return self.relu(f"{nid}_relu", out) if act else out

    def fc(self, nid, src, cols):
        s = self.shapes[src]
        rows = s[1] * s[2] * s[3]
        self.weights[f"{nid}_w"] = Tensor(self.stream.next((1, 1, rows, cols)))
        self.weights[f"{nid}_b"] = Tensor(self.stream.next((1, 1, 1, cols)))
        return self._add(nid, "fully_connected", [src], {},
                         [f"{nid}_w", f"{nid}_b"])

    def pool(self, nid, src, kind, window, stride=None, padding=VALID):
        return self._add(
            nid, "pool", [src],
            {"kind": kind, "window": window, "pool_stride": stride,
             "padding": padding},
        )

    def global_avgpool(self, nid, src):
        return self._add(nid, "pool", [src], {"kind": "avg", "window": None})

    def resize(self, nid, src, out_h, out_w):
        return self._add(nid, "resize_bilinear", [src],
                         {"out_h": int(out_h), "out_w": int(out_w)})

    def add(self, nid, a, b):
        return self._add(nid, "add", [a, b])

    def relu(self, nid, src):
        return self._add(nid, "relu", [src])

    def concat(self, nid, srcs):
        return self._add(nid, "concat_channels", list(srcs))

    def softmax(self, nid, src):
        return self._add(nid, "softmax", [src])

    def finish(self, output_id) -> GraphSpec:
        return GraphSpec(
            name=self.name,
            input_shape=self.input_shape,
            nodes=self.nodes,
            output_id=output_id,
            weights=self.weights,
            dtype_profile=FLOAT32,
        )


# --- classification -------------------------------------------------------

# (dw stride, pointwise cout) for the 13 separable blocks, width 1.0.
_MOBILENET_BLOCKS = [
    (1, 64), (2, 128), (1, 128), (2, 256), (1, 256), (2, 512),
    (1, 512), (1, 512), (1, 512), (1, 512), (1, 512), (2, 1024), (1, 1024),
]


def build_mobilenet_v1(h, w, stream):
    g = GraphBuilder("mobilenet_v1", (1, h, w, 3), stream)
    x = g.conv("conv0", INPUT_ID, 32, 3, stride=2, act=True)
    for i, (stride, cout) in enumerate(_MOBILENET_BLOCKS, start=1):
        x = g.dwconv(f"dw{i}", x, 3, stride=stride, act=True)
        x = g.conv(f"pw{i}", x, cout, 1, act=True)
    x = g.global_avgpool("avgpool", x)
    x = g.fc("fc", x, 1000)
    x = g.softmax("softmax", x)
    return g.finish(x)


def _inception_a(g, p, src, pool_features):
    b0 = g.conv(f"{p}_1x1", src, 64, 1, act=True)
    b1 = g.conv(f"{p}_5x5_1", src, 48, 1, act=True)
    b1 = g.conv(f"{p}_5x5_2", b1, 64, 5, act=True)
    b2 = g.conv(f"{p}_3x3_1", src, 64, 1, act=True)
    b2 = g.conv(f"{p}_3x3_2", b2, 96, 3, act=True)
    b2 = g.conv(f"{p}_3x3_3", b2, 96, 3, act=True)
    bp = g.pool(f"{p}_pool", src, "avg", (3, 3), (1, 1), SAME)
    bp = g.conv(f"{p}_poolproj", bp, pool_features, 1, act=True)
    return g.concat(f"{p}_out", [b0, b1, b2, bp])


def _inception_b(g, p, src):  # grid reduction 35 -> 17
    b0 = g.conv(f"{p}_3x3", src, 384, 3, stride=2, padding=VALID, act=True)
    b1 = g.conv(f"{p}_dbl_1", src, 64, 1, act=True)
    b1 = g.conv(f"{p}_dbl_2", b1, 96, 3, act=True)
    b1 = g.conv(f"{p}_dbl_3", b1, 96, 3, stride=2, padding=VALID, act=True)
    bp = g.pool(f"{p}_pool", src, "max", (3, 3), (2, 2), VALID)
    return g.concat(f"{p}_out", [b0, b1, bp])


def _inception_c(g, p, src, c7):
    b0 = g.conv(f"{p}_1x1", src, 192, 1, act=True)
    b1 = g.conv(f"{p}_7x7_1", src, c7, 1, act=True)
    b1 = g.conv(f"{p}_7x7_2", b1, c7, (1, 7), act=True)
    b1 = g.conv(f"{p}_7x7_3", b1, 192, (7, 1), act=True)
    b2 = g.conv(f"{p}_dbl_1", src, c7, 1, act=True)
    b2 = g.conv(f"{p}_dbl_2", b2, c7, (7, 1), act=True)
    b2 = g.conv(f"{p}_dbl_3", b2, c7, (1, 7), act=True)
    b2 = g.conv(f"{p}_dbl_4", b2, c7, (7, 1), act=True)
    b2 = g.conv(f"{p}_dbl_5", b2, 192, (1, 7), act=True)
    bp = g.pool(f"{p}_pool", src, "avg", (3, 3), (1, 1), SAME)
    bp = g.conv(f"{p}_poolproj", bp, 192, 1, act=True)
    return g.concat(f"{p}_out", [b0, b1, b2, bp])


def _inception_d(g, p, src):  # grid reduction 17 -> 8
    b0 = g.conv(f"{p}_3x3_1", src, 192, 1, act=True)
    b0 = g.conv(f"{p}_3x3_2", b0, 320, 3, stride=2, padding=VALID, act=True)
    b1 = g.conv(f"{p}_7x7_1", src, 192, 1, act=True)
    b1 = g.conv(f"{p}_7x7_2", b1, 192, (1, 7), act=True)
    b1 = g.conv(f"{p}_7x7_3", b1, 192, (7, 1), act=True)
    b1 = g.conv(f"{p}_7x7_4", b1, 192, 3, stride=2, padding=VALID, act=True)
    bp = g.pool(f"{p}_pool", src, "max", (3, 3), (2, 2), VALID)
    return g.concat(f"{p}_out", [b0, b1, bp])


def _inception_e(g, p, src):
    b0 = g.conv(f"{p}_1x1", src, 320, 1, act=True)
    b1 = g.conv(f"{p}_3x3_1", src, 384, 1, act=True)
    b1a = g.conv(f"{p}_3x3_2a", b1, 384, (1, 3), act=True)
    b1b = g.conv(f"{p}_3x3_2b", b1, 384, (3, 1), act=True)
    b2 = g.conv(f"{p}_dbl_1", src, 448, 1, act=True)
    b2 = g.conv(f"{p}_dbl_2", b2, 384, 3, act=True)
    b2a = g.conv(f"{p}_dbl_3a", b2, 384, (1, 3), act=True)
    b2b = g.conv(f"{p}_dbl_3b", b2, 384, (3, 1), act=True)
    bp = g.pool(f"{p}_pool", src, "avg", (3, 3), (1, 1), SAME)
    bp = g.conv(f"{p}_poolproj", bp, 192, 1, act=True)
    return g.concat(f"{p}_out", [b0, b1a, b1b, b2a, b2b, bp])


def build_inception_v3(h, w, stream):
    """Inception-V3 with the auxiliary classifier folded into the head.

    The aux head ends in a global pool + fully-connected layer so the
    network stays valid at reduced resolutions, and its logits are summed
    with the main logits to keep a single graph output.
    """
    g = GraphBuilder("inception_v3", (1, h, w, 3), stream)
    x = g.conv("stem1", INPUT_ID, 32, 3, stride=2, padding=VALID, act=True)
    x = g.conv("stem2", x, 32, 3, padding=VALID, act=True)
    x = g.conv("stem3", x, 64, 3, act=True)
    x = g.pool("stem_pool1", x, "max", (3, 3), (2, 2), VALID)
    x = g.conv("stem4", x, 80, 1, padding=VALID, act=True)
    x = g.conv("stem5", x, 192, 3, padding=VALID, act=True)
    x = g.pool("stem_pool2", x, "max", (3, 3), (2, 2), VALID)
    x = _inception_a(g, "a1", x, 32)
    x = _inception_a(g, "a2", x, 64)
    x = _inception_a(g, "a3", x, 64)
    x = _inception_b(g, "red1", x)
    for i, c7 in enumerate((128, 128, 160, 192), start=1):
        x = _inception_c(g, f"c{i}", x, c7)
    # Auxiliary classifier branch off the 17x17 grid.
    ax = g.pool("aux_pool", x, "avg", (5, 5), (3, 3), SAME)
    ax = g.conv("aux_proj", ax, 128, 1, act=True)
    ax = g.conv("aux_conv", ax, 768, 3, act=True)
    ax = g.global_avgpool("aux_gap", ax)
    ax = g.fc("aux_fc", ax, 1000)
    x = _inception_d(g, "red2", x)
    x = _inception_e(g, "e1", x)
    x = _inception_e(g, "e2", x)
    x = g.global_avgpool("gap", x)
    x = g.fc("fc", x, 1000)
    x = g.add("logits", x, ax)
    x = g.softmax("softmax", x)
    return g.finish(x)


# Branch width of the 17x17 residual-inception blocks; chosen so the total
# parameter count lands on the published 22.8M figure.
_IR_B17_WIDTH = 152


def _ir_block35(g, p, src):
    b0 = g.conv(f"{p}_b0", src, 32, 1, act=True)
    b1 = g.conv(f"{p}_b1a", src, 32, 1, act=True)
    b1 = g.conv(f"{p}_b1b", b1, 32, 3, act=True)
    b2 = g.conv(f"{p}_b2a", src, 32, 1, act=True)
    b2 = g.conv(f"{p}_b2b", b2, 32, 3, act=True)
    b2 = g.conv(f"{p}_b2c", b2, 32, 3, act=True)
    cat = g.concat(f"{p}_cat", [b0, b1, b2])
    up = g.conv(f"{p}_up", cat, g.channels(src), 1)
    return g.relu(f"{p}_relu", g.add(f"{p}_add", src, up))


def _ir_block17(g, p, src, width):
    b0 = g.conv(f"{p}_b0", src, width, 1, act=True)
    b1 = g.conv(f"{p}_b1a", src, width, 1, act=True)
    b1 = g.conv(f"{p}_b1b", b1, width, (1, 7), act=True)
    b1 = g.conv(f"{p}_b1c", b1, width, (7, 1), act=True)
    cat = g.concat(f"{p}_cat", [b0, b1])
    up = g.conv(f"{p}_up", cat, g.channels(src), 1)
    return g.relu(f"{p}_relu", g.add(f"{p}_add", src, up))


def _ir_block8(g, p, src):
    b0 = g.conv(f"{p}_b0", src, 192, 1, act=True)
    b1 = g.conv(f"{p}_b1a", src, 192, 1, act=True)
    b1 = g.conv(f"{p}_b1b", b1, 192, (1, 3), act=True)
    b1 = g.conv(f"{p}_b1c", b1, 192, (3, 1), act=True)
    cat = g.concat(f"{p}_cat", [b0, b1])
    up = g.conv(f"{p}_up", cat, g.channels(src), 1)
    return g.relu(f"{p}_relu", g.add(f"{p}_add", src, up))


def build_inception_resnet_v1(h, w, stream):
    """20-block residual Inception producing a 128-dim embedding."""
    g = GraphBuilder("inception_resnet_v1", (1, h, w, 3), stream)
    x = g.conv("stem1", INPUT_ID, 32, 3, stride=2, padding=VALID, act=True)
    x = g.conv("stem2", x, 32, 3, padding=VALID, act=True)
    x = g.conv("stem3", x, 64, 3, act=True)
    x = g.pool("stem_pool", x, "max", (3, 3), (2, 2), VALID)
    x = g.conv("stem4", x, 80, 1, act=True)
    x = g.conv("stem5", x, 192, 3, padding=VALID, act=True)
    x = g.conv("stem6", x, 256, 3, stride=2, padding=VALID, act=True)
    for i in range(1, 6):
        x = _ir_block35(g, f"a{i}", x)
    # reduction 35 -> 17
    r0 = g.conv("redA_b0", x, 384, 3, stride=2, padding=VALID, act=True)
    r1 = g.conv("redA_b1a", x, 192, 1, act=True)
    r1 = g.conv("redA_b1b", r1, 192, 3, act=True)
    r1 = g.conv("redA_b1c", r1, 256, 3, stride=2, padding=VALID, act=True)
    rp = g.pool("redA_pool", x, "max", (3, 3), (2, 2), VALID)
    x = g.concat("redA_out", [r0, r1, rp])
    for i in range(1, 11):
        x = _ir_block17(g, f"b{i}", x, _IR_B17_WIDTH)
    # reduction 17 -> 8
    s0 = g.conv("redB_b0a", x, 256, 1, act=True)
    s0 = g.conv("redB_b0b", s0, 384, 3, stride=2, padding=VALID, act=True)
    s1 = g.conv("redB_b1a", x, 256, 1, act=True)
    s1 = g.conv("redB_b1b", s1, 256, 3, stride=2, padding=VALID, act=True)
    s2 = g.conv("redB_b2a", x, 256, 1, act=True)
    s2 = g.conv("redB_b2b", s2, 256, 3, act=True)
    s2 = g.conv("redB_b2c", s2, 256, 3, stride=2, padding=VALID, act=True)
    sp = g.pool("redB_pool", x, "max", (3, 3), (2, 2), VALID)
    x = g.concat("redB_out", [s0, s1, s2, sp])
    for i in range(1, 6):
        x = _ir_block8(g, f"c{i}", x)
    x = g.global_avgpool("gap", x)
    x = g.fc("embedding", x, 128)
    return g.finish(x)


# --- image-to-image -------------------------------------------------------


def build_srcnn(h, w, stream):
    g = GraphBuilder("srcnn", (1, h, w, 3), stream)
    x = g.conv("conv1", INPUT_ID, 64, 9, act=True)
    x = g.conv("conv2", x, 32, 5, act=True)
    x = g.conv("conv3", x, 3, 5)
    return g.finish(x)


def build_vdsr(h, w, stream):
    g = GraphBuilder("vdsr", (1, h, w, 3), stream)
    x = g.conv("conv1", INPUT_ID, 64, 3, act=True)
    for i in range(2, 19):
        x = g.conv(f"conv{i}", x, 64, 3, act=True)
    x = g.conv("conv19", x, 3, 3)
    x = g.add("residual", x, INPUT_ID)
    return g.finish(x)


def _res_block(g, p, src, k=3):
    y = g.conv(f"{p}_c1", src, g.channels(src), k, act=True)
    y = g.conv(f"{p}_c2", y, g.channels(src), k)
    return g.add(f"{p}_add", src, y)


def build_srgan_generator(h, w, stream):
    """SRGAN-style restoration net: 16 residual blocks at quarter resolution.

    The tail convolutions run before each upsample step (at the lower
    resolution), mirroring the pre-shuffle placement in the original design.
    """
    g = GraphBuilder("srgan_generator", (1, h, w, 3), stream)
    lh, lw = max(1, h // 4), max(1, w // 4)
    x = g.resize("down", INPUT_ID, lh, lw)
    head = g.conv("head", x, 64, 9, act=True)
    x = head
    for i in range(1, 17):
        x = _res_block(g, f"res{i}", x)
    x = g.conv("post", x, 64, 5)
    x = g.add("skip", x, head)
    x = g.conv("up1_conv", x, 64, 5, act=True)
    x = g.resize("up1", x, max(1, h // 2), max(1, w // 2))
    x = g.conv("up2_conv", x, 64, 3, act=True)
    x = g.resize("up2", x, h, w)
    x = g.conv("out", x, 3, 5)
    return g.finish(x)


def build_icnet(h, w, stream):
    """Three-branch resolution pyramid with cascade fusion, 19 classes."""
    g = GraphBuilder("icnet", (1, h, w, 3), stream)
    # low-resolution branch carries the deep trunk
    q = g.resize("q_down", INPUT_ID, max(1, h // 4), max(1, w // 4))
    q = g.conv("q_conv1", q, 32, 3, stride=2, act=True)
    q = g.conv("q_conv2", q, 64, 3, stride=2, act=True)
    q = g.conv("q_conv3", q, 128, 3, act=True)
    q = g.conv("q_conv4", q, 256, 3, act=True)
    for i in range(1, 11):
        q = g.conv(f"q_trunk{i}", q, 256, 3, act=True)
    q = g.conv("q_proj", q, 128, 1, act=True)
    # mid-resolution branch
    m = g.resize("m_down", INPUT_ID, max(1, h // 2), max(1, w // 2))
    m = g.conv("m_conv1", m, 32, 3, stride=2, act=True)
    m = g.conv("m_conv2", m, 64, 3, act=True)
    m = g.conv("m_conv3", m, 128, 3, act=True)
    m = g.conv("m_conv4", m, 128, 3, act=True)
    # full-resolution branch
    f = g.conv("f_conv1", INPUT_ID, 32, 3, stride=2, act=True)
    f = g.conv("f_conv2", f, 64, 3, act=True)
    # cascade fusion: low -> mid -> full
    mh, mw = g.hw(m)
    qm = g.resize("q_up", q, mh, mw)
    x = g.concat("fuse1_cat", [qm, m])
    x = g.conv("fuse1_conv", x, 128, 3, act=True)
    fh, fw = g.hw(f)
    x = g.resize("fuse1_up", x, fh, fw)
    x = g.concat("fuse2_cat", [x, f])
    x = g.conv("fuse2_conv", x, 64, 3, act=True)
    x = g.conv("classifier", x, 19, 1)
    x = g.resize("logits_up", x, h, w)
    x = g.softmax("softmax", x)
    return g.finish(x)


def build_dped(h, w, stream):
    g = GraphBuilder("dped", (1, h, w, 3), stream)
    x = g.conv("head", INPUT_ID, 64, 9, act=True)
    for i in range(1, 5):
        x = _res_block(g, f"res{i}", x)
    x = g.conv("conv1", x, 64, 3, act=True)
    x = g.conv("conv2", x, 64, 3, act=True)
    x = g.conv("out", x, 3, 9)
    return g.finish(x)


BUILDERS = {
    "mobilenet_v1": build_mobilenet_v1,
    "inception_v3": build_inception_v3,
    "inception_resnet_v1": build_inception_resnet_v1,
    "srcnn": build_srcnn,
    "vdsr": build_vdsr,
    "srgan_generator": build_srgan_generator,
    "icnet": build_icnet,
    "dped": build_dped,
}
