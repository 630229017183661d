"""Network assembly: the three architectures under test over a shared mini
residual backbone, size-based routing, and checkpoint serialization.

Kinds:
  ipn - iterative pooling inserted between stage 2 and stage 3
  mpn - adaptive max-pool in the same slot (the baseline)
  bn  - branched: shared trunk, per-size-category tails, shared classifier
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .ops import (
    ConvParams,
    LinearParams,
    conv2d_backward,
    conv2d_forward,
    linear_backward,
    linear_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu,
    relu_backward,
)
from .pooling import (
    IterPoolParams,
    adaptive_max_pool_with_argmax,
    init_iter_pool,
    iterative_pool_backward,
    iterative_pool_forward,
)
from .tensor import TensorFormatError, tns_bytes, tns_from_bytes

CATEGORIES = ("I", "II", "III")

CKPT_MAGIC = b"PNCK"
CKPT_VERSION = 1


# ---------------------------------------------------------------------------
# Specs and routing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageSpec:
    channels: int
    blocks: int
    downsample: bool


@dataclass(frozen=True)
class BackboneSpec:
    stem_channels: int
    stages: tuple[StageSpec, ...]

    def validate(self) -> None:
        if len(self.stages) < 4:
            raise ValueError("backbone needs >= 4 stages for a mid-network insertion point")
        chans = [s.channels for s in self.stages]
        if any(b < a for a, b in zip(chans, chans[1:])):
            raise ValueError("stage channel counts must be non-decreasing")
        if any(s.blocks < 1 for s in self.stages):
            raise ValueError("every stage needs at least one block")


def default_backbone() -> BackboneSpec:
    return BackboneSpec(
        stem_channels=16,
        stages=(
            StageSpec(16, 1, False),
            StageSpec(32, 1, True),
            StageSpec(64, 1, True),
            StageSpec(128, 1, True),
        ),
    )


@dataclass(frozen=True)
class NetworkSpec:
    kind: str  # "ipn" | "mpn" | "bn"
    backbone: BackboneSpec = field(default_factory=default_backbone)
    target_h: int = 4
    class_count: int = 5
    # bn only: category -> index (1-based) of the last trunk stage on its path
    branch_exits: tuple[tuple[str, int], ...] = (("I", 2), ("II", 3), ("III", 4))
    # bn only: size-specific residual blocks per tail (earlier exits get more)
    tail_stages: tuple[tuple[str, tuple[int, ...]], ...] = (
        ("I", (64, 128)),
        ("II", (128,)),
        ("III", ()),
    )

    def validate(self) -> None:
        if self.kind not in ("ipn", "mpn", "bn"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        self.backbone.validate()
        if self.kind == "bn":
            exits = dict(self.branch_exits)
            if set(exits) != set(CATEGORIES):
                raise ValueError("bn needs an exit stage for each of categories I, II, III")
            for cat, st in exits.items():
                if not 1 <= st <= len(self.backbone.stages):
                    raise ValueError(f"bad exit stage {st} for category {cat}")
            if set(dict(self.tail_stages)) != set(CATEGORIES):
                raise ValueError("bn needs a tail stage list for each category")

    def canonical(self) -> str:
        stages = ";".join(
            f"{s.channels},{s.blocks},{int(s.downsample)}" for s in self.backbone.stages
        )
        return (
            f"kind={self.kind}|stem={self.backbone.stem_channels}|stages={stages}"
            f"|target_h={self.target_h}|classes={self.class_count}"
            f"|exits={dict(self.branch_exits)}|tails={dict(self.tail_stages)}"
        )

    def hash64(self) -> int:
        digest = hashlib.sha256(self.canonical().encode()).digest()
        return int.from_bytes(digest[:8], "little")


def patch_size_for(d: int, mode: str) -> int:
    """Patch side for an image whose minimum dimension is d pixels."""
    sizes = {"ipn": (128, 256, 512), "bn": (64, 128, 256)}.get(mode.lower())
    if sizes is None:
        raise ValueError(f"unknown mode {mode!r}")
    small, mid, large = sizes
    if d < small:
        raise ValueError(f"image dimension {d} below minimum patch size {small}")
    if d < 1024:
        return small
    if d <= 2000:  # boundaries 1024 and 2000 assigned to the middle bucket
        return mid
    return large


def category_for(d: int) -> str:
    if d < 64:
        raise ValueError(f"image dimension {d} below minimum patch size")
    if d < 1024:
        return "I"
    if d <= 2000:
        return "II"
    return "III"


# ---------------------------------------------------------------------------
# Layers (forward caches what backward needs; grads accumulate per step)
# ---------------------------------------------------------------------------

def _he_conv(rng, out_ch, in_ch, k, stride, pad, dtype) -> ConvParams:
    std = np.sqrt(2.0 / (in_ch * k * k))
    w = rng.normal(0.0, std, size=(out_ch, in_ch, k, k)).astype(dtype)
    b = np.zeros(out_ch, dtype=dtype)
    return ConvParams(w, b, stride=stride, pad=pad)


class ConvLayer:
    def __init__(self, name, p: ConvParams):
        self.name = name
        self.p = p
        self.dw = np.zeros_like(p.weight)
        self.db = np.zeros_like(p.bias)

    def forward(self, x):
        self._x = x
        return conv2d_forward(x, self.p)

    def backward(self, dy):
        dx, dw, db = conv2d_backward(self._x, self.p, dy)
        self.dw += dw
        self.db += db
        return dx

    def params(self):
        return {f"{self.name}.w": self.p.weight, f"{self.name}.b": self.p.bias}

    def grads(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class ResBlock:
    """y = relu(identity + conv2(relu(conv1(x)))); 1x1 projection on shape change."""

    def __init__(self, name, in_ch, out_ch, downsample, rng, dtype):
        stride = 2 if downsample else 1
        self.conv1 = ConvLayer(f"{name}.conv1", _he_conv(rng, out_ch, in_ch, 3, stride, 1, dtype))
        self.conv2 = ConvLayer(f"{name}.conv2", _he_conv(rng, out_ch, out_ch, 3, 1, 1, dtype))
        self.proj = None
        if stride != 1 or in_ch != out_ch:
            self.proj = ConvLayer(f"{name}.proj", _he_conv(rng, out_ch, in_ch, 1, stride, 0, dtype))
        self._layers = [l for l in (self.conv1, self.conv2, self.proj) if l is not None]

    def forward(self, x):
        a = self.conv1.forward(x)
        self._a = a
        branch = self.conv2.forward(relu(a))
        identity = self.proj.forward(x) if self.proj else x
        s = identity + branch
        self._s = s
        return relu(s)

    def backward(self, dy):
        ds = relu_backward(self._s, dy)
        da = relu_backward(self._a, self.conv2.backward(ds))
        dx = self.conv1.backward(da)
        dx = dx + (self.proj.backward(ds) if self.proj else ds)
        return dx

    def params(self):
        out = {}
        for l in self._layers:
            out.update(l.params())
        return out

    def grads(self):
        out = {}
        for l in self._layers:
            out.update(l.grads())
        return out


class IterPoolLayer:
    def __init__(self, name, channels, target_h, rng, dtype):
        self.name = name
        self.p = init_iter_pool(channels, rng, target_h=target_h, dtype=dtype)
        self.dw = np.zeros_like(self.p.shared_kernel.weight)
        self.db = np.zeros_like(self.p.shared_kernel.bias)

    def forward(self, x):
        y, self._saved = iterative_pool_forward(x, self.p)
        return y

    def backward(self, dy):
        dx, dw, db = iterative_pool_backward(self._saved, self.p, dy)
        self.dw += dw
        self.db += db
        return dx

    def params(self):
        k = self.p.shared_kernel
        return {f"{self.name}.w": k.weight, f"{self.name}.b": k.bias}

    def grads(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class AdaptiveMaxPoolLayer:
    def __init__(self, target_h):
        self.target_h = target_h

    def forward(self, x):
        self._shape = x.shape
        if x.shape[2] == self.target_h and x.shape[3] == self.target_h:
            self._argmax = None
            return x
        y, self._argmax = adaptive_max_pool_with_argmax(x, self.target_h)
        return y

    def backward(self, dy):
        if self._argmax is None:
            return dy
        return maxpool2d_backward(self._argmax, dy, self._shape)

    def params(self):
        return {}

    def grads(self):
        return {}


class GlobalMaxPoolLayer:
    """Collapse spatial dims to 1x1."""

    def forward(self, x):
        self._shape = x.shape
        y, self._argmax = maxpool2d_forward(x, window=x.shape[2], stride=x.shape[2])
        return y

    def backward(self, dy):
        return maxpool2d_backward(self._argmax, dy, self._shape)

    def params(self):
        return {}

    def grads(self):
        return {}


class LinearLayer:
    def __init__(self, name, in_dim, out_dim, rng, dtype):
        std = np.sqrt(2.0 / in_dim)
        self.name = name
        self.p = LinearParams(
            rng.normal(0.0, std, size=(out_dim, in_dim)).astype(dtype),
            np.zeros(out_dim, dtype=dtype),
        )
        self.dw = np.zeros_like(self.p.weight)
        self.db = np.zeros_like(self.p.bias)

    def forward(self, x):
        self._x = x
        return linear_forward(x, self.p)

    def backward(self, dy):
        dx, dw, db = linear_backward(self._x, self.p, dy)
        self.dw += dw
        self.db += db
        return dx

    def params(self):
        return {f"{self.name}.w": self.p.weight, f"{self.name}.b": self.p.bias}

    def grads(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

class Network:
    """Common parameter bookkeeping; subclasses define the forward path."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self._param_layers: list = []

    def _register(self, *layers):
        for l in layers:
            self._param_layers.append(l)
        return layers[0] if len(layers) == 1 else layers

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for l in self._param_layers:
            out.update(l.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for l in self._param_layers:
            out.update(l.grads())
        return out

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0

    def load_params(self, values: dict[str, np.ndarray]) -> None:
        own = self.params()
        if set(values) != set(own):
            raise TensorFormatError("checkpoint parameter names do not match network spec")
        for name, arr in values.items():
            if arr.shape != own[name].shape:
                raise TensorFormatError(f"checkpoint shape mismatch for {name}")
            own[name][...] = arr

    def forward(self, x, category=None):
        raise NotImplementedError

    def backward(self, dlogits):
        raise NotImplementedError


def _make_stage(name, spec: StageSpec, in_ch, rng, dtype):
    blocks = []
    ch = in_ch
    for b in range(spec.blocks):
        blocks.append(
            ResBlock(f"{name}.block{b}", ch, spec.channels, spec.downsample and b == 0, rng, dtype)
        )
        ch = spec.channels
    return blocks


class MidPoolNetwork(Network):
    """ipn / mpn: stem, stages 1-2, pooling adapter, stages 3-4, global max
    pool, linear classifier."""

    def __init__(self, spec: NetworkSpec, seed: int, dtype=np.float32):
        spec.validate()
        super().__init__(spec)
        rng = np.random.default_rng(seed)
        bb = spec.backbone
        self.stem = self._register(
            ConvLayer("stem", _he_conv(rng, bb.stem_channels, 1, 3, 1, 1, dtype))
        )
        self.stages = []
        ch = bb.stem_channels
        for i, st in enumerate(bb.stages, start=1):
            blocks = _make_stage(f"stage{i}", st, ch, rng, dtype)
            for b in blocks:
                self._register(b)
            self.stages.append(blocks)
            ch = st.channels
        mid_ch = bb.stages[1].channels
        if spec.kind == "ipn":
            self.adapter = self._register(
                IterPoolLayer("pool", mid_ch, spec.target_h, rng, dtype)
            )
        else:
            self.adapter = AdaptiveMaxPoolLayer(spec.target_h)
        self.gpool = GlobalMaxPoolLayer()
        self.fc = self._register(LinearLayer("fc", ch, spec.class_count, rng, dtype))

    def forward(self, x, category=None):
        y = relu(self.stem.forward(x))
        self._stem_act = y
        for blocks in self.stages[:2]:
            for b in blocks:
                y = b.forward(y)
        y = self.adapter.forward(y)
        for blocks in self.stages[2:]:
            for b in blocks:
                y = b.forward(y)
        y = self.gpool.forward(y)
        self._flat_shape = y.shape
        return self.fc.forward(y.reshape(y.shape[0], -1))

    def backward(self, dlogits):
        dy = self.fc.backward(dlogits).reshape(self._flat_shape)
        dy = self.gpool.backward(dy)
        for blocks in reversed(self.stages[2:]):
            for b in reversed(blocks):
                dy = b.backward(dy)
        dy = self.adapter.backward(dy)
        for blocks in reversed(self.stages[:2]):
            for b in reversed(blocks):
                dy = b.backward(dy)
        # post-relu activation is a valid mask source: act > 0 iff pre-act > 0
        dy = relu_backward(self._stem_act, dy)
        return self.stem.backward(dy)


class BranchTail:
    """Per-category tail: a few size-specific residual blocks (earlier trunk
    exits get more), then global max pool to 1x1 and a 1x1 conv to the common
    channel width."""

    def __init__(self, name, in_ch, tail_channels, common_ch, rng, dtype):
        self.blocks = []
        ch = in_ch
        for j, out_ch in enumerate(tail_channels):
            self.blocks.append(ResBlock(f"{name}.block{j}", ch, out_ch, True, rng, dtype))
            ch = out_ch
        self.pool = GlobalMaxPoolLayer()
        self.conv = ConvLayer(f"{name}.conv", _he_conv(rng, common_ch, ch, 1, 1, 0, dtype))

    def forward(self, x):
        y = x
        for b in self.blocks:
            y = b.forward(y)
        y = self.pool.forward(y)
        y = self.conv.forward(y)
        self._pre = y
        return relu(y)

    def backward(self, dy):
        dy = relu_backward(self._pre, dy)
        dy = self.pool.backward(self.conv.backward(dy))
        for b in reversed(self.blocks):
            dy = b.backward(dy)
        return dy


class BranchedNetwork(Network):
    """bn: shared stem + trunk stages; each size category exits the trunk at
    its own stage, runs its tail, and feeds the shared classifier."""

    def __init__(self, spec: NetworkSpec, seed: int, dtype=np.float32):
        spec.validate()
        super().__init__(spec)
        rng = np.random.default_rng(seed)
        bb = spec.backbone
        self.stem = self._register(
            ConvLayer("stem", _he_conv(rng, bb.stem_channels, 1, 3, 1, 1, dtype))
        )
        self.stages = []
        ch = bb.stem_channels
        stage_out = []
        for i, st in enumerate(bb.stages, start=1):
            blocks = _make_stage(f"stage{i}", st, ch, rng, dtype)
            for b in blocks:
                self._register(b)
            self.stages.append(blocks)
            ch = st.channels
            stage_out.append(ch)
        self.exits = dict(spec.branch_exits)
        tail_channels = dict(spec.tail_stages)
        common = stage_out[-1]
        self.tails = {}
        for cat in CATEGORIES:
            tail = BranchTail(
                f"tail_{cat}", stage_out[self.exits[cat] - 1], tail_channels[cat],
                common, rng, dtype,
            )
            for b in tail.blocks:
                self._register(b)
            self._register(tail.conv)
            self.tails[cat] = tail
        self.fc = self._register(LinearLayer("fc", common, spec.class_count, rng, dtype))

    def forward(self, x, category=None):
        if category not in self.tails:
            raise ValueError(f"branched network needs a category hint in {CATEGORIES}")
        self._cat = category
        y = relu(self.stem.forward(x))
        self._stem_act = y
        exit_stage = self.exits[category]
        for blocks in self.stages[:exit_stage]:
            for b in blocks:
                y = b.forward(y)
        y = self.tails[category].forward(y)
        self._flat_shape = y.shape
        return self.fc.forward(y.reshape(y.shape[0], -1))

    def backward(self, dlogits):
        cat = self._cat
        dy = self.fc.backward(dlogits).reshape(self._flat_shape)
        dy = self.tails[cat].backward(dy)
        for blocks in reversed(self.stages[: self.exits[cat]]):
            for b in reversed(blocks):
                dy = b.backward(dy)
        dy = relu_backward(self._stem_act, dy)
        return self.stem.backward(dy)


def build_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Network:
    spec.validate()
    if spec.kind == "bn":
        return BranchedNetwork(spec, seed, dtype=dtype)
    return MidPoolNetwork(spec, seed, dtype=dtype)


def parameter_count(net: Network) -> int:
    return sum(int(p.size) for p in net.params().values())


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: Network, path) -> None:
    blob = CKPT_MAGIC + struct.pack("<IQ", CKPT_VERSION, net.spec.hash64())
    for name, arr in net.params().items():
        nb = name.encode()
        blob += struct.pack("<H", len(nb)) + nb + tns_bytes(arr)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_checkpoint(path, spec: NetworkSpec, seed: int = 0) -> Network:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CKPT_MAGIC:
        raise TensorFormatError("bad checkpoint magic")
    version, spec_hash = struct.unpack_from("<IQ", blob, 4)
    if version != CKPT_VERSION:
        raise TensorFormatError(f"unsupported checkpoint version {version}")
    if spec_hash != spec.hash64():
        raise TensorFormatError("checkpoint was written for a different network spec")
    values = {}
    offset = 16
    try:
        while offset < len(blob):
            (nlen,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + nlen].decode()
            if len(name.encode()) != nlen:
                raise TensorFormatError("truncated checkpoint record")
            offset += nlen
            arr, offset = tns_from_bytes(blob, offset)
            values[name] = arr
    except struct.error as exc:
        raise TensorFormatError("truncated checkpoint") from exc
    net = build_network(spec, seed=seed)
    net.load_params(values)
    return net
