"""Tree-structured colorization network.

A shared trunk of same-padded 3x3 convolutions splits into K branches; each
branch applies one hidden conv + rectifier and a final linear conv emitting a
(cb, cr) pair per pixel. A separate predictor head consumes the concatenated
first-layer features of all branches and produces per-pixel branch
probabilities.

Tensors throughout are float64 numpy arrays shaped (channels, height, width),
row-major within each channel. Double precision and a fixed convolution
traversal order keep forward passes bit-reproducible, which the codec relies
on for encoder/decoder agreement.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from chromacodec import kernels
from chromacodec.errors import (
    CorruptWeights,
    FormatVersionMismatch,
    InvalidConfig,
    NonFiniteGradient,
    ShapeMismatch,
)
from chromacodec.pixelio import fnv1a64

CHROMA_CHANNELS = 2

WEIGHTS_MAGIC = b"CHW1"
WEIGHTS_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkConfig:
    k_branches: int
    trunk_channels: int = 16
    trunk_depth: int = 2
    branch_hidden: int = 8
    predictor_hidden: int = 16
    kernel_size: int = 3
    seed: int = 0

    def validate(self):
        if not 1 <= self.k_branches <= 16:
            raise InvalidConfig(f"k_branches must be in [1, 16], got {self.k_branches}")
        for name in ("trunk_channels", "trunk_depth", "branch_hidden", "predictor_hidden"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise InvalidConfig("kernel_size must be odd and positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")

    @property
    def receptive_radius(self):
        """Radius of the hypothesis path: trunk_depth + 2 conv layers, 1 px each."""
        half = self.kernel_size // 2
        return (self.trunk_depth + 2) * half


@dataclass
class ConvBlock:
    kernel: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray  # (out,)

    def copy(self):
        return ConvBlock(self.kernel.copy(), self.bias.copy())


@dataclass
class ModelWeights:
    config: NetworkConfig
    trunk: list  # trunk_depth ConvBlocks
    branches: list  # K entries of [hidden ConvBlock, output ConvBlock]
    predictor: list  # [hidden ConvBlock, output ConvBlock]

    def blocks(self):
        """All parameter blocks in canonical order: trunk, branches, predictor."""
        out = list(self.trunk)
        for branch in self.branches:
            out.extend(branch)
        out.extend(self.predictor)
        return out

    def predictor_block_indices(self):
        n = len(self.trunk) + 2 * len(self.branches)
        return [n, n + 1]

    def copy(self):
        return ModelWeights(
            config=self.config,
            trunk=[b.copy() for b in self.trunk],
            branches=[[b.copy() for b in br] for br in self.branches],
            predictor=[b.copy() for b in self.predictor],
        )

    def serialize(self):
        """Binary form without the trailing hash (see save_weights)."""
        cfg = self.config
        out = bytearray()
        out += WEIGHTS_MAGIC
        out += struct.pack(
            "<BBHHHHBQ",
            WEIGHTS_VERSION,
            cfg.k_branches,
            cfg.trunk_channels,
            cfg.trunk_depth,
            cfg.branch_hidden,
            cfg.predictor_hidden,
            cfg.kernel_size,
            cfg.seed,
        )
        blocks = self.blocks()
        out += struct.pack("<I", len(blocks))
        for blk in blocks:
            out += struct.pack("<IIII", *blk.kernel.shape)
            out += blk.kernel.astype("<f8").tobytes()
            out += struct.pack("<I", blk.bias.shape[0])
            out += blk.bias.astype("<f8").tobytes()
        return bytes(out)

    def content_hash(self):
        """64-bit identity of the weights; stored in containers to pair them
        with the exact model that produced the hypotheses."""
        return fnv1a64(self.serialize())


def init_model(config):
    """MSRA-initialized weights: kernels ~ N(0, 2/fan_in), zero biases.

    Deterministic for a given config.seed; blocks are drawn in canonical
    order so the stream of random numbers is reproducible.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    ks = config.kernel_size

    def draw(c_out, c_in):
        fan_in = c_in * ks * ks
        kernel = rng.standard_normal((c_out, c_in, ks, ks)) * math.sqrt(2.0 / fan_in)
        return ConvBlock(kernel, np.zeros(c_out))

    tc = config.trunk_channels
    trunk = [draw(tc, 1)] + [draw(tc, tc) for _ in range(config.trunk_depth - 1)]
    branches = [
        [draw(config.branch_hidden, tc), draw(CHROMA_CHANNELS, config.branch_hidden)]
        for _ in range(config.k_branches)
    ]
    predictor = [
        draw(config.predictor_hidden, config.k_branches * config.branch_hidden),
        draw(config.k_branches, config.predictor_hidden),
    ]
    return ModelWeights(config=config, trunk=trunk, branches=branches, predictor=predictor)


@dataclass
class HypothesisSet:
    """K chroma hypotheses per pixel plus the branch first-layer features."""

    chroma: np.ndarray  # (K, 2, H, W)
    features: np.ndarray  # (K, branch_hidden, H, W)

    @property
    def k(self):
        return self.chroma.shape[0]

    @property
    def height(self):
        return self.chroma.shape[2]

    @property
    def width(self):
        return self.chroma.shape[3]


@dataclass
class ForwardCache:
    """Intermediate activations kept for backpropagation."""

    x: np.ndarray
    trunk_pre: list
    trunk_act: list
    branch_pre: list  # pre-activation of each branch's hidden conv
    hyp: HypothesisSet = None


def _relu(z):
    return np.maximum(z, 0.0)


def _as_input_plane(gray, config):
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ShapeMismatch(f"gray plane must be 2-d, got shape {gray.shape}")
    if min(gray.shape) < config.kernel_size:
        raise ShapeMismatch(
            f"gray plane {gray.shape} smaller than kernel size {config.kernel_size}"
        )
    return np.ascontiguousarray(gray)[None]


def forward_hypotheses(weights, gray, cache=False):
    """Run trunk + branches on a luma plane.

    Returns a HypothesisSet; with cache=True returns (HypothesisSet, ForwardCache)
    for training.
    """
    cfg = weights.config
    x = _as_input_plane(gray, cfg)
    trunk_pre, trunk_act = [], []
    act = x
    for blk in weights.trunk:
        pre = kernels.conv2d_forward(act, blk.kernel, blk.bias)
        act = _relu(pre)
        trunk_pre.append(pre)
        trunk_act.append(act)

    chroma, features, branch_pre = [], [], []
    for hidden, out in weights.branches:
        fpre = kernels.conv2d_forward(act, hidden.kernel, hidden.bias)
        feat = _relu(fpre)
        chroma.append(kernels.conv2d_forward(feat, out.kernel, out.bias))
        features.append(feat)
        branch_pre.append(fpre)

    hyp = HypothesisSet(chroma=np.stack(chroma), features=np.stack(features))
    if not cache:
        return hyp
    fc = ForwardCache(x=x, trunk_pre=trunk_pre, trunk_act=trunk_act, branch_pre=branch_pre, hyp=hyp)
    return hyp, fc


def _softmax_channels(logits):
    m = logits.max(axis=0, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=0, keepdims=True)


@dataclass
class PredictorCache:
    concat: np.ndarray
    hidden_pre: np.ndarray
    hidden_act: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def forward_predictor(weights, hyp, cache=False):
    """Per-pixel branch probabilities (K, H, W); rows sum to 1."""
    cfg = weights.config
    if hyp.k != cfg.k_branches:
        raise ShapeMismatch(f"hypothesis set has {hyp.k} branches, model {cfg.k_branches}")
    concat = np.ascontiguousarray(
        hyp.features.reshape(hyp.k * hyp.features.shape[1], hyp.height, hyp.width)
    )
    hidden, out = weights.predictor
    pre = kernels.conv2d_forward(concat, hidden.kernel, hidden.bias)
    act = _relu(pre)
    logits = kernels.conv2d_forward(act, out.kernel, out.bias)
    probs = _softmax_channels(logits)
    if not cache:
        return probs
    return probs, PredictorCache(concat=concat, hidden_pre=pre, hidden_act=act, logits=logits, probs=probs)


def backward_hypotheses(weights, fc, dchroma):
    """Gradients of all trunk and branch blocks given d(loss)/d(branch outputs).

    dchroma is (K, 2, H, W). Returns a list aligned with weights.blocks();
    predictor entries are None. Branch contributions to the trunk gradient
    accumulate in branch-index order (fixed for reproducibility).
    """
    grads = [None] * len(weights.blocks())
    trunk_top = fc.trunk_act[-1]
    ks = weights.config.kernel_size
    d_trunk = np.zeros_like(trunk_top)
    for j, (hidden, out) in enumerate(weights.branches):
        dout_j = np.ascontiguousarray(dchroma[j])
        feat = np.ascontiguousarray(fc.hyp.features[j])
        dw2, db2 = kernels.conv2d_backward_weights(dout_j, feat, ks, ks)
        dfeat = kernels.conv2d_backward_input(dout_j, out.kernel)
        dfpre = np.ascontiguousarray(dfeat * (fc.branch_pre[j] > 0))
        dw1, db1 = kernels.conv2d_backward_weights(dfpre, trunk_top, ks, ks)
        d_trunk += kernels.conv2d_backward_input(dfpre, hidden.kernel)
        base = len(weights.trunk) + 2 * j
        grads[base] = (dw1, db1)
        grads[base + 1] = (dw2, db2)

    da = d_trunk
    for l in range(len(weights.trunk) - 1, -1, -1):
        dz = np.ascontiguousarray(da * (fc.trunk_pre[l] > 0))
        below = fc.trunk_act[l - 1] if l > 0 else fc.x
        dw, db = kernels.conv2d_backward_weights(dz, below, ks, ks)
        grads[l] = (dw, db)
        if l > 0:
            da = kernels.conv2d_backward_input(dz, weights.trunk[l].kernel)
    return grads


def backward_predictor(weights, pc, dlogits):
    """Gradients of the two predictor blocks given d(loss)/d(logits)."""
    grads = [None] * len(weights.blocks())
    ks = weights.config.kernel_size
    hidden, out = weights.predictor
    dlogits = np.ascontiguousarray(dlogits)
    dw2, db2 = kernels.conv2d_backward_weights(dlogits, pc.hidden_act, ks, ks)
    dact = kernels.conv2d_backward_input(dlogits, out.kernel)
    dpre = np.ascontiguousarray(dact * (pc.hidden_pre > 0))
    dw1, db1 = kernels.conv2d_backward_weights(dpre, pc.concat, ks, ks)
    i0, i1 = weights.predictor_block_indices()
    grads[i0] = (dw1, db1)
    grads[i1] = (dw2, db2)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, aligned with weights.blocks()."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_weights(cls, weights):
        state = cls()
        for blk in weights.blocks():
            state.m.append((np.zeros_like(blk.kernel), np.zeros_like(blk.bias)))
            state.v.append((np.zeros_like(blk.kernel), np.zeros_like(blk.bias)))
        return state


def adam_step(weights, grads, state, t, lr):
    """Bias-corrected ADAM update (beta1=0.9, beta2=0.999, eps=1e-8).

    grads is aligned with weights.blocks(); None entries are frozen blocks.
    Updates weights and state in place and returns them.
    """
    if t < 1:
        raise InvalidConfig("adam step index t must be >= 1")
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for idx, blk in enumerate(weights.blocks()):
        if grads[idx] is None:
            continue
        for g, param, m, v in zip(grads[idx], (blk.kernel, blk.bias), state.m[idx], state.v[idx]):
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient in block {idx}")
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            param -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return weights, state


def save_weights(weights, path):
    """Write the CHW1 binary weights file (payload + trailing FNV-1a-64)."""
    payload = weights.serialize()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<Q", fnv1a64(payload)))


def load_weights(path):
    """Read a CHW1 weights file; verifies version, hash, and shapes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != WEIGHTS_MAGIC:
        raise CorruptWeights(f"{path}: not a CHW1 weights file")
    version = data[4]
    if version != WEIGHTS_VERSION:
        raise FormatVersionMismatch(f"{path}: format version {version}, expected {WEIGHTS_VERSION}")
    payload, stored = data[:-8], struct.unpack("<Q", data[-8:])[0]
    if fnv1a64(payload) != stored:
        raise CorruptWeights(f"{path}: content hash mismatch")

    off = 4
    try:
        version, k, tc, td, bh, ph, ks, seed = struct.unpack_from("<BBHHHHBQ", payload, off)
        off += struct.calcsize("<BBHHHHBQ")
        config = NetworkConfig(
            k_branches=k,
            trunk_channels=tc,
            trunk_depth=td,
            branch_hidden=bh,
            predictor_hidden=ph,
            kernel_size=ks,
            seed=seed,
        )
        config.validate()
        (n_blocks,) = struct.unpack_from("<I", payload, off)
        off += 4
        blocks = []
        for _ in range(n_blocks):
            dims = struct.unpack_from("<IIII", payload, off)
            off += 16
            count = dims[0] * dims[1] * dims[2] * dims[3]
            kernel = np.frombuffer(payload, dtype="<f8", count=count, offset=off).reshape(dims)
            off += count * 8
            (blen,) = struct.unpack_from("<I", payload, off)
            off += 4
            bias = np.frombuffer(payload, dtype="<f8", count=blen, offset=off)
            off += blen * 8
            blocks.append(ConvBlock(kernel.copy(), bias.copy()))
    except (struct.error, ValueError, InvalidConfig) as exc:
        raise CorruptWeights(f"{path}: malformed payload ({exc})") from exc
    if off != len(payload):
        raise CorruptWeights(f"{path}: trailing bytes in payload")

    expected = config.trunk_depth + 2 * config.k_branches + 2
    if n_blocks != expected:
        raise CorruptWeights(f"{path}: {n_blocks} blocks, config implies {expected}")
    trunk = blocks[: config.trunk_depth]
    branches = [
        blocks[config.trunk_depth + 2 * j : config.trunk_depth + 2 * j + 2]
        for j in range(config.k_branches)
    ]
    predictor = blocks[config.trunk_depth + 2 * config.k_branches :]
    model = ModelWeights(config=config, trunk=trunk, branches=branches, predictor=predictor)
    for blk in model.blocks():
        if not np.all(np.isfinite(blk.kernel)) or not np.all(np.isfinite(blk.bias)):
            raise CorruptWeights(f"{path}: non-finite parameter values")
    return model
