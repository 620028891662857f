"""Self-contained convolution micro-kernel and the three fusion operators.

The fusion stage of a skip connection combines encoder features X and
decoder features Y (each c channels) before a convolution.  Three
variants, all expressible as one convolution over the channel
concatenation [X; Y] with a suitably built kernel bank:

- add:    Z = sum_i (X_i + Y_i) * K_i           -> bank [K; K]
- concat: Z = sum_i X_i * K_i + Y_i * K_{i+c}   -> bank K2c as given
- csc:    Z = sum_i X_i*K_i + Y_i*K_i + Y_i*Kh_i -> bank [K; K + Kh]

Evaluating every variant through that single shared convolution makes
the algebraic collapses exact at the bit level: duplicating the halves
of a concat bank *is* the add bank, and a zero extra kernel turns csc
into add, with no floating-point wiggle room.

The kernel is deliberately tiny — dense 2-D cross-correlation, exact
analytic gradients, an L1 loss, a parameter/FLOP cost model, and a
seeded gradient-descent demo — everything in float64 and verified
against brute-force and finite-difference oracles in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvariantViolation, IOFailure, UsageError
from .rng import Xoshiro256StarStar

FUSION_MODES = ("add", "concat", "csc")

# Cost-model defaults: channel width of the fused features, conv block
# depth, kernel size, feature-map extent, and the block's output width.
DEFAULT_COST_CONFIG = dict(c=32, block_depth=2, kh=3, kw=3, h=64, w=64)


@dataclass(frozen=True)
class FusionTensor:
    """A C×H×W activation tensor (channel-major, float64, finite)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise InvariantViolation(
                f"tensor data must have shape (channels, height, width), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("tensor values must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class KernelSet:
    """An O×C×kh×kw convolution kernel bank (float64, finite)."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=np.float64)
        if arr.ndim != 4:
            raise InvariantViolation(
                f"kernel weights must have shape (out, in, kh, kw), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("kernel weights must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kh(self) -> int:
        return self.weights.shape[2]

    @property
    def kw(self) -> int:
        return self.weights.shape[3]


TENSOR_MAGIC = b"DAHT"
TENSOR_VERSION = 1


def save_tensor(t: FusionTensor, path) -> None:
    """Write a C×H×W tensor fixture to the raw tensor container.

    Layout: magic ``DAHT``, u16 LE version (1), u16 LE channels, u32 LE
    height, u32 LE width, then channel-major IEEE-754 32-bit LE floats.
    Values are stored at 32-bit precision, so anything on the binary32
    grid (e.g. demo weights) round trips exactly.  Kernel banks store as
    tensors by collapsing (out, in) into the channel axis.
    """
    p = Path(path)
    header = struct.pack(
        "<4sHHII", TENSOR_MAGIC, TENSOR_VERSION, t.channels, t.height, t.width
    )
    try:
        p.write_bytes(header + t.data.astype("<f4").tobytes())
    except OSError as exc:
        raise IOFailure(f"cannot write tensor file: {p}: {exc}") from None


def load_tensor(path) -> FusionTensor:
    """Read a tensor fixture written by :func:`save_tensor`."""
    p = Path(path)
    try:
        blob = p.read_bytes()
    except FileNotFoundError:
        raise IOFailure(f"tensor file not found: {p}") from None
    except OSError as exc:
        raise IOFailure(f"cannot read tensor file: {p}: {exc}") from None
    header = struct.calcsize("<4sHHII")
    if len(blob) < header:
        raise IOFailure(f"truncated tensor header: {p}")
    magic, version, channels, height, width = struct.unpack_from("<4sHHII", blob, 0)
    if magic != TENSOR_MAGIC:
        raise IOFailure(f"bad tensor magic {magic!r}: {p}")
    if version != TENSOR_VERSION:
        raise IOFailure(f"unsupported tensor format version {version}: {p}")
    count = channels * height * width
    payload = blob[header:]
    if len(payload) < 4 * count:
        raise IOFailure(
            f"truncated tensor payload: {p} has {len(payload)} bytes, "
            f"needs {4 * count}"
        )
    data = np.frombuffer(payload[: 4 * count], dtype="<f4").astype(np.float64)
    return FusionTensor(data.reshape(channels, height, width))


def _check_conv_args(x: FusionTensor, k: KernelSet, padding: str) -> None:
    if padding not in ("same", "valid"):
        raise UsageError(f"padding must be 'same' or 'valid', got {padding!r}")
    if x.channels != k.in_channels:
        raise UsageError(
            f"channel mismatch: input has {x.channels}, kernels expect {k.in_channels}"
        )
    if padding == "same" and (k.kh % 2 == 0 or k.kw % 2 == 0):
        raise UsageError(
            f"'same' padding requires odd kernel dims, got {k.kh}x{k.kw}"
        )
    if padding == "valid" and (k.kh > x.height or k.kw > x.width):
        raise UsageError(
            f"kernel {k.kh}x{k.kw} larger than input {x.height}x{x.width}"
        )


def _pad(data: np.ndarray, kh: int, kw: int, padding: str) -> np.ndarray:
    if padding == "valid":
        return data
    return np.pad(data, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))


def conv2d(x: FusionTensor, k: KernelSet, padding: str = "same") -> FusionTensor:
    """Dense 2-D cross-correlation of a C×H×W tensor with an O×C bank.

    'same' zero-pads so spatial dimensions are preserved (odd kernel
    dims only); 'valid' keeps fully-covered positions.  The inner
    contraction order is fixed, so outputs are bit-stable across runs
    and worker counts.
    """
    _check_conv_args(x, k, padding)
    xp = _pad(x.data, k.kh, k.kw, padding)
    views = sliding_window_view(xp, (k.kh, k.kw), axis=(1, 2))
    out = np.einsum("cijpq,ocpq->oij", views, k.weights)
    return FusionTensor(out)


def conv2d_backward(
    x: FusionTensor,
    k: KernelSet,
    upstream: FusionTensor,
    padding: str = "same",
) -> tuple[FusionTensor, KernelSet]:
    """Exact gradients of ``sum(conv2d(x, k) * upstream)``.

    Returns ``(grad_x, grad_k)``.  Both are analytic: the kernel
    gradient correlates the upstream signal with the input windows, and
    the input gradient scatters each upstream value back through every
    kernel tap it touched.
    """
    _check_conv_args(x, k, padding)
    xp = _pad(x.data, k.kh, k.kw, padding)
    out_h = xp.shape[1] - k.kh + 1
    out_w = xp.shape[2] - k.kw + 1
    if upstream.data.shape != (k.out_channels, out_h, out_w):
        raise UsageError(
            f"upstream gradient shape {upstream.data.shape} does not match "
            f"conv output {(k.out_channels, out_h, out_w)}"
        )
    g = upstream.data

    views = sliding_window_view(xp, (k.kh, k.kw), axis=(1, 2))
    grad_k = np.einsum("oij,cijpq->ocpq", g, views)

    grad_xp = np.zeros_like(xp)
    for p in range(k.kh):
        for q in range(k.kw):
            grad_xp[:, p:p + out_h, q:q + out_w] += np.einsum(
                "oij,oc->cij", g, k.weights[:, :, p, q]
            )
    if padding == "same":
        ph, pw = k.kh // 2, k.kw // 2
        grad_x = grad_xp[:, ph:ph + x.height, pw:pw + x.width]
    else:
        grad_x = grad_xp
    return FusionTensor(grad_x), KernelSet(grad_k)


def _concat_tensors(x: FusionTensor, y: FusionTensor) -> FusionTensor:
    if x.data.shape != y.data.shape:
        raise UsageError(
            f"fusion inputs must share a shape: {x.data.shape} vs {y.data.shape}"
        )
    return FusionTensor(np.concatenate([x.data, y.data], axis=0))


def _stack_banks(kx: KernelSet, ky: KernelSet) -> KernelSet:
    if kx.weights.shape != ky.weights.shape:
        raise UsageError(
            f"kernel banks must share a shape: {kx.weights.shape} vs {ky.weights.shape}"
        )
    return KernelSet(np.concatenate([kx.weights, ky.weights], axis=1))


def fuse_add(x: FusionTensor, y: FusionTensor, k: KernelSet, padding: str = "same") -> FusionTensor:
    """Additive fusion: convolve the channel-wise sum X + Y with K.

    Evaluated as one convolution of [X; Y] with the duplicated bank
    [K; K], which by linearity equals conv(X + Y, K) and makes the
    collapses from the other fusion modes exact.
    """
    return conv2d(_concat_tensors(x, y), _stack_banks(k, k), padding)


def fuse_concat(x: FusionTensor, y: FusionTensor, k2c: KernelSet, padding: str = "same") -> FusionTensor:
    """Concatenation fusion: convolve [X; Y] with a 2c-input bank."""
    return conv2d(_concat_tensors(x, y), k2c, padding)


def fuse_csc(
    x: FusionTensor,
    y: FusionTensor,
    k: KernelSet,
    k_hat: KernelSet,
    padding: str = "same",
) -> FusionTensor:
    """Convolutional skip connection: add fusion plus an extra conv on Y.

    Z = conv(X, K) + conv(Y, K) + conv(Y, Khat), evaluated as one
    convolution of [X; Y] with the bank [K; K + Khat].  A zero Khat
    reduces it to additive fusion bit-for-bit.
    """
    if k.weights.shape != k_hat.weights.shape:
        raise UsageError(
            f"k and k_hat must share a shape: {k.weights.shape} vs {k_hat.weights.shape}"
        )
    return conv2d(
        _concat_tensors(x, y),
        _stack_banks(k, KernelSet(k.weights + k_hat.weights)),
        padding,
    )


def csc_from_concat(k2c: KernelSet) -> tuple[KernelSet, KernelSet]:
    """Rewrite a concat bank as an equivalent (K, Khat) pair.

    K is the first half of the input channels, Khat the second half
    minus the first, so conv(Y, K + Khat) reproduces the second half's
    contribution: fuse_csc(x, y, K, Khat) == fuse_concat(x, y, k2c)
    for all x, y.
    """
    if k2c.in_channels % 2 != 0:
        raise UsageError(
            f"concat bank needs an even input channel count, got {k2c.in_channels}"
        )
    c = k2c.in_channels // 2
    k = KernelSet(k2c.weights[:, :c].copy())
    k_hat = KernelSet(k2c.weights[:, c:] - k2c.weights[:, :c])
    return k, k_hat


def concat_from_csc(k: KernelSet, k_hat: KernelSet) -> KernelSet:
    """Inverse of :func:`csc_from_concat`: rebuild the bank [K; K + Khat]."""
    if k.weights.shape != k_hat.weights.shape:
        raise UsageError(
            f"k and k_hat must share a shape: {k.weights.shape} vs {k_hat.weights.shape}"
        )
    return _stack_banks(k, KernelSet(k.weights + k_hat.weights))


def count_cost(
    fusion: str,
    c: int,
    block_depth: int,
    kh: int,
    kw: int,
    h: int,
    w: int,
    block_width: int | None = None,
) -> tuple[int, int]:
    """Closed-form parameter and FLOP counts for a fused stage + block.

    The model is a fusion stage feeding ``block_depth`` convolution
    layers.  The block's first layer consumes c channels after add/csc
    fusion but 2c after concat; every block layer emits ``block_width``
    channels (default 2c).  The csc stage owns the single extra c→c
    convolution on the decoder branch; add and concat stages own no
    parameters.  Consequences, used as test anchors:

    - params(csc) - params(add) = c²·kh·kw exactly, and
    - params(add) < params(csc) < params(concat) whenever
      block_width > c (strict at the defaults, where block_width = 2c).

    FLOPs count one multiply and one add per kernel tap
    (2·cin·cout·kh·kw per output position) plus the element-wise adds
    of the fusion itself.
    """
    if fusion not in FUSION_MODES:
        raise UsageError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
    for name, v in (("c", c), ("block_depth", block_depth), ("kh", kh),
                    ("kw", kw), ("h", h), ("w", w)):
        if v < 1:
            raise UsageError(f"{name} must be >= 1, got {v}")
    b = 2 * c if block_width is None else block_width
    if b < 1:
        raise UsageError(f"block_width must be >= 1, got {b}")

    def conv_params(cin: int, cout: int) -> int:
        return cin * cout * kh * kw

    def conv_flops(cin: int, cout: int) -> int:
        return 2 * cin * cout * kh * kw * h * w

    if fusion == "add":
        params = 0
        flops = c * h * w  # the element-wise X + Y
        block_in = c
    elif fusion == "concat":
        params = 0
        flops = 0  # concatenation moves memory, no arithmetic
        block_in = 2 * c
    else:  # csc
        params = conv_params(c, c)
        flops = conv_flops(c, c) + 2 * c * h * w  # Khat conv + both adds
        block_in = c

    params += conv_params(block_in, b) + (block_depth - 1) * conv_params(b, b)
    flops += conv_flops(block_in, b) + (block_depth - 1) * conv_flops(b, b)
    return params, flops


def l1_loss(restored: FusionTensor, gt: FusionTensor) -> tuple[float, FusionTensor]:
    """Mean absolute error and its subgradient w.r.t. ``restored``.

    The subgradient is sign(restored - gt) / N with sign(0) = 0.
    """
    if restored.data.shape != gt.data.shape:
        raise UsageError(
            f"shape mismatch: {restored.data.shape} vs {gt.data.shape}"
        )
    diff = restored.data - gt.data
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, FusionTensor(grad)


# --------------------------------------------------------------------------
# Seeded toy trainer
# --------------------------------------------------------------------------

DEMO_CHANNELS = 2
DEMO_SIZE = 8
DEMO_MID = 2
DEMO_KSIZE = 3
DEMO_LR = 1e-2


@dataclass
class TrainResult:
    """Trace and final weights of one demo training run."""

    fusion: str
    trace: list[float]
    weights: dict[str, KernelSet]


def _grid32(arr: np.ndarray) -> np.ndarray:
    """Snap values to the binary32 grid (kept in float64 storage).

    Demo weights live on this grid so that kernel-bank rewrites such as
    K + (B - K) reproduce B exactly: differences and sums of grid
    values round trip through float64 without error, which is what
    makes the csc/concat equivalence of trained models bit-exact
    rather than merely close.
    """
    return np.asarray(arr, dtype=np.float64).astype(np.float32).astype(np.float64)


def _demo_draw(rng: Xoshiro256StarStar, shape: tuple[int, ...], bound: float) -> np.ndarray:
    flat = np.array([rng.uniform(-bound, bound) for _ in range(int(np.prod(shape)))])
    return _grid32(flat.reshape(shape))


def _demo_task(seed: int):
    """Build the fixed synthetic task and shared initial weights.

    Draw order (documented so traces are reproducible): inputs x, y,
    then the hidden concat-teacher banks that define the target, then
    the shared first-layer init and the second-layer init.
    """
    rng = Xoshiro256StarStar(seed)
    c, s, m, ks = DEMO_CHANNELS, DEMO_SIZE, DEMO_MID, DEMO_KSIZE
    x = FusionTensor(_demo_draw(rng, (c, s, s), 1.0))
    y = FusionTensor(_demo_draw(rng, (c, s, s), 1.0))

    bound_t = 1.0 / np.sqrt(2 * c * ks * ks)
    teacher1 = KernelSet(_demo_draw(rng, (m, 2 * c, ks, ks), bound_t))
    teacher2 = KernelSet(_demo_draw(rng, (c, m, ks, ks), bound_t))
    target = conv2d(fuse_concat(x, y, teacher1), teacher2)

    bound_1 = 1.0 / np.sqrt(c * ks * ks)
    k1_init = _demo_draw(rng, (m, c, ks, ks), bound_1)
    bound_2 = 1.0 / np.sqrt(m * ks * ks)
    k2_init = _demo_draw(rng, (c, m, ks, ks), bound_2)
    return x, y, target, k1_init, k2_init


def _init_weights(fusion: str, k1_init: np.ndarray, k2_init: np.ndarray) -> dict[str, KernelSet]:
    # Every mode starts as the same function: concat duplicates the add
    # bank and csc starts with a zero extra kernel, so initial losses
    # coincide and later differences are attributable to expressivity.
    if fusion == "add":
        first = {"k": KernelSet(k1_init.copy())}
    elif fusion == "concat":
        first = {"k2c": KernelSet(np.concatenate([k1_init, k1_init], axis=1))}
    else:
        first = {
            "k": KernelSet(k1_init.copy()),
            "k_hat": KernelSet(np.zeros_like(k1_init)),
        }
    first["k2"] = KernelSet(k2_init.copy())
    return first


def _fusion_bank(fusion: str, weights: dict[str, KernelSet]) -> KernelSet:
    if fusion == "add":
        return _stack_banks(weights["k"], weights["k"])
    if fusion == "concat":
        return weights["k2c"]
    return _stack_banks(
        weights["k"], KernelSet(weights["k"].weights + weights["k_hat"].weights)
    )


def evaluate_fusion_demo(seed: int, fusion: str, weights: dict[str, KernelSet]) -> float:
    """Loss of a fusion model's weights on the fixed seeded demo task."""
    if fusion not in FUSION_MODES:
        raise UsageError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
    x, y, target, _k1, _k2 = _demo_task(seed)
    u = _concat_tensors(x, y)
    z = conv2d(conv2d(u, _fusion_bank(fusion, weights)), weights["k2"])
    loss, _grad = l1_loss(z, target)
    return loss


def train_fusion_demo(seed: int, fusion: str, steps: int) -> TrainResult:
    """Gradient-descent a 2-layer fusion network on the fixed demo task.

    Plain descent with a fixed step size; the trace holds the loss at
    the initial weights and after every update (``steps + 1`` entries).
    Weights stay on the binary32 grid after each update (see
    :func:`_grid32`).  Deterministic for a fixed seed.
    """
    if fusion not in FUSION_MODES:
        raise UsageError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
    if steps < 0:
        raise UsageError(f"steps must be >= 0, got {steps}")
    x, y, target, k1_init, k2_init = _demo_task(seed)
    u = _concat_tensors(x, y)
    weights = _init_weights(fusion, k1_init, k2_init)
    c = DEMO_CHANNELS

    def forward_backward(w: dict[str, KernelSet]):
        bank = _fusion_bank(fusion, w)
        hidden = conv2d(u, bank)
        out = conv2d(hidden, w["k2"])
        loss, g_out = l1_loss(out, target)
        g_hidden, g_k2 = conv2d_backward(hidden, w["k2"], g_out)
        _g_u, g_bank = conv2d_backward(u, bank, g_hidden)
        gb = g_bank.weights
        if fusion == "add":
            grads = {"k": gb[:, :c] + gb[:, c:]}
        elif fusion == "concat":
            grads = {"k2c": gb}
        else:
            grads = {"k": gb[:, :c] + gb[:, c:], "k_hat": gb[:, c:]}
        grads["k2"] = g_k2.weights
        return loss, grads

    loss0, _ = forward_backward(weights)
    if not np.isfinite(loss0):
        raise InvariantViolation("training diverged at step 0: loss is not finite")
    trace = [loss0]
    for step in range(steps):
        _loss, grads = forward_backward(weights)
        weights = {
            name: KernelSet(_grid32(ks.weights - DEMO_LR * grads[name]))
            for name, ks in weights.items()
        }
        loss, _ = forward_backward(weights)
        if not np.isfinite(loss):
            raise InvariantViolation(
                f"training diverged at step {step + 1}: loss is not finite"
            )
        trace.append(loss)
    return TrainResult(fusion=fusion, trace=trace, weights=weights)


def gradient_check(seed: int, trials: int = 20) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Runs ``trials`` random small instances (channels ≤ 4, spatial ≤ 8)
    through conv2d_backward and the L1 subgradient, comparing each
    coordinate against a central finite difference with step 1e-5.
    Elements within 1e-4 of an L1 tie are skipped (the subgradient is
    discontinuous there).
    """
    rng = Xoshiro256StarStar(seed)
    step = 1e-5
    worst = 0.0

    def rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
        return float(np.max(np.abs(analytic - fd) / denom))

    for trial in range(trials):
        c = 1 + rng.randbelow(4)
        o = 1 + rng.randbelow(3)
        size = 3 + rng.randbelow(6)
        ks = rng.choice((1, 3))
        padding = rng.choice(("same", "valid"))

        def draw(shape):
            return np.array(
                [rng.uniform(-1.0, 1.0) for _ in range(int(np.prod(shape)))]
            ).reshape(shape)

        xd = draw((c, size, size))
        kd = draw((o, c, ks, ks))
        x = FusionTensor(xd)
        k = KernelSet(kd)
        out = conv2d(x, k, padding)
        up = FusionTensor(draw(out.data.shape))
        grad_x, grad_k = conv2d_backward(x, k, up, padding)

        def objective(xa, ka):
            o_ = conv2d(FusionTensor(xa), KernelSet(ka), padding)
            return float(np.sum(o_.data * up.data))

        fd_x = np.zeros_like(xd)
        it = np.nditer(xd, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            plus = xd.copy()
            minus = xd.copy()
            plus[idx] += step
            minus[idx] -= step
            fd_x[idx] = (objective(plus, kd) - objective(minus, kd)) / (2 * step)
        worst = max(worst, rel_err(grad_x.data, fd_x))

        fd_k = np.zeros_like(kd)
        it = np.nditer(kd, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            plus = kd.copy()
            minus = kd.copy()
            plus[idx] += step
            minus[idx] -= step
            fd_k[idx] = (objective(xd, plus) - objective(xd, minus)) / (2 * step)
        worst = max(worst, rel_err(grad_k.weights, fd_k))

        # L1 subgradient check, skipping near-tie coordinates.
        rd = draw((c, size, size))
        gd = draw((c, size, size))
        _loss, grad = l1_loss(FusionTensor(rd), FusionTensor(gd))
        mask = np.abs(rd - gd) > 1e-4
        fd_l = np.zeros_like(rd)
        it = np.nditer(rd, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            plus = rd.copy()
            minus = rd.copy()
            plus[idx] += step
            minus[idx] -= step
            lp, _ = l1_loss(FusionTensor(plus), FusionTensor(gd))
            lm, _ = l1_loss(FusionTensor(minus), FusionTensor(gd))
            fd_l[idx] = (lp - lm) / (2 * step)
        if mask.any():
            worst = max(worst, rel_err(grad.data[mask], fd_l[mask]))

    return worst
