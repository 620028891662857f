"""Scattering-model haze synthesis and its exact inversion.

The forward model composes a hazy observation from a clear scene, a
transmission map, and a global atmospheric light:

    I = J * t + A * (1 - t),      t = exp(-beta * d)

Depth-agnostic synthesis uses the same composition with a transmission
map built from a depth field that belongs to a *different* scene, which
breaks the correlation between haze density (1 - t) and the scene's own
depth.  :func:`invert_haze` is the algebraic inverse and serves as a
validation oracle for round-trip tests.

All arithmetic runs in float64 by default; pass ``dtype=np.float32``
for the throughput-oriented 32-bit path (round trips then hold to a
looser 1e-5 instead of 1e-10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, UsageError
from .imaging import DepthMap, Image
from .rng import Xoshiro256StarStar

# Transmission is clamped below at this value to keep the inversion
# J = (I - A*(1-t)) / t numerically stable in dense haze.
T_MIN = 0.01

# Conventional outdoor-style parameter grids, user-configurable
# everywhere they are consumed.
DEFAULT_A_SET = (0.8, 0.85, 0.9, 0.95, 1.0)
DEFAULT_BETA_SET = (0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2)


@dataclass(frozen=True)
class HazeParams:
    """One synthesis' scalar parameters.

    ``A`` is the global atmospheric light in [0, 1], applied equally to
    all three channels.  ``beta`` is the scattering coefficient per
    unit depth; zero is admitted so the identity case t = 1 can be
    expressed directly.
    """

    A: float
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.A) or not 0.0 <= self.A <= 1.0:
            raise InvariantViolation(f"A must be finite in [0, 1], got {self.A}")
        if not np.isfinite(self.beta) or self.beta < 0.0:
            raise InvariantViolation(
                f"beta must be finite and non-negative, got {self.beta}"
            )


@dataclass(frozen=True)
class TransmissionMap:
    """An H×W field of per-pixel transmission values in (0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise InvariantViolation(
                f"transmission data must have shape (height, width), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("transmission values must be finite")
        if arr.size and (float(arr.min()) <= 0.0 or float(arr.max()) > 1.0):
            raise InvariantViolation("transmission values must lie in (0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def transmission(dm: DepthMap, beta: float, dtype=np.float64) -> TransmissionMap:
    """Compute t = exp(-beta * d), clamped to [T_MIN, 1].

    ``beta = 0`` is allowed and yields t = 1 everywhere (the identity
    composition).  Strictly decreasing in both beta and depth wherever
    the clamp is inactive.
    """
    if not np.isfinite(beta):
        raise UsageError(f"beta must be finite, got {beta}")
    if beta < 0.0:
        raise UsageError(f"beta must be non-negative, got {beta}")
    d = dm.data.astype(dtype)
    t = np.exp(-dtype(beta) * d)
    t = np.clip(t, dtype(T_MIN), dtype(1.0))
    return TransmissionMap(t.astype(np.float64))


def compose_haze(J: Image, t: TransmissionMap, A: float, dtype=np.float64) -> Image:
    """Compose the hazy observation I = J*t + A*(1-t).

    Per pixel the output is a convex combination of the scene radiance
    and the atmospheric light, so it stays between J and A and hence in
    [0, 1].
    """
    if (J.height, J.width) != (t.height, t.width):
        raise UsageError(
            f"dimension mismatch: image {J.height}x{J.width} vs "
            f"transmission {t.height}x{t.width}"
        )
    if not np.isfinite(A) or not 0.0 <= A <= 1.0:
        raise UsageError(f"A must be finite in [0, 1], got {A}")
    j = J.data.astype(dtype)
    tt = t.data.astype(dtype)[..., None]
    hazy = j * tt + dtype(A) * (dtype(1.0) - tt)
    return Image(np.clip(hazy.astype(np.float64), 0.0, 1.0))


def invert_haze(I: Image, t: TransmissionMap, A: float, dtype=np.float64) -> Image:
    """Recover the clear scene J = (I - A*(1-t)) / t, clamped to [0, 1].

    Exact inverse of :func:`compose_haze` up to floating-point rounding;
    the T_MIN clamp on transmission bounds the amplification of that
    rounding by 1/T_MIN.
    """
    if (I.height, I.width) != (t.height, t.width):
        raise UsageError(
            f"dimension mismatch: image {I.height}x{I.width} vs "
            f"transmission {t.height}x{t.width}"
        )
    if not np.isfinite(A) or not 0.0 <= A <= 1.0:
        raise UsageError(f"A must be finite in [0, 1], got {A}")
    i = I.data.astype(dtype)
    tt = t.data.astype(dtype)[..., None]
    clear = (i - dtype(A) * (dtype(1.0) - tt)) / tt
    return Image(np.clip(clear.astype(np.float64), 0.0, 1.0))


def sample_params(
    rng: Xoshiro256StarStar,
    a_set=DEFAULT_A_SET,
    beta_set=DEFAULT_BETA_SET,
) -> HazeParams:
    """Draw (A, beta) uniformly from the configured value sets.

    Consumes exactly two draws from ``rng`` (A first, then beta), so
    parameter sequences are reproducible from the generator seed alone.
    """
    if len(a_set) == 0 or len(beta_set) == 0:
        raise UsageError("parameter sets must be non-empty")
    a = float(rng.choice(a_set))
    beta = float(rng.choice(beta_set))
    return HazeParams(A=a, beta=beta)


def haze_density_map(t: TransmissionMap) -> np.ndarray:
    """Per-pixel haze density 1 - t, in [0, 1 - T_MIN].

    This is the quantity whose correlation with true scene depth is
    broken by depth-agnostic synthesis: with an aligned depth map,
    1 - exp(-beta*d) is monotone in d; with a shuffled one it is
    statistically unrelated.
    """
    return 1.0 - t.data
