"""Mean-subtracted contrast-normalized (MSCN) coefficients and helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .video_io import FramePlane

# Stabilizers on the normalized [0, 1] scale.
C_LINEAR = 4.0 / 1023.0
C_NONLINEAR = 1e-3

WINDOW_HALF_WIDTH = 3
WINDOW_SIGMA = 7.0 / 6.0


def gaussian_window(half_width=WINDOW_HALF_WIDTH, sigma=WINDOW_SIGMA) -> np.ndarray:
    """1-D unit-sum Gaussian; the 2-D window is its outer product."""
    x = np.arange(-half_width, half_width + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


_W1 = gaussian_window()
WINDOW_2D = np.outer(_W1, _W1)


@dataclass
class MscnField:
    data: np.ndarray
    source_channel: str
    stabilizer_c: float
    scale_level: int = 0


class PairedProducts(NamedTuple):
    horizontal: np.ndarray
    vertical: np.ndarray
    diag_main: np.ndarray
    diag_anti: np.ndarray


def _data(plane) -> np.ndarray:
    data = plane.data if isinstance(plane, (FramePlane, MscnField)) else plane
    return np.ascontiguousarray(data, dtype=np.float64)


def smooth(data: np.ndarray) -> np.ndarray:
    """Separable 7x7 Gaussian smoothing with symmetric borders."""
    return _kernels.smooth(np.ascontiguousarray(data, dtype=np.float64), _W1)


def local_stats(plane) -> tuple[np.ndarray, np.ndarray]:
    """Local Gaussian-weighted mean and standard deviation."""
    v = _data(plane)
    if v.size == 0:
        raise ValueError("empty plane")
    mu, var = _kernels.smooth_moments(v, _W1)
    var -= mu * mu
    np.abs(var, out=var)
    return mu, np.sqrt(var, out=var)


def mscn(plane, c: float) -> MscnField:
    """(V - mu) / (sigma + c), elementwise."""
    if not c > 0:
        raise ValueError(f"stabilizer c must be positive, got {c}")
    v = _data(plane)
    if v.size == 0:
        raise ValueError("empty plane")
    mu, m2 = _kernels.smooth_moments(v, _W1)
    out = _kernels.mscn_from_moments(v, mu, m2, float(c))
    channel = getattr(plane, "channel", "?")
    level = getattr(plane, "scale_level", 0)
    return MscnField(out, channel, float(c), level)


def paired_products(field) -> PairedProducts:
    f = _data(field)
    if f.ndim != 2 or f.shape[0] < 2 or f.shape[1] < 2:
        raise ValueError("paired products need a field of at least 2x2")
    return PairedProducts(
        horizontal=f[:, :-1] * f[:, 1:],
        vertical=f[:-1, :] * f[1:, :],
        diag_main=f[:-1, :-1] * f[1:, 1:],
        diag_anti=f[:-1, 1:] * f[1:, :-1],
    )


def downscale2(plane: FramePlane) -> FramePlane:
    """Gaussian smoothing followed by 2x decimation (keeps even indices)."""
    if plane.scale_level != 0:
        raise ValueError("downscale2 expects a full-resolution plane")
    out = smooth(_data(plane))[::2, ::2]
    return FramePlane(np.ascontiguousarray(out), plane.channel, 1, plane.nonlinear)
