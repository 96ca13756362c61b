"""Local [-1, 1] mapping followed by the expansive point nonlinearity.

The nonlinear path stretches the extremes of each local luma/color range
and compresses mid-tones, so features computed afterwards are dominated by
the brightest and darkest local detail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .video_io import FramePlane

GLOBAL = "global"


@dataclass(frozen=True)
class NonlinearityConfig:
    delta: float = 4.0
    window: int | str = 17  # odd W, or "global" for whole-frame min/max

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.window != GLOBAL:
            w = int(self.window)
            if w < 3 or w % 2 == 0:
                raise ValueError(f"window must be odd and >= 3, got {self.window}")
            object.__setattr__(self, "window", w)


def window_extrema(data: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Running W x W min and max with symmetric borders.

    Separable van Herk / Gil-Werman passes: about three comparisons per
    pixel and pass, whatever the window size.
    """
    return _kernels.window_minmax(np.ascontiguousarray(data, dtype=np.float64), int(window))


def window_extrema_naive(data: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel scan of the reflected W x W window; O(N W^2) reference."""
    r = window // 2
    padded = np.pad(data, r, mode="symmetric")
    h, w = data.shape
    lo = np.empty_like(data, dtype=np.float64)
    hi = np.empty_like(data, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            win = padded[i:i + window, j:j + window]
            lo[i, j] = win.min()
            hi[i, j] = win.max()
    return lo, hi


def local_unit_map(plane, window) -> np.ndarray:
    """Map every sample linearly to [-1, 1] using its window's min and max."""
    v = np.asarray(plane.data if isinstance(plane, FramePlane) else plane, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty plane")
    if window == GLOBAL:
        lo = np.full_like(v, v.min())
        hi = np.full_like(v, v.max())
    else:
        window = int(window)
        if window < 3 or window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {window}")
        lo, hi = window_extrema(v, window)
    span = hi - lo
    flat = span == 0
    span[flat] = 1.0
    out = v - lo
    out /= span
    out *= 2.0
    out -= 1.0
    out[flat] = 0.0
    return out


def expansive_nonlinearity(mapped, delta: float) -> np.ndarray:
    """exp(d x) - 1 for x > 0 and 1 - exp(-d x) for x < 0 (odd by construction)."""
    x = np.asarray(mapped, dtype=np.float64)
    return np.sign(x) * np.expm1(delta * np.abs(x))


def hdr_sensitize(plane: FramePlane, cfg: NonlinearityConfig = NonlinearityConfig()) -> FramePlane:
    mapped = local_unit_map(plane, cfg.window)
    return FramePlane(
        expansive_nonlinearity(mapped, cfg.delta),
        plane.channel,
        plane.scale_level,
        nonlinear=True,
    )
