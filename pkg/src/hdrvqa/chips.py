"""Space-time gradient chips.

Per frame, the Sobel gradient magnitude of luma is MSCN-normalized and
filtered along time with a zero-DC FIR.  Groups of ``T`` filtered fields
form a volume; every non-overlapping ``size x size`` block of the volume is
swept along a set of candidate space-time directions and the direction
whose chip is closest to Gaussian (smallest |excess kurtosis|) is kept.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateFitError
from .mscn import C_LINEAR, downscale2, mscn
from .nss import fit_aggd, fit_ggd
from .video_io import FramePlane

logger = logging.getLogger(__name__)

DEFAULT_TAPS = (-1.0, -2.0, 0.0, 2.0, 1.0)
N_CHIP_FEATURES = 36
# chips are built from unit-scale MSCN fields; below this RMS only rounding residue is left
MIN_CHIP_RMS = 1e-9


def normalize_taps(taps) -> np.ndarray:
    t = np.asarray(taps, dtype=np.float64)
    norm = np.sqrt(np.sum(t * t))
    if norm == 0:
        raise ValueError("temporal taps are all zero")
    return t / norm


@dataclass(frozen=True)
class ChipConfig:
    T: int = 5
    size: int = 5
    angles: int = 6
    taps: tuple = DEFAULT_TAPS  # normalized to unit L2 norm on use
    criterion: str = "abs"  # "abs": min |excess kurtosis|; "signed": min excess kurtosis
    c: float = C_LINEAR

    def __post_init__(self):
        if self.T < 2 or self.size < 2 or self.angles < 1:
            raise ValueError("chip T, size and angles must be positive (T, size >= 2)")
        if self.criterion not in ("abs", "signed"):
            raise ValueError(f"unknown kurtosis criterion {self.criterion!r}")
        taps = np.asarray(self.taps, dtype=np.float64)
        if abs(taps.sum()) > 1e-9 * np.abs(taps).sum():
            raise ValueError("temporal taps must sum to zero")

    @property
    def unit_taps(self) -> np.ndarray:
        return normalize_taps(self.taps)


@dataclass
class ChipSampleSet:
    samples: np.ndarray  # (n_blocks, T, size, size)
    chosen_angle: float
    excess_kurtosis: float
    block_angles: np.ndarray = field(repr=False)  # per-block index into the angle list


def gradient_magnitude(plane) -> np.ndarray:
    v = np.asarray(plane.data if isinstance(plane, FramePlane) else plane, dtype=np.float64)
    if v.shape[0] < 3 or v.shape[1] < 3:
        raise ValueError("gradient needs at least a 3x3 plane")
    gx = ndimage.sobel(v, axis=1, mode="reflect")
    gy = ndimage.sobel(v, axis=0, mode="reflect")
    return np.hypot(gx, gy)


def _check_taps(taps) -> np.ndarray:
    taps = np.asarray(taps, dtype=np.float64)
    if abs(taps.sum()) > 1e-9 * max(np.abs(taps).sum(), 1.0):
        raise ValueError("temporal taps must sum to zero")
    return taps


def _fir(stack, taps: np.ndarray) -> np.ndarray:
    # newest frame last: out = sum_k taps[k] * x[K-1-k]
    k = len(taps)
    out = taps[0] * stack[k - 1]
    for i in range(1, k):
        out = out + taps[i] * stack[k - 1 - i]
    return out


def temporal_filter(fields, taps=None) -> np.ndarray:
    """Per-pixel FIR along time ('valid' convolution).

    Output ``t`` is aligned with input frame ``t + len(taps) // 2``.
    """
    taps = _check_taps(normalize_taps(DEFAULT_TAPS) if taps is None else taps)
    vol = np.asarray(fields, dtype=np.float64)
    k = len(taps)
    if vol.shape[0] < k:
        raise ValueError(f"need at least {k} frames, got {vol.shape[0]}")
    return np.stack([_fir(vol[t:t + k], taps) for t in range(vol.shape[0] - k + 1)])


def candidate_angles(n: int) -> np.ndarray:
    return np.pi * np.arange(n) / n


def displacement(angle: float, d: int) -> tuple[int, int]:
    """Nearest-pixel (dy, dx) after moving ``d`` pixels along (cos, sin)."""
    return (
        int(np.floor(d * np.sin(angle) + 0.5)),
        int(np.floor(d * np.cos(angle) + 0.5)),
    )


def block_grid(shape, T: int, size: int) -> tuple[int, int, int]:
    """(margin, blocks_y, blocks_x) of blocks that stay in frame for every angle."""
    m = T // 2
    h, w = shape
    nby = (h - 2 * m) // size
    nbx = (w - 2 * m) // size
    return m, nby, nbx


def gather_chips(volume: np.ndarray, angle: float, size: int) -> np.ndarray:
    """Chips of every grid block along ``angle``: shape (nby, nbx, T, size, size)."""
    T, h, w = volume.shape
    m, nby, nbx = block_grid((h, w), T, size)
    if nby < 1 or nbx < 1:
        raise ValueError(f"volume {h}x{w} smaller than the chip footprint")
    slices = []
    for t in range(T):
        dy, dx = displacement(angle, t - T // 2)
        view = volume[t, m + dy:m + dy + nby * size, m + dx:m + dx + nbx * size]
        slices.append(view.reshape(nby, size, nbx, size).transpose(0, 2, 1, 3))
    return np.stack(slices, axis=2)


def excess_kurtosis(x, axis=None):
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean(axis=axis, keepdims=True)
    d2 = d * d
    m2 = d2.mean(axis=axis)
    m4 = (d2 * d2).mean(axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return m4 / (m2 * m2) - 3.0


def angle_kurtosis(volume, angles=None, size=5) -> np.ndarray:
    """Excess kurtosis of all chips pooled per candidate angle (diagnostic)."""
    volume = np.asarray(volume, dtype=np.float64)
    angles = candidate_angles(6) if angles is None else np.asarray(angles)
    return np.array([excess_kurtosis(gather_chips(volume, a, size)) for a in angles])


def extract_chips(volume, angles=None, chip_size=5, criterion="abs") -> ChipSampleSet:
    """Select, per block, the direction whose chip is closest to Gaussian."""
    volume = np.asarray(volume, dtype=np.float64)
    angles = candidate_angles(6) if angles is None else np.asarray(angles, dtype=np.float64)
    T = volume.shape[0]
    best = best_score = choice = None
    for i, angle in enumerate(angles):
        chips = gather_chips(volume, angle, chip_size)
        flat = chips.reshape(-1, T * chip_size * chip_size)
        k = excess_kurtosis(flat, axis=1)
        score = np.abs(k) if criterion == "abs" else k
        score = np.where(np.isfinite(score), score, np.inf)
        if best is None:
            best, best_score = flat.copy(), score
            choice = np.zeros(len(score), dtype=np.intp)
        else:
            better = score < best_score
            best[better] = flat[better]
            best_score = np.where(better, score, best_score)
            choice[better] = i
    modal = int(np.argmax(np.bincount(choice, minlength=len(angles))))
    samples = best.reshape(-1, T, chip_size, chip_size)
    return ChipSampleSet(samples, float(angles[modal]), float(excess_kurtosis(samples)), choice)


def chip_products(samples: np.ndarray):
    """Neighbour products inside each chip slice (H, V, main and anti diagonal)."""
    s = samples
    return (
        s[..., :, :-1] * s[..., :, 1:],
        s[..., :-1, :] * s[..., 1:, :],
        s[..., :-1, :-1] * s[..., 1:, 1:],
        s[..., :-1, 1:] * s[..., 1:, :-1],
    )


def chip_scale_features(chipset: ChipSampleSet, diagnostics=None) -> np.ndarray:
    """18 values: GGD (alpha, sigma2) + AGGD (nu, eta, sl2, sr2) x 4 products."""
    out = np.zeros(18)
    if not np.sqrt(np.mean(chipset.samples ** 2)) > MIN_CHIP_RMS:
        _note(diagnostics, "chip volume has no temporal energy; zero-filled")
        return out
    try:
        out[0:2] = fit_ggd(chipset.samples).as_features()
    except DegenerateFitError as exc:
        _note(diagnostics, f"chip GGD zero-filled: {exc}")
    for j, prod in enumerate(chip_products(chipset.samples)):
        try:
            out[2 + 4 * j:6 + 4 * j] = fit_aggd(prod).as_features()
        except DegenerateFitError as exc:
            _note(diagnostics, f"chip AGGD {j} zero-filled: {exc}")
    return out


def chip_features(chips_full: ChipSampleSet, chips_half: ChipSampleSet, diagnostics=None) -> np.ndarray:
    return np.concatenate([
        chip_scale_features(chips_full, diagnostics),
        chip_scale_features(chips_half, diagnostics),
    ])


def _note(diagnostics, msg):
    logger.warning(msg)
    if diagnostics is not None:
        diagnostics.append(msg)


class ChipAccumulator:
    """Streams luma frames and averages chip features over all volumes.

    Needs ``len(taps) + T - 1`` frames for the first volume; volumes do
    not overlap.
    """

    def __init__(self, cfg: ChipConfig = ChipConfig()):
        self.cfg = cfg
        self.taps = cfg.unit_taps
        self.angles = candidate_angles(cfg.angles)
        self._mscn = [deque(maxlen=len(self.taps)) for _ in range(2)]
        self._filtered = [[], []]
        self._volume_features = []
        self.diagnostics = []

    def push(self, luma: FramePlane) -> None:
        planes = (luma, downscale2(luma) if luma.scale_level == 0 else luma)
        for s, plane in enumerate(planes):
            grad = gradient_magnitude(plane)
            buf = self._mscn[s]
            buf.append(mscn(grad, self.cfg.c).data)
            if len(buf) == buf.maxlen:
                self._filtered[s].append(_fir(buf, self.taps))
        if len(self._filtered[0]) == self.cfg.T:
            self._close_volume()

    def _close_volume(self):
        sets = []
        for s in range(2):
            vol = np.stack(self._filtered[s])
            self._filtered[s] = []
            try:
                sets.append(extract_chips(vol, self.angles, self.cfg.size, self.cfg.criterion))
            except ValueError as exc:
                sets.append(None)
                _note(self.diagnostics, f"chip volume at scale {s} skipped: {exc}")
        feats = np.zeros(N_CHIP_FEATURES)
        for s, cs in enumerate(sets):
            if cs is not None:
                feats[18 * s:18 * (s + 1)] = chip_scale_features(cs, self.diagnostics)
        self._volume_features.append(feats)

    @property
    def n_volumes(self) -> int:
        return len(self._volume_features)

    def features(self) -> np.ndarray:
        if not self._volume_features:
            _note(self.diagnostics, "too few frames for a chip volume; chip block zero-filled")
            return np.zeros(N_CHIP_FEATURES)
        return np.mean(self._volume_features, axis=0)
