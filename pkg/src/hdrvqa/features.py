"""Per-frame statistics and the 612-value per-video feature vector.

Layout (0-based, half-open):

    [  0,  36)  luma                      [288, 324)  luma, 5-frame std
    [ 36,  72)  nonlinear luma            [324, 360)  nonlinear luma, std
    [ 72, 180)  R'G'B'                    [360, 468)  R'G'B', std
    [180, 288)  nonlinear R'G'B'          [468, 576)  nonlinear R'G'B', std
    [576, 612)  space-time gradient chips
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .chips import ChipAccumulator, ChipConfig
from .errors import DataError, DegenerateFitError, LayoutMismatchError
from .expansive import NonlinearityConfig, hdr_sensitize
from . import _kernels
from .mscn import C_LINEAR, C_NONLINEAR, downscale2, mscn
from .nss import aggd_from_moments, ggd_from_moments
from .video_io import FramePlane, VideoSource, iter_frames, upsample_chroma, ycbcr_to_rgb

logger = logging.getLogger(__name__)

LAYOUT_VERSION = "hdrvqa-612-v1"
N_FRAME_FEATURES = 288
N_FEATURES = 612
STD_WINDOW = 5
# MSCN fields are unit-scale; an RMS below this is rounding residue of a flat plane
MIN_FIELD_RMS = 1e-9

BLOCKS = {
    "luma": (0, 36),
    "luma_nl": (36, 72),
    "rgb": (72, 180),
    "rgb_nl": (180, 288),
    "luma_std": (288, 324),
    "luma_nl_std": (324, 360),
    "rgb_std": (360, 468),
    "rgb_nl_std": (468, 576),
    "chips": (576, 612),
}

_SCALE_NAMES = (
    ["ggd.alpha", "ggd.sigma2"]
    + [f"{p}.{q}" for p in ("h", "v", "d1", "d2") for q in ("nu", "eta", "sigma_l2", "sigma_r2")]
)
CHANNEL36_NAMES = [f"s{s}.{n}" for s in (0, 1) for n in _SCALE_NAMES]


def _build_names() -> list[str]:
    names = []
    for prefix in ("luma", "luma_nl"):
        names += [f"{prefix}.{n}" for n in CHANNEL36_NAMES]
    for prefix in ("rgb", "rgb_nl"):
        names += [f"{prefix}.{c}.{n}" for c in ("r", "g", "b") for n in CHANNEL36_NAMES]
    names += [f"{n}.std5" for n in names[:N_FRAME_FEATURES]]
    names += [f"chips.{n}" for n in CHANNEL36_NAMES]
    return names


FEATURE_NAMES = _build_names()
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def _check_layout():
    assert len(FEATURE_NAMES) == N_FEATURES == len(FEATURE_INDEX)
    pos = 0
    for name, (lo, hi) in BLOCKS.items():
        assert lo == pos, name
        pos = hi
        prefix = name.removesuffix("_std")
        first = FEATURE_NAMES[lo]
        assert first.startswith(prefix + "."), (name, first)
        assert first.endswith(".std5") == name.endswith("_std"), name
    assert pos == N_FEATURES


_check_layout()


@dataclass(frozen=True)
class ExtractionConfig:
    gamut: str = "bt2020"
    nl: NonlinearityConfig = NonlinearityConfig()
    chips: ChipConfig = ChipConfig()
    c_linear: float = C_LINEAR
    c_nonlinear: float = C_NONLINEAR


@dataclass
class FrameFeatures:
    values: np.ndarray
    frame_index: int


@dataclass
class FeatureVector:
    values: np.ndarray
    video_id: str
    layout_version: str = LAYOUT_VERSION
    diagnostics: list = field(default_factory=list, repr=False)

    def block(self, name: str) -> np.ndarray:
        lo, hi = BLOCKS[name]
        return self.values[lo:hi]


def _note(diagnostics, msg):
    logger.warning(msg)
    if diagnostics is not None:
        diagnostics.append(msg)


def scale_features18(field_data: np.ndarray, diagnostics=None, label="") -> np.ndarray:
    """GGD of the field and AGGD of its 4 neighbour products, via one fused pass."""
    mom = _kernels.nss_moments(np.ascontiguousarray(field_data, dtype=np.float64))
    out = np.zeros(18)
    if not (mom[0, 0] > 0 and np.sqrt(mom[0, 2] / mom[0, 0]) > MIN_FIELD_RMS):
        _note(diagnostics, f"{label} field is flat; 18 values zero-filled")
        return out
    try:
        out[0:2] = ggd_from_moments(*mom[0, :3]).as_features()
    except DegenerateFitError as exc:
        _note(diagnostics, f"{label} GGD zero-filled: {exc}")
    for j in range(4):
        try:
            out[2 + 4 * j:6 + 4 * j] = aggd_from_moments(*mom[j + 1]).as_features()
        except DegenerateFitError as exc:
            _note(diagnostics, f"{label} AGGD {j} zero-filled: {exc}")
    return out


def channel_features36(plane: FramePlane, c: float, diagnostics=None) -> np.ndarray:
    """GGD + 4 AGGD fits on MSCN coefficients, at full and half scale."""
    if plane.scale_level != 0:
        raise ValueError("channel_features36 expects a full-resolution plane")
    label = plane.channel + (" (nl)" if plane.nonlinear else "")
    full = scale_features18(mscn(plane, c).data, diagnostics, label + " s0")
    half = scale_features18(mscn(downscale2(plane), c).data, diagnostics, label + " s1")
    return np.concatenate([full, half])


def frame_channels(y: FramePlane, cb: FramePlane, cr: FramePlane, gamut="bt2020"):
    """Luma plus full-resolution R'G'B' planes of one frame."""
    shape = y.data.shape
    if cb.data.shape != shape:
        cb = upsample_chroma(cb, shape)
        cr = upsample_chroma(cr, shape)
    return y, ycbcr_to_rgb(y, cb, cr, gamut)


def linear_block(y, rgb, cfg: ExtractionConfig, diagnostics=None) -> np.ndarray:
    """144 values: luma 36 followed by R', G', B' 36 each."""
    parts = [channel_features36(y, cfg.c_linear, diagnostics)]
    parts += [channel_features36(p, cfg.c_linear, diagnostics) for p in rgb]
    return np.concatenate(parts)


def nonlinear_block(y, rgb, cfg: ExtractionConfig, diagnostics=None) -> np.ndarray:
    """144 values from the sensitized luma and R', G', B' planes."""
    parts = [channel_features36(hdr_sensitize(y, cfg.nl), cfg.c_nonlinear, diagnostics)]
    parts += [channel_features36(hdr_sensitize(p, cfg.nl), cfg.c_nonlinear, diagnostics) for p in rgb]
    return np.concatenate(parts)


def assemble_frame(linear: np.ndarray, nonlinear: np.ndarray) -> np.ndarray:
    """Interleave the two 144-blocks into the 288 per-frame order."""
    return np.concatenate([linear[:36], nonlinear[:36], linear[36:], nonlinear[36:]])


def frame_features(y, cb, cr, cfg: ExtractionConfig = ExtractionConfig(), frame_index=0,
                   diagnostics=None) -> FrameFeatures:
    y, rgb = frame_channels(y, cb, cr, cfg.gamut)
    values = assemble_frame(
        linear_block(y, rgb, cfg, diagnostics),
        nonlinear_block(y, rgb, cfg, diagnostics),
    )
    return FrameFeatures(values, frame_index)


def temporal_std(frame_matrix: np.ndarray, window=STD_WINDOW, diagnostics=None) -> np.ndarray:
    """Mean over non-overlapping windows of the per-window population std."""
    m = np.asarray(frame_matrix, dtype=np.float64)
    n = m.shape[0] // window
    if n == 0:
        _note(diagnostics, f"fewer than {window} frames; temporal std block zero-filled")
        return np.zeros(m.shape[1])
    windows = m[:n * window].reshape(n, window, m.shape[1])
    # shifting by the first frame leaves the std unchanged and makes repeats exactly 0
    windows = windows - windows[:, :1]
    return windows.std(axis=1).mean(axis=0)


def pool_video(frame_feature_sequence, chip36, video_id="", diagnostics=None) -> FeatureVector:
    rows = [f.values if isinstance(f, FrameFeatures) else f for f in frame_feature_sequence]
    m = np.asarray(rows, dtype=np.float64).reshape(-1, N_FRAME_FEATURES)
    if m.shape[0] == 0:
        raise DataError("no frames to pool")
    diagnostics = [] if diagnostics is None else diagnostics
    values = np.concatenate([
        m.mean(axis=0),
        temporal_std(m, diagnostics=diagnostics),
        np.asarray(chip36, dtype=np.float64),
    ])
    if values.shape != (N_FEATURES,):
        raise LayoutMismatchError(f"pooled vector has {values.size} values, expected {N_FEATURES}")
    return FeatureVector(values, video_id, LAYOUT_VERSION, diagnostics)


def extract_blocks(src: VideoSource, cfg: ExtractionConfig = ExtractionConfig(),
                   blocks=("linear", "nonlinear", "chips"), max_frames=None, diagnostics=None) -> dict:
    """Per-frame linear/nonlinear matrices and the pooled chip block.

    Only the requested blocks are computed, so callers can reuse cached ones.
    """
    want = set(blocks)
    out = {"linear": [], "nonlinear": []}
    acc = ChipAccumulator(cfg.chips) if "chips" in want else None
    for frame in iter_frames(src, 0, max_frames):
        if want & {"linear", "nonlinear"}:
            y, rgb = frame_channels(frame.y, frame.cb, frame.cr, cfg.gamut)
            if "linear" in want:
                out["linear"].append(linear_block(y, rgb, cfg, diagnostics))
            if "nonlinear" in want:
                out["nonlinear"].append(nonlinear_block(y, rgb, cfg, diagnostics))
        if acc is not None:
            acc.push(frame.y)
    result = {k: np.asarray(v).reshape(-1, 144) for k, v in out.items() if k in want}
    if acc is not None:
        result["chips"] = acc.features()
        if diagnostics is not None:
            diagnostics.extend(acc.diagnostics)
    return result


def assemble_video(blocks: dict, video_id="", diagnostics=None) -> FeatureVector:
    lin, nl = blocks["linear"], blocks["nonlinear"]
    frames = [assemble_frame(a, b) for a, b in zip(lin, nl)]
    return pool_video(frames, blocks["chips"], video_id, diagnostics)


def extract_video(src: VideoSource, cfg: ExtractionConfig = ExtractionConfig(), video_id=None,
                  max_frames=None) -> FeatureVector:
    diagnostics = []
    if video_id is None:
        video_id = os.path.splitext(os.path.basename(src.path))[0]
    blocks = extract_blocks(src, cfg, max_frames=max_frames, diagnostics=diagnostics)
    return assemble_video(blocks, video_id, diagnostics)


def write_features_csv(path, vectors) -> None:
    """One row per video; floats use repr() so they round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "layout_version"] + [f"f{i + 1}" for i in range(N_FEATURES)])
        for v in vectors:
            if v.values.shape != (N_FEATURES,):
                raise LayoutMismatchError(f"{v.video_id}: {v.values.size} features")
            w.writerow([v.video_id, v.layout_version] + [repr(float(x)) for x in v.values])


def read_features_csv(path) -> tuple[list[str], np.ndarray, str]:
    """Return (video_ids, matrix, layout_version)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty feature file")
    header = rows[0]
    if header[:2] != ["video_id", "layout_version"]:
        raise DataError(f"{path}: unexpected header {header[:2]}")
    n = len(header) - 2
    ids, mat, versions = [], [], set()
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != n + 2:
            raise DataError(f"{path}:{lineno}: expected {n + 2} fields, got {len(row)}")
        ids.append(row[0])
        versions.add(row[1])
        try:
            mat.append([float(x) for x in row[2:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if len(versions) > 1:
        raise LayoutMismatchError(f"{path}: mixed layout versions {sorted(versions)}")
    version = versions.pop() if versions else LAYOUT_VERSION
    return ids, np.asarray(mat, dtype=np.float64).reshape(len(ids), n), version
