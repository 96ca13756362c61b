"""Block-level feature cache and nonlinearity parameter sweeps.

Each video's three blocks (linear per-frame, nonlinear per-frame, chips)
are cached under a key built from the file's SHA-256 and only the knobs
that influence that block, so changing ``nl.delta`` or ``nl.window``
re-extracts just the nonlinear block.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .evaluation import run_protocol
from .expansive import NonlinearityConfig
from .features import ExtractionConfig, FeatureVector, assemble_video, extract_blocks
from .regression import DEFAULT_C_GRID, DEFAULT_EPSILON
from .video_io import VideoSource

logger = logging.getLogger(__name__)

BLOCK_NAMES = ("linear", "nonlinear", "chips")


def file_sha256(path, chunk=1 << 22) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for buf in iter(lambda: fh.read(chunk), b""):
            h.update(buf)
    return h.hexdigest()


def block_knobs(block: str, src: VideoSource, cfg: ExtractionConfig, max_frames=None) -> dict:
    """The knob subset that determines one cached block."""
    base = {"bit_depth": src.bit_depth, "range": src.range, "layout": src.layout,
            "width": src.width, "height": src.height, "max_frames": max_frames}
    if block == "linear":
        return {**base, "gamut": cfg.gamut, "c": cfg.c_linear}
    if block == "nonlinear":
        return {**base, "gamut": cfg.gamut, "c": cfg.c_nonlinear,
                "delta": cfg.nl.delta, "window": cfg.nl.window}
    if block == "chips":
        ch = cfg.chips
        return {**base, "T": ch.T, "size": ch.size, "angles": ch.angles,
                "taps": [float(t) for t in ch.taps], "criterion": ch.criterion, "c": ch.c}
    raise KeyError(block)


class FeatureCache:
    def __init__(self, root):
        self.root = os.fspath(root)
        os.makedirs(self.root, exist_ok=True)
        self._hashes = {}
        self.hits = 0
        self.misses = 0

    def _file_hash(self, path) -> str:
        st = os.stat(path)
        key = (os.path.abspath(path), st.st_size, st.st_mtime_ns)
        if key not in self._hashes:
            self._hashes[key] = file_sha256(path)
        return self._hashes[key]

    def key(self, block, src, cfg, max_frames=None) -> str:
        payload = {"block": block, "file": self._file_hash(src.path),
                   "knobs": block_knobs(block, src, cfg, max_frames)}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def _path(self, key) -> str:
        return os.path.join(self.root, key + ".npy")

    def get(self, key):
        p = self._path(key)
        if os.path.exists(p):
            self.hits += 1
            return np.load(p)
        self.misses += 1
        return None

    def put(self, key, array) -> None:
        tmp = self._path(key) + ".tmp.npy"
        np.save(tmp, np.asarray(array, dtype=np.float64))
        os.replace(tmp, self._path(key))

    def extract(self, src: VideoSource, cfg: ExtractionConfig, video_id=None, max_frames=None) -> FeatureVector:
        """Feature vector of ``src``, computing only the blocks not already cached."""
        if video_id is None:
            video_id = os.path.splitext(os.path.basename(src.path))[0]
        keys = {b: self.key(b, src, cfg, max_frames) for b in BLOCK_NAMES}
        blocks = {b: self.get(k) for b, k in keys.items()}
        missing = [b for b, v in blocks.items() if v is None]
        diagnostics = []
        if missing:
            fresh = extract_blocks(src, cfg, missing, max_frames, diagnostics)
            for b in missing:
                self.put(keys[b], fresh[b])
                blocks[b] = fresh[b]
        return assemble_video(blocks, video_id, diagnostics)


@dataclass
class SweepRow:
    param: str
    value: object
    median_srocc: float
    median_lcc: float
    median_rmse: float
    std_srocc: float


def with_nl(cfg: ExtractionConfig, param: str, value) -> ExtractionConfig:
    if param == "delta":
        nl = NonlinearityConfig(float(value), cfg.nl.window)
    elif param == "window":
        nl = NonlinearityConfig(cfg.nl.delta, value)
    else:
        raise ValueError(f"sweep parameter must be 'delta' or 'window', got {param!r}")
    return ExtractionConfig(cfg.gamut, nl, cfg.chips, cfg.c_linear, cfg.c_nonlinear)


def sweep(param, values, sources, video_ids, mos, content_ids, cache: FeatureCache,
          base_cfg: ExtractionConfig = ExtractionConfig(), n_splits=100, seed=0,
          grid=DEFAULT_C_GRID, epsilon=DEFAULT_EPSILON, c=None, max_frames=None) -> list[SweepRow]:
    """One protocol run per parameter value; returns rows shaped like the sweep tables."""
    if not values:
        raise ValueError("no sweep values")
    rows = []
    for value in values:
        cfg = with_nl(base_cfg, param, value)
        x = np.stack([cache.extract(s, cfg, v, max_frames).values for s, v in zip(sources, video_ids)])
        rep = run_protocol(x, mos, content_ids, n_splits, seed, grid, epsilon, c)
        label = value if param == "window" else float(value)
        rows.append(SweepRow(param, label, rep.median_srocc, rep.median_lcc, rep.median_rmse, rep.std_srocc))
        logger.info("%s=%s: median SROCC %.4f", param, label, rep.median_srocc)
    return rows


def format_table(rows: list[SweepRow]) -> str:
    if not rows:
        return ""
    head = "W" if rows[0].param == "window" else "delta"
    lines = [f"{head},SROCC,LCC,RMSE,SROCC_std"]
    for r in rows:
        label = "Global" if r.value == "global" else r.value
        lines.append(f"{label},{r.median_srocc:.4f},{r.median_lcc:.4f},{r.median_rmse:.4f},{r.std_srocc:.4f}")
    return "\n".join(lines) + "\n"
