"""Throughput benchmark for per-frame feature extraction."""

from __future__ import annotations

import os
import platform
import time

import numpy as np

from .chips import ChipAccumulator
from .expansive import window_extrema, window_extrema_naive
from .features import ExtractionConfig, frame_features
from .video_io import FramePlane

TARGET_FPS = 2.0


def synthetic_frame(width, height, seed=0):
    rng = np.random.default_rng(seed)
    y = FramePlane(np.clip(0.5 + 0.1 * rng.standard_normal((height, width)), 0, 1), "Y'")
    cb = FramePlane(np.clip(0.5 + 0.05 * rng.standard_normal((height // 2, width // 2)), 0, 1), "Cb")
    cr = FramePlane(np.clip(0.5 + 0.05 * rng.standard_normal((height // 2, width // 2)), 0, 1), "Cr")
    return y, cb, cr


def extrema_speedup(window=17, size=96, seed=0) -> dict:
    """Time the sliding-extrema path against the per-pixel scan on one patch."""
    v = np.random.default_rng(seed).random((size, size))
    t0 = time.perf_counter()
    fast = window_extrema(v, window)
    t1 = time.perf_counter()
    slow = window_extrema_naive(v, window)
    t2 = time.perf_counter()
    same = all(np.array_equal(a, b) for a, b in zip(fast, slow))
    return {"window": window, "patch": size, "sliding_s": t1 - t0, "naive_s": t2 - t1,
            "speedup": (t2 - t1) / max(t1 - t0, 1e-12), "identical": bool(same)}


def run_benchmark(width=3840, height=2160, frames=10, cfg: ExtractionConfig = ExtractionConfig(),
                  warmup=1) -> dict:
    """Frames per second of the full per-frame path (288 features + chip push)."""
    planes = [synthetic_frame(width, height, k) for k in range(min(frames, 3))]
    acc = ChipAccumulator(cfg.chips)
    for k in range(warmup):
        frame_features(*synthetic_frame(64, 64, 99), cfg)
    times = []
    for k in range(frames):
        y, cb, cr = planes[k % len(planes)]
        t0 = time.perf_counter()
        frame_features(y, cb, cr, cfg, k)
        acc.push(y)
        times.append(time.perf_counter() - t0)
    per_frame = float(np.median(times))
    fps = 1.0 / per_frame
    return {
        "width": width, "height": height, "frames": frames,
        "median_s_per_frame": per_frame, "fps": fps, "target_fps": TARGET_FPS,
        "meets_target": fps >= TARGET_FPS,
        "cpu_count": os.cpu_count(), "machine": platform.machine(), "processor": platform.processor(),
        "extrema": extrema_speedup(cfg.nl.window if cfg.nl.window != "global" else 17),
    }
