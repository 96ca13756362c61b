"""Synthetic test material: moving textured contents with graded distortions."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .video_io import write_y4m

# (blur sigma, quantization bits); level 0 is the pristine reference
DISTORTION_LEVELS = ((0.0, None), (1.0, 8), (2.0, 6), (4.0, 4))


@dataclass(frozen=True)
class SyntheticVideo:
    path: str
    video_id: str
    content_id: str
    level: int
    score: float


def _texture(rng, shape, sigma):
    t = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return t / t.std()


def make_content(seed: int, height=480, width=640, frames=10):
    """Full-resolution (Y', Cb, Cr) sequences of a translating multi-scale texture.

    Chroma planes are centred on 0.5.
    """
    rng = np.random.default_rng(seed)
    pad = 4 * frames + 8
    shape = (height + pad, width + pad)
    luma = sum(w * _texture(rng, shape, s) for w, s in ((0.6, 1.5), (0.3, 4.0), (0.1, 12.0)))
    luma = 0.5 + 0.12 * luma
    cb = 0.5 + 0.05 * _texture(rng, shape, 8.0)
    cr = 0.5 + 0.05 * _texture(rng, shape, 8.0)
    angle = rng.uniform(0, 2 * np.pi)
    vy, vx = np.sin(angle), np.cos(angle)
    out = []
    for k in range(frames):
        dy = int(round(pad / 2 + k * vy)) if pad else 0
        dx = int(round(pad / 2 + k * vx)) if pad else 0
        sl = (slice(dy, dy + height), slice(dx, dx + width))
        out.append(tuple(np.clip(p[sl], 0.0, 1.0) for p in (luma, cb, cr)))
    return out


def distort(planes, blur_sigma: float, bits):
    """Gaussian blur of every plane followed by uniform requantization."""
    out = []
    for p in planes:
        q = ndimage.gaussian_filter(p, blur_sigma, mode="reflect") if blur_sigma > 0 else p
        if bits is not None:
            levels = 2 ** bits - 1
            q = np.round(q * levels) / levels
        out.append(q)
    return tuple(out)


def make_corpus(root, n_contents=10, height=480, width=640, frames=10, seed=0,
                levels=DISTORTION_LEVELS) -> list[SyntheticVideo]:
    """Write ``n_contents x len(levels)`` Y4M files; scores equal the reverse distortion rank."""
    os.makedirs(root, exist_ok=True)
    videos = []
    for c in range(n_contents):
        content = make_content(seed * 1000 + c, height, width, frames)
        for lvl, (sigma, bits) in enumerate(levels):
            frames_out = [distort(f, sigma, bits) for f in content]
            vid = f"c{c:02d}_l{lvl}"
            path = os.path.join(root, vid + ".y4m")
            write_y4m(path, frames_out)
            videos.append(SyntheticVideo(path, vid, f"c{c:02d}", lvl, float(len(levels) - 1 - lvl)))
    return videos


def write_scores(path, videos) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id,content_id,mos\n")
        for v in videos:
            fh.write(f"{v.video_id},{v.content_id},{v.score!r}\n")


def pristine_like_frame(seed=0, size=512, smooth_sigma=3.0, amplitude=0.015):
    """Smoothed Gaussian noise around mid-grey: MSCN of it is close to Gaussian."""
    t = _texture(np.random.default_rng(seed), (size, size), smooth_sigma)
    return np.clip(0.5 + amplitude * t, 0.0, 1.0)


def quantize_levels(frame, levels=4):
    """Hard requantization onto ``levels`` equally spaced values spanning the frame's range."""
    v = np.asarray(frame, dtype=np.float64)
    lo, hi = v.min(), v.max()
    q = levels - 1
    return lo + np.round((v - lo) / (hi - lo) * q) / q * (hi - lo)
