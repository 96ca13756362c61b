"""Raw planar video input: Y4M and headerless YUV files with a sidecar.

Samples are normalized to [0, 1] at read time.  Code values are never
linearized; every downstream statistic operates on the transfer-function
encoded (PQ for HDR10) values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import VideoFormatError

CHANNELS = ("Y'", "Cb", "Cr", "R'", "G'", "B'")

# (Kr, Kb) luma coefficients of the non-constant-luminance matrices.
GAMUT_COEFFS = {
    "bt2020": (0.2627, 0.0593),
    "bt709": (0.2126, 0.0722),
}

_Y4M_COLORSPACES = {
    "420": (8, "420"),
    "420jpeg": (8, "420"),
    "420paldv": (8, "420"),
    "420mpeg2": (8, "420"),
    "420p10": (10, "420"),
    "444": (8, "444"),
    "444p10": (10, "444"),
}

SIDECAR_KEYS = ("width", "height", "bit_depth", "layout", "range", "gamut")


@dataclass
class FramePlane:
    """One 2-D plane of normalized samples."""

    data: np.ndarray
    channel: str
    scale_level: int = 0
    nonlinear: bool = False

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


class YCbCrFrame(NamedTuple):
    y: FramePlane
    cb: FramePlane
    cr: FramePlane


class RGBFrame(NamedTuple):
    r: FramePlane
    g: FramePlane
    b: FramePlane


@dataclass(frozen=True)
class VideoSource:
    path: str
    width: int
    height: int
    bit_depth: int
    layout: str
    range: str
    frame_count: int
    container: str
    gamut: str = "bt2020"
    frame_offsets: tuple = field(default=(), repr=False)

    @property
    def chroma_shape(self) -> tuple[int, int]:
        if self.layout == "420":
            return (self.height + 1) // 2, (self.width + 1) // 2
        return self.height, self.width

    @property
    def bytes_per_sample(self) -> int:
        return 1 if self.bit_depth == 8 else 2

    @property
    def frame_bytes(self) -> int:
        ch, cw = self.chroma_shape
        return (self.width * self.height + 2 * ch * cw) * self.bytes_per_sample


def frame_byte_size(width, height, bit_depth, layout) -> int:
    """Payload bytes of one frame (no Y4M frame header)."""
    bps = 1 if bit_depth == 8 else 2
    if layout == "420":
        chroma = ((height + 1) // 2) * ((width + 1) // 2)
    else:
        chroma = width * height
    return (width * height + 2 * chroma) * bps


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise VideoFormatError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_sidecar(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def _normalize_params(params: dict) -> dict:
    out = {}
    for key in SIDECAR_KEYS:
        if params.get(key) is None:
            continue
        value = params[key]
        if key in ("width", "height", "bit_depth"):
            value = int(value)
        else:
            value = str(value).lower()
            if key == "layout":
                value = value.replace(":", "").replace("yuv", "").replace("p", "")
        out[key] = value
    return out


def _validate(p: dict) -> None:
    if p["width"] <= 0 or p["height"] <= 0:
        raise VideoFormatError("width and height must be positive")
    if p["bit_depth"] not in (8, 10):
        raise VideoFormatError(f"unsupported bit depth {p['bit_depth']}")
    if p["layout"] not in ("420", "444"):
        raise VideoFormatError(f"unsupported pixel layout {p['layout']!r}")
    if p["layout"] == "420" and (p["width"] % 2 or p["height"] % 2):
        raise VideoFormatError("4:2:0 frames need even width and height")
    if p["range"] not in ("limited", "full"):
        raise VideoFormatError(f"unknown range {p['range']!r}")
    if p["gamut"] not in GAMUT_COEFFS:
        raise VideoFormatError(f"unknown gamut {p['gamut']!r}")


def _parse_y4m_header(line: bytes) -> dict:
    tokens = line.decode("ascii", errors="replace").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise VideoFormatError("missing YUV4MPEG2 signature")
    hdr = {"layout": "420", "bit_depth": 8}
    for tok in tokens[1:]:
        tag, val = tok[0], tok[1:]
        if tag == "W":
            hdr["width"] = int(val)
        elif tag == "H":
            hdr["height"] = int(val)
        elif tag == "I" and val not in ("p", "?"):
            raise VideoFormatError("interlaced Y4M content is not supported")
        elif tag == "C":
            if val not in _Y4M_COLORSPACES:
                raise VideoFormatError(f"unsupported Y4M colorspace C{val}")
            hdr["bit_depth"], hdr["layout"] = _Y4M_COLORSPACES[val]
        elif tag == "X" and val.upper().startswith("COLORRANGE="):
            hdr["range"] = val.split("=", 1)[1].lower()
    if "width" not in hdr or "height" not in hdr:
        raise VideoFormatError("Y4M header lacks W or H")
    return hdr


def _index_y4m(path, header_len, frame_bytes, file_size) -> tuple:
    offsets = []
    pos = header_len
    with open(path, "rb") as fh:
        while pos < file_size:
            fh.seek(pos)
            chunk = fh.read(256)
            if not chunk.startswith(b"FRAME"):
                raise VideoFormatError(f"expected FRAME marker at byte {pos}")
            nl = chunk.find(b"\n")
            if nl < 0:
                raise VideoFormatError(f"unterminated FRAME header at byte {pos}")
            start = pos + nl + 1
            if start + frame_bytes > file_size:
                raise VideoFormatError(
                    f"truncated file: frame {len(offsets)} needs {frame_bytes} bytes"
                )
            offsets.append(start)
            pos = start + frame_bytes
    return tuple(offsets)


def open_video(path, sidecar=None, **overrides) -> VideoSource:
    """Open a Y4M or raw planar file.

    ``sidecar`` is a path to a key = value file or a mapping; ``overrides``
    (CLI flags) take precedence over it.  For Y4M input any explicitly
    supplied geometry must agree with the header.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise VideoFormatError(f"no such file: {path}")
    explicit = {}
    if sidecar is not None:
        explicit.update(read_sidecar(sidecar) if not isinstance(sidecar, dict) else sidecar)
    explicit.update({k: v for k, v in overrides.items() if v is not None})
    explicit = _normalize_params(explicit)
    size = os.path.getsize(path)

    with open(path, "rb") as fh:
        magic = fh.read(9)
    if magic == b"YUV4MPEG2":
        with open(path, "rb") as fh:
            header = fh.readline(4096)
        if not header.endswith(b"\n"):
            raise VideoFormatError("unterminated Y4M header")
        hdr = _parse_y4m_header(header.rstrip(b"\n"))
        for key, value in hdr.items():
            if key in explicit and explicit[key] != value:
                raise VideoFormatError(
                    f"Y4M header {key}={value} contradicts requested {key}={explicit[key]}"
                )
        params = {"range": "limited", "gamut": "bt2020", **explicit, **hdr}
        _validate(params)
        fbytes = frame_byte_size(params["width"], params["height"], params["bit_depth"], params["layout"])
        offsets = _index_y4m(path, len(header), fbytes, size)
        container = "y4m"
    else:
        missing = [k for k in ("width", "height") if k not in explicit]
        if missing:
            raise VideoFormatError(f"raw input needs {', '.join(missing)} (sidecar or flags)")
        params = {"bit_depth": 10, "layout": "420", "range": "limited", "gamut": "bt2020", **explicit}
        _validate(params)
        fbytes = frame_byte_size(params["width"], params["height"], params["bit_depth"], params["layout"])
        if size % fbytes:
            raise VideoFormatError(
                f"truncated file: {size} bytes is not a multiple of the {fbytes}-byte frame size"
            )
        offsets = tuple(range(0, size, fbytes))
        container = "raw"

    return VideoSource(
        path=path,
        width=params["width"],
        height=params["height"],
        bit_depth=params["bit_depth"],
        layout=params["layout"],
        range=params["range"],
        frame_count=len(offsets),
        container=container,
        gamut=params["gamut"],
        frame_offsets=offsets,
    )


def code_range(bit_depth: int, video_range: str, chroma: bool) -> tuple[float, float]:
    """Return (black/zero code, code span) mapping codes onto [0, 1]."""
    scale = 1 << (bit_depth - 8)
    if video_range == "full":
        return 0.0, float((1 << bit_depth) - 1)
    if chroma:
        return 16.0 * scale, 224.0 * scale
    return 16.0 * scale, 219.0 * scale


def normalize_codes(codes, bit_depth, video_range, chroma=False) -> np.ndarray:
    lo, span = code_range(bit_depth, video_range, chroma)
    out = (np.asarray(codes, dtype=np.float64) - lo) / span
    return np.clip(out, 0.0, 1.0, out=out)


def encode_plane(values, bit_depth=10, video_range="limited", chroma=False) -> np.ndarray:
    """Inverse of :func:`normalize_codes` with rounding to integer codes."""
    lo, span = code_range(bit_depth, video_range, chroma)
    codes = np.rint(np.clip(values, 0.0, 1.0) * span + lo)
    return codes.astype(np.uint8 if bit_depth == 8 else np.uint16)


def read_frame(src: VideoSource, k: int) -> YCbCrFrame:
    """Read frame ``k`` as normalized Y', Cb, Cr planes (chroma 0.5 = neutral)."""
    if not 0 <= k < src.frame_count:
        raise IndexError(f"frame {k} out of range [0, {src.frame_count})")
    dtype = np.dtype(np.uint8) if src.bit_depth == 8 else np.dtype("<u2")
    ch, cw = src.chroma_shape
    nluma = src.width * src.height
    nchroma = ch * cw
    try:
        raw = np.fromfile(src.path, dtype=dtype, count=nluma + 2 * nchroma, offset=src.frame_offsets[k])
    except OSError as exc:
        raise VideoFormatError(f"cannot read frame {k} of {src.path}: {exc}") from exc
    if raw.size != nluma + 2 * nchroma:
        raise VideoFormatError(f"short read on frame {k} of {src.path}")
    y = raw[:nluma].reshape(src.height, src.width)
    cb = raw[nluma:nluma + nchroma].reshape(ch, cw)
    cr = raw[nluma + nchroma:].reshape(ch, cw)
    bd, rg = src.bit_depth, src.range
    return YCbCrFrame(
        FramePlane(normalize_codes(y, bd, rg), "Y'"),
        FramePlane(normalize_codes(cb, bd, rg, chroma=True), "Cb"),
        FramePlane(normalize_codes(cr, bd, rg, chroma=True), "Cr"),
    )


def iter_frames(src: VideoSource, start=0, stop=None):
    stop = src.frame_count if stop is None else min(stop, src.frame_count)
    for k in range(start, stop):
        yield read_frame(src, k)


def _bilinear_axis(data: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    # co-sited siting: output sample i sits at input coordinate i / 2
    n_in = data.shape[axis]
    pos = np.arange(n_out) / 2.0
    i0 = np.minimum(np.floor(pos).astype(np.intp), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = pos - i0
    frac[i0 == n_in - 1] = 0.0
    a = np.take(data, i0, axis=axis)
    b = np.take(data, i1, axis=axis)
    shape = [1, 1]
    shape[axis] = n_out
    frac = frac.reshape(shape)
    return a + (b - a) * frac


def upsample_chroma(plane: FramePlane, shape=None) -> FramePlane:
    """Bilinear 2x chroma upsampling to ``shape`` (default twice the input)."""
    h, w = plane.data.shape
    out_h, out_w = shape if shape is not None else (2 * h, 2 * w)
    if (out_h + 1) // 2 != h or (out_w + 1) // 2 != w:
        raise VideoFormatError(f"chroma plane {h}x{w} does not match luma {out_h}x{out_w}")
    data = _bilinear_axis(plane.data, out_h, 0)
    data = _bilinear_axis(data, out_w, 1)
    return FramePlane(data, plane.channel, plane.scale_level)


def _matrix(gamut):
    try:
        kr, kb = GAMUT_COEFFS[gamut]
    except KeyError:
        raise VideoFormatError(f"unknown gamut {gamut!r}") from None
    kg = 1.0 - kr - kb
    return (
        2.0 * (1.0 - kr),
        2.0 * kb * (1.0 - kb) / kg,
        2.0 * kr * (1.0 - kr) / kg,
        2.0 * (1.0 - kb),
    )


def ycbcr_to_rgb(y: FramePlane, cb: FramePlane, cr: FramePlane, gamut="bt2020") -> RGBFrame:
    """Non-constant-luminance Y'CbCr -> R'G'B' (chroma planes use 0.5 as neutral)."""
    if not (y.data.shape == cb.data.shape == cr.data.shape):
        raise VideoFormatError("Y', Cb and Cr must share a resolution; upsample chroma first")
    r_cr, g_cb, g_cr, b_cb = _matrix(gamut)
    pb = cb.data - 0.5
    pr = cr.data - 0.5
    r = np.clip(y.data + r_cr * pr, 0.0, 1.0)
    g = np.clip(y.data - g_cb * pb - g_cr * pr, 0.0, 1.0)
    b = np.clip(y.data + b_cb * pb, 0.0, 1.0)
    lvl = y.scale_level
    return RGBFrame(FramePlane(r, "R'", lvl), FramePlane(g, "G'", lvl), FramePlane(b, "B'", lvl))


def rgb_to_ycbcr(r, g, b, gamut="bt2020"):
    """Forward transform on arrays; returns (Y', Cb, Cr) with chroma offset 0.5."""
    kr, kb = GAMUT_COEFFS[gamut]
    y = kr * r + (1.0 - kr - kb) * g + kb * b
    cb = 0.5 + (b - y) / (2.0 * (1.0 - kb))
    cr = 0.5 + (r - y) / (2.0 * (1.0 - kr))
    return y, cb, cr


def _subsample420(plane: np.ndarray) -> np.ndarray:
    # co-sited: keep the top-left sample of each 2x2 cell
    return plane[::2, ::2]


def write_y4m(path, frames, bit_depth=10, video_range="limited", layout="420", fps="24:1"):
    """Write (Y', Cb, Cr) float frames in [0, 1] as a Y4M file.

    Chroma arrays may be given at full resolution; they are subsampled for 4:2:0.
    """
    frames = list(frames)
    if not frames:
        raise VideoFormatError("no frames to write")
    height, width = frames[0][0].shape
    cs = {("420", 8): "420jpeg", ("420", 10): "420p10", ("444", 8): "444", ("444", 10): "444p10"}[
        (layout, bit_depth)
    ]
    header = f"YUV4MPEG2 W{width} H{height} F{fps} Ip A1:1 C{cs} XCOLORRANGE={video_range.upper()}\n"
    dtype = np.uint8 if bit_depth == 8 else np.dtype("<u2")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for y, cb, cr in frames:
            if layout == "420" and cb.shape == y.shape:
                cb, cr = _subsample420(cb), _subsample420(cr)
            fh.write(b"FRAME\n")
            for arr, chroma in ((y, False), (cb, True), (cr, True)):
                fh.write(encode_plane(arr, bit_depth, video_range, chroma).astype(dtype).tobytes())
