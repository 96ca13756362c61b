"""Run configuration: one flat knob namespace layered file < environment < flags."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .chips import DEFAULT_TAPS, ChipConfig
from .expansive import GLOBAL, NonlinearityConfig
from .features import ExtractionConfig
from .regression import DEFAULT_C_GRID, DEFAULT_EPSILON
from .video_io import parse_kv_text

ENV_PREFIX = "HDRVQA_"


@dataclass(frozen=True)
class Knob:
    name: str
    default: object
    help: str
    parse: object = str


def _window(v):
    v = str(v).strip().lower()
    return GLOBAL if v == GLOBAL else int(v)


def _floats(v):
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(";", ",").split(",") if x.strip())


def _svr_c(v):
    v = str(v).strip().lower()
    return "auto" if v == "auto" else float(v)


def _opt_int(v):
    return None if v in (None, "") else int(v)


def _opt_str(v):
    return None if v in (None, "") else str(v).lower()


KNOBS = {k.name: k for k in [
    Knob("nl.delta", 4.0, "expansive nonlinearity parameter delta", float),
    Knob("nl.window", 17, "local min/max window W (odd) or 'global'", _window),
    Knob("chips.T", 5, "temporally filtered fields per chip volume", int),
    Knob("chips.size", 5, "spatial chip size in pixels", int),
    Knob("chips.angles", 6, "number of candidate space-time directions in [0, pi)", int),
    Knob("chips.taps", DEFAULT_TAPS, "zero-sum temporal FIR taps, comma separated", _floats),
    Knob("chips.criterion", "abs", "direction criterion: abs (min |excess kurtosis|) or signed", str),
    Knob("svr.c", "auto", "SVR regularization C, or 'auto' for 5-fold content-grouped CV", _svr_c),
    Knob("svr.eps", DEFAULT_EPSILON, "epsilon tube half-width in target standard deviations", float),
    Knob("svr.grid", DEFAULT_C_GRID, "C grid searched when svr.c is auto", _floats),
    Knob("gamut", None, "colour matrix: bt2020 or bt709 (default bt2020, or the file's own)", _opt_str),
    Knob("range", None, "code range: limited or full (default limited, or the Y4M header's)", _opt_str),
    Knob("width", None, "frame width for raw input", _opt_int),
    Knob("height", None, "frame height for raw input", _opt_int),
    Knob("bit_depth", None, "bit depth for raw input (8 or 10, default 10)", _opt_int),
    Knob("layout", None, "chroma layout for raw input (420 or 444, default 420)", _opt_str),
    Knob("seed", 0, "seed for splits, CV folds and SVR coordinate order", int),
    Knob("workers", 1, "parallel extraction workers (videos)", int),
]}

VIDEO_KEYS = ("gamut", "range", "width", "height", "bit_depth", "layout")


def env_name(knob: str) -> str:
    return ENV_PREFIX + knob.upper().replace(".", "_")


class RunConfig(dict):
    """Merged knob values; unknown keys are rejected."""

    @classmethod
    def layered(cls, file_values=None, environ=None, flags=None) -> "RunConfig":
        cfg = cls({k.name: k.default for k in KNOBS.values()})
        cfg._merge(file_values or {}, "config file")
        env = os.environ if environ is None else environ
        cfg._merge({k: env[env_name(k)] for k in KNOBS if env_name(k) in env}, "environment")
        cfg._merge({k: v for k, v in (flags or {}).items() if v is not None}, "flags")
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, environ=None, flags=None) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            values = parse_kv_text(fh.read())
        return cls.layered(values, environ, flags)

    def _merge(self, values: dict, where: str) -> None:
        for key, raw in values.items():
            if key not in KNOBS:
                raise ValueError(f"unknown configuration key {key!r} in {where}")
            try:
                self[key] = KNOBS[key].parse(raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value {raw!r} for {key} in {where}: {exc}") from None

    def validate(self) -> None:
        self.extraction()
        if self["svr.c"] != "auto" and not self["svr.c"] > 0:
            raise ValueError("svr.c must be positive or 'auto'")
        if self["svr.eps"] < 0:
            raise ValueError("svr.eps must be non-negative")
        if self["workers"] < 1:
            raise ValueError("workers must be >= 1")

    def extraction(self, gamut=None) -> ExtractionConfig:
        nl = NonlinearityConfig(self["nl.delta"], self["nl.window"])
        chips = ChipConfig(T=self["chips.T"], size=self["chips.size"], angles=self["chips.angles"],
                           taps=tuple(self["chips.taps"]), criterion=self["chips.criterion"])
        return ExtractionConfig(gamut=gamut or self["gamut"] or "bt2020", nl=nl, chips=chips)

    def video_overrides(self) -> dict:
        return {k: self[k] for k in VIDEO_KEYS if self[k] is not None}
