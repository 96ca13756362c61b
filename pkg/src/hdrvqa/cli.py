"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ENV_PREFIX, KNOBS, RunConfig, env_name
from .errors import DataError, NumericError
from .evaluation import EvalReport, align_scores, load_scores, run_protocol, welch_ttest
from .features import extract_video, read_features_csv, write_features_csv
from .regression import SvrModel, cross_validate_c, predict, train_svr
from .video_io import open_video, read_sidecar

logger = logging.getLogger("hdrvqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
VIDEO_EXTS = (".y4m", ".yuv", ".raw")


class UsageError(Exception):
    pass


def _knob_epilog() -> str:
    lines = ["configuration knobs (config file < environment " + ENV_PREFIX + "* < flags):"]
    for k in KNOBS.values():
        default = ",".join(map(str, k.default)) if isinstance(k.default, tuple) else k.default
        lines.append(f"  --{k.name:<16} {k.help} [default: {default}; env {env_name(k.name)}]")
    lines.append("exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error")
    return "\n".join(lines)


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="key = value configuration file")
    for k in KNOBS.values():
        g.add_argument(f"--{k.name}", dest=f"knob:{k.name}", metavar="V", help=k.help)
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="hdrvqa", description="No-reference HDR video quality features, regression and evaluation.",
        epilog=_knob_epilog(), formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("extract", help="compute 612-value feature vectors", epilog=_knob_epilog(), formatter_class=fmt)
    p.add_argument("--input", required=True, help="video file or directory of videos")
    p.add_argument("--sidecar", help="key = value geometry file for raw input")
    p.add_argument("--out", required=True, help="feature CSV to write")
    p.add_argument("--max-frames", type=int, help="use at most this many frames per video")
    p.add_argument("--cache-dir", help="reuse/store per-block features here")
    _common(p)

    p = sub.add_parser("train", help="fit the SVR", epilog=_knob_epilog(), formatter_class=fmt)
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True, help="CSV: video_id,content_id,mos")
    p.add_argument("--out", required=True, help="model file (a .json sidecar is written next to it)")
    _common(p)

    p = sub.add_parser("predict", help="score feature vectors with a model", epilog=_knob_epilog(), formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="CSV: video_id,score")
    _common(p)

    p = sub.add_parser("evaluate", help="repeated content-separated evaluation", epilog=_knob_epilog(),
                       formatter_class=fmt)
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--splits", type=int, default=100)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="also write per-split metrics as CSV")
    _common(p)

    p = sub.add_parser("compare", help="Welch's t-test on two reports' SROCC samples", epilog=_knob_epilog(),
                       formatter_class=fmt)
    p.add_argument("--reports", nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--two-sided", action="store_true")
    _common(p)

    p = sub.add_parser("sweep", help="evaluate over values of nl.delta or nl.window", epilog=_knob_epilog(),
                       formatter_class=fmt)
    p.add_argument("--param", required=True, choices=("delta", "window"))
    p.add_argument("--values", required=True, help="comma separated; 'global' allowed for window")
    p.add_argument("--input", required=True, help="directory of videos")
    p.add_argument("--sidecar")
    p.add_argument("--scores", required=True)
    p.add_argument("--cache-dir", required=True)
    p.add_argument("--splits", type=int, default=100)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--out", help="table CSV (printed when omitted)")
    _common(p)

    p = sub.add_parser("bench", help="time per-frame extraction on synthetic frames", epilog=_knob_epilog(),
                       formatter_class=fmt)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--size", default="3840x2160", help="WxH")
    p.add_argument("--out", help="JSON result")
    _common(p)
    return parser


def load_config(args) -> RunConfig:
    flags = {k.split(":", 1)[1]: v for k, v in vars(args).items() if k.startswith("knob:") and v is not None}
    file_values = {}
    if getattr(args, "sidecar", None):
        file_values.update(read_sidecar(args.sidecar))
    if args.config:
        file_values.update(read_sidecar(args.config))
    return RunConfig.layered(file_values, None, flags)


def list_videos(path) -> list[str]:
    if os.path.isdir(path):
        files = sorted(os.path.join(path, f) for f in os.listdir(path) if f.lower().endswith(VIDEO_EXTS))
        if not files:
            raise DataError(f"no videos ({', '.join(VIDEO_EXTS)}) in {path}")
        return files
    if not os.path.exists(path):
        raise DataError(f"no such file or directory: {path}")
    return [path]


def _extract_one(job):
    path, cfg_items, max_frames, cache_dir = job
    cfg = RunConfig(cfg_items)
    src = open_video(path, **cfg.video_overrides())
    ecfg = cfg.extraction(cfg["gamut"] or src.gamut)
    if cache_dir:
        from .sweep import FeatureCache
        return FeatureCache(cache_dir).extract(src, ecfg, max_frames=max_frames)
    return extract_video(src, ecfg, max_frames=max_frames)


def extract_many(paths, cfg: RunConfig, max_frames=None, cache_dir=None) -> list:
    jobs = [(p, dict(cfg), max_frames, cache_dir) for p in paths]
    if cfg["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            return list(pool.map(_extract_one, jobs))  # map keeps input order
    return [_extract_one(j) for j in jobs]


def cmd_extract(args, cfg):
    vectors = extract_many(list_videos(args.input), cfg, args.max_frames, args.cache_dir)
    for v in vectors:
        for d in v.diagnostics:
            logger.info("%s: %s", v.video_id, d)
    write_features_csv(args.out, vectors)
    print(f"wrote {len(vectors)} feature vector(s) to {args.out}")


def _features_with_scores(features_path, scores_path):
    ids, x, version = read_features_csv(features_path)
    if not ids:
        raise DataError(f"{features_path}: no feature rows")
    contents, mos = align_scores(ids, load_scores(scores_path))
    return ids, x, version, contents, mos


def cmd_train(args, cfg):
    ids, x, version, contents, mos = _features_with_scores(args.features, args.scores)
    c = cfg["svr.c"]
    if c == "auto":
        c = cross_validate_c(x, mos, contents, cfg["svr.grid"], cfg["svr.eps"], cfg["seed"])
    model = train_svr(x, mos, c, cfg["svr.eps"], cfg["seed"], layout_version=version)
    model.save(args.out)
    print(f"trained on {len(ids)} videos with C={c:g}; model written to {args.out}")


def cmd_predict(args, cfg):
    model = SvrModel.load(args.model)
    ids, x, version = read_features_csv(args.features)
    scores = np.atleast_1d(predict(model, x, layout_version=version)) if ids else []
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "score"])
        for vid, s in zip(ids, scores):
            w.writerow([vid, repr(float(s))])
    print(f"wrote {len(ids)} prediction(s) to {args.out}")


def cmd_evaluate(args, cfg):
    _, x, _, contents, mos = _features_with_scores(args.features, args.scores)
    if args.splits < 1:
        raise UsageError("--splits must be >= 1")
    fixed_c = None if cfg["svr.c"] == "auto" else cfg["svr.c"]
    rep = run_protocol(x, mos, contents, args.splits, cfg["seed"], cfg["svr.grid"], cfg["svr.eps"], fixed_c)
    rep.to_json(args.out)
    if args.csv:
        rep.to_csv(args.csv)
    print(f"median SROCC {rep.median_srocc:.4f} ({rep.std_srocc:.4f})  "
          f"LCC {rep.median_lcc:.4f} ({rep.std_lcc:.4f})  RMSE {rep.median_rmse:.4f} ({rep.std_rmse:.4f})")


def cmd_compare(args, cfg):
    a, b = (EvalReport.from_json(p) for p in args.reports)
    result = welch_ttest(a.srocc_samples, b.srocc_samples, args.alpha, not args.two_sided)
    print(json.dumps({"a": args.reports[0], "b": args.reports[1], "result": result,
                      "median_srocc_a": a.median_srocc, "median_srocc_b": b.median_srocc}))


def _sweep_values(param, text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("--values is empty")
    try:
        if param == "delta":
            return [float(v) for v in vals]
        return ["global" if v.lower() == "global" else int(v) for v in vals]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from None


def cmd_sweep(args, cfg):
    from .sweep import FeatureCache, format_table, sweep

    values = _sweep_values(args.param, args.values)
    paths = list_videos(args.input)
    sources = [open_video(p, **cfg.video_overrides()) for p in paths]
    ids = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    contents, mos = align_scores(ids, load_scores(args.scores))
    fixed_c = None if cfg["svr.c"] == "auto" else cfg["svr.c"]
    rows = sweep(args.param, values, sources, ids, mos, contents, FeatureCache(args.cache_dir),
                 cfg.extraction(), args.splits, cfg["seed"], cfg["svr.grid"], cfg["svr.eps"], fixed_c,
                 args.max_frames)
    table = format_table(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table)
    print(table, end="")


def cmd_bench(args, cfg):
    from .bench import run_benchmark

    try:
        w, h = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like 3840x2160, got {args.size!r}") from None
    result = run_benchmark(w, h, args.frames, cfg.extraction())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
    print(json.dumps(result))


COMMANDS = {"extract": cmd_extract, "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "compare": cmd_compare, "sweep": cmd_sweep, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](args, cfg)
    except (DataError, OSError) as exc:
        print(f"hdrvqa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"hdrvqa: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        # DataError is a ValueError too, so this clause must come last
        print(f"hdrvqa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
