"""Evaluation protocol: metrics with logistic mapping, content-separated
train/test splits repeated many times, and Welch's t-test between models."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .errors import DataError, NumericError
from .metrics import lcc_rmse, pearson, srocc
from .regression import DEFAULT_C_GRID, DEFAULT_EPSILON, cross_validate_c, predict, train_svr

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.2
LOGISTIC_MAXITER = 10_000

__all__ = [
    "EvalReport", "LogisticFit", "SplitSpec", "lcc_rmse", "load_scores", "logistic", "logistic_fit",
    "make_splits", "pearson", "run_protocol", "srocc", "welch_ttest",
]


def logistic(s, b1, b2, b3, b4):
    """Monotone 4-parameter logistic: b2 + (b1 - b2) / (1 + exp(-(s - b3) / |b4|))."""
    return b2 + (b1 - b2) * special.expit((np.asarray(s, dtype=np.float64) - b3) / abs(b4))


@dataclass
class LogisticFit:
    params: tuple  # (b1, b2, b3, b4), or (slope, intercept) on the linear fallback
    mapped: np.ndarray = field(repr=False)
    fallback: bool = False
    diagnostic: str = ""

    def apply(self, s) -> np.ndarray:
        if self.fallback:
            return self.params[0] * np.asarray(s, dtype=np.float64) + self.params[1]
        return logistic(s, *self.params)


def _linear_fallback(pred, mos, why) -> LogisticFit:
    logger.info("logistic fit fell back to linear least squares: %s", why)
    if np.ptp(pred) == 0:
        slope, intercept = 0.0, float(mos.mean())
    else:
        slope, intercept = (float(v) for v in np.polyfit(pred, mos, 1))
    return LogisticFit((slope, intercept), slope * pred + intercept, True, why)


def logistic_fit(pred, mos) -> LogisticFit:
    """Least-squares logistic map from predictions to MOS by Nelder-Mead."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    mos = np.asarray(mos, dtype=np.float64).ravel()
    if pred.shape != mos.shape:
        raise ValueError("pred and mos differ in length")
    if pred.size < 5:
        raise ValueError(f"logistic fit needs at least 5 points, got {pred.size}")
    spread = pred.std()
    if not spread > 0:
        return _linear_fallback(pred, mos, "constant predictions")
    # fit in standardized units so the simplex tolerances are scale-free
    p_mu, m_mu = pred.mean(), mos.mean()
    m_sd = mos.std() or 1.0
    p = (pred - p_mu) / spread
    m = (mos - m_mu) / m_sd
    x0 = np.array([m.max(), m.min(), 0.0, 0.25])

    def sse(b):
        if b[3] == 0:
            return np.inf
        r = logistic(p, *b) - m
        return float(np.dot(r, r))

    res = optimize.minimize(sse, x0, method="Nelder-Mead",
                            options={"maxiter": LOGISTIC_MAXITER, "xatol": 1e-8, "fatol": 1e-12})
    if not res.success or not np.isfinite(res.fun):
        return _linear_fallback(pred, mos, f"simplex did not converge: {res.message}")
    b1, b2, b3, b4 = (float(v) for v in res.x)
    b = (m_mu + m_sd * b1, m_mu + m_sd * b2, p_mu + spread * b3, spread * abs(b4))
    return LogisticFit(b, logistic(pred, *b))


@dataclass(frozen=True)
class SplitSpec:
    index: int
    seed: int
    train_contents: tuple
    test_contents: tuple

    def check(self, all_contents) -> None:
        train, test = set(self.train_contents), set(self.test_contents)
        if train & test:
            raise AssertionError(f"split {self.index}: contents on both sides: {sorted(train & test)}")
        if train | test != set(all_contents):
            raise AssertionError(f"split {self.index}: contents missing from the split")


def n_test_contents(n_contents: int, fraction=TEST_FRACTION) -> int:
    """Round-half-up share of contents held out, at least 1."""
    return max(1, int(np.floor(fraction * n_contents + 0.5)))


def make_splits(content_ids, n_splits=100, seed=0, fraction=TEST_FRACTION) -> list[SplitSpec]:
    contents = np.unique(np.asarray(content_ids))
    if contents.size < 2:
        raise DataError("need at least 2 contents to split")
    n_test = n_test_contents(contents.size, fraction)
    if n_test >= contents.size:
        raise DataError(f"{contents.size} contents leave nothing to train on")
    splits = []
    for s in range(n_splits):
        rng = np.random.default_rng([seed, s])
        test = np.sort(rng.choice(contents, n_test, replace=False))
        train = np.setdiff1d(contents, test)
        spec = SplitSpec(s, seed, tuple(train.tolist()), tuple(test.tolist()))
        spec.check(contents)
        splits.append(spec)
    return splits


@dataclass
class EvalReport:
    per_split: list
    median_srocc: float
    median_lcc: float
    median_rmse: float
    std_srocc: float
    std_lcc: float
    std_rmse: float
    config: dict = field(default_factory=dict)

    @classmethod
    def from_splits(cls, per_split, config=None) -> "EvalReport":
        m = {k: np.array([r[k] for r in per_split], dtype=np.float64) for k in ("srocc", "lcc", "rmse")}
        return cls(per_split, *(float(np.median(m[k])) for k in ("srocc", "lcc", "rmse")),
                   *(float(np.std(m[k])) for k in ("srocc", "lcc", "rmse")), config or {})

    @property
    def srocc_samples(self) -> np.ndarray:
        return np.array([r["srocc"] for r in self.per_split])

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "EvalReport":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
            return cls(**d)
        except (OSError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: not a readable report ({exc})") from None

    def to_csv(self, path) -> None:
        """Per-split metrics as plain CSV, for plotting elsewhere."""
        keys = ["split", "c", "srocc", "lcc", "rmse", "n_test"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for r in self.per_split:
                w.writerow([r[k] for k in keys])


def load_scores(path) -> dict:
    """``video_id,content_id,mos`` rows -> {video_id: (content_id, mos)}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty score file")
    start = 1 if rows[0][0].strip().lower() == "video_id" else 0
    for lineno, row in enumerate(rows[start:], start + 1):
        if len(row) < 3:
            raise DataError(f"{path}:{lineno}: expected video_id,content_id,mos")
        try:
            mos = float(row[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad score {row[2]!r}") from None
        if not np.isfinite(mos):
            raise DataError(f"{path}:{lineno}: non-finite score")
        out[row[0].strip()] = (row[1].strip(), mos)
    return out


def align_scores(video_ids, scores: dict) -> tuple[np.ndarray, np.ndarray]:
    """(content_ids, mos) in the order of ``video_ids``."""
    missing = [v for v in video_ids if v not in scores]
    if missing:
        raise DataError(f"{len(missing)} video(s) without a score, e.g. {missing[0]!r}")
    contents = np.array([scores[v][0] for v in video_ids])
    mos = np.array([scores[v][1] for v in video_ids], dtype=np.float64)
    return contents, mos


def _safe_srocc(pred, mos, notes, idx) -> float:
    try:
        return srocc(pred, mos)
    except (NumericError, ValueError) as exc:
        notes.append(f"split {idx}: SROCC undefined ({exc}); recorded as 0")
        return 0.0


def evaluate_split(split: SplitSpec, x, mos, content_ids, grid=DEFAULT_C_GRID,
                   epsilon=DEFAULT_EPSILON, c=None) -> dict:
    """Cross-validate C on the train side, fit, and score the test side."""
    train = np.isin(content_ids, split.train_contents)
    test = np.isin(content_ids, split.test_contents)
    if np.any(train & test) or not np.all(train | test):
        raise AssertionError(f"split {split.index}: rows not content-separated")
    seed = int(np.random.default_rng([split.seed, split.index, 1]).integers(2**31))
    if c is None:
        c = cross_validate_c(x[train], mos[train], content_ids[train], grid, epsilon, seed)
    model = train_svr(x[train], mos[train], c, epsilon, seed)
    pred = predict(model, x[test])
    notes = []
    rho = _safe_srocc(pred, mos[test], notes, split.index)
    if pred.size >= 5:
        fit = logistic_fit(pred, mos[test])
    else:
        fit = _linear_fallback(pred, mos[test], f"only {pred.size} test videos")
    if fit.fallback:
        notes.append(f"split {split.index}: linear map used ({fit.diagnostic})")
    rmse = float(np.sqrt(np.mean((fit.mapped - mos[test]) ** 2)))
    try:
        lcc = pearson(fit.mapped, mos[test])
    except NumericError as exc:
        notes.append(f"split {split.index}: LCC undefined ({exc}); recorded as 0")
        lcc = 0.0
    params, fallback = list(fit.params), fit.fallback
    return {
        "split": split.index, "c": float(c), "srocc": rho, "lcc": lcc, "rmse": rmse,
        "n_test": int(test.sum()), "logistic": params, "linear_fallback": fallback,
        "test_contents": list(split.test_contents), "notes": notes,
    }


def run_protocol(x, mos, content_ids, n_splits=100, seed=0, grid=DEFAULT_C_GRID,
                 epsilon=DEFAULT_EPSILON, c=None) -> EvalReport:
    """Repeated content-separated 80:20 evaluation; medians and stds over splits."""
    x = np.asarray(x, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    content_ids = np.asarray(content_ids)
    if np.unique(content_ids).size < 5:
        raise DataError("the protocol needs at least 5 contents")
    splits = make_splits(content_ids, n_splits, seed)
    per_split = [evaluate_split(s, x, mos, content_ids, grid, epsilon, c) for s in splits]
    cfg = {"n_splits": n_splits, "seed": seed, "epsilon": epsilon, "c_grid": list(map(float, grid)),
           "fixed_c": c}
    return EvalReport.from_splits(per_split, cfg)


def welch_ttest(a, b, alpha=0.05, one_sided=True) -> int:
    """1 if ``a`` is significantly larger, -1 if ``b`` is, 0 otherwise.

    Swapping the arguments negates the result exactly.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        return 0 if diff == 0 else int(np.sign(diff))
    t = diff / np.sqrt(se2)
    df = se2 * se2 / (va * va / (a.size - 1) + vb * vb / (b.size - 1))
    if one_sided:
        if stats.t.sf(t, df) < alpha:
            return 1
        if stats.t.sf(-t, df) < alpha:
            return -1
        return 0
    return int(np.sign(t)) if 2.0 * stats.t.sf(abs(t), df) < alpha else 0
