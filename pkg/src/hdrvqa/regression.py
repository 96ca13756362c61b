"""Linear epsilon-SVR trained by dual coordinate descent.

Features are standardized per column and targets z-scored before training;
both transforms are folded back into the stored weights and bias, so
``predict`` is a single dot product on standardized features.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DataError, LayoutMismatchError, NumericError
from .features import LAYOUT_VERSION
from .metrics import srocc

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.1
DEFAULT_C_GRID = tuple(10.0 ** np.arange(-3, 4))
GAP_TOL = 1e-4
MAX_EPOCHS = 10_000
N_FOLDS = 5
GAP_EVERY = 8  # epochs between duality-gap evaluations (each costs about one epoch)

_MAGIC = b"HDRVQSVR"
_FORMAT_VERSION = 1


@dataclass
class SvrModel:
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    hyper_c: float
    epsilon: float
    layout_version: str = LAYOUT_VERSION
    constant_features: np.ndarray = field(default=None, repr=False)
    epochs: int = 0
    duality_gap: float = 0.0

    @property
    def n_features(self) -> int:
        return self.weights.size

    def to_bytes(self) -> bytes:
        """Versioned little-endian binary form."""
        layout = self.layout_version.encode("utf-8")
        head = struct.pack("<8sIII", _MAGIC, _FORMAT_VERSION, self.n_features, len(layout))
        scal = struct.pack("<ddd", self.bias, self.hyper_c, self.epsilon)
        arrays = [np.asarray(a, dtype="<f8").tobytes() for a in (self.weights, self.feature_means, self.feature_stds)]
        mask = np.zeros(self.n_features, dtype=np.uint8)
        if self.constant_features is not None:
            mask[:] = self.constant_features
        return head + layout + scal + b"".join(arrays) + mask.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SvrModel":
        hsize = struct.calcsize("<8sIII")
        if len(blob) < hsize:
            raise DataError("model file too short")
        magic, version, n, nlay = struct.unpack_from("<8sIII", blob)
        if magic != _MAGIC:
            raise DataError("not a model file (bad magic)")
        if version != _FORMAT_VERSION:
            raise DataError(f"unsupported model format version {version}")
        expected = hsize + nlay + 24 + 3 * 8 * n + n
        if len(blob) != expected:
            raise DataError(f"model file has {len(blob)} bytes, expected {expected}")
        pos = hsize
        layout = blob[pos:pos + nlay].decode("utf-8")
        pos += nlay
        bias, c, eps = struct.unpack_from("<ddd", blob, pos)
        pos += 24
        arrs = np.frombuffer(blob, dtype="<f8", count=3 * n, offset=pos).astype(np.float64).reshape(3, n)
        mask = np.frombuffer(blob, dtype=np.uint8, count=n, offset=pos + 3 * 8 * n).astype(bool)
        return cls(arrs[0].copy(), bias, arrs[1].copy(), arrs[2].copy(), c, eps, layout, mask)

    def save(self, path) -> None:
        """Write ``path`` (binary) and ``path + '.json'`` (hyperparameters)."""
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())
        meta = {
            "format_version": _FORMAT_VERSION,
            "layout_version": self.layout_version,
            "n_features": self.n_features,
            "hyper_c": self.hyper_c,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "epochs": self.epochs,
            "duality_gap": self.duality_gap,
            "n_constant_features": int(np.count_nonzero(self.constant_features))
            if self.constant_features is not None else 0,
        }
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, path) -> "SvrModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def standardize_fit(train_features) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column means and population stds; constant columns get std 1.

    Returns ``(means, stds, constant_mask)``.
    """
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("empty training set")
    if x.shape[0] < 2:
        raise DataError("standardization needs at least 2 rows")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    constant = ~(stds > 0)
    if constant.any():
        logger.info("%d constant feature column(s) get std 1 and weight 0", int(constant.sum()))
    stds[constant] = 1.0
    return means, stds, constant


def standardize(features, means, stds) -> np.ndarray:
    return (np.asarray(features, dtype=np.float64) - means) / stds


@njit(cache=True)
def _dual_cd(x, y, upper, eps, seed, tol, max_epochs):
    """Dual coordinate descent for the L1-loss epsilon-SVR.

    Solves min_b 0.5 b'Qb - y'b + eps |b|_1 s.t. |b_i| <= upper_i with Q = XX'.
    The last column of ``x`` is a constant 1, so the bias is regularized like
    any other weight.
    """
    n, d = x.shape
    beta = np.zeros(n)
    w = np.zeros(d)
    qd = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += x[i, j] * x[i, j]
        qd[i] = s
    np.random.seed(seed)
    order = np.arange(n)
    gap = np.inf
    epoch = 0
    while epoch < max_epochs:
        epoch += 1
        np.random.shuffle(order)
        for k in range(n):
            i = order[k]
            h = qd[i]
            if h <= 0.0:
                continue
            g = -y[i]
            for j in range(d):
                g += w[j] * x[i, j]
            gp = g + eps
            gn = g - eps
            b = beta[i]
            if gp < h * b:
                z = -gp / h
            elif gn > h * b:
                z = -gn / h
            else:
                z = -b
            nb = min(max(b + z, -upper[i]), upper[i])
            z = nb - b
            if z != 0.0:
                beta[i] = nb
                for j in range(d):
                    w[j] += z * x[i, j]
        if epoch % GAP_EVERY and epoch < max_epochs:
            continue
        # duality gap: primal 0.5|w|^2 + sum_i C_i max(0, |r_i| - eps); dual uses beta
        ww = 0.0
        for j in range(d):
            ww += w[j] * w[j]
        loss = 0.0
        lin = 0.0
        for i in range(n):
            r = -y[i]
            for j in range(d):
                r += w[j] * x[i, j]
            v = abs(r) - eps
            if v > 0.0:
                loss += upper[i] * v
            lin += y[i] * beta[i] - eps * abs(beta[i])
        primal = 0.5 * ww + loss
        dual = -0.5 * ww + lin
        gap = primal - dual
        if gap <= tol * max(abs(primal), 1e-12):
            break
    return w, beta, epoch, gap


def _check_xy(train_features, train_scores):
    x = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_scores, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise DataError("features must be a 2-D matrix")
    if x.shape[0] != y.size:
        raise DataError(f"{x.shape[0]} feature rows but {y.size} scores")
    if x.shape[0] < 2:
        raise DataError("training needs at least 2 rows")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise NumericError("non-finite training features or scores")
    return x, y


def solve_svr(z, y, c, epsilon, seed=0, sample_weight=None, tol=GAP_TOL, max_epochs=MAX_EPOCHS):
    """Raw solver on already-scaled data: returns (w, b, epochs, gap).

    No standardization or target scaling is applied here.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = z.shape[0]
    upper = np.full(n, float(c))
    if sample_weight is not None:
        upper = upper * np.asarray(sample_weight, dtype=np.float64)
    xa = np.ascontiguousarray(np.hstack([z, np.ones((n, 1))]))
    w, _, epochs, gap = _dual_cd(xa, y, upper, float(epsilon), int(seed), float(tol), int(max_epochs))
    if epochs >= max_epochs and gap > tol * 1e2:
        logger.debug("SVR stopped at %d epochs with duality gap %.3g", epochs, gap)
    return w[:-1].copy(), float(w[-1]), int(epochs), float(gap)


def train_svr(train_features, train_scores, c: float = 1.0, epsilon: float = DEFAULT_EPSILON,
              seed: int = 0, sample_weight=None, layout_version: str = LAYOUT_VERSION) -> SvrModel:
    """Fit a linear epsilon-SVR; ``epsilon`` is in units of the target std."""
    if not c > 0:
        raise ValueError(f"SVR C must be positive, got {c}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    x, y = _check_xy(train_features, train_scores)
    means, stds, constant = standardize_fit(x)
    z = standardize(x, means, stds)
    z[:, constant] = 0.0
    y_mean = float(y.mean())
    y_std = float(y.std())
    if not y_std > 0:
        y_std = 1.0
    w, b, epochs, gap = solve_svr(z, (y - y_mean) / y_std, c, epsilon, seed, sample_weight)
    w[constant] = 0.0
    return SvrModel(w * y_std, b * y_std + y_mean, means, stds, float(c), float(epsilon),
                    layout_version, constant, epochs, gap)


def predict(model: SvrModel, features, layout_version: str | None = None) -> np.ndarray:
    """Scores for one feature vector (scalar result) or a matrix of rows."""
    if layout_version is not None and layout_version != model.layout_version:
        raise LayoutMismatchError(
            f"features use layout {layout_version!r}, model expects {model.layout_version!r}")
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_features:
        raise LayoutMismatchError(f"features have {x.shape[1]} columns, model expects {model.n_features}")
    out = standardize(x, model.feature_means, model.feature_stds) @ model.weights + model.bias
    return float(out[0]) if single else out


def content_folds(content_ids, n_folds=N_FOLDS, seed=0) -> list[np.ndarray]:
    """Row-index folds such that no content spans two folds."""
    ids = np.asarray(content_ids)
    contents = np.unique(ids)
    if contents.size < n_folds:
        raise DataError(f"{contents.size} contents cannot form {n_folds} content-separated folds")
    perm = np.random.default_rng(seed).permutation(contents)
    return [np.flatnonzero(np.isin(ids, part)) for part in np.array_split(perm, n_folds)]


def _fold_srocc(pred, truth) -> float:
    try:
        return srocc(pred, truth)
    except (NumericError, ValueError):
        # a constant prediction or target carries no ranking information
        return 0.0


def cross_validate_c(train_features, train_scores, content_ids, grid=DEFAULT_C_GRID,
                     epsilon=DEFAULT_EPSILON, seed=0, n_folds=N_FOLDS) -> float:
    """Grid value of C with the best mean fold SROCC; ties go to the smaller C."""
    x, y = _check_xy(train_features, train_scores)
    ids = np.asarray(content_ids)
    if ids.size != y.size:
        raise DataError("content ids and scores differ in length")
    if y.size < 10:
        raise DataError(f"cross-validation needs at least 10 rows, got {y.size}")
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty C grid")
    folds = content_folds(ids, n_folds, seed)
    best_c, best_score = grid[0], -np.inf
    for c in grid:
        scores = []
        for k, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(y.size), test_idx)
            model = train_svr(x[train_idx], y[train_idx], c, epsilon, seed=seed + k)
            scores.append(_fold_srocc(predict(model, x[test_idx]), y[test_idx]))
        mean = float(np.mean(scores))
        if mean > best_score:
            best_c, best_score = c, mean
    return best_c
