"""Quantitative probes relating latent dimensions to styles and features.

Two instruments: a k-nearest-neighbor mutual-information estimator between a
continuous scalar and discrete labels, and ordinary-least-squares hyperplane
probes scored by the absolute Pearson correlation (APCC) between in-sample
predictions and the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import beta as beta_dist

from .embeddings import JoinedDataset
from .errors import ParameterError, UnderdeterminedError
from .tables import NamedTable

log = logging.getLogger(__name__)

DEFAULT_MI_K = 3
DEFAULT_APCC_THRESHOLD = 0.5
DEGENERATE_VARIANCE = 1e-24
_JITTER_SEED = 0x5EED
_JITTER_SCALE = 1e-10

# Bernoulli-number tail of the asymptotic digamma expansion, coefficients of
# x^-2, x^-4, ... after the log(x) - 1/(2x) leading terms.
_DIGAMMA_TAIL = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
)


def digamma(x):
    """ψ(x) for x > 0: upward recurrence into the asymptotic series regime.

    Arguments below 10 are shifted up with ψ(x) = ψ(x+1) − 1/x, then the
    Bernoulli tail is summed; good to better than 1e-12 over the counts the
    MI estimator feeds it.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).astype(np.float64).copy()
    if np.any(x <= 0.0):
        raise ParameterError("digamma requires positive arguments")
    out = np.zeros_like(x)
    small = x < 10.0
    while np.any(small):
        out[small] -= 1.0 / x[small]
        x[small] += 1.0
        small = x < 10.0
    inv2 = 1.0 / (x * x)
    tail = np.zeros_like(x)
    for c in reversed(_DIGAMMA_TAIL):
        tail = (tail + c) * inv2
    out += np.log(x) - 0.5 / x + tail
    return float(out[0]) if scalar else out


def mutual_info_cd(x, y, k: int = DEFAULT_MI_K) -> float:
    """Mutual information in bits between scalar x and discrete labels y.

    Nearest-neighbor estimator for the continuous-discrete pair: for each
    point, the distance to its k-th neighbor within its own class sets a
    radius, and the count m of all-class points strictly inside that radius
    enters MI = ψ(N) + ψ(k) − ⟨ψ(N_class)⟩ − ⟨ψ(m)⟩. A deterministic
    1e-10-scale jitter breaks exact ties; the result is clamped at zero.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y).ravel()
    n = len(x)
    if len(y) != n:
        raise ParameterError(f"length mismatch: {n} values vs {len(y)} labels")
    if n < 20:
        raise ParameterError(f"need at least 20 samples, got {n}")
    if k < 1:
        raise ParameterError("neighbor count k must be at least 1")
    if not np.all(np.isfinite(x)):
        raise ParameterError("non-finite values in x")
    classes, y_idx, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        # a constant label carries zero entropy, so MI is exactly 0
        return 0.0
    thin = counts <= k
    if np.any(thin):
        raise ParameterError(
            f"classes with <= {k} members: {list(classes[thin][:5])}"
        )

    sigma = float(np.std(x))
    amp = _JITTER_SCALE * (sigma if sigma > 0.0 else 1.0)
    rng = np.random.default_rng(_JITTER_SEED)
    pts = (x + amp * rng.standard_normal(n))[:, None]

    radius = np.empty(n)
    for c in range(len(classes)):
        idx = np.nonzero(y_idx == c)[0]
        tree = cKDTree(pts[idx])
        dist, _ = tree.query(pts[idx], k=k + 1)
        # shrink by one ulp so the k-th neighbor itself falls outside
        radius[idx] = np.nextafter(dist[:, -1], 0)
    m_all = cKDTree(pts).query_ball_point(pts, radius, return_length=True)
    m_all = np.asarray(m_all, dtype=np.float64)
    n_class = counts[y_idx].astype(np.float64)
    mi_nats = (
        digamma(float(n))
        + digamma(float(k))
        - float(np.mean(digamma(n_class)))
        - float(np.mean(digamma(m_all)))
    )
    return max(0.0, mi_nats / np.log(2.0))


def mi_table(datasets: dict[str, JoinedDataset], k: int = DEFAULT_MI_K) -> NamedTable:
    """Per-dimension MI against style for every task, as one labeled table.

    Rows are latent dimension indices, columns task names. Tasks with fewer
    dimensions than the widest one get NaN in the extra rows.
    """
    if not datasets:
        raise ParameterError("mi_table needs at least one dataset")
    tasks = list(datasets)
    max_dim = max(ds.embeddings.shape[1] for ds in datasets.values())
    values = np.full((max_dim, len(tasks)), np.nan)
    for j, task in enumerate(tasks):
        ds = datasets[task]
        labels = np.asarray(ds.styles)
        for d in range(ds.embeddings.shape[1]):
            values[d, j] = mutual_info_cd(ds.embeddings[:, d], labels, k=k)
    return NamedTable(
        row_labels=[str(d) for d in range(max_dim)],
        col_labels=tasks,
        values=values,
        corner="dimension",
    )


@dataclass
class LinearProbe:
    """One fitted hyperplane: weights, intercept, and its in-sample APCC."""

    weights: np.ndarray
    intercept: float
    apcc: float
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.intercept


def ols_fit(X: np.ndarray, y: np.ndarray) -> LinearProbe:
    """Least-squares hyperplane y ≈ Xw + b scored by in-sample APCC.

    Solved through the SVD (rank-revealing); rank-deficient designs get the
    minimum-norm coefficient vector, so predictions stay well defined.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ParameterError("X must be 2-D")
    n, d = X.shape
    if len(y) != n:
        raise ParameterError(f"length mismatch: X has {n} rows, y has {len(y)}")
    if n <= d + 1:
        raise UnderdeterminedError(
            f"need more than d+1={d + 1} samples to fit, got {n}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ParameterError("non-finite values in regression inputs")
    aug = np.concatenate([X, np.ones((n, 1))], axis=1)
    coef, *_ = np.linalg.lstsq(aug, y, rcond=None)
    pred = aug @ coef
    value, degen = apcc_flagged(pred, y)
    return LinearProbe(weights=coef[:-1], intercept=float(coef[-1]),
                       apcc=value, degenerate=degen)


def apcc_flagged(pred, truth) -> tuple[float, bool]:
    """(|Pearson r|, degenerate) with zero-variance sides scored 0."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if len(p) != len(t):
        raise ParameterError("prediction and truth lengths differ")
    if len(p) < 3:
        raise ParameterError("APCC needs at least 3 samples")
    vp = float(np.var(p))
    vt = float(np.var(t))
    if vp < DEGENERATE_VARIANCE or vt < DEGENERATE_VARIANCE:
        return 0.0, True
    pm = p - p.mean()
    tm = t - t.mean()
    r = float(np.dot(pm, tm) / np.sqrt(np.dot(pm, pm) * np.dot(tm, tm)))
    return min(abs(r), 1.0), False


def apcc(pred, truth) -> float:
    """Absolute Pearson correlation between predictions and ground truth."""
    return apcc_flagged(pred, truth)[0]


def apcc_table(datasets: dict[str, JoinedDataset]) -> NamedTable:
    """In-sample APCC of the best hyperplane per (feature, task).

    Each cell fits ols_fit on the task's full latent matrix against one
    feature column; the score equals the regression's multiple correlation
    coefficient.
    """
    if not datasets:
        raise ParameterError("apcc_table needs at least one dataset")
    tasks = list(datasets)
    first = datasets[tasks[0]]
    names = list(first.feature_names)
    for task in tasks[1:]:
        if list(datasets[task].feature_names) != names:
            raise ParameterError(
                f"task {task!r} feature names differ from {tasks[0]!r}"
            )
    values = np.full((len(names), len(tasks)), np.nan)
    for j, task in enumerate(tasks):
        ds = datasets[task]
        for i in range(len(names)):
            probe = ols_fit(ds.embeddings, ds.features[:, i])
            values[i, j] = probe.apcc
    return NamedTable(row_labels=names, col_labels=tasks, values=values,
                      corner="feature")


def select_features(table: NamedTable, threshold: float = DEFAULT_APCC_THRESHOLD) -> list[str]:
    """Features whose APCC strictly exceeds threshold in every task column.

    Canonical (row) order is preserved. An empty selection is allowed but
    logged as a warning.
    """
    if not 0.0 <= threshold < 1.0:
        raise ParameterError(f"threshold must lie in [0, 1), got {threshold}")
    keep = []
    for i, name in enumerate(table.row_labels):
        row = table.values[i]
        if np.all(np.isfinite(row)) and bool(np.all(row > threshold)):
            keep.append(name)
    if not keep:
        log.warning("no features exceed APCC %.3f in every task", threshold)
    return keep


def apcc_null_quantile(n: int, d: int, q: float = 0.99) -> float:
    """Null-distribution APCC quantile for a d-regressor probe on n samples.

    Under independence the in-sample R² follows Beta(d/2, (n-d-1)/2), so the
    APCC quantile is the square root of that law's quantile. Used to flag
    low-confidence probe scores.
    """
    if n <= d + 1:
        raise UnderdeterminedError(f"need n > d+1, got n={n}, d={d}")
    if not 0.0 < q < 1.0:
        raise ParameterError("quantile must lie in (0, 1)")
    return float(np.sqrt(beta_dist.ppf(q, d / 2.0, (n - d - 1) / 2.0)))
