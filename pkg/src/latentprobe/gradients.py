"""Feature-gradient overlays for reduced 2-D spaces.

Each selected feature is probed with a hyperplane on the 2-D coordinates;
its weight vector points in the feature's direction of steepest increase,
and the probe APCC says how linear the trend actually is.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dimred import Reduced2D, run_reducer
from .embeddings import JoinedDataset
from .errors import ParameterError, ValidationError
from .features import FeatureTable
from .stats import apcc_null_quantile, ols_fit
from .tables import NamedTable

log = logging.getLogger(__name__)

LOW_CONFIDENCE_QUANTILE = 0.99


@dataclass
class GradientArrow:
    """One feature's fitted 2-D gradient.

    gradient keeps the raw OLS orientation (rotations of the plane rotate
    it); direction is the unit vector sign-normalized so its first nonzero
    component is positive, for comparison-stable exports.
    """

    feature: str
    gradient: np.ndarray
    direction: np.ndarray
    apcc: float
    low_confidence: bool


@dataclass
class GradientField:
    """All arrows for one (task, reducer) pair."""

    task: str
    reducer: str
    arrows: list[GradientArrow] = field(default_factory=list)

    def features(self) -> list[str]:
        return [a.feature for a in self.arrows]

    def __len__(self) -> int:
        return len(self.arrows)


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    for comp in v:
        if comp != 0.0:
            return -v if comp < 0.0 else v
    return v


def gradient_field(reduced: Reduced2D, feats: FeatureTable,
                   selected: list[str], task: str = "") -> GradientField:
    """Fits one hyperplane per selected feature on the 2-D coordinates.

    Rows align by utterance id when the reduction carries ids, positionally
    otherwise. Zero-variance features are skipped with a warning; arrows
    whose APCC sits below the 99th percentile of the independence null are
    flagged low-confidence.
    """
    if not selected:
        raise ParameterError("selected feature list is empty")
    coords = reduced.coords
    if reduced.ids is not None:
        index = {u: i for i, u in enumerate(feats.ids)}
        missing = [u for u in reduced.ids if u not in index]
        if missing:
            raise ValidationError(
                f"features missing for reduced ids {missing[:5]}"
            )
        fvals = feats.values[[index[u] for u in reduced.ids]]
    else:
        if len(feats.ids) != len(coords):
            raise ValidationError(
                f"cannot align {len(coords)} coordinates with "
                f"{len(feats.ids)} feature rows without ids"
            )
        fvals = feats.values

    null_q = apcc_null_quantile(len(coords), 2, LOW_CONFIDENCE_QUANTILE)
    arrows: list[GradientArrow] = []
    for name in selected:
        if name not in feats.names:
            raise ParameterError(f"unknown feature {name!r}")
        col = fvals[:, feats.names.index(name)]
        use = np.isfinite(col)
        if int(use.sum()) < 4:
            log.warning("feature %s: too few finite rows, skipped", name)
            continue
        if float(np.var(col[use])) < 1e-24:
            log.warning("feature %s has zero variance, skipped", name)
            continue
        probe = ols_fit(coords[use], col[use])
        grad = probe.weights.copy()
        norm = float(np.linalg.norm(grad))
        direction = _sign_normalize(grad / norm) if norm > 1e-12 else np.zeros(2)
        arrows.append(GradientArrow(
            feature=name,
            gradient=grad,
            direction=direction,
            apcc=probe.apcc,
            low_confidence=probe.apcc < null_q,
        ))
    return GradientField(task=task, reducer=reduced.reducer, arrows=arrows)


def apcc_average_table(datasets: dict[str, JoinedDataset], reducers: list[str],
                       selected: list[str],
                       reduced_cache: dict[tuple[str, str], Reduced2D] | None = None,
                       seed: int = 0, perplexity: float = 30.0,
                       n_neighbors: int = 15, min_dist: float = 0.1) -> NamedTable:
    """Mean 2-D probe APCC over selected features, per (task, reducer).

    Tasks are rows and reducers columns. A prebuilt reduction cache keyed by
    (task, reducer) avoids recomputing embeddings the caller already has.
    """
    if not datasets:
        raise ParameterError("apcc_average_table needs at least one dataset")
    if not reducers:
        raise ParameterError("apcc_average_table needs at least one reducer")
    if not selected:
        raise ParameterError("selected feature list is empty")
    tasks = list(datasets)
    values = np.full((len(tasks), len(reducers)), np.nan)
    for i, task in enumerate(tasks):
        ds = datasets[task]
        feats = FeatureTable(
            ids=list(ds.utterance_ids),
            styles=list(ds.styles),
            names=list(ds.feature_names),
            values=ds.features,
        )
        for j, reducer in enumerate(reducers):
            key = (task, reducer)
            if reduced_cache is not None and key in reduced_cache:
                red = reduced_cache[key]
            else:
                red = run_reducer(
                    reducer, ds.embeddings, seed=seed, perplexity=perplexity,
                    n_neighbors=n_neighbors, min_dist=min_dist,
                    ids=list(ds.utterance_ids),
                )
                if reduced_cache is not None:
                    reduced_cache[key] = red
            fld = gradient_field(red, feats, selected, task=task)
            if len(fld):
                values[i, j] = float(np.mean([a.apcc for a in fld.arrows]))
    return NamedTable(row_labels=tasks, col_labels=list(reducers), values=values,
                      corner="task")
