"""Deterministic 2-D reductions of latent spaces: PCA, t-SNE, UMAP.

Every reducer standardizes its input, is a pure function of (X, params,
seed), and reports its provenance inside the returned Reduced2D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError

__all__ = [
    "Reduced2D",
    "standardize",
    "pca2",
    "tsne2",
    "umap2",
]


@dataclass
class Reduced2D:
    """2-D coordinates with full provenance of how they were produced."""

    coords: np.ndarray  # N x 2
    reducer: str
    seed: int
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    ids: list[str] | None = None  # source utterance ids, row-aligned

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ParameterError(f"coords must be N x 2, got {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ParameterError(f"{self.reducer}: non-finite coordinates")
        if self.ids is not None and len(self.ids) != len(self.coords):
            raise ParameterError(f"{self.reducer}: ids do not match coordinate rows")


def standardize(X: np.ndarray) -> np.ndarray:
    """Columns centered to zero mean, unit variance where variance exists."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("standardize expects a 2-D matrix")
    if len(X) < 2:
        raise ParameterError("standardize needs at least 2 rows")
    centered = X - X.mean(axis=0)
    std = centered.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return centered / scale


def pca2(X: np.ndarray, seed: int = 0) -> Reduced2D:
    """Projection onto the top two principal axes of the standardized data.

    Component signs follow a fixed convention (the largest-magnitude loading
    of each axis is positive) so output is reproducible without a seed.
    Loadings and explained-variance shares land in diagnostics.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ParameterError("pca2 expects an N x d matrix with d >= 2")
    if len(X) < 3:
        raise ParameterError("pca2 needs at least 3 rows")
    Xs = standardize(X)
    cov = (Xs.T @ Xs) / len(Xs)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:2]
    components = evecs[:, order]
    for j in range(2):
        pivot = np.argmax(np.abs(components[:, j]))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    coords = Xs @ components
    total = float(np.sum(np.maximum(evals, 0.0)))
    ratios = [float(max(evals[i], 0.0) / total) if total > 0 else 0.0 for i in order]
    return Reduced2D(
        coords=coords,
        reducer="pca",
        seed=seed,
        params={},
        diagnostics={
            "loadings": components,
            "explained_variance_ratio": ratios,
        },
    )


from ._tsne import tsne2  # noqa: E402
from ._umap import umap2  # noqa: E402

REDUCERS = ("pca", "tsne", "umap")


def run_reducer(name: str, X: np.ndarray, seed: int = 0,
                perplexity: float = 30.0, n_neighbors: int = 15,
                min_dist: float = 0.1, ids: list[str] | None = None) -> Reduced2D:
    """Dispatches to one reducer by name, attaching row ids for provenance."""
    if name == "pca":
        red = pca2(X, seed=seed)
    elif name == "tsne":
        red = tsne2(X, perplexity=perplexity, seed=seed)
    elif name == "umap":
        red = umap2(X, n_neighbors=n_neighbors, min_dist=min_dist, seed=seed)
    else:
        raise ParameterError(f"unknown reducer {name!r}; choose from {REDUCERS}")
    if ids is not None:
        red.ids = list(ids)
        if len(red.ids) != len(red.coords):
            raise ParameterError("ids do not match coordinate rows")
    return red

