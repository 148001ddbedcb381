"""Core UMAP: fuzzy k-NN graph, spectral layout, negative-sampling SGD.

Exact neighbor search and a sequential compiled optimizer keep the output a
deterministic function of (X, params, seed).
"""

from __future__ import annotations

import logging

import numba
import numpy as np
from scipy import sparse
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackError, eigsh
from scipy.spatial import cKDTree

from ..errors import ParameterError

log = logging.getLogger(__name__)

N_EPOCHS = 500
NEGATIVE_SAMPLE_RATE = 5
INITIAL_ALPHA = 1.0
REPULSION_STRENGTH = 1.0
SMOOTH_K_TOL = 1e-5
SMOOTH_K_ITERS = 64
MIN_K_DIST_SCALE = 1e-3
SPREAD = 1.0
INIT_SCALE = 10.0


def _smooth_knn_dist(dists: np.ndarray, k: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (sigma, rho) calibrating the fuzzy neighborhood kernel.

    rho is the distance to the nearest distinct neighbor; sigma solves
    sum_j exp(-max(0, d_ij - rho)/sigma) = log2(k) by bisection.
    """
    n = len(dists)
    target = np.log2(k)
    rho = np.zeros(n)
    sigma = np.zeros(n)
    mean_all = float(np.mean(dists))
    for i in range(n):
        row = dists[i]
        nonzero = row[row > 0.0]
        if len(nonzero) >= 1:
            rho[i] = float(nonzero[0])
        lo, hi, mid = 0.0, np.inf, 1.0
        for _ in range(SMOOTH_K_ITERS):
            psum = 0.0
            for j in range(1, len(row)):
                d = row[j] - rho[i]
                psum += np.exp(-d / mid) if d > 0.0 else 1.0
            if abs(psum - target) < SMOOTH_K_TOL:
                break
            if psum > target:
                hi = mid
                mid = 0.5 * (lo + hi)
            else:
                lo = mid
                mid = mid * 2.0 if np.isinf(hi) else 0.5 * (lo + hi)
        sigma[i] = mid
        floor = MIN_K_DIST_SCALE * (float(np.mean(row)) if rho[i] > 0.0 else mean_all)
        sigma[i] = max(sigma[i], floor)
    return sigma, rho


def _fuzzy_graph(Xs: np.ndarray, n_neighbors: int) -> sparse.csr_matrix:
    """Symmetric fuzzy membership graph from exact k-nearest neighbors."""
    n = len(Xs)
    knn_dists, knn_idx = cKDTree(Xs).query(Xs, k=n_neighbors)
    sigma, rho = _smooth_knn_dist(knn_dists, float(n_neighbors))
    rows = np.repeat(np.arange(n), n_neighbors)
    cols = knn_idx.ravel()
    vals = np.empty(n * n_neighbors)
    for i in range(n):
        for j in range(n_neighbors):
            if knn_idx[i, j] == i:
                v = 0.0
            elif knn_dists[i, j] - rho[i] <= 0.0 or sigma[i] == 0.0:
                v = 1.0
            else:
                v = float(np.exp(-(knn_dists[i, j] - rho[i]) / sigma[i]))
            vals[i * n_neighbors + j] = v
    W = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    W.eliminate_zeros()
    # probabilistic union of the directed memberships
    T = sparse.csr_matrix(W + W.T - W.multiply(W.T))
    T.eliminate_zeros()
    return T


def fit_ab(min_dist: float, spread: float = SPREAD) -> tuple[float, float]:
    """Curve parameters (a, b) so 1/(1+a d^2b) tracks the min_dist falloff."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xv = np.linspace(0.0, spread * 3.0, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def _spectral_coords(graph: sparse.csr_matrix) -> np.ndarray:
    """Leading nontrivial eigenvectors of the normalized adjacency."""
    n = graph.shape[0]
    deg = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = sparse.diags(1.0 / np.sqrt(np.maximum(deg, 1e-12)))
    M = inv_sqrt @ graph @ inv_sqrt
    evals, evecs = eigsh(
        M, k=3, which="LA", v0=np.ones(n), tol=1e-4, maxiter=n * 50
    )
    order = np.argsort(evals)[::-1]
    return evecs[:, [order[1], order[2]]]


def _initial_coords(graph: sparse.csr_matrix, X: np.ndarray, seed: int) -> np.ndarray:
    """Spectral initialization, laid out per connected component.

    Disconnected components are embedded separately and offset along x so
    they do not overlap; ARPACK failures fall back to the PCA plane.
    """
    from . import pca2

    n = graph.shape[0]
    n_comp, labels = connected_components(graph, directed=False)
    coords = np.zeros((n, 2))
    if n_comp > 1:
        log.warning("kNN graph has %d connected components; embedding each "
                    "separately with offsets", n_comp)
    for c in range(n_comp):
        idx = np.nonzero(labels == c)[0]
        part = np.zeros((len(idx), 2))
        if len(idx) >= 5:
            try:
                part = _spectral_coords(graph[idx][:, idx])
            except (ArpackError, RuntimeError):
                log.warning("spectral initialization failed for a component "
                            "of %d points; using PCA coordinates", len(idx))
                if X.shape[1] >= 2:
                    part = pca2(X[idx]).coords
        peak = np.abs(part).max()
        if peak > 0:
            part = part / peak
        part[:, 0] += 3.0 * c
        coords[idx] = part
    peak = np.abs(coords).max()
    if peak > 0:
        coords = coords * (INIT_SCALE / peak)
    rng = np.random.default_rng(seed)
    return coords + rng.normal(scale=1e-4, size=coords.shape)


@numba.njit(cache=True)
def _sgd_layout(emb, head, tail, epochs_per_sample, a, b, gamma,
                n_epochs, initial_alpha, neg_rate, rng_state):
    n_vertices = emb.shape[0]
    n_edges = epochs_per_sample.shape[0]
    epochs_per_negative = epochs_per_sample / neg_rate
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()
    state = rng_state
    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            dx = emb[i, 0] - emb[j, 0]
            dy = emb[i, 1] - emb[j, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2 ** b + 1.0)
                gx = coeff * dx
                gy = coeff * dy
                gx = 4.0 if gx > 4.0 else (-4.0 if gx < -4.0 else gx)
                gy = 4.0 if gy > 4.0 else (-4.0 if gy < -4.0 else gy)
                emb[i, 0] += gx * alpha
                emb[i, 1] += gy * alpha
                emb[j, 0] -= gx * alpha
                emb[j, 1] -= gy * alpha
            next_sample[e] += epochs_per_sample[e]
            n_neg = int((epoch - next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                state ^= state << np.uint64(13)
                state ^= state >> np.uint64(7)
                state ^= state << np.uint64(17)
                k = int(state % np.uint64(n_vertices))
                if k == i:
                    continue
                dx = emb[i, 0] - emb[k, 0]
                dy = emb[i, 1] - emb[k, 1]
                d2 = dx * dx + dy * dy
                if d2 > 0.0:
                    coeff = (2.0 * gamma * b) / ((0.001 + d2) * (a * d2 ** b + 1.0))
                    gx = coeff * dx
                    gy = coeff * dy
                    gx = 4.0 if gx > 4.0 else (-4.0 if gx < -4.0 else gx)
                    gy = 4.0 if gy > 4.0 else (-4.0 if gy < -4.0 else gy)
                else:
                    gx = 4.0
                    gy = 4.0
                emb[i, 0] += gx * alpha
                emb[i, 1] += gy * alpha
            next_negative[e] += n_neg * epochs_per_negative[e]
    return emb


def umap2(X: np.ndarray, n_neighbors: int = 15, min_dist: float = 0.1,
          seed: int = 0):
    """Embeds X into 2-D with the core UMAP procedure.

    Fuzzy graph from exact kNN on standardized data, spectral initialization,
    then 500 epochs of seeded negative-sampling SGD over the surviving edges.
    """
    from . import Reduced2D, standardize

    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n_neighbors < 2:
        raise ParameterError("n_neighbors must be at least 2")
    if n_neighbors >= n:
        raise ParameterError(f"n_neighbors {n_neighbors} must be below N={n}")
    if min_dist < 0:
        raise ParameterError("min_dist must be non-negative")
    Xs = standardize(X)
    graph = _fuzzy_graph(Xs, n_neighbors)
    coords = _initial_coords(graph, X, seed)

    a, b = fit_ab(min_dist)
    co = graph.tocoo()
    w = co.data.copy()
    keep = w >= w.max() / N_EPOCHS
    head = co.row[keep].astype(np.int64)
    tail = co.col[keep].astype(np.int64)
    w = w[keep]
    epochs_per_sample = (w.max() / w).astype(np.float64)

    state = np.uint64((seed * 0x9E3779B97F4A7C15 + 0xD1B54A32D192ED03) % (1 << 64))
    if state == 0:
        state = np.uint64(0x853C49E6748FEA9B)
    coords = _sgd_layout(
        coords, head, tail, epochs_per_sample, a, b,
        float(REPULSION_STRENGTH), N_EPOCHS, float(INITIAL_ALPHA),
        float(NEGATIVE_SAMPLE_RATE), state,
    )
    return Reduced2D(
        coords=coords,
        reducer="umap",
        seed=seed,
        params={
            "n_neighbors": int(n_neighbors),
            "min_dist": float(min_dist),
            "n_epochs": N_EPOCHS,
            "negative_sample_rate": NEGATIVE_SAMPLE_RATE,
            "a": a,
            "b": b,
        },
    )
