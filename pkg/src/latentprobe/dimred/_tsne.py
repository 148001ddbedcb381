"""Exact t-SNE with deterministic PCA initialization.

Dense O(N^2) affinities and gradients: fine for the corpus sizes this
toolkit targets, and free of the tree-approximation nondeterminism.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

N_ITER = 1000
EARLY_EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
LEARNING_RATE = 200.0
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
ENTROPY_TOL = 1e-5
BISECTION_ITERS = 50
P_FLOOR = 1e-12
KL_EVERY = 50


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(D2, 0.0)
    return np.maximum(D2, 0.0)


def _conditional_probs(D2: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row Gaussian affinities with bandwidths bisected to the target.

    Each row's precision beta is adjusted until the distribution's Shannon
    entropy hits log(perplexity) within tolerance.
    """
    n = len(D2)
    off = ~np.eye(n, dtype=bool)
    D = D2[off].reshape(n, n - 1)
    target = np.log(perplexity)
    beta = np.ones(n)
    beta_lo = np.full(n, -np.inf)
    beta_hi = np.full(n, np.inf)
    P = np.empty_like(D)
    for _ in range(BISECTION_ITERS):
        np.exp(-beta[:, None] * D, out=P)
        sum_p = np.maximum(P.sum(axis=1), 1e-300)
        # entropy of the normalized row in nats
        H = np.log(sum_p) + beta * np.einsum("ij,ij->i", D, P) / sum_p
        diff = H - target
        if np.all(np.abs(diff) < ENTROPY_TOL):
            break
        hot = diff > 0  # entropy too high: tighten the kernel
        beta_lo[hot] = beta[hot]
        beta_hi[~hot] = beta[~hot]
        beta[hot] = np.where(
            np.isinf(beta_hi[hot]), beta[hot] * 2.0,
            0.5 * (beta[hot] + beta_hi[hot]),
        )
        cold = ~hot
        beta[cold] = np.where(
            np.isneginf(beta_lo[cold]), beta[cold] / 2.0,
            0.5 * (beta[cold] + beta_lo[cold]),
        )
    P = P / np.maximum(P.sum(axis=1, keepdims=True), 1e-300)
    full = np.zeros((n, n))
    full[off] = P.ravel()
    return full


def _kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    W = 1.0 / (1.0 + _pairwise_sq_dists(Y))
    np.fill_diagonal(W, 0.0)
    Q = np.maximum(W / W.sum(), P_FLOOR)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne2(X: np.ndarray, perplexity: float = 30.0, seed: int = 0):
    """Embeds X into 2-D by exact t-SNE; deterministic for fixed inputs.

    Initialization comes from the PCA projection scaled down to sigma 1e-4,
    so reruns with any seed match bit for bit. The KL divergence against the
    unexaggerated affinities is recorded every 50 iterations.
    """
    from . import Reduced2D, pca2, standardize

    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if perplexity <= 0:
        raise ParameterError("perplexity must be positive")
    if 3.0 * perplexity >= n:
        raise ParameterError(
            f"perplexity {perplexity} infeasible for {n} points (need 3*perplexity < N)"
        )
    Xs = standardize(X)
    P = _conditional_probs(_pairwise_sq_dists(Xs), perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)

    Y = pca2(X).coords.copy()
    spread = Y[:, 0].std()
    if spread > 0:
        Y = Y / spread * 1e-4
    else:
        rng = np.random.default_rng(seed)
        Y = rng.standard_normal((n, 2)) * 1e-4

    update = np.zeros_like(Y)
    trace: list[tuple[int, float]] = [(0, _kl_divergence(P, Y))]
    for it in range(N_ITER):
        Pc = P * EARLY_EXAGGERATION if it < EXAGGERATION_ITERS else P
        momentum = MOMENTUM_EARLY if it < EXAGGERATION_ITERS else MOMENTUM_LATE
        W = 1.0 / (1.0 + _pairwise_sq_dists(Y))
        np.fill_diagonal(W, 0.0)
        Q = np.maximum(W / W.sum(), P_FLOOR)
        PQW = (Pc - Q) * W
        grad = 4.0 * ((np.diag(PQW.sum(axis=1)) - PQW) @ Y)
        update = momentum * update - LEARNING_RATE * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if (it + 1) % KL_EVERY == 0:
            trace.append((it + 1, _kl_divergence(P, Y)))
    if trace[-1][0] != N_ITER:
        trace.append((N_ITER, _kl_divergence(P, Y)))
    return Reduced2D(
        coords=Y,
        reducer="tsne",
        seed=seed,
        params={
            "perplexity": float(perplexity),
            "n_iter": N_ITER,
            "learning_rate": LEARNING_RATE,
            "early_exaggeration": EARLY_EXAGGERATION,
        },
        diagnostics={"kl_trace": trace},
    )
