"""Geometry and channel diagnostics for projections and decode runs.

RIP constants are sampling estimates (exact verification is NP-hard). All
randomized estimates are reproducible from their ``seed``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from hdram.despread import DecodeResult
from hdram.errors import ValidationError

METRIC_COLUMNS = (
    "dim", "n", "sigma", "collision_rate", "entropy_bits", "snr_db",
    "kappa_ht", "kappa_raw", "rip_delta", "seed",
)


@dataclass(frozen=True)
class RipEstimate:
    delta: float
    samples: int
    sparsity_k: int
    seed: int


@dataclass(frozen=True)
class JlReport:
    distortion: float
    pairs: int
    skipped: int


@dataclass(frozen=True)
class ConditionReport:
    kappa_ht: float
    kappa_raw: float
    ratio: float
    ht_rank_deficient: bool = False
    raw_rank_deficient: bool = False


@dataclass(frozen=True)
class SpectralReport:
    lambda1: float
    lambda2: float
    ramanujan_bound: float

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda2


@dataclass(frozen=True)
class ChannelMetrics:
    collision_rate: float
    decode_entropy_bits: float
    snr_db: float
    trials: int


@dataclass(frozen=True)
class CoverageReport:
    satisfied: bool
    empirical_coverage: float
    required_count: int
    ht_count: int
    theta: float
    queries: int


def _sq_norm(v) -> float:
    # correctly rounded sum of squares: any signed permutation of v (zeros
    # padded or not) gives the identical value, so isometries report exact 0
    return math.fsum(v * v)


def estimate_rip_delta(projection, dim_in: int, sparsity_k: int, samples: int, seed: int) -> RipEstimate:
    """Largest ``| |Px|^2 / |x|^2 - 1 |`` over random ``k``-sparse unit vectors.

    Supports are uniform ``k``-subsets of the ``dim_in`` input coordinates and
    the nonzeros are standard Gaussian.
    """
    P = np.asarray(projection, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != dim_in:
        raise ValidationError(f"projection must have {dim_in} columns, got shape {P.shape}")
    if not 1 <= sparsity_k <= dim_in:
        raise ValidationError(f"sparsity_k must lie in [1, {dim_in}], got {sparsity_k}")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        support = rng.choice(dim_in, size=sparsity_k, replace=False)
        x = rng.normal(size=sparsity_k)
        x /= np.linalg.norm(x)
        y = P[:, support] @ x
        ratio = _sq_norm(y) / _sq_norm(x)
        worst = max(worst, abs(ratio - 1.0))
    return RipEstimate(worst, samples, sparsity_k, seed)


def jl_distortion(points, projection) -> JlReport:
    """Max over point pairs of ``| |P(xi - xj)|^2 / |xi - xj|^2 - 1 |``.

    Coincident pairs are skipped and counted instead of dividing by zero.
    """
    X = np.asarray(points, dtype=np.float64)
    P = np.asarray(projection, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("need at least two points")
    Y = X @ P.T
    worst, pairs, skipped = 0.0, 0, 0
    for i in range(len(X) - 1):
        for j in range(i + 1, len(X)):
            nx = _sq_norm(X[j] - X[i])
            if nx == 0:
                skipped += 1
                continue
            pairs += 1
            worst = max(worst, abs(_sq_norm(Y[j] - Y[i]) / nx - 1.0))
    return JlReport(worst, pairs, skipped)


def condition_number(matrix) -> tuple[float, bool]:
    """``(sigma_max / sigma_min, rank_deficient)``; rank deficiency reports infinity."""
    A = np.asarray(matrix, dtype=np.float64)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return math.inf, True
    tol = s[0] * max(A.shape) * np.finfo(np.float64).eps
    if s.size < A.shape[1] or s[-1] <= tol:
        return math.inf, True
    return float(s[0] / s[-1]), False


def condition_numbers(ht_matrix, raw_matrix) -> ConditionReport:
    """Compare the conditioning of hypertoken and raw projection matrices.

    Both arguments hold one column per projected vector.
    """
    k_ht, d_ht = condition_number(ht_matrix)
    k_raw, d_raw = condition_number(raw_matrix)
    if math.isinf(k_ht) and math.isinf(k_raw):
        ratio = math.nan
    elif math.isinf(k_raw):
        ratio = 0.0
    else:
        ratio = k_ht / k_raw
    return ConditionReport(k_ht, k_raw, ratio, d_ht, d_raw)


def knn_graph(vectors, degree_k: int) -> np.ndarray:
    """Symmetric 0/1 adjacency linking each vector to its ``k`` highest-cosine neighbours.

    Ties go to the lower index; an edge exists if either endpoint chose it.
    """
    V = np.asarray(vectors, dtype=np.float64)
    n = V.shape[0]
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        raise ValidationError("zero vector in spectral-gap input")
    U = V / norms[:, None]
    C = U @ U.T
    np.fill_diagonal(C, -np.inf)
    A = np.zeros((n, n))
    for i in range(n):
        A[i, np.argsort(-C[i], kind="stable")[:degree_k]] = 1.0
    return np.maximum(A, A.T)


def spectral_gap(vectors, degree_k: int) -> SpectralReport:
    """Second-largest adjacency eigenvalue magnitude of the k-NN cosine graph.

    ``ramanujan_bound`` is ``2 sqrt(k - 1)``.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if degree_k < 1:
        raise ValidationError("degree_k must be >= 1")
    if degree_k >= len(V):
        raise ValidationError(f"degree_k={degree_k} needs at least {degree_k + 1} vectors, got {len(V)}")
    ev = np.sort(np.abs(np.linalg.eigvalsh(knn_graph(V, degree_k))))[::-1]
    return SpectralReport(float(ev[0]), float(ev[1]), 2.0 * math.sqrt(degree_k - 1))


def snr_db(mean_margin: float, noise_sigma: float) -> float:
    """``20 log10(mean margin / noise std)``; ``+inf`` for a noiseless channel."""
    if noise_sigma == 0:
        return math.inf
    if mean_margin <= 0:
        return -math.inf
    return 20.0 * math.log10(mean_margin / noise_sigma)


def channel_metrics_from_arrays(best, truth, entropies, margins, noise_sigma: float) -> ChannelMetrics:
    best = np.asarray(best)
    truth = np.asarray(truth)
    if best.size == 0 or best.shape != truth.shape:
        raise ValidationError("need at least one decode with matching ground truth")
    return ChannelMetrics(
        collision_rate=float(np.mean(best != truth)),
        decode_entropy_bits=float(np.mean(entropies)),
        snr_db=snr_db(float(np.mean(margins)), noise_sigma),
        trials=int(best.size),
    )


def channel_metrics(runs: Sequence[DecodeResult], truth: Sequence[int], noise_sigma: float) -> ChannelMetrics:
    """Collision rate, mean decode entropy (bits) and margin SNR over decode runs."""
    if len(runs) != len(truth):
        raise ValidationError(f"{len(runs)} runs but {len(truth)} ground-truth labels")
    return channel_metrics_from_arrays(
        [r.best_index for r in runs],
        list(truth),
        [r.entropy_bits for r in runs],
        [r.margin for r in runs],
        noise_sigma,
    )


def coverage_required(c_const: float, delta: float) -> int:
    """Smallest hypertoken count with ``|HT| >= c log(1/delta)``."""
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if c_const <= 0:
        raise ValidationError("c_const must be > 0")
    return max(0, math.ceil(c_const * math.log(1.0 / delta) - 1e-12))


def coverage_estimate(ht_projections, c_const: float, delta: float, theta: float, queries: int = 10_000, seed: int = 0) -> CoverageReport:
    """Check the count bound and measure empirical coverage.

    Coverage is the fraction of uniformly random unit queries whose largest
    absolute cosine against the hypertoken projections exceeds ``theta``.
    ``c_const`` and ``theta`` have no canonical values and must be supplied.
    """
    required = coverage_required(c_const, delta)
    H = np.asarray(ht_projections, dtype=np.float64)
    if H.size == 0:
        return CoverageReport(False, 0.0, required, 0, theta, queries)
    if H.ndim != 2:
        raise ValidationError("hypertoken projections must be an (n, dim) array")
    count = H.shape[0]
    Hn = H / np.linalg.norm(H, axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(queries, H.shape[1]))
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    covered = np.max(np.abs(Q @ Hn.T), axis=1) > theta
    return CoverageReport(count >= required, float(np.mean(covered)), required, count, theta, queries)
