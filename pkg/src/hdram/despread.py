"""Recovering symbolic indices from latent queries.

Decoding is a cosine matched filter against candidate projections. A read
vector can additionally be refined by power iteration (the simplest Krylov
sequence) on the Gram operator of the candidates, and the coherence of the
iterates with the starting query can be fitted for a decay horizon.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from hdram import kernels
from hdram.errors import (
    DegenerateInputError,
    DomainError,
    InfiniteHorizonError,
    NullIterateError,
    ValidationError,
)

DEFAULT_TAU = 1.0
DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITERS = 100
# a single candidate is compared against the floor of the cosine range
SOLE_CANDIDATE_RUNNER_UP = -1.0


@dataclass(frozen=True, eq=False)
class DecodeResult:
    best_index: int
    scores: np.ndarray
    distribution: np.ndarray
    margin: float
    tau: float
    coherence_trace: tuple[float, ...] = ()

    @property
    def entropy_bits(self) -> float:
        return entropy_bits(self.distribution)


@dataclass(frozen=True, eq=False)
class KrylovTrajectory:
    """Unit-norm power iterates (starting query first) and their diagnostics."""

    iterates: np.ndarray
    rayleigh: np.ndarray
    coherence: np.ndarray
    converged: bool
    steps: int

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def _unit(v, what="query") -> tuple[np.ndarray, float]:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{what} must be a 1-D vector")
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not math.isfinite(norm):
        raise DegenerateInputError(f"{what} has zero or non-finite norm")
    return v / norm, norm


def softmax(scores, tau: float = DEFAULT_TAU) -> np.ndarray:
    if tau <= 0:
        raise ValidationError(f"temperature must be > 0, got {tau}")
    z = np.asarray(scores, dtype=np.float64) / tau
    w = np.exp(z - z.max())
    return w / w.sum()


def entropy_bits(p) -> float:
    """Shannon entropy in bits; zero-probability entries contribute nothing."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(max(0.0, -(nz * np.log2(nz)).sum()))


def cosine_scores(query, projections) -> np.ndarray:
    """Cosines of ``query`` against each row of ``projections``, clipped to [-1, 1]."""
    q, _ = _unit(query)
    P = np.asarray(projections, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValidationError("projections must be a non-empty (n, dim) array")
    if P.shape[1] != q.shape[0]:
        raise ValidationError(f"query dim {q.shape[0]} != projection dim {P.shape[1]}")
    norms = np.linalg.norm(P, axis=1)
    if np.any(norms == 0):
        raise ValidationError(f"projection rows {np.flatnonzero(norms == 0).tolist()} are zero")
    return np.clip((P @ q) / norms, -1.0, 1.0)


def matched_filter_decode(query, projections, tau: float = DEFAULT_TAU) -> DecodeResult:
    """Pick the projection with the highest cosine to ``query``.

    Ties resolve to the lowest index. The margin is the top score minus the
    runner-up (minus -1 when there is a single candidate), and
    ``distribution`` is ``softmax(scores / tau)``.

    Raises:
        DegenerateInputError: ``query`` is zero.
        ValidationError: ``projections`` is empty or ``tau <= 0``.
    """
    if tau <= 0:
        raise ValidationError(f"temperature must be > 0, got {tau}")
    scores = cosine_scores(query, projections)
    best = int(np.argmax(scores))
    if len(scores) > 1:
        runner = float(np.max(np.delete(scores, best)))
    else:
        runner = SOLE_CANDIDATE_RUNNER_UP
    return DecodeResult(
        best_index=best,
        scores=scores,
        distribution=softmax(scores, tau),
        margin=float(scores[best]) - runner,
        tau=tau,
    )


def gram_operator(projections) -> np.ndarray:
    """``sum_i p_i p_i^T`` over the rows of ``projections`` (a ``dim x dim`` PSD matrix)."""
    P = np.asarray(projections, dtype=np.float64)
    return P.T @ P


def coherence(h_t, h_0) -> float:
    """Cosine between an iterate and the initial query."""
    a, _ = _unit(h_t, "h_t")
    b, _ = _unit(h_0, "h_0")
    return float(np.clip(a @ b, -1.0, 1.0))


def krylov_refine(query, gram, eps: float = DEFAULT_EPS, max_iters: int = DEFAULT_MAX_ITERS) -> KrylovTrajectory:
    """Power iteration ``h <- A h / |A h|`` from the normalized query.

    Stops once successive iterates differ by less than ``eps`` in norm, or
    after ``max_iters`` steps. The Rayleigh quotient and coherence with the
    query are recorded for every iterate, the starting one included.

    Raises:
        NullIterateError: ``A h`` vanished (query orthogonal to the range).
    """
    if eps <= 0:
        raise ValidationError("eps must be > 0")
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    A = np.asarray(gram, dtype=np.float64)
    h0, _ = _unit(query)
    if A.shape != (h0.shape[0], h0.shape[0]):
        raise ValidationError(f"operator shape {A.shape} does not match query dim {h0.shape[0]}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > 1e-10 * scale:
        raise ValidationError("operator must be symmetric")
    iterates, rayleigh, converged, steps, status = kernels.power_iteration(A, h0, eps, max_iters)
    if status == kernels.NULL_ITERATE:
        raise NullIterateError(f"operator annihilated the iterate at step {steps}")
    coh = np.clip(iterates @ h0, -1.0, 1.0)
    return KrylovTrajectory(iterates, rayleigh, coh, bool(converged), int(steps))


def refined_decode(query, projections, tau: float = DEFAULT_TAU, iters: int = 1) -> DecodeResult:
    """Matched filter applied after ``iters`` power steps on the candidates' Gram operator.

    Steps that would null the iterate end refinement early; the coherence
    trace of the steps actually taken is attached to the result.
    """
    traj = krylov_refine(query, gram_operator(projections), eps=1e-15, max_iters=iters)
    res = matched_filter_decode(traj.final, projections, tau)
    return DecodeResult(res.best_index, res.scores, res.distribution, res.margin, tau, tuple(traj.coherence))


def ehrenfest_time(coherence_trace: Sequence[float], eps: float) -> float:
    """Horizon ``-log(eps) / rate`` for a coherence trace decaying like ``exp(-rate * t)``.

    ``rate`` is the least-squares slope of ``-log(coherence_t)`` against
    ``t = 0, 1, ...`` with the fit forced through the origin.

    Raises:
        DomainError: fewer than three samples, a value outside (0, 1], or
            ``eps`` outside (0, 1).
        InfiniteHorizonError: the fitted rate is <= 1e-12.
    """
    c = np.asarray(coherence_trace, dtype=np.float64)
    if c.ndim != 1 or len(c) < 3:
        raise DomainError("coherence trace needs at least 3 samples")
    if np.any(~np.isfinite(c)) or np.any(c <= 0) or np.any(c > 1):
        raise DomainError("coherence values must lie in (0, 1]")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    t = np.arange(len(c), dtype=np.float64)
    rate = -float(t @ np.log(c)) / float(t @ t)
    if rate <= 1e-12:
        raise InfiniteHorizonError(f"no coherence decay (fitted rate {rate:.3g})")
    return -math.log(eps) / rate


def noisy_refinement_trace(dim: int, sigma: float, steps: int, seed: int, walkers: int = 32) -> np.ndarray:
    """Mean coherence with the start over ``walkers`` noisy refinement runs.

    Each run starts from a random unit state and repeatedly applies
    ``h <- normalize(h + sigma * xi)`` with ``xi`` having i.i.d.
    ``N(0, 1/dim)`` coordinates, so ``sigma`` is the per-step noise norm
    relative to the unit state. Returns ``steps + 1`` values, the first 1.0.
    """
    if steps < 1 or walkers < 1:
        raise ValidationError("steps and walkers must be >= 1")
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(walkers, dim))
    h /= np.linalg.norm(h, axis=1, keepdims=True)
    h0 = h.copy()
    trace = [1.0]
    for _ in range(steps):
        h = h + sigma * rng.normal(0.0, 1.0 / math.sqrt(dim), size=h.shape)
        h /= np.linalg.norm(h, axis=1, keepdims=True)
        trace.append(float(np.mean(np.sum(h * h0, axis=1))))
    return np.array(trace)
