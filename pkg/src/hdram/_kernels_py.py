"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and return convention; ``hdram.kernels`` picks one at import time.
"""

import math

import numpy as np

PREFIX = 0
SUFFIX = 1
NULL_ITERATE = 1


def bifix_violations(flat, offsets):
    """Return ``(i, j, kind)`` for every ordered pair where sequence ``i`` is a
    prefix (kind 0) or suffix (kind 1) of a different sequence ``j``.

    ``flat`` holds all sequences back to back as integer symbol ids and
    ``offsets`` has ``n + 1`` entries delimiting them.
    """
    n = len(offsets) - 1
    seqs = [tuple(flat[offsets[k]:offsets[k + 1]]) for k in range(n)]
    out = []
    for i in range(n):
        a = seqs[i]
        la = len(a)
        for j in range(n):
            if i == j:
                continue
            b = seqs[j]
            lb = len(b)
            if la > lb:
                continue
            if b[:la] == a:
                out.append((i, j, PREFIX))
            if b[lb - la:] == a:
                out.append((i, j, SUFFIX))
    return out


def min_hamming(codes):
    """Minimum pairwise Hamming distance over the rows of ``codes``.

    Returns ``(distance, i, j)`` for the first pair (row-major over ``i < j``)
    attaining the minimum.
    """
    codes = np.asarray(codes, dtype=np.int64)
    n = codes.shape[0]
    best, bi, bj = codes.shape[1] + 1, -1, -1
    for i in range(n - 1):
        dist = np.count_nonzero(codes[i + 1:] != codes[i], axis=1)
        k = int(np.argmin(dist))
        if dist[k] < best:
            best, bi, bj = int(dist[k]), i, i + 1 + k
            if best == 0:
                break
    return best, bi, bj


def accumulate_outer(keys, values):
    """Sum of ``outer(keys[i], values[i])`` accumulated in ascending ``i``."""
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    trace = np.zeros((keys.shape[1], values.shape[1]))
    for k, v in zip(keys, values):
        trace += np.outer(k, v)
    return trace


def batch_decode(queries, projections, tau):
    """Cosine matched filter for many queries at once.

    Returns ``(best, top, margin, entropy_bits)`` arrays of length ``m``.
    A zero query row yields ``best = -1``.
    """
    queries = np.asarray(queries, dtype=np.float64)
    projections = np.asarray(projections, dtype=np.float64)
    qn = np.linalg.norm(queries, axis=1)
    pn = np.linalg.norm(projections, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = (queries @ projections.T) / np.outer(qn, pn)
    np.clip(scores, -1.0, 1.0, out=scores)
    m, n = scores.shape
    best = np.argmax(scores, axis=1).astype(np.int64)
    top = scores[np.arange(m), best]
    if n > 1:
        runner = np.partition(scores, n - 2, axis=1)[:, n - 2]
    else:
        runner = np.full(m, -1.0)
    margin = top - runner
    z = (scores - top[:, None]) / tau
    w = np.exp(z)
    total = w.sum(axis=1)
    p = w / total[:, None]
    entropy = (np.log(total) - (p * z).sum(axis=1)) / math.log(2.0)
    bad = qn == 0.0
    best[bad] = -1
    return best, top, margin, entropy


def power_iteration(gram, h0, eps, max_iters):
    """Normalized power iteration from the unit vector ``h0``.

    Returns ``(iterates, rayleigh, converged, steps, status)``; ``status`` is
    ``NULL_ITERATE`` when ``gram @ h`` vanished, else 0.
    """
    gram = np.asarray(gram, dtype=np.float64)
    h = np.asarray(h0, dtype=np.float64)
    iterates = [h]
    rayleigh = []
    converged = False
    steps = 0
    for _ in range(max_iters):
        y = gram @ h
        ny = math.sqrt(float(y @ y))
        if ny == 0.0:
            return np.array(iterates), np.array(rayleigh), False, steps, NULL_ITERATE
        rayleigh.append(float(h @ y))
        h_next = y / ny
        diff = h_next - h
        steps += 1
        iterates.append(h_next)
        h = h_next
        if math.sqrt(float(diff @ diff)) < eps:
            converged = True
            break
    rayleigh.append(float(h @ (gram @ h)))
    return np.array(iterates), np.array(rayleigh), converged, steps, 0
