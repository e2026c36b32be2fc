"""A transformer latent space modelled as a spread-spectrum channel.

Tokens get seeded Gaussian embeddings. A codeword is projected by rotating
the embedding of its ``p``-th token with the ``p``-th power of a seeded
orthogonal phase operator and superposing the rotated terms. Latent vectors
are plain 1-D ``float64`` numpy arrays throughout the package.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from hdram.codebook import Codebook, Codeword
from hdram.errors import TokenLookupError, ValidationError

ORTHOGONALITY_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Token to latent-vector map, reproducible from ``(vocab, dim, seed)``."""

    dim: int
    tokens: tuple[str, ...]
    matrix: np.ndarray
    seed: int
    sigma_init: float
    _index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if self.matrix.shape != (len(self.tokens), self.dim):
            raise ValidationError(
                f"matrix shape {self.matrix.shape} does not match {len(self.tokens)} x {self.dim}"
            )
        if not self._index:
            self._index.update((t, i) for i, t in enumerate(self.tokens))

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def __getitem__(self, token) -> np.ndarray:
        return self.matrix[self.row(token)]

    def row(self, token) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise TokenLookupError(f"token {token!r} not in embedding table") from None

    def rows(self, tokens: Sequence[str]) -> np.ndarray:
        """Stacked embeddings of ``tokens`` as an ``(len(tokens), dim)`` array."""
        return self.matrix[[self.row(t) for t in tokens]]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self.matrix[i] for t, i in self._index.items()}


def _check_vocab(vocab, dim):
    vocab = tuple(vocab)
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    if len(set(vocab)) != len(vocab):
        raise ValidationError("vocabulary tokens must be distinct")
    return vocab


def init_embeddings(vocab: Sequence[str], dim: int, seed: int, sigma_init: float | None = None) -> EmbeddingTable:
    """I.i.d. Gaussian embeddings with per-coordinate std ``1/sqrt(dim)``."""
    vocab = _check_vocab(vocab, dim)
    sigma = 1.0 / math.sqrt(dim) if sigma_init is None else float(sigma_init)
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0.0, sigma, size=(len(vocab), dim))
    return EmbeddingTable(dim, vocab, _readonly(matrix), seed, sigma)


def init_correlated_embeddings(vocab: Sequence[str], dim: int, seed: int, coherence: float = 0.5) -> EmbeddingTable:
    """Embeddings sharing a common direction, pairwise cosine ~ ``coherence``.

    Each vector is ``sqrt(c) * shared + sqrt(1 - c) * own`` with both parts
    drawn like :func:`init_embeddings`, so norms still concentrate near 1.
    This is the "raw content token" population used as a baseline.
    """
    vocab = _check_vocab(vocab, dim)
    if not 0.0 <= coherence < 1.0:
        raise ValidationError(f"coherence must lie in [0, 1), got {coherence}")
    sigma = 1.0 / math.sqrt(dim)
    rng = np.random.default_rng(seed)
    shared = rng.normal(0.0, sigma, size=dim)
    own = rng.normal(0.0, sigma, size=(len(vocab), dim))
    matrix = math.sqrt(coherence) * shared + math.sqrt(1.0 - coherence) * own
    return EmbeddingTable(dim, vocab, _readonly(matrix), seed, sigma)


@dataclass(frozen=True, eq=False)
class PhaseOperator:
    """Seeded orthogonal transform ``R``; position ``p`` is rotated by ``R**p``."""

    rotation: np.ndarray
    seed: int | None

    def __post_init__(self):
        r = self.rotation
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValidationError("phase rotation must be square")
        err = np.max(np.abs(r @ r.T - np.eye(r.shape[0])))
        if err > ORTHOGONALITY_TOL:
            raise ValidationError(f"phase rotation not orthogonal (max error {err:.3g})")

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    def apply(self, x: np.ndarray, times: int = 1) -> np.ndarray:
        """Apply ``R`` ``times`` times to a vector or to each row of a matrix."""
        x = np.asarray(x, dtype=np.float64)
        for _ in range(times):
            x = self.rotation @ x if x.ndim == 1 else x @ self.rotation.T
        return x


def make_phase_operator(dim: int, seed: int) -> PhaseOperator:
    """Haar-random orthogonal matrix from the QR decomposition of a Gaussian matrix."""
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q *= np.sign(np.diag(r))
    return PhaseOperator(_readonly(q), seed)


def identity_phase(dim: int) -> PhaseOperator:
    return PhaseOperator(_readonly(np.eye(dim)), None)


def _tokens(c) -> tuple[str, ...]:
    return c.tokens if isinstance(c, Codeword) else tuple(c)


def project_codeword(c, table: EmbeddingTable, phase: PhaseOperator) -> np.ndarray:
    """``(1/sqrt(L)) * sum_p R**p e(t_p)``, summed in ascending position."""
    tokens = _tokens(c)
    if not tokens:
        raise ValidationError("cannot project an empty codeword")
    acc = table[tokens[0]].copy()
    for p, tok in enumerate(tokens[1:], start=1):
        acc = acc + phase.apply(table[tok], p)
    return acc / math.sqrt(len(tokens))


def project_codebook(codewords, table: EmbeddingTable, phase: PhaseOperator) -> np.ndarray:
    """Projections of many codewords as the rows of an ``(n, dim)`` matrix.

    Equal-length codewords are projected position by position in one batch;
    mixed lengths fall back to :func:`project_codeword` per codeword.
    """
    seqs = [_tokens(c) for c in (codewords.codewords if isinstance(codewords, Codebook) else codewords)]
    if not seqs:
        return np.zeros((0, table.dim))
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        return np.array([project_codeword(s, table, phase) for s in seqs])
    (L,) = lengths
    acc = table.rows([s[0] for s in seqs]).copy()
    for p in range(1, L):
        acc = acc + phase.apply(table.rows([s[p] for s in seqs]), p)
    return acc / math.sqrt(L)


def holobasis(codebook: Codebook, table: EmbeddingTable, phase: PhaseOperator) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """Columns ``R**p e(t)`` for every (position, symbol) slot of the codebook.

    The codeword projection is linear in slot indicators: with ``B`` the
    returned matrix and ``x`` the 0/1 indicator of a codeword's slots,
    ``project_codeword(c) == B @ x / sqrt(L)``. ``B`` is therefore the matrix
    of the hypertoken projection map itself.

    Returns:
        ``(B, labels)`` with ``B`` of shape ``(dim, slots)`` and ``labels``
        naming each column as ``(position, symbol)``.
    """
    if codebook.kind == "product":
        slots = [(p, s) for p, alpha in enumerate(codebook.alphabets) for s in alpha.symbols]
    else:
        width = max(len(c) for c in codebook.codewords)
        symbols = codebook.symbols
        slots = [(p, s) for p in range(width) for s in symbols]
    cols = [phase.apply(table[s], p) for p, s in slots]
    return np.array(cols).T, slots


def slot_indicator(c, labels: Sequence[tuple[int, str]]) -> np.ndarray:
    """0/1 vector marking the holobasis columns used by codeword ``c``."""
    where = {lab: i for i, lab in enumerate(labels)}
    x = np.zeros(len(labels))
    for p, tok in enumerate(_tokens(c)):
        try:
            x[where[(p, tok)]] = 1.0
        except KeyError:
            raise TokenLookupError(f"slot {(p, tok)!r} not in holobasis") from None
    return x


def spread_signal(coeffs: Sequence[float], basis, noise_sigma: float, seed: int | None = None) -> np.ndarray:
    """``sum_i coeffs[i] * basis[i]`` plus i.i.d. Gaussian noise of std ``noise_sigma``.

    Terms are added in index order; with ``noise_sigma == 0`` no random
    numbers are drawn.
    """
    basis = np.asarray(basis, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if basis.ndim != 2 or len(coeffs) != basis.shape[0]:
        raise ValidationError(f"{len(coeffs)} coefficients for {basis.shape[0] if basis.ndim else 0} basis vectors")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    acc = np.zeros(basis.shape[1])
    for a, phi in zip(coeffs, basis):
        acc = acc + a * phi
    if noise_sigma > 0:
        acc = acc + np.random.default_rng(seed).normal(0.0, noise_sigma, size=acc.shape)
    return acc
