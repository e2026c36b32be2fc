"""Hypertoken codebooks: product-indexed fixed-length codes and general sets.

A codebook pairs a list of token alphabets with an indexed list of codewords.
Product codebooks draw token ``p`` of every codeword from alphabet ``p`` and
are enumerated in row-major order, so index and codeword are related by pure
mixed-radix arithmetic. General codebooks hold arbitrary token sequences.

Both kinds carry a bifix-free flag (no codeword is a prefix or suffix of a
different codeword) together with the witness list of violations.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from hdram import kernels
from hdram.errors import (
    CapacityError,
    DuplicateCodewordError,
    UndefinedDistanceError,
    ValidationError,
)

PRODUCT = "product"
GENERAL = "general"
_KINDS = (PRODUCT, GENERAL)
_KIND_NAMES = {kernels.PREFIX: "prefix", kernels.SUFFIX: "suffix"}


@dataclass(frozen=True)
class TokenAlphabet:
    """An ordered set of token strings with optional prior probabilities."""

    symbols: tuple[str, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(set(symbols)) != len(symbols):
            seen = set()
            dupes = sorted({s for s in symbols if s in seen or seen.add(s)})
            raise ValidationError(f"duplicate symbols in alphabet: {dupes}")
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            object.__setattr__(self, "weights", weights)
            if len(weights) != len(symbols):
                raise ValidationError(
                    f"{len(weights)} weights given for {len(symbols)} symbols"
                )
            if any(not (0.0 < w <= 1.0) for w in weights):
                raise ValidationError("alphabet weights must lie in (0, 1]")
            if math.fsum(weights) > 1.0 + 1e-12:
                raise ValidationError(f"alphabet weights sum to {math.fsum(weights)} > 1")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, token):
        return token in self.symbols


@dataclass(frozen=True)
class Codeword:
    """One indexed token sequence."""

    index: int
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValidationError(f"codeword {self.index} is empty")

    def __len__(self):
        return len(self.tokens)

    def text(self, sep: str = "") -> str:
        return sep.join(self.tokens)


@dataclass(frozen=True)
class Codebook:
    """Alphabets plus codewords with distance and bifix-free metadata.

    Construction validates every structural invariant, including that
    ``bifix_free`` agrees with :func:`check_bifix_free`, so instances loaded
    from disk are as trustworthy as freshly built ones.
    """

    alphabets: tuple[TokenAlphabet, ...]
    codewords: tuple[Codeword, ...]
    kind: str
    min_distance: int | None
    bifix_free: bool
    violations: tuple[tuple[int, int, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabets", tuple(self.alphabets))
        object.__setattr__(self, "codewords", tuple(self.codewords))
        if self.kind not in _KINDS:
            raise ValidationError(f"codebook kind must be one of {_KINDS}, got {self.kind!r}")
        for pos, cw in enumerate(self.codewords):
            if cw.index != pos:
                raise ValidationError(f"codeword at position {pos} has index {cw.index}")
        if self.kind == PRODUCT:
            width = len(self.alphabets)
            for cw in self.codewords:
                if len(cw) != width:
                    raise ValidationError(
                        f"product codeword {cw.index} has length {len(cw)}, expected {width}"
                    )
                for p, (tok, alpha) in enumerate(zip(cw.tokens, self.alphabets)):
                    if tok not in alpha:
                        raise ValidationError(
                            f"codeword {cw.index}: token {tok!r} not in alphabet {p}"
                        )
        else:
            known = set().union(*(a.symbols for a in self.alphabets)) if self.alphabets else set()
            for cw in self.codewords:
                missing = [t for t in cw.tokens if t not in known]
                if missing:
                    raise ValidationError(f"codeword {cw.index}: tokens {missing} not in any alphabet")
        if self.codewords:
            ok, violations = check_bifix_free(self.codewords)
        else:
            ok, violations = True, []
        if ok != self.bifix_free:
            raise ValidationError(
                f"bifix_free flag {self.bifix_free} disagrees with check ({ok})"
            )
        object.__setattr__(self, "violations", tuple(violations))

    def __len__(self):
        return len(self.codewords)

    def __getitem__(self, index):
        return self.codewords[index]

    def __iter__(self):
        return iter(self.codewords)

    @property
    def symbols(self) -> list[str]:
        """Every alphabet symbol, alphabet by alphabet, without repeats."""
        return list(dict.fromkeys(s for a in self.alphabets for s in a.symbols))

    def index_of(self, tokens: Sequence[str]) -> int:
        """Index of the codeword spelled by ``tokens``; ``KeyError`` if absent."""
        tokens = tuple(tokens)
        lookup = self.__dict__.get("_lookup")
        if lookup is None:
            lookup = {}
            for cw in self.codewords:
                lookup.setdefault(cw.tokens, cw.index)
            object.__setattr__(self, "_lookup", lookup)
        try:
            return lookup[tokens]
        except KeyError:
            raise KeyError(f"codeword {tokens!r} not in codebook") from None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alphabets": [list(a.symbols) for a in self.alphabets],
            "codewords": [{"index": cw.index, "tokens": list(cw.tokens)} for cw in self.codewords],
            "min_distance": self.min_distance,
            "bifix_free": self.bifix_free,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> Codebook:
        try:
            alphabets = [TokenAlphabet(tuple(a)) for a in data["alphabets"]]
            codewords = [Codeword(int(c["index"]), tuple(c["tokens"])) for c in data["codewords"]]
            book = cls(
                alphabets=alphabets,
                codewords=codewords,
                kind=data["kind"],
                min_distance=data.get("min_distance"),
                bifix_free=bool(data["bifix_free"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed codebook document: {exc}") from exc
        expected = _distance_or_none(book.codewords, book.kind)
        if book.min_distance != expected:
            raise ValidationError(
                f"stored min_distance {book.min_distance} disagrees with computed {expected}"
            )
        return book

    @classmethod
    def from_json(cls, text: str) -> Codebook:
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> Codebook:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _as_alphabet(alpha) -> TokenAlphabet:
    return alpha if isinstance(alpha, TokenAlphabet) else TokenAlphabet(tuple(alpha))


def _token_tuples(codewords) -> tuple[list[int], list[tuple]]:
    ids, seqs = [], []
    for pos, cw in enumerate(codewords):
        if isinstance(cw, Codeword):
            ids.append(cw.index)
            seqs.append(cw.tokens)
        else:
            ids.append(pos)
            seqs.append(tuple(cw))
    return ids, seqs


def _encode(seqs) -> tuple[np.ndarray, np.ndarray]:
    table: dict = {}
    flat = [table.setdefault(tok, len(table)) for seq in seqs for tok in seq]
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in seqs], out=offsets[1:])
    return np.asarray(flat, dtype=np.int64), offsets


def check_bifix_free(codewords) -> tuple[bool, list[tuple[int, int, str]]]:
    """Test whether no codeword is a prefix or suffix of a different codeword.

    Args:
        codewords: ``Codeword`` objects or plain token sequences (a ``str`` is
            treated as a sequence of one-character tokens).

    Returns:
        ``(ok, violations)`` where each violation ``(i, j, kind)`` says that
        codeword ``i`` is a ``"prefix"`` or ``"suffix"`` of codeword ``j``.
        Indices are ``Codeword.index`` values, or list positions for plain
        sequences. Identical codewords violate in both directions.
    """
    ids, seqs = _token_tuples(codewords)
    if not seqs:
        raise ValidationError("check_bifix_free needs at least one codeword")
    flat, offsets = _encode(seqs)
    raw = kernels.bifix_violations(flat, offsets)
    violations = [(ids[i], ids[j], _KIND_NAMES[k]) for i, j, k in raw]
    return not violations, violations


def kraft_mcmillan_sum(codewords, q: int) -> float:
    """Return the Kraft-McMillan sum of codeword lengths over a ``q``-ary alphabet.

    Items may be codewords, token sequences, or bare integer lengths. The sum
    is accumulated exactly in rationals before conversion, so full product
    codes give exactly ``1.0``.
    """
    if q < 2:
        raise ValidationError(f"alphabet size q must be >= 2, got {q}")
    counts: dict[int, int] = {}
    for cw in codewords:
        length = cw if isinstance(cw, int) else len(cw)
        if length < 1:
            raise ValidationError("codeword lengths must be >= 1")
        counts[length] = counts.get(length, 0) + 1
    total = sum((Fraction(c, q**length) for length, c in counts.items()), Fraction(0))
    return float(total)


def min_hamming_distance(codebook) -> int:
    """Minimum pairwise Hamming distance of an equal-length codebook.

    Raises:
        ValidationError: codewords have unequal lengths.
        UndefinedDistanceError: fewer than two codewords.
        DuplicateCodewordError: two codewords coincide (distance 0).
    """
    codewords = codebook.codewords if isinstance(codebook, Codebook) else list(codebook)
    ids, seqs = _token_tuples(codewords)
    if len(seqs) < 2:
        raise UndefinedDistanceError("minimum distance needs at least two codewords")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ValidationError(f"Hamming distance needs equal lengths, got {sorted(lengths)}")
    flat, _ = _encode(seqs)
    dist, i, j = kernels.min_hamming(flat.reshape(len(seqs), -1))
    if dist == 0:
        raise DuplicateCodewordError(
            f"codewords {ids[i]} and {ids[j]} are identical (distance 0)"
        )
    return int(dist)


def _distance_or_none(codewords, kind) -> int | None:
    if len(codewords) < 2:
        return None
    if kind == GENERAL and len({len(c) for c in codewords}) != 1:
        return None
    try:
        return min_hamming_distance(codewords)
    except DuplicateCodewordError:
        return 0


def build_product_codebook(alphabets: Sequence, capacity: int) -> Codebook:
    """First ``capacity`` codewords of the alphabet product in row-major order.

    The last alphabet varies fastest, so for two alphabets codeword ``i`` is
    ``(rows[i // len(cols)], cols[i % len(cols)])``.
    """
    alphabets = [_as_alphabet(a) for a in alphabets]
    if not alphabets:
        raise ValidationError("at least one alphabet is required")
    for p, alpha in enumerate(alphabets):
        if len(alpha) == 0:
            raise ValidationError(f"alphabet {p} is empty")
    size = math.prod(len(a) for a in alphabets)
    if capacity < 1:
        raise CapacityError(f"capacity must be >= 1, got {capacity}")
    if capacity > size:
        raise CapacityError(f"capacity {capacity} exceeds alphabet product size {size}")
    combos = itertools.islice(itertools.product(*(a.symbols for a in alphabets)), capacity)
    codewords = [Codeword(i, combo) for i, combo in enumerate(combos)]
    ok, _ = check_bifix_free(codewords)
    return Codebook(
        alphabets=alphabets,
        codewords=codewords,
        kind=PRODUCT,
        min_distance=_distance_or_none(codewords, PRODUCT),
        bifix_free=ok,
    )


def build_general_codebook(words: Iterable[Sequence[str]], alphabet=None) -> Codebook:
    """Codebook over arbitrary token sequences (variable lengths allowed).

    ``alphabet`` defaults to the distinct tokens in order of first use.
    Duplicates are kept and surface as bifix violations.
    """
    seqs = [tuple(w) for w in words]
    if alphabet is None:
        alphabet = list(dict.fromkeys(t for s in seqs for t in s))
    codewords = [Codeword(i, s) for i, s in enumerate(seqs)]
    ok = check_bifix_free(codewords)[0] if codewords else True
    return Codebook(
        alphabets=[_as_alphabet(alphabet)],
        codewords=codewords,
        kind=GENERAL,
        min_distance=_distance_or_none(codewords, GENERAL),
        bifix_free=ok,
    )


def pua_alphabets(sizes: Sequence[int], start: int = 0xE000) -> list[TokenAlphabet]:
    """Disjoint alphabets of consecutive Private Use Area characters."""
    out, cp = [], start
    for size in sizes:
        if cp + size - 1 > 0xF8FF:
            raise CapacityError("Private Use Area exhausted")
        out.append(TokenAlphabet(tuple(chr(c) for c in range(cp, cp + size))))
        cp += size
    return out


def square_alphabet_sizes(n: int, dims: int = 2) -> list[int]:
    """Smallest equal alphabet size ``m`` with ``m ** dims >= n``, repeated ``dims`` times."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    m = max(1, math.ceil(round(n ** (1.0 / dims), 9)))
    while m**dims < n:
        m += 1
    return [m] * dims
