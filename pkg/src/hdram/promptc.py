"""Compile codebooks and key-value pairs into hypertoken prompts for real LLMs.

Prompts are one ``<codeword>: <payload>`` line per stored pair followed by a
query line: ``<codeword>:`` for K:V recall, ``<payload> →`` for V:K recall.
Tokenizers plug in through :class:`TokenizerProfile`; a greedy longest-match
reference tokenizer with byte fallback ships for offline use.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from hdram.codebook import Codebook, Codeword
from hdram.errors import InsufficientSymbolsError, UnknownQueryError, ValidationError

PUA_FIRST = 0xE000
PUA_LAST = 0xF8FF
DELIMITER = ": "
VK_MARKER = " →"
KV = "kv"
VK = "vk"
MODES = (KV, VK)

# (token id, start char, end char)
Span = tuple[int, int, int]


class ReferenceTokenizer:
    """Greedy longest-match tokenizer over a fixed vocabulary.

    Characters not covered by any vocabulary entry fall back to one token
    per UTF-8 byte, with ids ``len(vocab) + byte``; those byte tokens carry
    the character span of the character they came from.
    """

    def __init__(self, vocab: Sequence[str]):
        self.vocab = list(vocab)
        if len(set(self.vocab)) != len(self.vocab):
            raise ValidationError("vocabulary entries must be distinct")
        if any(t == "" for t in self.vocab):
            raise ValidationError("vocabulary entries must be non-empty")
        self.ids = {t: i for i, t in enumerate(self.vocab)}
        self.max_len = max((len(t) for t in self.vocab), default=1)

    def tokenize_with_offsets(self, text: str) -> list[Span]:
        out: list[Span] = []
        i, n = 0, len(text)
        while i < n:
            for length in range(min(self.max_len, n - i), 0, -1):
                tid = self.ids.get(text[i:i + length])
                if tid is not None:
                    out.append((tid, i, i + length))
                    i += length
                    break
            else:
                base = len(self.vocab)
                out.extend((base + b, i, i + 1) for b in text[i].encode("utf-8"))
                i += 1
        return out

    def tokenize(self, text: str) -> list[int]:
        return [tid for tid, _, _ in self.tokenize_with_offsets(text)]

    def decode_piece(self, tid: int) -> bytes:
        if tid < len(self.vocab):
            return self.vocab[tid].encode("utf-8")
        return bytes([tid - len(self.vocab)])

    @classmethod
    def from_file(cls, path) -> ReferenceTokenizer:
        return cls(load_vocab(path))


def load_vocab(path) -> list[str]:
    """One token per line, UTF-8; the line number (from 0) is the token id."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def save_vocab(vocab: Sequence[str], path) -> None:
    if any("\n" in t for t in vocab):
        raise ValidationError("vocabulary tokens cannot contain newlines")
    Path(path).write_text("".join(t + "\n" for t in vocab), encoding="utf-8")


@dataclass
class TokenizerProfile:
    """A tokenizer as seen by the prompt compiler.

    ``tokenize`` must be a pure function of its input. ``offsets`` (token id
    plus character span per token) is needed only for in-context
    verification.
    """

    name: str
    vocab: Mapping[str, int]
    tokenize: Callable[[str], list[int]]
    offsets: Callable[[str], list[Span]] | None = None
    _pua: list[str] | None = field(default=None, repr=False)

    @classmethod
    def reference(cls, vocab: Sequence[str], name: str = "reference") -> TokenizerProfile:
        tok = ReferenceTokenizer(vocab)
        return cls(name, dict(tok.ids), tok.tokenize, tok.tokenize_with_offsets)

    def is_single_token(self, symbol: str) -> bool:
        return len(self.tokenize(symbol)) == 1

    @property
    def pua_singletons(self) -> list[str]:
        """Every Private Use Area character that tokenizes to exactly one id."""
        if self._pua is None:
            self._pua = [
                ch for ch in map(chr, range(PUA_FIRST, PUA_LAST + 1)) if self.is_single_token(ch)
            ]
        return list(self._pua)


@dataclass(frozen=True)
class Violation:
    symbol: str
    start: int
    end: int
    kind: str  # "multi_token", "boundary" or "context_mismatch"


@dataclass
class PromptArtifact:
    text: str
    mode: str
    query_codeword: Codeword
    expected_answer: str
    token_count: int | None
    hypertoken_spans: list[tuple[int, int, str]] = field(default_factory=list)
    violations: list[Violation] | None = None

    @property
    def association_lines(self) -> list[str]:
        return self.text.split("\n")[:-1]

    @property
    def query_line(self) -> str:
        return self.text.split("\n")[-1]

    def sidecar(self) -> dict:
        return {
            "mode": self.mode,
            "query_index": self.query_codeword.index,
            "expected_answer": self.expected_answer,
            "token_count": self.token_count,
        }

    def save(self, path) -> Path:
        """Write ``path`` (prompt text) and ``path.json`` (sidecar)."""
        path = Path(path)
        path.write_text(self.text, encoding="utf-8")
        side = path.with_name(path.name + ".json")
        side.write_text(json.dumps(self.sidecar(), sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return side


def select_hypertokens(profile: TokenizerProfile, count: int, policy: str = "pua",
                       candidates: Sequence[str] | None = None,
                       frequencies: Mapping[str, float] | None = None) -> list[str]:
    """Pick ``count`` symbols that the tokenizer keeps as single tokens.

    Policies:
        ``pua``: scan U+E000..U+F8FF in ascending order.
        ``rare``: ascending frequency (ties by symbol) from ``frequencies``.
        ``explicit``: ``candidates`` verbatim, each verified.

    Raises:
        InsufficientSymbolsError: fewer than ``count`` symbols qualify.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    if policy == "pua":
        pool = (chr(cp) for cp in range(PUA_FIRST, PUA_LAST + 1))
    elif policy == "rare":
        if frequencies is None:
            raise ValidationError("policy 'rare' needs a frequency table")
        pool = iter(sorted(frequencies, key=lambda s: (frequencies[s], s)))
    elif policy == "explicit":
        if candidates is None:
            raise ValidationError("policy 'explicit' needs candidates")
        bad = [s for s in candidates if not profile.is_single_token(s)]
        good = len(candidates) - len(bad)
        if bad:
            raise InsufficientSymbolsError(f"explicit symbols split into several tokens: {bad}", found=good)
        if good < count:
            raise InsufficientSymbolsError(f"{count} symbols requested, {good} given", found=good)
        return list(candidates[:count])
    else:
        raise ValidationError(f"unknown selection policy {policy!r}")
    chosen: list[str] = []
    for sym in pool:
        if profile.is_single_token(sym):
            chosen.append(sym)
            if len(chosen) == count:
                return chosen
    raise InsufficientSymbolsError(
        f"only {len(chosen)} single-token symbols under policy {policy!r}, {count} requested",
        found=len(chosen),
    )


def _resolve_query(query, pairs, mode) -> int:
    if isinstance(query, Codeword):
        for i, (cw, _) in enumerate(pairs):
            if cw.tokens == query.tokens:
                return i
        raise UnknownQueryError(f"codeword {query.text()!r} is not among the stored pairs")
    if mode == VK and isinstance(query, str):
        for i, (_, payload) in enumerate(pairs):
            if payload == query:
                return i
        raise UnknownQueryError(f"payload {query!r} is not among the stored pairs")
    raise ValidationError(f"query must be a Codeword (or payload text in vk mode), got {type(query).__name__}")


def compile_kv_prompt(codebook: Codebook, pairs: Sequence[tuple[Codeword, str]], query, mode: str = KV,
                      profile: TokenizerProfile | None = None, sep: str = "") -> PromptArtifact:
    """Render stored pairs plus a query line into a prompt.

    Codewords are spelled by joining their tokens with ``sep``. With a
    ``profile`` the artifact records its token count and verification report.

    Raises:
        UnknownQueryError: the query was not stored.
        ValidationError: empty pairs, bad mode, or a codeword outside ``codebook``.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    pairs = [(cw, str(payload)) for cw, payload in pairs]
    if not pairs:
        raise ValidationError("need at least one pair")
    for cw, _ in pairs:
        try:
            codebook.index_of(cw.tokens)
        except KeyError:
            raise ValidationError(f"codeword {cw.text(sep)!r} is not in the codebook") from None
    qi = _resolve_query(query, pairs, mode)
    hyper = set(codebook.symbols)

    lines, spans, pos = [], [], 0

    def emit_codeword(cw, at):
        start = at
        for k, tok in enumerate(cw.tokens):
            if k:
                start += len(sep)
            if tok in hyper:
                spans.append((start, start + len(tok), tok))
            start += len(tok)

    for cw, payload in pairs:
        emit_codeword(cw, pos)
        line = f"{cw.text(sep)}{DELIMITER}{payload}"
        lines.append(line)
        pos += len(line) + 1
    qcw, qpayload = pairs[qi]
    if mode == KV:
        emit_codeword(qcw, pos)
        lines.append(f"{qcw.text(sep)}{DELIMITER.rstrip()}")
        expected = qpayload
    else:
        lines.append(f"{qpayload}{VK_MARKER}")
        expected = qcw.text(sep)
    text = "\n".join(lines)
    art = PromptArtifact(text, mode, codebook[codebook.index_of(qcw.tokens)], expected, None, spans)
    if profile is not None:
        art.token_count = len(profile.tokenize(text))
        art.violations = verify_tokenization(art, profile)
    return art


def verify_tokenization(artifact: PromptArtifact, profile: TokenizerProfile) -> list[Violation]:
    """Report hypertoken occurrences that the tokenizer does not keep intact.

    An occurrence is clean when its symbol is a single token in isolation,
    no in-context token straddles either end of its span, and the tokens
    inside the span carry the same ids as the isolated symbol. The first
    failed condition names the violation kind.
    """
    if profile.offsets is None:
        raise ValidationError(f"tokenizer profile {profile.name!r} exposes no offsets")
    spans = profile.offsets(artifact.text)
    out = []
    for start, end, sym in artifact.hypertoken_spans:
        alone = profile.tokenize(sym)
        if len(alone) != 1:
            out.append(Violation(sym, start, end, "multi_token"))
            continue
        inside, straddle = [], False
        for tid, s, e in spans:
            if e <= start or s >= end:
                continue
            if s < start or e > end:
                straddle = True
                break
            inside.append(tid)
        if straddle:
            out.append(Violation(sym, start, end, "boundary"))
        elif inside != alone:
            out.append(Violation(sym, start, end, "context_mismatch"))
    return out


def load_prompt(path, codebook: Codebook) -> PromptArtifact:
    """Read a prompt text file and its ``.json`` sidecar.

    Hypertoken spans are not stored on disk; they are recovered by scanning
    the association lines for the query codebook's symbols.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    try:
        mode, qi, expected = meta["mode"], int(meta["query_index"]), meta["expected_answer"]
    except KeyError as exc:
        raise ValidationError(f"prompt sidecar missing {exc}") from exc
    art = PromptArtifact(text, mode, codebook[qi], expected, meta.get("token_count"),
                         find_hypertoken_spans(text, codebook, mode))
    return art


def find_hypertoken_spans(text: str, codebook: Codebook, mode: str = KV) -> list[tuple[int, int, str]]:
    """Codebook symbols inside the codeword field of each prompt line.

    Only the text before the delimiter is scanned (and the kv query line up
    to its trailing colon), so payload words are never mistaken for
    hypertokens. Longer symbols win at each position.
    """
    symbols = sorted(set(codebook.symbols), key=lambda s: (-len(s), s))
    lines = text.split("\n")
    spans, base = [], 0
    for li, line in enumerate(lines):
        if li < len(lines) - 1:
            field_end = line.find(DELIMITER)
        elif mode == KV:
            field_end = len(line) - len(DELIMITER.rstrip())
        else:
            field_end = -1
        i = 0
        while 0 <= i < field_end:
            for sym in symbols:
                if line.startswith(sym, i) and i + len(sym) <= field_end:
                    spans.append((base + i, base + i + len(sym), sym))
                    i += len(sym)
                    break
            else:
                i += 1
        base += len(line) + 1
    return spans
