"""Holographic key-value memory.

Pairs are stored as a superposed outer-product trace ``M = sum_i k_i v_i^T``
of key and value projections. Forward (K:V) lookup reads ``M^T k`` and
decodes against the stored values; reverse (V:K) lookup reads ``M v`` and
decodes against the stored keys, so one matrix serves both directions.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from hdram import kernels
from hdram.codebook import (
    Codebook,
    Codeword,
    build_general_codebook,
    build_product_codebook,
    check_bifix_free,
    pua_alphabets,
    square_alphabet_sizes,
)
from hdram.despread import (
    DEFAULT_TAU,
    DecodeResult,
    matched_filter_decode,
    refined_decode,
)
from hdram.errors import DuplicateAddressError, EmptyMemoryError, ValidationError
from hdram.latent_channel import (
    EmbeddingTable,
    PhaseOperator,
    init_correlated_embeddings,
    init_embeddings,
    make_phase_operator,
    project_codebook,
    project_codeword,
)

HYPERTOKEN = "hypertoken"
BASELINE = "baseline"
ARMS = (HYPERTOKEN, BASELINE)
BASELINE_COHERENCE = 0.5
REJECT_QUANTILE = 0.99


@dataclass(frozen=True, eq=False)
class MemoryBank:
    trace: np.ndarray
    key_projections: np.ndarray
    value_projections: np.ndarray
    keys: tuple[Codeword, ...]
    values: tuple[Codeword, ...]
    payloads: tuple[str | None, ...]

    @property
    def pair_count(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        return self.trace.shape[0]

    def recompute_trace(self) -> np.ndarray:
        return kernels.accumulate_outer(self.key_projections, self.value_projections)

    def payload(self, i: int) -> str | None:
        return self.payloads[i]


def _unpack(pair) -> tuple[Codeword, Codeword, str | None]:
    if len(pair) == 2:
        return pair[0], pair[1], None
    if len(pair) == 3:
        return pair[0], pair[1], pair[2]
    raise ValidationError(f"pairs must be (key, value[, payload]), got {len(pair)} fields")


def build_bank(key_projections, value_projections, keys=(), values=(), payloads=None) -> MemoryBank:
    """Assemble a bank straight from projection matrices (rows are pairs)."""
    K = np.ascontiguousarray(key_projections, dtype=np.float64)
    V = np.ascontiguousarray(value_projections, dtype=np.float64)
    if K.shape != V.shape:
        raise ValidationError(f"key projections {K.shape} vs value projections {V.shape}")
    n = K.shape[0]
    payloads = tuple(payloads) if payloads is not None else (None,) * n
    trace = kernels.accumulate_outer(K, V)
    for a in (trace, K, V):
        a.flags.writeable = False
    return MemoryBank(trace, K, V, tuple(keys), tuple(values), payloads)


def store(pairs: Iterable, table: EmbeddingTable, phase: PhaseOperator) -> MemoryBank:
    """Superpose ``Phi(key) Phi(value)^T`` for each pair, in input order.

    Args:
        pairs: ``(key, value)`` or ``(key, value, payload)`` tuples of codewords.

    Raises:
        DuplicateAddressError: a key appears twice.
        ValidationError: the keys are not bifix-free.
    """
    keys, values, payloads = [], [], []
    for pair in pairs:
        k, v, p = _unpack(pair)
        keys.append(k)
        values.append(v)
        payloads.append(p)
    seen: dict = {}
    for i, k in enumerate(keys):
        if k.tokens in seen:
            raise DuplicateAddressError(f"key {k.text()!r} stored at pairs {seen[k.tokens]} and {i}")
        seen[k.tokens] = i
    if keys:
        ok, violations = check_bifix_free([k.tokens for k in keys])
        if not ok:
            raise ValidationError(f"keys are not bifix-free: {violations[:5]}")
    d = table.dim
    K = project_codebook(keys, table, phase) if keys else np.zeros((0, d))
    V = project_codebook(values, table, phase) if values else np.zeros((0, d))
    return build_bank(K, V, keys, values, payloads)


def _noisy(vec, noise_sigma, seed):
    if noise_sigma > 0:
        return vec + np.random.default_rng(seed).normal(0.0, noise_sigma, size=vec.shape)
    return vec


def _decode(read, candidates, tau, refine_iters):
    if refine_iters:
        return refined_decode(read, candidates, tau, refine_iters)
    return matched_filter_decode(read, candidates, tau)


def read_kv(bank: MemoryBank, query, tau: float = DEFAULT_TAU, refine_iters: int = 0) -> DecodeResult:
    """Decode the value addressed by a latent key query."""
    if bank.pair_count == 0:
        raise EmptyMemoryError("memory bank holds no pairs")
    return _decode(bank.trace.T @ np.asarray(query, dtype=np.float64), bank.value_projections, tau, refine_iters)


def read_vk(bank: MemoryBank, query, tau: float = DEFAULT_TAU, refine_iters: int = 0) -> DecodeResult:
    """Decode the key addressed by a latent value query (transpose read)."""
    if bank.pair_count == 0:
        raise EmptyMemoryError("memory bank holds no pairs")
    return _decode(bank.trace @ np.asarray(query, dtype=np.float64), bank.key_projections, tau, refine_iters)


def lookup_kv(bank, key, table, phase, tau=DEFAULT_TAU, noise_sigma=0.0, seed=None, refine_iters=0) -> DecodeResult:
    """K:V lookup. The index in the result is the stored pair's position.

    ``noise_sigma`` adds channel noise to the key projection before reading.
    """
    if bank.pair_count == 0:
        raise EmptyMemoryError("memory bank holds no pairs")
    q = _noisy(project_codeword(key, table, phase), noise_sigma, seed)
    return read_kv(bank, q, tau, refine_iters)


def lookup_vk(bank, value, table, phase, tau=DEFAULT_TAU, noise_sigma=0.0, seed=None, refine_iters=0) -> DecodeResult:
    """V:K reverse lookup through the transposed trace."""
    if bank.pair_count == 0:
        raise EmptyMemoryError("memory bank holds no pairs")
    q = _noisy(project_codeword(value, table, phase), noise_sigma, seed)
    return read_vk(bank, q, tau, refine_iters)


def child_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit seed for a trial or grid cell below ``seed``."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class ArmSetup:
    """Symbolic side of one simulation arm: key and value codewords plus vocabulary."""

    arm: str
    keys: tuple[Codeword, ...]
    values: tuple[Codeword, ...]
    vocab: tuple[str, ...]
    key_codebook: Codebook
    value_codebook: Codebook


def arm_setup(n: int, arm: str = HYPERTOKEN) -> ArmSetup:
    """Codewords for ``n`` stored pairs.

    The hypertoken arm addresses pairs with two-symbol product codewords over
    disjoint Private Use Area alphabets of size ``ceil(sqrt(n))``; values use
    a second, disjoint product code. The baseline arm uses single content
    tokens for both keys and values.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if arm == HYPERTOKEN:
        sizes = square_alphabet_sizes(n)
        alphas = pua_alphabets(sizes + sizes)
        kb = build_product_codebook(alphas[:2], n)
        vb = build_product_codebook(alphas[2:], n)
        vocab = tuple(s for a in alphas for s in a.symbols)
    elif arm == BASELINE:
        kb = build_general_codebook([(f"k{i}",) for i in range(n)])
        vb = build_general_codebook([(f"v{i}",) for i in range(n)])
        vocab = tuple(kb.symbols + vb.symbols)
    else:
        raise ValidationError(f"arm must be one of {ARMS}, got {arm!r}")
    return ArmSetup(arm, kb.codewords, vb.codewords, vocab, kb, vb)


def arm_channel(setup: ArmSetup, dim: int, seed: int) -> tuple[EmbeddingTable, PhaseOperator]:
    """Seeded embeddings and phase operator realizing an arm in ``dim`` dimensions."""
    if setup.arm == HYPERTOKEN:
        table = init_embeddings(setup.vocab, dim, child_seed(seed, 0))
    else:
        table = init_correlated_embeddings(setup.vocab, dim, child_seed(seed, 0), BASELINE_COHERENCE)
    return table, make_phase_operator(dim, child_seed(seed, 1))


@dataclass(frozen=True)
class RecallStats:
    arm: str
    dim: int
    n: int
    sigma: float
    trials: int
    seed: int
    recall_kv: float
    recall_vk: float
    collision_rate: float
    entropy_bits: float
    mean_margin: float


def simulate_recall(dim: int, n: int, sigma: float, trials: int, seed: int, arm: str = HYPERTOKEN, tau: float = DEFAULT_TAU) -> RecallStats:
    """Monte Carlo forward and reverse recall.

    Each trial draws a fresh embedding table and phase operator from a child
    seed, stores all ``n`` pairs, and queries every key (and every value)
    once with independent Gaussian channel noise of std ``sigma`` per
    coordinate. Collision rate, entropy and margin describe the K:V decodes.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    setup = arm_setup(n, arm)
    truth = np.arange(n)
    hits_kv = hits_vk = 0
    entropy = margin = 0.0
    for t in range(trials):
        ts = child_seed(seed, t)
        table, phase = arm_channel(setup, dim, ts)
        K = project_codebook(setup.keys, table, phase)
        V = project_codebook(setup.values, table, phase)
        M = kernels.accumulate_outer(K, V)
        rng = np.random.default_rng(child_seed(ts, 2))
        qk, qv = K, V
        if sigma > 0:
            qk = K + rng.normal(0.0, sigma, size=K.shape)
            qv = V + rng.normal(0.0, sigma, size=V.shape)
        best, _, marg, ent = kernels.batch_decode(qk @ M, V, tau)
        hits_kv += int(np.count_nonzero(best == truth))
        entropy += float(ent.sum())
        margin += float(marg.sum())
        best, _, _, _ = kernels.batch_decode(qv @ M.T, K, tau)
        hits_vk += int(np.count_nonzero(best == truth))
    total = trials * n
    return RecallStats(
        arm=arm, dim=dim, n=n, sigma=float(sigma), trials=trials, seed=seed,
        recall_kv=hits_kv / total,
        recall_vk=hits_vk / total,
        collision_rate=1.0 - hits_kv / total,
        entropy_bits=entropy / total,
        mean_margin=margin / total,
    )


def capacity_curve(dims: Sequence[int], pair_counts: Sequence[int], noise_sigma: float, trials: int, seed: int, tau: float = DEFAULT_TAU) -> list[dict]:
    """Mean forward/reverse recall of the hypertoken arm on a ``dims x pair_counts`` grid."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    rows = []
    for ci, (d, n) in enumerate((d, n) for d in dims for n in pair_counts):
        st = simulate_recall(d, n, noise_sigma, trials, child_seed(seed, ci), tau=tau)
        rows.append({"dim": d, "n": n, "sigma": float(noise_sigma),
                     "recall_kv": st.recall_kv, "recall_vk": st.recall_vk, "trials": trials})
    return rows


def round_trip_rate(dim: int, n: int, sigma: float, trials: int, seed: int, tau: float = DEFAULT_TAU) -> float:
    """Fraction of trials where ``lookup_vk(lookup_kv(key))`` returns the original key.

    Every trial builds a fresh hypertoken bank, picks a key at random, and
    runs both lookups through the public codeword API with independent
    channel noise.
    """
    setup = arm_setup(n, HYPERTOKEN)
    ok = 0
    for t in range(trials):
        ts = child_seed(seed, t)
        table, phase = arm_channel(setup, dim, ts)
        bank = store(zip(setup.keys, setup.values), table, phase)
        rng = np.random.default_rng(child_seed(ts, 3))
        j = int(rng.integers(n))
        fwd = lookup_kv(bank, setup.keys[j], table, phase, tau, sigma, child_seed(ts, 4))
        back = lookup_vk(bank, bank.values[fwd.best_index], table, phase, tau, sigma, child_seed(ts, 5))
        ok += back.best_index == j
    return ok / trials


def impostor_margins(dim: int, n: int, trials: int, seed: int, sigma: float = 0.0, tau: float = DEFAULT_TAU) -> np.ndarray:
    """K:V margins for codewords that were never stored.

    Pairs occupy the first ``n`` codewords of the product code; the impostor
    is the next codeword in row-major order, so it shares a symbol with some
    stored keys, the hardest honest case.
    """
    sizes = square_alphabet_sizes(n + 1)
    alphas = pua_alphabets(sizes + sizes)
    kb = build_product_codebook(alphas[:2], n + 1)
    vb = build_product_codebook(alphas[2:], n)
    vocab = [s for a in alphas for s in a.symbols]
    out = np.empty(trials)
    for t in range(trials):
        ts = child_seed(seed, t)
        table = init_embeddings(vocab, dim, child_seed(ts, 0))
        phase = make_phase_operator(dim, child_seed(ts, 1))
        bank = store(zip(kb.codewords[:n], vb.codewords), table, phase)
        out[t] = lookup_kv(bank, kb.codewords[n], table, phase, tau, sigma, child_seed(ts, 2)).margin
    return out


def calibrate_reject_threshold(dim: int, n: int, trials: int, seed: int, sigma: float = 0.0, quantile: float = REJECT_QUANTILE) -> float:
    """Reject threshold: the ``quantile`` of impostor margins (99th percentile by default)."""
    return float(np.quantile(impostor_margins(dim, n, trials, seed, sigma), quantile))
