import itertools
import math

import numpy as np
import pytest

from hdram.codebook import build_product_codebook, pua_alphabets
from hdram.errors import TokenLookupError, ValidationError
from hdram.latent_channel import (
    PhaseOperator,
    holobasis,
    identity_phase,
    init_correlated_embeddings,
    init_embeddings,
    make_phase_operator,
    project_codebook,
    project_codeword,
    slot_indicator,
    spread_signal,
)

VOCAB = [f"t{i}" for i in range(100)]


def test_same_seed_same_table():
    a = init_embeddings(["x"], 32, seed=7)
    b = init_embeddings(["x"], 32, seed=7)
    assert np.array_equal(a["x"], b["x"])
    assert not np.array_equal(a["x"], init_embeddings(["x"], 32, seed=8)["x"])


def test_table_validation():
    with pytest.raises(ValidationError):
        init_embeddings(["a", "a"], 8, 0)
    with pytest.raises(ValidationError):
        init_embeddings(["a"], 1, 0)
    t = init_embeddings(["a"], 8, 0)
    with pytest.raises(TokenLookupError):
        t["b"]
    with pytest.raises(ValueError):
        t.matrix[0, 0] = 1.0  # tables are read-only


def test_default_sigma_and_moments():
    t = init_embeddings(VOCAB, 256, 0)
    assert t.sigma_init == 1 / 16
    assert abs(t.matrix.std() - 1 / 16) < 0.002
    assert abs(t.matrix.mean()) < 0.002


def test_pairwise_cosine_small_at_256():
    # E|cos| for independent isotropic directions is ~ sqrt(2 / (pi d)) ~ 0.05
    for seed in range(50):
        m = init_embeddings(VOCAB, 256, seed).matrix
        u = m / np.linalg.norm(m, axis=1, keepdims=True)
        c = np.abs(u @ u.T)[np.triu_indices(len(VOCAB), 1)]
        assert c.mean() <= 0.15


def test_norms_concentrate_at_256():
    for seed in range(50):
        norms = np.linalg.norm(init_embeddings(VOCAB, 256, seed).matrix, axis=1)
        assert 0.8 <= norms.mean() <= 1.2


def test_correlated_population_coherence():
    t = init_correlated_embeddings([f"k{i}" for i in range(64)], 1024, 3, coherence=0.5)
    u = t.matrix / np.linalg.norm(t.matrix, axis=1, keepdims=True)
    c = (u @ u.T)[np.triu_indices(64, 1)]
    assert abs(c.mean() - 0.5) < 0.05
    with pytest.raises(ValidationError):
        init_correlated_embeddings(["a"], 8, 0, coherence=1.0)


# -- phase operator ------------------------------------------------------------

def test_phase_orthogonal_and_norm_preserving():
    R = make_phase_operator(64, 11)
    assert np.max(np.abs(R.rotation @ R.rotation.T - np.eye(64))) <= 1e-9
    v = np.random.default_rng(0).normal(size=64)
    for times in (1, 2, 5):
        assert abs(np.linalg.norm(R.apply(v, times)) / np.linalg.norm(v) - 1) <= 1e-9
    assert np.array_equal(R.rotation, make_phase_operator(64, 11).rotation)


def test_phase_apply_rows_matches_vectors():
    R = make_phase_operator(16, 2)
    X = np.random.default_rng(1).normal(size=(5, 16))
    rows = R.apply(X, 3)
    for i in range(5):
        assert np.allclose(rows[i], R.apply(X[i], 3), atol=1e-14)


def test_phase_rejects_non_orthogonal():
    with pytest.raises(ValidationError):
        PhaseOperator(np.array([[1.0, 0.1], [0.0, 1.0]]), None)
    with pytest.raises(ValidationError):
        PhaseOperator(np.ones((2, 3)), None)


# -- projection ----------------------------------------------------------------

def test_length_one_projection_is_embedding():
    t = init_embeddings(["x"], 32, 0)
    assert np.array_equal(project_codeword(("x",), t, make_phase_operator(32, 0)), t["x"])


def test_projection_formula():
    t = init_embeddings(["a", "b", "c"], 16, 4)
    R = make_phase_operator(16, 5)
    r = R.rotation
    expected = (t["a"] + r @ t["b"] + r @ (r @ t["c"])) / math.sqrt(3)
    assert np.allclose(project_codeword(("a", "b", "c"), t, R), expected, atol=1e-14)


def test_projection_is_position_sensitive():
    for seed in range(50):
        t = init_embeddings(["a", "d"], 256, seed)
        R = make_phase_operator(256, seed + 1000)
        x, y = project_codeword(("a", "d"), t, R), project_codeword(("d", "a"), t, R)
        assert x @ y / (np.linalg.norm(x) * np.linalg.norm(y)) < 0.99


def test_identity_phase_is_order_blind():
    t = init_embeddings(["a", "d"], 8, 0)
    I = identity_phase(8)
    assert np.array_equal(project_codeword(("a", "d"), t, I), project_codeword(("d", "a"), t, I))


def test_projection_deterministic_and_missing_token():
    t = init_embeddings(["a", "b"], 32, 1)
    R = make_phase_operator(32, 2)
    assert np.array_equal(project_codeword(("a", "b"), t, R), project_codeword(("a", "b"), t, R))
    with pytest.raises(TokenLookupError):
        project_codeword(("a", "z"), t, R)


def test_batch_projection_matches_single():
    cb = build_product_codebook(pua_alphabets([3, 4]), 12)
    t = init_embeddings(cb.symbols, 32, 3)
    R = make_phase_operator(32, 4)
    batch = project_codebook(cb, t, R)
    for cw in cb:
        assert np.allclose(batch[cw.index], project_codeword(cw, t, R), rtol=0, atol=1e-14)
    mixed = project_codebook([("a",), ("a", "b")], init_embeddings(["a", "b"], 8, 0), identity_phase(8))
    assert mixed.shape == (2, 8)


def test_codeword_norms_concentrate():
    rng = np.random.default_rng(0)
    vocab = [f"v{i}" for i in range(50)]
    for d in (128, 256):
        t = init_embeddings(vocab, d, 9)
        R = make_phase_operator(d, 10)
        words = [tuple(rng.choice(vocab, size=rng.integers(1, 5))) for _ in range(1000)]
        norms = [np.linalg.norm(project_codeword(w, t, R)) for w in words]
        assert 0.8 <= np.mean(norms) <= 1.2


def test_holobasis_is_the_projection_matrix():
    cb = build_product_codebook(pua_alphabets([3, 3]), 9)
    t = init_embeddings(cb.symbols, 24, 0)
    R = make_phase_operator(24, 1)
    B, labels = holobasis(cb, t, R)
    assert B.shape == (24, 6)
    for cw in cb:
        x = slot_indicator(cw, labels)
        assert x.sum() == 2
        assert np.allclose(B @ x / math.sqrt(2), project_codeword(cw, t, R), atol=1e-14)
    with pytest.raises(TokenLookupError):
        slot_indicator(("zz", "yy"), labels)


# -- spread signal -----------------------------------------------------------

def test_spread_single_atom_noise_free():
    basis = np.random.default_rng(0).normal(size=(4, 16))
    assert np.array_equal(spread_signal([1, 0, 0, 0], basis, 0.0), basis[0])


def test_spread_linearity():
    rng = np.random.default_rng(1)
    # dyadic data: every sum is exact, so linearity holds bit for bit
    basis = rng.integers(-8, 8, size=(5, 32)) / 4.0
    a = rng.integers(-4, 4, size=5) / 2.0
    b = rng.integers(-4, 4, size=5) / 2.0
    assert np.array_equal(spread_signal(a + b, basis, 0), spread_signal(a, basis, 0) + spread_signal(b, basis, 0))
    basis = rng.normal(size=(5, 32))
    a, b = rng.normal(size=5), rng.normal(size=5)
    assert np.allclose(spread_signal(a + b, basis, 0), spread_signal(a, basis, 0) + spread_signal(b, basis, 0),
                       rtol=0, atol=1e-12)


def test_spread_noise_norm():
    basis = np.zeros((1, 256))
    norms = [np.linalg.norm(spread_signal([0.0], basis, 0.1, seed=s)) for s in range(1000)]
    assert abs(np.mean(norms) - 1.6) <= 0.16
    # chi(256) * 0.1 has sd ~ 0.0707; 10 % is ~ 2.3 sd, so almost every draw is inside
    inside = np.mean([abs(n - 1.6) <= 0.16 for n in norms])
    assert inside >= 0.95


def test_spread_validation():
    with pytest.raises(ValidationError):
        spread_signal([1, 2], np.zeros((3, 4)), 0)
    with pytest.raises(ValidationError):
        spread_signal([1], np.zeros((1, 4)), -1)


def test_superposition_order_fixed():
    basis = np.random.default_rng(5).normal(size=(6, 8))
    coeffs = np.random.default_rng(6).normal(size=6)
    manual = np.zeros(8)
    for c, phi in zip(coeffs, basis):
        manual = manual + c * phi
    assert np.array_equal(spread_signal(coeffs, basis, 0), manual)


def test_swapped_codewords_over_all_pairs_differ():
    syms = ["a", "b", "c", "d"]
    t = init_embeddings(syms, 256, 0)
    R = make_phase_operator(256, 1)
    for x, y in itertools.permutations(syms, 2):
        assert not np.allclose(project_codeword((x, y), t, R), project_codeword((y, x), t, R))
