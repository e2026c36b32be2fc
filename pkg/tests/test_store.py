import math

import numpy as np
import pytest

from hdram.codebook import build_general_codebook, build_product_codebook
from hdram.errors import DuplicateAddressError, EmptyMemoryError, ValidationError
from hdram.latent_channel import init_embeddings, make_phase_operator, project_codeword
from hdram.store import (
    BASELINE,
    HYPERTOKEN,
    arm_channel,
    arm_setup,
    build_bank,
    calibrate_reject_threshold,
    capacity_curve,
    child_seed,
    impostor_margins,
    lookup_kv,
    lookup_vk,
    read_kv,
    round_trip_rate,
    simulate_recall,
    store,
)

from conftest import EXAMPLE_PHRASES


def channel(symbols, dim=64, seed=0):
    return init_embeddings(symbols, dim, seed), make_phase_operator(dim, seed + 1)


def hebbian_scores_oracle(K, V, j):
    """Cosines of the K:V read for key j, built term by term without the trace."""
    read = sum((K[i] @ K[j]) * V[i] for i in range(len(K)))
    return (V @ read) / (np.linalg.norm(V, axis=1) * np.linalg.norm(read))


def test_single_pair_trace_is_one_outer_product():
    cb = build_product_codebook([["k"], ["x"]], 1)
    vb = build_general_codebook([("v",)])
    table, phase = channel(["k", "x", "v"])
    bank = store([(cb[0], vb[0])], table, phase)
    k = project_codeword(cb[0], table, phase)
    v = project_codeword(vb[0], table, phase)
    assert np.array_equal(bank.trace, np.outer(k, v))
    res = lookup_kv(bank, cb[0], table, phase)
    assert res.best_index == 0 and res.margin > 0
    assert lookup_vk(bank, vb[0], table, phase).best_index == 0


def test_empty_bank():
    table, phase = channel(["a"])
    bank = store([], table, phase)
    assert bank.pair_count == 0 and not bank.trace.any() and bank.trace.shape == (64, 64)
    with pytest.raises(EmptyMemoryError):
        lookup_kv(bank, ("a",), table, phase)
    with pytest.raises(EmptyMemoryError):
        read_kv(bank, np.ones(64))


def test_worked_prompt_example_round_trip(rs_letter_code):
    phrases = EXAMPLE_PHRASES + ["over the hills", "and far away"]
    values = build_general_codebook([(p,) for p in phrases])
    pairs = [(rs_letter_code[i], values[i], phrases[i]) for i in range(4)]
    table, phase = channel(rs_letter_code.symbols + values.symbols, dim=256)
    bank = store(pairs, table, phase)
    r2 = rs_letter_code[rs_letter_code.index_of(("r", "2"))]
    hit = lookup_kv(bank, r2, table, phase)
    assert bank.payload(hit.best_index) == "jumped over the lazy dog"
    assert lookup_vk(bank, values[0], table, phase).best_index == 0


def test_steering_reverse_lookup(steering_code):
    labels = ["steer_left", "steer_ahead", "steer_right", "slow", "hold_position",
              "speed_up", "reverse", "park", "stop"]
    values = build_general_codebook([(x,) for x in labels])
    table, phase = channel(steering_code.symbols + values.symbols, dim=256, seed=4)
    bank = store(zip(steering_code, values, labels), table, phase)
    k = lookup_vk(bank, values[0], table, phase).best_index
    assert bank.keys[k].tokens == ("a", "d")
    k = lookup_vk(bank, values[labels.index("hold_position")], table, phase).best_index
    assert bank.keys[k].text() == "be"


def test_duplicate_and_non_bifix_keys_rejected():
    vb = build_general_codebook([("v0",), ("v1",)])
    table, phase = channel(["a", "b", "v0", "v1"])
    k = build_general_codebook([("a",), ("a", "b")])
    with pytest.raises(DuplicateAddressError):
        store([(k[0], vb[0]), (k[0], vb[1])], table, phase)
    with pytest.raises(ValidationError):
        store([(k[0], vb[0]), (k[1], vb[1])], table, phase)
    with pytest.raises(ValidationError):
        store([(k[0],)], table, phase)


def test_trace_recomputable_and_linear():
    setup = arm_setup(16)
    table, phase = arm_channel(setup, 64, 3)
    pairs = list(zip(setup.keys, setup.values))
    full = store(pairs, table, phase)
    assert full.pair_count == 16 == len(full.key_projections) == len(full.value_projections)
    assert np.max(np.abs(full.recompute_trace() - full.trace)) <= 1e-9
    a, b = store(pairs[:7], table, phase), store(pairs[7:], table, phase)
    assert np.allclose(full.trace, a.trace + b.trace, rtol=0, atol=1e-12)
    again = store(pairs, table, phase)
    assert np.array_equal(again.trace, full.trace)


def test_noise_free_recall_d256_n16_matches_crosstalk_oracle():
    setup = arm_setup(16)
    for seed in range(50):
        table, phase = arm_channel(setup, 256, seed)
        bank = store(zip(setup.keys, setup.values), table, phase)
        for j, key in enumerate(setup.keys):
            res = lookup_kv(bank, key, table, phase)
            oracle = hebbian_scores_oracle(bank.key_projections, bank.value_projections, j)
            assert np.allclose(res.scores, oracle, atol=1e-12)
            assert res.best_index == j == int(np.argmax(oracle))
            assert lookup_vk(bank, setup.values[j], table, phase).best_index == j


def test_impostor_margins_and_threshold():
    margins = impostor_margins(256, 16, 200, seed=1)
    m0 = calibrate_reject_threshold(256, 16, 200, seed=1)
    assert m0 == pytest.approx(np.quantile(margins, 0.99))
    assert np.mean(margins <= m0) >= 0.99
    assert np.all(margins >= 0)


def test_bidirectional_consistency_above_threshold():
    m0 = calibrate_reject_threshold(256, 16, 300, seed=2)
    setup = arm_setup(16)
    checked = 0
    for t in range(40):
        table, phase = arm_channel(setup, 256, child_seed(7, t))
        bank = store(zip(setup.keys, setup.values), table, phase)
        for j, key in enumerate(setup.keys):
            for sigma in (0.0, 0.05):
                fwd = lookup_kv(bank, key, table, phase, noise_sigma=sigma, seed=child_seed(t, j))
                if fwd.margin <= m0:
                    continue
                back = lookup_vk(bank, bank.values[fwd.best_index], table, phase,
                                 noise_sigma=sigma, seed=child_seed(t, j, 1))
                assert back.best_index == fwd.best_index
                checked += 1
    assert checked > 500


def test_build_bank_shape_check():
    with pytest.raises(ValidationError):
        build_bank(np.zeros((2, 4)), np.zeros((3, 4)))


# -- arms and Monte Carlo --------------------------------------------------------

def test_arm_setups():
    ht = arm_setup(10)
    assert len(ht.keys) == 10 and all(len(k) == 2 for k in ht.keys)
    assert ht.key_codebook.bifix_free and ht.value_codebook.bifix_free
    assert not set(ht.key_codebook.symbols) & set(ht.value_codebook.symbols)
    base = arm_setup(10, BASELINE)
    assert [k.tokens for k in base.keys[:2]] == [("k0",), ("k1",)]
    with pytest.raises(ValidationError):
        arm_setup(3, "other")


def test_child_seed_is_stable_and_distinct():
    assert child_seed(0, 1) == child_seed(0, 1)
    assert len({child_seed(0, i) for i in range(100)}) == 100
    assert 0 <= child_seed(123, 4, 5) < 2**63


def test_simulate_recall_deterministic():
    a = simulate_recall(32, 8, 0.1, 5, seed=9)
    b = simulate_recall(32, 8, 0.1, 5, seed=9)
    assert a == b
    assert a.collision_rate == pytest.approx(1 - a.recall_kv)
    assert 0 <= a.entropy_bits <= math.log2(8)


def test_simulate_recall_matches_public_api():
    """The batched simulator must agree with per-key lookups on the same channel."""
    st = simulate_recall(64, 9, 0.0, 3, seed=5)
    setup = arm_setup(9)
    hits_kv = hits_vk = 0
    for t in range(3):
        table, phase = arm_channel(setup, 64, child_seed(5, t))
        bank = store(zip(setup.keys, setup.values), table, phase)
        for j in range(9):
            hits_kv += lookup_kv(bank, setup.keys[j], table, phase).best_index == j
            hits_vk += lookup_vk(bank, setup.values[j], table, phase).best_index == j
    assert st.recall_kv == hits_kv / 27 and st.recall_vk == hits_vk / 27


def test_simulate_validation():
    with pytest.raises(ValidationError):
        simulate_recall(32, 4, 0.0, 0, 0)
    with pytest.raises(ValidationError):
        simulate_recall(32, 4, -0.1, 1, 0)


def test_capacity_curve_single_pair_is_perfect():
    for row in capacity_curve([8, 32, 128], [1], 0.0, 10, seed=0):
        assert row["recall_kv"] == row["recall_vk"] == 1.0


def _se(p, count):
    return math.sqrt(max(p * (1 - p), 1e-12) / count)


def test_capacity_trends():
    trials = 200
    by_d = capacity_curve([32, 64, 128], [16], 0.1, trials, seed=1)
    for lo, hi in zip(by_d, by_d[1:]):
        count = trials * 16
        slack = 2 * math.hypot(_se(lo["recall_kv"], count), _se(hi["recall_kv"], count))
        assert hi["recall_kv"] >= lo["recall_kv"] - slack
    by_n = capacity_curve([64], [4, 16, 32], 0.1, trials, seed=1)
    for lo, hi in zip(by_n, by_n[1:]):
        slack = 2 * math.hypot(_se(lo["recall_kv"], trials * lo["n"]), _se(hi["recall_kv"], trials * hi["n"]))
        assert hi["recall_kv"] <= lo["recall_kv"] + slack


def test_round_trip_small():
    assert round_trip_rate(256, 16, 0.05, 100, seed=0) >= 0.99


def test_hypertoken_beats_baseline_noise_free():
    ht = simulate_recall(64, 16, 0.0, 20, 0, HYPERTOKEN)
    base = simulate_recall(64, 16, 0.0, 20, 0, BASELINE)
    assert ht.recall_kv > base.recall_kv
