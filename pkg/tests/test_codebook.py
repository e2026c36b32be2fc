import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdram.codebook import (
    GENERAL,
    PRODUCT,
    Codebook,
    Codeword,
    TokenAlphabet,
    build_general_codebook,
    build_product_codebook,
    check_bifix_free,
    kraft_mcmillan_sum,
    min_hamming_distance,
    pua_alphabets,
    square_alphabet_sizes,
)
from hdram.errors import (
    CapacityError,
    DuplicateCodewordError,
    UndefinedDistanceError,
    ValidationError,
)


def bifix_oracle(words):
    """Ordered pairs (i, j) where word i starts or ends word j, by string methods."""
    out = set()
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            if i == j:
                continue
            if b.startswith(a):
                out.add((i, j, "prefix"))
            if b.endswith(a):
                out.add((i, j, "suffix"))
    return out


def hamming_oracle(words):
    return min(sum(x != y for x, y in zip(a, b)) for a, b in itertools.combinations(words, 2))


# -- alphabets and codewords -------------------------------------------------

def test_alphabet_rejects_duplicates():
    with pytest.raises(ValidationError):
        TokenAlphabet(("a", "b", "a"))


@pytest.mark.parametrize("symbols, weights", [
    (("a", "b"), (0.5, 0.6)),  # sums past 1
    (("a", "b"), (0.0, 0.5)),  # zero weight
    (("a",), (1.2,)),
    (("a", "b"), (0.5,)),  # length mismatch
])
def test_alphabet_rejects_bad_weights(symbols, weights):
    with pytest.raises(ValidationError):
        TokenAlphabet(symbols, weights)


def test_alphabet_accepts_subprobability_weights():
    a = TokenAlphabet(("x", "y"), (0.25, 0.5))
    assert a.weights == (0.25, 0.5) and "x" in a and len(a) == 2


def test_empty_codeword_rejected():
    with pytest.raises(ValidationError):
        Codeword(0, ())


# -- product construction ----------------------------------------------------

def test_worked_two_by_two(rs_code):
    assert [c.text() for c in rs_code] == ["r1s1", "r1s2", "r2s1", "r2s2"]
    assert rs_code.kind == PRODUCT
    assert rs_code.bifix_free and rs_code.min_distance == 1


def test_worked_two_by_two_letter_reading(rs_letter_code):
    assert [c.text() for c in rs_letter_code] == ["r1", "r2", "s1", "s2"]


def test_steering_code(steering_code):
    assert steering_code[0].tokens == ("a", "d")
    assert steering_code.index_of(("b", "e")) == 4
    assert len(steering_code) == 9


def test_single_symbol_product():
    cb = build_product_codebook([["x"]], 1)
    assert [c.tokens for c in cb] == [("x",)]
    assert cb.min_distance is None


def test_capacity_errors():
    with pytest.raises(CapacityError):
        build_product_codebook([["a", "b"], ["c"]], 3)
    with pytest.raises(CapacityError):
        build_product_codebook([["a"]], 0)
    with pytest.raises(ValidationError):
        build_product_codebook([["a", "a"]], 1)
    with pytest.raises(ValidationError):
        build_product_codebook([[]], 1)


@given(rows=st.integers(1, 6), cols=st.integers(1, 6), data=st.data())
def test_row_major_index_arithmetic(rows, cols, data):
    cap = data.draw(st.integers(1, rows * cols))
    R = [f"r{i}" for i in range(rows)]
    C = [f"c{j}" for j in range(cols)]
    cb = build_product_codebook([R, C], cap)
    for cw in cb:
        assert cw.tokens == (R[cw.index // cols], C[cw.index % cols])


def test_product_is_deterministic(steering_code):
    again = build_product_codebook([["a", "b", "c"], ["d", "e", "f"]], 9)
    assert again == steering_code
    assert again.to_json() == steering_code.to_json()


def test_square_sizes_and_pua():
    assert square_alphabet_sizes(16) == [4, 4]
    assert square_alphabet_sizes(17) == [5, 5]
    assert square_alphabet_sizes(1) == [1, 1]
    assert square_alphabet_sizes(27, dims=3) == [3, 3, 3]
    alphas = pua_alphabets([2, 3])
    assert alphas[0].symbols == ("", "")
    assert alphas[1].symbols[0] == ""
    with pytest.raises(CapacityError):
        pua_alphabets([7000])


# -- bifix-free ----------------------------------------------------------------

def test_bifix_examples():
    assert check_bifix_free(["ad", "ae", "bd", "be"]) == (True, [])
    ok, v = check_bifix_free(["a", "ab"])
    assert not ok and v == [(0, 1, "prefix")]


def test_bifix_duplicates_violate_both_ways():
    ok, v = check_bifix_free([("x", "y"), ("x", "y")])
    assert not ok
    assert set(v) == {(0, 1, "prefix"), (0, 1, "suffix"), (1, 0, "prefix"), (1, 0, "suffix")}


def test_bifix_requires_input():
    with pytest.raises(ValidationError):
        check_bifix_free([])


def test_bifix_two_subsets_short_binary_strings():
    words = ["".join(p) for n in range(1, 4) for p in itertools.product("01", repeat=n)]
    for a, b in itertools.combinations(words, 2):
        ok, v = check_bifix_free([a, b])
        assert set(v) == bifix_oracle([a, b])
        assert ok == (not v)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("abc"), st.sampled_from("abc")),
                min_size=1, max_size=27, unique=True))
def test_distinct_fixed_length_always_bifix_free(words):
    assert check_bifix_free(words) == (True, [])


def test_bifix_uses_codeword_indices():
    cws = [Codeword(0, ("a",)), Codeword(1, ("b", "a"))]
    assert check_bifix_free(cws) == (False, [(0, 1, "suffix")])


# -- Kraft-McMillan ------------------------------------------------------------

@pytest.mark.parametrize("count, length, q", [(4, 2, 2), (9, 2, 3)])
def test_kraft_examples(count, length, q):
    assert kraft_mcmillan_sum([length] * count, q) == 1.0


def test_kraft_mixed_lengths():
    assert kraft_mcmillan_sum(["0", "10", "110", "111"], 2) == 1.0
    assert kraft_mcmillan_sum([1, 2, 3, 3], 2) == 1.0


def test_kraft_rejects_small_q_and_empty():
    with pytest.raises(ValidationError):
        kraft_mcmillan_sum([1], 1)
    with pytest.raises(ValidationError):
        kraft_mcmillan_sum([0], 2)


@given(st.lists(st.integers(1, 12), min_size=1, max_size=40), st.integers(2, 7))
def test_kraft_matches_rational_oracle(lengths, q):
    exact = sum(Fraction(1, q**n) for n in lengths)
    assert kraft_mcmillan_sum(lengths, q) == float(exact)


def test_kraft_full_product_codes():
    for q in (2, 3, 5):
        for L in (1, 2, 3):
            alphas = [[f"s{p}_{i}" for i in range(q)] for p in range(L)]
            cb = build_product_codebook(alphas, q**L)
            assert kraft_mcmillan_sum(cb.codewords, q) == 1.0


# -- Hamming distance ----------------------------------------------------------

def test_hamming_examples(steering_code):
    assert min_hamming_distance(steering_code) == 1
    assert min_hamming_distance([("a", "a"), ("b", "b")]) == 2
    with pytest.raises(DuplicateCodewordError):
        min_hamming_distance([("a", "d"), ("a", "d")])
    with pytest.raises(ValidationError):
        min_hamming_distance([("a",), ("a", "b")])
    with pytest.raises(UndefinedDistanceError):
        min_hamming_distance([("a",)])


@given(st.lists(st.text("xyz", min_size=4, max_size=4), min_size=2, max_size=20, unique=True))
def test_hamming_matches_brute_force(words):
    assert min_hamming_distance(words) == hamming_oracle(words)


def test_full_product_min_distance_is_one():
    for sizes in ([2, 2], [3, 4], [2, 2, 2]):
        alphas = pua_alphabets(sizes)
        n = 1
        for s in sizes:
            n *= s
        assert build_product_codebook(alphas, n).min_distance == 1


# -- general codebooks and persistence ----------------------------------------

def test_general_codebook_variable_lengths():
    cb = build_general_codebook([("0",), ("1", "0"), ("1", "1", "0")])
    assert cb.kind == GENERAL and cb.min_distance is None
    assert not cb.bifix_free  # "0" ends "10"
    assert (0, 1, "suffix") in cb.violations


def test_general_codebook_keeps_duplicates():
    cb = build_general_codebook([("a", "b"), ("a", "b")])
    assert not cb.bifix_free and cb.min_distance == 0


def test_codebook_file_format(rs_code):
    doc = json.loads(rs_code.to_json())
    assert doc == {
        "kind": "product",
        "alphabets": [["r1", "r2"], ["s1", "s2"]],
        "codewords": [{"index": i, "tokens": list(c.tokens)} for i, c in enumerate(rs_code)],
        "min_distance": 1,
        "bifix_free": True,
    }


def test_round_trip_is_byte_stable(tmp_path, steering_code):
    path = tmp_path / "cb.json"
    steering_code.save(path)
    first = path.read_bytes()
    Codebook.load(path).save(path)
    assert path.read_bytes() == first
    assert Codebook.load(path) == steering_code


def test_pua_round_trip(tmp_path):
    cb = build_product_codebook(pua_alphabets([3, 3]), 7)
    path = tmp_path / "pua.json"
    cb.save(path)
    assert "" in path.read_text(encoding="utf-8")
    assert Codebook.load(path) == cb


@pytest.mark.parametrize("field, value", [("bifix_free", False), ("min_distance", 2), ("kind", "weird")])
def test_tampered_documents_rejected(rs_code, field, value):
    doc = rs_code.to_dict()
    doc[field] = value
    with pytest.raises(ValidationError):
        Codebook.from_dict(doc)


def test_product_structure_enforced():
    doc = build_product_codebook([["a", "b"], ["c", "d"]], 2).to_dict()
    doc["codewords"][1]["tokens"] = ["c", "a"]
    with pytest.raises(ValidationError):
        Codebook.from_dict(doc)
    doc["codewords"][1] = {"index": 5, "tokens": ["a", "d"]}
    with pytest.raises(ValidationError):
        Codebook.from_dict(doc)


def test_malformed_document():
    with pytest.raises(ValidationError):
        Codebook.from_dict({"kind": "product"})
