import pytest

from hdram import kernels
from hdram.codebook import build_product_codebook

# 2x2 and 3x3 codes from the worked prompt examples
EXAMPLE_PHRASES = ["the quick brown fox", "jumped over the lazy dog"]
STEERING = {
    ("a", "d"): "steer_left",
    ("b", "e"): "hold_position",
}


@pytest.fixture
def rs_code():
    return build_product_codebook([["r1", "r2"], ["s1", "s2"]], 4)


@pytest.fixture
def rs_letter_code():
    """Reading where r/s is one dimension and the digit the other: r1, r2, s1, s2."""
    return build_product_codebook([["r", "s"], ["1", "2"]], 4)


@pytest.fixture
def steering_code():
    return build_product_codebook([["a", "b", "c"], ["d", "e", "f"]], 9)


@pytest.fixture(params=kernels.available())
def each_backend(request):
    with kernels.backend(request.param):
        yield request.param
