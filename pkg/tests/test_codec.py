import pytest
from hypothesis import given, strategies as st

from spin_processor.codec import (
    BandPlan,
    bits_to_int,
    bitwise_not_oracle,
    int_to_bits,
    slot_frequency,
)

X64 = 7348754808244345529
Y64 = 11097989265465206086


def test_int_to_bits_examples():
    assert int_to_bits(5, 3) == [1, 0, 1]
    assert int_to_bits(0, 8) == [0] * 8
    assert bits_to_int(int_to_bits(X64, 64)) == X64


def test_bits_to_int_examples():
    assert bits_to_int([1, 0, 1]) == 5
    assert bits_to_int([]) == 0


@pytest.mark.parametrize("x, n", [(8, 3), (-1, 4), (1, 0)])
def test_int_to_bits_rejects_out_of_range(x, n):
    with pytest.raises(ValueError):
        int_to_bits(x, n)


def test_bit_limits():
    with pytest.raises(ValueError):
        int_to_bits(0, 65)
    with pytest.raises(ValueError):
        bits_to_int([0] * 65)
    with pytest.raises(ValueError):
        bits_to_int([0, 2])


@given(st.integers(1, 64).flatmap(lambda n: st.tuples(st.integers(0, 2**n - 1), st.just(n))))
def test_round_trip(xn):
    x, n = xn
    bits = int_to_bits(x, n)
    assert len(bits) == n
    assert bits_to_int(bits) == x


def test_not_oracle_examples():
    assert bitwise_not_oracle(X64, 64) == Y64
    assert X64 + Y64 == 2**64 - 1
    assert bitwise_not_oracle(0, 8) == 255


@given(st.integers(1, 64).flatmap(lambda n: st.tuples(st.integers(0, 2**n - 1), st.just(n))))
def test_not_oracle_is_bitwise_involution(xn):
    x, n = xn
    y = bitwise_not_oracle(x, n)
    assert bitwise_not_oracle(y, n) == x
    assert [1 - b for b in int_to_bits(x, n)] == int_to_bits(y, n)


def test_not_oracle_range():
    with pytest.raises(ValueError):
        bitwise_not_oracle(256, 8)


def test_band_plan():
    band = BandPlan(100.0, 25.0, 8)
    assert slot_frequency(band, 0) == 100.0
    assert slot_frequency(band, 7) == 100.0 + 7 * 25.0
    f = band.frequencies
    assert all(b > a for a, b in zip(f, f[1:]))
    assert band.f_stop == f[-1]


def test_band_plan_reversed_and_validation():
    band = BandPlan(100.0, 25.0, 4, reversed=True)
    assert band.frequencies == [175.0, 150.0, 125.0, 100.0]
    with pytest.raises(IndexError):
        band.slot_index(4)
    with pytest.raises(ValueError):
        BandPlan(0.0, 0.0, 4)
    with pytest.raises(ValueError):
        BandPlan(0.0, 1.0, 0)
