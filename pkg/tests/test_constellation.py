import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfia.constellation import (
    Kind,
    bits_to_symbols,
    enumerate_indices,
    enumerate_vectors,
    make_constellation,
    parse_constellation,
    symbols_to_bits,
    vector_index,
)
from bfia.errors import ParameterError, SearchSpaceError

ALPHABETS = [("psk", 2), ("psk", 4), ("psk", 8), ("psk", 16), ("qam", 4), ("qam", 16), ("qam", 64)]


@pytest.mark.parametrize("kind,order", ALPHABETS)
def test_invariants(kind, order):
    c = make_constellation(kind, order)
    assert c.size == order == 2**c.bits_per_symbol
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
    assert c.is_symmetric()
    gaps = np.abs(c.points[:, None] - c.points[None, :]) + np.eye(order)
    assert gaps.min() > 1e-6


def test_bpsk_and_qpsk_points():
    assert np.allclose(make_constellation("psk", 2).points, [1, -1])
    q = make_constellation("psk", 4)
    assert np.isclose(q.points[0], np.exp(1j * np.pi / 4))
    assert np.allclose(sorted(np.round(q.points * np.sqrt(2)), key=lambda z: (z.real, z.imag)),
                       [-1 - 1j, -1 + 1j, 1 - 1j, 1 + 1j])


def test_qpsk_equals_4qam_as_sets():
    a = make_constellation("psk", 4).points
    b = make_constellation("qam", 4).points
    assert np.abs(a[:, None] - b[None, :]).min(axis=1).max() < 1e-12


def test_16qam_normalisation():
    c = make_constellation("qam", 16)
    assert np.isclose(np.abs(c.points).max(), 3 * np.sqrt(2) / np.sqrt(10))


@pytest.mark.parametrize("order", [8, 16])
def test_psk_gray_neighbours_differ_in_one_bit(order):
    c = make_constellation("psk", order)
    ang = np.angle(c.points)
    by_angle = np.argsort(ang)
    for a, b in zip(by_angle, np.roll(by_angle, -1)):
        assert bin(int(a) ^ int(b)).count("1") == 1


def test_qam_gray_neighbours_differ_in_one_bit():
    c = make_constellation("qam", 16)
    step = 2 / np.sqrt(10)
    for a, b in itertools.combinations(range(16), 2):
        if np.isclose(abs(c.points[a] - c.points[b]), step):
            assert bin(a ^ b).count("1") == 1


@pytest.mark.parametrize("kind,order", [("psk", 3), ("psk", 6), ("qam", 8), ("qam", 2), ("qam", 12), ("fsk", 4)])
def test_invalid_orders(kind, order):
    with pytest.raises(ParameterError):
        make_constellation(kind, order)


@pytest.mark.parametrize("text,name", [("bpsk", "bpsk"), ("QPSK", "qpsk"), ("16qam", "qam:16"), ("psk:8", "psk:8"), ("qam:64", "qam:64")])
def test_parse(text, name):
    assert parse_constellation(text).name == name


def test_parse_rejects_garbage():
    with pytest.raises(ParameterError):
        parse_constellation("16-ary")


def test_kind_enum():
    assert make_constellation(Kind.QAM, 16).kind is Kind.QAM


def test_points_read_only(qpsk):
    with pytest.raises(ValueError):
        qpsk.points[0] = 0


def test_bits_msb_first(qpsk):
    assert symbols_to_bits(qpsk, [0, 1, 2, 3]).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALPHABETS), st.lists(st.integers(0, 63), min_size=0, max_size=40))
def test_bits_round_trip(alpha, raw):
    c = make_constellation(*alpha)
    idx = np.array([r % c.size for r in raw], dtype=int)
    bits = symbols_to_bits(c, idx)
    assert bits.dtype == np.uint8
    assert np.array_equal(bits_to_symbols(c, bits.ravel()), idx)


def test_bits_errors(qpsk):
    with pytest.raises(ParameterError):
        symbols_to_bits(qpsk, [4])
    with pytest.raises(ParameterError):
        bits_to_symbols(qpsk, [1, 0, 1])
    with pytest.raises(ParameterError):
        bits_to_symbols(qpsk, [2, 0])


def test_enumeration_order(qpsk):
    v = enumerate_vectors(qpsk, 2)
    assert v.shape == (16, 2)
    expect = [(a, b) for a in range(4) for b in range(4)]
    assert np.array_equal(enumerate_indices(4, 2), np.array(expect))
    assert np.array_equal(v[5], qpsk.points[[1, 1]])
    assert np.array_equal(vector_index(qpsk, enumerate_indices(4, 3)), np.arange(64))


def test_enumeration_is_complete_and_distinct(qpsk):
    v = enumerate_vectors(qpsk, 3)
    assert len({tuple(np.round(r, 9)) for r in v}) == 64


def test_enumeration_cap(qpsk):
    with pytest.raises(SearchSpaceError):
        enumerate_vectors(qpsk, 11)
    with pytest.raises(SearchSpaceError):
        enumerate_vectors(qpsk, 3, cap=63)
    with pytest.raises(ParameterError):
        enumerate_vectors(qpsk, 0)
