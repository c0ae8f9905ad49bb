import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfia.channel import crandn, draw_channel, exact_interference_cov, transmit
from bfia.constellation import enumerate_vectors
from bfia.detect import (
    DetectorKind,
    GmmPdf,
    gmm_eval,
    gmm_logpdf,
    gmm_sum,
    joint_ml_decode,
    md_detect,
    ml_detect_blind_marginal,
    ml_detect_full,
    noise_pdf,
)
from bfia.errors import NumericError, ParameterError, SearchSpaceError
from bfia.estimate import exact_interference_pdf
from bfia.precoder import Scenario, build_precoders
from bfia.rotations import mean_set, random_useful_unitary


def test_gmm_peak():
    assert np.isclose(gmm_eval(GmmPdf([0], 1.0), 0), 1 / np.pi)


def test_gmm_symmetric_pair():
    assert np.isclose(gmm_eval(GmmPdf([1, -1], 1.0), 0), np.exp(-1) / np.pi)


def test_gmm_integrates_to_one():
    g = GmmPdf([1 + 1j, -0.5, 2j], 0.3)
    x = np.linspace(-5, 5, 801)
    xx, yy = np.meshgrid(x, x)
    area = (x[1] - x[0]) ** 2
    assert abs(gmm_eval(g, xx + 1j * yy).sum() * area - 1) < 1e-3


def test_gmm_validation():
    with pytest.raises(ParameterError):
        GmmPdf([], 1.0)
    with pytest.raises(ParameterError):
        GmmPdf([0], 0.0)


def test_logpdf_finite_far_away():
    g = GmmPdf([0, 1], 1e-4)
    v = gmm_logpdf(g, np.array([1e3, -1e3j]))
    assert np.all(np.isfinite(v))
    assert np.isclose(v[0], -(999**2) / 1e-4 - np.log(np.pi * 1e-4) - np.log(2))


def test_gmm_logpdf_matches_direct(rng):
    g = GmmPdf(crandn(rng, 7), 0.4)
    z = crandn(rng, 30)
    direct = np.mean(np.exp(-np.abs(z[:, None] - g.means) ** 2 / 0.4), axis=1) / (np.pi * 0.4)
    assert np.allclose(gmm_eval(g, z), direct)
    assert g.pdf(z).shape == (30,) and np.allclose(g.logpdf(z), np.log(direct))


def test_gmm_sum_examples():
    g = gmm_sum(GmmPdf([1, -1], 0.1), GmmPdf([2, -2], 0.1))
    assert sorted(g.means.real) == [-3, -1, 1, 3]
    assert g.variance == 0.1
    ident = gmm_sum(GmmPdf([0], 0.1), GmmPdf([1j, 2], 0.1))
    assert np.array_equal(ident.means, [1j, 2])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_gmm_sum_cardinality_and_commutativity(a, b, seed):
    r = np.random.default_rng(seed)
    g1, g2 = GmmPdf(crandn(r, a), 0.1), GmmPdf(crandn(r, b), 0.1)
    s12, s21 = gmm_sum(g1, g2), gmm_sum(g2, g1)
    assert s12.n_components == a * b
    key = lambda m: np.sort_complex(np.round(m, 10))  # noqa: E731
    assert np.allclose(key(s12.means), key(s21.means))


def test_gmm_sum_cap():
    with pytest.raises(SearchSpaceError):
        gmm_sum(GmmPdf(np.zeros(10), 1.0), GmmPdf(np.zeros(10), 1.0), cap=99)


def test_detector_kind_strings():
    assert [k.value for k in DetectorKind] == ["md-known", "md-est", "ml-known", "ml-blind"]


def _siso(rng, k=2, l=3, sigma2=0.01, alpha=1.0):  # noqa: E741
    s = Scenario("ic", k, 1, 1, l)
    d = l - k + 1
    p = build_precoders(s, d, [random_useful_unitary(d, rng).matrix for _ in range(k)])
    return s, p, draw_channel(s, np.where(np.eye(k, dtype=bool), 1.0, alpha), sigma2, rng)


def test_md_noiseless_recovers(rng, qpsk):
    s, p, ch = _siso(rng, alpha=0.0, sigma2=1e-12)
    cand = enumerate_vectors(qpsk, 2)
    for t in range(16):
        y = ch.h(0, 0) @ p.precoders[0] @ cand[t]
        vec, idx = md_detect(y, ch.h(0, 0), p.precoders[0], np.eye(3) * 1e-3, cand)
        assert idx == t and np.array_equal(vec, cand[t])


def test_md_white_equals_euclidean(rng, qpsk):
    cand = enumerate_vectors(qpsk, 2)
    h, q = 0.7 - 0.2j, np.array([[1, 0], [0, 0.6], [0, 0.8]])
    y = crandn(rng, (200, 3))
    _, idx = md_detect(y, h, q, 0.3 * np.eye(3), cand)
    pts = (h * q @ cand.T).T
    ref = np.argmin(np.sum(np.abs(y[:, None, :] - pts[None]) ** 2, axis=2), axis=1)
    assert np.array_equal(idx, ref)


def test_md_scale_invariant(rng, qpsk):
    s, p, ch = _siso(rng, 3, 4, 0.1)
    blk = transmit(ch, p, rng.integers(4, size=(3, 300, 2)), qpsk, rng)
    r = exact_interference_cov(ch, p, 0)
    cand = enumerate_vectors(qpsk, 2)
    a = md_detect(blk.y[0], ch.h(0, 0), p.precoders[0], r, cand)[1]
    b = md_detect(blk.y[0], ch.h(0, 0), p.precoders[0], 7.5 * r, cand)[1]
    assert np.array_equal(a, b)


def test_md_tie_breaks_low(qpsk):
    cand = np.array([[1.0], [1.0], [-1.0]])
    assert md_detect(np.array([1.0]), 1.0, np.eye(1), np.eye(1), cand)[1] == 0


def test_md_singular_cov(qpsk):
    with pytest.raises(NumericError, match="sigma2"):
        md_detect(np.zeros(2), 1.0, np.eye(2), np.zeros((2, 2)), enumerate_vectors(qpsk, 2))


def test_ml_single_user_equals_md(rng, qpsk):
    s = Scenario("ic", 1, 1, 1, 2)
    p = build_precoders(s, 2, [random_useful_unitary(2, rng).matrix])
    ch = draw_channel(s, 1.0, 0.2, rng)
    blk = transmit(ch, p, rng.integers(4, size=(1, 400, 2)), qpsk, rng)
    cand = enumerate_vectors(qpsk, 2)
    a = ml_detect_full(blk.y[0], ch, p, 0, qpsk)
    b = md_detect(blk.y[0], ch.h(0, 0), p.precoders[0], 0.2 * np.eye(2), cand)[1]
    assert np.array_equal(a, b)


def test_ml_zero_interference_equals_white_md(rng, qpsk):
    s, p, ch = _siso(rng, 3, 4, 0.3, alpha=0.0)
    blk = transmit(ch, p, rng.integers(4, size=(3, 400, 2)), qpsk, rng)
    a = ml_detect_full(blk.y[0], ch, p, 0, qpsk)
    b = md_detect(blk.y[0], ch.h(0, 0), p.precoders[0], 0.3 * np.eye(4), enumerate_vectors(qpsk, 2))[1]
    assert np.array_equal(a, b)


def test_ml_matches_joint_oracle(rng, qpsk):
    s, p, ch = _siso(rng, 2, 3, 0.01)
    blk = transmit(ch, p, rng.integers(4, size=(2, 300, 2)), qpsk, rng)
    a = ml_detect_full(blk.y[0], ch, p, 0, qpsk)
    b = joint_ml_decode(blk.y[0], ch, p, 0, qpsk)
    assert np.mean(a == b) >= 0.99


def test_ml_single_vector_and_cap(rng, qpsk):
    s, p, ch = _siso(rng, 3, 4, 0.1)
    y = transmit(ch, p, rng.integers(4, size=(3, 1, 2)), qpsk, rng).y[0, 0]
    assert isinstance(ml_detect_full(y, ch, p, 0, qpsk), int)
    with pytest.raises(SearchSpaceError):
        ml_detect_full(y, ch, p, 0, qpsk, cap=1000)


def test_blind_with_noise_pdf_is_nearest_neighbour(rng, qpsk):
    s, p, ch = _siso(rng, 2, 3, 0.1)
    y = transmit(ch, p, rng.integers(4, size=(2, 300, 2)), qpsk, rng).y[0]
    dm = p.dim_map(0)
    h = ch.gains[0, 0, 0, 0]
    cand = enumerate_vectors(qpsk, 2)
    res = ml_detect_blind_marginal(y, h, p.precoders[0], dm, noise_pdf(0.1), noise_pdf(0.1), cand)
    rows = list(dm.pure + dm.mixed)
    ref = (h * p.precoders[0][rows] @ cand.T).T
    nn = np.argmin(np.sum(np.abs(y[:, None, rows] - ref[None]) ** 2, axis=2), axis=1)
    assert np.array_equal(res.indices, nn)
    assert not res.approximate


def test_blind_missing_pdf(rng, qpsk):
    s, p, ch = _siso(rng, 2, 3)
    with pytest.raises(ParameterError, match="mixed resource"):
        ml_detect_blind_marginal(np.zeros((1, 3)), 1.0, p.precoders[0], p.dim_map(0), noise_pdf(1.0), {},
                                 enumerate_vectors(qpsk, 2))


def test_blind_flags_approximation(rng, bpsk):
    s, p, ch = _siso(rng, 2, 5, 0.1)
    dm = p.dim_map(0)
    assert len(dm.mixed) == 3
    res = ml_detect_blind_marginal(np.zeros((2, 5)), 1.0, p.precoders[0], dm, noise_pdf(0.1),
                                   {r: noise_pdf(0.1) for r in dm.mixed}, enumerate_vectors(bpsk, 4))
    assert res.approximate


def test_k3_composite_mean_set(rng, qpsk):
    s, p, ch = _siso(rng, 3, 4, 0.05)
    g = exact_interference_pdf(ch, p, 0, qpsk)
    m2 = ch.gains[0, 1, 0, 0] * mean_set(p.unitaries[1], 0, qpsk)
    m3 = ch.gains[0, 2, 0, 0] * mean_set(p.unitaries[2], 0, qpsk)
    expect = (m2[:, None] + m3[None, :]).ravel()
    key = lambda m: np.sort_complex(np.round(m, 9))  # noqa: E731
    assert g.n_components == 256 and g.variance == 0.05
    assert np.allclose(key(g.means), key(expect))


def test_detectors_stay_in_alphabet(rng, qpsk):
    s, p, ch = _siso(rng, 2, 3, 1.0)
    y = 10 * crandn(rng, (50, 3))
    cand = enumerate_vectors(qpsk, 2)
    for idx in (
        md_detect(y, ch.h(0, 0), p.precoders[0], exact_interference_cov(ch, p, 0), cand)[1],
        ml_detect_full(y, ch, p, 0, qpsk),
        ml_detect_blind_marginal(y, ch.gains[0, 0, 0, 0], p.precoders[0], p.dim_map(0), noise_pdf(1.0),
                                 exact_interference_pdf(ch, p, 0, qpsk), cand).indices,
    ):
        assert idx.min() >= 0 and idx.max() < 16
