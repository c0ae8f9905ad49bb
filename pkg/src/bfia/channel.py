"""Block-fading broadcast / interference channels and transmission.

A realisation holds one ``N x M`` gain matrix per (receiver, transmitter)
pair, constant across the ``L`` slots of a block, so the extended channel is
``H_ij = kron(I_L, G_ij)``.  In the broadcast case every receiver sees the
single transmitter through its own gain: ``G_ij = G_ii`` for all ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .precoder import ChannelKind


def crandn(rng, shape):
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def alpha_matrix(k, alpha_desired=1.0, alpha_interf=1.0):
    """Received-power map with ``alpha_desired`` on the diagonal."""
    a = np.full((k, k), float(alpha_interf))
    np.fill_diagonal(a, float(alpha_desired))
    return a


def snr_to_sigma2(snr_db):
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading draw.

    Attributes
    ----------
    gains : ndarray, shape (K, K, N, M)
        ``gains[i, j]`` maps transmitter ``j`` to receiver ``i``.
    alphas : ndarray, shape (K, K)
    sigma2 : float
        Noise variance per complex receive dimension (SNR = 1 / sigma2).
    l : int
        Symbol extension factor.
    kind : ChannelKind
    """

    gains: np.ndarray
    alphas: np.ndarray
    sigma2: float
    l: int  # noqa: E741
    kind: ChannelKind = ChannelKind.IC

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def k(self):
        return self.gains.shape[0]

    def with_sigma2(self, sigma2):
        return ChannelRealization(self.gains, self.alphas, float(sigma2), self.l, self.kind)

    def h(self, i, j):
        """Extended ``NL x ML`` channel from transmitter ``j`` to receiver ``i``."""
        return np.kron(np.eye(self.l), self.gains[i, j])

    def effective(self, i, j, p):
        """``H_ij Q_j``: how user ``j``'s streams appear at receiver ``i``."""
        return self.h(i, j) @ p.precoders[j]


def draw_channel(s, alphas, sigma2, rng):
    """Independent CN(0, alpha_ij) gains for every pair, held over the block."""
    a = np.asarray(alphas, dtype=float)
    if a.ndim == 0:
        a = np.full((s.k, s.k), float(a))
    if a.shape != (s.k, s.k):
        raise ParameterError(f"alphas must be ({s.k}, {s.k}), got {a.shape}")
    if (a < 0).any():
        raise ParameterError("alphas must be non-negative")
    if s.kind is ChannelKind.BC:
        own = crandn(rng, (s.k, s.n, s.m)) * np.sqrt(np.diag(a))[:, None, None]
        g = np.repeat(own[:, None], s.k, axis=1)
    else:
        g = crandn(rng, (s.k, s.k, s.n, s.m)) * np.sqrt(a)[:, :, None, None]
    return ChannelRealization(g, a, float(sigma2), s.l, s.kind)


@dataclass(frozen=True, eq=False)
class ReceivedBlock:
    """Received vectors for a batch of blocks.

    y : (K, B, NL) complex, one row per receiver and block.
    indices : (K, B, d) int, transmitted symbol indices (scoring only).
    """

    y: np.ndarray
    indices: np.ndarray

    @property
    def blocks(self):
        return self.y.shape[1]


def _constellations(constellations, k):
    if hasattr(constellations, "points"):
        return [constellations] * k
    constellations = list(constellations)
    if len(constellations) != k:
        raise ParameterError(f"need {k} constellations, got {len(constellations)}")
    return constellations


def noiseless(ch, p, indices, constellations):
    """Signal part ``sum_j H_ij Q_j x_j`` for every receiver, shape (K, B, NL)."""
    cons = _constellations(constellations, p.k)
    idx = np.asarray(indices)
    if idx.ndim != 3 or idx.shape[0] != p.k or idx.shape[2] != p.d:
        raise ParameterError(f"indices must be (K, B, d) = ({p.k}, B, {p.d}), got {idx.shape}")
    x = np.stack([cons[j].points[idx[j]] for j in range(p.k)])
    out = np.zeros((p.k, idx.shape[1], p.scenario.rx_dim), dtype=complex)
    for i in range(p.k):
        for j in range(p.k):
            out[i] += x[j] @ ch.effective(i, j, p).T
    return out


def transmit(ch, p, indices, constellations, rng=None, noise=None):
    """Pass symbol indices through the channel.

    Either ``rng`` (fresh CN(0, sigma2) noise) or a unit-variance ``noise``
    array of shape (K, B, NL) that is scaled by ``sqrt(sigma2)``.
    """
    sig = noiseless(ch, p, indices, constellations)
    if noise is None:
        if rng is None:
            raise ParameterError("transmit needs an rng or a noise array")
        noise = crandn(rng, sig.shape)
    elif noise.shape != sig.shape:
        raise ParameterError(f"noise shape {noise.shape} != {sig.shape}")
    return ReceivedBlock(sig + np.sqrt(ch.sigma2) * noise, np.asarray(indices))


def exact_interference_cov(ch, p, i):
    """Interference-plus-noise covariance at receiver ``i``.

    Assumes unit-energy i.i.d. uniform symbols, so each interferer adds
    ``A A^H`` with ``A = H_ij Q_j``.
    """
    nl = p.scenario.rx_dim
    r = ch.sigma2 * np.eye(nl, dtype=complex)
    for j in range(p.k):
        if j != i:
            a = ch.effective(i, j, p)
            r += a @ a.conj().T
    return r
