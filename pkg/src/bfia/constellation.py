"""Finite-alphabet signal sets with Gray labelling.

Every constellation produced here is normalised to unit average energy and
is closed under negation (``-a`` is a point whenever ``a`` is), which is the
property the identical-marginal result for useful real unitaries relies on.

Symbol index and Gray label coincide: ``points[k]`` carries the bit label
``k`` written MSB first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError, SearchSpaceError

DEFAULT_SEARCH_CAP = 2**20


class Kind(str, Enum):
    PSK = "psk"
    QAM = "qam"


def _gray(n):
    return n ^ (n >> 1)


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Constellation:
    """Immutable finite alphabet.

    Attributes
    ----------
    points : ndarray of complex, shape (2**bits_per_symbol,)
        Constellation points indexed by their Gray label.
    bits_per_symbol : int
    kind : Kind
    """

    points: np.ndarray
    bits_per_symbol: int
    kind: Kind

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self):
        return self.points.size

    @property
    def name(self):
        if self.kind is Kind.PSK and self.size == 2:
            return "bpsk"
        if self.kind is Kind.PSK and self.size == 4:
            return "qpsk"
        return f"{self.kind.value}:{self.size}"

    def __repr__(self):
        return f"Constellation({self.name})"

    def is_symmetric(self, tol=1e-12):
        """True if the point set equals its negation."""
        d = np.abs(self.points[:, None] + self.points[None, :])
        return bool(np.all(d.min(axis=1) < tol))


def make_constellation(kind, order):
    """Build a unit-energy, negation-symmetric, Gray-labelled constellation.

    Parameters
    ----------
    kind : {"psk", "qam"} or Kind
    order : int
        Number of points. PSK needs an even power of two; QAM needs a
        perfect square whose root is even (4, 16, 64, ...).

    Raises
    ------
    ParameterError
        If ``order`` violates the rule for ``kind``.
    """
    try:
        kind = Kind(kind.lower() if isinstance(kind, str) else kind)
    except ValueError:
        raise ParameterError(f"unknown constellation kind {kind!r}") from None
    order = int(order)
    if not _is_pow2(order) or order < 2:
        raise ParameterError(f"order must be a power of 2 and >= 2, got {order}")
    bps = order.bit_length() - 1

    if kind is Kind.PSK:
        # BPSK sits on the real axis; higher orders are offset by half a step
        # so QPSK coincides with 4-QAM.
        offset = 0.0 if order == 2 else math.pi / order
        pts = np.empty(order, dtype=complex)
        for pos in range(order):
            pts[_gray(pos)] = np.exp(1j * (offset + 2 * math.pi * pos / order))
        return Constellation(pts, bps, kind)

    root = math.isqrt(order)
    if root * root != order or root % 2:
        raise ParameterError(
            f"QAM order must be a perfect square of an even root, got {order}"
        )
    half = root.bit_length() - 1
    levels = np.arange(-(root - 1), root, 2, dtype=float)
    pts = np.empty(order, dtype=complex)
    for pi in range(root):
        for pq in range(root):
            label = (_gray(pi) << half) | _gray(pq)
            pts[label] = levels[pi] + 1j * levels[pq]
    pts /= math.sqrt(2 * (order - 1) / 3)
    return Constellation(pts, bps, kind)


def parse_constellation(text):
    """Parse ``bpsk``, ``qpsk``, ``16qam``, ``psk:<P>`` or ``qam:<P^2>``."""
    t = text.strip().lower()
    aliases = {"bpsk": ("psk", 2), "qpsk": ("psk", 4)}
    if t in aliases:
        return make_constellation(*aliases[t])
    if t.endswith("qam") and t[:-3].isdigit():
        return make_constellation("qam", int(t[:-3]))
    if ":" in t:
        kind, _, order = t.partition(":")
        if order.isdigit():
            return make_constellation(kind, int(order))
    raise ParameterError(f"cannot parse constellation {text!r}")


def symbols_to_bits(c, indices):
    """Map symbol indices to bits, MSB first.

    Returns a uint8 array with one extra trailing axis of length
    ``c.bits_per_symbol``.
    """
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= c.size):
        raise ParameterError(f"symbol index out of range [0, {c.size})")
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    return ((idx[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_symbols(c, bits):
    """Inverse of :func:`symbols_to_bits` for a flat bitstream."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size % c.bits_per_symbol:
        raise ParameterError(
            f"bitstream length {b.size} not divisible by {c.bits_per_symbol}"
        )
    if b.size and not np.isin(b, (0, 1)).all():
        raise ParameterError("bits must be 0 or 1")
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return b.reshape(-1, c.bits_per_symbol) @ weights


def enumerate_indices(size, d, cap=DEFAULT_SEARCH_CAP):
    """All length-``d`` index tuples over ``range(size)`` in lexicographic order."""
    if d < 1:
        raise ParameterError(f"vector length must be >= 1, got {d}")
    count = size**d
    if count > cap:
        raise SearchSpaceError(
            f"search space {size}^{d} = {count} exceeds cap {cap}"
        )
    return np.indices((size,) * d).reshape(d, -1).T


def enumerate_vectors(c, d, cap=DEFAULT_SEARCH_CAP):
    """The ordered set of all transmit vectors in ``X^d``, shape ``(|X|^d, d)``."""
    return c.points[enumerate_indices(c.size, d, cap)]


def vector_index(c, indices):
    """Candidate index of per-symbol index tuples (last axis), inverse of enumeration."""
    idx = np.asarray(indices)
    d = idx.shape[-1]
    weights = c.size ** np.arange(d - 1, -1, -1)
    return idx @ weights
