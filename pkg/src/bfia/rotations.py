"""Givens-product orthogonal matrices and the identical-marginal check.

A "useful" real unitary of even size ``m`` is a product of ``m - 1`` paired
Givens factors.  Each factor rotates every pair of a perfect matching of the
coordinates by the same angle, so the matrix depends on ``m - 1`` angles
instead of ``m(m-1)/2``.  For ``m = 4`` the factors are::

    G(0,1,a) G(2,3,a)  @  G(0,2,b) G(1,3,-b)  @  G(0,3,c) G(1,2,c)

The sign flip on the (1,3) rotation is what makes the three generators
anticommute (they act as quaternion units), so every row of the product is a
signed permutation of the first row.  With all signs equal the rows differ and
the per-row mean sets no longer coincide.

Signs for general ``m = 2**n`` come from the Cayley-Dickson multiplication
table, which reproduces the pattern above.  Non powers of two fall back to a
round-robin matching.  Only ``m`` in ``{2, 4}`` is guaranteed to produce
identical marginals; :func:`verify_theorem3` reports the outcome for any size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .constellation import DEFAULT_SEARCH_CAP, enumerate_vectors
from .errors import ParameterError, SearchSpaceError


@dataclass(frozen=True)
class GivensFactor:
    m: int
    i: int
    j: int
    theta: float

    def __post_init__(self):
        if not 0 <= self.i < self.j < self.m:
            raise ParameterError(
                f"Givens plane needs 0 <= i < j < m, got i={self.i} j={self.j} m={self.m}"
            )
        if not np.isfinite(self.theta):
            raise ParameterError("Givens angle must be finite")

    def matrix(self):
        return givens(self.m, self.i, self.j, self.theta)


def givens(m, i, j, theta):
    """Rotation by ``theta`` in the (i, j) plane, identity elsewhere.

    The (i, j) block is ``[[cos, sin], [-sin, cos]]``.
    """
    if not 0 <= i < j < m:
        raise ParameterError(f"Givens plane needs 0 <= i < j < m, got {i}, {j}, {m}")
    g = np.eye(m)
    c, s = np.cos(theta), np.sin(theta)
    g[i, i] = g[j, j] = c
    g[i, j] = s
    g[j, i] = -s
    return g


def product(factors):
    """Ordered product of :class:`GivensFactor` matrices."""
    factors = list(factors)
    if not factors:
        raise ParameterError("empty factor list")
    out = np.eye(factors[0].m)
    for f in factors:
        out = out @ f.matrix()
    return out


@lru_cache(maxsize=None)
def _cayley_dickson_signs(n):
    # signs[a, b] with e_a * e_b = signs[a, b] * e_(a ^ b)
    if n == 0:
        return np.array([[1]])
    s = _cayley_dickson_signs(n - 1)
    h = 1 << (n - 1)
    out = np.zeros((2 * h, 2 * h), dtype=int)
    conj = lambda k: 1 if k == 0 else -1  # noqa: E731
    for x in range(2 * h):
        for y in range(2 * h):
            a, b = (x, None) if x < h else (None, x - h)
            c, d = (y, None) if y < h else (None, y - h)
            # (a, b)(c, d) = (ac - d* b, da + b c*)
            if b is None and d is None:
                out[x, y] = s[a, c]
            elif b is None:
                out[x, y] = s[d, a]
            elif d is None:
                out[x, y] = s[b, c] * conj(c)
            else:
                out[x, y] = -conj(d) * s[d, b]
    return out


@lru_cache(maxsize=None)
def pairing_scheme(m):
    """The ``m - 1`` signed perfect matchings used by :func:`useful_unitary`.

    Returns a tuple of matchings; each matching is a tuple of ``(i, j, sign)``
    with ``i < j``.  Matching ``k`` contains the pair ``(0, k + 1)``.
    """
    if m < 2 or m % 2:
        raise ParameterError(f"useful unitary needs an even size, got {m}")
    if m & (m - 1) == 0:
        n = m.bit_length() - 1
        sg = _cayley_dickson_signs(n)
        out = []
        for a in range(1, m):
            # factor = cos*I + sin*L_a^T, L_a = left multiplication by e_a
            pairs = tuple((k, k ^ a, int(sg[a, k])) for k in range(m) if k < k ^ a)
            out.append(pairs)
        return tuple(out)
    others = list(range(1, m))
    out = []
    for r in range(m - 1):
        rot = others[r:] + others[:r]
        pairs = [(0, rot[0], 1)]
        for k in range(1, m // 2):
            a, b = sorted((rot[k], rot[-k]))
            pairs.append((a, b, 1))
        out.append(tuple(sorted(pairs)))
    out.sort(key=lambda p: p[0][1])
    return tuple(out)


@dataclass(frozen=True, eq=False)
class UsefulUnitary:
    """Real orthogonal matrix built from ``m - 1`` tied Givens angles."""

    m: int
    angles: tuple
    matrix: np.ndarray = field(repr=False)

    @property
    def factors(self):
        out = []
        for theta, matching in zip(self.angles, pairing_scheme(self.m)):
            out.extend(GivensFactor(self.m, i, j, sign * theta) for i, j, sign in matching)
        return out


def useful_unitary(m, angles):
    """Build the paired-Givens orthogonal matrix of size ``m``."""
    m = int(m)
    if m < 2 or m % 2:
        raise ParameterError(f"useful unitary needs an even size, got {m}")
    angles = tuple(float(a) for a in np.atleast_1d(angles))
    if len(angles) != m - 1:
        raise ParameterError(f"size {m} needs {m - 1} angles, got {len(angles)}")
    u = np.eye(m)
    for theta, matching in zip(angles, pairing_scheme(m)):
        f = np.eye(m)
        c, s = np.cos(theta), np.sin(theta)
        for i, j, sign in matching:
            f[i, i] = f[j, j] = c
            f[i, j] = sign * s
            f[j, i] = -sign * s
        u = u @ f
    u.setflags(write=False)
    return UsefulUnitary(m, angles, u)


def general_orthogonal(m, angles):
    """Product of all ``m(m-1)/2`` Givens rotations, planes in lexicographic order."""
    planes = [(i, j) for i in range(m) for j in range(i + 1, m)]
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size != len(planes):
        raise ParameterError(f"size {m} needs {len(planes)} angles, got {angles.size}")
    u = np.eye(m)
    for (i, j), t in zip(planes, angles):
        u = u @ givens(m, i, j, t)
    return u


def random_useful_unitary(m, rng):
    return useful_unitary(m, rng.uniform(0.0, 2 * np.pi, m - 1))


def random_orthogonal(m, rng):
    """Untied Givens product with uniformly drawn angles (any ``m >= 1``)."""
    if m == 1:
        return np.ones((1, 1))
    return general_orthogonal(m, rng.uniform(0.0, 2 * np.pi, m * (m - 1) // 2))


def random_complex_unitary(m, rng):
    """Haar-distributed complex unitary via QR with phase correction."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def equal_row_profiles(u, tol=1e-10):
    """Cheap sufficient test: all rows share the same sorted absolute values."""
    a = np.sort(np.abs(np.asarray(u)), axis=1)
    return bool(np.abs(a - a[0]).max() < tol)


def mean_set(u, row, c, cap=DEFAULT_SEARCH_CAP):
    """Multiset ``{u[row] . x : x in X^m}`` as an array in enumeration order."""
    u = np.asarray(u.matrix if isinstance(u, UsefulUnitary) else u)
    m = u.shape[1]
    if not 0 <= row < u.shape[0]:
        raise ParameterError(f"row {row} out of range for {u.shape[0]} rows")
    if c.size**m > cap:
        raise SearchSpaceError(f"|X|^m = {c.size}^{m} exceeds cap {cap}")
    return enumerate_vectors(c, m, cap) @ u[row]


def _canonical(values, decimals=8):
    key = np.lexsort((np.round(values.imag, decimals), np.round(values.real, decimals)))
    return values[key]


def multiset_distance(a, b):
    """Largest discrepancy between two equal-size complex multisets.

    Sorts both canonically; if rounding at grid boundaries makes the sorted
    comparison look bad, falls back to an optimal assignment.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return np.inf
    dist = float(np.abs(_canonical(a) - _canonical(b)).max(initial=0.0))
    if dist > 1e-6 and a.size <= 4096:
        from scipy.optimize import linear_sum_assignment

        cost = np.abs(a[:, None] - b[None, :])
        r, col = linear_sum_assignment(cost)
        dist = min(dist, float(cost[r, col].max()))
    return dist


@dataclass
class Theorem3Report:
    passed: bool
    max_mismatch: float
    row_mismatch: list
    tol: float

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} max_mismatch={self.max_mismatch:.3e} tol={self.tol:g}"


def verify_theorem3(u, c, tol=1e-9, cap=DEFAULT_SEARCH_CAP):
    """Check that every row of ``u`` induces the same mean multiset over ``X^m``.

    Equal mean multisets mean every element of ``u x + n`` has the same
    marginal density when ``x`` is uniform over ``X^m``.
    """
    mat = np.asarray(u.matrix if isinstance(u, UsefulUnitary) else u)
    ref = mean_set(mat, 0, c, cap)
    mism = [0.0]
    for r in range(1, mat.shape[0]):
        mism.append(multiset_distance(ref, mean_set(mat, r, c, cap)))
    worst = max(mism)
    return Theorem3Report(bool(worst < tol), worst, mism, tol)
