"""Maximum symbols-per-antenna-per-channel-use, precoder layout, alignment checks.

Resources live on a transmit grid of ``M * L`` dimensions (slot ``l``,
antenna ``a`` -> index ``l * M + a``).  The grid is split into group 1, where
each user owns a dimension that (at its own receiver) no interferer can fully
cover, and group 2, which every user shares.  For SISO this is exactly one
group-1 resource per user plus ``d - 1`` shared resources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import InfeasibleError, ParameterError, UnsupportedScenarioError


class ChannelKind(str, Enum):
    BC = "bc"
    IC = "ic"


@dataclass(frozen=True)
class Scenario:
    """K-user broadcast or interference channel with symbol extension L."""

    kind: ChannelKind
    k: int
    m: int = 1
    n: int = 1
    l: int = 1  # noqa: E741

    def __post_init__(self):
        try:
            kind = ChannelKind(self.kind.lower() if isinstance(self.kind, str) else self.kind)
        except ValueError:
            raise ParameterError(f"scenario kind must be 'bc' or 'ic', got {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        for name in ("k", "m", "n", "l"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.m > self.n:
            raise UnsupportedScenarioError(
                f"M={self.m} > N={self.n}: maximum SpAC for M > N is an open problem"
            )

    @property
    def tx_dim(self):
        return self.m * self.l

    @property
    def rx_dim(self):
        return self.n * self.l

    @property
    def is_siso(self):
        return self.m == 1 and self.n == 1

    @property
    def group1_size(self):
        if self.kind is ChannelKind.BC:
            return self.k
        return -(-self.k * self.m // self.n)


@dataclass(frozen=True)
class SpacResult:
    d_max: int
    spac: Fraction
    formula: str

    def __str__(self):
        return f"d_max={self.d_max} spac={self.spac}"


def _formula(s):
    if s.kind is ChannelKind.BC:
        return "(L-K+1)/L" if s.m == 1 else "(ML-K+1)/(ML)"
    if s.is_siso:
        return "(L-K+1)/L"
    if s.m == 1:
        return "(L-ceil(K/N)+1)/L"
    return "(ML-ceil(KM/N)+1)/(ML)"


def max_spac(s):
    """Largest number of streams per user meeting the MD alignment constraints.

    Broadcast: ``d = ML - K + 1``.  Interference: ``d = ML - ceil(KM/N) + 1``.
    SISO reduces both to ``L - K + 1``.

    Raises
    ------
    InfeasibleError
        If ``d_max <= 0``; the message names the smallest workable ``L``.
    """
    d = s.tx_dim - s.group1_size + 1
    if d <= 0:
        need = math.ceil(s.group1_size / s.m)
        raise InfeasibleError(
            f"d_max={d} <= 0 for K={s.k}, M={s.m}, N={s.n}, L={s.l}; need L >= {need}"
        )
    return SpacResult(d, Fraction(d, s.tx_dim), _formula(s))


def _is_unitary(u, tol):
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """Selection matrices and unitaries for every user of a scenario.

    ``supports[i]`` lists the transmit-grid dimensions of user ``i`` in column
    order, so ``Q_i[supports[i][c], :] = U_i[c, :]``.
    """

    scenario: Scenario
    d: int
    selections: tuple
    unitaries: tuple
    supports: tuple
    group1: tuple
    group2: tuple
    feasible: bool = True
    precoders: tuple = field(init=False, repr=False)

    def __post_init__(self):
        qs = tuple(s @ u for s, u in zip(self.selections, self.unitaries))
        object.__setattr__(self, "precoders", qs)

    @property
    def k(self):
        return self.scenario.k

    def occupants(self, dim):
        """Users whose precoder touches transmit dimension ``dim``."""
        return [j for j, sup in enumerate(self.supports) if dim in sup]

    def dim_map(self, i):
        """Receiver-side layout for SISO receiver ``i``.

        Returns a :class:`DimMap` classifying each resource by what it carries.
        """
        if not self.scenario.is_siso:
            raise ParameterError("dimension map is only defined for SISO layouts")
        pure, mixed, interf = [], [], {}
        for r in range(self.scenario.tx_dim):
            occ = self.occupants(r)
            if i in occ:
                (pure if len(occ) == 1 else mixed).append(r)
            elif len(occ) == 1:
                interf[occ[0]] = r
        return DimMap(i, tuple(pure), tuple(mixed), interf)


@dataclass(frozen=True)
class DimMap:
    """Per-receiver classification of SISO resources.

    pure: desired signal plus noise only.
    mixed: desired signal plus interference.
    interference_only: interferer index -> resource carrying that interferer alone.
    """

    receiver: int
    pure: tuple
    mixed: tuple
    interference_only: dict


def _selection(t, cols):
    s = np.zeros((t, len(cols)))
    s[list(cols), np.arange(len(cols))] = 1.0
    return s


def build_precoders(s, d, unitaries=None, allow_infeasible=False, tol=1e-8):
    """Lay out the two resource groups and compose ``Q_i = S_i U_i``.

    User ``i`` receives group-1 dimension ``floor(i * g1 / K)`` and the
    lowest ``d - 1`` group-2 dimensions.  With ``allow_infeasible`` and
    ``d > d_max`` every user shares the first ``d`` dimensions instead; this
    reproduces the over-loaded operating points that floor the MD receiver.

    Parameters
    ----------
    s : Scenario
    d : int
        Streams per user.
    unitaries : sequence of (d, d) arrays, optional
        Identity when omitted.
    """
    d = int(d)
    t = s.tx_dim
    try:
        dmax = max_spac(s).d_max
    except InfeasibleError:
        if not allow_infeasible:
            raise
        dmax = 0
    if d < 1 or (d > dmax and not allow_infeasible):
        raise ParameterError(f"d must lie in [1, {dmax}], got {d}")
    if d > t:
        raise ParameterError(f"d={d} exceeds the {t} available transmit dimensions")
    if unitaries is None:
        unitaries = [np.eye(d)] * s.k
    unitaries = [np.asarray(u) for u in unitaries]
    if len(unitaries) != s.k:
        raise ParameterError(f"need {s.k} unitaries, got {len(unitaries)}")
    for j, u in enumerate(unitaries):
        if u.shape != (d, d):
            raise ParameterError(f"unitary {j} has shape {u.shape}, expected ({d}, {d})")
        if not _is_unitary(u, tol):
            raise ParameterError(f"unitary {j} is not unitary (residual > {tol:g})")

    if d <= dmax:
        g1 = s.group1_size
        group1 = tuple((j * g1) // s.k for j in range(s.k))
        group2 = tuple(range(g1, t))
        supports = tuple((group1[j],) + group2[: d - 1] for j in range(s.k))
        feasible = True
    else:
        group1 = ()
        group2 = tuple(range(d))
        supports = tuple(group2 for _ in range(s.k))
        feasible = False
    sels = tuple(_selection(t, sup) for sup in supports)
    return PrecoderSet(s, d, sels, tuple(unitaries), supports, group1, group2, feasible)


def numeric_rank(a, tol=1e-8):
    """Number of singular values above ``tol * sigma_max``."""
    a = np.asarray(a)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


@dataclass
class ReceiverAlignment:
    receiver: int
    desired_rank: int
    interference_rank: int
    union_rank: int
    intersection_dim: int
    space_dim: int
    d: int

    @property
    def interference_deficient(self):
        # interference must leave part of the signal space free
        return self.interference_rank < self.space_dim

    @property
    def union_full(self):
        return self.union_rank == self.space_dim

    @property
    def not_contained(self):
        return self.intersection_dim < self.d

    @property
    def passed(self):
        return self.interference_deficient and self.union_full and self.not_contained


@dataclass
class AlignmentReport:
    receivers: list
    tol: float

    @property
    def passed(self):
        return all(r.passed for r in self.receivers)

    def as_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "receivers": [
                {
                    "receiver": r.receiver,
                    "desired_rank": r.desired_rank,
                    "interference_rank": r.interference_rank,
                    "union_rank": r.union_rank,
                    "intersection_dim": r.intersection_dim,
                    "space_dim": r.space_dim,
                    "interference_below_full": r.interference_deficient,
                    "union_full": r.union_full,
                    "desired_not_in_interference": r.not_contained,
                    "passed": r.passed,
                }
                for r in self.receivers
            ],
        }


def check_alignment(ch, p, tol=1e-8):
    """Rank-based verification of the alignment constraints at every receiver.

    For receiver ``i`` with desired block ``A = H_ii Q_i`` and interference
    block ``B = [H_ij Q_j]_{j != i}`` the checks are ``rank(B) < NL``,
    ``rank([A B]) = NL`` and ``rank(A) + rank(B) - rank([A B]) < d``.

    ``NL`` is replaced by ``ML`` for a broadcast channel with ``N > M``: a
    single transmitter cannot excite more receive dimensions than it has.
    """
    s = p.scenario
    if ch.gains.shape[:2] != (s.k, s.k) or ch.gains.shape[2:] != (s.n, s.m):
        raise ParameterError(
            f"channel gains of shape {ch.gains.shape} do not match scenario {s}"
        )
    space = s.rx_dim if s.kind is ChannelKind.IC else min(s.rx_dim, s.tx_dim)
    out = []
    for i in range(s.k):
        a = ch.effective(i, i, p)
        cols = [ch.effective(i, j, p) for j in range(s.k) if j != i]
        b = np.hstack(cols) if cols else np.zeros((s.rx_dim, 0))
        ra, rb = numeric_rank(a, tol), numeric_rank(b, tol)
        ru = numeric_rank(np.hstack([a, b]), tol)
        out.append(ReceiverAlignment(i, ra, rb, ru, ra + rb - ru, space, p.d))
    return AlignmentReport(out, tol)
