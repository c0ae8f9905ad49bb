"""Minimum-distance and maximum-likelihood detectors.

All detectors score every candidate in the enumerated transmit set and
return the index of the best one; ties go to the lowest index.  Batches of
received vectors are shaped ``(B, NL)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, solve_triangular
from scipy.special import logsumexp

from .constellation import DEFAULT_SEARCH_CAP, enumerate_indices, enumerate_vectors
from .errors import NumericError, ParameterError, SearchSpaceError


class DetectorKind(str, Enum):
    MD_KNOWN = "md-known"
    MD_ESTIMATED = "md-est"
    ML_FULL_CSIR = "ml-known"
    ML_BLIND_MARGINAL = "ml-blind"


@dataclass(frozen=True, eq=False)
class GmmPdf:
    """Equal-weight circular complex Gaussian mixture with a shared variance."""

    means: np.ndarray
    variance: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.means, dtype=complex)).ravel()
        if m.size < 1:
            raise ParameterError("a mixture needs at least one mean")
        if not self.variance > 0:
            raise ParameterError(f"component variance must be positive, got {self.variance}")
        m.setflags(write=False)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def n_components(self):
        return self.means.size

    def logpdf(self, z):
        return gmm_logpdf(self, z)

    def pdf(self, z):
        return gmm_eval(self, z)


def noise_pdf(sigma2):
    """CN(0, sigma2) as a one-component mixture."""
    return GmmPdf(np.zeros(1), sigma2)


def gmm_logpdf(g, z, chunk=1 << 22):
    """Log-density, with max-shifted summation over components."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.empty(flat.size)
    step = max(1, chunk // g.n_components)
    base = -np.log(np.pi * g.variance) - np.log(g.n_components)
    for s in range(0, flat.size, step):
        zz = flat[s : s + step, None]
        e = -np.abs(zz - g.means[None, :]) ** 2 / g.variance
        out[s : s + step] = logsumexp(e, axis=1) + base
    return out.reshape(z.shape)


def gmm_eval(g, z):
    """Density ``mean_m (1 / (pi v)) exp(-|z - m|^2 / v)``."""
    return np.exp(gmm_logpdf(g, z))


def gmm_sum(g1, g2, cap=DEFAULT_SEARCH_CAP):
    """Density of the sum of two independent mixture-distributed terms.

    Each mixture already contains one copy of the receiver noise, so the sum
    keeps a single noise variance: means are all pairwise sums, the variance
    is that of ``g1``.
    """
    count = g1.n_components * g2.n_components
    if count > cap:
        raise SearchSpaceError(f"set-sum would have {count} means, cap is {cap}")
    means = (g1.means[:, None] + g2.means[None, :]).ravel()
    return GmmPdf(means, g1.variance)


def _candidates(c, d, candidates, cap):
    if candidates is not None:
        cand = np.asarray(candidates, dtype=complex)
        if cand.ndim != 2 or cand.shape[0] == 0:
            raise ParameterError("candidate list must be a nonempty (C, d) array")
        return cand
    return enumerate_vectors(c, d, cap)


def _as_batch(y):
    y = np.asarray(y, dtype=complex)
    return (y[None, :], True) if y.ndim == 1 else (y, False)


def _desired_matrix(h, q):
    h = np.asarray(h)
    q = np.asarray(q)
    return h * q if h.ndim == 0 else h @ q


def md_detect(y, h, q, r, candidates):
    """Minimum-distance detection under a coloured-Gaussian interference model.

    Minimises ``(y - h Q x)^H R^{-1} (y - h Q x)`` over the candidate
    vectors using one Cholesky factorisation of ``R``.

    Parameters
    ----------
    y : (NL,) or (B, NL) complex
    h : complex scalar or (NL, ML) matrix
        Desired channel.
    q : (ML, d) precoder
    r : (NL, NL) Hermitian positive definite covariance
    candidates : (C, d) complex candidate vectors

    Returns
    -------
    vectors, indices
        Chosen candidate vectors ``(B, d)`` and their indices ``(B,)``
        (scalars for a single ``y``).
    """
    yb, single = _as_batch(y)
    cand = np.asarray(candidates, dtype=complex)
    a = _desired_matrix(h, q)
    try:
        low, _ = cho_factor(np.asarray(r, dtype=complex), lower=True)
    except np.linalg.LinAlgError:
        raise NumericError(
            "interference covariance is not positive definite; add a noise floor to sigma2"
        ) from None
    low = np.tril(low)
    wy = solve_triangular(low, yb.T, lower=True).T  # (B, NL)
    wc = solve_triangular(low, a @ cand.T, lower=True).T  # (C, NL)
    metric = (
        np.sum(np.abs(wc) ** 2, axis=1)[None, :]
        - 2 * np.real(wy.conj() @ wc.T)
    )
    idx = np.argmin(metric, axis=1)
    if single:
        return cand[idx[0]], int(idx[0])
    return cand[idx], idx


def _hypothesis_grid(effs, cons, d, cap):
    """Noiseless contributions of every joint interferer hypothesis, (NL, H)."""
    nl = effs[0].shape[0] if effs else 0
    total = 1
    for c in cons:
        total *= c.size**d
    if total > cap:
        raise SearchSpaceError(f"{total} interferer hypotheses exceed cap {cap}")
    s = np.zeros((nl, 1), dtype=complex)
    for a, c in zip(effs, cons):
        contrib = a @ enumerate_vectors(c, d, cap).T  # (NL, C_j)
        s = (s[:, :, None] + contrib[:, None, :]).reshape(nl, -1)
    return s


def ml_detect_full(y, ch, p, i, constellations, cap=DEFAULT_SEARCH_CAP, chunk=1 << 22):
    """Likelihood detector with full CSIR at receiver ``i``.

    Scores each desired candidate by the exact likelihood marginalised over
    uniformly distributed interferer symbol vectors.

    Returns the chosen candidate indices (B,) into ``enumerate_vectors``.
    """
    yb, single = _as_batch(y)
    k = p.k
    cons = [constellations] * k if hasattr(constellations, "points") else list(constellations)
    others = [j for j in range(k) if j != i]
    des = ch.effective(i, i, p) @ enumerate_vectors(cons[i], p.d, cap).T  # (NL, C)
    n_cand = des.shape[1]
    if others:
        itf = _hypothesis_grid([ch.effective(i, j, p) for j in others], [cons[j] for j in others], p.d, cap)
    else:
        itf = np.zeros((des.shape[0], 1), dtype=complex)
    n_hyp = itf.shape[1]
    if n_cand * n_hyp > cap:
        raise SearchSpaceError(f"{n_cand} x {n_hyp} joint hypotheses exceed cap {cap}")
    joint = (des[:, :, None] + itf[:, None, :]).reshape(des.shape[0], -1)  # (NL, C*H)
    jn = np.sum(np.abs(joint) ** 2, axis=0)
    out = np.empty(yb.shape[0], dtype=np.int64)
    step = max(1, chunk // joint.shape[1])
    for s in range(0, yb.shape[0], step):
        yy = yb[s : s + step]
        dist = np.sum(np.abs(yy) ** 2, axis=1)[:, None] + jn[None, :] - 2 * np.real(yy.conj() @ joint)
        ll = logsumexp(-dist.reshape(-1, n_cand, n_hyp) / ch.sigma2, axis=2)
        out[s : s + step] = np.argmax(ll, axis=1)
    return int(out[0]) if single else out


def joint_ml_decode(y, ch, p, i, constellations, cap=DEFAULT_SEARCH_CAP):
    """Exhaustive joint decoding of all users, projected onto user ``i``.

    Deliberately a plain loop over every joint hypothesis; used as an
    independent reference for :func:`ml_detect_full`.
    """
    yb, single = _as_batch(y)
    k = p.k
    cons = [constellations] * k if hasattr(constellations, "points") else list(constellations)
    sizes = [cons[j].size ** p.d for j in range(k)]
    total = int(np.prod(sizes))
    if total > cap:
        raise SearchSpaceError(f"{total} joint hypotheses exceed cap {cap}")
    effs = [ch.effective(i, j, p) for j in range(k)]
    vecs = [enumerate_vectors(cons[j], p.d, cap) for j in range(k)]
    best = np.full(yb.shape[0], np.inf)
    arg = np.zeros(yb.shape[0], dtype=np.int64)
    for combo in np.ndindex(*sizes):
        s = sum(effs[j] @ vecs[j][combo[j]] for j in range(k))
        dist = np.sum(np.abs(yb - s) ** 2, axis=1)
        better = dist < best
        best[better] = dist[better]
        arg[better] = combo[i]
    return int(arg[0]) if single else arg


@dataclass
class BlindResult:
    indices: np.ndarray
    approximate: bool


def ml_detect_blind_marginal(y, h, q, dim_map, noise, interference, candidates):
    """Likelihood detector that needs no interferer channel or precoder.

    The joint density of the desired-bearing resources is approximated by the
    product of per-resource marginals: pure resources use the noise density,
    mixed resources the interference-plus-noise mixture.  With a single mixed
    resource the product is exact up to the neglected interference-only
    resources; with more it is an independence approximation.

    Parameters
    ----------
    y : (B, L) complex
    h : complex desired gain
    q : (L, d) desired precoder
    dim_map : DimMap
    noise : GmmPdf
        Density of the pure-resource residual.
    interference : GmmPdf or dict
        One mixture shared by every mixed resource, or ``{resource: GmmPdf}``.
    candidates : (C, d) complex

    Returns
    -------
    BlindResult
    """
    yb, single = _as_batch(y)
    cand = np.asarray(candidates, dtype=complex)
    s = (h * np.asarray(q)) @ cand.T  # (L, C)
    ll = np.zeros((yb.shape[0], cand.shape[0]))
    for r in dim_map.pure:
        ll += noise.logpdf(yb[:, r, None] - s[r][None, :])
    for r in dim_map.mixed:
        if isinstance(interference, dict):
            if r not in interference:
                raise ParameterError(f"no interference density supplied for mixed resource {r}")
            g = interference[r]
        else:
            g = interference
        ll += g.logpdf(yb[:, r, None] - s[r][None, :])
    idx = np.argmax(ll, axis=1)
    approx = len(dim_map.mixed) > 1
    return BlindResult(int(idx[0]) if single else idx, approx)


__all__ = [
    "DetectorKind",
    "GmmPdf",
    "noise_pdf",
    "gmm_eval",
    "gmm_logpdf",
    "gmm_sum",
    "md_detect",
    "ml_detect_full",
    "joint_ml_decode",
    "ml_detect_blind_marginal",
    "BlindResult",
    "enumerate_indices",
]
