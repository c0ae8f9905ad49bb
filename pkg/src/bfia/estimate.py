"""Blind estimation of interference statistics from received data.

Both estimators exploit the resource layout: at receiver ``i`` every
interferer owns one group-1 resource that carries that interferer alone (plus
noise), so its statistics can be learned without pilots and without knowing
the interfering channel or precoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .detect import GmmPdf, gmm_sum
from .errors import EstimationError, ParameterError

MIN_SAMPLES = 100
VARIANCE_FLOOR = 1e-12


class VarianceMode(str, Enum):
    KNOWN = "known"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class EmConfig:
    """Settings for :func:`em_fit_gmm`.

    ``variance`` is the noise variance used in ``known`` mode and the starting
    value in ``estimated`` mode (``None`` starts from the sample spread).
    """

    n_components: int
    max_iters: int = 200
    loglik_tol: float = 1e-8
    variance_mode: VarianceMode = VarianceMode.KNOWN
    variance: float | None = None
    restarts: int = 5
    init_iters: int = 10

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise ParameterError(f"n_components must be a positive integer, got {self.n_components}")
        if self.max_iters < 1 or self.restarts < 1 or self.init_iters < 0:
            raise ParameterError("max_iters and restarts must be >= 1, init_iters >= 0")
        if not self.loglik_tol > 0:
            raise ParameterError("loglik_tol must be positive")
        mode = VarianceMode(self.variance_mode)
        object.__setattr__(self, "variance_mode", mode)
        if mode is VarianceMode.KNOWN and not (self.variance is not None and self.variance > 0):
            raise ParameterError("known-variance mode needs a positive variance")


@dataclass
class EmFit:
    """Fitted mixture and run diagnostics for the winning restart."""

    pdf: GmmPdf
    loglik_trace: np.ndarray
    iters: int
    converged: bool
    variance_floored: bool = False
    restart_logliks: list = field(default_factory=list)

    @property
    def loglik(self):
        return float(self.loglik_trace[-1])


def _samples(z):
    z = np.asarray(z, dtype=complex).ravel()
    if not np.all(np.isfinite(z)):
        raise ParameterError("samples must be finite")
    return z


def cluster_init(samples, k, rng=None, iters=10):
    """Initial component means from farthest-point seeding and Lloyd refinement.

    The first seed is drawn with ``rng`` (the sample closest to the sample
    mean when ``rng`` is None); each further seed is the sample farthest from
    all seeds so far.  ``iters`` rounds of assign-and-average follow.
    """
    z = _samples(samples)
    k = int(k)
    if k < 1:
        raise ParameterError(f"need at least one component, got {k}")
    if z.size < k:
        raise ParameterError(f"{z.size} samples cannot seed {k} components")
    if rng is None:
        first = int(np.argmin(np.abs(z - z.mean())))
    else:
        first = int(rng.integers(z.size))
    means = np.empty(k, dtype=complex)
    means[0] = z[first]
    dist = np.abs(z - means[0]) ** 2
    for c in range(1, k):
        means[c] = z[int(np.argmax(dist))]
        dist = np.minimum(dist, np.abs(z - means[c]) ** 2)
    for _ in range(iters):
        lab = np.argmin(np.abs(z[:, None] - means[None, :]), axis=1)
        for c in range(k):
            hit = lab == c
            if hit.any():
                means[c] = z[hit].mean()
    return means


def _loglik_terms(z, means, var):
    dr = z.real[:, None] - means.real[None, :]
    di = z.imag[:, None] - means.imag[None, :]
    e = (dr * dr + di * di) * (-1.0 / var)
    peak = e.max(axis=1)
    w = np.exp(e - peak[:, None])
    tot = w.sum(axis=1)
    lse = peak + np.log(tot)
    ll = float(np.sum(lse) - z.size * (np.log(means.size) + np.log(np.pi * var)))
    return w / tot[:, None], lse, ll


def _em_once(z, means, var, cfg):
    estimate_var = cfg.variance_mode is VarianceMode.ESTIMATED
    floored = False
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gamma, _, ll = _loglik_terms(z, means, var)
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= cfg.loglik_tol * abs(trace[-2]):
            converged = True
            break
        weight = gamma.sum(axis=0)
        live = weight > 0
        new = means.copy()
        new[live] = (gamma[:, live].T @ z) / weight[live]
        means = new
        if estimate_var:
            var = float(np.sum(gamma * np.abs(z[:, None] - means[None, :]) ** 2) / z.size)
            if var < VARIANCE_FLOOR:
                var, floored = VARIANCE_FLOOR, True
    else:
        # keep the trace aligned with the returned parameters
        trace.append(_loglik_terms(z, means, var)[2])
    return means, var, np.asarray(trace), it, converged, floored


def em_fit_gmm(samples, cfg, rng=None):
    """Fit an equal-weight complex Gaussian mixture by expectation-maximisation.

    Weights stay fixed at ``1 / n_components``; only the means (and, in
    ``estimated`` mode, the shared variance) are updated.  The best of
    ``cfg.restarts`` runs by final log-likelihood is returned.

    Parameters
    ----------
    samples : array_like of complex
    cfg : EmConfig
    rng : numpy.random.Generator, optional
        Source for restart seeding; restart 0 always uses the deterministic
        mean-centred seed.

    Returns
    -------
    EmFit
    """
    z = _samples(samples)
    k = cfg.n_components
    if z.size < k:
        raise ParameterError(f"{z.size} samples cannot fit {k} components")
    if cfg.variance_mode is VarianceMode.KNOWN:
        var0 = float(cfg.variance)
    elif cfg.variance is not None:
        var0 = float(cfg.variance)
    else:
        var0 = max(float(np.var(z)) / k, VARIANCE_FLOOR)
    if k == 1:
        mean = np.array([z.mean()])
        var = var0
        if cfg.variance_mode is VarianceMode.ESTIMATED:
            var = max(float(np.mean(np.abs(z - mean[0]) ** 2)), VARIANCE_FLOOR)
        ll = _loglik_terms(z, mean, var)[2]
        return EmFit(GmmPdf(mean, var), np.array([ll]), 1, True, var == VARIANCE_FLOOR, [ll])
    best = None
    lls = []
    children = (rng or np.random.default_rng(0)).spawn(cfg.restarts - 1) if cfg.restarts > 1 else []
    for r in range(cfg.restarts):
        init = cluster_init(z, k, None if r == 0 else children[r - 1], cfg.init_iters)
        means, var, trace, it, conv, floored = _em_once(z, init, var0, cfg)
        lls.append(float(trace[-1]))
        if best is None or trace[-1] > best[2][-1]:
            best = (means, var, trace, it, conv, floored)
    means, var, trace, it, conv, floored = best
    return EmFit(GmmPdf(means, var), trace, it, conv, floored, lls)


def select_components(samples, max_components, cfg, rng=None):
    """Cluster-count heuristic: the component count with the lowest BIC."""
    z = _samples(samples)
    best = None
    free_var = cfg.variance_mode is VarianceMode.ESTIMATED
    for k in range(1, min(int(max_components), z.size) + 1):
        fit = em_fit_gmm(z, _with_components(cfg, k), rng)
        bic = -2 * fit.loglik + (2 * k + free_var) * np.log(z.size)
        if best is None or bic < best[0]:
            best = (bic, fit)
    return best[1]


def _with_components(cfg, k):
    return EmConfig(k, cfg.max_iters, cfg.loglik_tol, cfg.variance_mode, cfg.variance,
                    cfg.restarts, cfg.init_iters)


@dataclass
class InterferenceEstimate:
    """Composite interference-plus-noise mixture and its per-interferer pieces."""

    pdf: GmmPdf
    per_interferer: dict
    fits: dict


def _receiver_samples(y, p):
    y = np.asarray(y, dtype=complex)
    if y.ndim != 2 or y.shape[1] != p.scenario.rx_dim:
        raise ParameterError(f"received samples must be (B, {p.scenario.rx_dim}), got {y.shape}")
    return y


def estimate_interference_pdf(y, i, p, constellations, sigma2=None, components=None,
                              em=None, rng=None, min_samples=MIN_SAMPLES):
    """Learn the interference-plus-noise density on receiver ``i``'s mixed resources.

    Fits one mixture per interferer on the resource that interferer occupies
    alone, then combines them by set-sum with the noise counted once.  With a
    real useful unitary the fitted density is valid on every mixed resource.

    Parameters
    ----------
    y : (B, L) complex
        Received blocks at receiver ``i`` for one realisation.
    i : int
    p : PrecoderSet
        SISO layout; only the resource map is used, not other users' unitaries.
    constellations : Constellation or list
        Interferer alphabets (the receiver knows the modulations).
    sigma2 : float, optional
        Known noise variance; estimated jointly by EM when omitted.
    components : int, "auto" or None
        ``None`` uses ``|X_j|**d`` components per interferer, ``"auto"`` the
        BIC cluster-count heuristic.
    em : EmConfig, optional
        Iteration settings; ``n_components`` and variance are overridden.

    Raises
    ------
    EstimationError
        Fewer than ``min_samples`` blocks or a missing interference-only resource.
    """
    s = p.scenario
    if not s.is_siso:
        raise ParameterError("blind interference estimation is implemented for SISO layouts only")
    y = _receiver_samples(y, p)
    if y.shape[0] < min_samples:
        raise EstimationError(f"{y.shape[0]} blocks is below the {min_samples}-sample minimum")
    cons = [constellations] * s.k if hasattr(constellations, "points") else list(constellations)
    dm = p.dim_map(i)
    base = em or EmConfig(1, variance=1.0)
    mode = VarianceMode.KNOWN if sigma2 is not None else VarianceMode.ESTIMATED
    per, fits = {}, {}
    for j in range(s.k):
        if j == i:
            continue
        if j not in dm.interference_only:
            raise EstimationError(f"no resource carries interferer {j} alone at receiver {i}")
        z = y[:, dm.interference_only[j]]
        cfg = EmConfig(
            1, base.max_iters, base.loglik_tol, mode, sigma2, base.restarts, base.init_iters
        )
        if components == "auto":
            fit = select_components(z, cons[j].size ** p.d, cfg, rng)
        else:
            n = cons[j].size ** p.d if components is None else int(components)
            fit = em_fit_gmm(z, _with_components(cfg, n), rng)
        per[j], fits[j] = fit.pdf, fit
    if not per:
        return InterferenceEstimate(GmmPdf([0.0], sigma2 if sigma2 else 1.0), per, fits)
    var = sigma2 if sigma2 is not None else float(np.mean([g.variance for g in per.values()]))
    total = GmmPdf([0.0], var)
    for g in per.values():
        total = gmm_sum(total, GmmPdf(g.means, var))
    return InterferenceEstimate(total, per, fits)


def exact_interference_pdf(ch, p, i, constellations, cap=None):
    """Oracle mixture on receiver ``i``'s mixed resources from the true channel.

    Uses row 1 of each interferer's unitary (its first shared resource); with
    real useful unitaries every row gives the same mean set.
    """
    from .constellation import DEFAULT_SEARCH_CAP, enumerate_vectors

    cap = cap or DEFAULT_SEARCH_CAP
    s = p.scenario
    cons = [constellations] * s.k if hasattr(constellations, "points") else list(constellations)
    total = GmmPdf([0.0], ch.sigma2)
    row = 1 if p.d > 1 else 0
    for j in range(s.k):
        if j == i:
            continue
        u = np.asarray(p.unitaries[j])
        means = ch.gains[i, j, 0, 0] * (enumerate_vectors(cons[j], p.d, cap) @ u[row])
        total = gmm_sum(total, GmmPdf(means, ch.sigma2), cap)
    return total


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Estimated interference-plus-noise covariance.

    R : (NL, NL) Hermitian positive definite
    sample_count : int
    eps_reg : float
        Regularisation added to the diagonal.
    sigma2 : float
        Noise variance used or estimated.
    """

    R: np.ndarray
    sample_count: int
    eps_reg: float
    sigma2: float


def _finish(r, t, sigma2):
    r = 0.5 * (r + r.conj().T)
    nl = r.shape[0]
    eps = 1e-9 * float(np.real(np.trace(r))) / nl
    r = r + eps * np.eye(nl)
    r = 0.5 * (r + r.conj().T)
    return CovEstimate(r, t, eps, float(sigma2))


def estimate_covariance(y, i, p, sigma2=None, desired_gain=None):
    """Interference-plus-noise covariance from a realisation's data blocks.

    Averaged outer products ``r r^H`` are taken over the resources that hold
    no desired signal, where the residual equals the received sample.  The
    layout then fills in the rest: a resource shared by several interferers
    gets the sum of their powers plus noise, resources carrying only the
    desired user get the noise variance, and cross terms between distinct
    rows of a unitary vanish.

    Parameters
    ----------
    y : (T, L) complex
        Received blocks at receiver ``i`` (SISO).
    sigma2 : float, optional
        Noise variance.  When omitted it is estimated from the pure resources,
        which needs ``desired_gain``.
    desired_gain : complex, optional
        ``h_ii``; only used to estimate ``sigma2``.
    """
    s = p.scenario
    if not s.is_siso:
        raise ParameterError("structured covariance estimation needs a SISO layout; use estimate_covariance_pilot")
    y = _receiver_samples(y, p)
    t = y.shape[0]
    if t == 0:
        raise EstimationError("covariance estimation needs at least one block")
    dm = p.dim_map(i)
    if sigma2 is None:
        if desired_gain is None or not dm.pure:
            raise EstimationError("unknown sigma2 needs desired_gain and a pure resource")
        pw = np.mean(np.abs(y[:, list(dm.pure)]) ** 2, axis=0)
        # unit-energy symbols through unit-norm unitary rows
        sigma2 = max(float(np.mean(pw)) - abs(desired_gain) ** 2, VARIANCE_FLOOR)
    l = s.tx_dim  # noqa: E741
    r = sigma2 * np.eye(l, dtype=complex)
    only = sorted(dm.interference_only.items())
    dims = [d for _, d in only]
    if dims:
        block = y[:, dims].T @ y[:, dims].conj() / t
        r[np.ix_(dims, dims)] = block
        for (j, dj) in only:
            power = max(float(np.real(block[dims.index(dj), dims.index(dj)])) - sigma2, 0.0)
            for dim in p.supports[j]:
                if dim != dj:
                    r[dim, dim] += power
    return _finish(r, t, sigma2)


def estimate_covariance_pilot(y, h_desired, q, x_pilot):
    """Pilot-aided estimate: average ``r r^H`` with ``r = y - h Q x_pilot``.

    Works for any antenna configuration; ``x_pilot`` are known symbol
    vectors, one per block.
    """
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x_pilot, dtype=complex)
    if y.shape[0] == 0:
        raise EstimationError("covariance estimation needs at least one block")
    if x.shape[0] != y.shape[0]:
        raise ParameterError("need one pilot vector per block")
    h = np.asarray(h_desired)
    a = h * q if h.ndim == 0 else h @ q
    res = y - x @ a.T
    r = res.T @ res.conj() / y.shape[0]
    return _finish(r, y.shape[0], float(np.real(np.trace(r))) / r.shape[0])
