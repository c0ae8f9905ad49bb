"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from bfia.channel import crandn, draw_channel, exact_interference_cov, transmit
from bfia.cli import main
from bfia.constellation import enumerate_vectors, make_constellation
from bfia.detect import joint_ml_decode, ml_detect_full
from bfia.estimate import EmConfig, em_fit_gmm, estimate_covariance
from bfia.harness import SimConfig, paired_difference, run_ber
from bfia.precoder import Scenario, build_precoders, check_alignment, max_spac
from bfia.rotations import general_orthogonal, random_useful_unitary, verify_theorem3

from conftest import ACCEPTANCE

QPSK = make_constellation("psk", 4)
BPSK = make_constellation("psk", 2)


def report(n, passed, detail, elapsed, limit):
    ok = passed and elapsed < limit
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s / {limit:g}s) {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert passed, line
    assert elapsed < limit, line


def test_1_spac_formulas():
    t0 = time.perf_counter()
    cells = []
    for k in range(1, 7):
        for m in range(1, 4):
            for n in range(m, 5):
                for l in range(1, 7):  # noqa: E741
                    ml = m * l
                    bc = ml - k + 1
                    icd = ml - (-(-k * m // n)) + 1
                    for kind, want in (("bc", bc), ("ic", icd)):
                        s = Scenario(kind, k, m, n, l)
                        if want <= 0:
                            with pytest.raises(ValueError):
                                max_spac(s)
                            continue
                        r = max_spac(s)
                        cells.append(r.d_max == want and r.spac == Fraction(want, ml))
    siso = [max_spac(Scenario(kind, k, 1, 1, l)).d_max == l - k + 1
            for kind in ("bc", "ic") for k in range(1, 6) for l in range(k, k + 5)]  # noqa: E741
    worked = (max_spac(Scenario("ic", 2, 1, 1, 3)).d_max == 2, max_spac(Scenario("ic", 3, 1, 1, 4)).d_max == 2)
    passed = all(cells) and all(siso) and all(worked)
    report(1, passed, f"{sum(cells)}/{len(cells)} MIMO cells, {sum(siso)}/{len(siso)} SISO cells, "
                      f"worked instances {worked}", time.perf_counter() - t0, 1.0)


def test_2_alignment_invariant():
    t0 = time.perf_counter()
    counts = {}
    for k, l in ((2, 3), (3, 4), (4, 5)):  # noqa: E741
        rng = np.random.default_rng([2, k, l])
        s = Scenario("ic", k, 1, 1, l)
        d = max_spac(s).d_max
        good = 0
        for _ in range(100):
            p = build_precoders(s, d, [random_useful_unitary(d, rng).matrix for _ in range(k)])
            rep = check_alignment(draw_channel(s, 1.0, 1.0, rng), p, tol=1e-8)
            good += rep.passed and all(r.intersection_dim == d - 1 for r in rep.receivers)
        counts[(k, l)] = good
    passed = all(v >= 99 for v in counts.values())
    report(2, passed, f"draws passing per (K,L): {counts}", time.perf_counter() - t0, 10.0)


def test_3_identical_marginals():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, total, ok = 0.0, 0, 0
    for m in (2, 4):
        for c in (BPSK, QPSK):
            for _ in range(50):
                rep = verify_theorem3(random_useful_unitary(m, rng), c, tol=1e-9)
                worst = max(worst, rep.max_mismatch)
                ok += rep.passed
                total += 1
    counter = None
    for trial in range(20):
        u = general_orthogonal(4, rng.uniform(0, 2 * np.pi, 6))
        rep = verify_theorem3(u, QPSK, tol=1e-9)
        if not rep.passed:
            counter = (trial, rep.max_mismatch)
            break
    passed = ok == total and counter is not None
    report(3, passed, f"{ok}/{total} useful draws equal (worst {worst:.1e}); untied counterexample {counter}",
           time.perf_counter() - t0, 30.0)


def test_4_em_oracle():
    t0 = time.perf_counter()
    res = {}
    for var in (0.1, 0.01):
        recovered = monotone = 0
        for trial in range(50):
            rng = np.random.default_rng([4, trial, int(round(var * 1000))])
            h = crandn(rng, ())
            u = rng.choice([-1.0, 1.0])
            mu = h * u * QPSK.points
            z = mu[rng.integers(4, size=500)] + np.sqrt(var) * crandn(rng, 500)
            fit = em_fit_gmm(z, EmConfig(4, variance=var), rng)
            cost = np.abs(fit.pdf.means[:, None] - mu[None, :])
            r, c = linear_sum_assignment(cost)
            recovered += int(cost[r, c].max() < 0.1)
            tr = fit.loglik_trace
            monotone += bool(np.all(np.diff(tr) >= -1e-10 * np.abs(tr[:-1])))
        res[var] = (recovered, monotone)
    passed = all(r >= 45 and m == 50 for r, m in res.values())
    report(4, passed, f"(recovered, monotone) per sigma2: {res}", time.perf_counter() - t0, 60.0)


def test_5_covariance_consistency():
    t0 = time.perf_counter()
    sizes = (100, 1000, 10_000)
    out = {}
    passed = True
    for k, l in ((2, 3), (3, 4)):  # noqa: E741
        errs = []
        for seed in range(20):
            rng = np.random.default_rng([5, k, seed])
            s = Scenario("ic", k, 1, 1, l)
            d = l - k + 1
            p = build_precoders(s, d, [random_useful_unitary(d, rng).matrix for _ in range(k)])
            ch = draw_channel(s, 1.0, 0.1, rng)
            y = transmit(ch, p, rng.integers(4, size=(k, sizes[-1], d)), QPSK, rng).y[0]
            r = exact_interference_cov(ch, p, 0)
            errs.append([np.linalg.norm(estimate_covariance(y[:t], 0, p, sigma2=0.1).R - r) / np.linalg.norm(r)
                         for t in sizes])
        errs = np.array(errs)
        rms = np.sqrt(np.mean(errs**2, axis=0))
        strict_runs = int(np.sum((errs[:, 0] > errs[:, 1]) & (errs[:, 1] > errs[:, 2])))
        ok = errs[:, 2].max() < 0.1 and rms[0] > rms[1] > rms[2]
        passed &= bool(ok)
        out[(k, l)] = f"max@1e4={errs[:, 2].max():.4f} rms={np.round(rms, 4).tolist()} strict_runs={strict_runs}/20"
    report(5, passed, str(out), time.perf_counter() - t0, 60.0)


def test_6_detector_comparison():
    t0 = time.perf_counter()
    snrs = tuple(range(0, 31, 5))
    passed = True
    notes = []
    for k, l in ((2, 3), (3, 4)):  # noqa: E741
        cfg = SimConfig(Scenario("ic", k, 1, 1, l), 2, seed=2024, constellation=QPSK,
                        detectors="md-known,md-est,ml-blind", snr_db=snrs, realizations=50, blocks=500,
                        all_users=True)
        t = run_ber(cfg)
        worst_z, worst_eq = np.inf, 0.0
        for snr in snrs:
            eq, eq_se = paired_difference(t, "md-est", "md-known", snr)
            ok_eq = abs(eq) <= 3 * eq_se
            worst_eq = max(worst_eq, abs(eq) / eq_se if eq_se else (0.0 if eq == 0 else np.inf))
            passed &= ok_eq
            if snr >= 10:
                adv, adv_se = paired_difference(t, "md-known", "ml-blind", snr)
                z = adv / adv_se if adv_se else (np.inf if adv > 0 else 0.0)
                worst_z = min(worst_z, z)
                passed &= adv >= 3 * adv_se and adv > 0
        notes.append(f"K={k},L={l}: min advantage {worst_z:.1f} SE, max |MD-est - MD-known| {worst_eq:.1f} SE")
    report(6, bool(passed), "; ".join(notes), time.perf_counter() - t0, 900.0)


def test_7_error_floor():
    t0 = time.perf_counter()
    cfg = SimConfig(Scenario("ic", 2, 1, 1, 1), 1, seed=7, constellation=QPSK, detectors="md-known,ml-known",
                    snr_db=(20, 30), realizations=500, blocks=500, allow_infeasible=True)
    t = run_ber(cfg)
    md = t.get("md-known", 30).ber / t.get("md-known", 20).ber
    ml = t.get("ml-known", 30).ber / t.get("ml-known", 20).ber
    report(7, md >= 0.5 and ml <= 0.2, f"MD 30/20 dB ratio {md:.3f} (>=0.5), ML ratio {ml:.3f} (<=0.2)",
           time.perf_counter() - t0, 300.0)


def _oracle_agreement(s, d, seed, draws=10, per_draw=100):
    rng = np.random.default_rng(seed)
    us = [random_useful_unitary(d, rng).matrix if d % 2 == 0 else np.eye(d) for _ in range(s.k)]
    p = build_precoders(s, d, us, allow_infeasible=True)
    cand = enumerate_vectors(QPSK, d)
    agree = genuine = 0
    for _ in range(draws):
        ch = draw_channel(s, 1.0, 0.01, rng)
        y = transmit(ch, p, rng.integers(4, size=(s.k, per_draw, d)), QPSK, rng).y[0]
        a = ml_detect_full(y, ch, p, 0, QPSK)
        b = joint_ml_decode(y, ch, p, 0, QPSK)
        agree += int(np.sum(a == b))
        a0, a1 = ch.effective(0, 0, p), ch.effective(0, 1, p)
        for n in np.nonzero(a != b)[0]:
            dist = np.sum(np.abs(y[n][None, None, :] - (cand @ a0.T)[:, None, :] - (cand @ a1.T)[None, :, :]) ** 2,
                          axis=2)
            marg = logsumexp(-dist / ch.sigma2, axis=1)
            genuine += np.argmax(marg) == a[n] and np.unravel_index(dist.argmin(), dist.shape)[0] == b[n]
    return agree, draws * per_draw - agree, genuine


def test_8_ml_oracle():
    t0 = time.perf_counter()
    agree, _, _ = _oracle_agreement(Scenario("ic", 2, 1, 1, 1), 1, [8, 1])
    report(8, agree >= 990, f"K=2 L=1 d=1: {agree}/1000 blocks agree with the joint oracle",
           time.perf_counter() - t0, 120.0)


def test_8_ml_oracle_precoded_layout():
    # pooled over seeds: single ill-conditioned draws can cost a block or two
    t0 = time.perf_counter()
    agree = differ = genuine = 0
    for seed in range(5):
        a, dd, g = _oracle_agreement(Scenario("ic", 2, 1, 1, 3), 2, [8, 3, seed])
        agree, differ, genuine = agree + a, differ + dd, genuine + g
    passed = agree >= 0.99 * 5000 and genuine == differ
    report("8b", passed, f"K=2 L=3 d=2: {agree}/5000 agree, {genuine}/{differ} disagreements are "
                         "marginal-vs-joint argmax differences", time.perf_counter() - t0, 120.0)


def test_9_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "det.cfg"
    cfg.write_text("k = 2\nl = 3\nd = 2\nrealizations = 8\nblocks = 200\nsnr_db = 0:30:10\n"
                   "detectors = md-known,md-est,ml-known,ml-blind\n")
    bodies = []
    for w in (1, 2, 8):
        out = tmp_path / f"w{w}.csv"
        assert main(["simulate", "--config", str(cfg), "--seed", "99", "--workers", str(w),
                     "--output", str(out)]) == 0
        bodies.append([ln for ln in out.read_text().splitlines() if not ln.startswith("#")])
    same = bodies[0] == bodies[1] == bodies[2]
    report(9, same, f"CSV bodies identical across 1/2/8 workers ({len(bodies[0]) - 1} rows)",
           time.perf_counter() - t0, 300.0)
