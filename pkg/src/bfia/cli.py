"""Command-line entry point: ``bfia <command> [options]``.

Exit status is 0 on success, 1 for invalid parameters (one ``error:`` line on
stderr) and 2 for runtime or numeric failures.  ``--json`` prints one JSON
object per line instead of text.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__
from .channel import alpha_matrix, draw_channel, exact_interference_cov, transmit
from .constellation import enumerate_vectors, parse_constellation
from .errors import ParameterError
from .estimate import estimate_covariance, estimate_interference_pdf, exact_interference_pdf
from .harness import (
    CONFIG_KEYS,
    coerce_value,
    config_from_mapping,
    emit_plot_script,
    format_results,
    load_config,
    parse_angles,
    resolve_angles,
    run_ber,
    write_results,
)
from .precoder import Scenario, build_precoders, check_alignment, max_spac
from .rotations import general_orthogonal, useful_unitary, verify_theorem3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Out:
    def __init__(self, as_json, stream):
        self.as_json = as_json
        self.stream = stream

    def emit(self, text, payload):
        if self.as_json:
            self.stream.write(json.dumps(payload, default=_jsonable) + "\n")
        else:
            self.stream.write(text + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def _scenario_args(p):
    p.add_argument("--scenario", choices=("bc", "ic"), default="ic")
    p.add_argument("--k", type=int, required=True, help="number of users")
    p.add_argument("--m", type=int, default=1, help="transmit antennas")
    p.add_argument("--n", type=int, default=1, help="receive antennas")
    p.add_argument("--l", type=int, default=1, help="symbol extension factor")


def _scenario(a):
    return Scenario(a.scenario, a.k, a.m, a.n, a.l)


def _unitaries(d, k, angles, rng):
    if angles is None:
        angles = "seeded-random"
    spec = parse_angles(angles) if isinstance(angles, str) else angles
    if spec == "seeded-random":
        if d == 1:
            return [np.ones((1, 1))] * k
        if d % 2 == 0:
            return [useful_unitary(d, rng.uniform(0, 2 * np.pi, d - 1)).matrix for _ in range(k)]
        return [general_orthogonal(d, rng.uniform(0, 2 * np.pi, d * (d - 1) // 2)) for _ in range(k)]
    spec = resolve_angles(spec, d)
    if d == 1:
        return [np.ones((1, 1))] * k
    u = useful_unitary(d, spec).matrix if d % 2 == 0 else general_orthogonal(d, spec)
    return [u] * k


def cmd_spac(a, out):
    r = max_spac(_scenario(a))
    out.emit(str(r), {"d_max": r.d_max, "spac": str(r.spac), "formula": r.formula})
    return 0


def _build(a):
    s = _scenario(a)
    d = a.d if a.d is not None else max_spac(s).d_max
    rng = np.random.default_rng(a.seed)
    return s, build_precoders(s, d, _unitaries(d, s.k, a.angles, rng), allow_infeasible=a.allow_infeasible), rng


def cmd_build(a, out):
    s, p, _ = _build(a)
    for j in range(s.k):
        payload = {
            "user": j, "d": p.d, "support": list(p.supports[j]), "feasible": p.feasible,
            "precoder": p.precoders[j].round(12),
        }
        text = f"user {j}: dims {list(p.supports[j])}"
        if j == 0:
            text = f"group1={list(p.group1)} group2={list(p.group2)} feasible={p.feasible}\n" + text
        out.emit(text, payload)
    return 0


def cmd_check(a, out):
    s, p, rng = _build(a)
    passed = 0
    for t in range(a.draws):
        ch = draw_channel(s, 1.0, 1.0, rng)
        rep = check_alignment(ch, p, a.tol)
        passed += rep.passed
        if a.verbose or a.draws == 1:
            for r in rep.receivers:
                out.emit(
                    f"draw {t} rx {r.receiver}: rank(I)={r.interference_rank} rank([S I])={r.union_rank}"
                    f"/{r.space_dim} dim(S&I)={r.intersection_dim} {'PASS' if r.passed else 'FAIL'}",
                    {"draw": t, **rep.as_dict()["receivers"][r.receiver]},
                )
    verdict = "PASS" if passed == a.draws else "FAIL"
    out.emit(f"{verdict} {passed}/{a.draws} draws", {"passed": passed, "draws": a.draws, "d": p.d})
    return 0


def cmd_theorem3(a, out):
    c = parse_constellation(a.alphabet)
    rng = np.random.default_rng(a.seed)
    if a.untied:
        u = general_orthogonal(a.m, rng.uniform(0, 2 * np.pi, a.m * (a.m - 1) // 2))
    elif a.angles:
        u = useful_unitary(a.m, resolve_angles(parse_angles(a.angles), a.m)).matrix
    else:
        u = useful_unitary(a.m, rng.uniform(0, 2 * np.pi, a.m - 1)).matrix
    rep = verify_theorem3(u, c, a.tol)
    out.emit(str(rep), {"passed": rep.passed, "max_mismatch": rep.max_mismatch,
                        "row_mismatch": rep.row_mismatch, "tol": rep.tol})
    return 0


def cmd_estimate_demo(a, out):
    s = Scenario("ic", a.k, 1, 1, a.l)
    c = parse_constellation(a.alphabet)
    rng = np.random.default_rng(a.seed)
    d = max_spac(s).d_max
    p = build_precoders(s, d, _unitaries(d, s.k, None, rng))
    sigma2 = 10 ** (-a.snr / 10)
    ch = draw_channel(s, alpha_matrix(s.k), sigma2, rng)
    idx = rng.integers(c.size, size=(s.k, a.blocks, d))
    y = transmit(ch, p, idx, c, rng).y[0]
    est = estimate_interference_pdf(y, 0, p, c, sigma2=sigma2, rng=rng)
    for j, g in sorted(est.per_interferer.items()):
        u = np.asarray(p.unitaries[j])
        true = ch.gains[0, j, 0, 0] * (enumerate_vectors(c, d) @ u[0])
        cost = np.abs(true[:, None] - g.means[None, :])
        r, cc = linear_sum_assignment(cost)
        out.emit(
            f"interferer {j}: {true.size} means, worst match error {cost[r, cc].max():.4f}",
            {"interferer": j, "true_means": true[r], "fitted_means": g.means[cc],
             "max_error": float(cost[r, cc].max())},
        )
    oracle = exact_interference_pdf(ch, p, 0, c)
    cov = estimate_covariance(y, 0, p, sigma2=sigma2)
    exact = exact_interference_cov(ch, p, 0)
    err = float(np.linalg.norm(cov.R - exact) / np.linalg.norm(exact))
    out.emit(
        f"composite mixture: {est.pdf.n_components} means (oracle {oracle.n_components})\n"
        f"covariance relative Frobenius error: {err:.4f} over {cov.sample_count} blocks",
        {"composite_components": est.pdf.n_components, "cov_frobenius_rel_error": err,
         "blocks": cov.sample_count},
    )
    return 0


def cmd_simulate(a, out):
    values = load_config(a.config) if a.config else {}
    for key in sorted(CONFIG_KEYS):
        raw = getattr(a, key, None)
        if raw is not None:
            values[key] = coerce_value(key, raw)
    if values.get("seed") is None:
        raise ParameterError("simulate needs --seed (or seed in the config file)")
    output = values.get("output")
    if a.emit_plot_script and not output:
        raise ParameterError("--emit-plot-script needs --output")
    cfg = config_from_mapping(values)
    table = run_ber(cfg, workers=a.workers)
    if output:
        write_results(table, output)
        if a.emit_plot_script:
            emit_plot_script(output, a.emit_plot_script)
    if out.as_json:
        for r in table.rows:
            out.emit("", {c: getattr(r, c) for c in ("snr_db", "detector", "k", "l", "d", "realizations",
                                                       "blocks", "bits_total", "bit_errors", "ber", "se",
                                                       "failures")})
    else:
        out.stream.write(format_results(table))
    return 0


def build_parser():
    p = _Parser(prog="bfia", description="Blind fractional interference alignment toolkit.")
    p.add_argument("--version", action="version", version=f"bfia {__version__}")
    p.add_argument("--json", action="store_true", help="line-delimited JSON output")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    q = sub.add_parser("spac", help="maximum streams per user and SpAC")
    _scenario_args(q)
    q.set_defaults(func=cmd_spac)

    for name, func, hlp in (("build", cmd_build, "precoder layout"), ("check", cmd_check, "alignment rank checks")):
        q = sub.add_parser(name, help=hlp)
        _scenario_args(q)
        q.add_argument("--d", type=int, help="streams per user (default d_max)")
        q.add_argument("--angles", help="comma list of radians or seeded-random[:<seed>]")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--allow-infeasible", action="store_true")
        if name == "check":
            q.add_argument("--draws", type=int, default=1)
            q.add_argument("--tol", type=float, default=1e-8)
            q.add_argument("--verbose", action="store_true")
        q.set_defaults(func=func)

    q = sub.add_parser("theorem3", help="identical-marginal check for a useful unitary")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--alphabet", default="qpsk")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--angles")
    q.add_argument("--tol", type=float, default=1e-9)
    q.add_argument("--untied", action="store_true", help="use a general orthogonal product instead")
    q.set_defaults(func=cmd_theorem3)

    q = sub.add_parser("estimate-demo", help="blind statistics estimation on one SISO draw")
    q.add_argument("--k", type=int, default=2)
    q.add_argument("--l", type=int, default=3)
    q.add_argument("--alphabet", default="qpsk")
    q.add_argument("--snr", type=float, default=20.0)
    q.add_argument("--blocks", type=int, default=500)
    q.add_argument("--seed", type=int, required=True)
    q.set_defaults(func=cmd_estimate_demo)

    q = sub.add_parser("simulate", help="Monte Carlo BER run")
    q.add_argument("--config", help="flat key = value file")
    for key in sorted(CONFIG_KEYS - {"workers"}):
        q.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")
    q.add_argument("--workers", type=int)
    q.add_argument("--emit-plot-script", metavar="PATH")
    q.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    as_json = "--json" in argv
    # accept --json anywhere on the line
    argv = [x for x in argv if x != "--json"]
    out = _Out(as_json, sys.stdout)

    def fail(code, kind, msg):
        if as_json:
            sys.stderr.write(json.dumps({"error": kind, "message": msg, "exit": code}) + "\n")
        else:
            sys.stderr.write(f"error: {msg}\n")
        return code

    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return fail(1, "usage", str(e))
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    try:
        return args.func(args, out)
    except (ParameterError, ValueError) as e:
        return fail(1, type(e).__name__, str(e))
    except (ArithmeticError, RuntimeError, OSError, np.linalg.LinAlgError) as e:
        return fail(2, type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
