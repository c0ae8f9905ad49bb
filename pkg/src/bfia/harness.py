"""Monte Carlo bit-error-rate experiments.

Each realisation draws one block-fading channel, one set of unitaries, the
symbol indices of every block and unit-variance noise from its own Philox
substream keyed by ``(seed, realisation)``.  The same draws are reused at every
SNR (common random numbers), which makes curves smooth and results identical
no matter how realisations are spread over worker processes.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import alpha_matrix, crandn, draw_channel, exact_interference_cov, noiseless
from .constellation import Constellation, enumerate_indices, enumerate_vectors, parse_constellation, symbols_to_bits
from .detect import DetectorKind, md_detect, ml_detect_blind_marginal, ml_detect_full, noise_pdf
from .errors import EstimationError, NumericError, ParameterError, SearchSpaceError
from .estimate import EmConfig, estimate_covariance, estimate_covariance_pilot, estimate_interference_pdf
from .precoder import Scenario, build_precoders, max_spac
from .rotations import general_orthogonal, random_complex_unitary, random_orthogonal, useful_unitary

CSV_COLUMNS = ("snr_db", "detector", "k", "l", "d", "realizations", "blocks", "bits_total", "bit_errors", "ber")


def _parse_detectors(v):
    if isinstance(v, str):
        v = [t for t in v.replace(" ", "").split(",") if t]
    try:
        out = tuple(DetectorKind(x) for x in v)
    except ValueError as e:
        raise ParameterError(f"unknown detector: {e}") from None
    if not out:
        raise ParameterError("select at least one detector")
    return out


@dataclass(frozen=True)
class SimConfig:
    """One BER experiment.

    ``unitary`` is ``"seeded-random"`` (fresh unitaries per realisation from
    its substream) or a sequence of angles shared by every user and
    realisation: ``d - 1`` angles for even ``d``, ``d(d-1)/2`` for odd ``d``.
    """

    scenario: Scenario
    d: int
    seed: int
    constellation: Constellation = field(default_factory=lambda: parse_constellation("qpsk"))
    detectors: tuple = (DetectorKind.MD_KNOWN,)
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0)
    realizations: int = 500
    blocks: int = 500
    unitary: object = "seeded-random"
    alpha_desired: float = 1.0
    alpha_interf: float = 1.0
    allow_infeasible: bool = False
    all_users: bool = False
    complex_unitary: bool = False
    components: object = None
    known_sigma2: bool = True
    em_restarts: int = 5
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.constellation, str):
            object.__setattr__(self, "constellation", parse_constellation(self.constellation))
        object.__setattr__(self, "detectors", _parse_detectors(self.detectors))
        snr = tuple(float(x) for x in np.atleast_1d(self.snr_db))
        if not snr:
            raise ParameterError("SNR list must be nonempty")
        object.__setattr__(self, "snr_db", snr)
        if self.seed is None or int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError("a non-negative integer seed is required")
        if self.realizations < 1 or self.blocks < 1 or self.workers < 1:
            raise ParameterError("realizations, blocks and workers must be >= 1")
        try:
            dmax = max_spac(self.scenario).d_max
        except ParameterError:
            if not self.allow_infeasible:
                raise
            dmax = 0
        if self.d < 1 or (self.d > dmax and not self.allow_infeasible):
            raise ParameterError(f"d={self.d} exceeds d_max={dmax}; pass allow_infeasible to override")
        blind = DetectorKind.ML_BLIND_MARGINAL in self.detectors
        if blind and not self.scenario.is_siso:
            raise ParameterError("ml-blind is implemented for SISO layouts only")
        if blind and self.complex_unitary:
            raise ParameterError("ml-blind needs real useful unitaries; disable complex_unitary")
        if blind and self.d > max(dmax, 0):
            raise ParameterError("ml-blind needs the feasible layout (d <= d_max)")
        if self.unitary != "seeded-random":
            angles = tuple(float(a) for a in self.unitary)
            need = self.d - 1 if self.d % 2 == 0 else self.d * (self.d - 1) // 2
            if len(angles) != need:
                raise ParameterError(f"d={self.d} needs {need} unitary angles, got {len(angles)}")
            object.__setattr__(self, "unitary", angles)

    def as_flat(self):
        """Flat key/value view mirroring the config file and CLI flags."""
        s = self.scenario
        return {
            "scenario": s.kind.value, "k": s.k, "m": s.m, "n": s.n, "l": s.l, "d": self.d,
            "seed": self.seed, "constellation": self.constellation.name,
            "detectors": ",".join(x.value for x in self.detectors),
            "snr_db": ",".join(_fmt(x) for x in self.snr_db),
            "realizations": self.realizations, "blocks": self.blocks,
            "unitary": self.unitary if isinstance(self.unitary, str) else ",".join(repr(a) for a in self.unitary),
            "alpha_desired": self.alpha_desired, "alpha_interf": self.alpha_interf,
            "allow_infeasible": self.allow_infeasible, "all_users": self.all_users,
            "complex_unitary": self.complex_unitary,
            "components": "" if self.components is None else self.components,
            "known_sigma2": self.known_sigma2, "em_restarts": self.em_restarts,
        }


def _fmt(x):
    return repr(float(x))


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}
_INT_KEYS = {"k", "m", "n", "l", "d", "seed", "realizations", "blocks", "em_restarts", "workers"}
_FLOAT_KEYS = {"alpha_desired", "alpha_interf"}
_BOOL_KEYS = {"allow_infeasible", "all_users", "complex_unitary", "known_sigma2"}
CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | {
    "scenario", "constellation", "detectors", "snr_db", "unitary", "components", "output",
}


def coerce_value(key, raw):
    """Convert a textual config value for ``key``."""
    if key not in CONFIG_KEYS:
        raise ParameterError(f"unknown config key {key!r}")
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    v = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(v)
        if key in _FLOAT_KEYS:
            return float(v)
        if key in _BOOL_KEYS:
            return _BOOL[v.lower()]
    except (ValueError, KeyError):
        raise ParameterError(f"bad value for {key}: {raw!r}") from None
    if key == "snr_db":
        return parse_snr_list(v)
    if key == "components":
        return None if v in ("", "none") else ("auto" if v == "auto" else int(v))
    if key == "unitary":
        return parse_angles(v)
    return v


def parse_snr_list(text):
    """``0,10,20`` or ``start:stop:step`` (inclusive stop)."""
    t = text.strip()
    try:
        if ":" in t:
            a, b, c = (float(x) for x in t.split(":"))
            if c <= 0:
                raise ValueError
            return tuple(float(x) for x in np.arange(a, b + c / 2, c))
        return tuple(float(x) for x in t.split(",") if x.strip())
    except ValueError:
        raise ParameterError(f"cannot parse SNR list {text!r}") from None


def parse_angles(text):
    """``seeded-random``, a comma list of radians, or ``seeded-random:<seed>``.

    The last form draws one fixed angle list from its own seed; its length is
    settled once ``d`` is known, so it is returned as a tagged tuple.
    """
    t = text.strip()
    if t == "seeded-random":
        return t
    if t.startswith("seeded-random:"):
        try:
            return ("seeded-random", int(t.split(":", 1)[1]))
        except ValueError:
            raise ParameterError(f"bad angle seed in {text!r}") from None
    try:
        return tuple(float(x) for x in t.split(",") if x.strip())
    except ValueError:
        raise ParameterError(f"cannot parse angle list {text!r}") from None


def resolve_angles(spec, d):
    """Expand a ``("seeded-random", seed)`` tag into concrete angles for ``d``."""
    if isinstance(spec, tuple) and len(spec) == 2 and spec[0] == "seeded-random":
        need = d - 1 if d % 2 == 0 else d * (d - 1) // 2
        return tuple(np.random.default_rng(spec[1]).uniform(0.0, 2 * np.pi, need))
    return spec


def load_config_text(text):
    """Parse a flat ``key = value`` file into a dict of typed values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[sim]\n" + text)
    except configparser.Error as e:
        raise ParameterError(f"malformed config: {e}") from None
    return {k: coerce_value(k, v) for k, v in cp["sim"].items()}


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return load_config_text(fh.read())
    except OSError as e:
        raise ParameterError(f"cannot read config {path}: {e.strerror}") from None


def config_from_mapping(values):
    """Build a :class:`SimConfig` from flat typed values (see :data:`CONFIG_KEYS`)."""
    v = dict(values)
    v.pop("output", None)
    if v.get("seed") is None:
        raise ParameterError("seed is required")
    for key in ("d", "k"):
        if v.get(key) is None:
            raise ParameterError(f"{key} is required")
    scen = Scenario(v.pop("scenario", "ic"), v.pop("k"), v.pop("m", 1) or 1, v.pop("n", 1) or 1, v.pop("l", 1) or 1)
    if "unitary" in v and v["unitary"] is not None:
        v["unitary"] = resolve_angles(v["unitary"], v["d"])
    v = {k: x for k, x in v.items() if x is not None}
    return SimConfig(scen, **v)


@dataclass
class BerRow:
    snr_db: float
    detector: str
    k: int
    l: int  # noqa: E741
    d: int
    realizations: int
    blocks: int
    bits_total: int
    bit_errors: int
    ber: float
    se: float | None = None
    wallclock: float | None = None
    failures: int = 0
    per_realization: np.ndarray | None = field(default=None, repr=False)

    def key(self):
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class BerTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def get(self, detector, snr_db):
        detector = DetectorKind(detector).value
        for r in self.rows:
            if r.detector == detector and r.snr_db == float(snr_db):
                return r
        raise KeyError((detector, snr_db))

    def curve(self, detector):
        detector = DetectorKind(detector).value
        rows = sorted((r for r in self.rows if r.detector == detector), key=lambda r: r.snr_db)
        return np.array([r.snr_db for r in rows]), np.array([r.ber for r in rows])


def standard_error(row):
    """Monte Carlo standard error of a row's BER.

    Spread of per-realisation BERs over realisations, which captures the
    fading-driven variance; a single realisation falls back to the binomial
    formula.
    """
    per = row.per_realization
    if per is not None and len(per) > 1:
        bits_each = row.bits_total / len(per)
        return float(np.std(np.asarray(per) / bits_each, ddof=1) / np.sqrt(len(per)))
    p = row.ber
    return float(np.sqrt(p * (1 - p) / max(row.bits_total, 1)))


def paired_difference(table, detector_a, detector_b, snr_db):
    """``BER(a) - BER(b)`` and its standard error at one SNR.

    Both detectors see identical draws, so the error of the difference comes
    from the spread of per-realisation differences, not from the two row
    errors added in quadrature (which double-counts the shared fading).
    """
    a = table.get(detector_a, snr_db)
    b = table.get(detector_b, snr_db)
    if a.per_realization is None or b.per_realization is None or len(a.per_realization) != len(b.per_realization):
        raise ParameterError("paired comparison needs per-realisation tallies from the same run")
    n = len(a.per_realization)
    bits_each = a.bits_total / n
    diff = (np.asarray(a.per_realization) - np.asarray(b.per_realization)) / bits_each
    se = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else float(np.hypot(a.se, b.se))
    return a.ber - b.ber, se


# ---------------------------------------------------------------- realisations

def realization_rng(seed, r):
    """Independent Philox stream for realisation ``r``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(r),))))


def _unitaries(cfg, rng):
    d, k = cfg.d, cfg.scenario.k
    if cfg.complex_unitary:
        return [random_complex_unitary(d, rng) for _ in range(k)]
    if cfg.unitary == "seeded-random":
        if d % 2 == 0:
            return [useful_unitary(d, rng.uniform(0.0, 2 * np.pi, d - 1)).matrix for _ in range(k)]
        return [random_orthogonal(d, rng) for _ in range(k)]
    u = useful_unitary(d, cfg.unitary).matrix if d % 2 == 0 else general_orthogonal(d, cfg.unitary) if d > 1 else np.ones((1, 1))
    return [u] * k


@dataclass
class _Draw:
    ch: object
    p: object
    idx: np.ndarray
    clean: np.ndarray
    noise: np.ndarray
    est_seed: object


def draw_realization(cfg, r):
    """All random quantities of realisation ``r``, in a fixed draw order."""
    rng = realization_rng(cfg.seed, r)
    s = cfg.scenario
    alphas = alpha_matrix(s.k, cfg.alpha_desired, cfg.alpha_interf)
    ch = draw_channel(s, alphas, 1.0, rng)
    p = build_precoders(s, cfg.d, _unitaries(cfg, rng), allow_infeasible=cfg.allow_infeasible)
    idx = rng.integers(cfg.constellation.size, size=(s.k, cfg.blocks, cfg.d))
    noise = crandn(rng, (s.k, cfg.blocks, s.rx_dim))
    clean = noiseless(ch, p, idx, cfg.constellation)
    return _Draw(ch, p, idx, clean, noise, rng.spawn(1)[0])


def _score(cons, d, chosen, sent):
    table = enumerate_indices(cons.size, d)
    got = symbols_to_bits(cons, table[np.asarray(chosen)])
    ref = symbols_to_bits(cons, sent)
    return int(np.count_nonzero(got != ref))


def _detect(cfg, kind, ch, p, i, y, draw, em_rng):
    cons = cfg.constellation
    cand = enumerate_vectors(cons, cfg.d)
    s = cfg.scenario
    if kind is DetectorKind.MD_KNOWN:
        return md_detect(y, ch.h(i, i), p.precoders[i], exact_interference_cov(ch, p, i), cand)[1]
    if kind is DetectorKind.MD_ESTIMATED:
        if s.is_siso and p.feasible:
            est = estimate_covariance(
                y, i, p, sigma2=ch.sigma2 if cfg.known_sigma2 else None,
                desired_gain=ch.gains[i, i, 0, 0],
            )
        else:
            # no interference-only resource to learn from: pilot-aided estimate
            est = estimate_covariance_pilot(y, ch.h(i, i), p.precoders[i], cons.points[draw.idx[i]])
        return md_detect(y, ch.h(i, i), p.precoders[i], est.R, cand)[1]
    if kind is DetectorKind.ML_FULL_CSIR:
        return ml_detect_full(y, ch, p, i, cons)
    est = estimate_interference_pdf(
        y, i, p, cons, sigma2=ch.sigma2 if cfg.known_sigma2 else None,
        components=cfg.components, em=EmConfig(1, variance=1.0, restarts=cfg.em_restarts), rng=em_rng,
    )
    noise = noise_pdf(ch.sigma2 if cfg.known_sigma2 else est.pdf.variance)
    res = ml_detect_blind_marginal(y, ch.gains[i, i, 0, 0], p.precoders[i], p.dim_map(i), noise, est.pdf, cand)
    return res.indices


def run_realization(cfg, r):
    """Bit-error counts for realisation ``r``: ``{(snr, detector): (errors, bits, failed)}``."""
    draw = draw_realization(cfg, r)
    users = range(cfg.scenario.k) if cfg.all_users else (0,)
    bits = cfg.blocks * cfg.d * cfg.constellation.bits_per_symbol
    out = {}
    em_rngs = draw.est_seed.spawn(len(cfg.snr_db) * cfg.scenario.k)
    for si, snr in enumerate(cfg.snr_db):
        sigma2 = 10.0 ** (-snr / 10.0)
        ch = draw.ch.with_sigma2(sigma2)
        y = draw.clean + np.sqrt(sigma2) * draw.noise
        for kind in cfg.detectors:
            err = tot = fails = 0
            for i in users:
                try:
                    chosen = _detect(cfg, kind, ch, draw.p, i, y[i], draw, em_rngs[si * cfg.scenario.k + i])
                except (EstimationError, NumericError, SearchSpaceError):
                    fails += 1
                    continue
                err += _score(cfg.constellation, cfg.d, chosen, draw.idx[i])
                tot += bits
            out[(snr, kind.value)] = (err, tot, fails)
    return out


def _run_chunk(args):
    cfg, rs = args
    return [(r, run_realization(cfg, r)) for r in rs]


def run_ber(cfg, workers=None, progress=None):
    """Run every realisation and aggregate a :class:`BerTable`.

    Realisations are split into contiguous chunks over ``workers`` processes.
    Tallies are integers combined in realisation order, so the table does not
    depend on the worker count.
    """
    workers = int(workers or cfg.workers)
    t0 = time.perf_counter()
    rs = list(range(cfg.realizations))
    if workers == 1:
        results = [(r, run_realization(cfg, r)) for r in rs]
    else:
        chunks = [(cfg, c.tolist()) for c in np.array_split(np.array(rs), min(workers * 4, len(rs))) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [x for part in ex.map(_run_chunk, chunks) for x in part]
    results.sort(key=lambda x: x[0])
    wall = time.perf_counter() - t0
    s = cfg.scenario
    rows = []
    for snr in cfg.snr_db:
        for kind in cfg.detectors:
            key = (snr, kind.value)
            per = np.array([res[key][0] for _, res in results if res[key][1] > 0], dtype=np.int64)
            bits = sum(res[key][1] for _, res in results)
            errs = int(per.sum())
            fails = sum(res[key][2] for _, res in results)
            ok = sum(1 for _, res in results if res[key][1] > 0)
            row = BerRow(
                snr, kind.value, s.k, s.l, cfg.d, ok, cfg.blocks, bits, errs,
                errs / bits if bits else float("nan"), None, wall, fails, per,
            )
            row.se = standard_error(row)
            rows.append(row)
    meta = cfg.as_flat()
    meta["workers_used"] = workers
    return BerTable(rows, meta)


# --------------------------------------------------------------------- output

def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_results(t):
    """CSV text: one ``#`` metadata comment line, the header, one row per (snr, detector)."""
    buf = io.StringIO()
    meta = {k: v for k, v in t.metadata.items() if k != "workers_used"}
    if meta:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in t.rows:
        w.writerow([_csv_value(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_results(t, path):
    text = format_results(t)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write results to {path}: {e.strerror}") from e
    return path


def read_results(path):
    """Parse a file written by :func:`write_results` back into a table."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            meta.update(json.loads(ln[1:].strip() or "{}"))
        elif ln.strip():
            body.append(ln)
    rd = csv.reader(body)
    header = next(rd, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ParameterError(f"{path}: unexpected header {header}")
    casts = (float, str, int, int, int, int, int, int, int, float)
    rows = [BerRow(*(c(x) for c, x in zip(casts, rec))) for rec in rd]
    return BerTable(rows, meta)


PLOT_STUB = '''"""Plot BER curves from {csv}."""
import csv

import matplotlib.pyplot as plt

curves = {{}}
with open({csv!r}) as fh:
    for row in csv.DictReader(ln for ln in fh if not ln.startswith("#")):
        curves.setdefault(row["detector"], []).append((float(row["snr_db"]), float(row["ber"])))
for name, pts in sorted(curves.items()):
    pts.sort()
    plt.semilogy([p[0] for p in pts], [max(p[1], 1e-7) for p in pts], marker="o", label=name)
plt.xlabel("SNR (dB)")
plt.ylabel("uncoded BER")
plt.grid(True, which="both", alpha=0.3)
plt.legend()
plt.savefig({png!r}, dpi=150)
'''


def emit_plot_script(csv_path, script_path):
    png = os.path.splitext(csv_path)[0] + ".png"
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write(PLOT_STUB.format(csv=csv_path, png=png))
    return script_path


__all__ = [
    "SimConfig", "BerRow", "BerTable", "run_ber", "run_realization", "write_results",
    "read_results", "format_results", "load_config", "load_config_text", "config_from_mapping",
    "standard_error", "paired_difference", "emit_plot_script", "CSV_COLUMNS", "realization_rng",
]
