"""Experiment driver: ``lcmarg COMMAND [--config PATH] [flags]``.

Configuration is an INI file; every key can also be set with
``--override section.key=value`` (or ``key=value`` when the key name is
unique).  Each run writes ``results.csv``, ``log.jsonl`` and ``manifest.txt``
into the output directory.

Exit codes: 0 all suites pass, 1 some suite failed, 2 only indeterminate
outcomes, 3 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import __version__
from .estimators import (
    L_FLOOR, a_k_average, fradelizi_ratio, iq_moment, isotropic_constant_density,
    isotropic_constant_volumetric, marginal_L, qv_from_profile, zq_volume_profile,
)
from .geometry import ZqBody, sphere_directions
from .grassmann import (
    Subspace, ball_measure_estimate, haar_frames, haar_sample, metric_d, metric_d_bruteforce,
    sigma_inf, sigma_inf_many,
)
from .measures import (
    Measure, covariance_estimate, density_agreement_pvalue, is_log_concave_on_segments, marginal,
    parse_measure, product,
)
from .records import RunLog, child_rng
from .search import (
    SearchConfig, deviation_profile, neighborhood_search, sharpness_demo, stability_check,
)

COMMANDS = ("grassmann-diagnostics", "measure-diagnostics", "estimate", "verify-inequalities",
            "neighborhood-search", "deviation-profile", "stability-check", "sharpness-demo", "qv-profile")
NEEDS_MEASURE = set(COMMANDS) - {"grassmann-diagnostics"}

EXIT_OK, EXIT_FAIL, EXIT_INDETERMINATE, EXIT_CONFIG = 0, 1, 2, 3


# ------------------------------------------------------------------ schema

def _float_list(text: str) -> list[float]:
    return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return conv


def _measure(text: str) -> str:
    parse_measure(text)
    return text


# section -> key -> (converter, default); default None with required=True below
SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "run": {"command": (_choice(*COMMANDS), None), "seed": (int, 0), "workers": (int, 1),
            "out": (str, "lcmarg-out"), "suite": (str, "")},
    "measure": {"spec": (_measure, None)},
    "dims": {"n": (int, 4), "k": (int, 1), "lambda": (float, 0.5)},
    "budget": {"N": (int, 20000), "N_F": (int, 200), "N_x": (int, 4000), "M": (int, 500),
               "pairs": (int, 200), "max_trials": (int, 50), "brute_pairs": (int, 20)},
    "search": {"epsilon": (float, 0.3), "metric": (_choice("d", "sigma_inf"), "d"), "beta": (float, 1.0),
               "C": (float, 10.0), "L_method": (_choice("density", "volumetric"), "density"),
               "best_of_budget": (_bool, False), "t_grid": (_float_list, [1.25, 1.5, 2.0, 3.0]),
               "E": (_choice("coordinate", "haar"), "coordinate")},
    "qv": {"betas": (_float_list, [1.0, 2.0, 4.0])},
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = errors


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        sec, name = key.split(".")
        return self.values[sec][name]

    @property
    def command(self) -> str:
        return self["run.command"]

    def measure(self) -> Measure:
        return parse_measure(self["measure.spec"])

    def echo(self) -> str:
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                v = self.values[sec][key]
                if isinstance(v, list):
                    v = ", ".join(f"{x:g}" for x in v)
                lines.append(f"{key} = {'' if v is None else v}")
            lines.append("")
        return "\n".join(lines)


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    pos, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            pos[(section, "")] = i
        elif section and "=" in s and not s.startswith(("#", ";")):
            pos[(section, s.split("=", 1)[0].strip())] = i
    return pos


def load_config(text: str = "", overrides: list[str] | None = None, source: str = "<config>") -> RunConfig:
    """Parse, default and validate; all problems are collected into one ConfigError."""
    errors: list[str] = []
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    lines = _line_numbers(text)
    raw: dict[str, dict[str, tuple[str, str]]] = {sec: {} for sec in SCHEMA}
    for sec in parser.sections():
        where = f"{source}:{lines.get((sec, ''), '?')}"
        if sec not in SCHEMA:
            errors.append(f"{where}: unknown section [{sec}]")
            continue
        for key, val in parser.items(sec):
            if key not in SCHEMA[sec]:
                errors.append(f"{source}:{lines.get((sec, key), '?')}: unknown key {sec}.{key}")
            else:
                raw[sec][key] = (val, f"{source}:{lines.get((sec, key), '?')}")
    for ov in overrides or []:
        if "=" not in ov:
            errors.append(f"--override {ov!r}: expected key=value")
            continue
        key, val = (x.strip() for x in ov.split("=", 1))
        if "." in key:
            sec, name = key.split(".", 1)
        else:
            owners = [s for s in SCHEMA if key in SCHEMA[s]]
            if len(owners) != 1:
                errors.append(f"--override {key}: {'unknown' if not owners else 'ambiguous'} key")
                continue
            sec, name = owners[0], key
        if sec not in SCHEMA or name not in SCHEMA[sec]:
            errors.append(f"--override {key}: unknown key")
            continue
        raw[sec][name] = (val, f"--override {key}")
    values: dict[str, dict[str, Any]] = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (conv, default) in keys.items():
            if key in raw[sec]:
                val, where = raw[sec][key]
                try:
                    values[sec][key] = conv(val)
                except Exception as exc:  # noqa: BLE001 - converter messages are the diagnostics
                    errors.append(f"{where}: {sec}.{key}: {exc}")
                    values[sec][key] = default
            else:
                values[sec][key] = default
    if values["run"]["command"] is None and not any("run.command" in e for e in errors):
        errors.append(f"{source}: missing required field run.command")
    if (values["run"]["command"] is None or values["run"]["command"] in NEEDS_MEASURE) \
            and values["measure"]["spec"] is None \
            and not any("measure.spec" in e for e in errors):
        errors.append(f"{source}: missing required field measure.spec")
    if values["run"]["workers"] < 1:
        errors.append(f"{source}: run.workers must be >= 1")
    if errors:
        raise ConfigError(errors)
    return RunConfig(values)


# ------------------------------------------------------------------ outputs

@dataclass
class Suite:
    name: str
    status: str             # pass | fail | indeterminate
    statistic: float = math.nan
    detail: str = ""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, cfg: RunConfig, suites: list[Suite], wall: float) -> Path:
    path = out / "manifest.txt"
    buf = io.StringIO()
    buf.write(f"lcmarg {__version__}\n")
    buf.write(f"command: {cfg.command}\n")
    buf.write(f"wall_time_s: {wall:.3f}\n\n")
    buf.write("# config\n" + cfg.echo() + "\n")
    buf.write("# suites\n")
    for s in suites:
        buf.write(f"{s.name}: {s.status}\n")
    fails = sum(s.status == "fail" for s in suites)
    indet = sum(s.status == "indeterminate" for s in suites)
    buf.write(f"failures: {fails}\nindeterminate: {indet}\n\n# files\n")
    for f in sorted(out.iterdir()):
        if f.name != "manifest.txt" and f.is_file():
            buf.write(f"{f.name} sha256={_sha(f)}\n")
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def exit_code(suites: list[Suite]) -> int:
    if any(s.status == "fail" for s in suites):
        return EXIT_FAIL
    if any(s.status == "indeterminate" for s in suites):
        return EXIT_INDETERMINATE
    return EXIT_OK


SUITE_COLUMNS = ["suite", "status", "statistic", "detail"]


def _suite_rows(suites):
    return [{"suite": s.name, "status": s.status, "statistic": s.statistic, "detail": s.detail} for s in suites]


def _passfail(ok: bool) -> str:
    return "pass" if ok else "fail"


# ------------------------------------------------------------------ commands

def _stream(cfg: RunConfig, tag: int) -> np.random.Generator:
    return child_rng(cfg["run.seed"], tag)


def cmd_grassmann(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    n, k, pairs = cfg["dims.n"], cfg["dims.k"], cfg["budget.pairs"]
    rng = _stream(cfg, 0)
    A = haar_frames(n, k, pairs, rng)
    B = haar_frames(n, k, pairs, rng)
    C = haar_frames(n, k, pairs, rng)
    worst_tri, worst_lip, worst_sym = 0.0, 0.0, 0.0
    for a, b, c in zip(A, B, C):
        E, F, G = (Subspace(n, k, x) for x in (a, b, c))
        for dist in (sigma_inf, metric_d):
            ef, fg, eg = dist(E, F), dist(F, G), dist(E, G)
            worst_tri = max(worst_tri, eg - ef - fg)
            worst_sym = max(worst_sym, abs(ef - dist(F, E)), dist(E, E))
        s, d = sigma_inf(E, F), metric_d(E, F)
        worst_lip = max(worst_lip, s - d, d - math.sqrt(2) * s - 1e-9)
    suites = [
        Suite("metric_axioms", _passfail(worst_tri <= 1e-8 and worst_sym <= 1e-8), max(worst_tri, worst_sym)),
        Suite("lipschitz_equivalence", _passfail(worst_lip <= 0), worst_lip),
    ]
    if n <= 4:
        worst = 0.0
        for i in range(cfg["budget.brute_pairs"]):
            s = _stream(cfg, 100 + i)
            E, F = haar_sample(n, k, s), haar_sample(n, k, s)
            worst = max(worst, abs(metric_d(E, F) - metric_d_bruteforce(E, F, s)))
        suites.append(Suite("metric_d_vs_bruteforce", _passfail(worst <= 1e-6), worst))
    E0 = Subspace.coordinate(n, range(k))
    Q = stats.ortho_group.rvs(n, random_state=rng)
    s1 = sigma_inf_many(E0, haar_frames(n, k, 2000, rng))
    s2 = sigma_inf_many(E0, np.einsum("ij,mjk->mik", Q, haar_frames(n, k, 2000, rng)))
    p = float(stats.ks_2samp(s1, s2).pvalue)
    suites.append(Suite("haar_invariance", _passfail(p >= 0.01), p))
    deltas = np.linspace(0.3, 0.9, 7)
    vals = []
    for j, dlt in enumerate(deltas):
        est = ball_measure_estimate(E0, float(dlt), cfg["search.metric"], cfg["budget.N"], _stream(cfg, 50 + j))
        log.emit("ball_measure", {"n": n, "k": k, "delta": float(dlt), "metric": cfg["search.metric"]}, est)
        vals.append(est.value)
    vals = np.array(vals)
    if np.all(vals > 0):
        slope = float(np.polyfit(np.log(deltas), np.log(vals), 1)[0])
        target = k * (n - k)
        suites.append(Suite("ball_measure_slope", _passfail(abs(slope - target) <= 0.25 * target), slope,
                            f"target {target}"))
    else:
        suites.append(Suite("ball_measure_slope", "indeterminate", math.nan, "empty balls; raise budget.N"))
    return suites


def cmd_measure(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    N = cfg["budget.N"]
    C, se = covariance_estimate(mu, N, _stream(cfg, 0))
    ref = mu.covariance if mu.covariance is not None else np.eye(mu.dim)
    z = float(np.max(np.abs(C - ref) / np.maximum(se, 1e-300)))
    log.emit("covariance", {"measure": mu.name, "N": N}, {"max_z": z, "seed": cfg["run.seed"], "method": "empirical"})
    suites = [Suite("covariance", _passfail(z <= 5), z)]
    if mu.has_density:
        p = density_agreement_pvalue(mu, _stream(cfg, 1))
        suites.append(Suite("sampler_density_agreement", _passfail(p >= 0.01), p))
        suites.append(Suite("log_concave_segments", _passfail(is_log_concave_on_segments(mu, _stream(cfg, 2)))))
        r = fradelizi_ratio(mu, _stream(cfg, 3))
        suites.append(Suite("fradelizi_bracket", _passfail(1 - 1e-9 <= r <= math.e ** mu.dim), r))
    a, b = mu.draw(_stream(cfg, 4), 100), mu.draw(_stream(cfg, 4), 100)
    suites.append(Suite("reproducible_batches", _passfail(np.array_equal(a, b))))
    return suites


def _marginal_subspace(cfg: RunConfig, n: int, k: int, tag: int) -> Subspace:
    if cfg["search.E"] == "haar":
        return haar_sample(n, k, _stream(cfg, tag))
    return Subspace.coordinate(n, range(k))


def cmd_estimate(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    n, k = mu.dim, cfg["dims.k"]
    rows, suites = [], []

    def record(quantity, est):
        log.emit(quantity, {"measure": mu.name, "k": k}, est)
        rows.append({"quantity": quantity, "value": est.value, "stderr": est.stderr, "lower": est.lower,
                     "upper": est.upper, "N": est.N, "seed": est.seed, "method": est.method})
        return est

    ests = []
    if mu.has_density:
        ests.append(record("L_density", isotropic_constant_density(mu, _stream(cfg, 0))))
    if n <= 4:
        ests.append(record("L_volumetric", isotropic_constant_volumetric(mu, cfg["budget.N"], _stream(cfg, 1),
                                                                          cfg["budget.M"])))
    if 1 <= k < n:
        F = _marginal_subspace(cfg, n, k, 2)
        method = "density" if mu.has_density else "volumetric"
        ests.append(record(f"marginal_L_{method}", marginal_L(mu, F, method, cfg["budget.N"], _stream(cfg, 3),
                                                               cfg["budget.M"])))
        if mu.has_density:
            record("A_k", a_k_average(mu, k, cfg["budget.N_F"], cfg["budget.N_x"], _stream(cfg, 4),
                                      cfg["run.workers"]))
    for q in (-1.0, 1.0, 2.0):
        if q >= -(n - 1) / 2:
            record(f"I_{q:g}", iq_moment(mu, q, cfg["budget.N"], _stream(cfg, 10)))
    write_csv(out / "results.csv", ["quantity", "value", "stderr", "lower", "upper", "N", "seed", "method"], rows)
    floor = min(e.value for e in ests)
    suites.append(Suite("L_floor", _passfail(floor > L_FLOOR), floor))
    return suites


def cmd_verify(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    """Identities and inequalities that hold for every isotropic log-concave input."""
    mu = cfg.measure()
    n, N = mu.dim, cfg["budget.N"]
    suites = []
    dirs = sphere_directions(n, 20, _stream(cfg, 0), extras=False)
    Z = {q: ZqBody(mu, q, N, _stream(cfg, 1)) for q in (1, 2, 4)}   # shared batch across q
    h2, se2 = Z[2].support(dirs), Z[2].stderr(dirs)
    z = float(np.max(np.abs(h2 - 1) / se2))
    suites.append(Suite("z2_unit_ball", _passfail(z <= 3 + 1.0), z, "max |h-1|/se over 20 directions"))
    mono = all(np.all(Z[p].support(dirs) <= Z[q].support(dirs) * (1 + 3 * Z[q].stderr(dirs) / Z[q].support(dirs)))
               for p, q in ((1, 2), (2, 4)))
    suites.append(Suite("zq_monotone_in_q", _passfail(mono)))
    if mu.has_density:
        r = fradelizi_ratio(mu, _stream(cfg, 2))
        suites.append(Suite("fradelizi_bracket", _passfail(1 - 1e-9 <= r <= math.e ** n), r))
        L = isotropic_constant_density(mu, _stream(cfg, 3))
        log.emit("L_density", {"measure": mu.name}, L)
        suites.append(Suite("L_floor", _passfail(L.value > L_FLOOR), L.value))
    k = min(cfg["dims.k"], n - 1)
    if k >= 1:
        F = haar_sample(n, k, _stream(cfg, 4))
        Zm = ZqBody(marginal(mu, F), 2, N, _stream(cfg, 5))
        ys = sphere_directions(k, 10, _stream(cfg, 6), extras=False)
        a = Z[2].support(ys @ F.frame.T)
        b = Zm.support(ys)
        pooled = np.hypot(Z[2].stderr(ys @ F.frame.T), Zm.stderr(ys))
        bad = int(np.sum(np.abs(a - b) > 3 * pooled))
        suites.append(Suite("projection_identity", _passfail(bad <= 1), bad, "directions outside 3 pooled se"))
    gam = parse_measure("gaussian(2)")
    prod_mu = product(mu, gam)
    Zp = ZqBody(prod_mu, 2, N, _stream(cfg, 7))
    Zg = ZqBody(gam, 2, N, _stream(cfg, 8))
    bad = 0
    for x, y in zip(sphere_directions(n, 10, _stream(cfg, 9), extras=False),
                    sphere_directions(2, 10, _stream(cfg, 10), extras=False)):
        hx, hy = Z[2].support(x), Zg.support(y)
        hp = Zp.support(np.concatenate([x, y]))
        slack = 3 * (Z[2].stderr(x[None])[0] + Zg.stderr(y[None])[0] + Zp.stderr(np.concatenate([x, y])[None])[0])
        bad += not (max(hx, hy) <= hp + slack and hp <= hx + hy + slack and hx + hy <= 2 * hp + slack)
    suites.append(Suite("product_sandwich", _passfail(bad == 0), bad))
    i1 = iq_moment(mu, 1, N, _stream(cfg, 11))
    i2 = iq_moment(mu, 2, N, _stream(cfg, 11))
    suites.append(Suite("iq_monotone", _passfail(i1.value <= i2.value * (1 + 3 * i2.stderr / i2.value))))
    rows = _suite_rows(suites)
    write_csv(out / "results.csv", SUITE_COLUMNS, rows)
    return suites


def cmd_search(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    n, k = mu.dim, cfg["dims.k"]
    E = _marginal_subspace(cfg, n, k, 0)
    sc = SearchConfig(cfg["search.epsilon"], cfg["search.metric"], cfg["search.beta"], cfg["search.C"],
                      cfg["budget.max_trials"], cfg["search.L_method"], cfg["run.seed"],
                      cfg["search.best_of_budget"], cfg["budget.N"], cfg["budget.M"], cfg["run.workers"])
    res = neighborhood_search(mu, E, sc)
    for rec in res.trials:
        log.emit("search_trial", {"measure": mu.name, "k": k, "epsilon": sc.epsilon, "trial": rec["trial"]},
                 {**rec, "method": rec["L_method"]})
    cols = ["trial", "F_digest", "distance", "L", "L_stderr", "threshold", "accepted"]
    write_csv(out / "results.csv", cols, res.trials)
    (out / "accepted_subspace.txt").write_text(res.accepted.to_text() + "\n" if res.found else "none\n",
                                               encoding="utf-8")
    return [Suite("found", "pass" if res.found else "indeterminate", len(res.trials),
                  res.trials[-1]["F_digest"] if res.found else "max_trials exhausted"),
            Suite("self_consistent", _passfail(res.self_consistent()))]


def cmd_deviation(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    k = cfg["dims.k"]
    prof = deviation_profile(mu, k, cfg["search.t_grid"], cfg["budget.N_F"], _stream(cfg, 0),
                             cfg["search.L_method"], cfg["budget.N_x"], cfg["run.workers"])
    for r in prof.rows:
        log.emit("deviation_tail", {"measure": mu.name, "k": k, "t": r["t"]},
                 {**r, "seed": str(cfg["run.seed"]), "method": "haar-median-normalized", "median": prof.median})
    write_csv(out / "results.csv", ["t", "tail_fraction", "ci_low", "ci_high", "N_F"], prof.csv_rows())
    tails = [r["tail_fraction"] for r in prof.rows]
    return [Suite("tail_monotone", _passfail(all(a >= b for a, b in zip(tails, tails[1:])))),
            Suite("tail_slope", "pass", prof.slope, "log-log slope over t > 1 (logged)")]


def cmd_stability(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    k = cfg["dims.k"]
    rep = stability_check(mu, k, cfg["budget.pairs"], _stream(cfg, 0), cfg["budget.N"], cfg["budget.M"],
                          L_pairs=min(10, cfg["budget.pairs"]) if mu.has_density else 0)
    log.emit("stability", {"measure": mu.name, "k": k},
             {"seed": str(cfg["run.seed"]), "method": "polytope-surrogate", "t": rep["t"],
              "violations": rep["violations"], "worst": rep["worst_ratio_to_bound"]})
    for i, r in enumerate(rep["rows"]):
        log.emit("stability_pair", {"measure": mu.name, "k": k, "pair": i},
                 {**r, "seed": f"{cfg['run.seed']}/0", "method": "exact-projected-hull-of-surrogate"})
    write_csv(out / "results.csv", ["d", "ratio", "bound", "ok"], rep["rows"])
    suites = [Suite("projection_sandwich", _passfail(rep["violations"] == 0), rep["worst_ratio_to_bound"])]
    if "L_rows" in rep:
        suites.append(Suite("L_ratio", _passfail(rep["L_violations"] == 0), rep["L_violations"]))
    return suites


def cmd_sharpness(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    base = cfg.measure()
    lam = cfg["dims.lambda"]
    n = int(round(base.dim / lam))
    rep = sharpness_demo(base, lam, n, _stream(cfg, 0), cfg["budget.N_F"], cfg["budget.N"], cfg["search.C"])
    rows = []
    for key in ("L_base", "L_nu", "L_coordinate_marginal"):
        est = rep[key]
        log.emit(key, {"base": base.name, "lambda": lam, "n": n}, est)
        rows.append({"quantity": key, "value": est.value, "stderr": est.stderr})
    for key in ("lhs", "scan_max", "scan_median", "shape", "scan_max_over_shape"):
        rows.append({"quantity": key, "value": rep[key], "stderr": rep.get(key + "_stderr", 0.0)})
    log.emit("sharpness_scan", {"base": base.name, "lambda": lam, "n": n},
             {"seed": str(cfg["run.seed"]), "method": "haar-scan", **{k_: rep[k_] for k_ in
                                                                     ("scan_max", "scan_median", "shape")}})
    write_csv(out / "results.csv", ["quantity", "value", "stderr"], rows)
    return [Suite("power_inequality", _passfail(rep["inequality_ok"]), rep["lhs"]),
            Suite("coordinate_marginal", _passfail(rep["coordinate_matches_base"]), rep["L_coordinate_marginal"].value)]


def cmd_qv(cfg: RunConfig, log: RunLog, out: Path) -> list[Suite]:
    mu = cfg.measure()
    n = mu.dim
    prof = zq_volume_profile(mu, range(1, n + 1), cfg["budget.N"], cfg["budget.M"], _stream(cfg, 0))
    rows, qvs, status = [], [], []
    for beta in sorted(cfg["qv.betas"]):
        res = qv_from_profile(prof, beta, n)
        log.emit("qv", {"measure": mu.name, "beta": beta},
                 {"q_v": res.q_v, "status": res.status, "seed": str(cfg["run.seed"]), "method": "integer-q-scan"})
        qvs.append(res.q_v)
        status.append(res.status)
        for r in res.rows():
            rows.append({"beta": beta, **r, "q_v": res.q_v, "status": res.status})
            log.emit("qv_profile_row", {"measure": mu.name, "beta": beta, "q": r["q"]},
                     {**r, "seed": f"{cfg['run.seed']}/0", "method": "volume-sandwich"})
    write_csv(out / "results.csv", ["beta", "q", "volume_lower", "volume_upper", "radius_lower", "radius_upper",
                                    "target", "q_v", "status"], rows)
    mono = all(a <= b for a, b in zip(qvs, qvs[1:]))
    return [Suite("qv_monotone_in_beta", _passfail(mono)),
            Suite("qv_decided", "indeterminate" if "indeterminate" in status else "pass")]


HANDLERS = {
    "grassmann-diagnostics": cmd_grassmann, "measure-diagnostics": cmd_measure, "estimate": cmd_estimate,
    "verify-inequalities": cmd_verify, "neighborhood-search": cmd_search, "deviation-profile": cmd_deviation,
    "stability-check": cmd_stability, "sharpness-demo": cmd_sharpness, "qv-profile": cmd_qv,
}


def run(cfg: RunConfig) -> tuple[int, Path]:
    out = Path(cfg["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    for name in ("results.csv", "log.jsonl", "suites.csv", "accepted_subspace.txt"):
        (out / name).unlink(missing_ok=True)
    log = RunLog(out / "log.jsonl")
    t0 = time.perf_counter()
    suites = HANDLERS[cfg.command](cfg, log, out)
    if cfg["run.suite"]:
        suites = [s for s in suites if s.name == cfg["run.suite"]]
    for s in suites:
        log.emit("suite", {"command": cfg.command, "suite": s.name},
                 {"value": s.statistic, "status": s.status, "detail": s.detail, "seed": str(cfg["run.seed"]),
                  "method": f"{cfg.command}/{s.name}"})
    write_csv(out / "suites.csv", SUITE_COLUMNS, _suite_rows(suites))
    write_manifest(out, cfg, suites, time.perf_counter() - t0)
    return exit_code(suites), out


# ------------------------------------------------------------------ entry

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lcmarg", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS + ("validate",),
                   help="subcommand (defaults to run.command from the config)")
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--seed", type=int, help="root seed (run.seed)")
    p.add_argument("--workers", type=int, help="worker threads (run.workers)")
    p.add_argument("--out", help="output directory (run.out)")
    p.add_argument("--suite", help="report only this suite")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config key; repeatable")
    p.add_argument("--version", action="version", version=f"lcmarg {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    text, source = "", "<empty>"
    if args.config is not None:
        try:
            text, source = args.config.read_text(encoding="utf-8"), str(args.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    overrides = list(args.override)
    if args.command and args.command != "validate":
        overrides.insert(0, f"run.command={args.command}")
    for flag, key in (("seed", "run.seed"), ("workers", "run.workers"), ("out", "run.out"), ("suite", "run.suite")):
        if getattr(args, flag) is not None:
            overrides.append(f"{key}={getattr(args, flag)}")
    try:
        cfg = load_config(text, overrides, source)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(cfg.echo())
        return EXIT_OK
    code, out = run(cfg)
    for line in (out / "suites.csv").read_text(encoding="utf-8").splitlines()[1:]:
        print(line)
    print(f"manifest: {out / 'manifest.txt'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
