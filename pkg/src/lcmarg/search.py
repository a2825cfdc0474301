"""Randomized neighborhood search for subspaces with small marginal isotropic
constant, tail profiles of F -> L_{pi_F mu}, stability of projections under
rotation and the product-with-Gaussian sharpness example.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import isotropic_constant_density, marginal_L
from .geometry import (
    ConvexBody, ZqBody, geometric_distance_to_ball, project_body, radii, sphere_directions, volume_exact,
)
from .grassmann import (
    Subspace, ball_sample, diameter, distance, haar_frames, haar_sample, metric_d,
)
from .measures import Measure, builtin, product
from .records import EstimateWithCI, child_rng, digest_array, make_rng, parallel_map, seed_of, wilson_interval


@dataclass
class SearchConfig:
    epsilon: float
    metric: str = "d"
    beta: float = 1.0
    C: float = 10.0
    max_trials: int = 50
    L_method: str = "density"
    seed: int = 0
    best_of_budget: bool = False
    N: int = 20000          # draws per marginal estimate
    M: int = 500            # directions for volumetric brackets
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.metric not in ("d", "sigma_inf"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.C <= 0 or self.max_trials < 1:
            raise ValueError("C must be positive and max_trials >= 1")
        if self.L_method not in ("density", "volumetric"):
            raise ValueError(f"unknown L_method {self.L_method!r}")

    def threshold(self, n: int, k: int) -> float:
        return self.C * self.beta / self.epsilon ** (1 - k / n)


@dataclass
class SearchResult:
    accepted: Subspace | None
    L_estimate: EstimateWithCI | None
    distance: float | None
    trials: list = field(default_factory=list)
    threshold: float = math.inf
    config: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.accepted is not None

    def self_consistent(self) -> bool:
        """Acceptance constraints re-checked from the log alone."""
        if not self.found:
            return not any(t["accepted"] for t in self.trials) or self.config.get("best_of_budget", False)
        rec = next(t for t in self.trials if t["accepted"])
        return (rec["distance"] < self.config["epsilon"]
                and rec["L"] + 2 * rec["L_stderr"] < self.threshold)


def _trial(mu: Measure, E: Subspace, cfg: SearchConfig, index: int, thr: float) -> tuple[dict, Subspace, EstimateWithCI]:
    rng = child_rng(cfg.seed, index)
    s_F, s_L = rng.spawn(2)
    F = ball_sample(E, cfg.epsilon, cfg.metric, s_F)
    dist = distance(E, F, cfg.metric)
    L = marginal_L(mu, F, cfg.L_method, cfg.N, s_L, cfg.M)
    ok = dist < cfg.epsilon and L.value + 2 * L.stderr < thr
    rec = {"trial": index, "F_digest": digest_array(F.projector), "distance": dist, "L": L.value,
           "L_stderr": L.stderr, "L_method": L.method, "seed": seed_of(rng), "threshold": thr, "accepted": ok}
    return rec, F, L


def neighborhood_search(mu: Measure, E: Subspace, cfg: SearchConfig) -> SearchResult:
    """Sample F in the epsilon-ball around E until L_{pi_F mu} is certified below threshold.

    Trial i uses child stream i of ``cfg.seed``; trials run in waves of
    ``cfg.workers`` and the lowest accepted index wins, so the log does not
    depend on the worker count.  With ``best_of_budget`` all trials run and
    the smallest accepted L is returned.
    """
    if mu.dim != E.n:
        raise ValueError("measure and subspace dimensions differ")
    thr = cfg.threshold(E.n, E.k)
    log: list[dict] = []
    kept: dict[int, tuple] = {}
    wave = max(1, cfg.workers)
    stop = False
    for start in range(0, cfg.max_trials, wave):
        idx = list(range(start, min(start + wave, cfg.max_trials)))
        out = parallel_map(lambda i: _trial(mu, E, cfg, i, thr), idx, cfg.workers)
        for rec, F, L in out:
            log.append(rec)
            kept[rec["trial"]] = (F, L)
            if rec["accepted"] and not cfg.best_of_budget:
                stop = True
                break
        if stop:
            break
    accepted = [r for r in log if r["accepted"]]
    conf = asdict(cfg)
    if not accepted:
        return SearchResult(None, None, None, log, thr, conf)
    best = accepted[0] if not cfg.best_of_budget else min(accepted, key=lambda r: r["L"])
    if cfg.best_of_budget:
        for r in log:
            r["accepted"] = r is best
    F, L = kept[best["trial"]]
    return SearchResult(F, L, best["distance"], log, thr, conf)


# ------------------------------------------------------------ tail profile

@dataclass
class DeviationProfile:
    rows: list
    median: float
    L_values: np.ndarray
    slope: float
    k: int
    n: int

    def csv_rows(self) -> list[dict]:
        return [{key: r[key] for key in ("t", "tail_fraction", "ci_low", "ci_high", "N_F")} for r in self.rows]


def marginal_L_sample(mu: Measure, k: int, N_F: int, rng, L_method: str = "density", N_x: int = 4000,
                      workers: int = 1) -> np.ndarray:
    """L_{pi_F mu} for N_F Haar subspaces; F_i and its estimate use child stream i."""
    rng = make_rng(rng)
    frames = haar_frames(mu.dim, k, N_F, rng)
    streams = rng.spawn(N_F)
    return np.array(parallel_map(
        lambda i: marginal_L(mu, Subspace(mu.dim, k, frames[i]), L_method, N_x, streams[i]).value,
        range(N_F), workers))


def tail_slope(ts, tails, N_F: int) -> float:
    """Least-squares slope of log tail against log t over t > 1, tails floored at 1/(2 N_F)."""
    ts = np.asarray(ts, dtype=float)
    mask = ts > 1
    if mask.sum() < 2:
        return float("nan")
    y = np.log(np.maximum(np.asarray(tails, dtype=float)[mask], 0.5 / N_F))
    return float(np.polyfit(np.log(ts[mask]), y, 1)[0])


def deviation_profile(mu: Measure, k: int, t_grid, N_F: int, rng, L_method: str = "density",
                      N_x: int = 4000, workers: int = 1, L_values=None) -> DeviationProfile:
    """Fraction of Haar F with L_{pi_F mu} >= t * median, with Wilson intervals."""
    L = np.asarray(L_values) if L_values is not None else marginal_L_sample(mu, k, N_F, rng, L_method, N_x, workers)
    N_F = len(L)
    med = float(np.median(L))
    rows = []
    for t in sorted(float(x) for x in t_grid):
        hits = int(np.sum(L >= med * t))
        lo, hi = wilson_interval(hits, N_F)
        rows.append({"t": t, "tail_fraction": hits / N_F, "ci_low": lo, "ci_high": hi, "N_F": N_F})
    slope = tail_slope([r["t"] for r in rows], [r["tail_fraction"] for r in rows], N_F)
    return DeviationProfile(rows, med, L, slope, k, mu.dim)


# ------------------------------------------------------------- stability

def _pair(n: int, k: int, rng) -> tuple[Subspace, Subspace]:
    s1, s2, s3 = rng.spawn(3)
    E = haar_sample(n, k, s1)
    delta = float(s3.uniform(0.02, diameter("d")))
    return E, ball_sample(E, delta, "d", s2)


def polytope_surrogate(mu: Measure, q: float, N: int, M: int, rng) -> ConvexBody:
    """Symmetric polytope spanned by contact points of the empirical Z_q(mu)."""
    rng = make_rng(rng)
    Z = ZqBody(mu, q, N, rng)
    U = sphere_directions(mu.dim, M, rng)
    C = Z.contact(U)
    return ConvexBody(mu.dim, vertices=np.vstack([C, -C]), symmetric=True, label=f"poly {Z.label}")


def stability_check(target: Measure | ConvexBody, k: int, pair_count: int, rng, N: int = 20000,
                    M: int = 200, L_pairs: int = 0) -> dict:
    """Projection-volume sandwich |P_E K|^(1/k) <= (1 + t d(E,F)) |P_F K|^(1/k), t = R/r.

    A measure is replaced by a polytope surrogate of Z_k(mu); ``L_pairs``
    additionally checks L_{pi_E mu} / L_{pi_F mu} <= 1 + t d(E,F) with
    t = d_G(Z_k(mu), B) and two-stderr slack.
    """
    if k > 3:
        raise ValueError("exact projection volumes need k <= 3")
    rng = make_rng(rng)
    body_rng, pair_rng, l_rng = rng.spawn(3)
    mu = target if isinstance(target, Measure) else None
    K = polytope_surrogate(mu, k, N, M, body_rng) if mu is not None else target
    if not K.exact:
        raise ValueError("stability check needs an exact body")
    R, r = radii(K)
    t = R / r
    n = K.dim
    rows, worst = [], 0.0
    for s in pair_rng.spawn(pair_count):
        E, F = _pair(n, k, s)
        d = metric_d(E, F)
        vE = volume_exact(project_body(K, E)) ** (1 / k)
        vF = volume_exact(project_body(K, F)) ** (1 / k)
        for a, b in ((vE, vF), (vF, vE)):
            ratio = a / b
            bound = 1 + t * d
            worst = max(worst, ratio / bound)
            rows.append({"d": d, "ratio": ratio, "bound": bound, "ok": ratio <= bound * (1 + 1e-12)})
    report = {"n": n, "k": k, "t": t, "pairs": pair_count, "rows": rows,
              "violations": sum(not r_["ok"] for r_ in rows), "worst_ratio_to_bound": worst}
    if mu is not None and L_pairs:
        tZ = geometric_distance_to_ball(ZqBody(mu, k, N, body_rng.spawn(1)[0]), M=M, rng=l_rng)
        lrows = []
        for s in l_rng.spawn(L_pairs):
            sp, se_, sf = s.spawn(3)
            E, F = _pair(n, k, sp)
            d = metric_d(E, F)
            LE = marginal_L(mu, E, "density", N, se_)
            LF = marginal_L(mu, F, "density", N, sf)
            ratio = LE.value / LF.value
            slack = 2 * math.hypot(LE.stderr / LE.value, LF.stderr / LF.value)
            lrows.append({"d": d, "ratio": ratio, "bound": 1 + tZ * d, "ok": ratio <= (1 + tZ * d) * (1 + slack)})
        report.update({"L_t": tZ, "L_rows": lrows, "L_violations": sum(not r_["ok"] for r_ in lrows)})
    return report


# ------------------------------------------------------------- sharpness

def sharpness_demo(base: Measure, lam: float, n: int, rng, N_F: int = 50, N: int = 20000,
                   C: float = 1.0) -> dict:
    """nu = base x gamma_{n-m} with m = lam n: compares L_nu with L_base and scans L_{pi_F nu}."""
    m = base.dim
    if not 0 < lam < 1 or abs(lam * n - m) > 1e-9:
        raise ValueError(f"lambda*n must equal dim(base)={m}, got {lam}*{n}")
    rng = make_rng(rng)
    r_base, r_nu, r_coord, r_scan = rng.spawn(4)
    nu = product(base, builtin("gaussian", n - m))
    L_base = isotropic_constant_density(base, r_base)
    L_nu = isotropic_constant_density(nu, r_nu)
    coord = Subspace.coordinate(n, range(m))
    L_coord = marginal_L(nu, coord, "density", N, r_coord)
    lhs = (L_nu.value / math.e) ** (1 / lam)
    lhs_se = lhs * (L_nu.stderr / L_nu.value) / lam if L_nu.value else 0.0
    scan = marginal_L_sample(nu, m, N_F, r_scan, "density", N)
    shape = (C * L_nu.value) ** (1 / lam)
    return {
        "n": n, "m": m, "lambda": lam, "L_base": L_base, "L_nu": L_nu, "L_coordinate_marginal": L_coord,
        "lhs": lhs, "lhs_stderr": lhs_se,
        "inequality_ok": lhs <= L_base.value + 3 * math.hypot(L_base.stderr, lhs_se),
        "coordinate_matches_base": abs(L_coord.value - L_base.value) <= 3 * math.hypot(L_coord.stderr, L_base.stderr) + 1e-9,
        "scan_max": float(scan.max()), "scan_median": float(np.median(scan)), "shape": shape,
        "scan_max_over_shape": float(scan.max() / shape),
    }
