"""Scalar functionals of log-concave measures and convex bodies.

Isotropic constants (sup-density and centroid-body definitions), Haar
averages of marginal densities at the origin, affine and dual affine
quermassintegrals, the volumetric parameter q_v, norm moments I_q and the
negative-moment parameter q_{-c}.  Everything raised to an n-th power is
accumulated in log-space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .geometry import (
    ConvexBody, EXACT_MAX_DIM, SANDWICH_MAX_DIM, ZqBody, project_body, section_body,
    volume_exact, volume_sandwich,
)
from .grassmann import Subspace, haar_frames
from .measures import Measure, NoDensity, covariance_estimate, marginal, marginal_density_at_zero
from .records import EstimateWithCI, make_rng, parallel_map, power_mean, seed_of

L_FLOOR = 0.05


class FradeliziViolation(ArithmeticError):
    pass


class OverflowGuard(ArithmeticError):
    pass


# ------------------------------------------------------- isotropic constants

def _cov_and_logdet(mu: Measure, rng, N: int):
    """Covariance (exact when declared) and stderr of log det."""
    if mu.covariance is not None:
        return mu.covariance, float(np.linalg.slogdet(mu.covariance)[1]), 0.0
    C, _ = covariance_estimate(mu, N, rng)
    X = mu.draw(rng, N)
    w, Q = np.linalg.eigh(C)
    Y = (X - X.mean(axis=0)) @ Q / np.sqrt(w)
    se = float(np.std((Y * Y).sum(axis=1), ddof=1) / math.sqrt(N))
    return C, float(np.sum(np.log(w))), se


def density_sup(mu: Measure, rng=None, N: int = 4000, starts: int = 5) -> dict:
    """Locate sup f_mu: best of N draws, the mean, then Nelder-Mead from the top starts.

    Returns log f at the sup and at the mean, and the argmax.
    """
    if not mu.has_density:
        raise NoDensity(f"{mu.name} has no closed-form density")
    rng = make_rng(rng)
    log_f0 = float(mu.logpdf(mu.mean[None, :])[0])
    if mu.uniform is not None and mu.density_const is not None:
        return {"log_sup": math.log(mu.density_const), "log_f0": log_f0, "argmax": mu.mean.copy()}
    X = np.vstack([mu.mean[None, :], mu.draw(rng, N)])
    lf = mu.logpdf(X)
    order = np.argsort(-lf)[:starts]
    best_x, best = X[order[0]], float(lf[order[0]])
    neg = lambda x: -float(mu.logpdf(x[None, :])[0])
    for i in order:
        res = optimize.minimize(neg, X[i], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000 * mu.dim})
        if -res.fun > best:
            best, best_x = -float(res.fun), res.x
    return {"log_sup": best, "log_f0": log_f0, "argmax": best_x}


def fradelizi_ratio(mu: Measure, rng=None) -> float:
    """sup f / f(barycenter); lies in [1, e^n] for centered log-concave mu."""
    s = density_sup(mu, rng)
    return math.exp(s["log_sup"] - s["log_f0"])


def isotropic_constant_density(mu: Measure, rng=None, N_cov: int = 100000) -> EstimateWithCI:
    """||f||_inf^(1/n) det(Cov)^(1/(2n)), with the Fradelizi bracket as a gate."""
    rng = make_rng(rng)
    n = mu.dim
    s = density_sup(mu, rng)
    log_ratio = s["log_sup"] - s["log_f0"]
    if log_ratio < -1e-9 or log_ratio > n + 1e-9:
        raise FradeliziViolation(f"sup f / f(0) = exp({log_ratio:.4g}) outside [1, e^{n}]")
    _, logdet, se_logdet = _cov_and_logdet(mu, rng, N_cov)
    value = math.exp(s["log_sup"] / n + logdet / (2 * n))
    return EstimateWithCI(value, value * se_logdet / (2 * n), N_cov if se_logdet else 0, seed_of(rng),
                          "sup-density", extra={"log_ratio_sup_f0": log_ratio, "log_sup": s["log_sup"]})


def isotropic_constant_volumetric(nu: Measure, N: int = 50000, rng=None, M: int = 2000) -> EstimateWithCI:
    """|Z_m(nu)|^(-1/m) from a volume bracket of the empirical Z_m body."""
    m = nu.dim
    if m > SANDWICH_MAX_DIM:
        raise ValueError(f"volumetric isotropic constant needs dimension <= {SANDWICH_MAX_DIM}, got {m}")
    rng = make_rng(rng)
    seed = seed_of(rng)
    Z = ZqBody(nu, m, N, rng)
    br = volume_sandwich(Z, M=M, rng=rng)
    rel = Z.volume_rel_stderr(np.eye(m)) if m > 1 else float(Z.stderr(np.eye(1))[0] / Z.support(np.eye(1))[0])
    value = br.mid ** (-1.0 / m)
    return EstimateWithCI(value, value * rel / m, N, seed, f"volumetric-{br.method}",
                          lower=br.upper ** (-1.0 / m), upper=br.lower ** (-1.0 / m) if br.lower > 0 else math.inf,
                          extra={"volume_lower": br.lower, "volume_upper": br.upper, "M": br.directions})


def marginal_L(mu: Measure, F: Subspace, method: str = "density", N: int = 20000, rng=None,
               M: int = 500) -> EstimateWithCI:
    """Isotropic constant of the marginal of mu on F.

    density: f_{pi_F mu}(0)^(1/k) det(Cov_F)^(1/(2k)); exact for symmetric mu
    (the marginal peaks at 0), otherwise a lower value with the Fradelizi
    factor e as upper bracket.  volumetric: |Z_k(pi_F mu)|^(-1/k).
    """
    k = F.k
    rng = make_rng(rng)
    if method == "volumetric":
        return isotropic_constant_volumetric(marginal(mu, F), N, rng, M)
    if method != "density":
        raise ValueError(f"unknown method {method!r}")
    if not mu.has_density:
        raise NoDensity(f"{mu.name} has no closed-form density; use the volumetric route")
    f0 = marginal_density_at_zero(mu, F, N, rng)
    if mu.covariance is not None:
        logdet = float(np.linalg.slogdet(F.frame.T @ mu.covariance @ F.frame)[1])
    else:
        C, _ = covariance_estimate(marginal(mu, F), N, rng)
        logdet = float(np.linalg.slogdet(C)[1])
    log_f0 = f0.extra.get("log_value", math.log(f0.value) if f0.value > 0 else -math.inf)
    value = math.exp(log_f0 / k + logdet / (2 * k))
    rel = f0.extra.get("rel_se", f0.stderr / f0.value if f0.value > 0 else 0.0)
    upper = value if mu.symmetric else value * math.e
    return EstimateWithCI(value, value * rel / k, f0.N, f0.seed, f"marginal-density/{f0.method}",
                          lower=value, upper=upper, extra={"log_f0": log_f0})


# --------------------------------------------------------- Haar averages

def _log_mean_power(logs: np.ndarray, power: float) -> tuple[float, float]:
    """log mean exp(power*logs) and the relative stderr of that mean."""
    a = power * np.asarray(logs, dtype=float)
    if not np.all(np.isfinite(a)):
        raise OverflowGuard("non-finite log term in Haar average")
    lm = float(logsumexp(a) - math.log(len(a)))
    w = np.exp(a - a.max())
    rel = float(w.std(ddof=1) / (math.sqrt(len(w)) * w.mean())) if len(w) > 1 else 0.0
    return lm, rel


def _haar_subspaces(n: int, k: int, N_F: int, rng) -> list[Subspace]:
    frames = haar_frames(n, k, N_F, rng)
    return [Subspace(n, k, fr) for fr in frames]


def a_k_average(mu: Measure, k: int, N_F: int = 200, N_x: int = 4000, rng=None,
                workers: int = 1) -> EstimateWithCI:
    """(int f_{pi_F mu}(0)^n dnu(F))^(1/(kn)) over Haar F."""
    n = mu.dim
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}")
    rng = make_rng(rng)
    seed = seed_of(rng)
    Fs = _haar_subspaces(n, k, N_F, rng)
    streams = rng.spawn(N_F)

    def one(i):
        est = marginal_density_at_zero(mu, Fs[i], N_x, streams[i])
        return est.extra.get("log_value", math.log(est.value)), est.extra.get("rel_se", 0.0)

    out = parallel_map(one, range(N_F), workers)
    logs = np.array([o[0] for o in out])
    inner = np.array([o[1] for o in out])
    lm, rel = _log_mean_power(logs, n)
    value = math.exp(lm / (k * n))
    return EstimateWithCI(value, value * rel / (k * n), N_F, seed, "haar-log-mean",
                          extra={"log_f0_min": float(logs.min()), "log_f0_max": float(logs.max()),
                                 "inner_rel_se_max": float(inner.max()), "N_x": N_x})


def _volume_of_projection(K: ConvexBody, F: Subspace, M: int, rng) -> tuple[float, float, float]:
    P = project_body(K, F)
    if P.exact and F.k <= EXACT_MAX_DIM:
        v = volume_exact(P)
        return v, v, v
    br = volume_sandwich(P, M=M, rng=rng)
    return br.mid, br.lower, br.upper


def affine_quermassintegral(K: ConvexBody, k: int, N_F: int = 500, rng=None, M: int = 200,
                            workers: int = 1) -> EstimateWithCI:
    """(int |P_F K|^(-n) dnu(F))^(-1/(kn)); brackets propagate when projections are bracketed."""
    n = K.dim
    if not 1 <= k <= min(n - 1, SANDWICH_MAX_DIM):
        raise ValueError(f"invalid k={k}")
    rng = make_rng(rng)
    seed = seed_of(rng)
    Fs = _haar_subspaces(n, k, N_F, rng)
    streams = rng.spawn(N_F)
    vols = np.array(parallel_map(lambda i: _volume_of_projection(K, Fs[i], M, streams[i]), range(N_F), workers))
    if np.any(vols[:, 1] <= 0):
        raise OverflowGuard("degenerate projection volume")
    lm, rel = _log_mean_power(np.log(vols[:, 0]), -n)
    value = math.exp(-lm / (k * n))
    lo = math.exp(-_log_mean_power(np.log(vols[:, 1]), -n)[0] / (k * n))
    hi = math.exp(-_log_mean_power(np.log(vols[:, 2]), -n)[0] / (k * n))
    return EstimateWithCI(value, value * rel / (k * n), N_F, seed, "haar-projection-volumes",
                          lower=lo, upper=hi)


def dual_affine_quermassintegral(K: ConvexBody, k: int, N_F: int = 500, rng=None,
                                 workers: int = 1) -> EstimateWithCI:
    """(int |K cap F^perp|^n dnu(F))^(1/(kn)) with exact sections of dimension n-k <= 3."""
    n = K.dim
    if not 1 <= k <= n - 1:
        raise ValueError(f"invalid k={k}")
    if n - k > EXACT_MAX_DIM:
        raise ValueError(f"section dimension {n - k} exceeds {EXACT_MAX_DIM}")
    rng = make_rng(rng)
    seed = seed_of(rng)
    Fs = _haar_subspaces(n, k, N_F, rng)
    vols = np.array(parallel_map(lambda F: volume_exact(section_body(K, F.complement())), Fs, workers))
    lm, rel = _log_mean_power(np.log(vols), n)
    value = math.exp(lm / (k * n))
    return EstimateWithCI(value, value * rel / (k * n), N_F, seed, "haar-section-volumes",
                          extra={"section_min": float(vols.min()), "section_max": float(vols.max())})


def l_moment_average(mu: Measure, k: int, N_F: int = 200, N_x: int = 4000, rng=None) -> EstimateWithCI:
    """(int L_{pi_F mu}^(kn) dnu(F))^(1/(kn)) with the density route for each marginal."""
    n = mu.dim
    rng = make_rng(rng)
    seed = seed_of(rng)
    Fs = _haar_subspaces(n, k, N_F, rng)
    streams = rng.spawn(N_F)
    logs = np.array([math.log(marginal_L(mu, F, "density", N_x, s).value) for F, s in zip(Fs, streams)])
    lm, rel = _log_mean_power(logs, k * n)
    value = math.exp(lm / (k * n))
    return EstimateWithCI(value, value * rel / (k * n), N_F, seed, "haar-L-moment")


# ------------------------------------------------------------ q_v profile

@dataclass
class QvResult:
    beta: float
    q_v: int
    n: int
    profile: list = field(default_factory=list)   # (q, VolumeBracket, radius_lower, radius_upper)
    target: list = field(default_factory=list)    # (q, (1/beta) sqrt(q/n) det^(1/2n))
    status: str = "ok"
    undecided: list = field(default_factory=list)
    granularity: str = "integer q"

    def rows(self) -> list[dict]:
        tgt = dict(self.target)
        return [{"q": q, "volume_lower": br.lower, "volume_upper": br.upper,
                 "radius_lower": lo, "radius_upper": hi, "target": tgt.get(q)}
                for q, br, lo, hi in self.profile]


def zq_volume_profile(mu: Measure, qs, N: int = 20000, M: int = 300, rng=None) -> list:
    """[(q, bracket of |Z_q|, lower and upper of |Z_q|^(1/n))] from one shared batch."""
    n = mu.dim
    if n > 6:
        raise ValueError("volumetric q profile limited to n <= 6")
    rng = make_rng(rng)
    batch_rng, dir_rng = rng.spawn(2)
    base = ZqBody(mu, 1.0, N, batch_rng)
    out = []
    for q in qs:
        Z = base.with_q(q)
        br = volume_sandwich(Z, M=M, rng=dir_rng.spawn(1)[0])
        rel = Z.volume_rel_stderr(np.vstack([np.eye(n), -np.eye(n)]))
        lo = (br.lower * (1 - 2 * rel)) ** (1 / n) if br.lower > 0 else 0.0
        hi = (br.upper * (1 + 2 * rel)) ** (1 / n)
        out.append((int(q), br, lo, hi))
    return out


def qv_from_profile(profile, beta: float, n: int, logdet: float = 0.0) -> QvResult:
    """Largest q whose lower radius end certifies |Z_q|^(1/n) >= (1/beta) sqrt(q/n) det^(1/2n)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    target = [(q, math.sqrt(q / n) * math.exp(logdet / (2 * n)) / beta) for q, *_ in profile]
    tg = dict(target)
    qv, undecided = 0, []
    for q, br, lo, hi in profile:
        if lo >= tg[q]:
            qv = max(qv, q)
        elif hi >= tg[q]:
            undecided.append(q)
    status = "indeterminate" if any(q > qv for q in undecided) else "ok"
    return QvResult(beta, qv, n, list(profile), target, status, undecided)


def qv_estimate(mu: Measure, beta: float, rng=None, N: int = 20000, M: int = 300) -> QvResult:
    n = mu.dim
    profile = zq_volume_profile(mu, range(1, n + 1), N, M, rng)
    logdet = float(np.linalg.slogdet(mu.covariance)[1]) if mu.covariance is not None else 0.0
    return qv_from_profile(profile, beta, n, logdet)


# -------------------------------------------------------------- norm moments

def _norm_guard(n: int, q: float):
    if q < -(n - 1) / 2:
        raise ValueError(f"q={q} below the guard -(n-1)/2 = {-(n - 1) / 2}")


def iq_moment(mu: Measure, q: float, N: int = 100000, rng=None) -> EstimateWithCI:
    """(E ||x||^q)^(1/q); q = 0 gives the geometric mean of ||x||."""
    _norm_guard(mu.dim, q)
    rng = make_rng(rng)
    seed = seed_of(rng)
    r = np.linalg.norm(mu.draw(rng, N), axis=1)
    v, se = power_mean(r, q)
    return EstimateWithCI(v, se, N, seed, f"norm-moment-q{q:g}")


def q_minus_c_estimate(mu: Measure, delta: float, N: int = 100000, rng=None, tol: float = 1e-3) -> EstimateWithCI:
    """Largest p in [0, (n-1)/2] with I_{-p} >= I_2 / delta.

    One shared batch (common random numbers) for every p.  ``value`` is the
    pessimistic p (I_{-p} - 2se >= (I_2 + 2se)/delta); ``upper`` the
    optimistic one.  Status is indeterminate when even p -> 0 is not
    certified while the optimistic side holds.
    """
    if delta <= 1:
        raise ValueError("delta must exceed 1")
    n = mu.dim
    cap = (n - 1) / 2
    rng = make_rng(rng)
    seed = seed_of(rng)
    r = np.linalg.norm(mu.draw(rng, N), axis=1)
    i2, se2 = power_mean(r, 2)

    def largest(pess: bool) -> float:
        thr = (i2 + 2 * se2) / delta if pess else (i2 - 2 * se2) / delta

        def ok(p):
            v, se = power_mean(r, -p) if p > 0 else power_mean(r, 0)
            return (v - 2 * se if pess else v + 2 * se) >= thr

        if ok(cap):
            return cap
        if not ok(0.0):
            return 0.0
        lo, hi = 0.0, cap
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        return lo

    p_pess, p_opt = largest(True), largest(False)
    status = "indeterminate" if p_pess == 0.0 and p_opt > 0.0 else "ok"
    return EstimateWithCI(p_pess, 0.0, N, seed, "bisection-crn", lower=p_pess, upper=p_opt,
                          status=status, extra={"I2": i2, "cap": cap})
