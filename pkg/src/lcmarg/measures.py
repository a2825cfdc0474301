"""Log-concave measures: built-in isotropic zoo, products, Gaussian smoothing,
marginals, pushforwards, covariance estimation and isotropization.

A :class:`Measure` is immutable.  Densities are exposed as vectorized log
densities ``(m, dim) -> (m,)`` returning ``-inf`` off the support.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product as iproduct
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .grassmann import Subspace
from .records import EstimateWithCI, make_rng, seed_of


class NoDensity(ValueError):
    pass


class DegenerateCovariance(ValueError):
    pass


BUILTINS = ("gaussian", "cube", "lp_ball", "simplex", "laplace_product")
_TAIL_ORDER = {"compact": 0, "gaussian": 1, "exponential": 2}


@dataclass(frozen=True, eq=False)
class UniformSupport:
    """Exact support of a uniform measure: a polytope or a centered ball."""

    kind: str  # "polytope" | "ball"
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    vertices: np.ndarray | None = None
    radius: float | None = None
    center: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class Measure:
    dim: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    log_density: Callable[[np.ndarray], np.ndarray] | None
    covariance: np.ndarray | None
    mean: np.ndarray
    centered: bool
    symmetric: bool
    descriptor: dict
    tails: str = "compact"
    uniform: UniformSupport | None = None
    density_const: float | None = None
    factors: tuple | None = None  # 1-d factors when the measure is a product of them
    info: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return describe(self)

    @property
    def has_density(self) -> bool:
        return self.log_density is not None

    def draw(self, rng, N: int) -> np.ndarray:
        X = self.sampler(make_rng(rng), int(N))
        return np.asarray(X, dtype=float).reshape(int(N), self.dim)

    def sample(self, N: int, seed: int) -> "SampleBatch":
        return SampleBatch(self.draw(make_rng(seed), N), seed, int(N))

    def density(self, x) -> np.ndarray:
        if self.log_density is None:
            raise NoDensity(f"{self.name} has no closed-form density")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(self.log_density(x))

    def logpdf(self, x) -> np.ndarray:
        if self.log_density is None:
            raise NoDensity(f"{self.name} has no closed-form density")
        return self.log_density(np.atleast_2d(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    seed: int
    N: int


# ---------------------------------------------------------------- built-ins

def _const_logpdf(A, b, logc):
    def logpdf(x):
        inside = np.all(x @ A.T <= b + 1e-12, axis=1)
        return np.where(inside, logc, -np.inf)
    return logpdf


def _cube_support(n, a):
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.full(2 * n, a)
    V = None
    if n <= 12:
        V = a * np.array(list(iproduct((-1.0, 1.0), repeat=n)))
    return UniformSupport("polytope", A, b, V)


def _gaussian(n):
    def sampler(rng, N):
        return rng.standard_normal((N, n))

    def logpdf(x):
        return -0.5 * np.sum(x * x, axis=1) - 0.5 * n * math.log(2 * math.pi)

    return Measure(n, sampler, logpdf, np.eye(n), np.zeros(n), True, True,
                   {"name": "gaussian", "params": [n], "children": []}, tails="gaussian",
                   factors=None if n == 1 else tuple(_gaussian(1) for _ in range(n)))


def cube_halfwidth() -> float:
    # uniform on [-a, a] has variance a^2 / 3
    return math.sqrt(3.0)


def _cube(n, label="cube"):
    a = cube_halfwidth()
    logc = -n * math.log(2 * a)
    sup = _cube_support(n, a)

    def sampler(rng, N):
        return rng.uniform(-a, a, size=(N, n))

    params = [n] if label == "cube" else ["inf", n]
    return Measure(n, sampler, _const_logpdf(sup.A, sup.b, logc), np.eye(n), np.zeros(n), True, True,
                   {"name": label, "params": params, "children": []}, uniform=sup,
                   density_const=math.exp(logc),
                   factors=None if n == 1 else tuple(_cube(1) for _ in range(n)))


def ball_radius_isotropic(n: int) -> float:
    # E x_1^2 = R^2 / (n + 2) for the uniform ball of radius R
    return math.sqrt(n + 2.0)


def cross_polytope_radius_isotropic(n: int) -> float:
    # E x_1^2 = 2 R^2 / ((n + 1)(n + 2)) for the uniform l1 ball of radius R
    return math.sqrt((n + 1.0) * (n + 2.0) / 2.0)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _l2_ball(n):
    R = ball_radius_isotropic(n)
    logc = -math.log(unit_ball_volume(n)) - n * math.log(R)

    def sampler(rng, N):
        g = rng.standard_normal((N, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * (R * rng.uniform(size=(N, 1)) ** (1.0 / n))

    def logpdf(x):
        return np.where(np.sum(x * x, axis=1) <= R * R * (1 + 1e-12), logc, -np.inf)

    return Measure(n, sampler, logpdf, np.eye(n), np.zeros(n), True, True,
                   {"name": "lp_ball", "params": [2, n], "children": []},
                   uniform=UniformSupport("ball", radius=R, center=np.zeros(n)),
                   density_const=math.exp(logc))


def _l1_ball(n):
    R = cross_polytope_radius_isotropic(n)
    logc = math.lgamma(n + 1) - n * math.log(2 * R)
    A = np.array(list(iproduct((-1.0, 1.0), repeat=n))) if n <= 12 else None
    b = np.full(len(A), R) if A is not None else None
    V = R * np.vstack([np.eye(n), -np.eye(n)])

    def sampler(rng, N):
        e = rng.exponential(size=(N, n + 1))
        s = rng.choice((-1.0, 1.0), size=(N, n))
        return R * s * e[:, :n] / e.sum(axis=1, keepdims=True)

    def logpdf(x):
        return np.where(np.sum(np.abs(x), axis=1) <= R * (1 + 1e-12), logc, -np.inf)

    return Measure(n, sampler, logpdf, np.eye(n), np.zeros(n), True, True,
                   {"name": "lp_ball", "params": [1, n], "children": []},
                   uniform=UniformSupport("polytope", A, b, V), density_const=math.exp(logc))


def simplex_moments(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the uniform measure on {x >= 0, sum x <= 1}."""
    mean = np.full(n, 1.0 / (n + 1))
    off = -1.0 / ((n + 1) ** 2 * (n + 2))
    diag = n / ((n + 1) ** 2 * (n + 2))
    cov = np.full((n, n), off) + np.eye(n) * (diag - off)
    return mean, cov


def _simplex(n):
    m, C = simplex_moments(n)
    w, Q = np.linalg.eigh(C)
    T = Q @ np.diag(w ** -0.5) @ Q.T          # whitening map
    Tinv = Q @ np.diag(w ** 0.5) @ Q.T
    # standard simplex: -x_i <= 0, sum x <= 1; in y = T(x - m) coordinates
    A0 = np.vstack([-np.eye(n), np.ones((1, n))])
    b0 = np.concatenate([np.zeros(n), [1.0]])
    A = A0 @ Tinv
    b = b0 - A0 @ m
    V0 = np.vstack([np.zeros((1, n)), np.eye(n)])
    V = (V0 - m) @ T.T
    logc = math.lgamma(n + 1) + 0.5 * float(np.sum(np.log(w)))

    def sampler(rng, N):
        e = rng.exponential(size=(N, n + 1))
        x = e[:, :n] / e.sum(axis=1, keepdims=True)
        return (x - m) @ T.T

    return Measure(n, sampler, _const_logpdf(A, b, logc), np.eye(n), np.zeros(n), True, n == 1,
                   {"name": "simplex", "params": [n], "children": []},
                   uniform=UniformSupport("polytope", A, b, V), density_const=math.exp(logc))


def _laplace(n):
    b = 1.0 / math.sqrt(2.0)  # variance 2 b^2 = 1

    def sampler(rng, N):
        return rng.laplace(0.0, b, size=(N, n))

    def logpdf(x):
        return -np.sum(np.abs(x), axis=1) / b - n * math.log(2 * b)

    return Measure(n, sampler, logpdf, np.eye(n), np.zeros(n), True, True,
                   {"name": "laplace_product", "params": [n], "children": []}, tails="exponential",
                   factors=None if n == 1 else tuple(_laplace(1) for _ in range(n)))


@lru_cache(maxsize=None)
def _builtin_cached(name, p, n):
    if name == "gaussian":
        return _gaussian(n)
    if name == "cube":
        return _cube(n)
    if name == "simplex":
        return _simplex(n)
    if name == "laplace_product":
        return _laplace(n)
    if name == "lp_ball":
        if p == 1:
            return _l1_ball(n)
        if p == 2:
            return _l2_ball(n)
        return _cube(n, label="lp_ball")
    raise ValueError(name)


def builtin(name: str, n: int, p=None) -> Measure:
    """Centered isotropic built-in measure on R^n.

    ``lp_ball`` takes ``p`` in {1, 2, inf}; the name may also be given as
    ``"lp_ball(1)"``.
    """
    if name.startswith("lp_ball(") and name.endswith(")"):
        p = name[len("lp_ball("):-1]
        name = "lp_ball"
    if name not in BUILTINS:
        raise ValueError(f"unknown measure {name!r}; expected one of {BUILTINS}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    if name == "lp_ball":
        if p in (1, "1"):
            p = 1
        elif p in (2, "2"):
            p = 2
        elif p in (math.inf, "inf", "oo"):
            p = "inf"
        else:
            raise ValueError(f"lp_ball needs p in {{1, 2, inf}}, got {p!r}")
    else:
        p = None
    return _builtin_cached(name, p, int(n))


# ---------------------------------------------------------- constructions

def product(mu: Measure, nu: Measure) -> Measure:
    if not (mu.centered and nu.centered):
        raise ValueError("product needs centered factors")
    d1, d2 = mu.dim, nu.dim

    def sampler(rng, N):
        return np.hstack([mu.draw(rng, N), nu.draw(rng, N)])

    logpdf = None
    if mu.has_density and nu.has_density:
        def logpdf(x):
            return mu.log_density(x[:, :d1]) + nu.log_density(x[:, d1:])

    cov = None
    if mu.covariance is not None and nu.covariance is not None:
        cov = np.zeros((d1 + d2, d1 + d2))
        cov[:d1, :d1] = mu.covariance
        cov[d1:, d1:] = nu.covariance

    uni = None
    dconst = None
    if mu.uniform is not None and nu.uniform is not None and \
            mu.uniform.kind == nu.uniform.kind == "polytope" and mu.uniform.A is not None and nu.uniform.A is not None:
        A = np.zeros((len(mu.uniform.A) + len(nu.uniform.A), d1 + d2))
        A[:len(mu.uniform.A), :d1] = mu.uniform.A
        A[len(mu.uniform.A):, d1:] = nu.uniform.A
        b = np.concatenate([mu.uniform.b, nu.uniform.b])
        V = None
        if mu.uniform.vertices is not None and nu.uniform.vertices is not None and \
                len(mu.uniform.vertices) * len(nu.uniform.vertices) <= 5000:
            V = np.array([np.concatenate([u, v]) for u in mu.uniform.vertices for v in nu.uniform.vertices])
        uni = UniformSupport("polytope", A, b, V)
        dconst = mu.density_const * nu.density_const

    fac = None
    fm = mu.factors if mu.factors is not None else ((mu,) if mu.dim == 1 else None)
    fn = nu.factors if nu.factors is not None else ((nu,) if nu.dim == 1 else None)
    if fm is not None and fn is not None:
        fac = tuple(fm) + tuple(fn)

    tails = max(mu.tails, nu.tails, key=_TAIL_ORDER.__getitem__)
    return Measure(d1 + d2, sampler, logpdf, cov, np.concatenate([mu.mean, nu.mean]), True,
                   mu.symmetric and nu.symmetric,
                   {"name": "product", "params": [], "children": [mu.descriptor, nu.descriptor]},
                   tails=tails, uniform=uni, density_const=dconst, factors=fac)


def pushforward(mu: Measure, A, shift=None, tag: str = "linear") -> Measure:
    """Law of ``A x + shift`` for x ~ mu (A square, invertible)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = mu.dim
    if A.shape != (n, n):
        raise ValueError(f"map must be {n}x{n}")
    b = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    sign, logdet = np.linalg.slogdet(A)
    if sign == 0:
        raise DegenerateCovariance("singular linear map")
    Ainv = np.linalg.inv(A)

    def sampler(rng, N):
        return mu.draw(rng, N) @ A.T + b

    logpdf = None
    if mu.has_density:
        def logpdf(y):
            return mu.log_density((y - b) @ Ainv.T) - logdet

    cov = None if mu.covariance is None else A @ mu.covariance @ A.T
    mean = A @ mu.mean + b
    uni = None
    dconst = None
    if mu.uniform is not None and mu.uniform.kind == "polytope":
        u = mu.uniform
        Anew = None if u.A is None else u.A @ Ainv
        bnew = None if u.A is None else u.b + Anew @ b
        V = None if u.vertices is None else u.vertices @ A.T + b
        uni = UniformSupport("polytope", Anew, bnew, V)
        dconst = mu.density_const * math.exp(-logdet)
    return Measure(n, sampler, logpdf, cov, mean, bool(np.allclose(mean, 0.0, atol=1e-12)), mu.symmetric,
                   {"name": "pushforward", "params": [tag, _digest(A), _digest(b)], "children": [mu.descriptor]},
                   tails=mu.tails, uniform=uni, density_const=dconst,
                   info={"map": A, "shift": b})


def convolution(mu: Measure, nu: Measure) -> Measure:
    """Law of x + y for independent x ~ mu, y ~ nu; sampled only (no closed-form density)."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimensions differ: {mu.dim} vs {nu.dim}")

    def sampler(rng, N):
        r1, r2 = make_rng(rng).spawn(2)
        return mu.draw(r1, N) + nu.draw(r2, N)

    cov = None if mu.covariance is None or nu.covariance is None else mu.covariance + nu.covariance
    mean = mu.mean + nu.mean
    tails = max(mu.tails, nu.tails, key=_TAIL_ORDER.__getitem__)
    return Measure(mu.dim, sampler, None, cov, mean, bool(np.allclose(mean, 0.0, atol=1e-12)),
                   mu.symmetric and nu.symmetric,
                   {"name": "convolution", "params": [], "children": [mu.descriptor, nu.descriptor]}, tails=tails)


def scaled(mu: Measure, lam: float) -> Measure:
    m = pushforward(mu, lam * np.eye(mu.dim), tag=f"scale:{lam!r}")
    return replace(m, descriptor={"name": "scaled", "params": [float(lam)], "children": [mu.descriptor]})


def _digest(a):
    from .records import digest_array
    return digest_array(a)


@lru_cache(maxsize=None)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _support_interval(base: Measure) -> tuple[float, float]:
    if base.uniform is not None:
        if base.uniform.kind == "ball":
            return -base.uniform.radius, base.uniform.radius
        if base.uniform.vertices is not None:
            return float(base.uniform.vertices.min()), float(base.uniform.vertices.max())
    return -np.inf, np.inf


def _smoothed_1d_logpdf(base: Measure, xi: float, nodes: int = 96):
    """Density of sqrt(1 - xi^2) X + xi G on the line.

    Composite Gauss-Legendre on f(x) = int f_mu(a x - xi y) g(xi x + a y) dy,
    split where the base density is nonsmooth (support ends, mode at 0) and
    at the Gaussian peak.
    """
    a = math.sqrt(1.0 - xi * xi)
    lo, hi = _support_interval(base)
    t, w = _leggauss(nodes)

    def logpdf(x):
        x = np.asarray(x, dtype=float).reshape(-1)
        y0 = -xi * x / a
        ya, yb = y0 - 12.0 / a, y0 + 12.0 / a
        if np.isfinite(hi):
            ya = np.maximum(ya, (a * x - hi) / xi)
        if np.isfinite(lo):
            yb = np.minimum(yb, (a * x - lo) / xi)
        empty = yb <= ya
        yb = np.where(empty, ya, yb)
        cuts = np.sort(np.stack([np.clip(a * x / xi, ya, yb), np.clip(y0, ya, yb)], axis=1), axis=1)
        edges = np.column_stack([ya, cuts, yb])                        # (m, 4)
        half = 0.5 * np.diff(edges, axis=1)                            # (m, 3)
        mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
        ys = mid[:, :, None] + half[:, :, None] * t                    # (m, 3, nodes)
        arg = a * x[:, None, None] - xi * ys
        lf = base.log_density(arg.reshape(-1, 1)).reshape(arg.shape)
        lg = -0.5 * (xi * x[:, None, None] + a * ys) ** 2
        vals = np.exp(lf + lg) * w
        total = np.sum(np.sum(vals, axis=2) * half, axis=1) / math.sqrt(2 * math.pi)
        with np.errstate(divide="ignore"):
            out = np.log(total)
        out[empty] = -np.inf
        return out

    return logpdf


def _gauss_polygon_2d(A: np.ndarray, b: np.ndarray, V: np.ndarray, nodes: int = 64) -> np.ndarray:
    """Standard Gaussian measure of polygons {s : A s <= b_j} (one b_j per row
    of ``b``, shape (m, F)); ``V`` holds each polygon's vertices, (m, nV, 2)."""
    t, w = _leggauss(nodes)
    xs = np.sort(V[:, :, 0], axis=1)                                   # (m, nV)
    half = 0.5 * np.diff(xs, axis=1)                                   # (m, nV-1)
    mid = 0.5 * (xs[:, 1:] + xs[:, :-1])
    s1 = mid[:, :, None] + half[:, :, None] * t                        # (m, P, nodes)
    up = np.full(s1.shape, np.inf)
    low = np.full(s1.shape, -np.inf)
    for i, (c0, c1) in enumerate(A):
        rhs = b[:, i][:, None, None] - c0 * s1
        if c1 > 1e-14:
            up = np.minimum(up, rhs / c1)
        elif c1 < -1e-14:
            low = np.maximum(low, rhs / c1)
    inner = np.clip(special.ndtr(up) - special.ndtr(low), 0.0, None)
    outer = inner * np.exp(-0.5 * s1 * s1) / math.sqrt(2 * math.pi) * w
    return np.sum(np.sum(outer, axis=2) * half, axis=1)


def _smoothed_2d_uniform_logpdf(mu: Measure, xi: float, nodes: int = 64):
    """mu uniform on a polygon or disk in the plane:
    f(x) = c a^-2 P_s[(x - xi s)/a in supp mu], s ~ N(0, I_2)."""
    a = math.sqrt(1.0 - xi * xi)
    u = mu.uniform
    logc = math.log(mu.density_const) - 2 * math.log(a)
    if u.kind == "ball":
        t, w = _leggauss(nodes)
        rho = a * u.radius / xi

        def logpdf(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            c = x / xi
            # s1 = c1 + rho sin(theta): smooth integrand for the disk chords
            th = 0.5 * np.pi * t
            s1 = c[:, [0]] + rho * np.sin(th)
            chord = rho * np.cos(th)
            inner = special.ndtr(c[:, [1]] + chord) - special.ndtr(c[:, [1]] - chord)
            vals = inner * np.exp(-0.5 * s1 * s1) / math.sqrt(2 * math.pi) * rho * np.cos(th) * w
            p = 0.5 * np.pi * np.sum(vals, axis=1)
            with np.errstate(divide="ignore"):
                return logc + np.log(p)
        return logpdf

    A, b, V = u.A, u.b, u.vertices

    def logpdf(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        # (x - xi s)/a in P  <=>  (-xi A) s <= a b - A x
        bq = a * b[None, :] - x @ A.T
        Vq = (x[:, None, :] - a * V[None, :, :]) / xi
        p = _gauss_polygon_2d(-xi * A, bq, Vq, nodes)
        with np.errstate(divide="ignore"):
            return logc + np.log(np.clip(p, 0.0, None))

    return logpdf


def gaussian_smoothing(mu: Measure, xi: float, mc_draws: int = 20000, mc_seed: int = 0) -> Measure:
    """The measure mu_xi: law of sqrt(1 - xi^2) X + xi G with G standard Gaussian.

    Density: quadrature of the defining integral for dim <= 2 (factor-wise
    when mu is a product of 1-d measures), Monte Carlo over the Gaussian
    variable (fixed seed, ``mc_draws`` points) above.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    k = mu.dim
    if mu.covariance is not None and np.max(np.abs(mu.covariance - np.eye(k))) > 1e-8:
        raise ValueError("gaussian_smoothing expects an isotropic input")
    if xi == 0.0:
        return replace(mu, descriptor={"name": "smooth", "params": [0.0], "children": [mu.descriptor]})
    if xi == 1.0:
        g = builtin("gaussian", k)
        return replace(g, descriptor={"name": "smooth", "params": [1.0], "children": [mu.descriptor]})
    a = math.sqrt(1.0 - xi * xi)

    def sampler(rng, N):
        X = mu.draw(rng, N)
        return a * X + xi * rng.standard_normal((N, k))

    logpdf = None
    factors = None
    method = None
    if mu.has_density:
        base_factors = mu.factors if mu.factors is not None else ((mu,) if k == 1 else None)
        if base_factors is not None:
            smoothed = [_smooth_factor(f, xi) for f in base_factors]
            factors = tuple(smoothed)

            def logpdf(x):
                return sum(f.log_density(x[:, [i]]) for i, f in enumerate(smoothed))
            method = "quadrature-1d"
        elif k == 2 and mu.uniform is not None and (mu.uniform.kind == "ball" or mu.uniform.vertices is not None):
            logpdf = _smoothed_2d_uniform_logpdf(mu, xi)
            method = "quadrature-2d"
        elif k == 2:
            logpdf = _smoothed_2d_logpdf(mu, xi)
            method = "quadrature-2d-nested"
        else:
            s = make_rng(mc_seed).standard_normal((mc_draws, k))

            def logpdf(x):
                out = np.empty(len(x))
                for i, xv in enumerate(x):
                    # substitute y = (s - xi x)/a: f(x) = a^-k E_s f_mu((x - xi s)/a)
                    lf = mu.log_density((xv - xi * s) / a)
                    m = lf.max()
                    out[i] = -np.inf if not np.isfinite(m) else \
                        m + math.log(np.mean(np.exp(lf - m))) - k * math.log(a)
                return out
            method = "monte-carlo"

    tails = "gaussian" if mu.tails == "compact" else mu.tails
    return Measure(k, sampler, logpdf, np.eye(k), np.zeros(k), True, mu.symmetric,
                   {"name": "smooth", "params": [float(xi)], "children": [mu.descriptor]},
                   tails=tails, factors=factors, info={"density_method": method})


def _smooth_factor(f1: Measure, xi: float) -> Measure:
    a = math.sqrt(1.0 - xi * xi)

    def sampler(rng, N):
        return a * f1.draw(rng, N) + xi * rng.standard_normal((N, 1))

    return Measure(1, sampler, _smoothed_1d_logpdf(f1, xi), np.eye(1), np.zeros(1), True, f1.symmetric,
                   {"name": "smooth", "params": [float(xi)], "children": [f1.descriptor]},
                   tails="gaussian" if f1.tails == "compact" else f1.tails)


def _smoothed_2d_logpdf(mu: Measure, xi: float):
    a = math.sqrt(1.0 - xi * xi)

    def one(x):
        # f(x) = a^-2 E_s f_mu((x - xi s)/a), s ~ N(0, I_2), by nested quadrature
        def inner(s1):
            def g(s2):
                u = (x - xi * np.array([s1, s2])) / a
                return math.exp(float(mu.log_density(u[None, :])[0])) * math.exp(-0.5 * s2 * s2)
            return integrate.quad(g, -9, 9, limit=100, epsabs=1e-13)[0] * math.exp(-0.5 * s1 * s1)
        val = integrate.quad(inner, -9, 9, limit=100, epsabs=1e-12)[0] / (2 * math.pi * a * a)
        return math.log(val) if val > 0 else -np.inf

    def logpdf(x):
        return np.array([one(v) for v in np.atleast_2d(x)])

    return logpdf


def marginal(mu: Measure, F: Subspace) -> Measure:
    """Pushforward of mu under x -> F.frame^T x (coordinates in the frame of F)."""
    if mu.dim != F.n:
        raise ValueError(f"measure dimension {mu.dim} != subspace ambient dimension {F.n}")
    P = F.frame

    def sampler(rng, N):
        return mu.draw(rng, N) @ P

    cov = None if mu.covariance is None else P.T @ mu.covariance @ P
    return Measure(F.k, sampler, None, cov, P.T @ mu.mean, mu.centered, mu.symmetric,
                   {"name": "marginal", "params": [_digest(F.projector)], "children": [mu.descriptor]},
                   tails=mu.tails, info={"parent": mu, "subspace": F})


def special_measure_pair(k: int, n: int, xi: float, base: str = "cube") -> tuple[Measure, Measure]:
    """(mu1, mu2) with mu1 = base(k) smoothed at xi and mu2 = mu1 x gamma_{n-k}."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    if not 0 < xi < 1:
        raise ValueError(f"xi must lie in (0, 1), got {xi}")
    mu1 = gaussian_smoothing(builtin(base, k), xi)
    return mu1, product(mu1, builtin("gaussian", n - k))


# ------------------------------------------------------------ estimation

def covariance_estimate(mu: Measure, N: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Empirical covariance of N draws and per-entry standard errors."""
    if N < 100:
        raise ValueError("N must be at least 100")
    X = mu.draw(rng, N)
    Xc = X - X.mean(axis=0)
    prods = Xc[:, :, None] * Xc[:, None, :]
    C = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(N)
    return C, se


def isotropize(mu: Measure, N: int, rng) -> Measure:
    """Whiten mu with its empirical mean and covariance (N draws)."""
    X = mu.draw(rng, N)
    m = X.mean(axis=0)
    C = np.cov(X, rowvar=False, bias=True).reshape(mu.dim, mu.dim)
    w, Q = np.linalg.eigh(C)
    if w.min() <= 0 or w.max() / w.min() > 1e8:
        raise DegenerateCovariance(f"covariance condition number {w.max() / max(w.min(), 1e-300):.3g}")
    T = Q @ np.diag(w ** -0.5) @ Q.T
    out = pushforward(mu, T, -T @ m, tag="isotropize")
    # the empirical transform is the best available covariance statement
    return replace(out, covariance=T @ C @ T.T if mu.covariance is None else out.covariance,
                   descriptor={"name": "isotropize", "params": [int(N)], "children": [mu.descriptor]},
                   info={"map": T, "shift": -T @ m, "empirical_mean": m, "empirical_cov": C})


def characteristic_function(desc: dict):
    """(phi, envelope) for a symmetric 1-d built-in or its smoothing.

    phi is the real characteristic function; envelope(x) >= |phi(x)| is
    nonincreasing in x >= 0.  None when no closed form is known.
    """
    name, params = desc["name"], desc.get("params", [])
    if name == "gaussian" and params == [1]:
        g = lambda s: np.exp(-0.5 * s * s)
        return g, g
    if (name == "cube" and params == [1]) or (name == "lp_ball" and params[-1] == 1) or \
            (name == "simplex" and params == [1]):
        a = cube_halfwidth()
        return (lambda s: np.sinc(a * s / np.pi)), (lambda s: np.minimum(1.0, 1.0 / np.maximum(a * np.abs(s), 1e-300)))
    if name == "laplace_product" and params == [1]:
        g = lambda s: 1.0 / (1.0 + 0.5 * s * s)
        return g, g
    if name == "smooth":
        inner = characteristic_function(desc["children"][0])
        if inner is None:
            return None
        phi0, env0 = inner
        xi = float(params[0])
        a = math.sqrt(1.0 - xi * xi)
        return (lambda s: phi0(a * s) * np.exp(-0.5 * xi * xi * s * s)), \
            (lambda s: env0(a * s) * np.exp(-0.5 * xi * xi * s * s))
    return None


def _factor_cfs(mu: Measure):
    facs = mu.factors if mu.factors is not None else ((mu,) if mu.dim == 1 else None)
    if facs is None:
        return None
    cfs = [characteristic_function(f.descriptor) for f in facs]
    return None if any(c is None for c in cfs) else list(zip(facs, cfs))


class FourierBudget(ValueError):
    pass


def _fourier_density_at_zero(factors, theta: np.ndarray, nodes: int = 32, max_panels: int = 200000) -> float:
    """(1/pi) int_0^inf prod_i phi_i(theta_i t) dt for even real characteristic functions."""
    keep = np.flatnonzero(np.abs(theta) > 1e-15)
    if len(keep) == 1:
        i = keep[0]
        return float(factors[i][0].density(np.zeros((1, 1)))[0] / abs(theta[i]))
    th = np.abs(theta[keep])
    phis = [factors[i][1][0] for i in keep]
    envs = [factors[i][1][1] for i in keep]
    T = 1.0
    while np.prod([e(np.array([w * T]))[0] for e, w in zip(envs, th)]) * T > 1e-11:
        T *= 1.25
        if T > 1e9:
            raise FourierBudget("characteristic functions decay too slowly")
    width = 0.25 * min(1.0, math.pi / (cube_halfwidth() * th.max()))
    m = int(math.ceil(T / width))
    if m > max_panels:
        raise FourierBudget(f"Fourier integral needs {m} panels")
    x, w = _leggauss(nodes)
    edges = np.linspace(0.0, T, m + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    val = np.ones_like(t)
    for phi, a in zip(phis, th):
        val *= phi(a * t)
    return float(np.dot(ww, val) / math.pi)


def _fourier_density_at_zero_2d(factors, P: np.ndarray, angles: int = 64, nodes: int = 24,
                                max_points: int = 4_000_000) -> float:
    """(2 pi)^-2 int_{R^2} prod_i phi_i(<p_i, s>) ds in polar coordinates (p_i rows of P)."""
    om = np.pi * (np.arange(angles) + 0.5) / angles      # phi even: half circle, doubled
    A = np.abs(P @ np.column_stack([np.cos(om), np.sin(om)]).T)
    x, w = _leggauss(nodes)
    total, used = 0.0, 0
    for j in range(angles):
        a = A[:, j]
        T = 1.0
        while np.prod([f[1][1](np.array([ai * T]))[0] for f, ai in zip(factors, a)]) * T * T > 1e-11:
            T *= 1.25
            if T > 1e9:
                raise FourierBudget("characteristic functions decay too slowly")
        width = 0.25 * min(1.0, math.pi / (cube_halfwidth() * a.max()))
        m = int(math.ceil(T / width))
        used += m * nodes
        if used > max_points:
            raise FourierBudget("2-d Fourier integral exceeds its node budget")
        edges = np.linspace(0.0, T, m + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        v = r * (half[:, None] * w[None, :]).ravel()
        for f, ai in zip(factors, a):
            v = v * f[1][0](ai * r)
        total += v.sum()
    return float(2.0 * total * (np.pi / angles) / (2 * np.pi) ** 2)


def marginal_density_at_zero(mu: Measure, F: Subspace, N: int, rng, route: str = "auto",
                             proposal: str | None = None) -> EstimateWithCI:
    """f_{pi_F mu}(0), the integral of f_mu over the complement of F.

    ``route``: "exact" (uniform measures, section dimension <= 3),
    "fourier" (k <= 2, product of symmetric 1-d factors: inverse Fourier
    transform of the product of characteristic functions at 0),
    "importance" (Gaussian proposal matched to the covariance restricted to
    the complement; Student-t for exponential tails), or "auto".
    """
    if not mu.has_density:
        raise NoDensity(f"{mu.name} has no closed-form density")
    if mu.dim != F.n:
        raise ValueError("dimension mismatch")
    rng = make_rng(rng)
    seed = seed_of(rng)
    comp = F.complement()
    m = comp.k
    exact_ok = mu.uniform is not None and m <= 3 and (mu.uniform.kind == "ball" or mu.uniform.A is not None)
    if route == "exact" or (route == "auto" and exact_ok):
        if not exact_ok:
            raise ValueError("exact route needs a uniform polytope/ball measure and section dimension <= 3")
        from .geometry import body_of_measure, section_body, volume_exact
        vol = volume_exact(section_body(body_of_measure(mu), comp))
        val = mu.density_const * vol
        return EstimateWithCI(val, 0.0, 0, seed, "exact-section", extra={"log_value": math.log(val) if val > 0 else -math.inf})
    cfs = _factor_cfs(mu) if F.k <= 2 and mu.symmetric else None
    if route == "fourier" or (route == "auto" and cfs is not None):
        if cfs is None:
            raise ValueError("Fourier route needs k <= 2 and a product of symmetric 1-d factors")
        try:
            if F.k == 1:
                val = _fourier_density_at_zero(cfs, F.frame[:, 0])
            else:
                val = _fourier_density_at_zero_2d(cfs, F.frame)
            return EstimateWithCI(val, 0.0, 0, seed, f"fourier-{F.k}d", extra={"log_value": math.log(val)})
        except FourierBudget:
            if route == "fourier":
                raise
    if route not in ("auto", "importance"):
        raise ValueError(f"unknown route {route!r}")

    G = comp.frame
    cov = mu.covariance if mu.covariance is not None else np.cov(mu.draw(rng, 20000), rowvar=False)
    S = G.T @ cov @ G
    c = G.T @ mu.mean
    w, Q = np.linalg.eigh(S)
    if w.min() <= 1e-12:
        raise DegenerateCovariance("degenerate proposal covariance")
    kind = proposal or ("student" if mu.tails == "exponential" else "gaussian")
    if kind == "gaussian":
        dist = stats.multivariate_normal(mean=c, cov=S)
    else:
        dist = stats.multivariate_t(loc=c, shape=S * 3.0 / 5.0, df=5)
    Z = dist.rvs(size=N, random_state=rng).reshape(N, m)
    logq = dist.logpdf(Z).reshape(N)
    logf = mu.log_density(Z @ G.T)
    logw = logf - logq
    top = np.max(logw)
    if not np.isfinite(top):
        return EstimateWithCI(0.0, 0.0, N, seed, f"importance-{kind}", extra={"log_value": -math.inf})
    r = np.exp(logw - top)
    mean_r = r.mean()
    se_r = r.std(ddof=1) / math.sqrt(N)
    val = math.exp(top) * mean_r
    return EstimateWithCI(val, math.exp(top) * se_r, N, seed, f"importance-{kind}",
                          extra={"log_value": top + math.log(mean_r), "rel_se": se_r / mean_r})


# --------------------------------------------------------- descriptors

def describe(desc_or_measure) -> str:
    """Compact text form of a construction tree, e.g. ``product(cube(4),gaussian(4))``."""
    d = desc_or_measure.descriptor if isinstance(desc_or_measure, Measure) else desc_or_measure
    args = [_fmt(p) for p in d.get("params", [])] + [describe(c) for c in d.get("children", [])]
    if d["name"] in ("smooth", "scaled"):
        args = [describe(c) for c in d["children"]] + [_fmt(p) for p in d["params"]]
    return f"{d['name']}({','.join(args)})"


def _fmt(p):
    if isinstance(p, float):
        return repr(p)
    return str(p)


_PARSE_ARITY = {"gaussian": 1, "cube": 1, "simplex": 1, "laplace_product": 1, "lp_ball": 2,
                "product": 2, "convolution": 2, "smooth": 2, "scaled": 2}


def parse_measure(text: str) -> Measure:
    """Build a measure from its text descriptor.

    Grammar: ``name(arg, ...)`` with names gaussian(n), cube(n), simplex(n),
    laplace_product(n), lp_ball(p, n), product(m1, m2), convolution(m1, m2), smooth(m, xi),
    scaled(m, lam).
    """
    try:
        tree = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"cannot parse measure descriptor {text!r}: {exc.msg}") from None
    return _build(tree, text)


def _build(node, text):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ValueError(f"expected a call like cube(8) in {text!r}")
    name = node.func.id
    if name not in _PARSE_ARITY:
        raise ValueError(f"unknown measure name {name!r}")
    if len(node.args) != _PARSE_ARITY[name] or node.keywords:
        raise ValueError(f"{name} takes {_PARSE_ARITY[name]} positional argument(s)")
    args = node.args

    def num(a):
        if isinstance(a, ast.Name) and a.id in ("inf", "oo"):
            return "inf"
        if isinstance(a, ast.Constant) and isinstance(a.value, (int, float)):
            return a.value
        raise ValueError(f"expected a number in {text!r}")

    if name == "lp_ball":
        return builtin("lp_ball", num(args[1]), p=num(args[0]))
    if name in ("gaussian", "cube", "simplex", "laplace_product"):
        return builtin(name, num(args[0]))
    if name == "product":
        return product(_build(args[0], text), _build(args[1], text))
    if name == "convolution":
        return convolution(_build(args[0], text), _build(args[1], text))
    if name == "smooth":
        return gaussian_smoothing(_build(args[0], text), float(num(args[1])))
    return scaled(_build(args[0], text), float(num(args[1])))


# ------------------------------------------------------ agreement tests

def density_agreement_pvalue(mu: Measure, rng, directions: int = 3, N: int = 20000,
                             N_is: int = 40000) -> float:
    """p-value for "the sampler draws from the stated density".

    One dimension: Kolmogorov-Smirnov against the CDF obtained by integrating
    the density.  Higher dimensions: along random directions, the empirical
    CDF of projected draws is compared at its deciles with an importance
    sampling estimate of the same CDF computed from the density alone
    (Student-t proposal); z-scores are Bonferroni-combined.
    """
    if not mu.has_density:
        raise NoDensity(mu.name)
    rng = make_rng(rng)
    X = mu.draw(rng, N)
    if mu.dim == 1:
        lo, hi = np.quantile(X, [0.0, 1.0])
        span = hi - lo
        grid = np.linspace(lo - 0.05 * span, hi + 0.05 * span, 6001)
        dens = mu.density(grid[:, None])
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        cdf /= cdf[-1]
        return float(stats.kstest(X[:, 0], lambda t: np.interp(t, grid, cdf)).pvalue)
    cov = mu.covariance if mu.covariance is not None else np.cov(X, rowvar=False)
    prop = stats.multivariate_t(loc=mu.mean, shape=1.5 * cov, df=4)
    Y = prop.rvs(size=N_is, random_state=rng)
    logw = mu.log_density(Y) - prop.logpdf(Y)
    w = np.exp(logw - np.max(logw))
    levels = np.arange(1, 10) / 10
    zmax = 0.0
    for _ in range(directions):
        th = rng.standard_normal(mu.dim)
        th /= np.linalg.norm(th)
        cuts = np.quantile(X @ th, levels)
        proj = Y @ th
        for lev, c in zip(levels, cuts):
            ind = proj <= c
            p_is = np.sum(w * ind) / np.sum(w)
            # self-normalized IS variance
            var_is = np.sum((w * (ind - p_is)) ** 2) / np.sum(w) ** 2
            var_emp = lev * (1 - lev) / N
            zmax = max(zmax, abs(p_is - lev) / math.sqrt(var_is + var_emp))
    tests = directions * len(levels)
    return float(min(1.0, tests * 2 * stats.norm.sf(zmax)))


def is_log_concave_on_segments(mu: Measure, rng, trials: int = 2000) -> bool:
    """f(midpoint)^2 >= f(a) f(b) - 1e-12 on random segments between draws."""
    rng = make_rng(rng)
    A = mu.draw(rng, trials)
    B = mu.draw(rng, trials)
    fa, fb, fm = mu.density(A), mu.density(B), mu.density((A + B) / 2)
    return bool(np.all(fm * fm >= fa * fb - 1e-12))


def chi_moment(n: int, s: float) -> float:
    """E |g|^s for a standard Gaussian vector in R^n (s > -n)."""
    return math.exp(0.5 * s * math.log(2.0) + special.gammaln((n + s) / 2) - special.gammaln(n / 2))
