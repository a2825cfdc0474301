"""Convex bodies through their support functions: L_q-centroid bodies,
projections and sections, exact low-dimensional volumes, two-sided volume
brackets and radii.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Callable

import numpy as np
from scipy import optimize, stats
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .grassmann import Subspace
from .measures import Measure, unit_ball_volume
from .records import EstimateWithCI, make_rng, seed_of

Q_MIN, Q_MAX = 1.0, 64.0
SANDWICH_MAX_DIM = 8
EXACT_MAX_DIM = 3


class NoExactRepresentation(ValueError):
    pass


class BracketTooWide(RuntimeError):
    def __init__(self, bracket: "VolumeBracket", tol: float):
        super().__init__(f"bracket [{bracket.lower:.6g}, {bracket.upper:.6g}] wider than rtol={tol}")
        self.bracket = bracket


class ConvexBody:
    """A convex body known through its support function.

    Optional exact data: ``vertices`` (V-representation), ``halfspaces``
    ``(A, b)`` meaning ``A x <= b``, or ``ball_radius`` for a centered ball.
    ``contact(U)`` returns, for each row u of U, a point x of the body with
    <x, u> = h(u); these points span the inner volume bound.
    """

    def __init__(self, dim: int, support: Callable[[np.ndarray], np.ndarray] | None = None, *,
                 contact: Callable[[np.ndarray], np.ndarray] | None = None,
                 vertices=None, halfspaces=None, ball_radius: float | None = None,
                 symmetric: bool = True, label: str = ""):
        self.dim = int(dim)
        self.vertices = None if vertices is None else np.atleast_2d(np.asarray(vertices, dtype=float))
        self.halfspaces = None
        if halfspaces is not None:
            A, b = halfspaces
            self.halfspaces = (np.atleast_2d(np.asarray(A, dtype=float)), np.asarray(b, dtype=float))
        self.ball_radius = ball_radius
        self.symmetric = symmetric
        self.label = label
        self._support = support
        self._contact = contact
        if support is None and self.vertices is None and ball_radius is None and self.halfspaces is None:
            raise ValueError("body needs a support function or an exact representation")

    @property
    def exact(self) -> bool:
        return self.vertices is not None or self.halfspaces is not None or self.ball_radius is not None

    def _ensure_vertices(self):
        if self.vertices is None and self.halfspaces is not None:
            self.vertices = vertices_from_halfspaces(*self.halfspaces)
        return self.vertices

    def support(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        U = np.atleast_2d(U)
        if self._support is not None:
            h = self._support(U)
        elif self.ball_radius is not None:
            h = self.ball_radius * np.linalg.norm(U, axis=1)
        else:
            V = self._ensure_vertices()
            h = np.max(U @ V.T, axis=1)
        h = np.asarray(h, dtype=float)
        return h[0] if single else h

    def contact(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self._contact is not None:
            return self._contact(U)
        if self.ball_radius is not None:
            return self.ball_radius * U / np.linalg.norm(U, axis=1, keepdims=True)
        V = self._ensure_vertices()
        if V is not None:
            return V[np.argmax(U @ V.T, axis=1)]
        return _numerical_gradient(self.support, U)

    def support_and_contact(self, U) -> tuple[np.ndarray, np.ndarray]:
        """Uncached (h(U), contact(U)); used by iterative solvers."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self.support(U), self.contact(U)

    def __repr__(self):
        return f"ConvexBody(dim={self.dim}, label={self.label!r})"


def _numerical_gradient(h, U, step=1e-6):
    out = np.empty_like(U)
    for j in range(U.shape[1]):
        e = np.zeros(U.shape[1])
        e[j] = step
        out[:, j] = (h(U + e) - h(U - e)) / (2 * step)
    return out


@dataclass
class VolumeBracket:
    lower: float
    upper: float
    method: str
    directions: int = 0

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper * (1 + 1e-9):
            raise ValueError(f"invalid bracket [{self.lower}, {self.upper}]")

    @property
    def mid(self) -> float:
        return math.sqrt(self.lower * self.upper) if self.lower > 0 else 0.5 * self.upper

    @property
    def rel_width(self) -> float:
        return (self.upper - self.lower) / self.upper if self.upper > 0 else 0.0

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower * (1 - slack) <= value <= self.upper * (1 + slack)


# ------------------------------------------------------------- constructors

def cube_body(n: int, a: float = 1.0) -> ConvexBody:
    V = a * np.array(list(iproduct((-1.0, 1.0), repeat=n)))
    A = np.vstack([np.eye(n), -np.eye(n)])
    return ConvexBody(n, vertices=V, halfspaces=(A, np.full(2 * n, a)), label=f"cube({n},{a})")


def box_body(halfwidths) -> ConvexBody:
    w = np.asarray(halfwidths, dtype=float)
    n = len(w)
    V = np.array(list(iproduct((-1.0, 1.0), repeat=n))) * w
    A = np.vstack([np.eye(n), -np.eye(n)])
    return ConvexBody(n, vertices=V, halfspaces=(A, np.concatenate([w, w])), label="box")


def cross_polytope_body(n: int, r: float = 1.0) -> ConvexBody:
    V = r * np.vstack([np.eye(n), -np.eye(n)])
    A = np.array(list(iproduct((-1.0, 1.0), repeat=n)))
    return ConvexBody(n, vertices=V, halfspaces=(A, np.full(len(A), r)), label=f"cross({n},{r})")


def ball_body(n: int, r: float = 1.0, exact: bool = True) -> ConvexBody:
    """Centered Euclidean ball; ``exact=False`` hides the closed form and
    exposes only the support function (for bracketing tests)."""
    if exact:
        return ConvexBody(n, ball_radius=r, label=f"ball({n},{r})")
    return ConvexBody(n, lambda U: r * np.linalg.norm(U, axis=1),
                      contact=lambda U: r * U / np.linalg.norm(U, axis=1, keepdims=True), label=f"ball*({n},{r})")


def volume_one_ball(n: int) -> ConvexBody:
    """D_n, the centered Euclidean ball of volume one."""
    return ball_body(n, unit_ball_volume(n) ** (-1.0 / n))


def body_of_measure(mu: Measure) -> ConvexBody:
    """Support of a uniform measure as an exact body."""
    u = mu.uniform
    if u is None:
        raise NoExactRepresentation(f"{mu.name} is not uniform on a known body")
    if u.kind == "ball":
        return ConvexBody(mu.dim, ball_radius=u.radius, label=f"supp {mu.name}")
    hs = (u.A, u.b) if u.A is not None else None
    return ConvexBody(mu.dim, vertices=u.vertices, halfspaces=hs, symmetric=mu.symmetric, label=f"supp {mu.name}")


def linear_image(K: ConvexBody, A) -> ConvexBody:
    """The body A K for invertible A."""
    A = np.asarray(A, dtype=float)
    Ainv = np.linalg.inv(A)
    V = None if K.vertices is None else K.vertices @ A.T
    hs = None if K.halfspaces is None else (K.halfspaces[0] @ Ainv, K.halfspaces[1])
    if V is not None or hs is not None:
        return ConvexBody(K.dim, vertices=V, halfspaces=hs, symmetric=K.symmetric, label=f"A·{K.label}")
    return ConvexBody(K.dim, lambda U: K.support(U @ A), contact=lambda U: K.contact(U @ A) @ A.T,
                      symmetric=K.symmetric, label=f"A·{K.label}")


def scale_body(K: ConvexBody, lam: float) -> ConvexBody:
    if K.ball_radius is not None:
        return ConvexBody(K.dim, ball_radius=lam * K.ball_radius, label=f"{lam}·{K.label}")
    return linear_image(K, lam * np.eye(K.dim))


def vertices_from_halfspaces(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = A.shape[1]
    if d == 1:
        a = A[:, 0]
        hi = np.min(b[a > 0] / a[a > 0]) if np.any(a > 0) else np.inf
        lo = np.max(b[a < 0] / a[a < 0]) if np.any(a < 0) else -np.inf
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("unbounded interval")
        return np.array([[lo], [hi]]) if hi >= lo else np.zeros((0, 1))
    interior = _interior_point(A, b)
    if interior is None:
        return np.zeros((0, d))
    hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), interior)
    return hs.intersections


def _interior_point(A, b):
    if np.all(b > 1e-12):
        return np.zeros(A.shape[1])
    # Chebyshev center
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(A.shape[1] + 1)
    c[-1] = -1.0
    res = optimize.linprog(c, A_ub=np.hstack([A, norms[:, None]]), b_ub=b,
                           bounds=[(None, None)] * A.shape[1] + [(0, None)])
    if res.status != 0 or res.x[-1] <= 1e-12:
        return None
    return res.x[:-1]


# ------------------------------------------------------- centroid bodies

def zq_support(mu: Measure, q: float, y, N: int, rng) -> EstimateWithCI:
    """h_{Z_q(mu)}(y) = (E |<x, y>|^q)^(1/q) from N draws, delta-method stderr."""
    if q < Q_MIN:
        raise ValueError(f"q must be >= 1, got {q}")
    if q > Q_MAX:
        raise ValueError(f"q is capped at {Q_MAX}")
    y = np.asarray(y, dtype=float)
    rng = make_rng(rng)
    X = mu.draw(rng, N)
    h, se = _moment_support(X, q, y[None, :])
    return EstimateWithCI(float(h[0]), float(se[0]), N, seed_of(rng), f"moment-q{q:g}")


def _moment_support(X, q, U, chunk=64):
    """Support values and delta-method stderr of the empirical Z_q."""
    N = X.shape[0]
    h = np.empty(len(U))
    se = np.empty(len(U))
    for s in range(0, len(U), chunk):
        T = np.abs(X @ U[s:s + chunk].T)                     # (N, c)
        top = T.max(axis=0)
        top[top == 0] = 1.0
        P = (T / top) ** q
        m = P.mean(axis=0)
        sm = P.std(axis=0, ddof=1) / math.sqrt(N)
        h[s:s + chunk] = top * m ** (1.0 / q)
        se[s:s + chunk] = h[s:s + chunk] * sm / (q * np.where(m > 0, m, 1.0))
    return h, se


class ZqBody(ConvexBody):
    """Empirical L_q-centroid body of one fixed batch of N draws.

    Drawing the batch once makes h an exact support function (of the
    empirical measure's Z_q), so brackets computed from it are valid for that
    body; ``stderr`` quantifies the distance to the population body.  Support
    values are memoized per direction.
    """

    def __init__(self, mu: Measure, q: float, N: int, rng, points: np.ndarray | None = None):
        if q < Q_MIN:
            raise ValueError(f"q must be >= 1, got {q}")
        if q > Q_MAX:
            raise ValueError(f"q is capped at {Q_MAX}")
        self.q = float(q)
        self.measure = mu
        if points is None:
            rng = make_rng(rng)
            self.seed = seed_of(rng)
            points = mu.draw(rng, N)
        else:
            self.seed = rng if isinstance(rng, str) else "shared"
        self.points = points
        self.N = len(points)
        self._cache: dict[bytes, tuple] = {}
        self._lock = threading.Lock()
        super().__init__(mu.dim, self._h, contact=self._grad, symmetric=True, label=f"Z_{q:g}({mu.name})")

    def with_q(self, q: float) -> "ZqBody":
        """Same batch, different moment order (keeps p -> Z_p monotone)."""
        return ZqBody(self.measure, q, self.N, self.seed, points=self.points)

    def _compute(self, U, chunk=64):
        U = np.atleast_2d(U)
        q = self.q
        h = np.empty(len(U))
        se = np.empty(len(U))
        G = np.empty((len(U), self.dim))
        for s in range(0, len(U), chunk):
            T = self.points @ U[s:s + chunk].T                   # (N, c)
            top = np.abs(T).max(axis=0)
            top[top == 0] = 1.0
            A = np.abs(T) / top
            P = A ** q
            m = P.mean(axis=0)
            sm = P.std(axis=0, ddof=1) / math.sqrt(self.N)
            hc = top * m ** (1.0 / q)
            h[s:s + chunk] = hc
            se[s:s + chunk] = hc * sm / (q * m)
            # grad h(u) = h^(1-q) E[|<x,u>|^(q-1) sign(<x,u>) x]
            Gc = ((A ** (q - 1) * np.sign(T)).T @ self.points) / self.N
            G[s:s + chunk] = Gc / m[:, None] ** ((q - 1) / q)
        return h, se, G

    def _eval(self, U):
        """Memoized (support, stderr, gradient) for each row of U."""
        U = np.atleast_2d(U)
        keys = [u.tobytes() for u in U]
        with self._lock:
            missing = [i for i, kk in enumerate(keys) if kk not in self._cache]
        if missing:
            h, se, G = self._compute(U[missing])
            with self._lock:
                for j, i in enumerate(missing):
                    self._cache[keys[i]] = (float(h[j]), float(se[j]), G[j])
        with self._lock:
            vals = [self._cache[kk] for kk in keys]
        return (np.array([v[0] for v in vals]), np.array([v[1] for v in vals]),
                np.array([v[2] for v in vals]))

    def support_and_contact(self, U):
        h, _, G = self._compute(U)
        return h, G

    def _h(self, U):
        return self._eval(U)[0]

    def stderr(self, U) -> np.ndarray:
        return self._eval(U)[1]

    def _grad(self, U):
        return self._eval(U)[2]

    def volume_rel_stderr(self, U) -> float:
        """Relative stderr of the volume: dim times the mean relative support error."""
        h, se, _ = self._eval(U)
        return float(self.dim * np.mean(se / h))


def zq_body(mu: Measure, q: float, N: int, rng) -> ZqBody:
    return ZqBody(mu, q, N, rng)


# ------------------------------------------------------ projections/sections

def project_body(K: ConvexBody, F: Subspace) -> ConvexBody:
    """P_F K in the frame coordinates of F: h(y) = h_K(frame y)."""
    if K.dim != F.n:
        raise ValueError(f"body dimension {K.dim} != {F.n}")
    P = F.frame
    if K.ball_radius is not None:
        return ConvexBody(F.k, ball_radius=K.ball_radius, label=f"P{K.label}")
    V = None if K.vertices is None else K.vertices @ P
    if V is not None and F.k >= 2 and len(V) > F.k + 1:
        try:
            V = V[ConvexHull(V).vertices]
        except QhullError:
            pass
    if V is not None and F.k == 1:
        V = np.array([[V.min()], [V.max()]])
    sup = None if V is not None else (lambda Y: K.support(Y @ P.T))
    con = None if V is not None else (lambda Y: K.contact(Y @ P.T) @ P)
    return ConvexBody(F.k, sup, contact=con, vertices=V, symmetric=K.symmetric, label=f"P{K.label}")


def section_body(K: ConvexBody, F: Subspace) -> ConvexBody:
    """K intersected with span(F), in the frame coordinates of F."""
    if K.dim != F.n:
        raise ValueError(f"body dimension {K.dim} != {F.n}")
    if K.ball_radius is not None:
        return ConvexBody(F.k, ball_radius=K.ball_radius, label=f"{K.label}∩F")
    if K.halfspaces is None:
        raise NoExactRepresentation("section needs a halfspace representation")
    A, b = K.halfspaces
    return ConvexBody(F.k, halfspaces=(A @ F.frame, b), symmetric=K.symmetric, label=f"{K.label}∩F")


def volume_exact(K: ConvexBody, max_dim: int = EXACT_MAX_DIM) -> float:
    """Exact volume from the hull of the vertices (or closed form for balls)."""
    if K.dim > max_dim:
        raise ValueError(f"exact volume limited to dimension {max_dim}, got {K.dim}")
    if K.ball_radius is not None:
        return unit_ball_volume(K.dim) * K.ball_radius ** K.dim
    if K.vertices is None and K.halfspaces is None:
        raise NoExactRepresentation(f"{K} has no exact representation")
    V = K._ensure_vertices()
    if len(V) == 0:
        return 0.0
    if K.dim == 1:
        return float(V.max() - V.min())
    try:
        return _hull_volume(V)
    except QhullError:
        return 0.0


# ---------------------------------------------------------- direction sets

_PLASTIC = 1.324717957244746


def sphere_directions(dim: int, M: int, rng, extras: bool = True) -> np.ndarray:
    """Low-discrepancy unit directions, randomly rotated, nested in M.

    dim 2: golden-angle sequence; dim 3: R2 sequence through the equal-area
    map; dim >= 4: scrambled Sobol points pushed through the normal
    quantile.  Coordinate and diagonal directions are prepended when
    ``extras`` is set.
    """
    rng = make_rng(rng)
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        off = rng.uniform()
        ang = 2 * np.pi * ((off + np.arange(M) * 0.6180339887498949) % 1.0)
        body = np.column_stack([np.cos(ang), np.sin(ang)])
    elif dim == 3:
        off = rng.uniform(size=2)
        i = np.arange(M)[:, None]
        uv = (off + i * np.array([1 / _PLASTIC, 1 / _PLASTIC ** 2])) % 1.0
        z = 1 - 2 * uv[:, 1]
        r = np.sqrt(np.clip(1 - z * z, 0, None))
        phi = 2 * np.pi * uv[:, 0]
        body = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        from scipy.stats import qmc
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pts = qmc.Sobol(dim, scramble=True, seed=rng).random(M)
        g = stats.norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        body = g / np.linalg.norm(g, axis=1, keepdims=True)
        Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
        body = body @ (Q * np.sign(np.diag(R))).T
    if not extras:
        return body
    head = [np.eye(dim), -np.eye(dim)]
    if dim <= SANDWICH_MAX_DIM:
        head.append(np.array(list(iproduct((-1.0, 1.0), repeat=dim))) / math.sqrt(dim))
    return np.vstack(head + [body])


# ------------------------------------------------------------- volumes

QHULL_MAX_DIM = 4


def _hull_volume(P: np.ndarray) -> float:
    try:
        return float(ConvexHull(P).volume)
    except QhullError:
        # nearly cospherical vertex clusters: joggled input
        return float(ConvexHull(P, qhull_options="QJ").volume)


def volume_sandwich(K: ConvexBody, dim: int | None = None, M: int = 500, rng=None,
                    rtol: float | None = None) -> VolumeBracket:
    """Two-sided volume bound from M probing directions.

    dim <= 4: upper = volume of {x : <x, u_i> <= h(u_i)}, lower = volume of
    the hull of contact points (deterministic).  dim 5..8: radial-function
    estimate, see ``radial_volume``.  Bodies with exact vertices return a
    degenerate bracket.
    """
    d = K.dim if dim is None else dim
    if d != K.dim:
        raise ValueError(f"dim {d} != body dimension {K.dim}")
    if d > SANDWICH_MAX_DIM:
        raise ValueError(f"volume_sandwich supports dim <= {SANDWICH_MAX_DIM}, got {d}")
    if K.vertices is not None and d <= QHULL_MAX_DIM + 2:
        v = volume_exact(K, max_dim=SANDWICH_MAX_DIM)
        return VolumeBracket(v, v, "exact-vertices")
    if K.ball_radius is not None:
        v = unit_ball_volume(d) * K.ball_radius ** d
        return VolumeBracket(v, v, "exact-ball")
    if d > QHULL_MAX_DIM:
        br = radial_volume(K, M, rng)
    else:
        br = _support_sandwich(K, d, M, rng)
    if rtol is not None and br.rel_width > rtol:
        raise BracketTooWide(br, rtol)
    return br


def _support_sandwich(K, d, M, rng):
    U = sphere_directions(d, M, rng)
    h = K.support(U)
    C = K.contact(U)
    if d == 1:
        return VolumeBracket(float(C.max() - C.min()), float(h[0] + h[1]), "sandwich-1d", len(U))
    centre = np.zeros(d) if K.symmetric else C.mean(axis=0)
    if np.any(U @ centre >= h):
        centre = C.mean(axis=0)
    try:
        hs = HalfspaceIntersection(np.hstack([U, -h[:, None]]), centre)
        upper = _hull_volume(hs.intersections)
    except QhullError:
        upper = math.inf
    try:
        lower = _hull_volume(C)
    except QhullError:
        lower = 0.0
    return VolumeBracket(min(lower, upper), upper, "support-sandwich", len(U))


def radial_distances(K: ConvexBody, thetas: np.ndarray, probe: int = 2000, iters: int = 200,
                     rng=None, tol: float = 1e-10) -> np.ndarray:
    """rho_K(theta) = min { h(u) : <theta, u> = 1 } for each row theta.

    Start from the best probe direction, then batched projected gradient
    descent with per-row Barzilai-Borwein steps and monotone safeguard.
    """
    d = K.dim
    th = np.atleast_2d(thetas)
    U0 = sphere_directions(d, probe, rng)
    H0 = K.support(U0)
    dots = th @ U0.T
    ratio = np.where(dots > 1e-12, H0[None, :] / np.where(dots > 1e-12, dots, 1.0), np.inf)
    best = np.argmin(ratio, axis=1)
    u = U0[best] / dots[np.arange(len(th)), best][:, None]
    f, g = K.support_and_contact(u)
    g = g - (g * th).sum(axis=1, keepdims=True) * th
    step = np.full(len(th), 0.1)
    active = np.ones(len(th), dtype=bool)
    for _ in range(iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        un = u[idx] - step[idx, None] * g[idx]
        fn, gn = K.support_and_contact(un)
        gn = gn - (gn * th[idx]).sum(axis=1, keepdims=True) * th[idx]
        better = fn <= f[idx]
        bi = idx[better]
        s_vec = un[better] - u[bi]
        y_vec = gn[better] - g[bi]
        sy = (s_vec * y_vec).sum(axis=1)
        ss = (s_vec * s_vec).sum(axis=1)
        decrease = f[bi] - fn[better]
        u[bi], f[bi], g[bi] = un[better], fn[better], gn[better]
        step[bi] = np.where(sy > 1e-300, ss / np.where(sy > 1e-300, sy, 1.0), step[bi] * 2)
        step[idx[~better]] *= 0.25
        done = np.zeros(len(th), dtype=bool)
        done[bi] = decrease <= tol * f[bi]
        done[idx[~better]] = step[idx[~better]] < 1e-14
        done |= np.linalg.norm(g, axis=1) <= tol
        active &= ~done
    return f


def radial_volume(K: ConvexBody, M: int = 500, rng=None) -> VolumeBracket:
    """|K| = omega_d E[rho_K(theta)^d] over M randomized low-discrepancy theta.

    The returned bracket is mean -/+ 3 standard errors of the directional
    average (statistical, not deterministic).
    """
    rng = make_rng(rng)
    d = K.dim
    th = sphere_directions(d, M, rng, extras=False)
    rho = radial_distances(K, th, rng=rng)
    v = unit_ball_volume(d) * rho ** d
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(len(v)))
    return VolumeBracket(max(0.0, mean - 3 * se), mean + 3 * se, "radial-mc", len(th))


def radii(K: ConvexBody, M: int = 2000, rng=None) -> tuple[float, float]:
    """(circumradius R, inradius r) about the origin; d_G(K, B) = R / r.

    Exact from vertices / facets when available, otherwise max and min of h
    over probing directions.
    """
    if K.ball_radius is not None:
        return float(K.ball_radius), float(K.ball_radius)
    R = r = None
    if K.vertices is not None:
        R = float(np.max(np.linalg.norm(K.vertices, axis=1)))
    if K.halfspaces is not None:
        A, b = K.halfspaces
        r = float(np.min(b / np.linalg.norm(A, axis=1)))
        if R is None:
            R = float(np.max(np.linalg.norm(K._ensure_vertices(), axis=1)))
    if R is None or r is None:
        U = sphere_directions(K.dim, M, rng)
        h = K.support(U)
        R = float(h.max()) if R is None else R
        r = float(h.min()) if r is None else r
    return R, r


def geometric_distance_to_ball(K: ConvexBody, M: int = 2000, rng=None) -> float:
    R, r = radii(K, M, rng)
    return R / r


def rogers_shephard_check(K: ConvexBody, F: Subspace) -> dict:
    """Both sides of |P_F K| |K ∩ F^⊥| <= C(n,k) |K| and of |K| <= |P_F K| |K ∩ F^⊥|."""
    n, k = F.n, F.k
    if k > EXACT_MAX_DIM or n - k > EXACT_MAX_DIM:
        raise ValueError("exact volumes need k <= 3 and n - k <= 3")
    if not K.exact:
        raise NoExactRepresentation("rogers_shephard_check needs an exact body")
    proj = volume_exact(project_body(K, F))
    sec = volume_exact(section_body(K, F.complement()))
    vol = volume_exact(K, max_dim=SANDWICH_MAX_DIM) if K.ball_radius is None else \
        unit_ball_volume(n) * K.ball_radius ** n
    binom = math.comb(n, k)
    prod_ = proj * sec
    return {
        "n": n, "k": k, "proj_volume": proj, "section_volume": sec, "volume": vol,
        "product": prod_, "binom": binom, "ratio_to_bound": prod_ / (binom * vol),
        "rogers_shephard": prod_ <= binom * vol * (1 + 1e-9),
        "fubini": (vol <= prod_ * (1 + 1e-9)) if K.symmetric else None,
    }
