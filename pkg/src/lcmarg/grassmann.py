"""Points of the Grassmannian G(n, k), its two rotation-invariant metrics,
Haar and metric-ball sampling, ball measures and greedy packings.

A subspace is stored as an orthonormal ``n x k`` frame.  Frames are only
defined up to right multiplication by O(k); equality of subspaces is always
decided through the projector distance, never by comparing frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Literal

import numpy as np
from scipy import optimize
from scipy.linalg import block_diag, expm

from .records import EstimateWithCI, binomial_se, make_rng, seed_of

Metric = Literal["d", "sigma_inf"]
METRICS = ("d", "sigma_inf")


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Subspace:
    n: int
    k: int
    frame: np.ndarray

    def __post_init__(self):
        frame = np.asarray(self.frame, dtype=float)
        if frame.shape != (self.n, self.k):
            raise DimensionMismatch(f"frame shape {frame.shape} != ({self.n}, {self.k})")
        if not 1 <= self.k <= self.n - 1:
            raise ValueError(f"need 1 <= k <= n-1, got n={self.n}, k={self.k}")
        gram = frame.T @ frame
        if np.max(np.abs(gram - np.eye(self.k))) > 1e-10:
            raise ValueError("frame columns are not orthonormal")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @classmethod
    def from_basis(cls, basis) -> "Subspace":
        """Span of the columns of ``basis`` (full column rank)."""
        A = np.atleast_2d(np.asarray(basis, dtype=float))
        if A.shape[0] < A.shape[1]:
            raise ValueError("basis must have at least as many rows as columns")
        return cls(A.shape[0], A.shape[1], _orthonormalize(A))

    @classmethod
    def coordinate(cls, n: int, indices) -> "Subspace":
        idx = list(indices)
        return cls(n, len(idx), np.eye(n)[:, idx])

    @property
    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def complement(self) -> "Subspace":
        q, _ = np.linalg.qr(self.frame, mode="complete")
        return Subspace(self.n, self.n - self.k, _orthonormalize(q[:, self.k:]))

    def rotate(self, U: "Rotation | np.ndarray") -> "Subspace":
        M = U.matrix if isinstance(U, Rotation) else np.asarray(U)
        return Subspace(self.n, self.k, _orthonormalize(M @ self.frame))

    def to_text(self) -> str:
        return matrix_to_text(self.frame)

    @classmethod
    def from_text(cls, text: str) -> "Subspace":
        return cls.from_basis(matrix_from_text(text))

    def __repr__(self):
        return f"Subspace(n={self.n}, k={self.k})"


@dataclass(frozen=True, eq=False)
class Rotation:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (self.n, self.n):
            raise DimensionMismatch(f"matrix shape {M.shape} != ({self.n}, {self.n})")
        if np.max(np.abs(M.T @ M - np.eye(self.n))) > 1e-10:
            raise ValueError("matrix is not orthogonal")
        object.__setattr__(self, "matrix", M)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def _orthonormalize(A: np.ndarray) -> np.ndarray:
    # sign-corrected QR: deterministic given A
    q, r = np.linalg.qr(A)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


def matrix_to_text(M: np.ndarray) -> str:
    M = np.atleast_2d(M)
    return "\n".join(" ".join(f"{x:.17g}" for x in row) for row in M) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("ragged matrix text")
    return np.array([[float(x) for x in r] for r in rows])


def _check_pair(E: Subspace, F: Subspace):
    if (E.n, E.k) != (F.n, F.k):
        raise DimensionMismatch(f"G({E.n},{E.k}) vs G({F.n},{F.k})")


def principal_angles(E: Subspace, F: Subspace) -> np.ndarray:
    """Nondecreasing principal angles in [0, pi/2].

    Cosines come from the singular values of ``E^T F``.  Angles below pi/4
    are recomputed from the sines (singular values of ``F - E E^T F``)
    because arccos loses half the digits near 1.
    """
    _check_pair(E, F)
    cos = np.clip(np.linalg.svd(E.frame.T @ F.frame, compute_uv=False), 0.0, 1.0)
    theta = np.arccos(cos)
    resid = F.frame - E.frame @ (E.frame.T @ F.frame)
    sin = np.sort(np.clip(np.linalg.svd(resid, compute_uv=False), 0.0, 1.0))
    small = cos**2 >= 0.5
    theta[small] = np.arcsin(sin[small])
    return np.sort(theta)


def sigma_inf(E: Subspace, F: Subspace, route: Literal["sine", "projector"] = "sine") -> float:
    """Operator norm of ``P_E - P_F`` (equals the sine of the largest angle)."""
    _check_pair(E, F)
    if route == "projector":
        ev = np.linalg.eigvalsh(E.projector - F.projector)
        return float(np.max(np.abs(ev)))
    resid = F.frame - E.frame @ (E.frame.T @ F.frame)
    return float(min(np.linalg.norm(resid, 2), 1.0))


def _d_from_sigma(s):
    # 2 sin(theta/2) with sin(theta) = s, written without cancellation
    s = np.asarray(s, dtype=float)
    return s * np.sqrt(2.0 / (1.0 + np.sqrt(np.clip(1.0 - s * s, 0.0, 1.0))))


def metric_d(E: Subspace, F: Subspace) -> float:
    """``inf ||I - U||_op`` over orthogonal U with U(E) = F, i.e. 2 sin(theta_max / 2)."""
    return float(_d_from_sigma(sigma_inf(E, F)))


def distance(E: Subspace, F: Subspace, metric: Metric = "d") -> float:
    if metric == "d":
        return metric_d(E, F)
    if metric == "sigma_inf":
        return sigma_inf(E, F)
    raise ValueError(f"unknown metric {metric!r}")


def diameter(metric: Metric) -> float:
    return math.sqrt(2.0) if metric == "d" else 1.0


def _radius_to_angle(delta: float, metric: Metric) -> float:
    if metric == "sigma_inf":
        return math.asin(min(delta, 1.0))
    return 2.0 * math.asin(min(delta / 2.0, math.sqrt(0.5)))


def _check_nk(n: int, k: int):
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise TypeError("n and k must be integers")
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got n={n}, k={k}")


def haar_sample(n: int, k: int, rng) -> Subspace:
    _check_nk(n, k)
    rng = make_rng(rng)
    return Subspace(n, k, _orthonormalize(rng.standard_normal((n, k))))


def haar_frames(n: int, k: int, count: int, rng) -> np.ndarray:
    """``count`` Haar frames stacked as ``(count, n, k)``."""
    _check_nk(n, k)
    rng = make_rng(rng)
    G = rng.standard_normal((count, n, k))
    q, r = np.linalg.qr(G)
    s = np.sign(np.diagonal(r, axis1=1, axis2=2))
    s[s == 0] = 1.0
    return q * s[:, None, :]


def sigma_inf_many(E: Subspace | np.ndarray, frames: np.ndarray) -> np.ndarray:
    """sigma_inf between one frame and a stack ``(m, n, k)``."""
    Ef = E.frame if isinstance(E, Subspace) else np.asarray(E)
    frames = np.asarray(frames)
    if frames.shape[1:] != Ef.shape:
        raise DimensionMismatch("stack shape does not match frame")
    if Ef.shape[1] == 1:
        e = Ef[:, 0]
        f = frames[:, :, 0]
        resid = f - np.outer(f @ e, e)
        return np.clip(np.linalg.norm(resid, axis=1), 0.0, 1.0)
    resid = frames - Ef @ np.einsum("ik,mil->mkl", Ef, frames)
    return np.clip(np.linalg.svd(resid, compute_uv=False)[:, 0], 0.0, 1.0)


def distance_many(E, frames, metric: Metric = "d") -> np.ndarray:
    s = sigma_inf_many(E, frames)
    return _d_from_sigma(s) if metric == "d" else s


def _exp_jacobian(s: np.ndarray, n: int, k: int) -> float:
    """Riemannian volume density of the exponential map relative to Lebesgue
    on the tangent block, as a function of the block's singular values."""
    p = len(s)
    m = abs(n - 2 * k)
    val = 1.0
    for i in range(p):
        val *= np.sinc(s[i] / np.pi) ** m
        for j in range(i + 1, p):
            val *= np.sinc((s[i] - s[j]) / np.pi) * np.sinc((s[i] + s[j]) / np.pi)
    return float(val)


def geodesic_point(E: Subspace, X: np.ndarray, complement: Subspace | None = None) -> Subspace:
    """Endpoint of the geodesic from E with tangent block X ((n-k) x k)."""
    comp = complement if complement is not None else E.complement()
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    V = Vt.T
    inner = V @ np.diag(np.cos(S)) @ Vt + (np.eye(E.k) - V @ Vt)
    frame = E.frame @ inner + comp.frame @ (U @ np.diag(np.sin(S)) @ Vt)
    return Subspace(E.n, E.k, _orthonormalize(frame))


def ball_sample(E: Subspace, delta: float, metric: Metric, rng, max_tries: int = 100000) -> Subspace:
    """A point F with metric(E, F) <= delta, distributed as Haar restricted to the ball.

    Proposal: Gaussian tangent direction scaled to radius
    ``R * u^(1/(k(n-k)))`` (uniform in a Frobenius ball containing the
    metric ball); rejected when the largest principal angle exceeds the
    metric radius, then thinned by the exponential-map Jacobian.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not 0 < delta <= diameter(metric) + 1e-12:
        raise ValueError(f"delta must lie in (0, {diameter(metric)}], got {delta}")
    rng = make_rng(rng)
    n, k = E.n, E.k
    dim = k * (n - k)
    p = min(k, n - k)
    tmax = _radius_to_angle(delta, metric)
    R = math.sqrt(p) * tmax
    comp = E.complement()
    for _ in range(max_tries):
        Z = rng.standard_normal((n - k, k))
        Z /= np.linalg.norm(Z)
        r = R * rng.uniform() ** (1.0 / dim)
        s = np.linalg.svd(r * Z, compute_uv=False)
        if s[0] > tmax:
            continue
        if rng.uniform() > _exp_jacobian(s, n, k):
            continue
        F = geodesic_point(E, r * Z, comp)
        # guard against roundoff at the boundary
        if distance(E, F, metric) <= delta:
            return F
    raise RuntimeError("ball_sample: rejection budget exhausted")


def ball_measure_estimate(E: Subspace, delta: float, metric: Metric, N: int, rng) -> EstimateWithCI:
    """Haar measure of the closed metric ball B(E, delta)."""
    if N < 1000:
        raise ValueError("N must be at least 1000")
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = make_rng(rng)
    seed = seed_of(rng)
    hits = 0
    done = 0
    chunk = 20000
    while done < N:
        m = min(chunk, N - done)
        frames = haar_frames(E.n, E.k, m, rng)
        hits += int(np.count_nonzero(distance_many(E, frames, metric) <= delta))
        done += m
    p = hits / N
    return EstimateWithCI(p, binomial_se(p, N), N, seed, f"haar-fraction[{metric}]",
                          extra={"hits": hits, "delta": delta})


def estimate_diameter(n: int, k: int, metric: Metric, pairs: int, rng) -> float:
    rng = make_rng(rng)
    A = haar_frames(n, k, pairs, rng)
    B = haar_frames(n, k, pairs, rng)
    resid = B - A @ np.einsum("mik,mil->mkl", A, B)
    s = np.clip(np.linalg.svd(resid, compute_uv=False)[:, 0], 0.0, 1.0)
    vals = _d_from_sigma(s) if metric == "d" else s
    return float(vals.max())


def packing_number_estimate(n: int, k: int, eps: float, metric: Metric, budget: int, rng,
                            diameter_pairs: int = 2000, return_points: bool = False):
    """Size of a greedy eps-separated set among ``budget`` Haar samples.

    Distances are divided by an empirical diameter so the space has
    diameter (about) one.  Always at least 1.
    """
    _check_nk(n, k)
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = make_rng(rng)
    diam = estimate_diameter(n, k, metric, diameter_pairs, rng)
    frames = haar_frames(n, k, max(int(budget), 1), rng)
    chosen = [frames[0]]
    if eps < 1:
        stack = np.empty((len(frames), n, k))
        stack[0] = frames[0]
        m = 1
        for F in frames[1:]:
            dist = distance_many(F, stack[:m], metric) / diam
            if np.all(dist >= eps):
                stack[m] = F
                m += 1
        chosen = list(stack[:m])
    if return_points:
        return len(chosen), diam, np.array(chosen)
    return len(chosen)


def rotation_mapping(E: Subspace, F: Subspace) -> Rotation:
    """An orthogonal U with U(E) = F and ``||I - U||_op = metric_d(E, F)``.

    U rotates each principal plane span(x_i, y_i) by its principal angle and
    fixes the orthogonal complement of those planes.
    """
    _check_pair(E, F)
    Uc, c, Vt = np.linalg.svd(E.frame.T @ F.frame)
    X = E.frame @ Uc
    Y = F.frame @ Vt.T
    M = np.eye(E.n)
    for i in range(E.k):
        x, y = X[:, i], Y[:, i]
        cos = float(x @ y)
        w = y - cos * x
        sin = float(np.linalg.norm(w))
        if sin < 1e-15:
            continue
        w = w / sin
        # renormalize (cos, sin) so the plane rotation stays exactly orthogonal
        h = math.hypot(cos, sin)
        cos, sin = cos / h, sin / h
        M += (cos - 1.0) * (np.outer(x, x) + np.outer(w, w)) + sin * (np.outer(w, x) - np.outer(x, w))
    return Rotation(E.n, M)


def _rotation_from_params(params: np.ndarray, m: int) -> np.ndarray:
    """exp of the skew matrix with upper triangle ``params`` (closed form for m <= 3)."""
    if m == 1:
        return np.eye(1)
    if m == 2:
        c, s = math.cos(params[0]), math.sin(params[0])
        return np.array([[c, s], [-s, c]])
    S = np.zeros((m, m))
    S[np.triu_indices(m, 1)] = params
    S = S - S.T
    if m == 3:
        th = math.sqrt(0.5 * float(np.sum(S * S)))
        if th < 1e-15:
            return np.eye(3) + S
        return np.eye(3) + math.sin(th) / th * S + (1 - math.cos(th)) / th ** 2 * (S @ S)
    return expm(S)


def metric_d_bruteforce(E: Subspace, F: Subspace, rng=None, starts: int = 4) -> float:
    """inf ||I - U||_op over U in O(n) with U(E) = F, by direct minimization.

    Every such U is U0 W with U0 = [F F'][E E']^T (completions F', E' of the
    frames) and W = [E E'] diag(A, B) [E E']^T, A in O(k), B in O(n-k).  Each
    of the four determinant classes of (A, B) is searched by Nelder-Mead over
    exponential coordinates from several random starts.  Independent of the
    principal-angle closed form; meant for n <= 4.
    """
    _check_pair(E, F)
    rng = make_rng(rng)
    n, k = E.n, E.k
    BE = np.hstack([E.frame, E.complement().frame])
    BF = np.hstack([F.frame, F.complement().frame])
    U0 = BF @ BE.T
    pa, pb = k * (k - 1) // 2, (n - k) * (n - k - 1) // 2
    best = np.inf
    for sa, sb in iproduct((1.0, -1.0), repeat=2):
        Da = np.diag([sa] + [1.0] * (k - 1))
        Db = np.diag([sb] + [1.0] * (n - k - 1))

        def obj(p):
            A = _rotation_from_params(p[:pa], k) @ Da
            B = _rotation_from_params(p[pa:], n - k) @ Db
            W = BE @ block_diag(A, B) @ BE.T
            return np.linalg.norm(np.eye(n) - U0 @ W, 2)

        if pa + pb == 0:
            best = min(best, obj(np.zeros(0)))
            continue
        for _ in range(starts):
            x0 = rng.uniform(-np.pi, np.pi, pa + pb)
            res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 20000})
            res = optimize.minimize(obj, res.x, method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
            best = min(best, float(res.fun))
    return best
