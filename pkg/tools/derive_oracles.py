"""Reference values for the test suite, computed without importing lcmarg.

Run ``python tools/derive_oracles.py`` and paste the output into
tests/oracle_values.py when a value needs regenerating.
"""
import mpmath as mp
import numpy as np

mp.mp.dps = 30
A = mp.sqrt(3)  # half-width of the variance-one uniform law


def uniform_pdf(x):
    return 1 / (2 * A) if abs(x) <= A else 0


def diagonal_cube2_density_at_zero():
    # X = (U1 + U2)/sqrt(2); f_X(0) = sqrt(2) * int f_U(u) f_U(-u) du
    return mp.sqrt(2) * mp.quad(lambda u: uniform_pdf(u) * uniform_pdf(-u), [-A, A])


def diagonal_cube2_mean_abs():
    # density of S = U1 + U2 by convolution, then E|S|/sqrt(2)
    def f_sum(s):
        lo, hi = max(-A, s - A), min(A, s + A)
        return mp.quad(lambda u: uniform_pdf(u) * uniform_pdf(s - u), [lo, hi]) if lo < hi else 0
    return 2 * mp.quad(lambda s: s * f_sum(s), [0, 2 * A]) / mp.sqrt(2)


def chi_pdf(r, n):
    return r ** (n - 1) * mp.exp(-r * r / 2) / (2 ** (n / 2 - 1) * mp.gamma(mp.mpf(n) / 2))


def chi_power_mean(n, q):
    m = mp.quad(lambda r: r ** q * chi_pdf(r, n), [0, 1, mp.inf])
    return m ** (1 / mp.mpf(q))


def q_minus_c(n, delta):
    thr = chi_power_mean(n, 2) / delta
    cap = mp.mpf(n - 1) / 2
    g = lambda p: chi_power_mean(n, -p) - thr
    if g(cap) >= 0:
        return cap
    return mp.findroot(g, (mp.mpf("0.01"), cap), solver="bisect")


def min_rotation_distance_lines(angle):
    # U in O(2) with U(span e1) = span(cos a, sin a): rotations by a and a+pi,
    # reflections across the lines at angles a/2 and (a+pi)/2
    best = np.inf
    for phi in (angle, angle + np.pi):
        c, s = np.cos(phi), np.sin(phi)
        for U in (np.array([[c, -s], [s, c]]), np.array([[c, s], [s, -c]])):
            best = min(best, np.linalg.norm(np.eye(2) - U, 2))
    return best


def hull_area(points):
    from scipy.spatial import ConvexHull
    return ConvexHull(points).volume


def cube3_shadow_and_section():
    n = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
    B = np.linalg.svd(np.eye(3) - np.outer(n, n))[0][:, :2]
    V = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
    shadow = hull_area(V @ B)
    # section: intersect each cube edge with the plane x+y+z = 0
    pts = []
    for v in V:
        for i in range(3):
            w = v.copy()
            w[i] = -w[i]
            a, b = v @ n, w @ n
            if a * b < 0:
                pts.append(v + (w - v) * a / (a - b))
    section = hull_area(np.array(pts) @ B)
    return shadow, section


if __name__ == "__main__":
    f0 = diagonal_cube2_density_at_zero()
    mabs = diagonal_cube2_mean_abs()
    shadow, section = cube3_shadow_and_section()
    values = {
        "D_LINES_PI_6": min_rotation_distance_lines(np.pi / 6),
        "D_LINES_ORTHOGONAL": min_rotation_distance_lines(np.pi / 2),
        "CUBE2_DIAGONAL_F0": f0,
        "CUBE2_DIAGONAL_L_DENSITY": f0,  # the diagonal marginal has variance one
        "CUBE2_DIAGONAL_L_VOLUMETRIC": 1 / (2 * mabs),
        "GAUSS_ZQ_RADIUS_1": mp.quad(lambda x: abs(x) * mp.npdf(x), [-mp.inf, 0, mp.inf]),
        "GAUSS_ZQ_RADIUS_4": mp.quad(lambda x: x ** 4 * mp.npdf(x), [-mp.inf, 0, mp.inf]) ** mp.mpf("0.25"),
        "GAUSS1_L_VOLUMETRIC": 1 / (2 * mp.quad(lambda x: abs(x) * mp.npdf(x), [-mp.inf, 0, mp.inf])),
        "GAUSS2_L_VOLUMETRIC": 1 / mp.sqrt(mp.pi),
        "GAUSS4_I_MINUS_1": chi_power_mean(4, -1),
        "GAUSS8_Q_MINUS_C_DELTA_2": q_minus_c(8, 2),
        "GAUSS8_Q_MINUS_C_DELTA_1_2": q_minus_c(8, mp.mpf("1.2")),
        "CUBE3_SHADOW_AREA": shadow,
        "CUBE3_SECTION_AREA": section,
    }
    for k, v in values.items():
        print(f"{k} = {float(v)!r}")
