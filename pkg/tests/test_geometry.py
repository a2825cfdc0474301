import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcmarg.geometry import (
    ConvexBody, ZqBody, ball_body, box_body, cross_polytope_body, cube_body, geometric_distance_to_ball,
    linear_image, project_body, radial_volume, radii, rogers_shephard_check, scale_body, section_body,
    sphere_directions, vertices_from_halfspaces, volume_exact, volume_one_ball, volume_sandwich, zq_support,
)
from lcmarg.grassmann import Subspace, haar_sample
from lcmarg.measures import builtin

from oracle_values import CUBE3_SECTION_AREA, CUBE3_SHADOW_AREA, GAUSS_ZQ_RADIUS_1, GAUSS_ZQ_RADIUS_4

NORMAL_111 = Subspace.from_basis([[1.0], [1.0], [1.0]])


class TestBodies:
    def test_cube_support(self):
        K = cube_body(3, 2.0)
        assert K.support(np.array([1.0, -1.0, 0.5])) == pytest.approx(5.0)

    def test_contact_attains_support(self):
        K = cross_polytope_body(4)
        U = sphere_directions(4, 30, 0)
        C = K.contact(U)
        assert np.allclose(np.einsum("ij,ij->i", C, U), K.support(U))

    def test_linear_image_support(self):
        A = np.array([[2.0, 1.0], [0.0, 1.0]])
        K = linear_image(cube_body(2), A)
        u = np.array([0.6, 0.8])
        assert K.support(u) == pytest.approx(cube_body(2).support(A.T @ u))

    def test_vertices_from_halfspaces(self):
        A = np.vstack([np.eye(2), -np.eye(2)])
        V = vertices_from_halfspaces(A, np.ones(4))
        assert sorted(map(tuple, np.round(V, 12))) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_volume_one_ball(self, n):
        assert volume_exact(volume_one_ball(n), max_dim=8) == pytest.approx(1.0)


class TestProjectionsAndSections:
    def test_square_onto_diagonal(self):
        P = project_body(cube_body(2), Subspace.from_basis([[1.0], [1.0]]))
        assert volume_exact(P) == pytest.approx(2 * math.sqrt(2))

    def test_cube_shadow_hexagon(self):
        assert volume_exact(project_body(cube_body(3), NORMAL_111.complement())) == pytest.approx(CUBE3_SHADOW_AREA)

    def test_cube_section_hexagon(self):
        S = section_body(cube_body(3), NORMAL_111.complement())
        assert volume_exact(S) == pytest.approx(CUBE3_SECTION_AREA)
        V = S.vertices if S.vertices is not None else vertices_from_halfspaces(*S.halfspaces)
        assert len(V) == 6

    @pytest.mark.parametrize("seed", range(4))
    def test_section_inside_projection(self, seed):
        F = haar_sample(4, 2, seed)
        K = cube_body(4)
        assert volume_exact(section_body(K, F)) <= volume_exact(project_body(K, F)) + 1e-12


class TestVolumes:
    def test_ball_bracket(self):
        b = volume_sandwich(ball_body(3, exact=False), M=500, rng=0)
        assert b.contains(4 * math.pi / 3)
        assert b.rel_width < 0.10

    def test_refinement_shrinks(self):
        widths = [volume_sandwich(ball_body(3, exact=False), M=M, rng=0).rel_width for M in (50, 200, 800)]
        assert widths[0] > widths[1] > widths[2]

    def test_support_only_square(self):
        K = ConvexBody(2, support=lambda U: np.abs(U).sum(-1))
        assert volume_sandwich(K, M=300, rng=0).contains(4.0)

    @pytest.mark.parametrize("n", [5, 6])
    def test_radial_ball(self, n):
        b = radial_volume(ball_body(n, exact=False), M=200, rng=1)
        assert b.mid == pytest.approx(math.pi ** (n / 2) / math.gamma(n / 2 + 1), rel=1e-6)

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_exact_cube(self, n):
        assert volume_exact(cube_body(n), max_dim=8) == pytest.approx(2.0 ** n)

    def test_cross_polytope(self):
        assert volume_exact(cross_polytope_body(3)) == pytest.approx(8 / 6)


class TestRadii:
    def test_box(self):
        R, r = radii(box_body([2.0, 1.0]))
        assert (R, r) == pytest.approx((math.sqrt(5), 1.0))

    @pytest.mark.parametrize("n", [2, 4])
    def test_cube_distance_to_ball(self, n):
        assert geometric_distance_to_ball(cube_body(n)) == pytest.approx(math.sqrt(n))


class TestRogersShephard:
    def test_ball(self):
        rep = rogers_shephard_check(ball_body(4), Subspace.coordinate(4, [0, 1]))
        assert rep["rogers_shephard"] and rep["fubini"]

    @pytest.mark.parametrize("seed", range(5))
    def test_cube4(self, seed):
        rep = rogers_shephard_check(cube_body(4), haar_sample(4, 2, seed))
        assert rep["rogers_shephard"] and rep["fubini"]


class TestCentroidBodies:
    @pytest.mark.parametrize("q,radius", [(1, GAUSS_ZQ_RADIUS_1), (4, GAUSS_ZQ_RADIUS_4)])
    def test_gaussian_radius(self, q, radius):
        est = zq_support(builtin("gaussian", 3), q, np.array([0.0, 0.6, 0.8]), 200_000, 1)
        assert abs(est.value - radius) <= 4 * est.stderr

    def test_gaussian_is_round(self):
        Z = ZqBody(builtin("gaussian", 4), 2, 100_000, 2)
        U = sphere_directions(4, 40, 3, extras=False)
        assert np.all(np.abs(Z.support(U) - 1) <= 4 * Z.stderr(U))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.2, max_value=5.0))
    def test_homogeneous(self, lam):
        Z = ZqBody(builtin("cube", 3), 2, 20_000, 4)
        u = np.array([0.3, -0.4, 0.866])
        u /= np.linalg.norm(u)
        assert Z.support(lam * u) == pytest.approx(lam * Z.support(u), rel=1e-10)

    def test_shared_batch_monotone_in_q(self):
        Z1 = ZqBody(builtin("laplace_product", 3), 1, 50_000, 5)
        Z4 = Z1.with_q(4)
        U = sphere_directions(3, 20, 6, extras=False)
        assert np.all(Z1.support(U) <= Z4.support(U) + 1e-12)

    def test_contact_is_support_gradient(self):
        Z = ZqBody(builtin("cube", 3), 2, 20_000, 7)
        u = np.array([0.48, 0.6, 0.64])
        eps = 1e-6
        grad = np.array([(Z.support(u + eps * e) - Z.support(u - eps * e)) / (2 * eps) for e in np.eye(3)])
        assert np.allclose(Z.contact(u[None])[0], grad, atol=1e-5)

    def test_scale_body(self):
        K = scale_body(cube_body(2), 0.5)
        assert volume_exact(K) == pytest.approx(1.0)
