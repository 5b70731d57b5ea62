"""Geometry primitives: distances, isometries, exp/log maps, Frechet means."""

import math

import numpy as np
import pytest

from geolatnet.geometry import (
    DiskPoint,
    Geometry,
    GeometryError,
    MoebiusIsometry,
    SphereIsometry,
    SpherePoint,
    apply_moebius,
    apply_sphere_isometry,
    conformal_factor,
    distance_matrix,
    exp_map,
    frechet_mean,
    hyperbolic_distance,
    log_map,
    mobius_add,
    spherical_distance,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def random_disk(rng, n, rmax=0.95):
    r = rmax * np.sqrt(rng.random(n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def random_sphere(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_moebius(rng):
    t = rng.uniform(0, 2 * np.pi)
    z0 = random_disk(rng, 1, rmax=0.8)[0]
    return MoebiusIsometry(
        beta=complex(math.cos(t), math.sin(t)),
        z0=DiskPoint(z0[0], z0[1]),
        reflect=bool(rng.random() < 0.5),
    )


def random_sphere_isometry(rng):
    a, b, c = rng.uniform(-np.pi, np.pi, 3)
    return SphereIsometry(a, b, c, reflect=bool(rng.random() < 0.5))


class TestHyperbolicDistance:
    def test_identity(self):
        assert hyperbolic_distance([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_radial_closed_form(self):
        # d(0, r) = ln((1 + r) / (1 - r))
        assert hyperbolic_distance([0, 0], [0.5, 0]) == pytest.approx(math.log(3), abs=1e-14)

    def test_frozen_oracle_value(self):
        # high-precision evaluation of the metric formula (mpmath, 30 digits)
        d = hyperbolic_distance([0.3, 0.0], [0.0, 0.4])
        assert d == pytest.approx(1.0891371665366823, abs=1e-13)

    def test_boundary_rejected(self):
        with pytest.raises(GeometryError):
            hyperbolic_distance([1.0, 0.0], [0.0, 0.0])
        with pytest.raises(GeometryError):
            hyperbolic_distance([0.2, 0.0], [0.8, 0.6001])

    def test_near_one_argument_precision(self):
        # tiny separations: arccosh argument barely above 1
        d = hyperbolic_distance([1e-9, 0.0], [0.0, 0.0])
        assert d == pytest.approx(2e-9, rel=1e-6)


class TestSphericalDistance:
    def test_identity(self):
        assert spherical_distance(E1, E1) == 0.0

    def test_orthogonal(self):
        assert spherical_distance(E1, E2) == pytest.approx(np.pi / 2, abs=1e-15)

    def test_antipodal(self):
        assert spherical_distance(E1, -E1) == pytest.approx(np.pi, abs=1e-15)

    def test_clamped_dot_never_nan(self):
        # construct vectors whose dot product exceeds 1 after rounding
        u = np.array([0.6, 0.48, 0.64])
        u = u / np.linalg.norm(u)
        assert np.isfinite(spherical_distance(u, u.copy()))
        almost = SpherePoint(u * (1 + 1e-13))
        assert np.isfinite(spherical_distance(u, almost))


class TestMetricAxioms:
    N_SAMPLES = 1000

    @pytest.mark.parametrize("geometry", [Geometry.HYPERBOLIC, Geometry.SPHERICAL])
    def test_axioms_on_random_pairs(self, geometry):
        rng = np.random.default_rng(7)
        if geometry is Geometry.HYPERBOLIC:
            a, b, c = (random_disk(rng, self.N_SAMPLES) for _ in range(3))
        else:
            a, b, c = (random_sphere(rng, self.N_SAMPLES) for _ in range(3))
        dab = geometry.distance(a, b)
        dba = geometry.distance(b, a)
        dac = geometry.distance(a, c)
        dcb = geometry.distance(c, b)
        assert np.all(dab >= 0)
        assert np.allclose(dab, dba, atol=1e-12)
        # triangle inequality with 1e-10 numerical slack
        assert np.all(dab <= dac + dcb + 1e-10)
        # identity of indiscernibles
        assert np.all(geometry.distance(a, a.copy()) < 1e-12)
        assert np.all(dab[np.max(np.abs(a - b), axis=-1) > 1e-3] > 1e-12)


class TestMoebius:
    def test_identity_isometry(self):
        iso = MoebiusIsometry(1.0 + 0j, DiskPoint(0.0, 0.0))
        out = apply_moebius(iso, [0.2, 0.3])
        assert np.allclose(out, [0.2, 0.3], atol=1e-15)

    def test_maps_center_to_origin(self):
        iso = MoebiusIsometry(1.0 + 0j, DiskPoint(0.2, 0.3))
        out = apply_moebius(iso, [0.2, 0.3])
        assert np.linalg.norm(out) < 1e-12

    def test_beta_modulus_validated(self):
        with pytest.raises(GeometryError):
            MoebiusIsometry(1.5 + 0j, DiskPoint(0.0, 0.0))

    def test_distance_preserved_random(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            iso = random_moebius(rng)
            a, b = random_disk(rng, 2)
            d0 = hyperbolic_distance(a, b)
            d1 = hyperbolic_distance(apply_moebius(iso, a), apply_moebius(iso, b))
            assert d1 == pytest.approx(d0, abs=1e-10)


class TestSphereIsometry:
    def test_identity(self):
        iso = SphereIsometry(0.0, 0.0, 0.0)
        u = random_sphere(np.random.default_rng(0), 1)[0]
        assert np.allclose(apply_sphere_isometry(iso, u), u, atol=1e-15)

    def test_quarter_turn_about_axis3(self):
        iso = SphereIsometry(0.0, 0.0, np.pi / 2)
        assert np.allclose(apply_sphere_isometry(iso, E1), E2, atol=1e-15)

    def test_matrix_orthogonal(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = random_sphere_isometry(rng).matrix()
            assert np.allclose(m @ m.T, np.eye(3), atol=1e-10)
            assert abs(abs(np.linalg.det(m)) - 1.0) < 1e-10

    def test_distance_preserved_random(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            iso = random_sphere_isometry(rng)
            a, b = random_sphere(rng, 2)
            d0 = spherical_distance(a, b)
            d1 = spherical_distance(apply_sphere_isometry(iso, a), apply_sphere_isometry(iso, b))
            assert d1 == pytest.approx(d0, abs=1e-10)


class TestMobiusAdd:
    def test_zero_left_identity(self):
        y = np.array([0.3, -0.2])
        assert np.allclose(mobius_add([0.0, 0.0], y), y, atol=1e-15)

    def test_inverse(self):
        x = np.array([0.4, 0.1])
        assert np.allclose(mobius_add(x, -x), [0.0, 0.0], atol=1e-15)

    def test_gyrodistance_identity(self):
        # d(x, y) = 2 artanh ||(-x) (+) y||, checked against the metric
        rng = np.random.default_rng(17)
        x, y = random_disk(rng, 2)
        w = mobius_add(-x, y)
        assert 2 * np.arctanh(np.linalg.norm(w)) == pytest.approx(
            hyperbolic_distance(x, y), abs=1e-12
        )


class TestExpLog:
    def test_exp_of_zero_is_mu(self):
        mu = np.array([0.3, 0.2])
        assert np.all(exp_map(mu, [0.0, 0.0]) == mu)

    def test_log_norm_is_distance(self):
        # Riemannian tangent length lambda_mu ||v|| equals the geodesic distance
        rng = np.random.default_rng(19)
        mu = random_disk(rng, 200, rmax=0.9)
        z = random_disk(rng, 200, rmax=0.9)
        v = log_map(mu, z)
        riem = conformal_factor(mu) * np.linalg.norm(v, axis=-1)
        assert np.allclose(riem, hyperbolic_distance(mu, z), atol=1e-9)

    def test_round_trip(self):
        rng = np.random.default_rng(23)
        mu = random_disk(rng, 200, rmax=0.9)
        z = random_disk(rng, 200, rmax=0.9)
        back = exp_map(mu, log_map(mu, z))
        assert np.allclose(back, z, atol=1e-9)

    def test_round_trip_tangent(self):
        rng = np.random.default_rng(29)
        mu = random_disk(rng, 100, rmax=0.9)
        v = 0.5 * rng.standard_normal((100, 2))
        assert np.allclose(log_map(mu, exp_map(mu, v)), v, atol=1e-9)


class TestFrechetMean:
    def test_single_point(self):
        res = frechet_mean(np.array([[0.2, 0.1]]), Geometry.HYPERBOLIC)
        assert np.allclose(res.point, [0.2, 0.1])
        assert res.converged

    def test_sphere_two_point_midpoint(self):
        res = frechet_mean(np.stack([E1, E2]), Geometry.SPHERICAL)
        assert np.allclose(res.point, np.array([1.0, 1.0, 0.0]) / np.sqrt(2), atol=1e-8)

    @pytest.mark.parametrize("geometry", [Geometry.HYPERBOLIC, Geometry.SPHERICAL])
    def test_minimality_spot_check(self, geometry):
        rng = np.random.default_rng(31)
        if geometry is Geometry.HYPERBOLIC:
            pts = random_disk(rng, 20, rmax=0.7)
        else:
            pts = random_sphere(rng, 20)
        res = frechet_mean(pts, geometry)
        assert res.converged
        objective = lambda m: np.sum(geometry.distance(m[None, :], pts) ** 2)
        best = objective(res.point)
        for p in pts:
            assert best <= objective(p) + 1e-9


class TestPointTypes:
    def test_disk_point_invariant(self):
        with pytest.raises(GeometryError):
            DiskPoint(0.8, 0.61)
        p = DiskPoint(0.3, -0.4)
        assert np.allclose(np.asarray(p), [0.3, -0.4])
        assert p.as_complex() == complex(0.3, -0.4)

    def test_sphere_point_renormalizes(self):
        p = SpherePoint(np.array([0.0, 0.0, 2.0]))
        assert np.allclose(p.v, E3)
        with pytest.raises(GeometryError):
            SpherePoint(np.zeros(3))

    def test_distance_matrix_shapes(self):
        rng = np.random.default_rng(37)
        z = random_disk(rng, 5)
        m = distance_matrix(z, Geometry.HYPERBOLIC)
        assert m.shape == (5, 5)
        assert np.allclose(m, m.T, atol=1e-12)
        assert np.all(np.diag(m) < 1e-12)
