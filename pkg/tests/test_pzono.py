import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ila.errors import InvalidInputError
from ila.pzono import (
    PZonotope,
    WeightVector,
    Zonotope,
    confidence_cut,
    coverage_multiplier,
    density_sup,
    enclose_union,
    fault_status_point,
    from_bounds,
    linear_map,
    minkowski_sum,
    translate,
    zonotope_size,
)


def random_pzonotope(rng, n, e_max=4, scale=1.0):
    e = int(rng.integers(1, e_max + 1))
    gens = rng.normal(size=(n, e)) * scale
    a = rng.normal(size=(n, n)) * (0.6 * scale)
    sigma = a @ a.T / n
    c = rng.normal(size=n) * scale
    return PZonotope(c, gens, sigma)


def sample_from(rng, p, count):
    """Zonotope coefficients uniform in [-1,1]^e plus a Gaussian covariance draw."""
    beta = rng.uniform(-1.0, 1.0, size=(count, p.generators.shape[1]))
    pts = p.center + beta @ p.generators.T
    evals, vecs = np.linalg.eigh(p.covariance)
    root = (vecs * np.sqrt(np.clip(evals, 0, None))) @ vecs.T
    return pts + rng.normal(size=(count, p.dim)) @ root.T


def in_zonotope_box(z, pts):
    r = z.axis_radii()
    return (np.abs(pts - z.center) <= r + 1e-12).all(axis=1)


class TestTypes:
    def test_psd_rejected(self):
        with pytest.raises(InvalidInputError):
            PZonotope([0.0, 0.0], np.zeros((2, 0)), [[1.0, 2.0], [2.0, 1.0]])

    def test_dimension_checks(self):
        with pytest.raises(InvalidInputError):
            PZonotope([0.0], np.zeros((2, 1)), [[1.0]])

    def test_weightvector_invariants(self):
        with pytest.raises(InvalidInputError):
            WeightVector([0.5, 0.6])
        with pytest.raises(InvalidInputError):
            WeightVector([-0.5, 1.5])
        w = WeightVector.uniform(7)
        assert abs(w.weights.sum() - 1.0) < 1e-12

    def test_immutability(self):
        p = PZonotope([1.0], [[2.0]], [[1.0]])
        with pytest.raises(ValueError):
            p.center[0] = 5.0

    def test_json_roundtrip(self):
        p = PZonotope([1.0, 2.0], [[1.0, 0.0], [0.0, 2.0]], np.eye(2))
        q = PZonotope.from_dict(p.to_dict())
        assert np.array_equal(p.center, q.center)
        assert np.array_equal(p.generators, q.generators)
        assert np.array_equal(p.covariance, q.covariance)


class TestFromBounds:
    def test_worked_example(self):
        p = from_bounds([[-5, 5], [-10, 10]], [[0, 2], [0, 3]], 3.0)
        assert np.allclose(p.center, [0, 0])
        assert np.allclose(p.generators, np.diag([5.0, 10.0]))
        assert np.allclose(p.covariance, np.diag([6.0, 9.0]))

    def test_degenerate_point(self):
        p = from_bounds([[0, 0]], [0.0], 3.0)
        assert p.generators.shape == (1, 0)
        assert np.allclose(p.covariance, 0.0)
        assert np.allclose(p.center, 0.0)

    def test_midpoint_halfwidth(self):
        p = from_bounds([[2, 4]], [1.0], 3.0)
        assert np.allclose(p.center, [3.0])
        assert np.allclose(p.generators, [[1.0]])
        assert np.allclose(p.covariance, [[3.0]])

    def test_inverted_interval(self):
        with pytest.raises(InvalidInputError):
            from_bounds([[5, -5]], [1.0], 3.0)


class TestClosedForms:
    def test_minkowski_1d(self):
        a = PZonotope([1.0], [[2.0]], [[4.0]])
        b = PZonotope([-1.0], [[1.0]], [[1.0]])
        s = minkowski_sum(a, b)
        assert np.allclose(s.center, [0.0])
        assert np.allclose(s.generators, [[2.0, 1.0]])
        assert np.allclose(s.covariance, [[5.0]])

    def test_minkowski_identity(self):
        a = PZonotope([1.0, 2.0], [[1.0], [0.5]], np.eye(2))
        zero = PZonotope.point([0.0, 0.0])
        s = minkowski_sum(a, zero)
        assert np.allclose(s.center, a.center)
        assert np.allclose(s.generators, a.generators)
        assert np.allclose(s.covariance, a.covariance)

    def test_minkowski_2d(self):
        a = PZonotope([0.0, 0.0], np.diag([1.0, 1.0]), np.eye(2))
        b = PZonotope([1.0, 1.0], np.diag([2.0, 2.0]), 2 * np.eye(2))
        s = minkowski_sum(a, b)
        assert np.allclose(s.center, [1.0, 1.0])
        assert np.allclose(s.generators, np.hstack([np.diag([1.0, 1.0]), np.diag([2.0, 2.0])]))
        assert np.allclose(s.covariance, 3 * np.eye(2))

    def test_linear_map_scalar(self):
        p = PZonotope([1.0, -1.0], [[1.0, 0.0], [0.0, 2.0]], np.eye(2))
        out = linear_map(2 * np.eye(2), p)
        assert np.allclose(out.center, 2 * p.center)
        assert np.allclose(out.generators, 2 * p.generators)
        assert np.allclose(out.covariance, 4 * np.eye(2))

    def test_linear_map_identity(self):
        p = PZonotope([1.0], [[2.0]], [[3.0]])
        out = linear_map(np.eye(1), p)
        assert np.allclose(out.center, p.center)
        assert np.allclose(out.covariance, p.covariance)

    def test_linear_map_row(self):
        p = PZonotope([1.0, 2.0], np.diag([1.0, 1.0]), np.diag([1.0, 4.0]))
        out = linear_map(np.array([[1.0, 1.0]]), p)
        assert np.allclose(out.center, [3.0])
        assert np.allclose(out.generators, [[1.0, 1.0]])
        assert np.allclose(out.covariance, [[5.0]])

    def test_translate(self):
        p = PZonotope([0.0, 0.0], np.diag([1.0, 2.0]), np.eye(2))
        out = translate([1.0, -1.0], p)
        assert np.allclose(out.center, [1.0, -1.0])
        assert np.allclose(out.generators, p.generators)
        back = translate([-1.0, 1.0], out)
        assert np.allclose(back.center, p.center)

    def test_translate_zero(self):
        p = PZonotope([1.0], [[2.0]], [[1.0]])
        out = translate([0.0], p)
        assert np.allclose(out.center, p.center)

    def test_dimension_mismatch_errors(self):
        a = PZonotope([0.0], [[1.0]], [[1.0]])
        b = PZonotope([0.0, 0.0], np.zeros((2, 0)), np.eye(2))
        with pytest.raises(InvalidInputError):
            minkowski_sum(a, b)
        with pytest.raises(InvalidInputError):
            linear_map(np.eye(2), a)
        with pytest.raises(InvalidInputError):
            translate([0.0, 0.0], a)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_linear_map_composition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        p = random_pzonotope(rng, n)
        a = rng.normal(size=(int(rng.integers(1, 5)), n))
        b = rng.normal(size=(n, n))
        lhs = linear_map(a, linear_map(b, p))
        rhs = linear_map(a @ b, p)
        assert np.allclose(lhs.center, rhs.center, atol=1e-12)
        assert np.allclose(lhs.generators, rhs.generators, atol=1e-12)
        assert np.allclose(lhs.covariance, rhs.covariance, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_minkowski_commutes_in_moments(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        a = random_pzonotope(rng, n)
        b = random_pzonotope(rng, n)
        ab = minkowski_sum(a, b)
        ba = minkowski_sum(b, a)
        assert np.allclose(ab.center, ba.center)
        assert np.allclose(ab.covariance, ba.covariance)
        assert np.allclose(np.sort((ab.generators**2).sum(0)), np.sort((ba.generators**2).sum(0)))


class TestEncloseUnion:
    def test_single_member_contains_itself(self):
        rng = np.random.default_rng(7)
        p = random_pzonotope(rng, 2)
        out = enclose_union([p])
        cut_in = confidence_cut(p, 0.95)
        cut_out = confidence_cut(out, 0.95)
        # axis-aligned loosening: bounding box of the inner cut fits the outer cut
        assert (cut_in.axis_radii() + np.abs(cut_in.center - cut_out.center) <= cut_out.axis_radii() + 1e-9).all()

    def test_1d_hand_example(self):
        a = PZonotope([-2.0], [[1.0]], [[0.25]])
        b = PZonotope([2.0], [[1.0]], [[0.25]])
        out = enclose_union([a, b])
        assert np.allclose(out.center, [0.0])
        assert np.allclose(out.generators, [[3.0]])
        assert np.allclose(out.covariance, [[0.25]])

    def test_monte_carlo_containment_2d(self):
        rng = np.random.default_rng(11)
        members = [random_pzonotope(rng, 2, scale=2.0) for _ in range(3)]
        out = enclose_union(members)
        cut = confidence_cut(out, 0.95)
        for m in members:
            pts = sample_from(rng, m, 10_000)
            frac = in_zonotope_box(cut, pts).mean()
            assert frac >= 0.95 - 3 * np.sqrt(0.95 * 0.05 / 10_000)

    def test_empty_list_rejected(self):
        with pytest.raises(InvalidInputError):
            enclose_union([])


class TestConfidenceCut:
    def test_zero_covariance_passthrough(self):
        p = PZonotope([1.0], [[2.0]], [[0.0]])
        z = confidence_cut(p, 0.5)
        assert np.allclose(z.generators, [[2.0]])

    def test_three_sigma(self):
        z = confidence_cut(PZonotope([0.0], [[2.0]], [[1.0]]), 0.9973)
        m = coverage_multiplier(0.9973)
        assert abs(m - 3.0) < 1e-3
        assert abs(z.axis_radii()[0] - (2.0 + m)) < 1e-12  # covers about [-5, 5]

    def test_one_sigma(self):
        z = confidence_cut(PZonotope([0.0], np.zeros((1, 0)), [[1.0]]), 0.6827)
        assert abs(z.axis_radii()[0] - 1.0) < 1e-3

    def test_multiplier_inverts(self):
        for gamma in (0.68269, 0.95450, 0.99730):
            m = coverage_multiplier(gamma)
            from scipy.special import erf

            assert abs(erf(m / np.sqrt(2)) - gamma) < 1e-9

    def test_gamma_range_errors(self):
        p = PZonotope([0.0], [[1.0]], [[1.0]])
        with pytest.raises(InvalidInputError):
            confidence_cut(p, 0.0)
        with pytest.raises(InvalidInputError):
            confidence_cut(p, 1.0)


class TestZonotopeSize:
    def test_point_set(self):
        z = Zonotope([0.0, 0.0], np.zeros((2, 0)))
        assert zonotope_size(z, WeightVector.uniform(2)) == 0.0

    def test_hand_example(self):
        z = Zonotope([0.0, 0.0], np.diag([2.0, 3.0]))
        assert abs(zonotope_size(z, WeightVector([0.5, 0.5])) - 6.5) < 1e-12

    def test_uniform_row_norms(self):
        rng = np.random.default_rng(3)
        g = np.linalg.qr(rng.normal(size=(3, 3)))[0] * 2.0
        z = Zonotope(np.zeros(3), g)
        expect = (g**2).sum(axis=1).mean()
        assert abs(zonotope_size(z, WeightVector.uniform(3)) - expect) < 1e-12

    def test_sign_and_permutation_invariance(self):
        rng = np.random.default_rng(4)
        g = rng.normal(size=(3, 4))
        z1 = Zonotope(np.zeros(3), g)
        z2 = Zonotope(np.zeros(3), -g[:, ::-1])
        w = WeightVector([0.2, 0.3, 0.5])
        assert abs(zonotope_size(z1, w) - zonotope_size(z2, w)) < 1e-12

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(5)
        p = random_pzonotope(rng, 3)
        w = WeightVector.uniform(3)
        z1 = confidence_cut(p, 0.9)
        z2 = confidence_cut(linear_map(2.0 * np.eye(3), p), 0.9)
        assert abs(zonotope_size(z2, w) - 4.0 * zonotope_size(z1, w)) < 1e-9


class TestDensity:
    def test_mode_at_center(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert abs(density_sup(p, [0.0]) - 0.3989422804) < 1e-6

    def test_inside_hull(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert abs(density_sup(p, [2.0]) - 0.3989422804) < 1e-6

    def test_outside_hull(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert abs(density_sup(p, [3.0]) - 0.2419707245) < 1e-6

    def test_fault_status_center(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert fault_status_point(p, [0.0]) == 0.0

    def test_fault_status_one_sigma_out(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert abs(fault_status_point(p, [3.0]) - (1 - np.exp(-0.5))) < 1e-9

    def test_fault_status_far_out(self):
        p = PZonotope([0.0], [[2.0]], [[1.0]])
        assert abs(fault_status_point(p, [10.0]) - 1.0) < 1e-12

    def test_fault_status_matches_density_ratio(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            p = random_pzonotope(rng, 2)
            x = rng.normal(size=2) * 3
            ratio = 1 - density_sup(p, x) / density_sup(p, p.center)
            assert abs(fault_status_point(p, x) - ratio) < 1e-8

    def test_fault_status_monotone_on_rays(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            p = random_pzonotope(rng, 2)
            direction = rng.normal(size=2)
            direction /= np.linalg.norm(direction)
            vals = [fault_status_point(p, p.center + t * direction) for t in np.linspace(0, 10, 12)]
            assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
            assert all(0.0 <= v <= 1.0 for v in vals)
