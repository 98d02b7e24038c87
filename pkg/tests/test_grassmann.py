from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.spatial.distance import pdist

from dimprofile.capacity import DiscreteMeasure
from dimprofile.errors import InvalidParameterError
from dimprofile.grassmann import (
    Subspace,
    child_rng,
    project,
    sample_subspace,
    sample_subspaces,
    tube_probability,
    tube_probability_exact,
    verify_tube_comparability,
    weighted_projection,
)
from dimprofile.kernels import phi_of_distance
from dimprofile.pointset import PointSet

dims = st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n)))
seeds = st.integers(0, 2**32 - 1)


def first_axis_lengths(n, m, count, seed):
    return np.array([np.linalg.norm(v.basis[0]) for v in sample_subspaces(n, m, count, seed)])


@given(dims, seeds)
def test_basis_is_orthonormal(nm, seed):
    v = sample_subspace(*nm, seed)
    assert v.basis.shape == nm
    np.testing.assert_allclose(v.basis.T @ v.basis, np.eye(nm[1]), atol=1e-10)


def test_full_dimension_projection_is_isometry():
    pts = np.random.default_rng(0).normal(size=(30, 3))
    v = sample_subspace(3, 3, 1)
    proj = project(PointSet(pts), v).points
    np.testing.assert_allclose(pdist(proj), pdist(pts), rtol=1e-12)


def test_mean_squared_projection_of_axis():
    # E |pi_V e1|^2 = m/n; for a line in R^3 the squared length is Beta(1/2, 1)
    sq = first_axis_lengths(3, 1, 100_000, 11) ** 2
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(sq.mean() - 1 / 3) <= 3 * se


def test_projection_length_matches_beta_law():
    # |pi_V e1|^2 ~ Beta(m/2, (n-m)/2) under the invariant measure
    sq = first_axis_lengths(4, 2, 5000, 3) ** 2
    assert stats.kstest(sq, stats.beta(1.0, 1.0).cdf).pvalue > 1e-3


def test_distribution_is_rotation_invariant():
    rot = np.linalg.qr(np.random.default_rng(5).normal(size=(3, 3)))[0]
    vs = sample_subspaces(3, 1, 4000, 21)
    x = np.array([1.0, 0.0, 0.0])
    a = [np.linalg.norm(v.coordinates(x)) for v in vs]
    b = [np.linalg.norm(v.coordinates(rot @ np.array([0.0, 0.0, 1.0]))) for v in sample_subspaces(3, 1, 4000, 22)]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@given(dims, seeds, seeds)
def test_projection_geometry(nm, seed, pseed):
    n, m = nm
    v = sample_subspace(n, m, seed)
    pts = np.random.default_rng(pseed).normal(size=(12, n))
    proj = v.coordinates(pts)
    perp = v.perpendicular(pts)
    # non-expansive and Pythagorean
    for i in range(len(pts)):
        for j in range(i):
            assert np.linalg.norm(proj[i] - proj[j]) <= np.linalg.norm(pts[i] - pts[j]) + 1e-12
    lhs = np.sum(proj**2, axis=1) + np.sum(perp**2, axis=1)
    np.testing.assert_allclose(lhs, np.sum(pts**2, axis=1), rtol=1e-10, atol=1e-10)


@given(dims, seeds, st.floats(0.01, 10.0), st.sampled_from([0.5, 1.0, 2.0]))
def test_projected_kernel_dominates(nm, seed, r, s):
    n, m = nm
    v = sample_subspace(n, m, seed)
    x = np.random.default_rng(seed ^ 1).normal(size=n)
    assert phi_of_distance(np.linalg.norm(v.coordinates(x)), s, r) >= phi_of_distance(
        np.linalg.norm(x), s, r) - 1e-15


def test_weighted_projection_of_set_inside_v():
    basis = np.array([[1.0], [0.0]])
    v = Subspace(basis)
    e = PointSet([[0.0, 0.0], [2.0, 0.0], [-1.0, 0.0]])
    mu = DiscreteMeasure([0.2, 0.3, 0.5])
    wp = weighted_projection(e, mu, v)
    np.testing.assert_array_equal(wp.weights, mu.weights)
    assert wp.total_mass == pytest.approx(1.0)
    np.testing.assert_allclose(wp.points.ravel(), [0.0, 2.0, -1.0])


def test_weighted_projection_at_unit_distance():
    v = Subspace(np.array([[1.0], [0.0]]))
    wp = weighted_projection(PointSet([[3.0, 1.0]]), DiscreteMeasure([1.0]), v)
    assert wp.weights[0] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert wp.support().tolist() == [[3.0]]


@given(dims, seeds)
def test_weighted_projection_mass_bounds(nm, seed):
    n, m = nm
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 20))
    e = PointSet(rng.normal(size=(k, n)))
    mu = DiscreteMeasure(rng.dirichlet(np.ones(k)))
    wp = weighted_projection(e, mu, sample_subspace(n, m, seed))
    assert np.all(wp.weights <= mu.weights + 1e-15) and np.all(wp.weights >= 0)
    assert wp.total_mass <= 1 + 1e-12


def test_tube_trivial_inside_ball():
    p, se = tube_probability([0.3, 0.4], 1, 0.5, 2000, 0)
    assert (p, se) == (1.0, 0.0)


@pytest.mark.parametrize("t", [0.05, 0.3, 0.7])
def test_tube_line_in_plane(t):
    # angle between x and a uniform line is uniform on [0, pi/2]: P = (2/pi) asin(r/|x|)
    exact = 2 / math.pi * math.asin(t)
    p, se = tube_probability([1.0, 0.0], 1, t, 100_000, 7)
    assert abs(p - exact) <= 3 * se
    assert tube_probability_exact(2, 1, t) == pytest.approx(exact, rel=1e-15)


@pytest.mark.parametrize("t", [0.1, 0.5])
def test_tube_line_in_space(t):
    # |cos| of the angle to a uniform direction in R^3 is uniform on [0, 1]
    p, se = tube_probability([0.0, 2.0, 0.0], 1, 2 * t, 100_000, 8)
    assert abs(p - t) <= 3 * se


def beta_tube(n, m, t):
    # |pi_V x|^2 / |x|^2 ~ Beta(m/2, (n-m)/2)
    return 1.0 if t >= 1 else float(stats.beta(m / 2, (n - m) / 2).cdf(t * t))


@pytest.mark.parametrize("n,m", [(3, 2), (4, 2)])
def test_tube_comparability_against_beta_law(n, m):
    rep = verify_tube_comparability(n, m, [1, 3, 10], 40_000, 4)
    for row in rep.rows:
        exact = beta_tube(n, m, 1 / row["x_over_r"])
        assert abs(row["probability"] - exact) <= 4 * row["stderr"] + 1e-12
    assert 0.1 <= rep.ratio_min and rep.ratio_max <= 20
    assert not rep.flagged
    payload = json.loads(rep.to_json())
    assert payload["band"] == pytest.approx(rep.ratio_max / rep.ratio_min)


def test_tube_is_deterministic():
    a = tube_probability([1.0, 1.0, 0.0], 2, 0.5, 25_000, 3, chunk=4000)
    b = tube_probability([1.0, 1.0, 0.0], 2, 0.5, 25_000, 3, chunk=4000)
    assert a == b


def test_subspace_roundtrip_and_determinism():
    v = sample_subspace(4, 2, 17)
    w = Subspace.from_dict(json.loads(json.dumps(v.to_dict())))
    np.testing.assert_array_equal(v.basis, w.basis)
    np.testing.assert_array_equal(sample_subspace(4, 2, 17).basis, v.basis)
    a = child_rng(1, "x", 2).integers(2**32, size=4)
    assert np.array_equal(a, child_rng(1, "x", 2).integers(2**32, size=4))
    assert not np.array_equal(a, child_rng(1, "y", 2).integers(2**32, size=4))


def test_errors():
    with pytest.raises(InvalidParameterError):
        sample_subspace(2, 3, 0)
    with pytest.raises(InvalidParameterError):
        Subspace(np.array([[1.0], [1.0]]))
    with pytest.raises(InvalidParameterError):
        project(PointSet([[0.0, 1.0, 2.0]]), sample_subspace(2, 1, 0))
    with pytest.raises(InvalidParameterError):
        tube_probability([0.0, 0.0], 1, 1.0, 1000, 0)
    with pytest.raises(InvalidParameterError):
        tube_probability([1.0, 0.0], 1, 1.0, 10, 0)
    with pytest.raises(InvalidParameterError):
        tube_probability_exact(4, 2, 0.5)
    with pytest.raises(InvalidParameterError):
        verify_tube_comparability(2, 1, [0.5], 1000, 0)
    with pytest.raises(InvalidParameterError):
        weighted_projection(PointSet([[0.0, 0.0]]), DiscreteMeasure([0.5, 0.5]),
                            sample_subspace(2, 1, 0))
