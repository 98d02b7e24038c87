from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dimprofile.errors import InvalidParameterError, ResourceLimitError
from dimprofile.kernels import (
    KernelSpec,
    angular_factor,
    assemble_matrix,
    gauss,
    kernel_of_distance,
    phi,
    phi_of_distance,
    psi,
    psi_radial,
    sphere_area,
)
from dimprofile.pointset import PointSet

pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
expo = st.floats(min_value=0.05, max_value=4.0, allow_nan=False)


def psi_cartesian(x, s, lim=14.0):
    """Planar ``int |y|^-s exp(-|x-y|^2/2) dy`` by dblquad over the four quadrants."""
    x0, x1 = x

    def f(b, a):
        return (a * a + b * b) ** (-s / 2) * math.exp(-0.5 * ((x0 - a) ** 2 + (x1 - b) ** 2))

    total = 0.0
    for sa in (1, -1):
        for sb in (1, -1):
            val, _ = integrate.dblquad(
                lambda b, a: f(sb * b, sa * a), 0, abs(x0) + lim, 0, abs(x1) + lim,
                epsabs=1e-12, epsrel=1e-10,
            )
            total += val
    return total


def test_kernel_spec_validation():
    with pytest.raises(InvalidParameterError):
        KernelSpec("riesz", 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        KernelSpec("phi", 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        KernelSpec("phi", 1.0, -1.0)


@pytest.mark.parametrize("s,expected", [(1.0, 0.5), (2.0, 0.25), (0.5, 2**-0.5)])
def test_phi_values(s, expected):
    assert phi(KernelSpec("phi", s, 1.0), [2.0]) == pytest.approx(expected, rel=1e-15)
    assert phi(KernelSpec("phi", s, 3.0), [0.0, 0.0]) == 1.0


@given(pos, pos, expo, expo)
def test_phi_monotone_in_s_and_r(d, r, s, t):
    s, t = min(s, t), max(s, t)
    assert phi_of_distance(d, s, r) >= phi_of_distance(d, t, r)
    assert phi_of_distance(d, s, 2 * r) >= phi_of_distance(d, s, r)


@given(pos, pos, expo)
def test_phi_dominates_ball_indicator(d, r, s):
    assert phi_of_distance(d, s, r) >= (1.0 if d <= r else 0.0)


def test_gauss():
    assert gauss([0.0, 0.0]) == 1.0
    assert gauss([1.0], 1.0) == pytest.approx(math.exp(-0.5))
    assert gauss([0.0, 6.0], 2.0) == pytest.approx(math.exp(-4.5))
    with pytest.raises(InvalidParameterError):
        gauss([1.0], 0.0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=3), pos)
def test_gauss_scaling_identity(x, r):
    x = np.array(x)
    assert gauss(x, r) == gauss(x / r, 1.0) or gauss(x, r) == pytest.approx(gauss(x / r), rel=1e-15)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("a", [0.0, 1e-7, 0.3, 5.0, 80.0])
def test_angular_factor_matches_direct_quadrature(n, a):
    # exp(-a) * int_{S^{n-1}} exp(a u1) du = omega_{n-2} int_0^pi exp(a(cos t - 1)) sin^{n-2} t dt
    val, _ = integrate.quad(lambda t: math.exp(a * (math.cos(t) - 1)) * math.sin(t) ** (n - 2),
                            0, math.pi, epsabs=0, epsrel=1e-13)
    assert angular_factor(a, n) == pytest.approx(sphere_area(n - 1) * val, rel=1e-9)


def test_psi_at_origin_matches_grid_oracle():
    expected = 2 * math.pi * math.sqrt(math.pi / 2)
    assert psi(KernelSpec("psi", 1.0, 1.0), [0.0, 0.0], 2) == pytest.approx(expected, rel=1e-9)
    assert psi_cartesian((0.0, 0.0), 1.0) == pytest.approx(expected, rel=1e-6)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("rho", [0.3, 1.0, 4.0])
def test_psi_matches_cartesian_oracle(s, rho):
    assert psi_radial(rho, 2, s) == pytest.approx(psi_cartesian((rho, 0.0), s), rel=1e-6)


def test_psi_in_three_dimensions_against_spherical_oracle():
    # for n=3 the angular integral is elementary: 2 pi (1 - exp(-2 a)) / a
    s, rho = 1.5, 2.0

    def f(t):
        a = rho * t
        ang = 4 * math.pi if a == 0 else 2 * math.pi * (1 - math.exp(-2 * a)) / a
        return t ** (2 - s) * math.exp(-0.5 * (rho - t) ** 2) * ang

    val, _ = integrate.quad(f, 0, rho + 40, points=[rho], epsrel=1e-12, limit=200)
    assert psi_radial(rho, 3, s) == pytest.approx(val, rel=1e-8)


@given(st.floats(0.01, 50.0), st.floats(0.05, 20.0), st.sampled_from([0.5, 1.0, 1.5]))
def test_psi_scaling_identity(rho, r, s):
    assert psi_radial(rho, 2, s, r) == pytest.approx(psi_radial(rho / r, 2, s, 1.0), rel=1e-12)


@pytest.mark.parametrize("n,s", [(2, 0.5), (2, 1.5), (3, 1.0), (3, 2.5)])
def test_psi_decays_like_riesz(n, s):
    # psi_1(x) |x|^s tends to (2 pi)^{n/2}, the Gaussian mass
    rho = np.array([10.0, 30.0, 100.0, 300.0, 1000.0])
    scaled = psi_radial(rho, n, s) * rho**s / (2 * math.pi) ** (n / 2)
    assert np.all((scaled > 0.8) & (scaled < 1.25))
    assert abs(scaled[-1] - 1) < 1e-3


def test_psi_requires_s_below_n():
    with pytest.raises(InvalidParameterError):
        psi_radial(1.0, 2, 2.0)
    with pytest.raises(InvalidParameterError):
        psi(KernelSpec("psi", 3.0, 1.0), [1.0, 0.0], 2)


def test_phi_psi_band():
    grid = np.logspace(-3, 3, 61)
    for s in (0.5, 1.0, 1.5):
        ratio = phi_of_distance(grid, s, 1.0) / psi_radial(grid, 2, s)
        assert ratio.max() / ratio.min() < 1e3


def test_assemble_small_cases():
    spec = KernelSpec("phi", 1.0, 0.5)
    assert assemble_matrix(PointSet([[3.0]]), spec).entries.tolist() == [[1.0]]
    k = assemble_matrix(PointSet([[0.0], [1.0]]), spec).entries
    assert k.tolist() == [[1.0, 0.5], [0.5, 1.0]]


@pytest.mark.parametrize("family,s", [("phi", 1.3), ("psi", 1.0)])
def test_assemble_is_exactly_symmetric(family, s):
    pts = np.random.default_rng(0).uniform(size=(100, 2))
    k = assemble_matrix(PointSet(pts), KernelSpec(family, s, 0.1)).entries
    assert np.array_equal(k, k.T)
    d = np.linalg.norm(pts[3] - pts[17])
    assert k[3, 17] == pytest.approx(kernel_of_distance(d, KernelSpec(family, s, 0.1), 2))


def test_phi_matrix_entries_in_unit_interval():
    pts = np.random.default_rng(1).normal(size=(50, 3))
    k = assemble_matrix(PointSet(pts), KernelSpec("phi", 0.7, 0.2)).entries
    assert np.all(np.diag(k) == 1.0)
    assert np.all((k > 0) & (k <= 1))


def test_psi_matrix_is_positive_definite():
    pts = np.random.default_rng(2).uniform(size=(60, 2))
    k = assemble_matrix(PointSet(pts), KernelSpec("psi", 1.0, 0.05)).entries
    assert np.linalg.eigvalsh(k).min() > 0


def test_assemble_respects_cap():
    with pytest.raises(ResourceLimitError):
        assemble_matrix(PointSet(np.zeros((10, 1)) + np.arange(10)[:, None]),
                        KernelSpec("phi", 1.0, 1.0), cap=5)
