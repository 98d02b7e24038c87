"""Potential kernels and pairwise kernel matrices.

Two families are provided:

``phi``
    ``min(1, (r/|x|)^s)``, the truncated Riesz kernel whose capacities define
    dimension profiles.
``psi``
    ``(|.|^{-s} * e)(x/r)`` with ``e(x) = exp(-|x|^2/2)``, a Gaussian-smoothed
    Riesz kernel comparable to ``phi`` with a positive Fourier transform
    (``c r^s |xi|^{s-n} e(r xi)``), hence positive-definite kernel matrices.
    Only defined for ``0 < s < n``.

``psi`` has no closed form; it is evaluated at unit scale by a radial
integral (the sphere-angle integral of the Gaussian is a modified Bessel
function) and rescaled, since ``psi_r(x) = psi_1(x / r)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.spatial.distance import pdist, squareform

from .errors import InvalidParameterError, NumericalError, ResourceLimitError
from .pointset import DEFAULT_POINT_CAP, PointSet

PSI_TOL = 1e-8

# Beyond this many standard deviations the Gaussian factor is below 1e-300.
_GAUSS_REACH = 40.0


@dataclass(frozen=True)
class KernelSpec:
    family: str
    s: float
    r: float

    def __post_init__(self):
        if self.family not in ("phi", "psi"):
            raise InvalidParameterError(f"unknown kernel family {self.family!r}")
        if not (self.s > 0 and math.isfinite(self.s)):
            raise InvalidParameterError(f"kernel exponent s must be positive, got {self.s}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise InvalidParameterError(f"kernel scale r must be positive, got {self.r}")


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    spec: KernelSpec
    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def phi_of_distance(dist, s: float, r: float):
    """``min(1, (r/d)^s)`` applied elementwise to distances ``d >= 0``."""
    d = np.asarray(dist, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.minimum(r / d, 1.0)
    out = np.square(ratio) if s == 2.0 else ratio if s == 1.0 else ratio**s
    return out if out.ndim else float(out)


def phi(spec: KernelSpec, x) -> float:
    if spec.family != "phi":
        raise InvalidParameterError("phi() needs a phi KernelSpec")
    return phi_of_distance(np.linalg.norm(np.atleast_1d(x)), spec.s, spec.r)


def gauss(x, r: float = 1.0) -> float:
    """``exp(-|x|^2 / (2 r^2))``."""
    if not r > 0:
        raise InvalidParameterError("gauss scale must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.exp(-0.5 * np.dot(x, x) / (r * r)))


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def angular_factor(a, n: int):
    """``exp(-a) * integral over S^{n-1} of exp(a <u, e1>) du`` for ``a >= 0``.

    Equals ``(2 pi)^{n/2} a^{1-n/2} I_{n/2-1}(a) e^{-a}``; the exponential
    scaling keeps it bounded (it decays like ``a^{(1-n)/2}``).
    """
    a = np.asarray(a, dtype=float)
    nu = n / 2.0 - 1.0
    small = a < 1e-6
    safe = np.where(small, 1.0, a)
    val = (2.0 * math.pi) ** (n / 2.0) * safe ** (-nu) * special.ive(nu, safe)
    # series I_nu(a) ~ (a/2)^nu / Gamma(nu+1) * (1 + a^2 / (4(nu+1)))
    limit = sphere_area(n) * np.exp(-a) * (1.0 + a * a / (4.0 * (nu + 1.0)))
    out = np.where(small, limit, val)
    return out if out.ndim else float(out)


@lru_cache(maxsize=200_000)
def _psi_unit(rho: float, n: int, s: float, tol: float) -> float:
    """``psi_1^s`` at radius ``rho`` in R^n, by adaptive radial quadrature.

    psi_1(x) = int_0^inf t^{n-1-s} exp(-(|x|-t)^2/2) A(|x| t) dt,
    with A the exponentially scaled angular factor.
    """
    expo = n - 1.0 - s

    def body(t):
        return math.exp(-0.5 * (rho - t) ** 2) * angular_factor(rho * t, n)

    lo = max(0.0, rho - _GAUSS_REACH)
    hi = rho + _GAUSS_REACH
    opts = dict(epsabs=0.0, epsrel=tol, limit=200, full_output=1)
    pieces = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if lo == 0.0:
            # algebraic weight t^expo handles the (integrable) singularity at 0
            first = min(hi, max(1.0, rho))
            pieces.append(integrate.quad(body, 0.0, first, weight="alg",
                                         wvar=(expo, 0.0), **opts))
            if hi > first:
                pieces.append(integrate.quad(lambda t: t ** expo * body(t), first, hi,
                                             points=[rho] if first < rho < hi else None,
                                             **opts))
        else:
            pieces.append(integrate.quad(lambda t: t ** expo * body(t), lo, hi,
                                         points=[rho], **opts))
    value = sum(p[0] for p in pieces)
    err = sum(p[1] for p in pieces)
    if not value > 0 or err > 10 * tol * value:
        raise NumericalError(
            f"psi quadrature did not converge at |x|={rho} (n={n}, s={s})",
            residual=err / value if value > 0 else math.inf,
        )
    return value


def psi_radial(rho, n: int, s: float, r: float = 1.0, tol: float = PSI_TOL):
    """``psi_r^s`` as a function of ``|x|``; vectorised over ``rho``."""
    if not 0.0 < s < n:
        raise InvalidParameterError(f"psi kernel needs 0 < s < n, got s={s}, n={n}")
    if not r > 0:
        raise InvalidParameterError("kernel scale r must be positive")
    rho = np.asarray(rho, dtype=float)
    scaled = rho / r
    out = np.array([_psi_unit(float(t), int(n), float(s), float(tol)) for t in scaled.ravel()])
    out = out.reshape(scaled.shape)
    return out if out.ndim else float(out)


def psi(spec: KernelSpec, x, ambient_dim: int, tol: float = PSI_TOL) -> float:
    if spec.family != "psi":
        raise InvalidParameterError("psi() needs a psi KernelSpec")
    return psi_radial(np.linalg.norm(np.atleast_1d(x)), ambient_dim, spec.s, spec.r, tol)


def kernel_of_distance(dist, spec: KernelSpec, ambient_dim: int, tol: float = PSI_TOL):
    if spec.family == "phi":
        return phi_of_distance(dist, spec.s, spec.r)
    dist = np.asarray(dist, dtype=float)
    uniq, inv = np.unique(dist, return_inverse=True)
    return psi_radial(uniq, ambient_dim, spec.s, spec.r, tol)[inv].reshape(dist.shape)


def assemble_matrix(e: PointSet, spec: KernelSpec, cap: int = DEFAULT_POINT_CAP,
                    tol: float = PSI_TOL) -> KernelMatrix:
    """Dense matrix ``K[i, j] = kernel(x_i - x_j)``.

    Each unordered pair is evaluated once and mirrored, so ``K`` equals its
    transpose exactly.
    """
    if len(e) > cap:
        raise ResourceLimitError(f"{len(e)} points exceed the point cap of {cap}")
    n = e.ambient_dim
    diag = kernel_of_distance(0.0, spec, n, tol)
    if len(e) == 1:
        return KernelMatrix(spec, np.full((1, 1), float(diag)))
    condensed = kernel_of_distance(pdist(e.points), spec, n, tol)
    k = squareform(condensed, checks=False)
    np.fill_diagonal(k, diag)
    return KernelMatrix(spec, k)
