"""Closed-form symbols and sets for the lossy Drude-Lorentz pencil.

Everything here is a pure function of its arguments.  The frequency ``omega``
is a complex number; most functions also accept numpy arrays of frequencies.

Notation used in the code:

* ``theta_pencil``   the quadratic symbol  w**2 + i*gamma*w - theta**2
* ``f_eval``         the rational symbol
                     Theta_e(w) Theta_m(w) / ((w + i gamma_e)(w + i gamma_m))
* ``Sigma1/Sigma2``  the two half-plane pairs where Re(w) Im(w + i gamma_m/2)
                     is positive / negative
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegenerateParams, InvalidInput, PoleAtOmega, UnsupportedParams
from .rootfinding import Polynomial, poly_roots

if TYPE_CHECKING:
    from .waveguide import WaveguideGeometry

POLE_TOL = 1e-12
AXIS_TOL = 1e-14
SPURIOUS_TOL = 1e-8


@dataclass(frozen=True)
class MaterialParams:
    """Damping constants and squared coupling strengths.

    ``alpha_e``/``alpha_m`` are the squared couplings inside the slab, the
    ``theta_*_inf_sq`` fields their values at infinity (outside the slab).
    """

    gamma_e: float
    gamma_m: float
    alpha_e: float = 0.0
    alpha_m: float = 0.0
    theta_e_inf_sq: float = 0.0
    theta_m_inf_sq: float = 0.0

    def __post_init__(self):
        for name in ("gamma_e", "gamma_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInput(f"{name} must be a positive real, got {v!r}")
        for name in ("alpha_e", "alpha_m", "theta_e_inf_sq", "theta_m_inf_sq"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidInput(f"{name} must be a nonnegative real, got {v!r}")

    @classmethod
    def default(cls) -> "MaterialParams":
        """Slab metamaterial in vacuum: gamma_e=4, gamma_m=1, alpha=(400, 10)."""
        return cls(gamma_e=4.0, gamma_m=1.0, alpha_e=400.0, alpha_m=10.0)

    def couplings(self, use_slab: bool) -> tuple[float, float]:
        if use_slab:
            return self.alpha_e, self.alpha_m
        return self.theta_e_inf_sq, self.theta_m_inf_sq

    @property
    def poles(self) -> tuple[complex, complex]:
        return -1j * self.gamma_e, -1j * self.gamma_m

    @property
    def vacuum_at_infinity(self) -> bool:
        return self.theta_e_inf_sq == 0 and self.theta_m_inf_sq == 0


class RegionTag(enum.Enum):
    SIGMA1 = "Sigma1"
    SIGMA2 = "Sigma2"
    EXCLUDED = "Excluded"


class AsymptoticBranch(enum.Enum):
    NEAR_POLE_E = "NearPoleE"
    NEAR_POLE_M = "NearPoleM"
    LARGE_REAL_PLUS = "LargeReal+"
    LARGE_REAL_MINUS = "LargeReal-"


@dataclass(frozen=True)
class HalfLinePair:
    """The real set (-inf, -threshold] U [threshold, inf)."""

    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise InvalidInput("threshold must be positive")

    def distance(self, omega):
        """Euclidean distance from ``omega`` to the pair of half-lines."""
        w = np.asarray(omega, dtype=complex)
        c = self.threshold
        re = np.abs(w.real)
        out = np.where(re >= c, np.abs(w.imag), np.hypot(re - c, w.imag))
        return out if out.ndim else float(out)

    def contains(self, omega, tol: float = 0.0) -> bool:
        return bool(self.distance(omega) <= tol)


def theta_pencil(omega, gamma, theta_sq):
    """Quadratic multiplication symbol  omega**2 + i*gamma*omega - theta_sq."""
    return omega * omega + 1j * gamma * omega - theta_sq


def _check_poles(omega, params: MaterialParams):
    if isinstance(omega, (complex, float, int)):
        for pole in params.poles:
            if abs(omega - pole) < POLE_TOL:
                raise PoleAtOmega(f"omega={omega!r} is at the pole {pole}")
        return
    w = np.asarray(omega)
    for pole in params.poles:
        if np.any(np.abs(w - pole) < POLE_TOL):
            raise PoleAtOmega(f"omega={omega!r} is at the pole {pole}")


def f_eval(omega, params: MaterialParams, use_slab: bool = True):
    """Rational symbol f(omega) with slab or at-infinity couplings.

    Raises
    ------
    PoleAtOmega
        If ``omega`` is within 1e-12 of ``-i*gamma_e`` or ``-i*gamma_m``.
    """
    _check_poles(omega, params)
    a, b = params.couplings(use_slab)
    ge, gm = params.gamma_e, params.gamma_m
    # Theta/(w + i g) = w - theta^2/(w + i g): avoids catastrophic growth near w=0
    return (omega - a / (omega + 1j * ge)) * (omega - b / (omega + 1j * gm))


def reflect(omega):
    """Map omega to -conj(omega); the spectrum is symmetric under it."""
    return -np.conj(omega) if isinstance(omega, np.ndarray) else -complex(omega).conjugate()


def classify_sigma(omega: complex, gamma_m: float) -> RegionTag:
    omega = complex(omega)
    product = omega.real * (omega.imag + gamma_m / 2)
    if abs(product) <= AXIS_TOL:
        return RegionTag.EXCLUDED
    return RegionTag.SIGMA1 if product > 0 else RegionTag.SIGMA2


def strip_contains(omega: complex, params: MaterialParams) -> bool:
    im = complex(omega).imag
    return -max(params.gamma_e, params.gamma_m) <= im <= 0


def _sup_norm_bound(params: MaterialParams) -> float:
    sup_e = max(params.alpha_e, params.theta_e_inf_sq)
    sup_m = max(params.alpha_m, params.theta_m_inf_sq)
    return params.gamma_e * sup_e + params.gamma_m * sup_m


def enc_contains(omega: complex, params: MaterialParams) -> bool:
    """Numerical-range enclosure  0 <= -Im w <= min(M, K / (Re w)**2)."""
    omega = complex(omega)
    depth = -omega.imag
    bound = max(params.gamma_e, params.gamma_m)
    if abs(omega.real) > AXIS_TOL:
        bound = min(bound, _sup_norm_bound(params) / omega.real**2)
    return 0 <= depth <= bound


def gamma_set_contains(omega: complex, params: MaterialParams) -> bool:
    """Refined enclosure: axis segment plus the cut-off enc region."""
    omega = complex(omega)
    if abs(omega.real) <= AXIS_TOL:
        im = omega.imag
        return -params.gamma_e < im < 0 and abs(im + params.gamma_m) > AXIS_TOL
    if omega.imag < -(params.gamma_e + params.gamma_m) / 2:
        return False
    return enc_contains(omega, params)


def gamma_boundary(params: MaterialParams, re_max: float, n: int = 400) -> list[complex]:
    """Lower boundary polyline of the off-axis part of the refined enclosure.

    Traced left to right over ``[-re_max, re_max]``; the point ``Re w = 0`` is
    skipped because the bound is infinite there.
    """
    cap = min(max(params.gamma_e, params.gamma_m), (params.gamma_e + params.gamma_m) / 2)
    k = _sup_norm_bound(params)
    xs = np.linspace(-re_max, re_max, 2 * (n // 2) + 1)
    xs = xs[xs != 0]
    depth = np.minimum(cap, k / xs**2) if k > 0 else np.zeros_like(xs)
    return [complex(x, -d) for x, d in zip(xs, depth)]


# --- essential spectrum -----------------------------------------------------


def s_infty_quartic(t: float, params: MaterialParams) -> Polynomial:
    """Quartic Theta_e Theta_m - t (w + i g_e)(w + i g_m) with infinity couplings."""
    a, b = params.theta_e_inf_sq, params.theta_m_inf_sq
    ge, gm = params.gamma_e, params.gamma_m
    coeffs = [
        a * b + t * ge * gm,
        -1j * (ge * b + gm * a) - 1j * t * (ge + gm),
        -ge * gm - a - b - t,
        1j * (ge + gm),
        1.0,
    ]
    return Polynomial(coeffs)


def _spurious_poles(params: MaterialParams) -> list[complex]:
    out = []
    if params.theta_e_inf_sq == 0:
        out.append(-1j * params.gamma_e)
    if params.theta_m_inf_sq == 0:
        out.append(-1j * params.gamma_m)
    return out


def s_infty_roots(t: float, params: MaterialParams, filter_poles: bool = True) -> list[complex]:
    """Roots of f_inf(w) = t, with removable pole factors dropped."""
    roots = poly_roots(s_infty_quartic(t, params))
    if not filter_poles:
        return roots
    spurious = _spurious_poles(params)
    kept = []
    for r in roots:
        hit = next((p for p in spurious if abs(r - p) < SPURIOUS_TOL), None)
        if hit is not None:
            spurious.remove(hit)
            continue
        kept.append(r)
    return kept


def _merge_sorted(points: Sequence[complex], tol: float) -> list[complex]:
    pts = sorted(points, key=lambda z: (z.real, z.imag))
    out: list[complex] = []
    for z in pts:
        if not any(abs(z - q) <= tol for q in out[-8:]):
            out.append(z)
    return out


def essential_curve_s_infty(
    params: MaterialParams, t_min: float, t_max: float, n_samples: int,
    geometry: "WaveguideGeometry | None" = None,
) -> list[complex]:
    """Sample the curve {w : f_inf(w) = t} for t in [t_min, t_max]."""
    if n_samples < 2:
        raise InvalidInput("n_samples must be >= 2")
    if t_max < t_min:
        raise InvalidInput("t_max must not be smaller than t_min")
    if geometry is not None:
        floor = (math.pi / max(geometry.L2, geometry.L3)) ** 2
        if t_min < floor - 1e-12:
            raise InvalidInput(f"t_min={t_min} lies below the curl-curl threshold {floor}")
    pts: list[complex] = []
    for t in np.linspace(t_min, t_max, n_samples):
        pts.extend(s_infty_roots(float(t), params))
    return _merge_sorted(pts, 1e-10)


def _csqrt(x: complex) -> complex:
    """Principal square root; a negative real maps to +i*sqrt(|x|)."""
    x = complex(x)
    if x.imag == 0 and x.real < 0:
        return 1j * math.sqrt(-x.real)
    return cmath.sqrt(x)


def sigma_e_G_curve(theta_sq_range: tuple[float, float], gamma_e: float,
                    n_samples: int) -> list[complex]:
    lo, hi = theta_sq_range
    if lo < 0 or hi < lo:
        raise InvalidInput("theta_sq_range must be a nonnegative interval")
    out = []
    for th in np.linspace(lo, hi, n_samples):
        s = _csqrt(th - gamma_e**2 / 4)
        out.extend([-0.5j * gamma_e + s, -0.5j * gamma_e - s])
    return out


def sigma_e_G_points(params: MaterialParams) -> list[complex]:
    """Isolated essential-spectrum points of the gradient part (step profile)."""
    ge, ae = params.gamma_e, params.alpha_e
    pts = [0j, -1j * ge]
    for arg in (ae - ge**2 / 4, ae / 2 - ge**2 / 4):
        s = _csqrt(arg)
        pts.extend([-0.5j * ge + s, -0.5j * ge - s])
    return _merge_sorted(pts, 1e-12)


def we_threshold(geometry: "WaveguideGeometry") -> float:
    return math.pi / max(geometry.L2, geometry.L3)


def we_s_infty(geometry: "WaveguideGeometry", params: MaterialParams) -> HalfLinePair:
    """Essential numerical range at infinity when the exterior is vacuum."""
    if not params.vacuum_at_infinity:
        raise UnsupportedParams(
            "half-line form requires zero couplings at infinity; use we_s_infty_contains")
    return HalfLinePair(we_threshold(geometry))


def we_s_infty_contains(omega: complex, geometry: "WaveguideGeometry",
                        params: MaterialParams, tol: float = 1e-9) -> bool:
    f = complex(f_eval(complex(omega), params, use_slab=False))
    return abs(f.imag) <= tol and f.real >= we_threshold(geometry) ** 2 - tol


# --- asymptotics --------------------------------------------------------------


def near_pole_coefficient(branch: AsymptoticBranch, params: MaterialParams,
                          corrected: bool = True) -> float:
    """Coefficient c in  w ~ -i*gamma_x - i*c/t  near a damping pole.

    The default is ``theta_x^2 (-gamma_x + theta_y^2 / (gamma_y - gamma_x))``,
    which is what first-order matching of the quartic yields and what its
    numerical roots follow.  ``corrected=False`` returns the variant with an
    extra ``theta_x^2`` factor on the second term, kept for comparison.
    """
    if params.gamma_e == params.gamma_m:
        raise DegenerateParams("gamma_e == gamma_m: near-pole expansion undefined")
    if branch is AsymptoticBranch.NEAR_POLE_E:
        gx, gy = params.gamma_e, params.gamma_m
        tx, ty = params.theta_e_inf_sq, params.theta_m_inf_sq
    elif branch is AsymptoticBranch.NEAR_POLE_M:
        gx, gy = params.gamma_m, params.gamma_e
        tx, ty = params.theta_m_inf_sq, params.theta_e_inf_sq
    else:
        raise InvalidInput(f"{branch} is not a near-pole branch")
    inner = tx * ty if not corrected else ty
    return tx * (-gx + inner / (gy - gx))


def asymptotic_root(t: float, branch: AsymptoticBranch, params: MaterialParams,
                    corrected: bool = True) -> complex:
    """Large-t asymptote of a root of f_inf(w) = t on the given branch.

    For the large-real branches the imaginary part is ``-K/(2 t)`` with
    ``K = theta_e_inf^2 gamma_e + theta_m_inf^2 gamma_m``; ``corrected=False``
    uses ``-K/t`` instead.
    """
    if not t > 0:
        raise InvalidInput("t must be positive")
    branch = AsymptoticBranch(branch)
    if branch in (AsymptoticBranch.NEAR_POLE_E, AsymptoticBranch.NEAR_POLE_M):
        c = near_pole_coefficient(branch, params, corrected)
        gx = params.gamma_e if branch is AsymptoticBranch.NEAR_POLE_E else params.gamma_m
        return complex(0.0, -gx - c / t)
    k = params.theta_e_inf_sq * params.gamma_e + params.theta_m_inf_sq * params.gamma_m
    x = math.sqrt(t)
    y = -k / x**2 * (0.5 if corrected else 1.0)
    return complex(x if branch is AsymptoticBranch.LARGE_REAL_PLUS else -x, y)
