"""Polynomial and analytic-function root finding in the complex plane.

Two independent kernels live here:

* :func:`poly_roots`, an Aberth-Ehrlich simultaneous iteration for
  polynomials of modest degree;
* :func:`isolate_roots`, which counts zeros of an analytic function inside a
  rectangle by tracking the argument of ``F`` along its boundary, quadrisects
  until each zero is alone in a small box, and polishes it with Newton steps.

Functions handed to :func:`winding_count` / :func:`isolate_roots` should
accept a numpy array of complex points and return an array of the same
shape; scalar-only callables are also accepted and evaluated point by point.
Because only the argument of ``F`` is used for counting, ``F`` may carry any
smooth, strictly positive real scale factor.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryZero, InvalidInput, InvalidRegion, NoConvergence, PhaseUnresolved

log = logging.getLogger(__name__)

MAX_DEGREE = 16
MAX_BOUNDARY_SAMPLES = 2**16
BOUNDARY_ZERO_REL = 1e-13
ROUNDING_DEFECT = 0.25
MAX_LOG_STEP = np.pi / 4
LOGDERIV_STEP = 1e-7
ISOLATION_DIAMETER = 1e-3
NEWTON_MAX_ITER = 50
PERTURB_RETRIES = 3
PERTURB_GROWTH = 1e-6
# Off-centre split so that symmetric regions are not cut along their axis.
SPLIT_FRACTION = 0.5 + 1 / (29 * math.pi)


@dataclass(frozen=True)
class Polynomial:
    """Complex polynomial with coefficients in ascending degree."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[complex]):
        c = [complex(x) for x in coeffs]
        while len(c) > 1 and abs(c[-1]) <= 1e-300:
            c.pop()
        if abs(c[-1]) <= 1e-300:
            raise InvalidInput("the zero polynomial has no leading coefficient")
        if len(c) - 1 > MAX_DEGREE:
            raise InvalidInput(f"degree {len(c) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "Polynomial":
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        acc = np.zeros_like(np.asarray(z, dtype=complex))
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc if acc.ndim else complex(acc)

    def residual_bound(self, z) -> float:
        scale = max(abs(c) for c in self.coeffs)
        return 1e-10 * max(1.0, abs(z)) ** self.degree * scale


def _horner_with_derivative(coeffs, z):
    p = np.full_like(z, coeffs[-1])
    dp = np.zeros_like(z)
    for c in reversed(coeffs[:-1]):
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _residuals_ok(coeffs, z, n, scale) -> bool:
    resid = np.abs(_horner_with_derivative(coeffs, z)[0])
    return bool(np.all(resid <= 1e-10 * np.maximum(1.0, np.abs(z)) ** n * scale))


def poly_roots(p: Polynomial, max_iter: int = 500) -> list[complex]:
    """All roots of ``p`` (with multiplicity) by Aberth-Ehrlich iteration.

    Starting points lie on a slightly rotated circle around the root
    centroid whose radius comes from the coefficient magnitudes.  Returns the
    roots sorted by (real, imag).

    Raises
    ------
    NoConvergence
        If some root misses its residual bound after ``max_iter`` sweeps.
    """
    n = p.degree
    if n < 1:
        raise InvalidInput("poly_roots needs degree >= 1")
    lead = p.coeffs[-1]
    coeffs = np.array(p.coeffs) / lead
    if n == 1:
        return [complex(-coeffs[0])]
    centre = -coeffs[-2] / n
    shifted = np.poly1d(coeffs[::-1])(np.poly1d([1, centre]))  # q(y) = p(y + centre)
    tail = np.abs(shifted.coeffs[1:])
    radius = max((tail[k - 1] ** (1.0 / k) for k in range(1, n + 1)), default=1.0)
    radius = radius if radius > 0 else 1.0
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = centre + radius * np.exp(1j * angles)

    clist = list(coeffs)
    bound_scale = np.max(np.abs(coeffs))
    last_step = np.inf
    stalled = 0
    for _ in range(max_iter):
        val, der = _horner_with_derivative(clist, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = val / der
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = np.sum(1.0 / diff, axis=1)
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step) & (val != 0), step, 0.0)
        z = z - step
        biggest = np.max(np.abs(step) / (1 + np.abs(z)))
        if biggest <= 4 * np.finfo(float).eps:
            break
        # clustered roots converge only linearly; stop once progress stalls
        stalled = stalled + 1 if biggest >= last_step else 0
        last_step = min(last_step, biggest)
        if stalled >= 5 and _residuals_ok(clist, z, n, bound_scale):
            break
    if not _residuals_ok(clist, z, n, bound_scale):
        raise NoConvergence(f"Aberth iteration did not converge in {max_iter} sweeps")
    return sorted((complex(r) for r in z), key=lambda r: (r.real, r.imag))


# --- argument principle ---------------------------------------------------------


@dataclass(frozen=True)
class SearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    max_depth: int = 24
    boundary_samples: int = 64

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidRegion("region bounds must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InvalidRegion(f"empty region {vals}")
        if self.max_depth < 1:
            raise InvalidRegion("max_depth must be >= 1")
        if self.boundary_samples < 16:
            raise InvalidRegion("boundary_samples must be >= 16")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def centre(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (self.re_min - margin <= z.real <= self.re_max + margin
                and self.im_min - margin <= z.imag <= self.im_max + margin)

    def grown(self, amount: float) -> "SearchRegion":
        return replace(self, re_min=self.re_min - amount, re_max=self.re_max + amount,
                       im_min=self.im_min - amount, im_max=self.im_max + amount)

    def split(self, fraction: float = SPLIT_FRACTION) -> list["SearchRegion"]:
        xm = self.re_min + fraction * self.width
        ym = self.im_min + fraction * self.height
        return [
            replace(self, re_max=xm, im_max=ym),
            replace(self, re_min=xm, im_max=ym),
            replace(self, re_min=xm, im_min=ym),
            replace(self, re_max=xm, im_min=ym),
        ]


@dataclass(frozen=True)
class CertifiedRoot:
    value: complex
    residual: float
    winding: int
    region: SearchRegion = field(repr=False)


def _evaluate(F: Callable, z: np.ndarray) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            # scalar-only callables would silently squeeze a length-1 array
            warnings.simplefilter("error", DeprecationWarning)
            out = np.asarray(F(z), dtype=complex)
        if out.shape == z.shape:
            return out
    except (TypeError, ValueError, DeprecationWarning):
        pass
    return np.array([complex(F(complex(w))) for w in z], dtype=complex)


def _boundary_points(region: SearchRegion, s: np.ndarray) -> np.ndarray:
    """Map perimeter parameter s in [0, 4] to the counter-clockwise boundary."""
    side = np.minimum(np.floor(s), 3).astype(int)
    u = s - side
    x0, x1, y0, y1 = region.re_min, region.re_max, region.im_min, region.im_max
    re = np.choose(side, [x0 + u * (x1 - x0), np.full_like(u, x1), x1 - u * (x1 - x0), np.full_like(u, x0)])
    im = np.choose(side, [np.full_like(u, y0), y0 + u * (y1 - y0), np.full_like(u, y1), y1 - u * (y1 - y0)])
    return re + 1j * im


def _initial_parameters(region: SearchRegion) -> np.ndarray:
    perimeter = 2 * (region.width + region.height)
    params = []
    for k, length in enumerate((region.width, region.height, region.width, region.height)):
        m = max(4, int(round(region.boundary_samples * length / perimeter)))
        params.append(k + np.arange(m) / m)
    params.append(np.array([4.0]))
    return np.concatenate(params)


def _tangents(region: SearchRegion, s: np.ndarray) -> np.ndarray:
    side = np.minimum(np.floor(s), 3).astype(int)
    return np.choose(side, [1 + 0j, 1j, -1 + 0j, -1j])


def _sample(F: Callable, region: SearchRegion, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values of F and |d log F/dz| at boundary parameters ``s``.

    The log-derivative comes from a one-sided difference along the boundary,
    evaluated in the same vectorised call.
    """
    z = _boundary_points(region, s)
    step = LOGDERIV_STEP * (1 + np.abs(z))
    both = _evaluate(F, np.concatenate([z, z + step * _tangents(region, s)]))
    vals, ahead = both[: z.size], both[z.size:]
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.abs(np.log(ahead / vals)) / step
    return vals, rate


def winding_count(F: Callable, region: SearchRegion) -> int:
    """Number of zeros of ``F`` inside ``region`` by adaptive argument tracking.

    A boundary segment is refined while either the change of log F across it
    or the local rate |(log F)'| times its length exceeds pi/4.  After the
    first clean pass every segment is halved once more and re-checked.

    Raises
    ------
    BoundaryZero
        If min |F| on the boundary falls below 1e-13 times its max.
    PhaseUnresolved
        If refinement needs more than 2**16 samples, ``F`` is not finite on
        the boundary, or the accumulated phase is not near a multiple of 2*pi.
    """
    s = _initial_parameters(region)
    vals, rate = _sample(F, region, s)
    vals[-1], rate[-1] = vals[0], rate[0]
    verified = False
    while True:
        if not np.all(np.isfinite(vals)):
            raise PhaseUnresolved(f"F is not finite on the boundary of {region}")
        mags = np.abs(vals)
        if mags.min() <= BOUNDARY_ZERO_REL * mags.max():
            raise BoundaryZero(f"|F| nearly vanishes on the boundary of {region}")
        with np.errstate(divide="ignore"):
            log_steps = np.log(vals[1:] / vals[:-1])
        steps = log_steps.imag
        z = _boundary_points(region, s)
        reach = np.abs(np.diff(z)) * np.maximum(rate[1:], rate[:-1])
        # log F is analytic, so its modulus and argument vary at the same rate:
        # a large jump in either signals under-resolution.
        bad = np.flatnonzero((np.abs(log_steps) > MAX_LOG_STEP) | ~(reach <= MAX_LOG_STEP))
        if bad.size == 0:
            if verified:
                break
            bad = np.arange(steps.size)
            verified = True
        else:
            verified = False
        if s.size + bad.size > MAX_BOUNDARY_SAMPLES:
            raise PhaseUnresolved(f"argument tracking exceeded {MAX_BOUNDARY_SAMPLES} samples")
        mids = 0.5 * (s[bad] + s[bad + 1])
        new_vals, new_rate = _sample(F, region, mids)
        s = np.insert(s, bad + 1, mids)
        vals = np.insert(vals, bad + 1, new_vals)
        rate = np.insert(rate, bad + 1, new_rate)
    turns = steps.sum() / (2 * np.pi)
    count = int(round(turns))
    if abs(turns - count) >= ROUNDING_DEFECT:
        raise PhaseUnresolved(f"winding {turns:.3f} is not close to an integer")
    return count


def _count_with_retries(F, region: SearchRegion) -> tuple[int, SearchRegion]:
    current = region
    for attempt in range(PERTURB_RETRIES + 1):
        try:
            return winding_count(F, current), current
        except BoundaryZero:
            if attempt == PERTURB_RETRIES:
                raise
            current = current.grown(PERTURB_GROWTH * current.diameter)
    raise AssertionError("unreachable")


def newton_polish(F: Callable, z0: complex, tol_residual: float,
                  max_iter: int = NEWTON_MAX_ITER) -> tuple[complex, float]:
    """Newton iteration with a central-difference derivative.

    Stops when |F| <= tol_residual, when the step stalls at rounding level,
    or after ``max_iter`` steps.  Returns the iterate and |F| there.
    """
    z = complex(z0)
    fz = complex(_evaluate(F, np.array([z]))[0])
    for _ in range(max_iter):
        if abs(fz) <= tol_residual:
            break
        h = 1e-7 * (1 + abs(z))
        fp, fm = _evaluate(F, np.array([z + h, z - h]))
        d = (fp - fm) / (2 * h)
        if d == 0 or not np.isfinite(d):
            break
        step = fz / d
        z_new = z - step
        f_new = complex(_evaluate(F, np.array([z_new]))[0])
        if not np.isfinite(f_new):
            break
        z, fz = z_new, f_new
        if abs(step) <= 1e-15 * (1 + abs(z)):
            break
    return z, abs(fz)


def _dedupe(roots: list[CertifiedRoot], tol: float) -> list[CertifiedRoot]:
    out: list[CertifiedRoot] = []
    for r in sorted(roots, key=lambda r: (r.value.real, r.value.imag)):
        if out and any(abs(r.value - q.value) <= tol for q in out[-4:]):
            continue
        out.append(r)
    return out


def _certify_single(F, box: SearchRegion, tol_residual: float,
                    phase_fn: Callable | None = None) -> CertifiedRoot | None:
    """Polish the lone zero of ``box`` and confirm it in a sub-1e-3 square."""
    z, res = newton_polish(F, box.centre, tol_residual)
    if not (box.contains(z) and res <= tol_residual):
        return None
    if box.diameter < ISOLATION_DIAMETER:
        return CertifiedRoot(complex(z), float(res), 1, box)
    half = ISOLATION_DIAMETER / 4
    small = replace(box, re_min=z.real - half, re_max=z.real + half,
                    im_min=z.imag - half, im_max=z.imag + half)
    try:
        if winding_count(phase_fn or F, small) == 1:
            return CertifiedRoot(complex(z), float(res), 1, small)
    except (BoundaryZero, PhaseUnresolved):
        pass
    return None


def isolate_roots(F: Callable, region: SearchRegion, tol_residual: float = 1e-12,
                  max_roots: int = 10_000, phase_fn: Callable | None = None) -> list[CertifiedRoot]:
    """Locate and certify every zero of ``F`` inside ``region``.

    Rectangles are quadrisected until each holds a single zero.  That zero is
    Newton-polished from the box centre; it is accepted once it sits in a
    rectangle smaller than 1e-3 across whose winding number is exactly 1
    (either the box itself or a small square around the polished value).
    A rectangle that still holds several zeros at ``max_depth`` is reported
    once, with its total winding, as a cluster.

    Zeros whose residual cannot be pushed below ``tol_residual`` are logged
    and dropped.  The result is sorted by (real, imag).

    ``phase_fn``, if given, replaces ``F`` in the winding counts.  It must
    equal ``F`` times a positive real factor (for instance a magnitude-
    compressed version of a function with a huge dynamic range).
    """
    P = phase_fn or F
    total, root_box = _count_with_retries(P, region)
    stack: list[tuple[SearchRegion, int, int]] = [(root_box, total, 0)] if total > 0 else []
    roots: list[CertifiedRoot] = []
    while stack:
        if len(roots) >= max_roots:
            log.warning("stopping after max_roots=%d roots", max_roots)
            break
        box, count, depth = stack.pop()
        if count == 1:
            certified = _certify_single(F, box, tol_residual, phase_fn)
            if certified is not None:
                roots.append(certified)
                continue
        if depth >= region.max_depth:
            z, res = newton_polish(F, box.centre, tol_residual)
            if box.contains(z) and res <= tol_residual:
                roots.append(CertifiedRoot(complex(z), float(res), count, box))
            else:
                log.warning("unresolved zero(s) near %s (winding %d, residual %.3g)",
                            box.centre, count, res)
            continue
        found = 0
        for child in box.split():
            if found == count:
                break  # remaining children are empty by additivity
            c, child_box = _count_with_retries(P, child)
            if c > 0:
                stack.append((child_box, c, depth + 1))
                found += c
        if found != count:
            log.warning("winding not additive at %s: parent %d, children %d",
                        box, count, found)
    return _dedupe(roots, 1e-10)
