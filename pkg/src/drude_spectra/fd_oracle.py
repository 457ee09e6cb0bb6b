"""Finite-difference determinant oracle for the truncated guide.

The scalar mode problem on (0, X) with Dirichlet ends is discretised by the
standard three-point stencil.  Its determinant, evaluated by the tridiagonal
recurrence in base-2 renormalised form, vanishes at the discrete
eigenfrequencies; these are located with the same argument-principle root
finder used for the dispersion relations, giving a check that shares no
formula with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from numbers import Real
from typing import Sequence

import numpy as np

from . import model
from .errors import InvalidInput, InvalidRegion, NoReferenceRoot
from .model import MaterialParams
from .rootfinding import CertifiedRoot, SearchRegion, isolate_roots
from .waveguide import ModeIndex, WaveguideGeometry, cutoff, mode_spectrum

MIN_POINTS = 16
MAX_POINTS = 10**6
EXPONENT_CLAMP = 1000
ALIGN_TOL = 1e-9
PHASE_POWER = 8
RENORM_BLOCK = 8
SCALAR_BATCH = 4
POLISH_MAX_ITER = 40


@dataclass(frozen=True)
class FdGrid:
    X: float
    h: float
    N: int
    interface_index: int

    def __post_init__(self):
        if not (self.X > 0 and self.h > 0):
            raise InvalidInput("FdGrid needs X > 0 and h > 0")
        if not MIN_POINTS <= self.N <= MAX_POINTS:
            raise InvalidInput(f"FdGrid needs {MIN_POINTS} <= N <= {MAX_POINTS}, got {self.N}")
        if abs(self.N * self.h - self.X) > ALIGN_TOL * self.X:
            raise InvalidInput("FdGrid needs N*h == X")
        if not 0 <= self.interface_index <= self.N:
            raise InvalidInput("interface_index outside the grid")

    @classmethod
    def build(cls, X: float, N: int, slab_end: float = 1.0) -> "FdGrid":
        """Uniform grid with N intervals; slab_end must land on a node."""
        h = X / N
        k = slab_end / h
        if abs(k - round(k)) > ALIGN_TOL * max(1.0, k):
            raise InvalidInput(f"slab_end={slab_end} is not a grid node for h={h}")
        return cls(float(X), h, int(N), int(round(k)))

    @property
    def slab_end(self) -> float:
        return self.interface_index * self.h


@dataclass(frozen=True)
class LogDet:
    """mantissa * 2**exponent with 1 <= |mantissa| < 2 (or mantissa == 0)."""

    mantissa: complex
    exponent: int

    @property
    def value(self) -> complex:
        m = complex(self.mantissa)
        return complex(math.ldexp(m.real, self.exponent), math.ldexp(m.imag, self.exponent))

    def scaled(self, reference: int) -> complex:
        shift = max(-EXPONENT_CLAMP, min(EXPONENT_CLAMP, self.exponent - reference))
        return self.mantissa * 2.0 ** shift


def _kappa_sq(mode, geometry: WaveguideGeometry | None) -> float:
    if isinstance(mode, ModeIndex):
        return cutoff(mode, geometry or WaveguideGeometry.default())
    if isinstance(mode, Real):
        return float(mode)
    raise InvalidInput(f"mode must be a ModeIndex or a real kappa**2, got {mode!r}")


def _normalise(m: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rewrite m * 2**e so that 1 <= |m| < 2."""
    mag = np.abs(m)
    _, k = np.frexp(np.where(mag > 0, mag, 1.0))
    k = k - 1
    return np.ldexp(m.real, -k) + 1j * np.ldexp(m.imag, -k), e + k


def _diagonals(w: np.ndarray, k2: float, grid: FdGrid, params: MaterialParams):
    h2 = grid.h * grid.h
    slab = 2 + h2 * (k2 - model.f_eval(w, params, use_slab=True))
    vac = 2 + h2 * (k2 - w * w)
    return slab, (slab + vac) / 2, vac


def _segments(grid: FdGrid) -> list[tuple[int, int]]:
    """(diagonal kind, step count) runs over j = 1 .. N-1: 0 slab, 1 interface, 2 vacuum."""
    i, n = grid.interface_index, grid.N
    runs = [(0, min(i, n) - 1), (1, 1 if 1 <= i <= n - 1 else 0), (2, n - 1 - max(i, 0))]
    return [(k, c) for k, c in runs if c > 0]


def _det_scalar(diag: tuple[complex, complex, complex], grid: FdGrid) -> tuple[complex, int]:
    cur, prev, expo = 1 + 0j, 0j, 0
    frexp, ldexp = math.frexp, math.ldexp
    for kind, count in _segments(grid):
        a = diag[kind]
        for _ in range(count):
            cur, prev = a * cur - prev, cur
            k = frexp(max(abs(cur), abs(prev)) or 1.0)[1] - 1
            if k:
                cur = complex(ldexp(cur.real, -k), ldexp(cur.imag, -k))
                prev = complex(ldexp(prev.real, -k), ldexp(prev.imag, -k))
                expo += k
    return cur, expo


def _det_vector(diag, grid: FdGrid) -> tuple[np.ndarray, np.ndarray]:
    cur = np.ones_like(diag[0])
    prev = np.zeros_like(diag[0])
    expo = np.zeros(cur.shape, dtype=np.int64)
    # each step multiplies magnitudes by at most |a| + 1, so a block of
    # RENORM_BLOCK steps cannot overflow while that stays below 2**(1000/block)
    bound = max(float(np.max(np.abs(d))) for d in diag) + 1
    block = RENORM_BLOCK if bound ** RENORM_BLOCK < 2.0**900 else 1
    step = 0
    for kind, count in _segments(grid):
        a = diag[kind]
        for _ in range(count):
            cur, prev = a * cur - prev, cur
            step += 1
            if step % block == 0:
                mag = np.maximum(np.abs(cur), np.abs(prev))
                _, k = np.frexp(np.where(mag > 0, mag, 1.0))
                k = k - 1
                cur = np.ldexp(cur.real, -k) + 1j * np.ldexp(cur.imag, -k)
                prev = np.ldexp(prev.real, -k) + 1j * np.ldexp(prev.imag, -k)
                expo = expo + k
    return cur, expo


def fd_det_array(omega, mode, grid: FdGrid, params: MaterialParams,
                 geometry: WaveguideGeometry | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised determinant: returns (mantissas, exponents) for an array of omega.

    Unknowns sit at the interior nodes x_j = j h, 1 <= j <= N-1, and the
    determinant follows D_j = a_j D_{j-1} - D_{j-2}.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=complex))
    diag = _diagonals(w, _kappa_sq(mode, geometry), grid, params)
    if w.size <= SCALAR_BATCH:
        pairs = [_det_scalar(tuple(complex(d[i]) for d in diag), grid) for i in range(w.size)]
        m = np.array([p[0] for p in pairs], dtype=complex)
        e = np.array([p[1] for p in pairs], dtype=np.int64)
    else:
        m, e = _det_vector(diag, grid)
    return _normalise(m, e)


def fd_det(omega: complex, mode, grid: FdGrid, params: MaterialParams,
           geometry: WaveguideGeometry | None = None) -> LogDet:
    """Determinant of the discrete operator at ``omega``.

    ``mode`` is a ``ModeIndex`` (its cutoff taken from ``geometry``, default
    L2=1, L3=pi) or a plain real kappa**2.  Raises ``PoleAtOmega`` at a
    damping pole.
    """
    m, e = fd_det_array(complex(omega), mode, grid, params, geometry)
    return LogDet(complex(m[0]), int(e[0]))


def fd_hunt(mode, grid: FdGrid, params: MaterialParams, reference: int,
            geometry: WaveguideGeometry | None = None):
    """Analytic hunt function mantissa * 2**(exponent - reference)."""

    def F(omega):
        scalar = np.ndim(omega) == 0
        m, e = fd_det_array(omega, mode, grid, params, geometry)
        shift = np.clip(e - reference, -EXPONENT_CLAMP, EXPONENT_CLAMP).astype(float)
        out = m * np.exp2(shift)
        return complex(out[0]) if scalar else out

    return F


def fd_phase(mode, grid: FdGrid, params: MaterialParams, reference: int,
             geometry: WaveguideGeometry | None = None):
    """Same phase as ``fd_hunt`` with |det| compressed to its PHASE_POWER-th root.

    Multiplying by a positive factor leaves the argument principle intact,
    while the compression keeps the boundary dynamic range inside double
    precision's relative resolution.
    """

    def F(omega):
        m, e = fd_det_array(omega, mode, grid, params, geometry)
        mag = np.abs(m)
        log2 = e - reference + np.log2(mag)
        return m / mag * np.exp2(log2 / PHASE_POWER)

    return F


def oracle_spectrum(mode, grid: FdGrid, params: MaterialParams, region: SearchRegion,
                    tol: float = 1e-6, geometry: WaveguideGeometry | None = None
                    ) -> list[CertifiedRoot]:
    """Discrete eigenfrequencies of the finite-difference operator in ``region``.

    The hunt function is normalised by the determinant's binary exponent at
    the region centre, so values stay near unit size across the region and
    ``tol`` acts as a relative residual.  The recurrence loses roughly
    N * eps * max|D_j| to cancellation near a zero, hence the loose default.
    """
    for pole in params.poles:
        if region.contains(pole):
            raise InvalidRegion(f"region {region} contains the damping pole {pole}")
    reference = fd_det(region.centre, mode, grid, params, geometry).exponent
    roots = isolate_roots(fd_hunt(mode, grid, params, reference, geometry), region,
                          tol_residual=tol,
                          phase_fn=fd_phase(mode, grid, params, reference, geometry))
    # the centre-referenced residual is loose where |det| is small; finish each
    # root against its own scale
    out = []
    for r in roots:
        z = polish_fd_root(mode, grid, params, r.value, geometry=geometry)
        out.append(replace(r, value=z) if r.region.contains(z) else r)
    return out


def polish_fd_root(mode, grid: FdGrid, params: MaterialParams, guess: complex,
                   geometry: WaveguideGeometry | None = None) -> complex:
    """Newton-polish the discrete eigenfrequency closest to ``guess``.

    Values are referenced to the binary exponent at ``guess``.  The iteration
    stops once steps stop shrinking, which is where rounding noise in the
    recurrence takes over.
    """
    reference = fd_det(guess, mode, grid, params, geometry).exponent
    F = fd_hunt(mode, grid, params, reference, geometry)
    z, last = complex(guess), math.inf
    for _ in range(POLISH_MAX_ITER):
        fz = F(z)
        if fz == 0:
            break
        d = 1e-7 * (1 + abs(z))
        deriv = (F(z + d) - F(z - d)) / (2 * d)
        if deriv == 0 or not np.isfinite(deriv):
            break
        step = fz / deriv
        if abs(step) >= last:
            break
        z, last = z - step, abs(step)
        if last <= 1e-14 * (1 + abs(z)):
            break
    return z


def _check_h_list(h_list: Sequence[float]) -> list[float]:
    hs = [float(h) for h in h_list]
    if len(hs) < 3:
        raise InvalidInput("convergence_order needs at least three step sizes")
    if any(h <= 0 for h in hs):
        raise InvalidInput("step sizes must be positive")
    ratios = [b / a for a, b in zip(hs, hs[1:])]
    if any(not (r < 1) for r in ratios):
        raise InvalidInput("step sizes must be strictly decreasing")
    if max(ratios) - min(ratios) > 1e-6 * max(ratios):
        raise InvalidInput("step sizes must form a geometric sequence")
    return hs


def reference_root(mode, params: MaterialParams, X: float, region: SearchRegion,
                   geometry: WaveguideGeometry | None = None,
                   target: complex | None = None) -> complex:
    """Certified truncated-guide dispersion root to compare against.

    Picks the root closest to ``target`` (default: the region centre).
    Raises ``NoReferenceRoot`` if the region holds none.
    """
    geometry = (geometry or WaveguideGeometry.default()).with_length(X)
    if isinstance(mode, ModeIndex):
        points, _ = mode_spectrum(mode, geometry, params, region)
        roots = [p.omega for p in points]
    else:
        roots = _kappa_roots(float(mode), geometry, params, region)
    if not roots:
        raise NoReferenceRoot(f"no dispersion root in {region}")
    aim = region.centre if target is None else complex(target)
    return min(roots, key=lambda r: abs(r - aim))


def _kappa_roots(k2: float, geometry: WaveguideGeometry, params: MaterialParams,
                 region: SearchRegion) -> list[complex]:
    """Dispersion roots for an arbitrary real kappa**2 (including 0)."""
    from . import waveguide as wg

    s, ell = geometry.slab_end, geometry.X - geometry.slab_end

    def H(w):
        ch1, shc1, _ = wg._hyp_scaled((k2 - model.f_eval(w, params)) * s * s)
        ch2, shc2, _ = wg._hyp_scaled((k2 - np.asarray(w) ** 2) * ell * ell)
        return ell * ch1 * shc2 + s * ch2 * shc1

    return [r.value for r in isolate_roots(H, region, tol_residual=1e-12)]


def convergence_order(mode, params: MaterialParams, X: float, h_list: Sequence[float],
                      region: SearchRegion | None = None,
                      geometry: WaveguideGeometry | None = None,
                      target: complex | None = None) -> float:
    """Observed order p in |omega_h - omega| ~ C h**p (least-squares slope).

    The exact value is the certified dispersion root nearest ``target`` in
    ``region`` (default: [0.1, 3] x [-3, -0.01]).  Each discrete root is
    polished from the exact one.
    """
    hs = _check_h_list(h_list)
    geometry = (geometry or WaveguideGeometry.default()).with_length(X)
    region = region or SearchRegion(0.1, 3.0, -3.0, -0.01)
    exact = reference_root(mode, params, X, region, geometry, target)
    errors = []
    for h in hs:
        grid = FdGrid.build(X, int(round(X / h)), geometry.slab_end)
        errors.append(abs(polish_fd_root(mode, grid, params, exact, geometry=geometry) - exact))
    if min(errors) <= 0:
        raise NoReferenceRoot("discrete root coincides with the exact one; order undefined")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)
