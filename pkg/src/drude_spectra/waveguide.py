"""Slab-loaded rectangular waveguide: dispersion relations and spectrum sweeps.

Separating variables in the cross-section reduces each transverse mode
``n = (n2, n3)`` to the scalar problem

    -u'' + (kappa_n**2 - g(omega, x)) u = 0,   u(0) = 0,

with ``g = f_slab(omega)`` on the slab ``(0, s)`` and ``g = omega**2`` in the
vacuum beyond.  With ``l1 = sqrt(kappa**2 - f_slab)`` and
``l2 = sqrt(kappa**2 - omega**2)`` the eigenfrequencies solve

    full guide:       l1 coth(l1 s) + l2 = 0                 (decay, Re l2 >= 0)
    truncated at X:   l1 coth(l1 s) + l2 coth(l2 (X - s)) = 0  (Dirichlet at X)

Root hunting uses the regularised forms

    G(omega) = cosh(l1 s) + l2 s sinhc(l1 s)
    H(omega) = (X-s) cosh(l1 s) sinhc(l2 (X-s)) + s cosh(l2 (X-s)) sinhc(l1 s)

which are even in ``l1`` (and, for ``H``, in ``l2``) and therefore free of the
``l1`` branch; ``H`` has no branch cut at all.  Their zeros coincide with those
of the raw relations except where the sinh factors vanish, which the raw
residual check rejects.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import model
from .errors import BranchCut, InvalidInput, SpectraError
from .model import MaterialParams
from .rootfinding import SearchRegion, isolate_roots, newton_polish

log = logging.getLogger(__name__)

SERIES_RADIUS = 1e-4
SPURIOUS_FACTOR = 10.0
BRANCH_CUT_TOL = 1e-10
DEFAULT_N_MAX = 6
DEFAULT_POLE_RADIUS = 0.05
DEFAULT_TOL = 1e-9
LINK_THRESHOLD = 0.5
LINK_TOL = 1e-3
AXIS_SNAP = 1e-9
CONVERGED_FLOOR = 1e-9


@dataclass(frozen=True)
class WaveguideGeometry:
    """Cross-section ``L2 x L3``, slab on ``(0, slab_end)``, guide cut at ``X``."""

    L2: float
    L3: float
    slab_end: float = 1.0
    X: float = math.inf

    def __post_init__(self):
        for name in ("L2", "L3", "slab_end"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInput(f"{name} must be a positive real, got {v!r}")
        if not self.X > self.slab_end:
            raise InvalidInput(f"X={self.X} must exceed slab_end={self.slab_end}")

    @classmethod
    def default(cls, X: float = math.inf) -> "WaveguideGeometry":
        return cls(L2=1.0, L3=math.pi, slab_end=1.0, X=X)

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.X)

    def with_length(self, X: float) -> "WaveguideGeometry":
        return WaveguideGeometry(self.L2, self.L3, self.slab_end, X)


@dataclass(frozen=True, order=True)
class ModeIndex:
    n2: int
    n3: int

    def __post_init__(self):
        if self.n2 < 1 or self.n3 < 1:
            raise InvalidInput(f"mode indices must be >= 1, got {(self.n2, self.n3)}")


def modes(n_max: int) -> list[ModeIndex]:
    return [ModeIndex(a, b) for a in range(1, n_max + 1) for b in range(1, n_max + 1)]


def cutoff(mode: ModeIndex, geometry: WaveguideGeometry) -> float:
    """Squared transverse wavenumber kappa_n**2."""
    return (math.pi * mode.n2 / geometry.L2) ** 2 + (math.pi * mode.n3 / geometry.L3) ** 2


def lambda2_sq(omega, mode: ModeIndex, geometry: WaveguideGeometry):
    return cutoff(mode, geometry) - omega * omega


def lambda1_sq(omega, mode: ModeIndex, geometry: WaveguideGeometry, params: MaterialParams):
    return cutoff(mode, geometry) - model.f_eval(omega, params, use_slab=True)


def principal_sqrt(q):
    """Square root with Re >= 0; negative reals map to +i*sqrt(|q|)."""
    if isinstance(q, (complex, float, int)):
        r = cmath.sqrt(q)
        return -r if r.real == 0 and r.imag < 0 else r
    r = np.sqrt(np.asarray(q, dtype=complex))
    r = np.where((r.real == 0) & (r.imag < 0), -r, r)
    return r if r.ndim else complex(r)


# --- even hyperbolic building blocks ---------------------------------------------


def _hyp_scaled(q):
    """cosh(sqrt q) and sinh(sqrt q)/sqrt q, both times exp(-|Re sqrt q|).

    Both are entire in ``q``; the shared scale factor is positive, so these
    can be combined freely without disturbing phases.  Returns
    ``(cosh_s, sinhc_s, log_scale)``.
    """
    if isinstance(q, (complex, float, int)):
        return _hyp_scaled_scalar(complex(q))
    scalar = np.ndim(q) == 0
    q = np.atleast_1d(np.asarray(q, dtype=complex))
    a = np.asarray(principal_sqrt(q))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e2 = np.exp(-2 * a)
        phase = np.exp(1j * a.imag)
        cosh_s = phase * (1 + e2) / 2
        sinhc_s = phase * (1 - e2) / (2 * a)
    small = np.abs(a) < SERIES_RADIUS
    if np.any(small):
        qs, damp = q[small], np.exp(-a.real[small])
        cosh_s[small] = (1 + qs / 2 + qs**2 / 24) * damp
        sinhc_s[small] = (1 + qs / 6 + qs**2 / 120) * damp
    if scalar:
        return complex(cosh_s[0]), complex(sinhc_s[0]), float(a.real[0])
    return cosh_s, sinhc_s, a.real


def _hyp_scaled_scalar(q: complex):
    a = principal_sqrt(q)
    if abs(a) < SERIES_RADIUS:
        damp = math.exp(-a.real)
        return (1 + q / 2 + q * q / 24) * damp, (1 + q / 6 + q * q / 120) * damp, a.real
    e2 = cmath.exp(-2 * a)
    phase = cmath.exp(1j * a.imag)
    return phase * (1 + e2) / 2, phase * (1 - e2) / (2 * a), a.real


def _z_coth_z(q):
    """sqrt(q) coth(sqrt(q)); even in the root, with a pole wherever sinh vanishes."""
    a = np.asarray(principal_sqrt(q), dtype=complex)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e2 = np.exp(-2 * a)
        out = a * (1 + e2) / (1 - e2)
    small = np.abs(a) < SERIES_RADIUS
    if np.any(small):
        qq = np.asarray(q, dtype=complex)
        out = np.where(small, 1 + qq / 3 - qq**2 / 45, out)
    return out


def _check_branch_cut(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry):
    kappa = math.sqrt(cutoff(mode, geometry))
    if abs(omega.imag) < BRANCH_CUT_TOL and abs(omega.real) >= kappa - BRANCH_CUT_TOL:
        raise BranchCut(f"omega={omega} lies on the decay branch cut |Re omega| >= {kappa:.6g}")


# --- dispersion functions -----------------------------------------------------------


def full_hunt(omega, mode: ModeIndex, geometry: WaveguideGeometry, params: MaterialParams):
    """G(omega) times exp(-|Re l1 s|); vectorised, no cut checks."""
    s = geometry.slab_end
    l1sq = lambda1_sq(omega, mode, geometry, params)
    ch, shc, _ = _hyp_scaled(l1sq * s * s)
    l2 = principal_sqrt(lambda2_sq(omega, mode, geometry))
    return ch + l2 * s * shc


def truncated_hunt(omega, mode: ModeIndex, geometry: WaveguideGeometry, params: MaterialParams):
    """H(omega) times exp(-|Re l1 s| - |Re l2 (X-s)|); vectorised and cut-free."""
    s = geometry.slab_end
    ell = geometry.X - geometry.slab_end
    ch1, shc1, _ = _hyp_scaled(lambda1_sq(omega, mode, geometry, params) * s * s)
    ch2, shc2, _ = _hyp_scaled(lambda2_sq(omega, mode, geometry) * ell * ell)
    return ell * ch1 * shc2 + s * ch2 * shc1


def _unscale(value, log_scale):
    if np.any(log_scale > 700):
        raise OverflowError("dispersion value exceeds double range; use the *_hunt form")
    out = value * np.exp(log_scale)
    return out if np.ndim(out) else complex(out)


def dispersion_full(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry,
                    params: MaterialParams) -> complex:
    """Regularised full-guide function G; zero exactly at the eigenfrequencies.

    Raises
    ------
    BranchCut
        Within 1e-10 of the decay cut (real omega with omega**2 >= kappa**2).
    PoleAtOmega
        At a damping pole.
    """
    omega = complex(omega)
    _check_branch_cut(omega, mode, geometry)
    s = geometry.slab_end
    scale = principal_sqrt(lambda1_sq(omega, mode, geometry, params) * s * s).real
    return _unscale(full_hunt(omega, mode, geometry, params), scale)


def raw_residual_full(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry,
                      params: MaterialParams) -> complex:
    """l1 coth(l1 s) + l2 evaluated directly."""
    omega = complex(omega)
    _check_branch_cut(omega, mode, geometry)
    s = geometry.slab_end
    a = complex(_z_coth_z(lambda1_sq(omega, mode, geometry, params) * s * s)) / s
    return a + principal_sqrt(lambda2_sq(omega, mode, geometry))


def dispersion_truncated(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry,
                         params: MaterialParams) -> complex:
    """Regularised truncated-guide function H (entire off the damping poles).

    Hyperbolic factors are evaluated in log-scaled form; ``OverflowError`` is
    raised only if the final value itself is not representable.
    """
    if not geometry.truncated:
        raise InvalidInput("dispersion_truncated needs a finite X")
    omega = complex(omega)
    s, ell = geometry.slab_end, geometry.X - geometry.slab_end
    sc1 = principal_sqrt(lambda1_sq(omega, mode, geometry, params) * s * s).real
    sc2 = principal_sqrt(lambda2_sq(omega, mode, geometry) * ell * ell).real
    return _unscale(truncated_hunt(omega, mode, geometry, params), sc1 + sc2)


def raw_residual_truncated(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry,
                           params: MaterialParams) -> complex:
    """l1 coth(l1 s) + l2 coth(l2 (X-s)) evaluated directly."""
    omega = complex(omega)
    s, ell = geometry.slab_end, geometry.X - geometry.slab_end
    a = complex(_z_coth_z(lambda1_sq(omega, mode, geometry, params) * s * s)) / s
    b = complex(_z_coth_z(lambda2_sq(omega, mode, geometry) * ell * ell)) / ell
    return a + b


def hunt_function(mode: ModeIndex, geometry: WaveguideGeometry, params: MaterialParams):
    if geometry.truncated:
        return lambda w: truncated_hunt(w, mode, geometry, params)
    return lambda w: full_hunt(w, mode, geometry, params)


def raw_residual(omega: complex, mode: ModeIndex, geometry: WaveguideGeometry,
                 params: MaterialParams) -> complex:
    if geometry.truncated:
        return raw_residual_truncated(omega, mode, geometry, params)
    return raw_residual_full(omega, mode, geometry, params)


# --- spectrum sweeps ------------------------------------------------------------------


TRUE_EIG = "TrueEig"
TRUNCATED_EIG = "TruncatedEig"
POLLUTION_CANDIDATE = "PollutionCandidate"
CONVERGED = "Converged"

CONVERGES = "ConvergesToTrueEig"
ACCUMULATES = "AccumulatesOnWe"
UNDECIDED = "Undecided"


@dataclass
class SpectrumPoint:
    mode: ModeIndex
    omega: complex
    residual: float
    winding: int
    kind: str
    in_strip: bool = True
    in_enc: bool = True
    in_gamma: bool = True
    sigma_tag: str = model.RegionTag.EXCLUDED.value


@dataclass
class TrajectoryReport:
    """One eigenvalue followed across increasing truncation lengths."""

    mode: ModeIndex
    chain_id: int
    chain: list[tuple[float, complex]]
    limit_class: str = UNDECIDED
    target: complex | None = None
    distances: list[float] = field(default_factory=list)
    broken: bool = False


@dataclass
class SpectrumReport:
    metadata: dict = field(default_factory=dict)
    points: list[SpectrumPoint] = field(default_factory=list)
    curves: dict[str, list[complex]] = field(default_factory=dict)
    sets: dict = field(default_factory=dict)
    trajectories: list[TrajectoryReport] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _pole_free_tiles(region: SearchRegion, params: MaterialParams,
                     radius: float) -> list[SearchRegion]:
    """Cover ``region`` by rectangles that keep clear of squares around the poles."""
    xs = sorted({region.re_min, region.re_max}
                | {x for x in (-radius, radius) if region.re_min < x < region.re_max})
    ys = {region.im_min, region.im_max}
    for p in params.poles:
        ys |= {y for y in (p.imag - radius, p.imag + radius) if region.im_min < y < region.im_max}
    ys = sorted(ys)
    tiles = []
    for x0, x1 in zip(xs, xs[1:]):
        for y0, y1 in zip(ys, ys[1:]):
            blocked = any(x0 < p.real + radius and x1 > p.real - radius
                          and y0 < p.imag + radius and y1 > p.imag - radius
                          for p in params.poles)
            if not blocked:
                tiles.append(SearchRegion(x0, x1, y0, y1, region.max_depth,
                                          region.boundary_samples))
    return tiles


def _search_region(region: SearchRegion, geometry: WaveguideGeometry) -> SearchRegion:
    if geometry.truncated or region.im_max <= -1e-6:
        return region
    if region.im_min >= -1e-6:
        raise InvalidInput("full-guide search needs part of the region below Im = -1e-6")
    return SearchRegion(region.re_min, region.re_max, region.im_min, -1e-6,
                        region.max_depth, region.boundary_samples)


def classify_point(point: SpectrumPoint, params: MaterialParams) -> SpectrumPoint:
    w = point.omega
    point.in_strip = model.strip_contains(w, params)
    point.in_enc = model.enc_contains(w, params)
    point.in_gamma = model.gamma_set_contains(w, params)
    point.sigma_tag = model.classify_sigma(w, params.gamma_m).value
    return point


def mode_spectrum(mode: ModeIndex, geometry: WaveguideGeometry, params: MaterialParams,
                  region: SearchRegion, tol: float = DEFAULT_TOL,
                  pole_radius: float = DEFAULT_POLE_RADIUS) -> tuple[list[SpectrumPoint], list[str]]:
    """Certified eigenfrequencies of one transverse mode inside ``region``."""
    region = _search_region(region, geometry)
    hunt = hunt_function(mode, geometry, params)
    raw = lambda w: raw_residual(w, mode, geometry, params)  # noqa: E731
    kind = TRUNCATED_EIG if geometry.truncated else TRUE_EIG
    points, warnings = [], []
    for tile in _pole_free_tiles(region, params, pole_radius):
        try:
            roots = isolate_roots(hunt, tile, tol_residual=tol * 1e-2)
        except SpectraError as exc:
            warnings.append(f"mode {mode.n2},{mode.n3}: {type(exc).__name__}: {exc}")
            continue
        for r in roots:
            z = r.value
            res = abs(raw(z))
            if res >= tol:
                z2, res2 = newton_polish(raw, z, tol * 1e-2)
                if r.region.contains(z2) and res2 < res:
                    z, res = z2, res2
            if res > SPURIOUS_FACTOR * tol:
                continue  # zero of the regularised form only
            if 0 < abs(z.real) <= AXIS_SNAP * (1 + abs(z)):
                # F(-conj w) = conj F(w), so simple zeros near the axis sit on it
                z0 = complex(0.0, z.imag)
                res0 = abs(raw(z0))
                if res0 <= max(res, tol):
                    z, res = z0, res0
            if res >= tol:
                warnings.append(f"mode {mode.n2},{mode.n3}: root {z:.12g} residual {res:.3g}")
                continue
            if min(abs(z - p) for p in params.poles) < 1e-6:
                continue
            points.append(classify_point(
                SpectrumPoint(mode, complex(z), float(res), r.winding, kind), params))
    return points, warnings


def _canonical(points: Iterable[SpectrumPoint]) -> list[SpectrumPoint]:
    return sorted(points, key=lambda p: (p.mode.n2, p.mode.n3, p.omega.real, p.omega.imag))


def spectrum(geometry: WaveguideGeometry, params: MaterialParams, region: SearchRegion,
             n_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL,
             pole_radius: float = DEFAULT_POLE_RADIUS, threads: int = 1,
             mode_list: Sequence[ModeIndex] | None = None) -> SpectrumReport:
    """Eigenfrequencies of every mode with n2, n3 <= n_max inside ``region``.

    Failures in one mode are recorded in ``report.warnings`` and do not stop
    the others.
    """
    todo = list(mode_list) if mode_list is not None else modes(n_max)

    def run(mode):
        return mode_spectrum(mode, geometry, params, region, tol, pole_radius)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(m) for m in todo]
    report = SpectrumReport(metadata={
        "X": geometry.X if geometry.truncated else "inf", "n_max": n_max, "tol": tol, "pole_radius": pole_radius,
        "modes": [[m.n2, m.n3] for m in todo],
    })
    for pts, warns in results:
        report.points.extend(pts)
        report.warnings.extend(warns)
    report.points = _canonical(report.points)
    return report


# --- truncation study -------------------------------------------------------------------


def _link(previous: list[complex], current: list[complex],
          threshold: float = LINK_THRESHOLD) -> dict[int, int]:
    """Greedy nearest-neighbour matching, shortest links first."""
    pairs = sorted((abs(a - b), i, j) for i, a in enumerate(previous)
                   for j, b in enumerate(current) if abs(a - b) < threshold)
    used_i, used_j, out = set(), set(), {}
    for _, i, j in pairs:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        out[i] = j
    return out


def _strictly_decreasing(values: Sequence[float], floor: float = 0.0) -> bool:
    """Each step decreases, except that values already at ``floor`` may stall."""
    return all(b < a or (a <= floor and b <= floor) for a, b in zip(values, values[1:]))


def classify_trajectory(traj: TrajectoryReport, true_roots: Sequence[complex],
                        we: model.HalfLinePair | None, link_tol: float = LINK_TOL) -> TrajectoryReport:
    omegas = [w for _, w in traj.chain]
    if len(omegas) < 2:
        traj.limit_class = UNDECIDED
        return traj
    if true_roots:
        target = min(true_roots, key=lambda r: abs(r - omegas[-1]))
        dists = [abs(w - target) for w in omegas]
        if _strictly_decreasing(dists, CONVERGED_FLOOR) and dists[-1] < 10 * link_tol:
            traj.limit_class, traj.target, traj.distances = CONVERGES, target, dists
            return traj
    if we is not None:
        dists = [float(we.distance(w)) for w in omegas]
        if _strictly_decreasing([abs(w.imag) for w in omegas]) and _strictly_decreasing(dists):
            traj.limit_class, traj.distances = ACCUMULATES, dists
            return traj
    traj.limit_class = UNDECIDED
    return traj


def truncation_study(geometry: WaveguideGeometry, params: MaterialParams,
                     X_list: Sequence[float], region: SearchRegion,
                     n_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL,
                     pole_radius: float = DEFAULT_POLE_RADIUS, threads: int = 1,
                     mode_list: Sequence[ModeIndex] | None = None,
                     reference: SpectrumReport | None = None,
                     ) -> tuple[list[TrajectoryReport], dict[float, SpectrumReport], SpectrumReport]:
    """Follow truncated-guide eigenvalues as X grows and classify their limits.

    Returns the trajectories, the per-X spectra and the full-guide spectrum
    used as the convergence reference.
    """
    X_list = [float(x) for x in X_list]
    if len(X_list) < 3:
        raise InvalidInput("truncation_study needs at least three X values")
    if any(b <= a for a, b in zip(X_list, X_list[1:])):
        raise InvalidInput("X values must be strictly increasing")
    kwargs = dict(n_max=n_max, tol=tol, pole_radius=pole_radius, threads=threads,
                  mode_list=mode_list)
    if reference is None:
        reference = spectrum(geometry.with_length(math.inf), params, region, **kwargs)
    spectra = {X: spectrum(geometry.with_length(X), params, region, **kwargs) for X in X_list}
    we = model.we_s_infty(geometry, params) if params.vacuum_at_infinity else None

    todo = list(mode_list) if mode_list is not None else modes(n_max)
    trajectories: list[TrajectoryReport] = []
    next_id = 0
    for mode in todo:
        truth = [p.omega for p in reference.points if p.mode == mode]
        open_chains: list[TrajectoryReport] = []
        for X in X_list:
            current = [p.omega for p in spectra[X].points if p.mode == mode]
            links = _link([c.chain[-1][1] for c in open_chains], current)
            still_open = []
            for i, chain in enumerate(open_chains):
                if i in links:
                    chain.chain.append((X, current[links[i]]))
                    still_open.append(chain)
                else:
                    chain.broken = True
            taken = set(links.values())
            for j, w in enumerate(current):
                if j not in taken:
                    chain = TrajectoryReport(mode, next_id, [(X, w)])
                    next_id += 1
                    trajectories.append(chain)
                    still_open.append(chain)
            open_chains = still_open
        for chain in trajectories:
            if chain.mode == mode:
                classify_trajectory(chain, truth, we)

    kinds = {CONVERGES: CONVERGED, ACCUMULATES: POLLUTION_CANDIDATE}
    for traj in trajectories:
        if traj.limit_class in kinds:
            members = set(traj.chain)
            for X, rep in spectra.items():
                for p in rep.points:
                    if p.mode == traj.mode and (X, p.omega) in members:
                        p.kind = kinds[traj.limit_class]
    return trajectories, spectra, reference
