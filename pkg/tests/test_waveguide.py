import cmath
import math

import pytest

from drude_spectra import model
from drude_spectra.errors import BranchCut, InvalidInput
from drude_spectra.model import MaterialParams
from drude_spectra.rootfinding import SearchRegion, isolate_roots
from drude_spectra.waveguide import (ACCUMULATES, CONVERGES, UNDECIDED, ModeIndex,
                                     TrajectoryReport, WaveguideGeometry, _link,
                                     classify_trajectory, cutoff, dispersion_full,
                                     dispersion_truncated, hunt_function, lambda1_sq, lambda2_sq, mode_spectrum,
                                     principal_sqrt, raw_residual, spectrum, truncation_study)

P = MaterialParams.default()
G = WaveguideGeometry.default()
M11 = ModeIndex(1, 1)
# relative distances below this are rounding noise of the certified roots
ROUNDING_FLOOR = 1e-12


def test_geometry_and_mode_validation():
    with pytest.raises(InvalidInput):
        WaveguideGeometry(1.0, math.pi, 1.0, X=0.5)
    with pytest.raises(InvalidInput):
        WaveguideGeometry(0.0, 1.0)
    with pytest.raises(InvalidInput):
        ModeIndex(0, 1)


@pytest.mark.parametrize("mode,geometry,expected", [
    (M11, G, math.pi**2 + 1),
    (M11, WaveguideGeometry(1.0, 1.0), 2 * math.pi**2),
    (ModeIndex(2, 1), G, 4 * math.pi**2 + 1),
])
def test_cutoff(mode, geometry, expected):
    assert cutoff(mode, geometry) == pytest.approx(expected)


def test_lambda_squares():
    k = math.pi**2 + 1
    assert lambda2_sq(0, M11, G) == pytest.approx(k)
    assert lambda1_sq(0, M11, G, P) == pytest.approx(k + 1000)
    assert abs(lambda2_sq(math.sqrt(k), M11, G)) < 1e-12


def test_principal_sqrt_branch():
    assert principal_sqrt(-4) == 2j
    assert principal_sqrt(-4 - 0j).real >= 0
    assert principal_sqrt(3 - 4j) == pytest.approx(2 - 1j)


def test_full_dispersion_removable_point():
    # pick omega with f(omega) = kappa**2, i.e. lambda1 = 0
    k = cutoff(M11, G)
    quartic = model.s_infty_quartic(k, model.MaterialParams(
        P.gamma_e, P.gamma_m, 0, 0, P.alpha_e, P.alpha_m))
    from drude_spectra.rootfinding import poly_roots
    w = next(r for r in poly_roots(quartic) if r.imag < -1e-3 and abs(r.real) > 1e-3)
    assert abs(lambda1_sq(w, M11, G, P)) < 1e-8
    l2 = principal_sqrt(lambda2_sq(w, M11, G))
    assert dispersion_full(w, M11, G, P) == pytest.approx(1 + l2, abs=1e-6)


def test_full_dispersion_finite_at_half_pole():
    value = dispersion_full(-2j, M11, G, P)
    assert cmath.isfinite(value)


@pytest.mark.parametrize("X", [math.inf, 5.0])
def test_dispersion_conj_symmetry(X):
    g = G.with_length(X)
    fn = dispersion_full if math.isinf(X) else dispersion_truncated
    w = 2 - 0.5j
    assert fn(model.reflect(w), M11, g, P) == pytest.approx(fn(w, M11, g, P).conjugate(), rel=1e-12)


def test_branch_cut_rejected():
    with pytest.raises(BranchCut):
        dispersion_full(5.0, M11, G, P)
    dispersion_full(1.0, M11, G, P)  # below the cutoff: fine


def test_truncated_lambda2_zero_limit():
    X = 6.0
    g = G.with_length(X)
    w = math.sqrt(cutoff(M11, g)) + 0j
    l1 = principal_sqrt(lambda1_sq(w, M11, g, P))
    expected = (l1 * cmath.cosh(l1) * (X - 1) + cmath.sinh(l1)) / l1
    assert dispersion_truncated(w, M11, g, P) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("X", [5.0, 10.0, 20.0])
def test_truncated_tends_to_full(X):
    w = 2 - 0.5j
    g = G.with_length(X)
    l2 = principal_sqrt(lambda2_sq(w, M11, g))
    ell = X - 1
    h = dispersion_truncated(w, M11, g, P)
    normalized = h * 2 * l2 / cmath.exp(l2 * ell)
    full = dispersion_full(w, M11, G, P)
    bound = 10 * math.exp(-2 * l2.real * ell) * max(1, abs(full))
    # past X ~ 8 the exponential term drops below double rounding of |G|
    assert abs(normalized - full) <= max(bound, 1e-13 * abs(full))
    if X == 5.0:
        assert bound > 1e-13 * abs(full)


def test_truncated_is_cut_free():
    g = G.with_length(5.0)
    assert cmath.isfinite(dispersion_truncated(5.0, M11, g, P))


def test_truncated_large_X_no_overflow():
    g = G.with_length(400.0)
    assert raw_residual(3 - 1j, M11, g, P) == pytest.approx(raw_residual(3 - 1j, M11, G, P))


# --- spectra ---------------------------------------------------------------------------------


def test_vacuum_null_test():
    vac = MaterialParams(4.0, 1.0)
    points, _ = mode_spectrum(M11, G, vac, SearchRegion(-10, 10, -4.5, -1e-3))
    assert points == []


@pytest.fixture(scope="module")
def mode11_points():
    points, warnings = mode_spectrum(M11, G, P, SearchRegion(0.5, 25, -4.5, -1e-6))
    return points


def test_mode11_spectrum_nonempty_and_enclosed(mode11_points):
    assert mode11_points
    for p in mode11_points:
        assert p.in_gamma and p.in_strip
        assert p.winding == 1 and p.residual < 1e-9
        assert min(abs(p.omega - pole) for pole in P.poles) > 1e-6


def test_mode11_raw_residual_is_small(mode11_points):
    for p in mode11_points:
        assert abs(raw_residual(p.omega, M11, G, P)) < 1e-9


def test_spectrum_reflection_closed():
    rep = spectrum(G, P, SearchRegion(-8, 8, -4.5, -1e-6), mode_list=[M11, ModeIndex(2, 1)])
    omegas = [p.omega for p in rep.points]
    assert omegas
    for w in omegas:
        assert min(abs(model.reflect(w) - v) for v in omegas) < 1e-8
    # canonical order
    keys = [(p.mode, p.omega.real, p.omega.imag) for p in rep.points]
    assert keys == sorted(keys)


def test_truncated_spectrum_in_gamma():
    rep = spectrum(G.with_length(10.0), P, SearchRegion(-8, 8, -4.5, -1e-6), mode_list=[M11])
    assert rep.points and all(p.in_gamma for p in rep.points)
    assert rep.metadata["X"] == 10.0


# --- linking and classification ----------------------------------------------------------------


def test_link_greedy_nearest():
    prev = [0j, 1 + 0j]
    cur = [1.1 + 0j, 0.05 + 0j, 5 + 0j]
    assert _link(prev, cur) == {0: 1, 1: 0}
    assert _link([0j], [0.6 + 0j]) == {}


def test_classify_converging_chain():
    chain = TrajectoryReport(M11, 0, [(5, 1 - 1.1j), (10, 1 - 1.001j), (25, 1 - 1.0000001j)])
    classify_trajectory(chain, [1 - 1j, 3 - 1j], model.HalfLinePair(1.0))
    assert chain.limit_class == CONVERGES and chain.target == 1 - 1j


def test_classify_accumulating_chain():
    chain = TrajectoryReport(M11, 0, [(5, 3 - 0.5j), (10, 3 - 0.2j), (25, 3 - 0.05j)])
    classify_trajectory(chain, [1 - 1j], model.HalfLinePair(1.0))
    assert chain.limit_class == ACCUMULATES
    assert chain.distances == pytest.approx([0.5, 0.2, 0.05])


def test_classify_undecided():
    chain = TrajectoryReport(M11, 0, [(5, 3 - 0.2j), (10, 3 - 0.5j), (25, 3 - 0.1j)])
    classify_trajectory(chain, [1 - 1j], model.HalfLinePair(1.0))
    assert chain.limit_class == UNDECIDED
    single = TrajectoryReport(M11, 1, [(5, 3 - 0.2j)])
    assert classify_trajectory(single, [], None).limit_class == UNDECIDED


def test_truncation_study_rejects_short_or_unsorted_lists():
    with pytest.raises(InvalidInput):
        truncation_study(G, P, [5, 10], SearchRegion(0.5, 2, -1, -0.1), mode_list=[M11])
    with pytest.raises(InvalidInput):
        truncation_study(G, P, [5, 10, 8], SearchRegion(0.5, 2, -1, -0.1), mode_list=[M11])


@pytest.fixture(scope="module")
def study():
    return truncation_study(G, P, [5.0, 10.0, 25.0], SearchRegion(-10, 10, -5, -1e-6),
                            mode_list=[M11])


def test_study_has_accumulating_chain(study):
    trajectories, _, _ = study
    hits = [t for t in trajectories if t.limit_class == ACCUMULATES
            and abs(t.chain[-1][1].imag) < 0.2 and t.chain[-1][1].real >= 1.0]
    assert hits


def test_study_converging_chains_are_exponential(study):
    trajectories, _, _ = study
    converging = [t for t in trajectories if t.limit_class == CONVERGES]
    assert converging
    for t in converging:
        rate = principal_sqrt(lambda2_sq(t.target, M11, G)).real
        xs = [x for x, _ in t.chain]
        for k in range(len(xs) - 1):
            bound = math.exp(-1.5 * rate * (xs[k + 1] - xs[k]))
            floor = ROUNDING_FLOOR * (1 + abs(t.target))
            assert t.distances[k + 1] <= max(bound * t.distances[k], floor)


def test_study_chain_limits_are_predicted(study):
    trajectories, _, reference = study
    we = model.we_s_infty(G, P)
    targets = [p.omega for p in reference.points] + model.sigma_e_G_points(P)
    for t in trajectories:
        if len(t.chain) < 3:
            continue
        w = t.chain[-1][1]
        assert min([we.distance(w)] + [abs(w - r) for r in targets]) <= 0.05


def test_study_marks_point_kinds(study):
    _, spectra, _ = study
    kinds = {p.kind for rep in spectra.values() for p in rep.points}
    assert {"Converged", "PollutionCandidate"} <= kinds


def test_truncated_relation_has_gain_zeros_near_cutoff():
    # Im f < 0 just above the (1,1) cutoff, so the scalar truncated relation is
    # not passive there; its zeros may cross into Im > 0 by ~1e-5
    points, _ = mode_spectrum(M11, G.with_length(25.0), P, SearchRegion(3.2, 3.5, 1e-7, 0.5))
    assert points
    assert all(0 < p.omega.imag < 1e-4 and p.residual < 1e-9 for p in points)
    assert not any(p.in_strip for p in points)
    assert model.f_eval(3.3 + 0j, P).imag < 0
    upper = SearchRegion(0.95, 30, 1e-7, 0.5)
    assert isolate_roots(hunt_function(M11, G, P), upper, tol_residual=1e-9) == []
