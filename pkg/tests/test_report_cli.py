import csv
import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drude_spectra.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from drude_spectra.report import dump_report, load_report
from drude_spectra.svg import Plot, Polyline, Scatter
from drude_spectra.errors import InvalidRegion
from drude_spectra.waveguide import ModeIndex, SpectrumPoint, SpectrumReport, TrajectoryReport

GOLDEN_HEADERS = {
    "enclosure.csv": "re,im,in_strip,in_enc,in_gamma,sigma_tag",
    "essential.csv": "source,re,im",
    "eigs.csv": "n2,n3,re_omega,im_omega,residual,winding,in_gamma,sigma_tag",
    "study.csv": "X,n2,n3,re_omega,im_omega,chain_id,class,dist_to_We,dist_to_true",
    "oracle.csv": "n2,n3,h,re_fd,im_fd,gap_to_dispersion,observed_order",
    "asymptotics.csv": "t,branch,re_asym,im_asym,re_quartic,im_quartic,abs_error",
}
SMALL_SEARCH = {"re_min": -6.0, "re_max": 6.0, "im_min": -4.5, "im_max": -1e-6, "modes": [[1, 1]]}


def run(tmp_path, command, config, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config), encoding="utf-8")
    out = tmp_path / f"out-{command}"
    return main([command, "--config", str(path), "--out", str(out)]), out


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- JSON reports ------------------------------------------------------------------------

finite = st.floats(-1e6, 1e6, allow_nan=False)
cplx = st.builds(complex, finite, finite)
mode = st.builds(ModeIndex, st.integers(1, 6), st.integers(1, 6))
point = st.builds(SpectrumPoint, mode, cplx, st.floats(0, 1), st.integers(-3, 3),
                  st.sampled_from(["TrueEig", "TruncatedEig", "Converged"]),
                  st.booleans(), st.booleans(), st.booleans(),
                  st.sampled_from(["Sigma1", "Sigma2", "Excluded"]))
trajectory = st.builds(
    TrajectoryReport, mode, st.integers(0, 100),
    st.lists(st.tuples(st.floats(1.5, 100), cplx), max_size=4),
    st.sampled_from(["ConvergesToTrueEig", "AccumulatesOnWe", "Undecided"]),
    st.none() | cplx, st.lists(st.floats(0, 10), max_size=4), st.booleans())
report = st.builds(
    SpectrumReport,
    st.dictionaries(st.text(max_size=5), st.integers() | st.text(max_size=5), max_size=3),
    st.lists(point, max_size=5),
    st.dictionaries(st.text(max_size=5), st.lists(cplx, max_size=4), max_size=2),
    st.dictionaries(st.text(max_size=5), st.lists(cplx, max_size=3) | finite, max_size=3),
    st.lists(trajectory, max_size=3),
    st.lists(st.text(max_size=10), max_size=3))


@settings(max_examples=60, deadline=None)
@given(report)
def test_report_json_round_trip(rep):
    assert load_report(dump_report(rep)) == rep


# --- SVG -------------------------------------------------------------------------------------


def _plot():
    p = Plot(-3, 3, -2, 1, title="t")
    p.add(Scatter([1 - 1j, -1 - 1j], "#000", "circle", 1.0, "pts"))
    p.add(Scatter([0.5 - 0.5j], "#f00", "cross", 1.0, "x"))
    p.add(Polyline([-3, 3], "#0f0", 1.0, "4,2", "axis"))
    return p


def test_svg_is_valid_xml_and_deterministic():
    a, b = _plot().render(), _plot().render()
    assert a == b
    root = ET.fromstring(a)
    assert root.tag.endswith("svg")


def test_svg_empty_window_rejected():
    with pytest.raises(InvalidRegion):
        Plot(1, 1, 0, 1)


# --- CLI ----------------------------------------------------------------------------------------


def test_missing_config_is_usage_error(tmp_path):
    assert main(["eigs", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE


def test_bad_json_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["eigs", "--config", str(path)]) == EXIT_USAGE


@pytest.mark.parametrize("config", [
    {"material": {"gamma_e": 0.0}},
    {"material": {"gamma_e": -4.0}},
    {"search": {"tolerance": 1e-9}},
    {"plots": {}},
    {"essential": {"t_min": 10.0, "t_max": 1.0}},
    {"enclosure": {"window": [1.0, 1.0, -6.0, 1.0]}},
    {"study": {"X_list": [5.0, 10.0]}},
    {"output": {"formats": ["png"]}},
])
def test_invalid_configs_exit_2(tmp_path, config):
    code, _ = run(tmp_path, "enclosure", config)
    assert code == EXIT_USAGE


def test_unknown_command_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["plot", "--config", "x.json"])
    assert exc.value.code == 2


def test_enclosure_command(tmp_path):
    code, out = run(tmp_path, "enclosure", {})
    assert code == EXIT_OK
    rows = read_rows(out / "enclosure.csv")
    assert len(rows) == 200 * 200
    for r in rows:
        if r["in_gamma"] == "1" and float(r["re"]) != 0:
            assert r["in_strip"] == "1"
    ET.parse(out / "enclosure.svg")
    assert json.loads((out / "warnings.json").read_text()) == []


def test_enclosure_svg_byte_deterministic(tmp_path):
    cfg = {"enclosure": {"nx": 20, "ny": 20}}
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, out1 = run(tmp_path / "a", "enclosure", cfg)
    _, out2 = run(tmp_path / "b", "enclosure", cfg)
    assert (out1 / "enclosure.svg").read_bytes() == (out2 / "enclosure.svg").read_bytes()


def test_essential_command(tmp_path):
    code, out = run(tmp_path, "essential", {})
    assert code == EXIT_OK
    rows = read_rows(out / "essential.csv")
    g = [complex(float(r["re"]), float(r["im"])) for r in rows if r["source"] == "G_points"]
    assert len(g) == 6
    assert min(abs(z - (14 - 2j)) for z in g) < 1e-12
    assert min(abs(z - (-14 - 2j)) for z in g) < 1e-12
    assert {r["source"] for r in rows} == {"s_infty", "G_points", "G_curve", "We_halfline"}
    # zero couplings at infinity: the curve lies on the real axis
    assert all(abs(float(r["im"])) < 1e-9 for r in rows if r["source"] == "s_infty")
    rep = load_report((out / "essential.json").read_text())
    assert len(rep.sets["sigma_e_G_points"]) == 6


def test_eigs_command(tmp_path):
    code, out = run(tmp_path, "eigs", {"search": SMALL_SEARCH})
    assert code == EXIT_OK
    rows = read_rows(out / "eigs.csv")
    assert rows
    assert all(r["winding"] == "1" and r["in_gamma"] == "1" for r in rows)
    assert all(float(r["residual"]) < 1e-9 for r in rows)
    rep = load_report((out / "eigs.json").read_text())
    assert len(rep.points) == len(rows)
    assert rep.metadata["config"]["search"]["modes"] == [[1, 1]]
    ET.parse(out / "eigs.svg")


def test_asymptotics_command(tmp_path):
    code, out = run(tmp_path, "asymptotics", {})
    assert code == EXIT_OK
    rows = read_rows(out / "asymptotics.csv")
    err = {(float(r["t"]), r["branch"]): float(r["abs_error"]) for r in rows}
    for branch in ("NearPoleE", "NearPoleM"):
        assert err[(1e8, branch)] / err[(1e6, branch)] <= 0.2


def test_oracle_check_command(tmp_path):
    cfg = {"oracle": {"h_list": [1 / 205, 1 / 410]}}
    code, out = run(tmp_path, "oracle-check", cfg)
    assert code == EXIT_OK
    rows = read_rows(out / "oracle.csv")
    finest = [r for r in rows if float(r["h"]) == 1 / 410]
    assert finest and all(float(r["gap_to_dispersion"]) < 5e-3 for r in finest)
    assert all(1.0 <= float(r["observed_order"]) <= 2.5 for r in rows)


def test_oracle_check_disabled(tmp_path):
    code, out = run(tmp_path, "oracle-check", {"oracle": {"enable": False}})
    assert code == EXIT_OK
    assert read_rows(out / "oracle.csv") == []
    assert json.loads((out / "warnings.json").read_text())


def test_oracle_region_on_pole_is_usage_error(tmp_path):
    cfg = {"oracle": {"region": [-1.0, 1.0, -3.0, -0.5], "h_list": [1 / 205]}}
    code, _ = run(tmp_path, "oracle-check", cfg)
    assert code == EXIT_USAGE


def test_total_failure_exits_1(tmp_path):
    # the region straddles the vacuum real-axis cut
    cfg = {"material": {"alpha_e": 0.0, "alpha_m": 0.0},
           "oracle": {"region": [0.5, 3.0, -0.5, -0.05], "modes": [[1, 1]], "h_list": [1 / 205]}}
    code, out = run(tmp_path, "oracle-check", cfg)
    assert code == EXIT_FAILURE
    assert json.loads((out / "warnings.json").read_text())


def test_truncate_study_command(tmp_path):
    cfg = {"search": {"re_min": -10.0, "re_max": 10.0, "modes": [[1, 1]]}}
    code, out = run(tmp_path, "truncate-study", cfg)
    assert code == EXIT_OK
    rows = read_rows(out / "study.csv")
    assert any(r["class"] == "AccumulatesOnWe" for r in rows)
    rep = load_report((out / "study.json").read_text())
    assert rep.metadata["classes"]["AccumulatesOnWe"] >= 1
    ET.parse(out / "study.svg")


@pytest.mark.parametrize("command", sorted(GOLDEN_HEADERS))
def test_csv_headers_golden(tmp_path, command):
    configs = {
        "enclosure.csv": ("enclosure", {"enclosure": {"nx": 3, "ny": 3}}),
        "essential.csv": ("essential", {"essential": {"n_samples": 4, "g_curve_samples": 4}}),
        "eigs.csv": ("eigs", {"search": {**SMALL_SEARCH, "re_min": 0.5, "re_max": 2.0}}),
        "study.csv": ("truncate-study", {"search": {**SMALL_SEARCH, "re_min": 0.5,
                                                    "re_max": 2.0}}),
        "oracle.csv": ("oracle-check", {"oracle": {"enable": False}}),
        "asymptotics.csv": ("asymptotics", {}),
    }
    cmd, cfg = configs[command]
    code, out = run(tmp_path, cmd, cfg)
    assert code == EXIT_OK
    header = (out / command).read_text(encoding="utf-8").splitlines()[0]
    assert header == GOLDEN_HEADERS[command]
