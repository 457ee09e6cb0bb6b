"""Command-line entry point ``drude-spectra``.

Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, model
from .config import ConfigError, RunConfig
from .errors import InvalidInput, SpectraError
from .fd_oracle import FdGrid, oracle_spectrum
from .model import AsymptoticBranch, MaterialParams
from .report import (ASYMPTOTICS_COLUMNS, EIGS_COLUMNS, ENCLOSURE_COLUMNS, ESSENTIAL_COLUMNS,
                     ORACLE_COLUMNS, STUDY_COLUMNS, dump_report, write_csv)
from .rootfinding import SearchRegion
from .svg import Plot, Polyline, Scatter
from .waveguide import (ACCUMULATES, CONVERGES, ModeIndex, SpectrumReport, mode_spectrum,
                        spectrum, truncation_study)

log = logging.getLogger("drude_spectra")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

BLUE, RED, BLACK, GREEN, GREY = "#1f4fd1", "#d11f1f", "#000000", "#1a9641", "#bbbbbb"
STUDY_COLORS = ("#fdae61", "#f46d43", "#a50026", "#7b3294", "#2c7bb6")


class ComputationFailed(Exception):
    """Every unit of work failed; details are in warnings.json."""


class Context:
    def __init__(self, cfg: RunConfig, out: Path, threads: int):
        self.cfg, self.out, self.threads = cfg, out, threads
        self.warnings: list[str] = []

    @property
    def formats(self) -> set[str]:
        return set(self.cfg.output.formats)

    def path(self, name: str) -> Path:
        return self.out / name

    def csv(self, name: str, columns, rows) -> None:
        if "csv" in self.formats:
            write_csv(self.path(name), columns, rows)

    def svg(self, name: str, plot: Plot) -> None:
        if "svg" in self.formats:
            self.path(name).write_text(plot.render(), encoding="utf-8")

    def report(self, name: str, report: SpectrumReport) -> None:
        if "json" in self.formats:
            report.metadata = {
                "config": self.cfg.to_dict(), "tool_version": __version__,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                **report.metadata,
            }
            self.path(name).write_text(dump_report(report), encoding="utf-8")

    def finish(self) -> None:
        self.path("warnings.json").write_text(
            json.dumps(self.warnings, indent=1) + "\n", encoding="utf-8")


# --- shared plot pieces -----------------------------------------------------------


def _base_plot(cfg: RunConfig, title: str, window: SearchRegion | None = None) -> Plot:
    w = window or cfg.region
    # keep the real axis (where W_e lives) in view
    return Plot(w.re_min, w.re_max, w.im_min, max(w.im_max, 0.25), title=title)


def _decorate(plot: Plot, cfg: RunConfig, params: MaterialParams) -> Plot:
    re_max = max(abs(plot.re_min), abs(plot.re_max))
    boundary = model.gamma_boundary(params, re_max)
    left = [z for z in boundary if z.real < 0]
    right = [z for z in boundary if z.real > 0]
    for part in (left, right):
        plot.add(Polyline(part, GREEN, 1.5, "6,3", "Gamma boundary"))
    for half in _we_segments(cfg, params, re_max):
        plot.add(Polyline(half, RED, 3.0, "", "W_e(S_inf)"))
    plot.add(Scatter(model.sigma_e_G_points(params), RED, "cross", 1.6, "sigma_e(G)"))
    plot.add(Scatter(list(params.poles), BLACK, "square", 1.2, "poles"))
    return plot


def _we_segments(cfg: RunConfig, params: MaterialParams, re_max: float) -> list[list[complex]]:
    if not params.vacuum_at_infinity:
        return []
    c = model.we_threshold(cfg.geometry_obj)
    if c >= re_max:
        return []
    return [[complex(-re_max, 0), complex(-c, 0)], [complex(c, 0), complex(re_max, 0)]]


def _report_sets(cfg: RunConfig, params: MaterialParams) -> dict:
    s = cfg.search
    re_max = max(abs(s.re_min), abs(s.re_max))
    return {
        "gamma_boundary": model.gamma_boundary(params, re_max),
        "we_threshold": model.we_threshold(cfg.geometry_obj),
        "sigma_e_G_points": model.sigma_e_G_points(params),
    }


# --- commands ---------------------------------------------------------------------


def cmd_enclosure(ctx: Context) -> None:
    cfg, params = ctx.cfg, ctx.cfg.params
    e = cfg.enclosure
    win = e.region()
    res = np.linspace(win.re_min, win.re_max, e.nx)
    ims = np.linspace(win.im_min, win.im_max, e.ny)
    rows, inside, strip_only = [], [], []
    for y in ims:
        for x in res:
            w = complex(float(x), float(y))
            flags = (model.strip_contains(w, params), model.enc_contains(w, params),
                     model.gamma_set_contains(w, params))
            rows.append((float(x), float(y), *flags, model.classify_sigma(w, params.gamma_m).value))
            if flags[2]:
                inside.append(w)
            elif flags[0]:
                strip_only.append(w)
    ctx.csv("enclosure.csv", ENCLOSURE_COLUMNS, rows)
    plot = _base_plot(cfg, "enclosure: strip (grey) and Gamma (green)", win)
    plot.add(Scatter(strip_only, GREY, "square", 0.4, "strip only"))
    plot.add(Scatter(inside, GREEN, "square", 0.4, "Gamma"))
    ctx.svg("enclosure.svg", _decorate(plot, cfg, params))


def _infinity_params(params: MaterialParams, surrogate: bool) -> MaterialParams:
    if surrogate and params.vacuum_at_infinity:
        return MaterialParams(params.gamma_e, params.gamma_m, params.alpha_e, params.alpha_m,
                              params.alpha_e, params.alpha_m)
    return params


def cmd_essential(ctx: Context) -> None:
    cfg, params = ctx.cfg, ctx.cfg.params
    t_min, t_max = cfg.t_range()
    es = cfg.essential
    rows = []
    curve = model.essential_curve_s_infty(params, t_min, t_max, es.n_samples)
    rows += [("s_infty", z.real, z.imag) for z in curve]
    g_points = model.sigma_e_G_points(params)
    rows += [("G_points", z.real, z.imag) for z in g_points]
    g_curve = model.sigma_e_G_curve((0.0, params.alpha_e), params.gamma_e, es.g_curve_samples)
    rows += [("G_curve", z.real, z.imag) for z in g_curve]
    s = cfg.search
    re_max = max(abs(s.re_min), abs(s.re_max))
    halves = _we_segments(cfg, params, re_max)
    if not params.vacuum_at_infinity:
        ctx.warnings.append("essential: W_e half-lines need zero couplings at infinity; skipped")
    for half in halves:
        rows += [("We_halfline", z.real, z.imag) for z in half]
    ctx.csv("essential.csv", ESSENTIAL_COLUMNS, rows)
    plot = _base_plot(cfg, "essential spectrum")
    plot.add(Scatter(curve, RED, "circle", 0.5, "S_inf curve"))
    plot.add(Scatter(g_curve, "#f4a582", "circle", 0.4, "sigma_e(G) curve"))
    ctx.svg("essential.svg", _decorate(plot, cfg, params))
    rep = SpectrumReport(curves={"s_infty": curve, "G_curve": g_curve},
                         sets=_report_sets(cfg, params))
    ctx.report("essential.json", rep)


def _eig_rows(points):
    for p in points:
        yield (p.mode.n2, p.mode.n3, p.omega.real, p.omega.imag, p.residual, p.winding,
               p.in_gamma, p.sigma_tag)


def _mode_count(cfg: RunConfig) -> int:
    return len(cfg.modes) if cfg.modes is not None else cfg.search.n_max ** 2


def cmd_eigs(ctx: Context) -> None:
    cfg, params = ctx.cfg, ctx.cfg.params
    s = cfg.search
    rep = spectrum(cfg.geometry_obj, params, cfg.region, n_max=s.n_max, tol=s.tol,
                   pole_radius=s.pole_radius, threads=ctx.threads, mode_list=cfg.modes)
    ctx.warnings.extend(rep.warnings)
    _raise_if_total_failure(rep, _mode_count(cfg))
    rep.sets = _report_sets(cfg, params)
    ctx.csv("eigs.csv", EIGS_COLUMNS, _eig_rows(rep.points))
    plot = _decorate(_base_plot(cfg, "eigenvalues (blue), essential sets (red)"), cfg, params)
    plot.add(Scatter([p.omega for p in rep.points], BLUE, "circle", 0.8, "eigenvalues"))
    ctx.svg("eigs.svg", plot)
    ctx.report("eigs.json", rep)


def _raise_if_total_failure(rep: SpectrumReport, n_modes: int) -> None:
    failed = {w.split(":")[0] for w in rep.warnings if "Error" in w or "Unresolved" in w
              or "Zero" in w}
    if not rep.points and n_modes and len(failed) >= n_modes:
        raise ComputationFailed("every mode failed")


def cmd_truncate_study(ctx: Context) -> None:
    cfg, params = ctx.cfg, ctx.cfg.params
    s = cfg.search
    xs = [float(x) for x in cfg.study.X_list]
    trajs, spectra, reference = truncation_study(
        cfg.geometry_obj, params, xs, cfg.region, n_max=s.n_max, tol=s.tol,
        pole_radius=s.pole_radius, threads=ctx.threads, mode_list=cfg.modes)
    ctx.warnings.extend(reference.warnings)
    for X in xs:
        ctx.warnings.extend(f"X={X:g}: {w}" for w in spectra[X].warnings)
    we = model.we_s_infty(cfg.geometry_obj, params) if params.vacuum_at_infinity else None
    truth: dict[ModeIndex, list[complex]] = {}
    for p in reference.points:
        truth.setdefault(p.mode, []).append(p.omega)
    rows = []
    for t in sorted(trajs, key=lambda t: t.chain_id):
        for X, w in t.chain:
            d_we = float(we.distance(w)) if we is not None else ""
            cands = truth.get(t.mode, [])
            d_true = abs(w - t.target) if t.target is not None else (
                min(abs(w - r) for r in cands) if cands else "")
            rows.append((X, t.mode.n2, t.mode.n3, w.real, w.imag, t.chain_id, t.limit_class,
                         d_we, d_true))
    ctx.csv("study.csv", STUDY_COLUMNS, rows)

    plot = _decorate(_base_plot(cfg, "truncation study"), cfg, params)
    for i, X in enumerate(xs):
        plot.add(Scatter([p.omega for p in spectra[X].points],
                         STUDY_COLORS[i % len(STUDY_COLORS)], "circle", 0.6, f"X={X:g}"))
    plot.add(Scatter([p.omega for p in reference.points], BLUE, "circle", 0.9, "X=inf"))
    ctx.svg("study.svg", plot)
    rep = SpectrumReport(
        metadata={"X_list": xs,
                  "classes": {c: sum(t.limit_class == c for t in trajs)
                              for c in (CONVERGES, ACCUMULATES, "Undecided")}},
        points=reference.points + [p for X in xs for p in spectra[X].points],
        sets=_report_sets(cfg, params), trajectories=trajs,
        warnings=list(ctx.warnings))
    ctx.report("study.json", rep)


def cmd_oracle_check(ctx: Context) -> None:
    cfg, params = ctx.cfg, ctx.cfg.params
    o = cfg.oracle
    if not o.enable:
        ctx.warnings.append("oracle-check: disabled by config (oracle.enable = false)")
        ctx.csv("oracle.csv", ORACLE_COLUMNS, [])
        return
    geometry = cfg.geometry_obj.with_length(float(o.X))
    region = SearchRegion(*map(float, o.region))
    rows, failures, modes = [], 0, [ModeIndex(int(a), int(b)) for a, b in o.modes]
    for mode in modes:
        exact, warns = mode_spectrum(mode, geometry, params, region, cfg.search.tol,
                                     cfg.search.pole_radius)
        ctx.warnings.extend(warns)
        exact_roots = [p.omega for p in exact]
        if not exact_roots:
            failures += 1
            ctx.warnings.append(f"oracle-check mode {mode.n2},{mode.n3}: no dispersion root")
            continue
        per_h = []
        for h in o.h_list:
            grid = FdGrid.build(float(o.X), int(round(o.X / h)), geometry.slab_end)
            try:
                roots = oracle_spectrum(mode, grid, params, region, geometry=geometry)
            except SpectraError as exc:
                ctx.warnings.append(f"oracle-check mode {mode.n2},{mode.n3} h={h:g}: {exc}")
                continue
            per_h.append((grid.h, [r.value for r in roots]))
        orders = _orders_by_root(per_h, exact_roots)
        for h, roots in per_h:
            for z in roots:
                k = int(np.argmin([abs(z - e) for e in exact_roots]))
                rows.append((mode.n2, mode.n3, h, z.real, z.imag, abs(z - exact_roots[k]),
                             orders.get(k, "")))
    if modes and failures == len(modes):
        raise ComputationFailed("no dispersion roots to compare against")
    ctx.csv("oracle.csv", ORACLE_COLUMNS, rows)


def _orders_by_root(per_h, exact_roots) -> dict[int, float]:
    """Least-squares slope of log gap against log h, per matched dispersion root."""
    gaps: dict[int, list[tuple[float, float]]] = {}
    for h, roots in per_h:
        for z in roots:
            d = [abs(z - e) for e in exact_roots]
            k = int(np.argmin(d))
            if d[k] > 0:
                gaps.setdefault(k, []).append((h, d[k]))
    out = {}
    for k, pairs in gaps.items():
        if len({h for h, _ in pairs}) >= 2:
            hs, gs = zip(*pairs)
            out[k] = float(np.polyfit(np.log(hs), np.log(gs), 1)[0])
    return out


def cmd_asymptotics(ctx: Context) -> None:
    cfg = ctx.cfg
    params = _infinity_params(cfg.params, cfg.asymptotics.slab_surrogate)
    rows = []
    for t in cfg.asymptotics.t_list:
        roots = model.s_infty_roots(float(t), params, filter_poles=False)
        for branch in AsymptoticBranch:
            for corrected in (True, False):
                try:
                    asym = model.asymptotic_root(float(t), branch, params, corrected)
                except SpectraError as exc:
                    ctx.warnings.append(f"asymptotics t={t:g} {branch.value}: {exc}")
                    continue
                q = min(roots, key=lambda r: abs(r - asym))
                tag = branch.value if corrected else f"{branch.value}/alt"
                rows.append((float(t), tag, asym.real, asym.imag, q.real, q.imag, abs(q - asym)))
    ctx.csv("asymptotics.csv", ASYMPTOTICS_COLUMNS, rows)


COMMANDS: dict[str, Callable[[Context], None]] = {
    "enclosure": cmd_enclosure,
    "essential": cmd_essential,
    "eigs": cmd_eigs,
    "truncate-study": cmd_truncate_study,
    "oracle-check": cmd_oracle_check,
    "asymptotics": cmd_asymptotics,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drude-spectra",
                                description="Certified spectra of a Drude-Lorentz slab waveguide.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for mode sweeps")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = RunConfig.load(args.config)
    except (InvalidInput, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or cfg.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    ctx = Context(cfg, out, args.threads)
    code = EXIT_OK
    try:
        COMMANDS[args.command](ctx)
    except InvalidInput as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (SpectraError, ComputationFailed, ArithmeticError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        ctx.warnings.append(f"{args.command}: {type(exc).__name__}: {exc}")
        code = EXIT_FAILURE
    except OSError as exc:
        print(f"I/O error on {exc.filename or out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        ctx.finish()
    except OSError as exc:
        print(f"I/O error on {exc.filename}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_FAILURE
    return code


if __name__ == "__main__":
    sys.exit(main())
