"""JSON and CSV forms of spectrum reports.

Complex numbers are written as ``[re, im]`` pairs.  Python's float repr is
shortest-round-trip, so ``load_report(dump_report(r)) == r`` holds exactly.
Non-finite floats are not valid JSON; callers store an infinite length as
the string ``"inf"``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import InvalidInput
from .waveguide import ModeIndex, SpectrumPoint, SpectrumReport, TrajectoryReport

SCHEMA_VERSION = 1

EIGS_COLUMNS = ("n2", "n3", "re_omega", "im_omega", "residual", "winding", "in_gamma", "sigma_tag")
STUDY_COLUMNS = ("X", "n2", "n3", "re_omega", "im_omega", "chain_id", "class",
                 "dist_to_We", "dist_to_true")
ORACLE_COLUMNS = ("n2", "n3", "h", "re_fd", "im_fd", "gap_to_dispersion", "observed_order")
ASYMPTOTICS_COLUMNS = ("t", "branch", "re_asym", "im_asym", "re_quartic", "im_quartic",
                       "abs_error")
ENCLOSURE_COLUMNS = ("re", "im", "in_strip", "in_enc", "in_gamma", "sigma_tag")
ESSENTIAL_COLUMNS = ("source", "re", "im")


def _c(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _z(pair: Sequence[float]) -> complex:
    if len(pair) != 2:
        raise InvalidInput(f"expected [re, im], got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _point_to_dict(p: SpectrumPoint) -> dict:
    return {
        "mode": [p.mode.n2, p.mode.n3], "omega": _c(p.omega), "residual": p.residual,
        "winding": p.winding, "kind": p.kind, "in_strip": p.in_strip, "in_enc": p.in_enc,
        "in_gamma": p.in_gamma, "sigma_tag": p.sigma_tag,
    }


def _point_from_dict(d: dict) -> SpectrumPoint:
    return SpectrumPoint(
        mode=ModeIndex(*d["mode"]), omega=_z(d["omega"]), residual=float(d["residual"]),
        winding=int(d["winding"]), kind=d["kind"], in_strip=bool(d["in_strip"]),
        in_enc=bool(d["in_enc"]), in_gamma=bool(d["in_gamma"]), sigma_tag=d["sigma_tag"],
    )


def _traj_to_dict(t: TrajectoryReport) -> dict:
    return {
        "mode": [t.mode.n2, t.mode.n3], "chain_id": t.chain_id,
        "chain": [[float(X), *_c(w)] for X, w in t.chain],
        "limit_class": t.limit_class,
        "target": None if t.target is None else _c(t.target),
        "distances": [float(d) for d in t.distances], "broken": t.broken,
    }


def _traj_from_dict(d: dict) -> TrajectoryReport:
    return TrajectoryReport(
        mode=ModeIndex(*d["mode"]), chain_id=int(d["chain_id"]),
        chain=[(float(X), complex(re, im)) for X, re, im in d["chain"]],
        limit_class=d["limit_class"],
        target=None if d["target"] is None else _z(d["target"]),
        distances=[float(x) for x in d["distances"]], broken=bool(d["broken"]),
    )


def _set_value_to_json(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return {"points": [_c(complex(z)) for z in v]}
    return v


def _set_value_from_json(v: Any) -> Any:
    if isinstance(v, dict) and set(v) == {"points"}:
        return [_z(p) for p in v["points"]]
    return v


def report_to_dict(report: SpectrumReport) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "metadata": report.metadata,
        "points": [_point_to_dict(p) for p in report.points],
        "curves": {k: [_c(complex(z)) for z in v] for k, v in report.curves.items()},
        "sets": {k: _set_value_to_json(v) for k, v in report.sets.items()},
        "trajectories": [_traj_to_dict(t) for t in report.trajectories],
        "warnings": list(report.warnings),
    }


def report_from_dict(d: dict) -> SpectrumReport:
    if d.get("schema") != SCHEMA_VERSION:
        raise InvalidInput(f"unsupported report schema {d.get('schema')!r}")
    return SpectrumReport(
        metadata=d["metadata"],
        points=[_point_from_dict(p) for p in d["points"]],
        curves={k: [_z(p) for p in v] for k, v in d["curves"].items()},
        sets={k: _set_value_from_json(v) for k, v in d["sets"].items()},
        trajectories=[_traj_from_dict(t) for t in d["trajectories"]],
        warnings=list(d["warnings"]),
    )


def dump_report(report: SpectrumReport) -> str:
    """Serialise to a JSON document (sorted keys, no NaN/Infinity)."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=1, allow_nan=False)


def load_report(text: str) -> SpectrumReport:
    return report_from_dict(json.loads(text))


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v: Any) -> Any:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v
