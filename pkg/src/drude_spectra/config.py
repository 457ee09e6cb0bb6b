"""Run configuration: a single JSON document with strict keys.

Every section is optional; missing keys take the defaults below.  Unknown
keys at any level are rejected, as are values that violate the invariants
of the underlying types (checked eagerly at load time).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import InvalidInput
from .fd_oracle import FdGrid
from .model import MaterialParams
from .rootfinding import SearchRegion
from .waveguide import ModeIndex, WaveguideGeometry

FORMATS = ("csv", "json", "svg")


class ConfigError(InvalidInput):
    """Malformed or inconsistent run configuration."""


@dataclass
class MaterialSection:
    gamma_e: float = 4.0
    gamma_m: float = 1.0
    alpha_e: float = 400.0
    alpha_m: float = 10.0
    theta_e_inf_sq: float = 0.0
    theta_m_inf_sq: float = 0.0

    def build(self) -> MaterialParams:
        return MaterialParams(**asdict(self))


@dataclass
class GeometrySection:
    L2: float = 1.0
    L3: float = math.pi
    slab_end: float = 1.0
    X: Any = "inf"

    def build(self) -> WaveguideGeometry:
        return WaveguideGeometry(self.L2, self.L3, self.slab_end, _length(self.X))


@dataclass
class SearchSection:
    re_min: float = -30.0
    re_max: float = 30.0
    im_min: float = -5.0
    im_max: float = -1e-6
    n_max: int = 6
    modes: Any = None
    tol: float = 1e-9
    pole_radius: float = 0.05
    max_depth: int = 24
    boundary_samples: int = 64

    def region(self) -> SearchRegion:
        return SearchRegion(self.re_min, self.re_max, self.im_min, self.im_max,
                            self.max_depth, self.boundary_samples)

    def mode_list(self) -> list[ModeIndex] | None:
        if self.modes is None:
            return None
        return [ModeIndex(int(a), int(b)) for a, b in self.modes]


@dataclass
class EnclosureSection:
    nx: int = 200
    ny: int = 200
    window: list = field(default_factory=lambda: [-30.0, 30.0, -6.0, 1.0])

    def region(self) -> SearchRegion:
        return SearchRegion(*map(float, self.window))


@dataclass
class EssentialSection:
    t_min: Any = None  # default: squared W_e threshold
    t_max: Any = None  # default: re_max**2
    n_samples: int = 400
    g_curve_samples: int = 200


@dataclass
class StudySection:
    X_list: list = field(default_factory=lambda: [5.0, 10.0, 25.0])


@dataclass
class OracleSection:
    enable: bool = True
    X: float = 5.0
    h_list: list = field(default_factory=lambda: [1 / 205, 1 / 410, 1 / 820])
    modes: list = field(default_factory=lambda: [[1, 1]])
    region: list = field(default_factory=lambda: [0.5, 6.0, -3.0, -0.05])


@dataclass
class AsymptoticsSection:
    t_list: list = field(default_factory=lambda: [1e6, 1e8])
    # use the slab couplings as the exterior ones when the latter vanish
    slab_surrogate: bool = True


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))


SECTIONS = {
    "material": MaterialSection, "geometry": GeometrySection, "search": SearchSection,
    "enclosure": EnclosureSection, "essential": EssentialSection, "study": StudySection,
    "oracle": OracleSection, "asymptotics": AsymptoticsSection, "output": OutputSection,
}


@dataclass
class RunConfig:
    material: MaterialSection = field(default_factory=MaterialSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    search: SearchSection = field(default_factory=SearchSection)
    enclosure: EnclosureSection = field(default_factory=EnclosureSection)
    essential: EssentialSection = field(default_factory=EssentialSection)
    study: StudySection = field(default_factory=StudySection)
    oracle: OracleSection = field(default_factory=OracleSection)
    asymptotics: AsymptoticsSection = field(default_factory=AsymptoticsSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"section '{name}' must be an object")
            allowed = {f.name for f in fields(section_cls)}
            bad = set(raw) - allowed
            if bad:
                raise ConfigError(f"unknown key(s) in '{name}': {sorted(bad)}")
            kwargs[name] = section_cls(**raw)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def validate(self) -> None:
        try:
            self.params = self.material.build()
            self.geometry_obj = self.geometry.build()
            self.region = self.search.region()
            self.modes = self.search.mode_list()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        s = self.search
        _check(isinstance(s.n_max, int) and s.n_max >= 1, "search.n_max must be an integer >= 1")
        _check(s.tol > 0, "search.tol must be positive")
        _check(s.pole_radius > 0, "search.pole_radius must be positive")
        e = self.enclosure
        _check(isinstance(e.nx, int) and isinstance(e.ny, int) and e.nx >= 2 and e.ny >= 2,
               "enclosure.nx and enclosure.ny must be integers >= 2")
        _check(len(e.window) == 4, "enclosure.window is [re_min, re_max, im_min, im_max]")
        e.region()
        es = self.essential
        _check(isinstance(es.n_samples, int) and es.n_samples >= 2, "essential.n_samples must be >= 2")
        t_min, t_max = self.t_range()
        _check(0 < t_min <= t_max, "essential requires 0 < t_min <= t_max")
        xs = [_length(x) for x in self.study.X_list]
        _check(len(xs) >= 3 and all(math.isfinite(x) for x in xs),
               "study.X_list needs at least three finite lengths")
        _check(all(b > a for a, b in zip(xs, xs[1:])), "study.X_list must increase")
        _check(xs[0] > self.geometry_obj.slab_end, "study lengths must exceed slab_end")
        o = self.oracle
        _check(isinstance(o.enable, bool), "oracle.enable must be true or false")
        _check(len(o.region) == 4, "oracle.region is [re_min, re_max, im_min, im_max]")
        o_region = SearchRegion(*map(float, o.region))
        _check(not any(o_region.contains(z) for z in self.params.poles),
               "oracle.region must not contain a damping pole")
        [ModeIndex(int(a), int(b)) for a, b in o.modes]
        for h in o.h_list:
            _check(h > 0, "oracle.h_list entries must be positive")
            FdGrid.build(o.X, int(round(o.X / h)), self.geometry_obj.slab_end)
        _check(len(self.asymptotics.t_list) >= 1 and all(t > 0 for t in self.asymptotics.t_list),
               "asymptotics.t_list must hold positive values")
        bad_fmt = set(self.output.formats) - set(FORMATS)
        _check(not bad_fmt, f"unknown output format(s): {sorted(bad_fmt)}")

    def t_range(self) -> tuple[float, float]:
        es = self.essential
        lo = es.t_min if es.t_min is not None else (
            math.pi / max(self.geometry.L2, self.geometry.L3)) ** 2
        hi = es.t_max if es.t_max is not None else max(abs(self.search.re_min),
                                                       abs(self.search.re_max)) ** 2
        return float(lo), float(hi)


def _check(ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(message)


def _length(x: Any) -> float:
    if x == "inf":
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"length must be a number or \"inf\", got {x!r}")
    return float(x)
