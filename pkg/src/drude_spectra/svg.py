"""Minimal deterministic SVG 1.1 scatter/polyline writer for the complex plane.

The viewBox is given in omega-plane units; the y axis is flipped so that
Im omega grows upwards.  Numbers are printed with a fixed format, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import InvalidRegion


def _n(x: float) -> str:
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


@dataclass
class Scatter:
    points: Sequence[complex]
    color: str = "#1f4fd1"
    marker: str = "circle"  # circle | cross | square
    size: float = 1.0
    label: str = ""


@dataclass
class Polyline:
    points: Sequence[complex]
    color: str = "#d11f1f"
    width: float = 1.0
    dash: str = ""
    label: str = ""


@dataclass
class Plot:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    title: str = ""
    layers: list = field(default_factory=list)
    width_px: int = 900

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise InvalidRegion("plot window must have positive width and height")

    def add(self, layer) -> "Plot":
        self.layers.append(layer)
        return self

    @property
    def unit(self) -> float:
        """One screen pixel in plane units."""
        return (self.re_max - self.re_min) / self.width_px

    def _visible(self, z: complex) -> bool:
        return self.re_min <= z.real <= self.re_max and self.im_min <= z.imag <= self.im_max

    def _scatter(self, layer: Scatter) -> list[str]:
        r = 3.0 * layer.size * self.unit
        out = [f'<g fill="{layer.color}" stroke="{layer.color}" '
               f'stroke-width="{_n(self.unit)}">']
        if layer.label:
            out.append(f"<title>{escape(layer.label)}</title>")
        for z in layer.points:
            z = complex(z)
            if not self._visible(z):
                continue
            x, y = z.real, -z.imag
            if layer.marker == "cross":
                out.append(f'<path d="M{_n(x - r)} {_n(y - r)}L{_n(x + r)} {_n(y + r)}'
                           f'M{_n(x - r)} {_n(y + r)}L{_n(x + r)} {_n(y - r)}" fill="none"/>')
            elif layer.marker == "square":
                out.append(f'<rect x="{_n(x - r)}" y="{_n(y - r)}" '
                           f'width="{_n(2 * r)}" height="{_n(2 * r)}"/>')
            else:
                out.append(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="{_n(r)}"/>')
        out.append("</g>")
        return out

    def _polyline(self, layer: Polyline) -> list[str]:
        pts = " ".join(f"{_n(complex(z).real)},{_n(-complex(z).imag)}" for z in layer.points)
        dash = f' stroke-dasharray="{layer.dash}"' if layer.dash else ""
        title = f"<title>{escape(layer.label)}</title>" if layer.label else ""
        return [f'<polyline points="{pts}" fill="none" stroke="{layer.color}" '
                f'stroke-width="{_n(layer.width * self.unit)}"{dash}>{title}</polyline>']

    def render(self) -> str:
        w = self.re_max - self.re_min
        h = self.im_max - self.im_min
        height_px = max(1, round(self.width_px * h / w))
        u = self.unit
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.width_px}" height="{height_px}" '
            f'viewBox="{_n(self.re_min)} {_n(-self.im_max)} {_n(w)} {_n(h)}">',
        ]
        if self.title:
            lines.append(f"<title>{escape(self.title)}</title>")
        lines.append(f'<rect x="{_n(self.re_min)}" y="{_n(-self.im_max)}" width="{_n(w)}" '
                     f'height="{_n(h)}" fill="white"/>')
        # axes through the origin when visible
        axis = f'stroke="#999999" stroke-width="{_n(0.5 * u)}"'
        if self.im_min <= 0 <= self.im_max:
            lines.append(f'<line x1="{_n(self.re_min)}" y1="0" x2="{_n(self.re_max)}" y2="0" {axis}/>')
        if self.re_min <= 0 <= self.re_max:
            lines.append(f'<line x1="0" y1="{_n(-self.im_max)}" x2="0" y2="{_n(-self.im_min)}" {axis}/>')
        for layer in self.layers:
            if isinstance(layer, Scatter):
                lines.extend(self._scatter(layer))
            else:
                lines.extend(self._polyline(layer))
        lines.append("</svg>")
        return "\n".join(lines) + "\n"
