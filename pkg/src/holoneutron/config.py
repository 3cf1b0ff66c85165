"""Strict line-oriented run configuration.

Format: one ``section.key = value`` per line; ``#`` starts a comment. Lengths
take a unit suffix (nm, um, mm, cm, m); angles take deg, rad, mrad, urad or
wave (one wave = 2*pi rad). A bare number uses the key's default unit: degrees
for the grating tilt and design range, milliradians for rocking angles and
divergence. Values are stored in SI units and radians.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError

LENGTH_UNITS = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}
ANGLE_UNITS = {"rad": 1.0, "mrad": 1e-3, "urad": 1e-6, "µrad": 1e-6,
               "deg": math.pi / 180.0, "wave": 2.0 * math.pi}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([^\s\d].*)?$")


def _quantity(units: dict[str, float], default_unit: str) -> Callable[[str], float]:
    def parse(text: str) -> float:
        m = _NUMBER.match(text)
        if not m:
            raise ValueError(f"not a number: {text!r}")
        unit = (m.group(2) or default_unit).strip()
        if unit not in units:
            raise ValueError(f"unknown unit {unit!r}; expected one of {sorted(units)}")
        return float(m.group(1)) * units[unit]
    return parse


def _fmt_quantity(units: dict[str, float], unit: str) -> Callable[[float], str]:
    return lambda v: f"{v / units[unit]:.10g} {unit}"


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


def _names(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


@dataclass(frozen=True)
class Key:
    default: Any
    parse: Callable[[str], Any]
    show: Callable[[Any], str] = str
    repeat: bool = False


def length(default_unit="m"):
    return _quantity(LENGTH_UNITS, default_unit), _fmt_quantity(LENGTH_UNITS, default_unit)


def angle(default_unit):
    return _quantity(ANGLE_UNITS, default_unit), _fmt_quantity(ANGLE_UNITS, default_unit)


def _key(default, kind):
    parse, show = kind
    return Key(default, parse, show)


_um, _nm, _mm = length("um"), length("nm"), length("mm")
_deg, _mrad = angle("deg"), angle("mrad")
_float = Key(0.0, float, lambda v: f"{v:.10g}")

SCHEMA: dict[str, Key] = {
    "run.seed": Key(0, int),
    "grating.spacing": _key(1e-6, _um),
    "grating.thickness": _key(91.15e-6, _um),
    "grating.index_modulation": Key(2.55e-6, float, lambda v: f"{v:.10g}"),
    "grating.tilt": _key(math.radians(56.0), _deg),
    "grating.mean_index": Key(1.0, float, lambda v: f"{v:.10g}"),
    "beam.wavelength": _key(1.7e-9, _nm),
    "beam.spread": Key(0.10, float, lambda v: f"{v:.10g}"),
    "beam.divergence": _key(1e-3, _mrad),
    "beam.kernel": Key("gaussian", _choice("gaussian", "triangular")),
    "solver.orders": Key(4, int),
    "solver.steps": Key(2000, int),
    "solver.nodes": Key(7, int),
    "rock.theta_min": _key(-5e-3, _mrad),
    "rock.theta_max": _key(5e-3, _mrad),
    "rock.points": Key(101, int),
    "rock.noise": Key(0.0, float, lambda v: f"{v:.10g}"),
    "fit.free": Key(("index_modulation", "thickness"), _names, ",".join),
    "fit.index_modulation_min": Key(1e-8, float, lambda v: f"{v:.10g}"),
    "fit.index_modulation_max": Key(1e-4, float, lambda v: f"{v:.10g}"),
    "fit.thickness_min": _key(1e-6, _um),
    "fit.thickness_max": _key(1e-3, _um),
    "fit.theta_offset": _key(0.0, _mrad),
    "fit.theta_offset_min": _key(-2e-3, _mrad),
    "fit.theta_offset_max": _key(2e-3, _mrad),
    "fit.max_iter": Key(200, int),
    "fit.sigma": Key(0.01, float, lambda v: f"{v:.10g}"),
    "design.tilt_min": _key(math.radians(30.0), _deg),
    "design.tilt_max": _key(math.radians(70.0), _deg),
    "design.points": Key(41, int),
    "design.tolerance": _key(math.radians(0.05), _deg),
    "zernike.wavelength": _key(8e-9, _nm),
    "zernike.splitter_spacing": _key(0.5e-6, _um),
    "zernike.separation": _key(1e-2, _mm),
    "zernike.beam_width": _key(1e-3, _mm),
    "zernike.fringe_period": _key(1e-6, _um),
    "zernike.intensities": Key((1.0, 1.0, 1.0), _floats, lambda v: ",".join(f"{x:g}" for x in v)),
    "zernike.phase": _key(math.pi / 2, _deg),
    "zernike.phase_shift": Key(2 * math.pi / 100, *angle("wave")),
    "zernike.x_points": Key(512, int),
    "zernike.x_span": _key(4e-6, _um),
    "zernike.z_points": Key(256, int),
    "zernike.z_span": _key(2e-3, _mm),
    "zernike.analyzer_period": _key(1e-6, _um),
    "zernike.analyzer_duty": Key(0.5, float, lambda v: f"{v:.10g}"),
    "zernike.analyzer_points": Key(41, int),
    "reduce.region": Key((), str, repeat=True),
}


class RunConfig:
    """Resolved configuration: every schema key with either its default or a parsed value."""

    def __init__(self, values: dict[str, Any] | None = None, source: str | None = None):
        self.values = {k: key.default for k, key in SCHEMA.items()}
        self.explicit: set[str] = set()
        self.source = source
        for k, v in (values or {}).items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            self.values[k] = v
            self.explicit.add(k)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def section(self, name: str) -> dict[str, Any]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        values: dict[str, Any] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{source}:{lineno}"
            if "=" not in line:
                raise ConfigError(f"{where}: expected 'section.key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"{where}: unknown key {key!r}")
            spec = SCHEMA[key]
            try:
                parsed = spec.parse(value)
            except ValueError as exc:
                raise ConfigError(f"{where}: {key}: {exc}") from None
            if spec.repeat:
                values[key] = tuple(values.get(key, ())) + (parsed,)
            elif key in values:
                raise ConfigError(f"{where}: duplicate key {key!r}")
            else:
                values[key] = parsed
        return cls(values, source)

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.parse(p.read_text(encoding="utf-8"), str(p))

    def emit(self) -> str:
        lines = []
        section = None
        for k, spec in SCHEMA.items():
            s = k.split(".", 1)[0]
            if s != section:
                if section is not None:
                    lines.append("")
                section = s
            if spec.repeat:
                lines.extend(f"{k} = {v}" for v in self.values[k])
            else:
                lines.append(f"{k} = {spec.show(self.values[k])}")
        return "\n".join(lines) + "\n"
