"""What the small-angle instrument measures.

Two directions: forward, monochromatic plane-wave efficiencies are averaged
over the wavelength band and angular divergence of the beam; backward, 2D
detector frames are reduced to per-order efficiencies.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .cwt import DEFAULT_ORDERS, DEFAULT_STEPS, order_efficiencies
from .errors import AccuracyError, DomainError, GeometryError, NoSignalError
from .model import Beam, Grating

REPORTED_ORDERS = (-2, -1, 0, 1, 2)
CSV_HEADER = ("theta_mrad", "eta_m2", "eta_m1", "eta_0", "eta_p1", "eta_p2", "sigma")
DEFAULT_NODES = 7
QUADRATURE_TOLERANCE = 1e-4
DEFAULT_SIGMA = 0.01

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def kernel_nodes(shape: str, fwhm: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and normalized weights of an n-point rule for a zero-mean kernel."""
    if fwhm == 0:
        return np.zeros(1), np.ones(1)
    if shape == "gaussian":
        x, w = np.polynomial.hermite_e.hermegauss(n)
        return x * fwhm * _FWHM_TO_SIGMA, w / w.sum()
    if shape == "triangular":
        # base half-width equals the FWHM; the density is linear on each half
        x, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * (x + 1.0)
        wu = w * (1.0 - t)
        u = t * fwhm
        offsets = np.concatenate([-u[::-1], u])
        weights = np.concatenate([wu[::-1], wu])
        return offsets, weights / weights.sum()
    raise DomainError(f"unknown kernel shape {shape!r}")


def _convolved(grating: Grating, beam: Beam, thetas: np.ndarray, orders: int,
               nodes: int, steps: int) -> np.ndarray:
    du, wu = kernel_nodes(beam.kernel, beam.relative_spread, nodes)
    dt, wt = kernel_nodes(beam.kernel, beam.divergence, nodes)
    lam = beam.wavelength * (1.0 + du)
    if np.any(lam <= 0):
        raise DomainError("wavelength band extends to non-positive wavelengths")
    # dn is quoted at the central wavelength and scales as lambda^2 across the band
    dn = grating.index_modulation * (lam / beam.wavelength) ** 2
    eta = order_efficiencies(
        grating.spacing,
        grating.effective_thickness,
        dn[None, :, None],
        lam[None, :, None],
        thetas[:, None, None] + dt[None, None, :],
        mean_index=grating.mean_index,
        orders=orders,
        steps=steps,
    )
    weights = wu[:, None] * wt[None, :]
    return np.einsum("tabm,ab->tm", eta, weights)


def convolved_array(grating: Grating, beam: Beam, thetas, *, orders: int = DEFAULT_ORDERS,
                    nodes: int = DEFAULT_NODES, steps: int = DEFAULT_STEPS,
                    check: bool = True) -> np.ndarray:
    """Beam-averaged efficiencies, shape (len(thetas), 2*orders + 1).

    With ``check`` the rule is re-evaluated with doubled nodes and an
    AccuracyError raised if any efficiency moves by more than 1e-4.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    eta = _convolved(grating, beam, thetas, orders, nodes, steps)
    if check and not beam.monochromatic:
        finer = _convolved(grating, beam, thetas, orders, 2 * nodes, steps)
        change = float(np.max(np.abs(finer - eta)))
        if change > QUADRATURE_TOLERANCE:
            raise AccuracyError(f"beam-average quadrature unconverged: doubling nodes moved eta by {change:.3g}")
    return eta


def convolved_efficiencies(grating: Grating, beam: Beam, theta: float,
                           orders: int = DEFAULT_ORDERS, *, nodes: int = DEFAULT_NODES,
                           steps: int = DEFAULT_STEPS, check: bool = True) -> dict[int, float]:
    eta = convolved_array(grating, beam, [theta], orders=orders, nodes=nodes, steps=steps, check=check)[0]
    return {m: float(eta[m + orders]) for m in range(-orders, orders + 1)}


@dataclass
class RockingCurve:
    """Per-order efficiencies for orders -2..2 sampled over incidence angle (rad)."""

    theta: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if self.eta.shape != (len(self.theta), len(REPORTED_ORDERS)):
            raise ValueError(f"eta must have shape ({len(self.theta)}, 5), got {self.eta.shape}")
        if len(self.theta) > 1 and np.any(np.diff(self.theta) <= 0):
            raise ValueError("theta samples must be strictly increasing")
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.theta.shape).copy()
            if np.any(self.sigma <= 0):
                raise ValueError("sigma must be positive")

    def __len__(self) -> int:
        return len(self.theta)

    def order(self, m: int) -> np.ndarray:
        return self.eta[:, REPORTED_ORDERS.index(m)]

    def to_csv(self, target: str | Path | io.TextIOBase) -> None:
        rows = []
        for i, t in enumerate(self.theta):
            row = [f"{t * 1e3:.6f}"] + [f"{e:.10f}" for e in self.eta[i]]
            row.append("" if self.sigma is None else f"{self.sigma[i]:.6g}")
            rows.append(row)
        _write_csv(target, CSV_HEADER, rows)

    @classmethod
    def from_csv(cls, source: str | Path, default_sigma: float = DEFAULT_SIGMA) -> "RockingCurve":
        with open(source, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in CSV_HEADER[:-1] if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{source}: missing columns {missing}")
            theta, eta, sigma = [], [], []
            for row in reader:
                theta.append(float(row["theta_mrad"]) * 1e-3)
                eta.append([float(row[c]) for c in CSV_HEADER[1:6]])
                s = (row.get("sigma") or "").strip()
                sigma.append(float(s) if s else math.nan)
        sigma = np.array(sigma)
        if np.any(np.isnan(sigma)):
            warnings.warn(f"{source}: no sigma values, using default sigma={default_sigma}", stacklevel=2)
            sigma = np.where(np.isnan(sigma), default_sigma, sigma)
        return cls(np.array(theta), np.array(eta), sigma)


def _write_csv(target, header, rows) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            _write_csv(fh, header, rows)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def rocking_scan(grating: Grating, beam: Beam, theta_min: float, theta_max: float, n: int,
                 orders: int = DEFAULT_ORDERS, *, nodes: int = DEFAULT_NODES,
                 steps: int = DEFAULT_STEPS, check: bool = True) -> RockingCurve:
    if n < 2:
        raise ValueError("a rocking scan needs at least two samples")
    if not theta_min < theta_max:
        raise ValueError("theta_min must be below theta_max")
    thetas = np.linspace(theta_min, theta_max, n)
    eta = convolved_array(grating, beam, thetas, orders=orders, nodes=nodes, steps=steps, check=check)
    cols = [m + orders for m in REPORTED_ORDERS]
    return RockingCurve(thetas, eta[:, cols])


# --- detector frames ---------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Half-open pixel rectangle: columns x0 <= x < x1, rows y0 <= y < y1."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise GeometryError(f"empty region {self}")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def overlaps(self, other: "Region") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)

    def view(self, counts: np.ndarray) -> np.ndarray:
        return counts[self.y0:self.y1, self.x0:self.x1]


@dataclass
class DetectorFrame:
    counts: np.ndarray
    spots: Mapping[int, Region]
    background: Region
    pixel_pitch: float = 0.0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a 2D grid")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.spots:
            raise GeometryError("no spot regions given")
        rows, cols = self.counts.shape
        regions = [(f"order {m}", r) for m, r in self.spots.items()] + [("background", self.background)]
        for name, r in regions:
            if r.x0 < 0 or r.y0 < 0 or r.x1 > cols or r.y1 > rows:
                raise GeometryError(f"{name} region {r} lies outside the {rows}x{cols} frame")
        for i, (na, a) in enumerate(regions):
            for nb, b in regions[i + 1:]:
                if a.overlaps(b):
                    raise GeometryError(f"{na} and {nb} regions overlap")


def parse_region(spec: str) -> tuple[int | None, Region]:
    """Parse ``order=m:x0,y0,x1,y1`` or ``background:x0,y0,x1,y1``.

    Returns (m, region) with m None for the background.
    """
    try:
        label, coords = spec.split(":", 1)
        x0, y0, x1, y1 = (int(c) for c in coords.split(","))
    except ValueError as exc:
        raise GeometryError(f"malformed region {spec!r}") from exc
    label = label.strip()
    if label == "background":
        return None, Region(x0, y0, x1, y1)
    key, _, value = label.partition("=")
    if key.strip() != "order" or not value:
        raise GeometryError(f"malformed region label {label!r}")
    return int(value), Region(x0, y0, x1, y1)


def read_frame(path: str | Path) -> tuple[np.ndarray, float]:
    """Read a grid file; first line is ``rows cols pixel_pitch_mm``. Pitch returned in meters."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 3:
            raise ValueError(f"{path}: header must be 'rows cols pixel_pitch_mm'")
        rows, cols, pitch_mm = int(head[0]), int(head[1]), float(head[2])
        counts = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if counts.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, grid is {counts.shape[0]}x{counts.shape[1]}")
    return counts, pitch_mm * 1e-3


def write_frame(path: str | Path, counts: np.ndarray, pixel_pitch: float) -> None:
    counts = np.asarray(counts, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{counts.shape[0]} {counts.shape[1]} {pixel_pitch * 1e3:g}\n")
        for row in counts:
            fh.write(" ".join(str(int(c)) for c in row) + "\n")


def reduce_frame(frame: DetectorFrame) -> dict[int, float]:
    """Background-corrected spot sums normalized to the total of all spots."""
    counts = frame.counts.astype(float)
    bg = float(frame.background.view(counts).mean())
    net = {}
    for m in sorted(frame.spots):
        region = frame.spots[m]
        value = float(region.view(counts).sum()) - bg * region.area
        if value < 0:
            warnings.warn(f"order {m}: background-corrected intensity {value:.3g} < 0, clamped to 0",
                          stacklevel=2)
            value = 0.0
        net[m] = value
    total = sum(net.values())
    if total <= 0:
        raise NoSignalError("no net intensity above background in any spot")
    return {m: v / total for m, v in net.items()}


def write_efficiencies(target, eta: Mapping[int, float]) -> None:
    _write_csv(target, ("order", "eta"), [[m, f"{v:.10f}"] for m, v in sorted(eta.items())])

