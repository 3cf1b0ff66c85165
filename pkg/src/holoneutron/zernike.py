"""Zernike three-path interferometer: layout, three-beam field, analyzer scans.

Geometry convention: ``separation`` is the center-to-center distance between
the central beam and each +-1 beam at the mirror plane, so the +-1 pair is
twice as far apart. Each +-1 beam leaves the splitter at the Bragg angle
arcsin(lambda / (2*spacing)) from the axis; mirrors turn it back towards the
axis at the recombination half-angle alpha.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, GeometryError
from .model import bragg_angle


@dataclass(frozen=True)
class InterferometerLayout:
    wavelength: float
    splitter_spacing: float
    split_angle: float
    half_angle: float
    splitter_to_mirror: float
    mirror_to_detector: float
    beam_width: float
    separation: float

    @property
    def total_length(self) -> float:
        return self.splitter_to_mirror + self.mirror_to_detector

    @property
    def overlap_length(self) -> float:
        """Axial extent over which beams of width w still overlap near the detector."""
        return self.beam_width / math.tan(self.half_angle)

    @property
    def lateral_extent(self) -> float:
        return self.beam_width

    @property
    def fringe_period(self) -> float:
        return fringe_period(self.wavelength, self.half_angle)

    def report(self) -> str:
        lines = [
            f"wavelength: {self.wavelength * 1e9:.4g} nm",
            f"splitter spacing: {self.splitter_spacing * 1e6:.4g} um",
            f"split angle per beam: {self.split_angle * 1e3:.5g} mrad",
            f"angle between +-1 beams at splitter: {2 * self.split_angle * 1e3:.5g} mrad",
            f"recombination half-angle alpha: {self.half_angle * 1e3:.5g} mrad",
            f"splitter to mirror L1: {self.splitter_to_mirror:.6g} m",
            f"mirror to detector L2: {self.mirror_to_detector:.6g} m",
            f"total length: {self.total_length:.6g} m",
            f"overlap length along axis: {self.overlap_length:.6g} m",
            f"lateral pattern extent: {self.lateral_extent * 1e3:.4g} mm",
            f"fringe period: {self.fringe_period * 1e6:.6g} um",
        ]
        return "\n".join(lines) + "\n"


def fringe_period(wavelength: float, half_angle: float) -> float:
    return wavelength / (2.0 * math.sin(half_angle))


def solve_layout(wavelength: float, splitter_spacing: float, separation: float,
                 beam_width: float, period: float) -> InterferometerLayout:
    if not (wavelength > 0 and splitter_spacing > 0 and separation > 0 and beam_width > 0):
        raise DomainError("wavelength, spacing, separation and beam width must be positive")
    if wavelength >= splitter_spacing:
        raise DomainError("wavelength must be below the splitter spacing")
    if period <= wavelength / 2:
        raise DomainError(f"fringe period {period:g} m unreachable: must exceed lambda/2 = {wavelength / 2:g} m")
    if separation <= beam_width:
        raise GeometryError("beam separation must exceed the beam width")
    split = bragg_angle(wavelength, splitter_spacing)
    alpha = math.asin(wavelength / (2.0 * period))
    if alpha == 0:
        raise DomainError("infinite fringe period gives alpha = 0: degenerate collinear geometry")
    return InterferometerLayout(
        wavelength=wavelength,
        splitter_spacing=splitter_spacing,
        split_angle=split,
        half_angle=alpha,
        splitter_to_mirror=separation / math.tan(split),
        mirror_to_detector=separation / math.tan(alpha),
        beam_width=beam_width,
        separation=separation,
    )


@dataclass(frozen=True)
class ThreeBeamField:
    minus: complex
    center: complex
    plus: complex
    phase: float
    half_angle: float
    wavelength: float

    def __post_init__(self) -> None:
        norm = abs(self.minus) ** 2 + abs(self.center) ** 2 + abs(self.plus) ** 2
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"beam amplitudes must be normalized, got total intensity {norm:.12g}")
        if not 0 < self.half_angle < math.pi / 2:
            raise DomainError("half angle must lie in (0, pi/2)")

    @classmethod
    def from_intensities(cls, ratios=(1.0, 1.0, 1.0), *, phase: float = math.pi / 2,
                         half_angle: float, wavelength: float) -> "ThreeBeamField":
        r = np.asarray(ratios, dtype=float)
        if r.shape != (3,) or np.any(r < 0) or r.sum() <= 0:
            raise DomainError("need three non-negative intensity ratios")
        a = np.sqrt(r / r.sum())
        return cls(complex(a[0]), complex(a[1]), complex(a[2]), phase, half_angle, wavelength)

    def with_phase(self, phase: float) -> "ThreeBeamField":
        return ThreeBeamField(self.minus, self.center, self.plus, phase, self.half_angle, self.wavelength)


@dataclass
class IntensityMap:
    x: np.ndarray
    z: np.ndarray
    intensity: np.ndarray  # shape (len(z), len(x))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("x_m", "z_m", "intensity"))
            for j, z in enumerate(self.z):
                for i, x in enumerate(self.x):
                    w.writerow((f"{x:.9e}", f"{z:.9e}", f"{self.intensity[j, i]:.9e}"))

    def to_matrix(self, path: str | Path) -> None:
        """gnuplot ``nonuniform matrix`` layout: first row holds N and x; rows are z then I."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.x)} " + " ".join(f"{x:.9e}" for x in self.x) + "\n")
            for j, z in enumerate(self.z):
                fh.write(f"{z:.9e} " + " ".join(f"{v:.9e}" for v in self.intensity[j]) + "\n")


def interference(field: ThreeBeamField, x, z) -> IntensityMap:
    """Intensity of the three superposed plane waves on the (z, x) grid.

    The common carrier exp(i*k*z*cos(alpha)) is factored out, so only the
    small relative phase k*(1 - cos(alpha))*z of the central beam enters; this
    keeps the result accurate at z of meters where k*z ~ 1e9.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    k = 2.0 * math.pi / field.wavelength
    beta = k * math.sin(field.half_angle)
    axial = k * 2.0 * math.sin(field.half_angle / 2.0) ** 2
    side = field.minus * np.exp(-1j * beta * x) + field.plus * np.exp(1j * beta * x)
    center = field.center * np.exp(1j * (field.phase + axial * z))
    amp = side[None, :] + center[:, None]
    return IntensityMap(x, z, amp.real**2 + amp.imag**2)


def axial_shift(phase_shift: float, wavelength: float, half_angle: float) -> float:
    """Axial displacement of the pattern caused by a phase on the central beam."""
    if half_angle == 0:
        raise DomainError("alpha = 0: collinear beams, the axial shift is unbounded")
    if not 0 < half_angle < math.pi / 2:
        raise DomainError("half angle must lie in (0, pi/2)")
    k = 2.0 * math.pi / wavelength
    return phase_shift / (k * 2.0 * math.sin(half_angle / 2.0) ** 2)


def _open_length(a: np.ndarray, b: np.ndarray, period: float, duty: float) -> np.ndarray:
    """Length of [a, b) covered by the open slits [n*p, n*p + duty*p)."""
    def cumulative(x):
        n = np.floor(x / period)
        return n * duty * period + np.minimum(x - n * period, duty * period)
    return cumulative(b) - cumulative(a)


def analyzer_scan(imap: IntensityMap, z_plane: float, period: float, duty: float, offsets) -> np.ndarray:
    """Transmitted signal of an absorption comb at each lateral offset.

    Intensity is treated as constant over each x cell; the overlap of every
    cell with the comb openings is computed exactly.
    """
    if period <= 0:
        raise DomainError("analyzer period must be positive")
    if not 0 < duty < 1:
        raise DomainError("duty must lie in (0, 1)")
    x = imap.x
    if len(x) < 2:
        raise DomainError("map needs at least two x samples")
    dx = float(np.min(np.diff(x)))
    if period < 2 * dx:
        raise DomainError(f"analyzer period {period:g} m undersampled by x step {dx:g} m")
    if not imap.z.min() <= z_plane <= imap.z.max():
        raise DomainError("z_plane lies outside the map")
    j = int(np.argmin(np.abs(imap.z - z_plane)))
    row = imap.intensity[j]
    mid = 0.5 * (x[1:] + x[:-1])
    left = np.concatenate([[x[0] - 0.5 * (x[1] - x[0])], mid])
    right = np.concatenate([mid, [x[-1] + 0.5 * (x[-1] - x[-2])]])
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    return np.array([np.sum(row * _open_length(left - x0, right - x0, period, duty)) for x0 in offsets])


def write_scan(path: str | Path, offsets, signal) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x0_m", "signal"))
        for x0, s in zip(offsets, signal):
            w.writerow((f"{x0:.9e}", f"{s:.9e}"))
