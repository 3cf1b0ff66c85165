"""Physical quantities and closed-form kinematics of holographic neutron gratings.

Units: every length is in meters and every angle in radians. Conversion from
human units (nm, um, deg, mrad) happens only at the CLI/config boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DomainError, NoPropagatingOrderError


def _require_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Grating:
    """Unslanted sinusoidal phase grating n(x) = n_mean + dn*cos(2*pi*x/spacing).

    ``tilt`` is the rotation about an axis parallel to the grating vector;
    it lengthens the path through the film without changing the Bragg angle.
    """

    spacing: float
    thickness: float
    index_modulation: float
    tilt: float = 0.0
    mean_index: float = 1.0

    def __post_init__(self) -> None:
        _require_finite(
            spacing=self.spacing,
            thickness=self.thickness,
            index_modulation=self.index_modulation,
            tilt=self.tilt,
            mean_index=self.mean_index,
        )
        if self.spacing <= 0:
            raise DomainError("grating spacing must be positive")
        if self.thickness <= 0:
            raise DomainError("grating thickness must be positive")
        if self.index_modulation < 0:
            raise DomainError("index modulation must be non-negative")
        if abs(self.tilt) >= math.pi / 2:
            raise DomainError("|tilt| must be below pi/2")
        if self.mean_index <= 0:
            raise DomainError("mean index must be positive")

    @property
    def effective_thickness(self) -> float:
        return effective_thickness(self.thickness, self.tilt)

    def with_(self, **changes) -> "Grating":
        return replace(self, **changes)


@dataclass(frozen=True)
class MaterialModulation:
    """Coherent scattering-length-density contrast of the recorded hologram.

    Give either both ``scattering_length`` (m) and ``density_modulation``
    (1/m^3), or the product directly as ``sld_modulation`` (1/m^2). A negative
    product encodes contrast inversion.
    """

    scattering_length: float | None = None
    density_modulation: float | None = None
    sld_modulation: float | None = None

    def __post_init__(self) -> None:
        parts = (self.scattering_length, self.density_modulation)
        if all(p is not None for p in parts):
            product = self.scattering_length * self.density_modulation
            if self.sld_modulation is None:
                object.__setattr__(self, "sld_modulation", product)
            elif not math.isclose(self.sld_modulation, product, rel_tol=1e-12, abs_tol=0.0):
                raise DomainError("sld_modulation disagrees with scattering_length*density_modulation")
        elif self.sld_modulation is None:
            raise DomainError("need sld_modulation or both scattering_length and density_modulation")
        _require_finite(sld_modulation=self.sld_modulation)


@dataclass(frozen=True)
class Beam:
    """Incident beam statistics. ``relative_spread`` and ``divergence`` are FWHM values."""

    wavelength: float
    relative_spread: float = 0.0
    divergence: float = 0.0
    kernel: str = "gaussian"

    def __post_init__(self) -> None:
        _require_finite(
            wavelength=self.wavelength,
            relative_spread=self.relative_spread,
            divergence=self.divergence,
        )
        if self.wavelength <= 0:
            raise DomainError("wavelength must be positive")
        if not 0 <= self.relative_spread < 1:
            raise DomainError("relative spread must lie in [0, 1)")
        if self.divergence < 0:
            raise DomainError("divergence must be non-negative")
        if self.kernel not in ("gaussian", "triangular"):
            raise DomainError(f"unknown kernel shape {self.kernel!r}")

    @property
    def monochromatic(self) -> bool:
        return self.relative_spread == 0 and self.divergence == 0


def bragg_angle(wavelength: float, spacing: float) -> float:
    """Incidence angle arcsin(lambda / (2*spacing)) phase-matching the +1 order."""
    _require_finite(wavelength=wavelength, spacing=spacing)
    if wavelength <= 0 or spacing <= 0:
        raise DomainError("wavelength and spacing must be positive")
    ratio = wavelength / (2.0 * spacing)
    if ratio >= 1.0:
        raise NoPropagatingOrderError(
            f"wavelength {wavelength:g} m >= 2*spacing {2 * spacing:g} m: no propagating first order"
        )
    return math.asin(ratio)


def effective_thickness(thickness: float, tilt: float) -> float:
    _require_finite(thickness=thickness, tilt=tilt)
    if abs(tilt) >= math.pi / 2:
        raise DomainError("|tilt| must be below pi/2")
    return thickness / math.cos(tilt)


def index_modulation(wavelength: float, material: MaterialModulation) -> float:
    """Neutron refractive-index amplitude lambda^2 * b_c*drho / (2*pi)."""
    _require_finite(wavelength=wavelength)
    if wavelength <= 0:
        raise DomainError("wavelength must be positive")
    return wavelength**2 * material.sld_modulation / (2.0 * math.pi)


def klein_cook(wavelength: float, thickness: float, spacing: float, mean_index: float = 1.0) -> float:
    """Klein-Cook parameter Q = 2*pi*lambda*d / (n*spacing^2).

    Q >~ 10 is the two-wave (Bragg) regime, Q <~ 0.1 the thin-grating regime.
    ``spacing`` may be ``math.inf`` (homogeneous medium), giving 0.
    """
    for name, v in (("wavelength", wavelength), ("thickness", thickness),
                    ("spacing", spacing), ("mean_index", mean_index)):
        if not v > 0:
            raise DomainError(f"{name} must be positive")
    return 2.0 * math.pi * wavelength * thickness / (mean_index * spacing**2)
