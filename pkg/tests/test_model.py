import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from holoneutron.errors import DomainError, NoPropagatingOrderError
from holoneutron.model import (Beam, Grating, MaterialModulation, bragg_angle, effective_thickness,
                               index_modulation, klein_cook)

mpmath.mp.dps = 40


def _asin_hp(x):
    return float(mpmath.asin(mpmath.mpf(x)))


@pytest.mark.parametrize("lam, spacing, expected_mrad", [
    (1.7e-9, 1e-6, 0.850),
    (8e-9, 0.5e-6, 8.0),
])
def test_bragg_angle_examples(lam, spacing, expected_mrad):
    theta = bragg_angle(lam, spacing)
    assert theta == pytest.approx(_asin_hp(mpmath.mpf(lam) / (2 * mpmath.mpf(spacing))), rel=1e-15)
    assert theta * 1e3 == pytest.approx(expected_mrad, abs=5e-4)


def test_bragg_angle_small_wavelength_limit():
    assert bragg_angle(1e-300, 1e-6) == pytest.approx(0.0, abs=1e-290)


def test_bragg_angle_no_propagating_order():
    with pytest.raises(NoPropagatingOrderError):
        bragg_angle(2e-6, 1e-6)
    with pytest.raises(NoPropagatingOrderError):
        bragg_angle(3e-6, 1e-6)


@given(st.floats(1e-10, 1e-8), st.floats(1e-7, 5e-6), st.floats(1e-7, 5e-6))
def test_bragg_angle_decreases_with_spacing(lam, a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    assert bragg_angle(lam, hi) < bragg_angle(lam, lo)


def test_effective_thickness_examples():
    assert effective_thickness(91e-6, 0.0) == 91e-6
    assert effective_thickness(91e-6, math.radians(56)) * 1e6 == pytest.approx(162.7, abs=0.05)
    assert effective_thickness(100e-6, math.radians(60)) == pytest.approx(200e-6, rel=1e-14)


def test_effective_thickness_domain():
    with pytest.raises(DomainError):
        effective_thickness(1e-4, math.pi / 2)


@given(st.floats(1e-6, 1e-3), st.floats(0, 1.5), st.floats(0, 1.5))
def test_effective_thickness_even_and_monotone(d, a, b):
    assert effective_thickness(d, a) == effective_thickness(d, -a)
    if a < b:
        assert effective_thickness(d, a) <= effective_thickness(d, b)


def test_index_modulation_examples():
    assert index_modulation(1.7e-9, MaterialModulation(scattering_length=5e-15, density_modulation=0.0)) == 0.0
    dn17 = index_modulation(1.7e-9, MaterialModulation(sld_modulation=1.0e13))
    dn80 = index_modulation(8e-9, MaterialModulation(sld_modulation=1.0e13))
    assert dn17 == pytest.approx(4.60e-6, abs=0.005e-6)
    assert dn80 == pytest.approx(1.02e-4, abs=0.005e-4)
    assert dn80 / dn17 == pytest.approx((8 / 1.7) ** 2, rel=1e-14)


def test_index_modulation_sign_and_finiteness():
    assert index_modulation(1e-9, MaterialModulation(sld_modulation=-1e12)) < 0
    with pytest.raises(DomainError):
        index_modulation(float("nan"), MaterialModulation(sld_modulation=1e12))
    with pytest.raises(DomainError):
        MaterialModulation(sld_modulation=float("inf"))


def test_material_product_consistency():
    m = MaterialModulation(scattering_length=4.1e-15, density_modulation=2e27)
    assert m.sld_modulation == pytest.approx(8.2e12)
    with pytest.raises(DomainError):
        MaterialModulation(scattering_length=4.1e-15, density_modulation=2e27, sld_modulation=1.0)


@given(st.floats(1e-10, 1e-7), st.floats(1e6, 1e14), st.sampled_from([-1.0, 1.0]))
def test_index_modulation_exactly_quadratic(lam, magnitude, sign):
    m = MaterialModulation(sld_modulation=sign * magnitude)
    assert index_modulation(2 * lam, m) == pytest.approx(4 * index_modulation(lam, m), rel=1e-15, abs=0)


def test_zero_contrast_gives_zero_modulation():
    assert index_modulation(1.7e-9, MaterialModulation(sld_modulation=0.0)) == 0.0


def test_klein_cook_examples():
    assert klein_cook(1.7e-9, 163e-6, 1e-6) == pytest.approx(1.74, abs=0.005)
    assert klein_cook(8e-9, 100e-6, 0.5e-6) == pytest.approx(20.1, abs=0.05)
    assert klein_cook(1.7e-9, 163e-6, math.inf) == 0.0


@pytest.mark.parametrize("kwargs", [
    dict(spacing=0.0, thickness=1e-4, index_modulation=1e-6),
    dict(spacing=1e-6, thickness=-1e-4, index_modulation=1e-6),
    dict(spacing=1e-6, thickness=1e-4, index_modulation=-1e-6),
    dict(spacing=1e-6, thickness=1e-4, index_modulation=1e-6, tilt=math.pi / 2),
    dict(spacing=1e-6, thickness=1e-4, index_modulation=1e-6, mean_index=0.0),
])
def test_grating_invariants(kwargs):
    with pytest.raises(DomainError):
        Grating(**kwargs)


@pytest.mark.parametrize("kwargs", [
    dict(wavelength=0.0),
    dict(wavelength=1e-9, relative_spread=1.0),
    dict(wavelength=1e-9, divergence=-1e-3),
    dict(wavelength=1e-9, kernel="lorentzian"),
])
def test_beam_invariants(kwargs):
    with pytest.raises(DomainError):
        Beam(**kwargs)
