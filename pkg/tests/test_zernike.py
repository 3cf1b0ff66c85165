import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holoneutron.errors import DomainError, GeometryError
from holoneutron.zernike import (IntensityMap, ThreeBeamField, analyzer_scan, axial_shift, fringe_period,
                                 interference, solve_layout, write_scan)

LAM = 8e-9
ALPHA = math.asin(LAM / 2e-6)


def direct_intensity(field, x, z):
    """Oracle: literal three plane-wave sum including the carrier."""
    k = 2 * math.pi / field.wavelength
    s, c = math.sin(field.half_angle), math.cos(field.half_angle)
    X, Z = np.meshgrid(x, z)
    amp = (field.minus * np.exp(1j * k * (-X * s + Z * c))
           + field.center * np.exp(1j * (k * Z + field.phase))
           + field.plus * np.exp(1j * k * (X * s + Z * c)))
    return np.abs(amp) ** 2


def x_period(row, dx):
    """Smallest lag of the autocorrelation maximum (excluding lag 0)."""
    r = row - row.mean()
    ac = np.array([np.dot(r, np.roll(r, -j)) for j in range(len(r))])
    ac /= ac[0]
    lags = np.flatnonzero((ac[1:-1] > ac[:-2]) & (ac[1:-1] >= ac[2:]) & (ac[1:-1] > 0.99)) + 1
    return lags[0] * dx


def equal_field(phase=math.pi / 2):
    return ThreeBeamField.from_intensities((1, 1, 1), phase=phase, half_angle=ALPHA, wavelength=LAM)


# --- layout --------------------------------------------------------------------------

def test_reference_layout_numbers():
    lay = solve_layout(LAM, 0.5e-6, 1e-2, 1e-3, 1e-6)
    assert lay.split_angle == pytest.approx(8.0e-3, rel=1e-4)
    assert lay.half_angle == pytest.approx(4.0e-3, rel=1e-4)
    assert lay.splitter_to_mirror == pytest.approx(1.25, rel=1e-3)
    assert lay.mirror_to_detector == pytest.approx(2.5, rel=1e-3)
    assert lay.total_length == pytest.approx(3.75, rel=1e-3)
    assert lay.overlap_length == pytest.approx(0.25, rel=1e-3)
    assert lay.lateral_extent == 1e-3
    assert lay.fringe_period == pytest.approx(1e-6, rel=1e-12)
    assert "total length: 3.7499" in lay.report()


@settings(max_examples=50)
@given(lam=st.floats(0.5e-9, 20e-9), spacing=st.floats(0.1e-6, 5e-6), s=st.floats(2e-3, 0.1),
       period=st.floats(0.1e-6, 50e-6))
def test_layout_self_consistency(lam, spacing, s, period):
    lay = solve_layout(lam, spacing, s, 1e-3, period)
    assert lay.splitter_to_mirror * math.tan(lay.split_angle) == pytest.approx(s, rel=1e-12)
    assert lay.mirror_to_detector * math.tan(lay.half_angle) == pytest.approx(s, rel=1e-12)
    assert math.sin(lay.half_angle) == pytest.approx(lam / (2 * period), rel=1e-12)
    assert min(lay.splitter_to_mirror, lay.mirror_to_detector, lay.overlap_length) > 0


def test_layout_errors():
    with pytest.raises(DomainError, match="unreachable"):
        solve_layout(LAM, 0.5e-6, 1e-2, 1e-3, LAM / 2)
    with pytest.raises(DomainError, match="alpha = 0"):
        solve_layout(LAM, 0.5e-6, 1e-2, 1e-3, math.inf)
    with pytest.raises(DomainError):
        solve_layout(0.6e-6, 0.5e-6, 1e-2, 1e-3, 1e-6)
    with pytest.raises(GeometryError):
        solve_layout(LAM, 0.5e-6, 1e-3, 1e-3, 1e-6)


# --- field ---------------------------------------------------------------------------------

def test_field_normalization_enforced():
    with pytest.raises(DomainError):
        ThreeBeamField(0.5, 0.5, 0.5, 0.0, ALPHA, LAM)
    f = ThreeBeamField.from_intensities((1, 2, 1), half_angle=ALPHA, wavelength=LAM)
    assert abs(f.center) ** 2 == pytest.approx(0.5)
    with pytest.raises(DomainError):
        ThreeBeamField.from_intensities((1, -1, 1), half_angle=ALPHA, wavelength=LAM)


def test_interference_matches_direct_sum():
    a = np.array([0.3 + 0.2j, 0.6, 0.1 - 0.5j]) / math.sqrt(0.75)
    f = ThreeBeamField(*a, 1.1, ALPHA, LAM)
    x = np.linspace(-2e-6, 2e-6, 64)
    z = np.linspace(-1e-4, 1e-4, 32)
    np.testing.assert_allclose(interference(f, x, z).intensity, direct_intensity(f, x, z), atol=1e-9)


def test_center_beam_only_is_uniform():
    f = ThreeBeamField(0, 1, 0, 0.3, ALPHA, LAM)
    imap = interference(f, np.linspace(0, 5e-6, 50), np.linspace(0, 1e-3, 20))
    np.testing.assert_allclose(imap.intensity, 1.0, atol=1e-15)


def test_two_beam_fringe_period():
    f = ThreeBeamField.from_intensities((1, 0, 1), half_angle=4e-3, wavelength=LAM)
    dx = 1e-8
    x = np.arange(1000) * dx
    row = interference(f, x, [0.0]).intensity[0]
    assert fringe_period(LAM, 4e-3) == pytest.approx(1.0e-6, rel=1e-5)
    assert x_period(row, dx) == pytest.approx(fringe_period(LAM, 4e-3), abs=dx)


@pytest.mark.parametrize("phase, factor", [(math.pi / 2, 1), (3 * math.pi / 2, 1), (0.0, 2), (0.7, 2)])
def test_equal_amplitude_period_depends_on_phase(phase, factor):
    dx = 1e-8
    x = np.arange(2000) * dx
    row = interference(equal_field(phase), x, [0.0]).intensity[0]
    assert x_period(row, dx) == pytest.approx(factor * LAM / (2 * math.sin(ALPHA)), abs=dx)


@settings(max_examples=30)
@given(r=st.tuples(st.floats(0, 1), st.floats(0.01, 1), st.floats(0, 1)), phase=st.floats(0, 2 * math.pi),
       glob=st.floats(0, 2 * math.pi))
def test_nonnegative_and_global_phase_invariant(r, phase, glob):
    f = ThreeBeamField.from_intensities(r, phase=phase, half_angle=ALPHA, wavelength=LAM)
    g = np.exp(1j * glob)
    rotated = ThreeBeamField(f.minus * g, f.center * g, f.plus * g, phase, ALPHA, LAM)
    x = np.linspace(-1e-6, 1e-6, 33)
    z = np.linspace(0, 2e-3, 17)
    a, b = interference(f, x, z).intensity, interference(rotated, x, z).intensity
    assert np.all(a >= 0)
    np.testing.assert_allclose(a, b, atol=1e-12)


# --- axial shift ---------------------------------------------------------------------------

def test_axial_shift_examples():
    assert axial_shift(0.0, LAM, 4e-3) == 0.0
    assert axial_shift(2 * math.pi / 100, LAM, 4e-3) == pytest.approx(10.0e-6, rel=1e-3)
    assert axial_shift(2 * math.pi, LAM, 4e-3) == pytest.approx(1.0e-3, rel=1e-3)
    assert axial_shift(2 * math.pi, LAM, 4e-3) == pytest.approx(LAM / (1 - math.cos(4e-3)), rel=1e-9)
    with pytest.raises(DomainError):
        axial_shift(0.1, LAM, 0.0)


@settings(max_examples=20, deadline=None)
@given(dphi=st.floats(-math.pi, math.pi), z0=st.floats(-3.0, 3.0))
def test_translation_identity(dphi, z0):
    f = equal_field()
    dz = axial_shift(dphi, LAM, ALPHA)
    x = np.linspace(-2e-6, 2e-6, 64)
    z = z0 + np.linspace(0, 2e-3, 64)
    a = interference(f.with_phase(f.phase + dphi), x, z).intensity
    b = interference(f, x, z + dz).intensity
    assert np.max(np.abs(a - b)) <= 1e-9


def test_full_period_shift_repeats_pattern():
    f = equal_field()
    x = np.linspace(-2e-6, 2e-6, 40)
    z = np.linspace(0, 1e-4, 10)
    period = axial_shift(2 * math.pi, LAM, ALPHA)
    np.testing.assert_allclose(interference(f, x, z).intensity, interference(f, x, z + period).intensity,
                               atol=1e-9)


# --- analyzer ---------------------------------------------------------------------------------

def test_uniform_map_gives_duty_times_window():
    x = np.arange(400) * 1e-8
    imap = IntensityMap(x, np.array([0.0]), np.ones((1, 400)))
    s = analyzer_scan(imap, 0.0, 1e-6, 0.3, np.linspace(0, 1e-6, 7))
    np.testing.assert_allclose(s, 0.3 * 400 * 1e-8, rtol=1e-12)


def two_beam_map(n=1000, dx=1e-8):
    f = ThreeBeamField.from_intensities((1, 0, 1), half_angle=ALPHA, wavelength=LAM)
    return interference(f, np.arange(n) * dx, [0.0])


def test_square_wave_visibility_is_two_over_pi():
    imap = two_beam_map()
    p = fringe_period(LAM, ALPHA)
    row = imap.intensity[0]
    fringe_vis = (row.max() - row.min()) / (row.max() + row.min())
    s = analyzer_scan(imap, 0.0, p, 0.5, np.linspace(0, p, 200, endpoint=False))
    vis = (s.max() - s.min()) / (s.max() + s.min())
    assert fringe_vis == pytest.approx(1.0, abs=1e-9)
    assert vis == pytest.approx(2 / math.pi * fringe_vis, abs=2e-3)
    # sinusoidal: residual after removing the fundamental is negligible
    c = np.fft.rfft(s)
    assert np.sum(np.abs(c[2:]) ** 2) < 1e-6 * np.abs(c[1]) ** 2


def test_half_period_offset_inverts_modulation():
    imap = two_beam_map()
    p = fringe_period(LAM, ALPHA)
    offsets = np.linspace(0, p, 40, endpoint=False)
    s = analyzer_scan(imap, 0.0, p, 0.5, offsets)
    s_half = analyzer_scan(imap, 0.0, p, 0.5, offsets + p / 2)
    mean = s.mean()
    np.testing.assert_allclose(s_half - mean, -(s - mean), atol=1e-3 * mean)
    np.testing.assert_allclose(analyzer_scan(imap, 0.0, p, 0.5, offsets + p), s, rtol=1e-9)


def test_analyzer_preconditions():
    imap = two_beam_map(100)
    with pytest.raises(DomainError, match="undersampled"):
        analyzer_scan(imap, 0.0, 1.5e-8, 0.5, [0.0])
    with pytest.raises(DomainError):
        analyzer_scan(imap, 0.0, 1e-6, 1.0, [0.0])
    with pytest.raises(DomainError):
        analyzer_scan(imap, 0.0, -1e-6, 0.5, [0.0])
    with pytest.raises(DomainError):
        analyzer_scan(imap, 1.0, 1e-6, 0.5, [0.0])


# --- files ---------------------------------------------------------------------------------

def test_exports(tmp_path):
    imap = interference(equal_field(), np.linspace(0, 1e-6, 3), np.array([0.0, 1e-3]))
    imap.to_csv(tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "x_m,z_m,intensity" and len(rows) == 7
    imap.to_matrix(tmp_path / "p.mat")
    mat = np.loadtxt(tmp_path / "p.mat")
    assert mat.shape == (3, 4) and mat[0, 0] == 3
    np.testing.assert_allclose(mat[1:, 1:], imap.intensity, rtol=1e-8)
    write_scan(tmp_path / "s.csv", [0.0, 1e-7], [1.0, 2.0])
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "x0_m,signal"
