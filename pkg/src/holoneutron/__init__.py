"""Slow-neutron diffraction by holographic sinusoidal phase gratings.

Multiwave coupled-wave simulation with analytic two-wave and thin-grating
limits, instrument-resolution averaging, rocking-curve fitting, three-port
splitter design, and a model of a Zernike three-path interferometer.
"""
from .analysis import (DesignPoint, FitProblem, FitResult, design_three_port, fit,
                       pendelloesung_scan)
from .cwt import (CoupledWaveSystem, OrderField, build_system, efficiencies, order_efficiencies,
                  propagate, thin_grating, two_wave)
from .errors import (AccuracyError, ConfigError, DomainError, GeometryError, HoloNeutronError,
                     NoPropagatingOrderError, NoSignalError)
from .instrument import (DetectorFrame, Region, RockingCurve, convolved_efficiencies, reduce_frame,
                         rocking_scan)
from .model import Beam, Grating, MaterialModulation, bragg_angle, effective_thickness, index_modulation, klein_cook
from .zernike import (InterferometerLayout, IntensityMap, ThreeBeamField, analyzer_scan, axial_shift,
                      interference, solve_layout)

__version__ = "0.1.0"
