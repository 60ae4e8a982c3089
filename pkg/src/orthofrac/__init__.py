"""Phase-field fracture simulation and calibration toolkit for orthotropic brittle media.

The package covers the full workflow: elastic-parameter estimation from
ultrasonic wave speeds and compression tests, staggered phase-field
simulation of notched three-point-bending specimens on graded structured
meshes, response-surface calibration of the remaining parameters against
load-deflection curves, and crack-surface metrology.

Units are mm / N / MPa throughout the mechanical pipeline (MPa * mm^2 = N);
densities enter in kg/m^3 only for the wave-speed conversion.
"""

__version__ = "0.1.0"

from .crack import CrackSurface, DeviationField, average_surface, broken_region, deviation, limit_surfaces
from .elastic import StiffnessTensor, orthotropic_voigt, strain_energy
from .phasefield import PhaseFieldLaw, degradation, dissipation
from .scans import AnchoredScan, align_and_average_scans, clean_scan

__all__ = [
    "StiffnessTensor",
    "orthotropic_voigt",
    "strain_energy",
    "PhaseFieldLaw",
    "degradation",
    "dissipation",
    "CrackSurface",
    "DeviationField",
    "broken_region",
    "limit_surfaces",
    "average_surface",
    "deviation",
    "AnchoredScan",
    "clean_scan",
    "align_and_average_scans",
    "__version__",
]
