"""ion2d: simulation and analysis toolkit for planar trapped-ion crystals.

Submodules
----------
crystal    equilibrium geometry in a 3D harmonic trap
phonons    transverse mode spectra, vectors, Lamb-Dicke parameters
ising      spin-spin couplings synthesized from spin-dependent forces
spindyn    exact and collective quantum spin dynamics
annealing  classical simulated annealing on synthesized couplings
analysis   bitstring samples, covariance, Hamming-bubble chi-square tests
stability  background-gas collision response under laser cooling
sideband   motional thermometry from sideband ratios
cli        command-line pipeline over the above
"""

from . import (analysis, annealing, crystal, ising, phonons, sideband,
               spindyn, stability, units)
from .errors import (CapacityError, ConvergenceError, EstimationError,
                     Ion2dError, NearCollisionError, ResonanceError,
                     UnstableCrystalError)
from .units import AMU, YB171, IonSpecies, UnitSystem

__version__ = "0.1.0"

__all__ = [
    "analysis", "annealing", "crystal", "ising", "phonons", "sideband",
    "spindyn", "stability", "units",
    "AMU", "YB171", "IonSpecies", "UnitSystem",
    "Ion2dError", "ConvergenceError", "CapacityError", "UnstableCrystalError",
    "ResonanceError", "EstimationError", "NearCollisionError",
    "__version__",
]
