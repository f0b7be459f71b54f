"""Open-system relaxation, moving preferred basis and the phase-space classical limit.

Submodules:

* ``friedrichs``  one-excitation Friedrichs/Lee model, reduced states, coherent pairs
* ``poles``       self-energy continuation, resonance poles, relaxation time
* ``modes``       mode fits, effective width, privileged state, moving basis
* ``wwm``         lattice Weyl-Wigner-Moyal map, star product, brackets
* ``classical``   characteristic domains, boxes, action-angle transport
* ``scenarios``   end-to-end runs used by the CLI and the acceptance suite
"""

from ._backend import BACKEND
from .errors import QCLimitError
from .friedrichs import (
    DensityMatrix,
    FriedrichsConfig,
    Propagator,
    SpectralDensity,
    build_one_excitation_hamiltonian,
    reduced_density,
    survival_amplitude,
)
from .poles import ComplexPole, PoleCatalogue, find_pole, pole_ladder, relaxation_time, self_energy
from .modes import (
    effective_gamma,
    effective_generator,
    fit_modes,
    linear_entropy,
    moving_preferred_basis,
    privileged_state,
)
from .wwm import PhaseSpaceFunction, PhaseSpaceGrid, star_product, weyl_quantize, wigner_transform
from .classical import Box, box_average, characteristic_domain, evolve_phase_space

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "QCLimitError", "DensityMatrix", "FriedrichsConfig", "Propagator",
    "SpectralDensity", "build_one_excitation_hamiltonian", "reduced_density",
    "survival_amplitude", "ComplexPole", "PoleCatalogue", "find_pole", "pole_ladder",
    "relaxation_time", "self_energy", "effective_gamma", "effective_generator", "fit_modes",
    "linear_entropy", "moving_preferred_basis", "privileged_state", "PhaseSpaceFunction",
    "PhaseSpaceGrid", "star_product", "weyl_quantize", "wigner_transform", "Box",
    "box_average", "characteristic_domain", "evolve_phase_space",
]
