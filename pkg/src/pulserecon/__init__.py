"""Control pulse reconstruction for parametric hydrogen propagators on a transmon."""

__version__ = "0.1.0"

from .linalg import expm_neg_i, fidelity, hermitian_eig, hs_inner
from .hydrogen import StoBasis, build_model, load_basis, target_propagator
from .transmon import ControlPulse, DeviceConfig, propagate, step_propagators
from .grape import (GrapeSettings, PulseFamily, load_family, optimize_pulse, save_family,
                    sweep_family)
from .reconstruction import (PolyPulseModel, SpectralPulseModel, fit_poly_model,
                             fit_spectral_model, reconstruct, reconstruct_poly,
                             reconstruct_spectral, load_model, save_model)
from .harness import (EvolutionTrace, MassSchedule, TargetFamily, benchmark, device_propagator,
                      dynamic_mass_simulation, evolve_repeated, exact_evolution,
                      max_population_deviation, verify_model)
