"""Critical spectra of spatially periodic pulses in slow-fast reaction-diffusion systems."""

__version__ = "0.1.0"

from .errors import PulseSpecError  # noqa: E402
from .model import GMParams, ModelSpec, gierer_meinhardt, validate_model  # noqa: E402
from .profile import (PulseProfile, SingularOrbit, read_profile, shoot_periodic_orbit,  # noqa: E402
                      singular_orbit, write_profile)
from .evans import (EvansValue, evans_factorized, evans_fast_reduced, evans_full,  # noqa: E402
                    evans_reduced, evans_slow_reduced, trace_criterion)
from .riccati import diagonalize, riccati_transform  # noqa: E402
from .spectrum import (ContourSpec, cancelation_scan, count_roots_contour, fast_zeros,  # noqa: E402
                       find_roots, instability_criteria, residue_slow_at_fast_zero, trace_gamma_curves)
from .kernels import backend  # noqa: E402

__all__ = [
    "ContourSpec", "EvansValue", "GMParams", "ModelSpec", "PulseProfile", "PulseSpecError", "SingularOrbit",
    "backend", "cancelation_scan", "count_roots_contour", "diagonalize", "evans_factorized", "evans_fast_reduced",
    "evans_full", "evans_reduced", "evans_slow_reduced", "fast_zeros", "find_roots", "gierer_meinhardt",
    "instability_criteria", "read_profile", "residue_slow_at_fast_zero", "riccati_transform", "shoot_periodic_orbit",
    "singular_orbit", "trace_criterion", "trace_gamma_curves", "validate_model", "write_profile",
]
