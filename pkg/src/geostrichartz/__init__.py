"""Spectral simulator and verification harness for the linear semigroups of
the primitive, stably stratified Boussinesq and rotating Euler systems."""

from .dispersion import (
    DispersionKind,
    ModePropagator,
    apply_full_semigroup,
    apply_phase_semigroup,
    duhamel,
    eigen_decompose,
    leray_project,
    phase_value,
    symbol_matrix,
)
from .normlab import (
    ScalingReport,
    SharpnessFamily,
    StrichartzSpec,
    admissibility_check,
    strichartz_quotient,
)
from .restriction import QuadratureGrid, SurfaceSpec, restriction_quotient, surface_restrict_norm
from .spectral import (
    GridSpec,
    MixedNormSpec,
    SpectralField,
    TimeWindow,
    from_physical,
    mixed_norm,
    random_test_field,
    sobolev_norm,
    to_physical,
)

__version__ = "0.1.0"
