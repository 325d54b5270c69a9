"""Constructions on geodesically equivalent metric pairs."""

from .core import (
    charpoly_differential_residual,
    compatibility_residual,
    compute_L,
    l_tensor_field,
    projective_deformation,
    reconstruct_gbar,
    shift_to_nondegenerate,
    topalov_sinjukov,
)
from .factorization import (
    FactorizationResult,
    admissible_factorization,
    projectors,
    track_eigenvalue_groups,
)
from .levicivita import (
    LeviCivitaSpec,
    MultiBlock,
    SimpleEigenvalue,
    levi_civita_pair,
)
from .splitglue import (
    DecompositionFactor,
    GlueInput,
    SplitResult,
    block_condition_residuals,
    full_decompose,
    glue,
    glue_fields,
    split,
)

__all__ = [
    "FactorizationResult",
    "GlueInput",
    "DecompositionFactor",
    "LeviCivitaSpec",
    "MultiBlock",
    "SimpleEigenvalue",
    "SplitResult",
    "admissible_factorization",
    "block_condition_residuals",
    "charpoly_differential_residual",
    "compatibility_residual",
    "compute_L",
    "full_decompose",
    "glue",
    "glue_fields",
    "l_tensor_field",
    "levi_civita_pair",
    "projective_deformation",
    "projectors",
    "reconstruct_gbar",
    "shift_to_nondegenerate",
    "split",
    "topalov_sinjukov",
    "track_eigenvalue_groups",
]
