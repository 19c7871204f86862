"""Coherent algebras of finite metric measure spaces."""

from .space import (
    FiniteMMS,
    NumericPolicy,
    ValidationReport,
    StructuralError,
    SpaceFormatError,
    PerturbationError,
    validate,
    random_euclidean,
    random_graph_metric,
    perturb,
    as_exact,
    as_float,
    load_space,
    dump_space,
)
from .kernel import Kernel, convolve, hadamard, flip, conv_power, entrywise
from .closure import (
    CoherentPartition,
    FullnessCertificate,
    coherent_closure,
    verify_configuration,
    fullness,
    brute_force_closure,
    isometry_orbitals,
)

__version__ = "0.1.0"
