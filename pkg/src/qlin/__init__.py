"""Structural analysis of open linear quantum systems.

Builds measurement-based and coherent feedback loops around linear quantum
plants and decides, through controllability/observability geometry, Markov
parameters, and transfer functions, whether back-action evasion, QND
variables, or decoherence-free subsystems are achieved.
"""

__version__ = "0.1.0"

from .core import (
    Channel,
    MeasurementSplit,
    Ports,
    QuantumLinearSystem,
    ShapeError,
    StateSpaceModel,
    ValidationError,
    PortLookupError,
    augment_with_vacuum,
    build_system,
    complex_to_quadrature,
    homodyne_split,
    quadrature_to_complex,
    realizability_defect,
    sigma,
)
from .structural import (
    KalmanDecomposition,
    Subspace,
    classical_subsystem,
    complement,
    controllability_matrix,
    intersect,
    kalman_decompose,
    kernel,
    markov_parameters,
    observability_matrix,
    principal_angles,
    range_space,
    span_of,
)
from .goals import GoalVerdict, check_bae, find_dfs, find_qnd, transfer_zero_equivalence
from .xfer import (
    SingularityError,
    SpectrumCurve,
    TransferFunction,
    evaluate,
    frequency_response,
    noise_power,
    normalized_gw_signal,
    spectrum_csv,
    sql_curve,
    squeezed_variances,
)
from .interconnect import (
    ClassicalController,
    QuantumController,
    cf_type1,
    cf_type2,
    direct_mf,
    direct_mf_controller,
    mf_type1,
    mf_type2,
)
from . import scenarios
from .nogo import NogoReport, sample_classical_controller, verify_nogo
