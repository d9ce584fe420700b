"""Low-rank tensor recovery from multi-level quantized measurements.

Recovers a K-way tensor from noisy, quantized, partially observed entries
by penalized maximum likelihood: a box-constrained tensor variable is
coupled to a CP factorization and fit with alternating proximal gradient
sweeps over the factors, the tensor, and (optionally) the quantization
boundaries.
"""

from .experiments import (
    RunRecord,
    SynthSpec,
    gen_synthetic,
    holdout_split,
    prediction_error,
    prediction_grid,
    quantize_to_levels,
    reference_boundaries,
    relative_error,
    run_one,
    run_sweep,
)
from .fileio import (
    FileFormatError,
    read_observations,
    read_records,
    read_tensor,
    write_observations,
    write_records,
    write_tensor,
)
from .kernels import backend_name
from .likelihood import (
    ObjectiveContext,
    grad_boundary,
    grad_factor,
    grad_x,
    neg_log_likelihood,
    numeric_gradient,
    objective_h,
)
from .quantization import (
    Boundaries,
    EmptyObservationError,
    NoiseModel,
    QuantizedObservations,
    bin_probability,
    compute_constants,
    default_boundaries,
    error_bound,
    level_representatives,
    quantize_sample,
    quantize_values,
)
from .solver import (
    NumericalError,
    SolveResult,
    SolverConfig,
    SolverState,
    initialize,
    iterate_once,
    project_boundaries,
    project_tensor,
    run,
    step_sizes,
)
from .tensor_core import (
    ObservationSet,
    cp_als_init,
    cp_reconstruct,
    factor_coefficients,
    fold,
    frobenius_norm,
    gram_spectral_norm,
    khatri_rao,
    khatri_rao_list,
    unfold,
)

__version__ = "0.1.0"
