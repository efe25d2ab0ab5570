"""Graph-filter identification that stays accurate when the graph is perturbed."""

from ._validation import ParameterError, SingularityError
from .estimators import RobustFilterIdentifier, TLSSEMRegressor
from .filters import (
    Covariance,
    FilterCoeffs,
    GraphFilter,
    SignalBatch,
    add_awgn,
    build_filter,
    generate_io_pairs,
    generate_white_inputs,
    random_coeffs,
    sample_covariance,
    sem_filter,
)
from .graph import (
    Gso,
    GsoConstraintSet,
    PerturbationSpec,
    generate_er,
    graph_l1_error,
    load_karate,
    perturb_links,
    project_onto_constraints,
)
from .solvers import (
    DenoiseResult,
    GammaSchedule,
    InnerConfig,
    RfiConfig,
    RfiResult,
    fi_baseline,
    filter_id_step,
    graph_denoise_step,
    objective_eval,
    prox_double_l1,
    rfi_d,
    rfi_iter,
    rfi_r,
    tls_sem_baseline,
)

__version__ = "0.1.0"
