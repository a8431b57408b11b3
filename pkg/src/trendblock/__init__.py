"""Maximin optimal block designs for experiments on linearly ordered units."""

from .builder import (
    OptimalDesignReport,
    assemble_design,
    build_optimal_design,
    certify_maximin,
    exhaustive_max_trace,
)
from .efficiency import (
    e1,
    e2,
    efficiency_table,
    optimality_breakpoints,
    s_min,
    trace_cl_closed_form,
)
from .errors import (
    BudgetExceededError,
    InfeasibleError,
    InvalidParameterError,
    TrendBlockError,
)
from .model import (
    CovarianceMatrixSet,
    DesignArray,
    ModelParams,
    full_info_matrix,
    is_completely_symmetric,
    lambdas_from_components,
    loewner_geq,
    minimal_info_matrix,
    phi_vector,
    sigma_upper_bound,
    w_matrix,
)
from .orders import (
    brute_force_optimal,
    min_ssq_profile,
    optimal_order,
    order_stats,
    pi_q,
    s_star,
    tf_ntf_order,
    trend_filler,
)
from .sba import construct_sba, replicate_sba, verify_sba

__version__ = "0.1.0"
