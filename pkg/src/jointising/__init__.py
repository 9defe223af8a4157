"""Joint estimation of several related Ising networks.

Each category's binary data share one set of variables; the joint
estimator couples the categories through a square-root group penalty on
every interaction, so edges present in all categories are easier to
recover than with separate l1 fits.
"""

__version__ = "0.1.0"

from .core import (
    BinaryDataset,
    CategoryCollection,
    DimensionError,
    PenaltySpec,
    conditional_logit,
    exact_loglik,
    log_partition,
    pseudo_loglik,
    pseudo_loglik_grad,
)
from .evaluation import (
    EdgeDecomposition,
    RocCurve,
    average_roc,
    decompose_edges,
    roc_auc,
    roc_curve,
    write_dot,
)
from .joint import (
    JointModel,
    KKTReport,
    check_kkt,
    factorize_penalty,
    fit_joint,
    fit_path,
    fit_separate,
    group_penalty,
    joint_objective,
    lla_weights,
)
from .selection import (
    CvResult,
    StabilityReport,
    cross_validate,
    default_grid,
    lambda_max,
    stability_select,
)
from .solver import FitResult, SolverError, SolverOptions, fit_weighted
from .synthetic import (
    EdgeSet,
    SimulationDesign,
    gen_chain,
    gen_nearest_neighbor,
    gen_scale_free,
    gibbs_sample,
    make_design,
    simulate,
)
