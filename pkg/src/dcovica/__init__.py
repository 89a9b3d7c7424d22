"""Independent component analysis by distance covariance."""
from __future__ import annotations

__version__ = "0.1.0"

from .dcov import DcovStat, chain_dcov, dcov_brute, dcov_fast, dcov_ustat, pairwise_distances
from .errors import (
    ConvergenceWarning,
    DcovIcaError,
    DegenerateDataError,
    InputError,
    InsufficientDataError,
    NotOrthogonalError,
    ReflectionError,
    SingularCovarianceError,
    SingularMatrixError,
)
from .estimator import (
    FitOptions,
    IcaFit,
    fit_ica,
    fit_joint,
    fit_sequential,
    fit_stage,
    latin_hypercube_init,
    objective_dcov,
    objective_pitdcov,
    stage_objective,
)
from .harness import (
    BenchmarkConfig,
    SourceDistribution,
    fastica,
    fastica_baseline,
    load_catalog,
    parse_config,
    random_mixing,
    run_benchmark,
)
from .inference import (
    TestResult,
    confidence_radius,
    existence_test,
    mutual_independence_stat,
    permutation_test_mutual,
    random_signed_permutation,
    serial_stat,
    serial_test,
)
from .metrics import ErrorBreakdown, mixing_error, mixing_error_brute
from .pit import SmoothedCdf, rank_transform, silverman_bandwidth, smoothed_pit
from .rotations import (
    canonical_theta,
    givens,
    partial_product,
    sign_canonical,
    theta_from_w,
    w_from_theta,
)
from .samples import Whitening, center, read_csv, standardize_columns, var_ols_residuals, whiten, write_csv
