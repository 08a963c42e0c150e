"""Model-based clustering of complete rankings.

Distance-based (Mallows-Kendall) and extended Plackett-Luce mixture
models with EM/EMM maximum-likelihood fitting, BIC model selection, and
brute-force oracles for small K.
"""

from .perms import (
    Metric,
    Permutation,
    backward,
    compose,
    distance,
    enumerate_permutations,
    identity,
    inverse,
    kendall_neighborhood,
)
from .models import (
    LAMBDA_CAP,
    DbParams,
    EplParams,
    db_log_pmf,
    epl_log_pmf,
    expected_kendall_distance,
    kendall_partition,
    sample_db,
    sample_epl,
    solve_lambda,
)
from .fit import (
    ComponentCollapseError,
    Family,
    FitError,
    FitResult,
    Mixture,
    aitken_converged,
    e_step,
    fit_mixture,
    initial_mixture,
    m_step_db,
    mm_update_support,
    update_reference_order,
)
from .select import ModelScore, ScanResult, bic, count_free_params, model_scan
from .diag import (
    CrossTab,
    borda_ordering,
    cross_tab,
    first_order_marginals,
    iia_residuals,
    map_classify,
)
from .dataio import (
    DataFormatError,
    Dataset,
    TiePolicy,
    rank_quantitative,
    read_dataset,
    read_fit,
    simulate_dataset,
    write_dataset,
    write_fit,
)

__version__ = "0.1.0"
