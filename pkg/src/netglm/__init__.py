"""netglm: subspace-constrained generalized linear models for network-linked data.

Responses sit on the nodes of a noisy relational structure; the linear
predictor is constrained to the sum of the covariate column space and the
leading spectral subspace of the relational matrix. The package provides the
spectral alignment and fitting pipeline, asymptotic tests that stay valid
under network perturbation, random-network simulation harnesses, and an
applied-analysis toolkit, all behind one CLI.
"""

__version__ = "0.1.0"

from .analysis import (
    AssortativityResult,
    CvAucResult,
    EliminationResult,
    FitConfig,
    NetworkDataset,
    assortativity,
    auc_score,
    backward_eliminate,
    centralities,
    centrality_correlations,
    cv_auc,
    effect_strength,
    prepare,
    roc_points,
    top_effect_groups,
)
from .errors import (
    CollinearityError,
    ConfigError,
    DataError,
    DegenerateDesignError,
    DegenerateFunctionalError,
    DomainError,
    EmptyNetworkError,
    InfeasibleDensityError,
    IrlsDivergenceError,
    NetglmError,
    NumericalError,
    UndefinedAssortativityError,
)
from .estimator import (
    Convergence,
    EffectiveDesign,
    FittedModel,
    back_transform,
    build_design,
    fit_network_glm,
    fit_subspace_glm,
    information,
    irls_solve,
    kappa_weights,
    predict,
    score,
)
from .families import GlmFamily, eval_link, log_likelihood, make_family
from .inference import (
    ChiSqResult,
    WaldResult,
    coef_test,
    network_effect_test,
    network_effect_test_fit,
    o_tilde,
)
from .netgen import (
    ProbMatrix,
    SimTruth,
    avg_degree_rule,
    dcbm_matrix,
    graphon_matrix,
    paper_design,
    sample_adjacency,
    sample_response,
    sbm_matrix,
)
from .rng import stream
from .simharness import (
    ReplicateMetrics,
    ScenarioConfig,
    ScenarioReport,
    replicate_metrics,
    report_row,
    run_scenario,
)
from .subspace import (
    ADJACENCY_LEADING,
    LAPLACIAN_SMALLEST,
    AlignedBases,
    SpectralBasis,
    TauDiagnostic,
    align_subspaces,
    orthonormal_basis,
    projection_matrices,
    r_threshold,
    select_r,
    spectral_basis,
    tau_diagnostic,
)
