"""Design and validation of cluster-level randomized network experiments.

The package covers the full pipeline: graph and cluster ingestion, the
cluster contact summary, closed-form bias/variance analysis, optimization
of the treatment covariance through a unit-row correlation root, sampling
of the resulting correlated design, and Monte Carlo / exact-enumeration
comparison against baseline randomization schemes.
"""

from .manifest import VERSION as __version__
from .graph import (
    Graph,
    GraphFormatError,
    expand_treatment,
    generate_sbm,
    load_edge_list,
    save_edge_list,
)
from .clustering import (
    Clustering,
    ClusterSummary,
    build_cluster_summary,
    louvain,
    read_clustering,
    write_clustering,
)
from .outcomes import (
    AnalysisModelParams,
    SimModelParams,
    eval_analysis,
    eval_sim,
    gate_analysis,
    gate_sim,
    with_gamma,
)
from .estimators import EstimateRecord, dim, ht, ht_adjusted
from .analysis import (
    ExactVariance,
    bias_closed_form,
    h_vector,
    is_valid_covariance,
    objective_f,
    objective_terms,
    omega_from_model,
    variance_bound,
    variance_exact,
)
from .designs import (
    BernoulliDesign,
    BlockDesign,
    CompleteDesign,
    Design,
    DesignEnumerationError,
    SignGaussianDesign,
    build_ibr_blocks,
    make_design,
)
from .optimizer import (
    OptimizationError,
    OptimizerConfig,
    OptTrace,
    covariance_from_root,
    gradient_from_root,
    objective_from_root,
    optimize,
    project_rows,
)
from .simulation import (
    ReportCell,
    SimConfig,
    SimReport,
    baseline_levels,
    compare_designs,
    run_exact,
    run_mc,
)

__all__ = [
    "__version__",
    "Graph", "GraphFormatError", "expand_treatment", "generate_sbm",
    "load_edge_list", "save_edge_list",
    "Clustering", "ClusterSummary", "build_cluster_summary", "louvain",
    "read_clustering", "write_clustering",
    "AnalysisModelParams", "SimModelParams", "eval_analysis", "eval_sim",
    "gate_analysis", "gate_sim", "with_gamma",
    "EstimateRecord", "dim", "ht", "ht_adjusted",
    "ExactVariance", "bias_closed_form", "h_vector", "is_valid_covariance",
    "objective_f", "objective_terms", "omega_from_model", "variance_bound",
    "variance_exact",
    "BernoulliDesign", "BlockDesign", "CompleteDesign", "Design",
    "DesignEnumerationError", "SignGaussianDesign", "build_ibr_blocks",
    "make_design",
    "OptimizationError", "OptimizerConfig", "OptTrace", "covariance_from_root",
    "gradient_from_root", "objective_from_root", "optimize", "project_rows",
    "ReportCell", "SimConfig", "SimReport", "baseline_levels",
    "compare_designs", "run_exact", "run_mc",
]
