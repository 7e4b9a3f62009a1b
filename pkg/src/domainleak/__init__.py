"""End-to-end DP tabular synthesis and the domain-extraction privacy game."""

from .attack import (
    GameConfig,
    GameResult,
    TargetSelection,
    auc,
    budget_for,
    naive_features,
    run_pipeline,
    run_shadow_game,
    select_target,
    train_classifier,
)
from .discretizers import (
    DiscretizerConfig,
    build_edges,
    decode,
    discretize,
    dp_quantile,
    kmeans_edges,
    privtree_edges,
    quantile_edges,
    uniform_edges,
)
from .domains import (
    DomainExtractionError,
    ExtractionConfig,
    direct_domain,
    dp_domain,
    dp_domain_column,
    provided_domain,
)
from .mechanisms import (
    BudgetLedger,
    MechanismError,
    PrivacyBudget,
    RandomStream,
    exponential_mechanism,
    gaussian,
    gaussian_sigma_for,
    laplace,
    two_sided_geometric,
)
from .tabular import (
    BinEdges,
    ColumnDomain,
    DataError,
    DiscreteTable,
    Domain,
    Table,
    direct_range,
    load_csv,
    mean_pairwise_distance,
    write_csv,
)

__version__ = "0.1.0"
