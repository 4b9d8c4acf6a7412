"""Count-based hyperedge geometry and nearest-neighbor prediction on induced hypergraphs."""

from .core import (
    BipartiteGraph,
    EdgeSchema,
    Hyperedge,
    Hypergraph,
    IncidenceIndex,
    Interner,
    build_incidence_index,
    induce_hypergraph,
    intersection_size,
    parse_bipartite_edges,
)
from .evaluation import (
    PAPER_EPSILONS,
    GridCell,
    GridResult,
    SplitSpec,
    error_rate,
    grid_search,
    mae,
    rmse,
    split_observations,
)
from .geometry import (
    GeometryConfig,
    NeighborhoodRecord,
    SizePolicy,
    base_neighborhood,
    batch_counts,
    batch_records,
    equivalent,
    hyperedge_distance,
    neighborhood_average,
    neighborhood_bandwidth,
    neighborhood_count,
    neighborhood_record,
    refined_neighborhood,
)
from .predictors import (
    FeatureVector,
    KClampWarning,
    ShellSet,
    feature_vector,
    knn_shells,
    predict_label_embedded,
    predict_label_modified,
    predict_weight_embedded,
    predict_weight_modified,
)
from .weighting import (
    FairnessGoodness,
    ObservationMap,
    bucketize_labels,
    fairness_goodness,
    hyperedge_weights,
    normalize_ratings,
)

__version__ = "0.1.0"
