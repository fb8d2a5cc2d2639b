"""simgcn: kNN similarity graphs and a from-scratch two-layer GCN for
supervised and semi-supervised classification of feature embeddings."""

from .dataset import (
    FeatureMatrix,
    LabelMask,
    LabelVector,
    SplitPlan,
    load_features,
    load_labels,
    make_folds,
    make_label_mask,
    save_features,
    save_labels,
    standardize_features,
    synth_blobs,
)
from .errors import SimgcnError
from .gcn import (
    GcnModel,
    Hyperparams,
    TrainingTrace,
    backward,
    forward,
    gradient_check,
    init_model,
    masked_cross_entropy,
    predict,
    train,
)
from .graph import (
    DistanceMatrix,
    GraphConfig,
    PropagationOperator,
    SimilarityGraph,
    build_graph,
    distance_to_similarity,
    knn_edges,
    pairwise_distances,
    propagation_operator,
    symmetrize,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    compute_metrics,
    cross_validate,
    ratio_sweep,
    run_semi_supervised,
    run_supervised,
)

__version__ = "0.1.0"
