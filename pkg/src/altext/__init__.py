"""altext: pool-based active learning for text classification.

Core pieces: a corpus layer (tokenization, TF-IDF, pools), two from-scratch
classifiers behind a capability contract, fourteen query strategies, two
stopping criteria, a resumable active-learning loop, an experiment CLI with
a simulated oracle, and an HTTP annotation service for human labeling.
"""

from .classification import (
    ClassifierCapabilities,
    ClassifierError,
    EmbedAvgLinear,
    SparseLinear,
    TrainConfig,
    create_classifier,
)
from .corpus import (
    CorpusError,
    Dataset,
    Document,
    LabelSpace,
    PoolState,
    SparseFeatureMatrix,
    build_dataset,
    build_vocabulary,
    export_csv,
    export_jsonl,
    load_dataset,
    tfidf_transform,
    tokenize,
)
from .loop import ActiveLearner, LoopConfig, LoopError, load
from .metrics import compute_metrics
from .rng import Rng
from .stopping import (
    ClassificationChange,
    KappaAverage,
    StopDecision,
    classification_change_should_stop,
    cohens_kappa,
    kappa_average_should_stop,
)
from .strategies import (
    QueryRequest,
    QueryResult,
    StrategyError,
    STRATEGIES,
    greedy_coreset,
    kmeans_pp_seeding,
    lightweight_coreset,
    run_query,
    uncertainty_scores,
)

__version__ = "0.1.0"
