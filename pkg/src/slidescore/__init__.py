"""Unsupervised slide-quality scoring.

Seven interpretable design-cue metrics are fused with PCA-reduced image
embeddings into a standardized descriptor, and slides are scored by their
isolation-forest anomaly distance from a reference corpus of well-designed
slides. A statistics toolkit validates scores against human ratings.
"""

from .embeddings import (
    Embedding,
    ProviderConfig,
    embed,
    load_precomputed,
    make_provider,
    stub_embed,
)
from .forest import (
    AnomalyReport,
    ForestParams,
    IsolationForest,
    IsoTree,
    SlideScore,
    anomaly_from_mean_path,
    build_tree,
    c_factor,
    centroid_fit,
    centroid_score,
    forest_fit,
    path_length,
    score,
    score_deck,
)
from .imaging import (
    METRIC_NAMES,
    MetricVector,
    SlideImage,
    brightness_contrast,
    color_harmony,
    colorfulness,
    compute_metrics,
    decode_image,
    edge_density,
    layout_balance,
    luminance_map,
    normalize_size,
    text_density,
    whitespace,
)
from .latent import (
    PcaModel,
    ZScaler,
    fuse,
    pca_fit,
    pca_project,
    project2d,
    scaler_apply,
    scaler_fit,
)
from .model_io import ProviderFingerprint, QualityModel, load_model, save_model
from .stats import (
    CorrelationResult,
    RatingsMatrix,
    correlate_scores,
    cronbach_alpha,
    fisher_ci,
    icc_2k,
    kendall_w,
    pearson,
    spearman,
)
from .corpus import CorpusManifest, fit_model, scan_corpus, score_directory

__version__ = "0.1.0"
