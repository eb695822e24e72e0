"""Joint video/text embedding, k-medoids summarization and f-measure evaluation."""

from dsfsum._core import (
    FeatureTrack,
    IoError,
    ProjectionHead,
    Segment,
    SyntheticWorld,
    ValidationError,
    __version__,
    budget_k,
    contrastive_loss,
    distance,
    exhaustive_select,
    extract_segments,
    f_measure,
    gradient_check,
    human_agreement,
    init_head,
    lazy_greedy_select,
    make_scene_track,
    make_synthetic_world,
    naive_greedy_select,
    objective,
    pca_project,
    read_feature_track,
    segment_count,
    text_forward,
    to_mask,
    train,
    uniform_baseline,
    video_forward,
    write_feature_track,
)

__all__ = [
    "FeatureTrack",
    "IoError",
    "ProjectionHead",
    "Segment",
    "SyntheticWorld",
    "ValidationError",
    "__version__",
    "budget_k",
    "contrastive_loss",
    "distance",
    "exhaustive_select",
    "extract_segments",
    "f_measure",
    "gradient_check",
    "human_agreement",
    "init_head",
    "lazy_greedy_select",
    "make_scene_track",
    "make_synthetic_world",
    "naive_greedy_select",
    "objective",
    "pca_project",
    "read_feature_track",
    "segment_count",
    "text_forward",
    "to_mask",
    "train",
    "uniform_baseline",
    "video_forward",
    "write_feature_track",
]
