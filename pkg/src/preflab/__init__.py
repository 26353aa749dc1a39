"""Preference-based reward learning lab.

Learn reward models from pairwise segment comparisons issued by non-ideal
teachers, shape a trajectory-embedding space so clearly comparable segment
pairs stand apart, and spend the labeling budget on queries the teacher can
actually answer.
"""

from .core import (
    Episode,
    OfflineDataset,
    PreferenceDataset,
    PreferenceLabel,
    PreferenceTriple,
    Segment,
    load_dataset,
    load_preferences,
    sample_segments,
    save_dataset,
    save_preferences,
    segment_return,
)
from .embedding import (
    DistanceMetric,
    EmbeddingMode,
    EmbeddingModel,
    LossBatches,
    LossWeights,
    SeparationReport,
    export_embeddings,
    gradient_check,
    loss_amb,
    loss_norm,
    loss_quad,
    loss_recon,
    separation_report,
    total_loss,
    train_embedding,
)
from .envs import GridNavEnv, PointMassEnv, QualityMix, generate_offline_dataset
from .harness import ExperimentConfig, run_experiment
from .reward import (
    RewardEnsemble,
    RewardNet,
    bt_probability,
    ce_loss,
    evaluate_reward,
    relabel_dataset,
    train_reward,
    value_iteration,
)
from .selection import (
    DensityModel,
    disagreement_score,
    estimate_densities,
    pair_distance,
    rejection_sample,
    select_queries,
)
from .teacher import HumanTeacher, TeacherConfig, perfect_label, scripted_label

__version__ = "0.1.0"
