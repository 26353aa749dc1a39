"""Synthetic scalar-value fixtures for the embedding-space studies.

Each item is a degenerate one-step segment whose hidden return IS its
scalar value, so a threshold teacher and the trainer can run on them
without an environment. Used by the 2-D value-ordering demo, the margin
and separability checks, and the collapse study.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .core import PreferenceDataset, PreferenceLabel, PreferenceTriple, Segment
from .embedding import (
    DistanceMetric,
    EmbeddingModel,
    LossWeights,
    pca_project,
    train_embedding,
)


def scalar_value_segments(values) -> list[Segment]:
    """One-step segments carrying scalar values as hidden returns."""
    return [
        Segment(
            id=f"item{i}",
            states=np.array([[float(v)]]),
            actions=np.array([[0.0]]),
            true_return=float(v),
            source_episode=i,
        )
        for i, v in enumerate(values)
    ]


def uniform_value_segments(n: int, seed: int) -> list[Segment]:
    rng = np.random.default_rng(seed)
    return scalar_value_segments(rng.uniform(0.0, 1.0, size=n))


def two_band_segments(n_per_band: int, seed: int) -> list[Segment]:
    """Values packed into two well-separated bands, [0, 0.1] and [0.9, 1]."""
    rng = np.random.default_rng(seed)
    low = rng.uniform(0.0, 0.1, size=n_per_band)
    high = rng.uniform(0.9, 1.0, size=n_per_band)
    return scalar_value_segments(np.concatenate([low, high]))


def lattice_band_segments(n_per_band: int, width: float, gap: float) -> list[Segment]:
    """Two evenly spaced value bands [0, width] and [width+gap, 2*width+gap].

    With a comparison threshold just above ``gap`` the inner band edges form
    a small ambiguous bridge across the gap while the bands stay internally
    ambiguous; the collapse study depends on that structure.
    """
    low = np.linspace(0.0, width, n_per_band)
    high = np.linspace(width + gap, 2 * width + gap, n_per_band)
    return scalar_value_segments(np.concatenate([low, high]))


def threshold_preferences(
    segments: list[Segment],
    threshold: float,
    n_pairs: int,
    seed: int,
    round_index: int = 0,
) -> PreferenceDataset:
    """Label uniformly sampled pairs: value gaps under ``threshold`` skip."""
    rng = np.random.default_rng(seed)
    n = len(segments)
    triples = []
    for _ in range(n_pairs):
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        gap = segments[i].true_return - segments[j].true_return
        if abs(gap) < threshold:
            label = PreferenceLabel.NO_COMP
        elif gap > 0:
            label = PreferenceLabel.PREFER_FIRST
        else:
            label = PreferenceLabel.PREFER_SECOND
        triples.append(PreferenceTriple(segments[i], segments[j], label, round_index))
    return PreferenceDataset(triples)


def all_pairs_preferences(
    segments: list[Segment], threshold: float, round_index: int = 0
) -> PreferenceDataset:
    """Exhaustively label every unordered pair of items."""
    triples = []
    for i in range(len(segments)):
        for j in range(i + 1, len(segments)):
            gap = segments[i].true_return - segments[j].true_return
            if abs(gap) < threshold:
                label = PreferenceLabel.NO_COMP
            elif gap > 0:
                label = PreferenceLabel.PREFER_FIRST
            else:
                label = PreferenceLabel.PREFER_SECOND
            triples.append(PreferenceTriple(segments[i], segments[j], label, round_index))
    return PreferenceDataset(triples)


def value_ordering_demo(
    seed: int,
    n_items: int = 1000,
    n_pairs: int = 20000,
    threshold: float = 0.3,
    steps: int = 20000,
    lr: float = 0.1,
    weights: LossWeights = LossWeights(lambda_amb=0.0, lambda_quad=1.0, lambda_norm=0.1),
    metric: DistanceMetric = DistanceMetric.L2,
):
    """Train 2-D table embeddings of uniform scalar items and measure how
    well the first principal axis recovers the value ordering.

    Returns (model, segments, preferences, spearman, projection).
    """
    segments = uniform_value_segments(n_items, seed)
    preferences = threshold_preferences(segments, threshold, n_pairs, seed + 1)
    model = EmbeddingModel.new_table(segments, dim=2, seed=seed + 2)
    train_embedding(
        model,
        segments,
        preferences,
        steps=steps,
        lr=lr,
        weights=weights,
        metric=metric,
        seed=seed + 3,
    )
    z, _ = model.encode_segments(segments)
    values = np.array([s.true_return for s in segments])
    proj = pca_project(z, orient_by=values)
    rho = float(stats.spearmanr(values, proj[:, 0]).statistic)
    return model, segments, preferences, rho, proj
