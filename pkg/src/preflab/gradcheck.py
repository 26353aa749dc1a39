"""Finite-difference oracle suites for every hand-written gradient.

Each suite builds small seeded fixtures and compares the analytic gradient
of one loss against central finite differences. The embedding losses must
match to 1e-5 relative error, the reward cross-entropy to 1e-4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PreferenceLabel, PreferenceTriple
from .embedding import (
    DistanceMetric,
    EmbeddingModel,
    LossBatches,
    LossWeights,
    gradient_check,
    loss_amb,
    loss_norm,
    loss_quad,
    loss_recon,
    total_loss,
)
from .reward import RewardNet, ce_loss
from .synth import scalar_value_segments


@dataclass
class SuiteResult:
    name: str
    max_rel_error: float
    passed: bool


def _tiny_segments(n: int, state_dim: int, action_dim: int, h: int, rng) -> list:
    from .core import Segment

    return [
        Segment(
            id=f"g{i}",
            states=rng.standard_normal((h, state_dim)),
            actions=rng.standard_normal((h, action_dim)),
            true_return=float(rng.standard_normal()),
            source_episode=i,
        )
        for i in range(n)
    ]


def _random_triples(segments, rng, labels=None) -> list[PreferenceTriple]:
    triples = []
    options = labels or [
        PreferenceLabel.PREFER_FIRST,
        PreferenceLabel.PREFER_SECOND,
        PreferenceLabel.NO_COMP,
    ]
    idx = np.arange(len(segments))
    for _ in range(max(2, len(segments) // 2)):
        i, j = rng.choice(idx, size=2, replace=False)
        triples.append(
            PreferenceTriple(
                segments[int(i)], segments[int(j)], options[int(rng.integers(len(options)))]
            )
        )
    return triples


def check_amb(seed: int, metric: DistanceMetric) -> float:
    rng = np.random.default_rng(seed)
    segments = scalar_value_segments(rng.uniform(size=6))
    model = EmbeddingModel.new_table(segments, dim=3, seed=seed)
    triples = _random_triples(segments, rng)
    report = gradient_check(lambda m: loss_amb(m, triples, metric), model)
    return report.max_rel_error


def check_quad(seed: int, metric: DistanceMetric) -> float:
    rng = np.random.default_rng(seed)
    segments = scalar_value_segments(rng.uniform(size=6))
    model = EmbeddingModel.new_table(segments, dim=3, seed=seed)
    clear = [PreferenceLabel.PREFER_FIRST, PreferenceLabel.PREFER_SECOND]
    triples = _random_triples(segments, rng, labels=clear)
    pairs = [(triples[i], triples[j]) for i in range(len(triples)) for j in range(i + 1, len(triples))]
    report = gradient_check(lambda m: loss_quad(m, pairs, metric), model)
    return report.max_rel_error


def check_norm(seed: int) -> float:
    rng = np.random.default_rng(seed)
    segments = scalar_value_segments(rng.uniform(size=6))
    model = EmbeddingModel.new_table(segments, dim=3, seed=seed)
    # scale some rows outside the unit ball so both branches are exercised
    model.table *= rng.uniform(0.3, 2.0, size=(len(segments), 1))
    report = gradient_check(lambda m: loss_norm(m, segments), model)
    return report.max_rel_error


def check_recon(seed: int) -> float:
    rng = np.random.default_rng(seed)
    segments = _tiny_segments(4, state_dim=2, action_dim=2, h=3, rng=rng)
    model = EmbeddingModel.new_encoder(2, 2, dim=3, hidden=4, seed=seed)
    transitions = [(s, s.states[0], s.actions[0]) for s in segments]
    report = gradient_check(lambda m: loss_recon(m, transitions), model)
    return report.max_rel_error


def check_total(seed: int, metric: DistanceMetric) -> float:
    rng = np.random.default_rng(seed)
    segments = _tiny_segments(6, state_dim=2, action_dim=2, h=3, rng=rng)
    model = EmbeddingModel.new_encoder(2, 2, dim=3, hidden=4, seed=seed)
    triples = _random_triples(segments, rng)
    clear = [t for t in triples if t.is_clear]
    while len(clear) < 2:
        triples = _random_triples(segments, rng)
        clear = [t for t in triples if t.is_clear]
    pairs = [(clear[0], clear[1])]
    batches = LossBatches(
        triples=triples,
        quad_pairs=pairs,
        segments=segments,
        transitions=[(s, s.states[0], s.actions[0]) for s in segments],
    )
    weights = LossWeights(0.1, 1.0, 0.1)
    report = gradient_check(lambda m: total_loss(m, batches, weights, metric), model)
    return report.max_rel_error


def check_ce(seed: int) -> float:
    rng = np.random.default_rng(seed)
    segments = _tiny_segments(4, state_dim=2, action_dim=2, h=3, rng=rng)
    net = RewardNet(2, 2, hidden=2, n_hidden=1, seed=seed)
    labels = [PreferenceLabel.PREFER_FIRST, PreferenceLabel.PREFER_SECOND]
    triples = _random_triples(segments, rng, labels=labels)
    report = gradient_check(lambda m: ce_loss(m, triples), net, tolerance=1e-4)
    return report.max_rel_error


EMBED_TOL = 1e-5
REWARD_TOL = 1e-4


def run_all(n_fixtures: int = 10, seed: int = 0) -> list[SuiteResult]:
    """Run every gradient suite; one result row per (loss, metric)."""
    suites = [
        ("amb/l2", lambda k: check_amb(k, DistanceMetric.L2), EMBED_TOL),
        ("amb/squared_l2", lambda k: check_amb(k, DistanceMetric.SQUARED_L2), EMBED_TOL),
        ("quad/l2", lambda k: check_quad(k, DistanceMetric.L2), EMBED_TOL),
        ("quad/squared_l2", lambda k: check_quad(k, DistanceMetric.SQUARED_L2), EMBED_TOL),
        ("norm", check_norm, EMBED_TOL),
        ("recon", check_recon, EMBED_TOL),
        ("total/l2", lambda k: check_total(k, DistanceMetric.L2), EMBED_TOL),
        ("preference-ce", check_ce, REWARD_TOL),
    ]
    results = []
    for name, fn, tol in suites:
        worst = max(fn(seed * 1000 + k) for k in range(n_fixtures))
        results.append(SuiteResult(name, worst, worst <= tol))
    return results
