"""Query selection over the learned embedding space.

Distances of already-labeled pairs are histogrammed separately for clear
and skipped queries; the two histograms combine into an acceptance density
that favors distances where clear pairs outnumber ambiguous ones. Fresh
candidate pairs are then rejection-sampled against that density and the
survivors are ranked by reward-ensemble disagreement.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import PreferenceDataset, Segment
from .embedding import DistanceMetric, EmbeddingModel, pair_distances

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceHistogram:
    """Equal-width histogram over [0, max observed distance]."""

    edges: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if len(edges) != len(mass) + 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with n_bin+1 entries")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError("mass must be non-negative and sum to 1")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mass", mass)

    @property
    def n_bin(self) -> int:
        return len(self.mass)


def bin_of(edges: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """Bin indices; distances beyond the support clamp to the last bin."""
    idx = np.searchsorted(edges, np.atleast_1d(distances), side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def histogram_of(edges: np.ndarray, distances: np.ndarray) -> DistanceHistogram:
    """Normalized histogram of observed distances over fixed edges."""
    counts = np.bincount(bin_of(edges, distances), minlength=len(edges) - 1).astype(float)
    return DistanceHistogram(edges, counts / counts.sum())


@dataclass(frozen=True)
class DensityModel:
    """Per-bin masses for clear/ambiguous pairs and the acceptance density.

    rho1 keeps only the surplus of clear over ambiguous mass, rho2 is the
    floored mass ratio, rho their even mixture.
    """

    edges: np.ndarray
    rho_clr: np.ndarray
    rho_amb: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    rho: np.ndarray
    eps_d: float = 1e-6

    def __post_init__(self):
        for name in ("rho_clr", "rho_amb", "rho1", "rho2", "rho"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a density (non-negative, sums to 1)")
            object.__setattr__(self, name, vec)
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        if not np.allclose(self.rho, 0.5 * (self.rho1 + self.rho2), atol=0, rtol=0):
            raise ValueError("rho must equal 0.5 * (rho1 + rho2) exactly")

    @property
    def n_bin(self) -> int:
        return len(self.rho)

    def rho_at(self, distances: np.ndarray) -> np.ndarray:
        return self.rho[bin_of(self.edges, distances)]


def density_from_masses(
    edges: np.ndarray, rho_clr: np.ndarray, rho_amb: np.ndarray, eps_d: float = 1e-6
) -> DensityModel:
    rho_clr = np.asarray(rho_clr, dtype=float)
    rho_amb = np.asarray(rho_amb, dtype=float)
    n_bin = len(rho_clr)
    surplus = np.maximum(0.0, rho_clr - rho_amb)
    total = surplus.sum()
    if total > 0.0:
        rho1 = surplus / total
    else:
        # no bin where clear mass exceeds ambiguous mass: least-informative fallback
        rho1 = np.full(n_bin, 1.0 / n_bin)
    ratio = (rho_clr + eps_d) / (rho_amb + eps_d)
    rho2 = ratio / ratio.sum()
    rho = 0.5 * (rho1 + rho2)
    return DensityModel(edges, rho_clr, rho_amb, rho1, rho2, rho, eps_d)


def pair_distance(
    model: EmbeddingModel,
    seg0: Segment,
    seg1: Segment,
    metric: DistanceMetric = DistanceMetric.L2,
) -> float:
    z, _ = model.encode_segments([seg0, seg1])
    return float(pair_distances(z[0:1], z[1:2], metric)[0])


def estimate_densities(
    preferences: PreferenceDataset,
    model: EmbeddingModel,
    n_bin: int = 32,
    metric: DistanceMetric = DistanceMetric.L2,
    eps_d: float = 1e-6,
) -> DensityModel:
    """Histogram labeled-pair distances, split clear vs skipped."""
    clear = preferences.clear
    amb = preferences.ambiguous
    if not clear or not amb:
        raise ValueError("insufficient labeled data for density estimation")

    def distances(triples) -> np.ndarray:
        z0, _ = model.encode_segments([t.seg0 for t in triples])
        z1, _ = model.encode_segments([t.seg1 for t in triples])
        return pair_distances(z0, z1, metric)

    d_clr = distances(clear)
    d_amb = distances(amb)
    top = float(max(d_clr.max(), d_amb.max()))
    if top <= 0.0:
        raise ValueError("degenerate distance support: all labeled pairs coincide")
    edges = np.linspace(0.0, top, n_bin + 1)
    clr_hist = histogram_of(edges, d_clr)
    amb_hist = histogram_of(edges, d_amb)
    return density_from_masses(edges, clr_hist.mass, amb_hist.mass, eps_d)


@dataclass(frozen=True)
class CandidateQuery:
    seg0: Segment
    seg1: Segment
    d_emb: float


def accept_candidates(
    candidates: Sequence[CandidateQuery],
    density: DensityModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Envelope rejection step: accept with probability rho(bin)/max(rho)."""
    dists = np.array([c.d_emb for c in candidates])
    probs = density.rho_at(dists) / density.rho.max()
    return rng.random(len(candidates)) < probs


def rejection_sample(
    candidates: Sequence[CandidateQuery],
    density: DensityModel,
    M: int,
    seed: int,
) -> list[CandidateQuery]:
    """Draw up to M queries whose distance distribution follows p * rho.

    If fewer than M candidates survive the acceptance step, the shortfall
    is topped up with the highest-rho-bin rejected candidates.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not candidates:
        raise ValueError("candidate pool is empty")
    rng = np.random.default_rng(seed)
    accepted_mask = accept_candidates(candidates, density, rng)
    accepted = [c for c, ok in zip(candidates, accepted_mask) if ok]
    if len(accepted) >= M:
        picks = rng.choice(len(accepted), size=M, replace=False)
        return [accepted[int(i)] for i in sorted(picks)]
    rest = [c for c, ok in zip(candidates, accepted_mask) if not ok]
    shortfall = min(M - len(accepted), len(rest))
    if shortfall > 0:
        logger.warning(
            "rejection sampling accepted %d < M=%d candidates; topping up %d "
            "from the highest-density bins",
            len(accepted),
            M,
            shortfall,
        )
        rho_vals = density.rho_at(np.array([c.d_emb for c in rest]))
        order = np.argsort(-rho_vals, kind="stable")
        accepted.extend(rest[int(i)] for i in order[:shortfall])
    return accepted


def disagreement_score(ensemble, seg0: Segment, seg1: Segment) -> float:
    """Std across ensemble members of the preference probability."""
    from .reward import bt_probability

    if len(ensemble.members) < 2:
        raise ValueError("disagreement needs an ensemble of size >= 2")
    probs = np.array([bt_probability(m, seg0, seg1) for m in ensemble.members])
    return float(probs.std())


@dataclass
class SelectionResult:
    queries: list[tuple[Segment, Segment]]
    density: DensityModel | None
    n_candidates: int
    n_accepted: int


def sample_fresh_pairs(
    segments: Sequence[Segment],
    preferences: PreferenceDataset,
    pool_size: int,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Uniform unordered pairs of distinct pool segments, minus labeled ones."""
    labeled = preferences.labeled_pairs()
    n = len(segments)
    fresh = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if frozenset((segments[i].id, segments[j].id)) not in labeled
    ]
    if not fresh:
        raise ValueError("no fresh candidates")
    if len(fresh) <= pool_size:
        return fresh
    picks = rng.choice(len(fresh), size=pool_size, replace=False)
    return [fresh[int(i)] for i in sorted(picks)]


def select_queries(
    segments: Sequence[Segment],
    preferences: PreferenceDataset,
    model: EmbeddingModel,
    ensemble,
    M: int,
    pool_size: int,
    seed: int,
    n_bin: int = 32,
    metric: DistanceMetric = DistanceMetric.L2,
    eps_d: float = 1e-6,
) -> SelectionResult:
    """Full selection pipeline: uniform candidate pool -> rejection sampling
    down to 4M -> disagreement ranking -> top M."""
    segments = list(segments)
    rng = np.random.default_rng(seed)
    pairs = sample_fresh_pairs(segments, preferences, pool_size, rng)

    z, _ = model.encode_segments(segments)
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    dists = pair_distances(z[a], z[b], metric)
    candidates = [
        CandidateQuery(segments[i], segments[j], float(d))
        for (i, j), d in zip(pairs, dists)
    ]

    density = estimate_densities(preferences, model, n_bin=n_bin, metric=metric, eps_d=eps_d)
    intermediate = rejection_sample(
        candidates, density, M=min(4 * M, len(candidates)), seed=int(rng.integers(2**32))
    )
    n_accepted = len(intermediate)

    scores = np.array([disagreement_score(ensemble, c.seg0, c.seg1) for c in intermediate])
    order = np.argsort(-scores, kind="stable")[:M]
    queries = [(intermediate[int(i)].seg0, intermediate[int(i)].seg1) for i in order]
    return SelectionResult(queries, density, len(candidates), n_accepted)


def select_random_queries(
    segments: Sequence[Segment],
    preferences: PreferenceDataset,
    M: int,
    seed: int,
) -> list[tuple[Segment, Segment]]:
    """Uniform-random fresh pairs; the baseline selector and round 0."""
    rng = np.random.default_rng(seed)
    pairs = sample_fresh_pairs(segments, preferences, M, rng)
    if len(pairs) > M:
        picks = rng.choice(len(pairs), size=M, replace=False)
        pairs = [pairs[int(i)] for i in sorted(picks)]
    return [(segments[i], segments[j]) for i, j in pairs]


def dump_density_csv(density: DensityModel, path: str | Path) -> None:
    """Diagnostic CSV: one row per bin with every density column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "rho_clr", "rho_amb", "rho1", "rho2", "rho"])
        for k in range(density.n_bin):
            writer.writerow(
                [
                    repr(float(density.edges[k])),
                    repr(float(density.edges[k + 1])),
                    repr(float(density.rho_clr[k])),
                    repr(float(density.rho_amb[k])),
                    repr(float(density.rho1[k])),
                    repr(float(density.rho2[k])),
                    repr(float(density.rho[k])),
                ]
            )
