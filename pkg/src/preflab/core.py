"""Domain types and dataset plumbing shared by every other module.

A Segment is a fixed-length window of (state, action) pairs cut out of an
offline episode; its hidden ground-truth return is carried along so scripted
teachers and evaluation code can see it while learners cannot. Preference
triples tie two segments to a label in {first, second, skip}.

Datasets are immutable after construction and safe to share across threads;
the experiment harness is the only writer and appends labels by building
extended copies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1


class PreferenceLabel(Enum):
    """Teacher verdict for a query. The wire values double as file format."""

    PREFER_FIRST = "first"
    PREFER_SECOND = "second"
    NO_COMP = "skip"


@dataclass(frozen=True, eq=False)
class Segment:
    """A length-H window of an episode, the unit of comparison.

    ``states`` is (H, state_dim) and ``actions`` is (H, action_dim);
    ``true_return`` is the sum of the hidden ground-truth rewards over the
    window and is never exposed to reward learners.
    """

    id: str
    states: np.ndarray
    actions: np.ndarray
    true_return: float
    source_episode: int

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if states.ndim != 2 or actions.ndim != 2:
            raise ValueError("states and actions must be 2-D (H, dim) arrays")
        if len(states) != len(actions) or len(states) < 1:
            raise ValueError("states and actions must share a length H >= 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class PreferenceTriple:
    """Two segment references plus the teacher's label for that query."""

    seg0: Segment
    seg1: Segment
    label: PreferenceLabel
    round: int = 0

    def __post_init__(self):
        if self.seg0.id == self.seg1.id:
            raise ValueError("a query must compare two distinct segments")
        if self.round < 0:
            raise ValueError("round must be >= 0")

    @property
    def is_clear(self) -> bool:
        return self.label is not PreferenceLabel.NO_COMP

    @property
    def preferred(self) -> Segment:
        if self.label is PreferenceLabel.PREFER_FIRST:
            return self.seg0
        if self.label is PreferenceLabel.PREFER_SECOND:
            return self.seg1
        raise ValueError("no preferred segment in a skipped query")

    @property
    def rejected(self) -> Segment:
        if self.label is PreferenceLabel.PREFER_FIRST:
            return self.seg1
        if self.label is PreferenceLabel.PREFER_SECOND:
            return self.seg0
        raise ValueError("no rejected segment in a skipped query")


@dataclass(frozen=True, eq=False)
class Episode:
    """One trajectory of (state, action, hidden ground-truth reward)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        rewards = np.asarray(self.rewards, dtype=float)
        if not (len(states) == len(actions) == len(rewards)):
            raise ValueError("episode arrays must share one length")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)

    def __len__(self) -> int:
        return len(self.rewards)


class OfflineDataset:
    """A reward-free offline dataset; hidden rewards stay inside for oracles.

    ``r_avg`` is the arithmetic mean of every stored ground-truth reward and
    is recomputed from the transitions at construction time.
    """

    def __init__(self, episodes: Sequence[Episode]):
        episodes = list(episodes)
        if not episodes:
            raise ValueError("an offline dataset needs at least one episode")
        self.episodes: list[Episode] = episodes
        self.r_avg: float = float(np.mean(np.concatenate([ep.rewards for ep in episodes])))

    def n_transitions(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        if len(self.episodes) != len(other.episodes) or self.r_avg != other.r_avg:
            return False
        return all(
            np.array_equal(a.states, b.states)
            and np.array_equal(a.actions, b.actions)
            and np.array_equal(a.rewards, b.rewards)
            for a, b in zip(self.episodes, other.episodes)
        )


class PreferenceDataset:
    """The set of labeled queries collected so far.

    Clear triples (label != skip) and ambiguous triples (label == skip)
    partition the set.
    """

    def __init__(self, triples: Iterable[PreferenceTriple] = ()):
        self.triples: tuple[PreferenceTriple, ...] = tuple(triples)

    @property
    def clear(self) -> tuple[PreferenceTriple, ...]:
        return tuple(t for t in self.triples if t.is_clear)

    @property
    def ambiguous(self) -> tuple[PreferenceTriple, ...]:
        return tuple(t for t in self.triples if not t.is_clear)

    def extended(self, extra: Iterable[PreferenceTriple]) -> "PreferenceDataset":
        return PreferenceDataset(self.triples + tuple(extra))

    def labeled_pairs(self) -> set[frozenset[str]]:
        return {frozenset((t.seg0.id, t.seg1.id)) for t in self.triples}

    def __len__(self) -> int:
        return len(self.triples)


def segment_id(episode_index: int, start: int) -> str:
    """Segments are keyed by (episode, start) so equal windows dedupe."""
    return f"e{episode_index}s{start}"


def sample_segments(
    dataset: OfflineDataset, H: int, count: int, seed: int
) -> list[Segment]:
    """Draw ``count`` length-H windows uniformly over (episode, start index).

    Episodes shorter than H are rejected; sampling is with replacement and
    deterministic for a given seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    windows: list[tuple[int, int]] = []
    for ep_idx, ep in enumerate(dataset.episodes):
        for start in range(len(ep) - H + 1):
            windows.append((ep_idx, start))
    if not windows:
        raise ValueError("no eligible episodes")
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(windows), size=count)
    out = []
    for w in picks:
        ep_idx, start = windows[int(w)]
        ep = dataset.episodes[ep_idx]
        out.append(
            Segment(
                id=segment_id(ep_idx, start),
                states=ep.states[start : start + H],
                actions=ep.actions[start : start + H],
                true_return=float(ep.rewards[start : start + H].sum()),
                source_episode=ep_idx,
            )
        )
    return out


def segment_return(
    segment: Segment, reward: Callable[[np.ndarray, np.ndarray], float]
) -> float:
    """Sum of ``reward(s_t, a_t)`` over the window."""
    return float(
        sum(reward(s, a) for s, a in zip(segment.states, segment.actions))
    )


# ---------------------------------------------------------------------------
# Serialization: newline-delimited JSON, one record per episode / per triple.
# ---------------------------------------------------------------------------


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed or fails validation."""


def save_dataset(dataset: OfflineDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for ep in dataset.episodes:
            rec = {
                "schema_version": SCHEMA_VERSION,
                "states": ep.states.tolist(),
                "actions": ep.actions.tolist(),
                "rewards_hidden": ep.rewards.tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path: str | Path) -> OfflineDataset:
    path = Path(path)
    episodes = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(
                    f"{path}: episode record {lineno} is not valid JSON: {exc}"
                ) from exc
            for key in ("schema_version", "states", "actions", "rewards_hidden"):
                if key not in rec:
                    raise DatasetFormatError(
                        f"{path}: episode record {lineno} is missing field {key!r}"
                    )
            if rec["schema_version"] != SCHEMA_VERSION:
                raise DatasetFormatError(
                    f"{path}: episode record {lineno} has unsupported schema_version "
                    f"{rec['schema_version']!r}"
                )
            try:
                episodes.append(
                    Episode(
                        states=np.asarray(rec["states"], dtype=float),
                        actions=np.asarray(rec["actions"], dtype=float),
                        rewards=np.asarray(rec["rewards_hidden"], dtype=float),
                    )
                )
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}: episode record {lineno} is malformed: {exc}"
                ) from exc
    if not episodes:
        raise DatasetFormatError(f"{path}: no episode records found")
    return OfflineDataset(episodes)


_WIRE_LABELS = {label.value for label in PreferenceLabel}


def save_preferences(dataset: PreferenceDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for t in dataset.triples:
            rec = {
                "schema_version": SCHEMA_VERSION,
                "seg0": t.seg0.id,
                "seg1": t.seg1.id,
                "label": t.label.value,
                "round": t.round,
            }
            fh.write(json.dumps(rec) + "\n")


def load_preferences(
    path: str | Path, segments: Mapping[str, Segment]
) -> PreferenceDataset:
    """Rebuild a preference dataset, resolving segment ids via ``segments``."""
    path = Path(path)
    triples = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(
                    f"{path}: preference record {lineno} is not valid JSON: {exc}"
                ) from exc
            for key in ("schema_version", "seg0", "seg1", "label", "round"):
                if key not in rec:
                    raise DatasetFormatError(
                        f"{path}: preference record {lineno} is missing field {key!r}"
                    )
            if rec["label"] not in _WIRE_LABELS:
                raise DatasetFormatError(
                    f"{path}: preference record {lineno} has label {rec['label']!r}, "
                    f"expected one of {sorted(_WIRE_LABELS)}"
                )
            for key in ("seg0", "seg1"):
                if rec[key] not in segments:
                    raise DatasetFormatError(
                        f"{path}: preference record {lineno} references unknown "
                        f"segment {rec[key]!r}"
                    )
            triples.append(
                PreferenceTriple(
                    seg0=segments[rec["seg0"]],
                    seg1=segments[rec["seg1"]],
                    label=PreferenceLabel(rec["label"]),
                    round=int(rec["round"]),
                )
            )
    return PreferenceDataset(triples)
