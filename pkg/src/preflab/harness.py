"""Experiment orchestration: config, the query-round loop, and artifacts.

One experiment = one environment, one offline dataset, one segment pool,
and a feedback budget spent in query batches. Every round selects a batch,
labels it, retrains the embedding (warm start) and the reward ensemble,
and logs one JSON line to ``metrics.jsonl``. All randomness derives from
(seed, round, purpose) so a crashed run resumes bit-identically from its
last checkpoint.
"""

from __future__ import annotations

import configparser
import io
import json
import logging
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import selection as sel
from .core import (
    OfflineDataset,
    PreferenceDataset,
    PreferenceLabel,
    PreferenceTriple,
    Segment,
    load_preferences,
    save_dataset,
    save_preferences,
    segment_id,
)
from .embedding import (
    DistanceMetric,
    EmbeddingMode,
    EmbeddingModel,
    LossWeights,
    export_embeddings,
    load_model,
    save_model,
    train_embedding,
)
from .envs import GridNavEnv, PointMassEnv, QualityMix, generate_offline_dataset
from .reward import RewardEnsemble, evaluate_reward, relabel_dataset, train_reward
from .teacher import HumanTeacher, TeacherConfig, perfect_label, scripted_label

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
CHECKPOINT_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; round-trips losslessly through INI text."""

    # experiment
    seeds: tuple[int, ...] = (0,)
    teacher: str = "scripted"  # scripted | perfect | human
    selection: str = "embedding"  # embedding | random
    n_total: int = 500
    m: int = 50
    epsilon: float = 0.5
    count_skips_toward_budget: bool = True
    pool_size: int = 1000
    n_segments: int = 256
    n_eval_queries: int = 500
    n_eval_segments: int = 500
    human_timeout_s: float = 600.0
    # env
    env_kind: str = "gridnav"  # gridnav | pointmass
    grid_size: int = 6
    grid_goal: tuple[int, int] = (5, 5)
    step_reward: float = 0.0
    goal_reward: float = 1.0
    gamma: float = 0.99
    max_episode_len: int = 60
    pm_bounds: float = 1.0
    pm_goal: tuple[float, float] = (0.7, 0.7)
    pm_goal_radius: float = 0.1
    pm_max_speed: float = 0.1
    n_episodes: int = 200
    mix: tuple[tuple[float, float], ...] = ((0.0, 0.34), (0.3, 0.33), (1.0, 0.33))
    h: int = 50
    # embedding
    embedding_mode: str = "encoder"  # encoder | table
    d: int = 16
    metric: str = "l2"  # l2 | squared_l2
    lambda_amb: float = 0.1
    lambda_quad: float = 1.0
    lambda_norm: float = 0.1
    n_init: int = 20000
    n_emb: int = 2000
    embed_lr: float = 0.0  # 0 resolves to the mode default (table 0.1, encoder 3e-4)
    quad_batch: int = 64
    recon_batch: int = 64
    # reward
    n_reward: int = 50
    reward_lr: float = 3e-4
    reward_batch: int = 128
    ensemble_size: int = 3
    reward_optimizer: str = "adam"
    reward_hidden: int = 256
    # selection
    n_bin: int = 32
    eps_d: float = 1e-6

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.teacher not in ("scripted", "perfect", "human"):
            raise ConfigError(f"unknown teacher mode {self.teacher!r}")
        if self.selection not in ("embedding", "random"):
            raise ConfigError(f"unknown selection mode {self.selection!r}")
        if self.env_kind not in ("gridnav", "pointmass"):
            raise ConfigError(f"unknown environment {self.env_kind!r}")
        if self.embedding_mode not in ("encoder", "table"):
            raise ConfigError(f"unknown embedding mode {self.embedding_mode!r}")
        if self.metric not in ("l2", "squared_l2"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.m > self.n_total:
            raise ConfigError(f"query batch m={self.m} exceeds n_total={self.n_total}")
        positive = (
            "n_total", "m", "pool_size", "n_segments", "n_eval_queries",
            "n_eval_segments", "n_episodes", "h", "d", "n_reward", "reward_batch",
            "ensemble_size", "n_bin", "max_episode_len",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.teacher == "scripted" and not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1) for the scripted teacher")
        if self.h > self.max_episode_len:
            raise ConfigError("segment length h cannot exceed max_episode_len")
        try:
            QualityMix(self.mix)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- derived objects -------------------------------------------------------

    def build_env(self):
        if self.env_kind == "gridnav":
            return GridNavEnv(
                size=self.grid_size,
                goal=self.grid_goal,
                step_reward=self.step_reward,
                goal_reward=self.goal_reward,
                gamma=self.gamma,
                max_episode_len=self.max_episode_len,
            )
        return PointMassEnv(
            bounds=self.pm_bounds,
            goal=self.pm_goal,
            goal_radius=self.pm_goal_radius,
            max_speed=self.pm_max_speed,
            max_episode_len=self.max_episode_len,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_amb, self.lambda_quad, self.lambda_norm)

    def metric_enum(self) -> DistanceMetric:
        return DistanceMetric(self.metric)

    def resolved_embed_lr(self) -> float:
        if self.embed_lr > 0.0:
            return self.embed_lr
        return 0.1 if self.embedding_mode == "table" else 3e-4

    # -- INI round-trip ----------------------------------------------------------

    _SECTIONS = {
        "experiment": (
            "seeds", "teacher", "selection", "n_total", "m", "epsilon",
            "count_skips_toward_budget", "pool_size", "n_segments",
            "n_eval_queries", "n_eval_segments", "human_timeout_s",
        ),
        "env": (
            "env_kind", "grid_size", "grid_goal", "step_reward", "goal_reward",
            "gamma", "max_episode_len", "pm_bounds", "pm_goal", "pm_goal_radius",
            "pm_max_speed", "n_episodes", "mix", "h",
        ),
        "embedding": (
            "embedding_mode", "d", "metric", "lambda_amb", "lambda_quad",
            "lambda_norm", "n_init", "n_emb", "embed_lr", "quad_batch",
            "recon_batch",
        ),
        "reward": (
            "n_reward", "reward_lr", "reward_batch", "ensemble_size",
            "reward_optimizer", "reward_hidden",
        ),
        "selection": ("n_bin", "eps_d"),
    }

    @staticmethod
    def _encode(value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        if isinstance(value, tuple):
            if value and isinstance(value[0], tuple):
                return " ".join(f"{a!r}:{b!r}" for a, b in value)
            return " ".join(repr(v) for v in value)
        return str(value)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser["meta"] = {"schema_version": str(CONFIG_SCHEMA_VERSION)}
        for section, names in self._SECTIONS.items():
            parser[section] = {name: self._encode(getattr(self, name)) for name in names}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        if "meta" not in parser or int(parser["meta"].get("schema_version", "-1")) != CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"config must declare [meta] schema_version = {CONFIG_SCHEMA_VERSION}"
            )
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for section, names in cls._SECTIONS.items():
            if section not in parser:
                continue
            for key, raw in parser[section].items():
                if key not in names:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                kwargs[key] = cls._decode(key, raw, types[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def _decode(key: str, raw: str, type_hint: str):
        raw = raw.strip()
        if key == "seeds":
            return tuple(int(tok) for tok in raw.split())
        if key == "grid_goal":
            a, b = raw.split()
            return (int(a), int(b))
        if key == "pm_goal":
            a, b = raw.split()
            return (float(a), float(b))
        if key == "mix":
            return tuple(
                (float(tok.split(":")[0]), float(tok.split(":")[1])) for tok in raw.split()
            )
        if key == "count_skips_toward_budget":
            if raw.lower() not in ("true", "false"):
                raise ConfigError(f"{key} must be true or false, got {raw!r}")
            return raw.lower() == "true"
        if "int" in type_hint:
            return int(raw)
        if "float" in type_hint:
            return float(raw)
        return raw

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini())

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_ini(Path(path).read_text())


def subseed(seed: int, *tags) -> int:
    """Stable stream seed derived from the run seed and string/int tags."""
    entropy = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode()))
        else:
            entropy.append(int(tag) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def sample_unique_segments(
    dataset: OfflineDataset, H: int, count: int, seed: int
) -> list[Segment]:
    """Distinct windows drawn without replacement (the segment pool)."""
    windows = []
    for ep_idx, ep in enumerate(dataset.episodes):
        for start in range(len(ep) - H + 1):
            windows.append((ep_idx, start))
    if not windows:
        raise ValueError("no eligible episodes")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(windows), size=min(count, len(windows)), replace=False)
    out = []
    for w in sorted(int(i) for i in picks):
        ep_idx, start = windows[w]
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


def save_segments_npz(segments: Sequence[Segment], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        schema_version=CHECKPOINT_SCHEMA_VERSION,
        ids=np.array([s.id for s in segments]),
        states=np.stack([s.states for s in segments]),
        actions=np.stack([s.actions for s in segments]),
        returns=np.array([s.true_return for s in segments]),
        episodes=np.array([s.source_episode for s in segments]),
    )


def load_segments_npz(path: str | Path) -> list[Segment]:
    with np.load(path, allow_pickle=False) as data:
        return [
            Segment(
                id=str(data["ids"][i]),
                states=data["states"][i],
                actions=data["actions"][i],
                true_return=float(data["returns"][i]),
                source_episode=int(data["episodes"][i]),
            )
            for i in range(len(data["ids"]))
        ]


@dataclass
class RoundLog:
    round: int
    queries_issued: int
    labels_first: int
    labels_second: int
    labels_skip: int
    clarity_ratio: float
    clarity_ratio_cum: float
    budget_spent: int
    selection_mode: str
    embed_loss: float | None
    reward_loss: float | None
    density_file: str | None
    embedding_file: str | None
    metrics: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class RunContext:
    """Deterministic run state derived from (config, seed)."""

    config: ExperimentConfig
    seed: int
    env: object
    dataset: OfflineDataset
    pool: list[Segment]
    pool_by_id: dict[str, Segment]
    heldout_queries: list[tuple[Segment, Segment]]
    heldout_segments: list[Segment]
    teacher_cfg: TeacherConfig | None


def prepare_run(config: ExperimentConfig, seed: int) -> RunContext:
    env = config.build_env()
    dataset = generate_offline_dataset(
        env, QualityMix(config.mix), config.n_episodes, subseed(seed, "dataset")
    )
    pool = sample_unique_segments(dataset, config.h, config.n_segments, subseed(seed, "pool"))
    if len(pool) < 2:
        raise ConfigError("segment pool is too small; add episodes or shrink h")
    heldout_segments = sample_unique_segments(
        dataset, config.h, config.n_eval_segments, subseed(seed, "eval-segments")
    )
    rng = np.random.default_rng(subseed(seed, "eval-queries"))
    all_seg = sample_unique_segments(
        dataset, config.h, len(pool) * 4, subseed(seed, "eval-pairs")
    )
    heldout_queries = []
    for _ in range(config.n_eval_queries):
        i = int(rng.integers(len(all_seg)))
        j = int(rng.integers(len(all_seg) - 1))
        if j >= i:
            j += 1
        heldout_queries.append((all_seg[i], all_seg[j]))
    # evaluation always scores clarity with the scripted rule
    epsilon = config.epsilon if 0.0 < config.epsilon < 1.0 else 0.5
    teacher_cfg = TeacherConfig(epsilon=epsilon, H=config.h, r_avg=dataset.r_avg)
    return RunContext(
        config=config,
        seed=seed,
        env=env,
        dataset=dataset,
        pool=pool,
        pool_by_id={s.id: s for s in pool},
        heldout_queries=heldout_queries,
        heldout_segments=heldout_segments,
        teacher_cfg=teacher_cfg,
    )


def label_queries(
    ctx: RunContext,
    queries: Sequence[tuple[Segment, Segment]],
    round_index: int,
    human: HumanTeacher | None = None,
) -> list[PreferenceTriple]:
    cfg = ctx.config
    if cfg.teacher == "human":
        if human is None:
            raise RuntimeError("human teacher mode needs a labeling session")
        human.submit_round(list(queries), round_index)
        return human.wait_for_round(timeout=cfg.human_timeout_s)
    triples = []
    for seg0, seg1 in queries:
        if cfg.teacher == "perfect":
            label = perfect_label(seg0, seg1)
        else:
            label = scripted_label(seg0, seg1, ctx.teacher_cfg)
        triples.append(PreferenceTriple(seg0, seg1, label, round_index))
    return triples


def _checkpoint_dir(out_dir: Path, round_index: int) -> Path:
    return out_dir / "checkpoints" / f"round_{round_index}"


def _save_checkpoint(
    out_dir: Path,
    round_index: int,
    spent: int,
    preferences: PreferenceDataset,
    model: EmbeddingModel | None,
    ensemble: RewardEnsemble,
    metrics_lines: list[str],
) -> None:
    ckpt = _checkpoint_dir(out_dir, round_index)
    ckpt.mkdir(parents=True, exist_ok=True)
    save_preferences(preferences, ckpt / "preferences.ndjson")
    if model is not None:
        save_model(model, ckpt / "embedding.npz")
    ensemble.save(ckpt / "ensemble.npz")
    state = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "round": round_index,
        "spent": spent,
        "metrics_lines": metrics_lines,
    }
    (ckpt / "state.json").write_text(json.dumps(state, sort_keys=True))


def _latest_checkpoint(out_dir: Path) -> int | None:
    root = out_dir / "checkpoints"
    if not root.exists():
        return None
    rounds = []
    for child in root.iterdir():
        if child.name.startswith("round_") and (child / "state.json").exists():
            rounds.append(int(child.name.split("_")[1]))
    return max(rounds) if rounds else None


def run_experiment(
    config: ExperimentConfig,
    seed: int | None = None,
    out_dir: str | Path = "artifacts",
    resume: bool = False,
    human: HumanTeacher | None = None,
    max_rounds: int = 1000,
) -> dict:
    """Run the full query-selection / reward-learning loop.

    Writes per-round logs to ``out_dir/metrics.jsonl``, density and
    embedding snapshots per round, checkpoints sufficient for resumption,
    and ``final_metrics.json``. Returns the final metrics dict.
    """
    seed = config.seeds[0] if seed is None else seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.copy").write_text(config.to_ini())

    ctx = prepare_run(config, seed)
    save_segments_npz(ctx.pool, out_dir / "pool.npz")
    save_dataset(ctx.dataset, out_dir / "dataset.ndjson")
    if human is not None:
        human.set_budget(config.n_total)

    metric = config.metric_enum()
    weights = config.loss_weights()
    embedding_enabled = config.selection == "embedding"

    model: EmbeddingModel | None = None
    if embedding_enabled:
        if config.embedding_mode == "table":
            model = EmbeddingModel.new_table(ctx.pool, dim=config.d, seed=subseed(seed, "emb-init"))
        else:
            model = EmbeddingModel.new_encoder(
                ctx.env.state_dim, ctx.env.action_dim, dim=config.d,
                seed=subseed(seed, "emb-init"),
            )
    ensemble = RewardEnsemble.create(
        ctx.env.state_dim,
        ctx.env.action_dim,
        size=config.ensemble_size,
        hidden=config.reward_hidden,
        seed=subseed(seed, "reward-init"),
    )

    preferences = PreferenceDataset()
    spent = 0
    start_round = 0
    metrics_lines: list[str] = []

    if resume:
        last = _latest_checkpoint(out_dir)
        if last is not None:
            ckpt = _checkpoint_dir(out_dir, last)
            state = json.loads((ckpt / "state.json").read_text())
            preferences = load_preferences(ckpt / "preferences.ndjson", ctx.pool_by_id)
            if embedding_enabled:
                model = load_model(ckpt / "embedding.npz")
            ensemble = RewardEnsemble.load(ckpt / "ensemble.npz")
            spent = int(state["spent"])
            start_round = last + 1
            metrics_lines = list(state["metrics_lines"])
            logger.info("resuming at round %d with %d labels spent", start_round, spent)

    round_index = start_round
    while spent < config.n_total and round_index < max_rounds:
        remaining = config.n_total - spent
        m_r = min(config.m, remaining) if config.count_skips_toward_budget else config.m
        density = None
        mode = "random"
        if round_index == 0 or not embedding_enabled:
            queries = sel.select_random_queries(
                ctx.pool, preferences, m_r, subseed(seed, "select", round_index)
            )
        else:
            if preferences.clear and preferences.ambiguous:
                result = sel.select_queries(
                    ctx.pool,
                    preferences,
                    model,
                    ensemble,
                    M=m_r,
                    pool_size=config.pool_size,
                    seed=subseed(seed, "select", round_index),
                    n_bin=config.n_bin,
                    metric=metric,
                    eps_d=config.eps_d,
                )
                queries = result.queries
                density = result.density
                mode = "embedding"
            else:
                logger.warning(
                    "round %d: not enough labeled data for density estimation; "
                    "falling back to uniform-random selection",
                    round_index,
                )
                queries = sel.select_random_queries(
                    ctx.pool, preferences, m_r, subseed(seed, "select", round_index)
                )

        triples = label_queries(ctx, queries, round_index, human)
        preferences = preferences.extended(triples)
        n_first = sum(1 for t in triples if t.label is PreferenceLabel.PREFER_FIRST)
        n_second = sum(1 for t in triples if t.label is PreferenceLabel.PREFER_SECOND)
        n_skip = len(triples) - n_first - n_second
        spent += len(triples) if config.count_skips_toward_budget else (n_first + n_second)

        embed_loss = None
        if embedding_enabled:
            steps = config.n_init if round_index == 0 else config.n_emb
            trace = train_embedding(
                model,
                ctx.pool,
                preferences,
                steps=steps,
                lr=config.resolved_embed_lr(),
                weights=weights,
                metric=metric,
                seed=subseed(seed, "emb", round_index),
                quad_batch=config.quad_batch,
                recon_batch=config.recon_batch,
            )
            embed_loss = trace[-1].total if trace else None

        reward_loss = None
        if preferences.clear:
            traces = train_reward(
                ensemble,
                preferences,
                updates=config.n_reward,
                lr=config.reward_lr,
                batch_size=config.reward_batch,
                seed=subseed(seed, "reward", round_index),
                optimizer=config.reward_optimizer,
            )
            reward_loss = float(np.mean([t.losses[-1] for t in traces]))
        else:
            logger.warning("round %d: no clear labels yet; reward training skipped", round_index)

        metrics = evaluate_reward(
            ensemble,
            ctx.env,
            ctx.teacher_cfg,
            ctx.heldout_queries,
            ctx.heldout_segments,
            round_index=round_index,
        )

        density_file = None
        if density is not None:
            density_file = f"densities/round_{round_index}.csv"
            sel.dump_density_csv(density, out_dir / density_file)
        embedding_file = None
        if embedding_enabled:
            embedding_file = f"embeddings/round_{round_index}.csv"
            export_embeddings(model, ctx.pool, out_dir / embedding_file)

        clear_so_far = sum(1 for t in preferences.triples if t.is_clear)
        log = RoundLog(
            round=round_index,
            queries_issued=len(triples),
            labels_first=n_first,
            labels_second=n_second,
            labels_skip=n_skip,
            clarity_ratio=(n_first + n_second) / len(triples),
            clarity_ratio_cum=clear_so_far / len(preferences),
            budget_spent=spent,
            selection_mode=mode,
            embed_loss=embed_loss,
            reward_loss=reward_loss,
            density_file=density_file,
            embedding_file=embedding_file,
            metrics=metrics,
        )
        metrics_lines.append(log.to_json())
        (out_dir / "metrics.jsonl").write_text("\n".join(metrics_lines) + "\n")
        _save_checkpoint(out_dir, round_index, spent, preferences, model, ensemble, metrics_lines)
        round_index += 1

    relabeled = relabel_dataset(ensemble, ctx.dataset)
    last_metrics = json.loads(metrics_lines[-1])["metrics"] if metrics_lines else {}
    n_clear = sum(1 for t in preferences.triples if t.is_clear)
    final = {
        "seed": seed,
        "rounds": round_index,
        "total_labels": len(preferences),
        "labels_clear": n_clear,
        "labels_skip": len(preferences) - n_clear,
        "clarity_ratio": n_clear / len(preferences) if len(preferences) else None,
        "heldout_clarity_ratio": last_metrics.get("clarity_ratio"),
        "pref_accuracy": last_metrics.get("pref_accuracy"),
        "spearman": last_metrics.get("spearman"),
        "normalized_return": last_metrics.get("normalized_return"),
        "relabel_min": relabeled.raw_min,
        "relabel_max": relabeled.raw_max,
    }
    (out_dir / "final_metrics.json").write_text(json.dumps(final, sort_keys=True, indent=2))
    return final
