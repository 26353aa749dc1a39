"""Reward learning from preferences and the tabular policy stand-in.

An ensemble of small feedforward nets is trained with the pairwise
cross-entropy loss; the ensemble mean relabels the offline dataset and a
value-iteration policy closes the loop on the grid environment. All
probability arithmetic runs in log-space so large return gaps cannot
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from .core import (
    OfflineDataset,
    PreferenceDataset,
    PreferenceLabel,
    PreferenceTriple,
    Segment,
)
from .nn import MLP, Adam, make_optimizer

CHECKPOINT_VERSION = 1


class RewardNet:
    """State-action reward net squashed into (-1, 1)."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden: int = 256,
        n_hidden: int = 3,
        seed: int = 0,
    ):
        sizes = [state_dim + action_dim] + [hidden] * n_hidden + [1]
        self.mlp = MLP(
            sizes,
            activation="relu",
            output_activation="tanh",
            rng=np.random.default_rng(seed),
        )

    def reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        x = np.concatenate([np.atleast_2d(states), np.atleast_2d(actions)], axis=1)
        return self.mlp(x)[:, 0]

    def segment_sum(self, segment: Segment) -> float:
        return float(self.reward(segment.states, segment.actions).sum())

    # flat-parameter interface shared with the gradient checker
    def params_vector(self) -> np.ndarray:
        return self.mlp.pack()

    def set_params_vector(self, flat: np.ndarray) -> None:
        self.mlp.unpack(flat)

    def n_params(self) -> int:
        return self.mlp.n_params()


class RewardEnsemble:
    """Independently initialized reward nets; the aggregate is their mean."""

    def __init__(self, members: Sequence[RewardNet]):
        if len(members) < 2:
            raise ValueError("ensemble needs >= 2 members for disagreement use")
        self.members = list(members)
        self.optimizers: list | None = None

    @classmethod
    def create(
        cls,
        state_dim: int,
        action_dim: int,
        size: int = 3,
        hidden: int = 256,
        n_hidden: int = 3,
        seed: int = 0,
    ) -> "RewardEnsemble":
        members = [
            RewardNet(state_dim, action_dim, hidden, n_hidden, seed=seed * 1000 + k)
            for k in range(size)
        ]
        return cls(members)

    def mean_reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.mean([m.reward(states, actions) for m in self.members], axis=0)

    def mean_segment_sum(self, segment: Segment) -> float:
        return float(np.mean([m.segment_sum(segment) for m in self.members]))

    def ensure_optimizers(self, kind: str, lr: float) -> list:
        if self.optimizers is None:
            self.optimizers = [make_optimizer(kind, lr) for _ in self.members]
        return self.optimizers

    # -- checkpointing --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {
            "schema_version": CHECKPOINT_VERSION,
            "n_members": len(self.members),
            "sizes": np.array(self.members[0].mlp.sizes),
        }
        for k, member in enumerate(self.members):
            arrays[f"params_{k}"] = member.params_vector()
            opt = self.optimizers[k] if self.optimizers else None
            if isinstance(opt, Adam) and opt.m is not None:
                arrays[f"adam_m_{k}"] = opt.m
                arrays[f"adam_v_{k}"] = opt.v
                arrays[f"adam_t_{k}"] = opt.t
                arrays[f"adam_lr_{k}"] = opt.lr
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "RewardEnsemble":
        with np.load(path, allow_pickle=False) as data:
            if int(data["schema_version"]) != CHECKPOINT_VERSION:
                raise ValueError("unsupported checkpoint version")
            sizes = [int(s) for s in data["sizes"]]
            members = []
            optimizers = []
            has_adam = False
            for k in range(int(data["n_members"])):
                net = RewardNet(sizes[0] - 1, 1, hidden=sizes[1], n_hidden=len(sizes) - 2)
                net.mlp = MLP(sizes, activation="relu", output_activation="tanh")
                net.set_params_vector(data[f"params_{k}"])
                members.append(net)
                if f"adam_m_{k}" in data:
                    has_adam = True
                    opt = Adam(float(data[f"adam_lr_{k}"]))
                    opt.load_state(
                        {
                            "t": int(data[f"adam_t_{k}"]),
                            "m": data[f"adam_m_{k}"],
                            "v": data[f"adam_v_{k}"],
                        }
                    )
                    optimizers.append(opt)
            ensemble = cls(members)
            if has_adam:
                ensemble.optimizers = optimizers
            return ensemble


def _segment_sum(net_or_ensemble, segment: Segment) -> float:
    if isinstance(net_or_ensemble, RewardEnsemble):
        return net_or_ensemble.mean_segment_sum(segment)
    return net_or_ensemble.segment_sum(segment)


def bt_probability(net_or_ensemble, seg0: Segment, seg1: Segment) -> float:
    """P[seg1 beats seg0] from reward sums, computed in log-space."""
    s0 = _segment_sum(net_or_ensemble, seg0)
    s1 = _segment_sum(net_or_ensemble, seg1)
    return float(expit(s1 - s0))


def ce_loss(
    net: RewardNet, batch: Sequence[PreferenceTriple]
) -> tuple[float, np.ndarray]:
    """Preference cross-entropy over the clear triples of the batch.

    Skipped queries carry no training signal and are filtered out; an
    all-skip batch is an error.
    """
    clear = [t for t in batch if t.is_clear]
    if not clear:
        raise ValueError("no trainable labels (every triple in the batch is skipped)")
    n = len(clear)
    h = len(clear[0].seg0)
    # stack every (s, a) step of both segments into one forward pass
    states = np.concatenate(
        [np.concatenate([t.seg0.states, t.seg1.states]) for t in clear]
    )
    actions = np.concatenate(
        [np.concatenate([t.seg0.actions, t.seg1.actions]) for t in clear]
    )
    x = np.concatenate([states, actions], axis=1)
    out, cache = net.mlp.forward(x)
    per_step = out[:, 0].reshape(n, 2 * h)
    s0 = per_step[:, :h].sum(axis=1)
    s1 = per_step[:, h:].sum(axis=1)
    z = s1 - s0
    p = np.array([1.0 if t.label is PreferenceLabel.PREFER_SECOND else 0.0 for t in clear])
    # -(1-p) log P[s0 > s1] - p log P[s1 > s0] == softplus(z) - p z
    value = float(np.mean(np.logaddexp(0.0, z) - p * z))
    dz = (expit(z) - p) / n
    dout = np.repeat(dz, 2 * h)[:, None] * np.concatenate(
        [np.full((n, h), -1.0), np.full((n, h), 1.0)], axis=1
    ).reshape(-1, 1)
    dws, dbs, _ = net.mlp.backward(cache, dout)
    return value, MLP.pack_grads(dws, dbs)


@dataclass
class RewardTrainTrace:
    member: int
    losses: list[float]


def train_reward(
    ensemble: RewardEnsemble,
    preferences: PreferenceDataset,
    updates: int = 50,
    lr: float = 3e-4,
    batch_size: int = 128,
    seed: int = 0,
    optimizer: str = "adam",
) -> list[RewardTrainTrace]:
    """Train every member on independently shuffled batches of the same data.

    Optimizer state lives on the ensemble, so successive calls continue
    training (warm start across query rounds).
    """
    clear = list(preferences.clear)
    if not clear:
        raise ValueError("no trainable labels (preference dataset has no clear triples)")
    opts = ensemble.ensure_optimizers(optimizer, lr)
    traces = []
    for k, (member, opt) in enumerate(zip(ensemble.members, opts)):
        rng = np.random.default_rng([seed, k])
        order: list[int] = []
        losses = []
        for _ in range(updates):
            if len(order) < batch_size:
                order.extend(rng.permutation(len(clear)).tolist())
            take = min(batch_size, len(clear))
            batch = [clear[i] for i in order[:take]]
            order = order[take:]
            value, grad = ce_loss(member, batch)
            member.set_params_vector(opt.step(member.params_vector(), grad))
            losses.append(value)
        traces.append(RewardTrainTrace(k, losses))
    return traces


@dataclass
class RelabeledRewards:
    """Ensemble-mean rewards min-max normalized over the whole dataset."""

    per_episode: list[np.ndarray]
    raw_min: float
    raw_max: float


def relabel_dataset(ensemble: RewardEnsemble, dataset: OfflineDataset) -> RelabeledRewards:
    raw = [ensemble.mean_reward(ep.states, ep.actions) for ep in dataset.episodes]
    flat = np.concatenate(raw)
    lo, hi = float(flat.min()), float(flat.max())
    if hi > lo:
        norm = [(r - lo) / (hi - lo) for r in raw]
    else:
        norm = [np.full_like(r, 0.5) for r in raw]
    return RelabeledRewards(norm, lo, hi)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.full_like(values, 0.5)


def value_iteration(
    env, reward_table: np.ndarray, gamma: float, tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Exact dynamic programming on a deterministic tabular environment.

    Returns (greedy policy, values, per-sweep Bellman residuals). Ties in
    the greedy step break toward the lowest action index.
    """
    if not hasattr(env, "transition_table"):
        raise TypeError(f"{type(env).__name__} is not a tabular environment")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    transitions = env.transition_table()
    reward_table = np.asarray(reward_table, dtype=float)
    values = np.zeros(env.n_states)
    residuals: list[float] = []
    for _ in range(1_000_000):
        q = reward_table + gamma * values[transitions]
        new_values = q.max(axis=1)
        residual = float(np.abs(new_values - values).max())
        residuals.append(residual)
        values = new_values
        if residual <= tol:
            break
    policy = (reward_table + gamma * values[transitions]).argmax(axis=1)
    return policy, values, residuals


def policy_return(env, policy: np.ndarray, horizon: int | None = None) -> float:
    """Mean undiscounted true return of deterministic rollouts from every
    start state."""
    horizon = env.max_episode_len if horizon is None else horizon
    transitions = env.transition_table()
    total = 0.0
    for start in range(env.n_states):
        s = start
        for _ in range(horizon):
            a = int(policy[s])
            total += env.reward_true(s, a)
            s = int(transitions[s, a])
    return total / env.n_states


def learned_reward_table(ensemble: RewardEnsemble, env) -> np.ndarray:
    """Ensemble-mean reward evaluated on the full (state, action) grid."""
    states = np.array(
        [env.state_vec(s) for s in range(env.n_states) for _ in range(env.n_actions)]
    )
    actions = np.array(
        [env.action_vec(a) for _ in range(env.n_states) for a in range(env.n_actions)]
    )
    return ensemble.mean_reward(states, actions).reshape(env.n_states, env.n_actions)


def normalized_policy_return(ensemble: RewardEnsemble, env) -> float | None:
    """True-reward return of the greedy policy under the learned reward,
    relative to the true-reward optimum. None when the optimum is zero."""
    learned = learned_reward_table(ensemble, env)
    policy, _, _ = value_iteration(env, learned, env.gamma)
    opt_policy, _, _ = value_iteration(env, env.reward_table(), env.gamma)
    denom = policy_return(env, opt_policy)
    if denom == 0.0:
        return None
    return policy_return(env, policy) / denom


def evaluate_reward(
    ensemble,
    env,
    teacher_cfg,
    heldout_queries: Sequence[tuple[Segment, Segment]],
    heldout_segments: Sequence[Segment],
    round_index: int = 0,
    with_policy: bool = True,
) -> dict:
    """Metrics record for one evaluation pass.

    clarity_ratio is the scripted-teacher clear fraction of the held-out
    query set; pref_accuracy compares learned preferences against hidden
    returns on the clear subset; spearman correlates learned and true
    segment returns; normalized_return closes the loop through value
    iteration on tabular environments.
    """
    from .teacher import scripted_label

    if not heldout_queries:
        raise ValueError("held-out query set is empty")
    labels = [scripted_label(a, b, teacher_cfg) for a, b in heldout_queries]
    n_clear = sum(1 for l in labels if l is not PreferenceLabel.NO_COMP)
    clarity = n_clear / len(labels)

    credit = 0.0
    for (a, b), label in zip(heldout_queries, labels):
        if label is PreferenceLabel.NO_COMP:
            continue
        sa = _segment_sum(ensemble, a)
        sb = _segment_sum(ensemble, b)
        if sa == sb:
            credit += 0.5
        elif (sa > sb) == (label is PreferenceLabel.PREFER_FIRST):
            credit += 1.0
    pref_accuracy = credit / n_clear if n_clear else None

    learned = np.array([_segment_sum(ensemble, s) for s in heldout_segments])
    true = np.array([s.true_return for s in heldout_segments])
    spearman = float(stats.spearmanr(learned, true).statistic)

    normalized = None
    if with_policy and hasattr(env, "transition_table") and isinstance(ensemble, RewardEnsemble):
        normalized = normalized_policy_return(ensemble, env)

    return {
        "clarity_ratio": clarity,
        "pref_accuracy": pref_accuracy,
        "spearman": spearman,
        "normalized_return": normalized,
        "round": round_index,
    }
