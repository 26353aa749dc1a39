"""Synthetic environments with known ground-truth rewards.

Two desk-scale environments stand in for robot-manipulation datasets: a
deterministic N x N navigation grid (tabular, so policies can be evaluated
exactly) and a bounded 2-D point mass (continuous, so segments render as
paths a human can judge). Offline datasets are rolled out by noisy-optimal
behavior policies; the noise mixture is the dataset-quality knob.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Episode, OfflineDataset, Segment

# Fixed action order; ties in greedy policies break toward the first entry.
GRID_ACTIONS = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


@dataclass(frozen=True)
class GridNavEnv:
    """Deterministic grid navigation with an absorbing goal cell.

    Moving off the grid clamps to the wall. Reward is ``goal_reward`` when
    the transition lands on (or stays at) the goal, else ``step_reward``.
    """

    size: int = 8
    goal: tuple[int, int] = (7, 7)
    step_reward: float = 0.0
    goal_reward: float = 1.0
    gamma: float = 0.99
    max_episode_len: int = 60

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("grid size must be >= 2")
        r, c = self.goal
        if not (0 <= r < self.size and 0 <= c < self.size):
            raise ValueError("goal must lie inside the grid")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")

    # -- tabular structure ---------------------------------------------------

    @property
    def n_states(self) -> int:
        return self.size * self.size

    @property
    def n_actions(self) -> int:
        return len(GRID_ACTIONS)

    @property
    def goal_state(self) -> int:
        return self.goal[0] * self.size + self.goal[1]

    def cell_of(self, state: int) -> tuple[int, int]:
        return divmod(state, self.size)

    def next_state(self, state: int, action: int) -> int:
        if state == self.goal_state:
            return state
        r, c = self.cell_of(state)
        dr, dc = GRID_ACTIONS[action]
        r = min(max(r + dr, 0), self.size - 1)
        c = min(max(c + dc, 0), self.size - 1)
        return r * self.size + c

    def reward_true(self, state: int, action: int) -> float:
        if self.next_state(state, action) == self.goal_state:
            return self.goal_reward
        return self.step_reward

    def transition_table(self) -> np.ndarray:
        """(S, A) array of successor states."""
        table = np.empty((self.n_states, self.n_actions), dtype=int)
        for s in range(self.n_states):
            for a in range(self.n_actions):
                table[s, a] = self.next_state(s, a)
        return table

    def reward_table(self) -> np.ndarray:
        """(S, A) array of ground-truth rewards."""
        table = np.empty((self.n_states, self.n_actions))
        for s in range(self.n_states):
            for a in range(self.n_actions):
                table[s, a] = self.reward_true(s, a)
        return table

    # -- vector encodings for the learners ------------------------------------

    @property
    def state_dim(self) -> int:
        return self.n_states + 2

    @property
    def action_dim(self) -> int:
        return self.n_actions

    def state_vec(self, state: int) -> np.ndarray:
        # one-hot cell plus normalized (x, y) = (col, row) / (size - 1)
        vec = np.zeros(self.state_dim)
        vec[state] = 1.0
        r, c = self.cell_of(state)
        vec[self.n_states] = c / (self.size - 1)
        vec[self.n_states + 1] = r / (self.size - 1)
        return vec

    def action_vec(self, action: int) -> np.ndarray:
        vec = np.zeros(self.n_actions)
        vec[action] = 1.0
        return vec

    def decode_state(self, vec: np.ndarray) -> int:
        return int(np.argmax(vec[: self.n_states]))

    def decode_action(self, vec: np.ndarray) -> int:
        return int(np.argmax(vec))

    def reward_fn(self) -> Callable[[np.ndarray, np.ndarray], float]:
        """Ground-truth reward on encoded vectors, for oracle checks."""

        def fn(state_vec: np.ndarray, action_vec: np.ndarray) -> float:
            return self.reward_true(self.decode_state(state_vec), self.decode_action(action_vec))

        return fn

    # -- rendering hooks for the labeling UI ----------------------------------

    def segment_points(self, segment: Segment) -> list[list[float]]:
        pts = []
        for sv in segment.states:
            pts.append([float(sv[self.n_states]), float(sv[self.n_states + 1])])
        return pts

    def goal_marker(self) -> dict:
        r, c = self.goal
        denom = self.size - 1
        return {"x": c / denom, "y": r / denom, "radius": 0.5 / denom}

    # -- rollouts -------------------------------------------------------------

    def rollout(
        self,
        policy: np.ndarray,
        noise: float,
        rng: np.random.Generator,
        start: int | None = None,
    ) -> Episode:
        """Roll one episode with an epsilon-greedy version of ``policy``."""
        state = int(rng.integers(self.n_states)) if start is None else start
        states, actions, rewards = [], [], []
        for _ in range(self.max_episode_len):
            if rng.random() < noise:
                action = int(rng.integers(self.n_actions))
            else:
                action = int(policy[state])
            states.append(self.state_vec(state))
            actions.append(self.action_vec(action))
            rewards.append(self.reward_true(state, action))
            state = self.next_state(state, action)
        return Episode(np.array(states), np.array(actions), np.array(rewards))


@dataclass(frozen=True)
class PointMassEnv:
    """Velocity-controlled point in a square arena with a dense reward.

    Reward is the negative distance to the goal after the move, so it
    strictly increases as the point closes in. Positions clamp to the arena.
    """

    bounds: float = 1.0
    goal: tuple[float, float] = (0.7, 0.7)
    goal_radius: float = 0.1
    max_speed: float = 0.1
    max_episode_len: int = 60

    def __post_init__(self):
        gx, gy = self.goal
        if not (abs(gx) <= self.bounds and abs(gy) <= self.bounds):
            raise ValueError("goal must lie inside the arena")
        if self.max_speed <= 0 or self.goal_radius <= 0:
            raise ValueError("max_speed and goal_radius must be positive")

    @property
    def state_dim(self) -> int:
        return 4  # (x, y, vx, vy)

    @property
    def action_dim(self) -> int:
        return 2

    def clip_action(self, action: np.ndarray) -> np.ndarray:
        return np.clip(action, -self.max_speed, self.max_speed)

    def step(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, float]:
        action = self.clip_action(np.asarray(action, dtype=float))
        pos = np.clip(state[:2] + action, -self.bounds, self.bounds)
        reward = -float(np.linalg.norm(pos - np.asarray(self.goal)))
        return np.concatenate([pos, action]), reward

    def optimal_action(self, state: np.ndarray) -> np.ndarray:
        return self.clip_action(np.asarray(self.goal) - state[:2])

    def segment_points(self, segment: Segment) -> list[list[float]]:
        half = 2.0 * self.bounds
        pts = []
        for sv in segment.states:
            pts.append(
                [
                    float((sv[0] + self.bounds) / half),
                    float((sv[1] + self.bounds) / half),
                ]
            )
        return pts

    def goal_marker(self) -> dict:
        half = 2.0 * self.bounds
        gx, gy = self.goal
        return {
            "x": (gx + self.bounds) / half,
            "y": (gy + self.bounds) / half,
            "radius": self.goal_radius / half,
        }

    def rollout(self, noise: float, rng: np.random.Generator) -> Episode:
        pos = rng.uniform(-self.bounds, self.bounds, size=2)
        state = np.concatenate([pos, np.zeros(2)])
        states, actions, rewards = [], [], []
        for _ in range(self.max_episode_len):
            if rng.random() < noise:
                action = rng.uniform(-self.max_speed, self.max_speed, size=2)
            else:
                action = self.optimal_action(state)
            states.append(state)
            actions.append(action)
            state, reward = self.step(state, action)
            rewards.append(reward)
        return Episode(np.array(states), np.array(actions), np.array(rewards))


@dataclass(frozen=True)
class QualityMix:
    """Mixture of behavior-policy noise levels; the dataset-quality knob."""

    entries: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("quality mix must have at least one entry")
        fracs = np.array([f for _, f in self.entries])
        if np.any(fracs < 0) or abs(fracs.sum() - 1.0) > 1e-9:
            raise ValueError("mix fractions must be >= 0 and sum to 1")
        for noise, _ in self.entries:
            if not 0.0 <= noise <= 1.0:
                raise ValueError("behavior noise levels must lie in [0, 1]")

    @classmethod
    def single(cls, noise: float) -> "QualityMix":
        return cls(((noise, 1.0),))

    def episode_counts(self, n_episodes: int) -> list[int]:
        """Largest-remainder apportionment of episodes to mix entries."""
        quotas = [f * n_episodes for _, f in self.entries]
        counts = [int(q) for q in quotas]
        short = n_episodes - sum(counts)
        order = sorted(
            range(len(quotas)), key=lambda i: (quotas[i] - counts[i], -i), reverse=True
        )
        for i in order[:short]:
            counts[i] += 1
        return counts


def generate_offline_dataset(
    env, mix: QualityMix, n_episodes: int, seed: int
) -> OfflineDataset:
    """Roll a reward-free dataset with noisy-optimal behavior policies."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    rng = np.random.default_rng(seed)
    episodes = []
    if isinstance(env, GridNavEnv):
        policy, _ = optimal_tabular_policy(env, env.reward_true)
        for noise, count in zip([n for n, _ in mix.entries], mix.episode_counts(n_episodes)):
            for _ in range(count):
                episodes.append(env.rollout(policy, noise, rng))
    elif isinstance(env, PointMassEnv):
        for noise, count in zip([n for n, _ in mix.entries], mix.episode_counts(n_episodes)):
            for _ in range(count):
                episodes.append(env.rollout(noise, rng))
    else:
        raise TypeError(f"unsupported environment {type(env).__name__}")
    return OfflineDataset(episodes)


def optimal_tabular_policy(
    env: GridNavEnv, reward: Callable[[int, int], float]
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy policy and value table for a tabular reward function.

    Thin wrapper over ``reward.value_iteration`` (single implementation),
    re-exported here for dataset generation.
    """
    from .reward import value_iteration

    table = np.empty((env.n_states, env.n_actions))
    for s in range(env.n_states):
        for a in range(env.n_actions):
            table[s, a] = reward(s, a)
    policy, values, _ = value_iteration(env, table, env.gamma, tol=1e-10)
    return policy, values
