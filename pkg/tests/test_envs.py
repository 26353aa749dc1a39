from collections import deque

import numpy as np
import pytest

from preflab.core import sample_segments
from preflab.envs import (
    GridNavEnv,
    PointMassEnv,
    QualityMix,
    generate_offline_dataset,
    optimal_tabular_policy,
)


def bfs_distances(env: GridNavEnv) -> np.ndarray:
    """Independent shortest-path oracle (breadth-first search to the goal)."""
    dist = np.full(env.n_states, -1)
    dist[env.goal_state] = 0
    queue = deque([env.goal_state])
    while queue:
        s = queue.popleft()
        for other in range(env.n_states):
            if dist[other] >= 0 or other == env.goal_state:
                continue
            for a in range(env.n_actions):
                if env.next_state(other, a) == s:
                    dist[other] = dist[s] + 1
                    queue.append(other)
                    break
    return dist


class TestGridNav:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridNavEnv(size=3, goal=(3, 0))
        with pytest.raises(ValueError):
            GridNavEnv(gamma=1.0, size=3, goal=(1, 1))

    def test_walls_clamp(self):
        env = GridNavEnv(size=3, goal=(2, 2))
        assert env.next_state(0, 0) == 0  # up from the top row
        assert env.next_state(0, 2) == 0  # left from the first column

    def test_goal_absorbs(self):
        env = GridNavEnv(size=3, goal=(2, 2))
        for a in range(4):
            assert env.next_state(env.goal_state, a) == env.goal_state
            assert env.reward_true(env.goal_state, a) == env.goal_reward

    def test_state_vec_round_trip(self):
        env = GridNavEnv(size=4, goal=(3, 3))
        for s in range(env.n_states):
            vec = env.state_vec(s)
            assert env.decode_state(vec) == s
            assert vec.shape == (env.state_dim,)

    def test_optimal_policy_matches_bfs(self):
        env = GridNavEnv(size=3, goal=(2, 0), gamma=0.99, max_episode_len=10)
        policy, _ = optimal_tabular_policy(env, env.reward_true)
        dist = bfs_distances(env)
        transitions = env.transition_table()
        for start in range(env.n_states):
            s, steps = start, 0
            while s != env.goal_state and steps <= env.n_states:
                s = int(transitions[s, int(policy[s])])
                steps += 1
            assert s == env.goal_state
            assert steps == dist[start]


class TestPointMass:
    def test_states_stay_in_bounds(self):
        env = PointMassEnv(bounds=1.0, goal=(0.5, 0.5), max_speed=0.5)
        state = np.array([0.9, 0.9, 0.0, 0.0])
        for _ in range(10):
            state, _ = env.step(state, np.array([1.0, 1.0]))
            assert np.all(np.abs(state[:2]) <= 1.0)

    def test_reward_increases_as_distance_shrinks(self):
        env = PointMassEnv(goal=(0.0, 0.0), max_speed=0.1)
        state = np.array([-0.9, 0.0, 0.0, 0.0])
        rewards = []
        for _ in range(8):
            state, r = env.step(state, env.optimal_action(state))
            rewards.append(r)
        assert all(b > a for a, b in zip(rewards, rewards[1:]))

    def test_segment_points_normalized(self):
        env = PointMassEnv()
        ds = generate_offline_dataset(env, QualityMix.single(0.5), 2, seed=0)
        seg = sample_segments(ds, H=10, count=1, seed=0)[0]
        pts = env.segment_points(seg)
        assert len(pts) == 10
        assert all(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0 for x, y in pts)


class TestQualityMix:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            QualityMix(((0.0, 0.5), (1.0, 0.4)))

    def test_empty_mix_rejected(self):
        with pytest.raises(ValueError):
            QualityMix(())

    def test_episode_counts_cover_total(self):
        mix = QualityMix(((0.0, 0.34), (0.3, 0.33), (1.0, 0.33)))
        assert sum(mix.episode_counts(101)) == 101


class TestGenerateDataset:
    def test_zero_eps_reaches_goal_in_bfs_steps(self):
        env = GridNavEnv(size=4, goal=(3, 3), max_episode_len=12)
        ds = generate_offline_dataset(env, QualityMix.single(0.0), 30, seed=5)
        dist = bfs_distances(env)
        for ep in ds.episodes:
            start = env.decode_state(ep.states[0])
            hits = np.flatnonzero(ep.rewards == env.goal_reward)
            if dist[start] <= env.max_episode_len:
                # first goal entry happens exactly at the BFS distance
                expected = max(dist[start] - 1, 0)
                assert hits[0] == expected

    def test_noise_lowers_returns(self):
        env = GridNavEnv(size=4, goal=(3, 3), max_episode_len=12)
        clean = generate_offline_dataset(env, QualityMix.single(0.0), 100, seed=1)
        noisy = generate_offline_dataset(env, QualityMix.single(1.0), 100, seed=1)
        mean = lambda ds: np.mean([ep.rewards.sum() for ep in ds.episodes])
        assert mean(noisy) < mean(clean)

    def test_zero_episodes_rejected(self):
        env = GridNavEnv(size=3, goal=(2, 2))
        with pytest.raises(ValueError):
            generate_offline_dataset(env, QualityMix.single(0.0), 0, seed=0)

    def test_quality_monotone_in_noise(self):
        env = GridNavEnv(size=4, goal=(3, 3), max_episode_len=12)
        for seed in range(3):
            means = []
            for noise in (0.0, 0.5, 1.0):
                ds = generate_offline_dataset(env, QualityMix.single(noise), 200, seed=seed)
                means.append(np.mean([ep.rewards.sum() for ep in ds.episodes]))
            assert means[0] >= means[1] >= means[2]

    def test_true_return_consistency(self):
        env = GridNavEnv(size=4, goal=(3, 3), max_episode_len=12)
        ds = generate_offline_dataset(env, QualityMix.single(0.3), 20, seed=2)
        for seg in sample_segments(ds, H=6, count=50, seed=3):
            ep = ds.episodes[seg.source_episode]
            start = int(seg.id.split("s")[1])
            assert seg.true_return == ep.rewards[start : start + 6].sum()

    def test_deterministic_given_seed(self):
        env = GridNavEnv(size=4, goal=(3, 3), max_episode_len=12)
        mix = QualityMix(((0.0, 0.5), (1.0, 0.5)))
        a = generate_offline_dataset(env, mix, 20, seed=7)
        b = generate_offline_dataset(env, mix, 20, seed=7)
        assert a == b
