"""Offline datasets with hidden rewards, and teachers that sometimes shrug.

Builds the two synthetic environments, rolls out reward-free datasets at
several behavior-noise levels, cuts them into fixed-length segments, and
shows how the scripted teacher's skip rate controls how many queries come
back labeled "no comparison".
"""

import numpy as np

from preflab.core import PreferenceLabel, sample_segments
from preflab.envs import GridNavEnv, PointMassEnv, QualityMix, generate_offline_dataset
from preflab.teacher import TeacherConfig, scripted_label


def main():
    env = GridNavEnv(size=6, goal=(5, 5), max_episode_len=40)
    print("== dataset quality is a behavior-noise knob ==")
    for noise in (0.0, 0.3, 0.6, 1.0):
        ds = generate_offline_dataset(env, QualityMix.single(noise), 80, seed=0)
        returns = [ep.rewards.sum() for ep in ds.episodes]
        print(
            f"  noise {noise:.1f}: mean episode return {np.mean(returns):6.2f}"
            f"  (r_avg {ds.r_avg:.3f})"
        )

    mix = QualityMix(((0.0, 0.34), (0.3, 0.33), (1.0, 0.33)))
    ds = generate_offline_dataset(env, mix, 120, seed=1)
    segments = sample_segments(ds, H=20, count=2000, seed=2)
    print(f"\nmixed-quality dataset: {ds.n_transitions()} transitions, "
          f"{len(segments)} sampled segments of length 20")

    print("\n== the skip rate controls query clarity ==")
    rng = np.random.default_rng(3)
    pairs = [
        (segments[i], segments[j])
        for i, j in rng.integers(len(segments), size=(1000, 2))
        if segments[i].id != segments[j].id
    ]
    for eps in (0.1, 0.3, 0.5, 0.7):
        cfg = TeacherConfig(epsilon=eps, H=20, r_avg=ds.r_avg)
        labels = [scripted_label(a, b, cfg) for a, b in pairs]
        skipped = sum(1 for l in labels if l is PreferenceLabel.NO_COMP)
        print(
            f"  epsilon {eps:.1f}: threshold {cfg.threshold:6.2f}, "
            f"skipped {skipped / len(pairs):5.1%} of {len(pairs)} queries"
        )

    print("\n== point-mass paths render naturally for humans ==")
    pm = PointMassEnv()
    pm_ds = generate_offline_dataset(pm, QualityMix.single(0.4), 10, seed=4)
    seg = sample_segments(pm_ds, H=10, count=1, seed=5)[0]
    pts = pm.segment_points(seg)
    print(f"  a 10-step segment as unit-square polyline: start {pts[0]}, end {pts[-1]}")
    print(f"  goal marker: {pm.goal_marker()}")


if __name__ == "__main__":
    main()
