"""Acceptance suite: one test per exit criterion, at the stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all
even on success). The end-to-end experiment runs are shared between the
clarity-uplift and reward-quality criteria through a module-scoped fixture.
"""

import time

import numpy as np
import pytest

from preflab.core import PreferenceLabel, Segment
from preflab.embedding import (
    DistanceMetric,
    EmbeddingModel,
    LossWeights,
    pair_distances,
    separation_report,
    train_embedding,
)
from preflab.gradcheck import run_all
from preflab.harness import ExperimentConfig, run_experiment
from preflab.selection import CandidateQuery, accept_candidates, density_from_masses
from preflab.synth import (
    all_pairs_preferences,
    lattice_band_segments,
    threshold_preferences,
    two_band_segments,
    uniform_value_segments,
    value_ordering_demo,
)
from preflab.teacher import TeacherConfig, scripted_label


def report(name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {status} {name}: {detail}")
    assert passed, f"{name}: {detail}"


def test_gradient_oracle_suite():
    t0 = time.time()
    results = run_all(n_fixtures=10, seed=0)
    elapsed = time.time() - t0
    worst = max(r.max_rel_error for r in results)
    ok = all(r.passed for r in results) and elapsed < 60
    report(
        "gradient-oracle-suite",
        ok,
        f"worst rel err {worst:.2e} over {len(results)} suites x 10 fixtures, {elapsed:.1f}s",
    )


def test_value_ordering_demo():
    t0 = time.time()
    rhos = [value_ordering_demo(seed=seed)[3] for seed in range(5)]
    elapsed = time.time() - t0
    hits = sum(1 for r in rhos if r >= 0.9)
    ok = hits >= 4 and elapsed < 120
    report(
        "value-ordering-demo",
        ok,
        f"spearman {['%.3f' % r for r in rhos]}, {hits}/5 seeds >= 0.9, {elapsed:.1f}s",
    )


def test_margin_separation():
    t0 = time.time()
    margins = []
    for seed in range(5):
        segments = two_band_segments(20, seed)
        prefs = all_pairs_preferences(segments, 0.3)
        model = EmbeddingModel.new_table(segments, dim=2, seed=seed + 100)
        train_embedding(
            model, segments, prefs, steps=5000, lr=0.1,
            weights=LossWeights(lambda_amb=1.0, lambda_quad=0.0, lambda_norm=0.1),
            seed=seed + 200,
        )
        margins.append(separation_report(model, prefs).margin)
    elapsed = time.time() - t0
    hits = sum(1 for m in margins if m > 0)
    ok = hits >= 4 and elapsed < 120
    report(
        "margin-separation",
        ok,
        f"margins {['%.2f' % m for m in margins]}, {hits}/5 seeds > 0, {elapsed:.1f}s",
    )


def test_convex_separability():
    t0 = time.time()
    segments = uniform_value_segments(1000, 0)
    prefs = threshold_preferences(segments, 0.3, 20000, 1)
    model = EmbeddingModel.new_table(segments, dim=2, seed=2)
    train_embedding(
        model, segments, prefs, steps=20000, lr=0.1,
        weights=LossWeights(0.1, 1.0, 0.1), seed=3,
    )
    accuracy = separation_report(model, prefs).train_accuracy
    elapsed = time.time() - t0
    ok = accuracy >= 0.9 and elapsed < 120
    report(
        "convex-separability",
        ok,
        f"centroid hyperplane train accuracy {accuracy:.3f}, {elapsed:.1f}s",
    )


def test_collapse_sentinel():
    segments = lattice_band_segments(50, width=0.3, gap=0.2625)
    prefs = all_pairs_preferences(segments, 0.3)
    ambiguous = prefs.ambiguous

    def amb_mean_distance(model):
        z0, _ = model.encode_segments([t.seg0 for t in ambiguous])
        z1, _ = model.encode_segments([t.seg1 for t in ambiguous])
        return float(pair_distances(z0, z1, DistanceMetric.L2).mean())

    ratios = {"bare": [], "quad": []}
    for seed in range(3):
        for lam_quad, tag in ((0.0, "bare"), (1.0, "quad")):
            model = EmbeddingModel.new_table(segments, dim=2, seed=seed + 200)
            before = amb_mean_distance(model)
            train_embedding(
                model, segments, prefs, steps=5000, lr=0.1,
                weights=LossWeights(lambda_amb=1.0, lambda_quad=lam_quad, lambda_norm=0.0),
                seed=seed + 300,
            )
            ratios[tag].append(amb_mean_distance(model) / before)
    bare = float(np.mean(ratios["bare"]))
    quad = float(np.mean(ratios["quad"]))
    ok = bare < 0.1 and quad > 0.3
    report(
        "collapse-sentinel",
        ok,
        f"ambiguous-distance ratio without quad {bare:.3f} (<0.1), with quad {quad:.3f} (>0.3), 3 seeds",
    )


def test_rejection_sampling_law():
    t0 = time.time()
    density = density_from_masses(
        np.array([0.0, 0.5, 1.0]), np.array([0.2, 0.8]), np.array([0.8, 0.2]), eps_d=1e-12
    )
    assert np.allclose(density.rho, [1 / 34, 33 / 34], atol=1e-9)
    target = np.array([1 / 34, 33 / 34])  # normalized p * rho with p uniform
    blank = Segment("blank", np.zeros((1, 1)), np.zeros((1, 1)), 0.0, 0)
    candidates = [
        CandidateQuery(blank, blank, 0.25 if i % 2 == 0 else 0.75) for i in range(100_000)
    ]
    tvs = []
    for seed in range(3):
        mask = accept_candidates(candidates, density, np.random.default_rng(seed))
        dists = np.array([c.d_emb for c in candidates])[mask]
        freqs = np.array([(dists < 0.5).mean(), (dists >= 0.5).mean()])
        tvs.append(0.5 * np.abs(freqs - target).sum())
    elapsed = time.time() - t0
    ok = all(tv <= 0.03 for tv in tvs) and elapsed < 30
    report(
        "rejection-sampling-law",
        ok,
        f"total variation {['%.4f' % tv for tv in tvs]} (<= 0.03), {elapsed:.1f}s",
    )


E2E_BASE = dict(
    n_total=500,
    m=50,
    epsilon=0.5,
    grid_size=5,
    grid_goal=(4, 4),
    max_episode_len=30,
    h=20,
    n_episodes=150,
    n_segments=256,
    n_eval_queries=300,
    n_eval_segments=500,
    pool_size=800,
    n_init=2500,
    n_emb=400,
    n_reward=50,
    reward_hidden=64,
    reward_batch=64,
)


@pytest.fixture(scope="module")
def e2e_runs(tmp_path_factory):
    """Five seed-pairs of full experiments: embedding-guided vs random."""
    root = tmp_path_factory.mktemp("e2e")
    t0 = time.time()
    runs = {"embedding": [], "random": []}
    for seed in range(5):
        for mode in ("embedding", "random"):
            cfg = ExperimentConfig(seeds=(seed,), selection=mode, **E2E_BASE)
            out = root / f"{mode}_{seed}"
            runs[mode].append(run_experiment(cfg, out_dir=out))
    runs["elapsed"] = time.time() - t0
    return runs


def test_clarity_ratio_uplift(e2e_runs):
    emb = np.mean([r["clarity_ratio"] for r in e2e_runs["embedding"]])
    rand = np.mean([r["clarity_ratio"] for r in e2e_runs["random"]])
    uplift = emb - rand
    ok = uplift >= 0.10 and e2e_runs["elapsed"] < 600
    report(
        "clarity-ratio-uplift",
        ok,
        f"guided {emb:.3f} vs random {rand:.3f}: uplift {uplift * 100:.1f}pp "
        f"(>= 10pp), mean over 5 seeds, {e2e_runs['elapsed']:.0f}s for all runs",
    )


def test_end_to_end_reward_quality(e2e_runs):
    spearman = np.mean([r["spearman"] for r in e2e_runs["embedding"]])
    normret = np.mean([r["normalized_return"] for r in e2e_runs["embedding"]])
    ok = spearman >= 0.8 and normret >= 0.9
    report(
        "end-to-end-reward-quality",
        ok,
        f"spearman {spearman:.3f} (>= 0.8), normalized policy return {normret:.3f} (>= 0.9), mean over 5 seeds",
    )


def test_cli_demo_quad(tmp_path, capsys):
    from preflab.cli import main as cli_main

    out = tmp_path / "demo.csv"
    code = cli_main(["demo-quad", "--seed", "0", "--out", str(out)])
    printed = capsys.readouterr().out
    ok = code == 0 and "spearman" in printed and out.exists()
    report("cli-demo-quad", ok, f"exit {code}, output: {printed.strip()}")


def test_teacher_skip_law():
    def seg(value, sid):
        return Segment(sid, np.zeros((50, 2)), np.zeros((50, 1)), float(value), 0)

    monotone = True
    fractions_by_seed = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        returns = rng.uniform(0, 50, size=(1000, 2))
        fractions = []
        for eps in (0.1, 0.5, 0.7):
            cfg = TeacherConfig(epsilon=eps, H=50, r_avg=0.5)
            skips = sum(
                1
                for a, b in returns
                if scripted_label(seg(a, "a"), seg(b, "b"), cfg) is PreferenceLabel.NO_COMP
            )
            fractions.append(skips / 1000)
        fractions_by_seed.append(fractions)
        monotone = monotone and fractions[0] <= fractions[1] <= fractions[2]
    report(
        "teacher-skip-law",
        monotone,
        f"skip fractions per seed {fractions_by_seed} non-decreasing in epsilon",
    )


def test_scripted_determinism(tmp_path):
    cfg = ExperimentConfig(
        seeds=(3,),
        n_total=100,
        m=50,
        epsilon=0.5,
        grid_size=5,
        grid_goal=(4, 4),
        max_episode_len=30,
        h=20,
        n_episodes=60,
        n_segments=120,
        n_eval_queries=100,
        n_eval_segments=100,
        pool_size=400,
        n_init=500,
        n_emb=200,
        n_reward=10,
        reward_hidden=32,
        reward_batch=32,
    )
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "metrics.jsonl").read_bytes()
    b = (tmp_path / "b" / "metrics.jsonl").read_bytes()
    report(
        "scripted-determinism",
        a == b,
        f"metrics.jsonl byte-identical across two seed-3 runs ({len(a)} bytes)",
    )
