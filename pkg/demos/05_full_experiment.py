"""One full feedback loop, end to end.

Runs the whole pipeline on grid navigation: random seed round, encoder
pretraining, guided query rounds, Bradley-Terry ensemble updates, dataset
relabeling, and value iteration under the learned reward. Prints the
per-round log and where every artifact landed.
"""

import argparse
import json
from pathlib import Path

from preflab.harness import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="artifacts_demo")
    args = parser.parse_args()

    config = ExperimentConfig(
        seeds=(args.seed,),
        n_total=250,
        m=50,
        epsilon=0.5,
        grid_size=5,
        grid_goal=(4, 4),
        max_episode_len=30,
        h=20,
        n_episodes=120,
        n_segments=200,
        n_eval_queries=200,
        n_eval_segments=300,
        pool_size=800,
        n_init=2000,
        n_emb=400,
        n_reward=50,
        reward_hidden=64,
        reward_batch=64,
    )
    print(f"running {config.n_total} labels in batches of {config.m} (seed {args.seed})...")
    final = run_experiment(config, out_dir=args.out)

    print("\nround  issued  clear  skip   clarity  heldout-spearman")
    for line in Path(args.out, "metrics.jsonl").read_text().splitlines():
        row = json.loads(line)
        clear = row["labels_first"] + row["labels_second"]
        print(
            f"  {row['round']:>3}  {row['queries_issued']:>6}  {clear:>5}"
            f"  {row['labels_skip']:>4}   {row['clarity_ratio']:>6.1%}"
            f"  {row['metrics']['spearman']:>10.3f}"
        )

    print("\nfinal metrics:")
    for key in ("clarity_ratio", "spearman", "pref_accuracy", "normalized_return"):
        print(f"  {key:<18} {final[key]}")
    print(f"\nartifacts in {args.out}/: metrics.jsonl, densities/, embeddings/, checkpoints/")


if __name__ == "__main__":
    main()
