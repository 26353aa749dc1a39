"""Live human labeling over HTTP.

Writes a point-mass experiment config in human-teacher mode and either
prints the launch instructions or (with --launch) starts the service and
answers its own queries through the JSON API, standing in for the browser.

With the frontend built (see frontend/README.md), run instead:

    preflab serve --config human_demo.ini --port 8765

then open http://127.0.0.1:8765/ and judge the two animated paths with the
arrow keys (Left = first, Right = second, Space = skip).
"""

import argparse
import time

from preflab.harness import ExperimentConfig

CONFIG_PATH = "human_demo.ini"


def write_config() -> ExperimentConfig:
    config = ExperimentConfig(
        seeds=(0,),
        teacher="human",
        env_kind="pointmass",
        n_total=10,
        m=5,
        h=12,
        max_episode_len=24,
        n_episodes=40,
        n_segments=80,
        n_eval_queries=100,
        n_eval_segments=100,
        pool_size=200,
        n_init=500,
        n_emb=150,
        n_reward=20,
        reward_hidden=32,
        reward_batch=16,
        human_timeout_s=3600.0,
    )
    config.save(CONFIG_PATH)
    print(f"wrote {CONFIG_PATH} (teacher = human, {config.n_total} labels in batches of {config.m})")
    return config


def self_label(config: ExperimentConfig) -> None:
    import requests

    from preflab.service import LabelingServer

    server = LabelingServer(config, out_dir="artifacts_human_demo", port=0)
    server.start()
    base = f"http://127.0.0.1:{server.port}"
    print(f"service on {base}; labeling its queries by longer-path-wins...")
    answered = 0
    while answered < config.n_total:
        resp = requests.get(f"{base}/api/query", timeout=5)
        if resp.status_code != 200:
            time.sleep(0.1)
            continue
        query = resp.json()

        def path_length(side):
            pts = query[side]["points"]
            return sum(
                ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5
                for a, b in zip(pts, pts[1:])
            )

        answer = "first" if path_length("seg0") > path_length("seg1") else "second"
        requests.post(
            f"{base}/api/label",
            json={"ticket_id": query["ticket_id"], "answer": answer},
            timeout=5,
        )
        answered += 1
    final = server.wait(timeout=120)
    server.shutdown()
    print(f"done: {final['total_labels']} labels, clarity {final['clarity_ratio']:.1%}")
    print("artifacts in artifacts_human_demo/")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--launch", action="store_true", help="run the service and self-label")
    args = parser.parse_args()
    config = write_config()
    if args.launch:
        self_label(config)
    else:
        print("\nnext steps:")
        print(f"  preflab serve --config {CONFIG_PATH} --port 8765")
        print("  open http://127.0.0.1:8765/        (needs frontend/dist; see frontend/)")
        print("  or rerun this script with --launch for a headless round trip")


if __name__ == "__main__":
    main()
