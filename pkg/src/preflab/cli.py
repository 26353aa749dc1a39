"""Command-line entry points.

Subcommands: ``run`` (one experiment), ``gradcheck`` (finite-difference
oracle suites), ``demo-quad`` (2-D value-ordering reproduction),
``export-emb`` (re-export a checkpoint as a 2-D projection CSV),
``report`` (summarize an artifacts directory), ``serve`` (human labeling
service).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .harness import ConfigError, ExperimentConfig, load_segments_npz, run_experiment


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    final = run_experiment(
        config, seed=args.seed, out_dir=args.out, resume=args.resume
    )
    print(json.dumps(final, sort_keys=True, indent=2))
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_all

    results = run_all(n_fixtures=args.fixtures, seed=args.seed)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max rel err {r.max_rel_error:.3e}  {status}")
        ok = ok and r.passed
    return 0 if ok else 1


def _cmd_demo_quad(args) -> int:
    from .embedding import export_embeddings
    from .synth import value_ordering_demo

    model, segments, _, rho, _ = value_ordering_demo(seed=args.seed)
    export_embeddings(model, segments, args.out)
    print(f"spearman(value, pc1) = {rho:.4f}  (export: {args.out})")
    if rho >= 0.9:
        return 0
    print("value ordering below the 0.9 bar", file=sys.stderr)
    return 1


def _cmd_export_emb(args) -> int:
    from .embedding import export_embeddings, load_model

    model_path = Path(args.model)
    segments_path = args.segments
    if segments_path is None:
        for parent in [model_path.parent, *model_path.parents]:
            candidate = parent / "pool.npz"
            if candidate.exists():
                segments_path = candidate
                break
    if segments_path is None:
        print(
            "cannot locate pool.npz next to the checkpoint; pass --segments",
            file=sys.stderr,
        )
        return 1
    model = load_model(model_path)
    segments = load_segments_npz(segments_path)
    export_embeddings(model, segments, args.out)
    print(f"wrote {args.out} ({len(segments)} segments)")
    return 0


def _cmd_report(args) -> int:
    metrics_path = Path(args.dir) / "metrics.jsonl"
    if not metrics_path.exists():
        print(f"no metrics.jsonl under {args.dir}", file=sys.stderr)
        return 1
    rows = [json.loads(line) for line in metrics_path.read_text().splitlines() if line]
    columns = [
        "round", "queries_issued", "labels_first", "labels_second", "labels_skip",
        "clarity_ratio", "clarity_ratio_cum", "budget_spent", "selection_mode",
        "embed_loss", "reward_loss",
    ]
    metric_columns = ["clarity_ratio", "pref_accuracy", "spearman", "normalized_return"]
    out = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(columns + [f"eval_{c}" for c in metric_columns])
        for row in rows:
            writer.writerow(
                [row.get(c) for c in columns]
                + [row.get("metrics", {}).get(c) for c in metric_columns]
            )
    finally:
        if args.out is not None:
            out.close()
    return 0


def _cmd_serve(args) -> int:
    from .service import LabelingServer

    config = ExperimentConfig.load(args.config)
    if config.teacher != "human":
        logging.getLogger(__name__).info("forcing teacher = human for the service")
        config = dataclasses.replace(config, teacher="human")
    ui_dir = args.ui_dir
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = default_ui if default_ui.exists() else None
    server = LabelingServer(
        config, out_dir=args.out, port=args.port, ui_dir=ui_dir, seed=args.seed
    )
    server.start()
    print(f"labeling service on http://127.0.0.1:{server.port}/ (Ctrl-C stops)", flush=True)
    try:
        result = server.wait()
        if server.error is not None:
            print(f"experiment failed: {server.error}", file=sys.stderr)
            return 1
        print(json.dumps(result, sort_keys=True, indent=2))
        return 0
    except KeyboardInterrupt:
        return 130
    finally:
        server.shutdown()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preflab",
        description="Preference-based reward learning experiments on synthetic environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="artifacts")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("gradcheck", help="run every finite-difference gradient suite")
    p.add_argument("--fixtures", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("demo-quad", help="2-D value-ordering demo on 1000 scalar items")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="demo_quad_embeddings.csv")
    p.set_defaults(fn=_cmd_demo_quad)

    p = sub.add_parser("export-emb", help="export a checkpoint as a 2-D projection CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segments", default=None, help="pool.npz with the segments to encode")
    p.set_defaults(fn=_cmd_export_emb)

    p = sub.add_parser("report", help="summarize an artifacts directory as CSV")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("serve", help="serve the human labeling API and UI")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--out", default="artifacts")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
