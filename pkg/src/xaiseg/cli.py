"""Command-line entry point; one subcommand per framework stage."""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .augment import AugmentError
from .coco import CocoError
from .metrics import MetricsError
from .model import ModelError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", dest="out_dir", help="output directory (default ./out)")
    p.add_argument("--dataset-dir", dest="dataset_dir", help="dataset directory (default <out>/dataset)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--methods", help="comma-separated method keys")


def _config(args) -> pipeline.RunConfig:
    overrides = {
        "out_dir": args.out_dir,
        "dataset_dir": args.dataset_dir,
        "seed": args.seed,
        "epochs": args.epochs,
    }
    if args.methods:
        overrides["methods"] = tuple(args.methods.split(","))
    return pipeline.RunConfig.load(args.config, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xaiseg",
        description="Train, explain, score, and enhance a desk-scale segmentation model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("synth", "generate the synthetic dataset (images/, train.json, eval.json, truth.json)"),
        ("train", "train the model on the training annotations"),
        ("explain", "export eval-split explanation maps as NPY files"),
        ("eval-xai", "score all methods and write evaluation.csv/json + chosen_method.json"),
        ("retrain", "train the enhanced model on train_enhanced.json"),
        ("compare", "per-class IoU of original vs enhanced on the same eval GT"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("augment", help="apply an augmentation plan to the training annotations")
    _add_common(p)
    p.add_argument("--plan", help="plan JSON file")
    p.add_argument(
        "--auto-default",
        action="store_true",
        help="build the default plan (enlarge cables, annotate truth-file confusers)",
    )

    p = sub.add_parser("overlay", help="render one explanation heatmap over its image")
    _add_common(p)
    p.add_argument("--image-id", type=int, required=True)
    p.add_argument("--method", default="gradcam")
    p.add_argument("--category", type=int, default=1)
    p.add_argument("--alpha", type=float)
    p.add_argument("--output", help="output PNG path")

    p = sub.add_parser("serve", help="serve the HTTP API (and the review UI, if built)")
    _add_common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--ui-dir", help="directory with the built review UI to serve at /")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "synth":
            path = pipeline.run_synth(cfg)
            print(f"dataset written to {path}")
        elif args.command == "train":
            path = pipeline.run_train(cfg)
            print(f"model written to {path}")
        elif args.command == "explain":
            path = pipeline.run_explain(cfg)
            print(f"maps written to {path}")
        elif args.command == "eval-xai":
            rows = pipeline.run_eval_xai(cfg)
            chosen = pipeline.select_core_method(rows).method
            print(pipeline.evaluation_to_csv(rows), end="")
            print(f"chosen method: {chosen}")
        elif args.command == "augment":
            path = pipeline.run_augment(cfg, plan_path=args.plan, auto_default=args.auto_default)
            print(f"enhanced annotations written to {path}")
        elif args.command == "retrain":
            path = pipeline.run_retrain(cfg)
            print(f"enhanced model written to {path}")
        elif args.command == "compare":
            report = pipeline.run_compare(cfg)
            print(pipeline.comparison_to_csv(report), end="")
        elif args.command == "overlay":
            out = pipeline.run_overlay(
                cfg, args.image_id, args.method, args.category, alpha=args.alpha, out_path=args.output
            )
            print(f"overlay written to {out}")
        elif args.command == "serve":
            import uvicorn

            from .server import create_app

            host = args.host or cfg.host
            port = args.port if args.port is not None else cfg.port
            app = create_app(cfg, ui_dir=args.ui_dir)
            uvicorn.run(app, host=host, port=port, log_level="warning")
    except (pipeline.PipelineError, CocoError, ModelError, MetricsError, AugmentError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
