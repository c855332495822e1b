"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError, ThermsynthError

log = logging.getLogger("thermsynth")


def _cmd_generate(args) -> int:
    from .pipeline import run_generation

    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.mask_png:
        overrides["mask_png"] = True
    if args.debug_dumps:
        overrides["debug_dumps"] = True
    if overrides:
        config = dataclasses.replace(config, **overrides)
    summary = run_generation(config, resume=args.resume, keep_going=args.keep_going,
                             dump_configs=args.dump_configs, workers=args.workers)
    s = summary.to_dict()
    log.info("images=%(images_written)d labels=%(labels_written)d dropped_originals=%(originals_dropped)d "
             "empty_synthetic=%(empty_synthetic)d filtered_backgrounds=%(backgrounds_filtered)d", s)
    if args.json:
        print(json.dumps(s, indent=2, sort_keys=True))
    return 2 if summary.failures else 0


def _cmd_validate(args) -> int:
    from .pipeline import validate_dataset

    report = validate_dataset(args.images, args.labels)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"images: {report['images']}  labels: {report['labels']}")
        print(f"orphan labels: {len(report['orphan_labels'])}  orphan images: {len(report['orphan_images'])}")
        for k in report["orphan_labels"]:
            print(f"  orphan label: {k}")
        for k in report["orphan_images"]:
            print(f"  orphan image: {k}")
        print(f"invalid lines: {len(report['invalid_lines'])}")
        for line in report["invalid_lines"]:
            print(f"  {line}")
        print("class histogram: " + ", ".join(f"{k}:{v}" for k, v in report["class_histogram"].items()))
        st = report["bbox_area_stats"]
        if st["count"]:
            print(f"bbox area: min {st['min']:.6f} mean {st['mean']:.6f} max {st['max']:.6f}")
    return 2 if report["invalid_lines"] else 0


def _cmd_eval(args) -> int:
    from .metrics import evaluate

    report = evaluate(args.gt, args.pred, primary_iou=args.iou, geometry="obb" if args.obb else "aabb")
    print(report.to_json() if args.json else report.table())
    return 0


def _cmd_preview(args) -> int:
    from .pipeline import preview

    config = load_config(args.config)
    paths = preview(config, args.background, out_dir=args.out)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermsynth", description="Synthetic thermal aerial image generation")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render, composite and annotate a dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, help="override master_seed")
    g.add_argument("--resume", action="store_true", help="skip backgrounds whose manifest rows verify")
    g.add_argument("--dump-configs", metavar="PATH", help="write sampled scene configs as JSON lines")
    g.add_argument("--mask-png", action="store_true", help="also write binary mask PNGs")
    g.add_argument("--debug-dumps", action="store_true", help="write intensity/alpha/id/depth PNGs")
    g.add_argument("--keep-going", action="store_true", help="log per-background failures instead of aborting")
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--json", action="store_true", help="print the summary as JSON on stdout")
    g.set_defaults(func=_cmd_generate)

    v = sub.add_parser("validate", help="check an images/labels tree")
    v.add_argument("images")
    v.add_argument("labels")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=_cmd_validate)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("gt")
    e.add_argument("pred")
    e.add_argument("--iou", type=float, default=0.5, help="IoU threshold for P, R and mAP50 columns")
    e.add_argument("--obb", action="store_true", help="match oriented boxes instead of AABBs")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=_cmd_eval)

    pv = sub.add_parser("preview", help="render one background with debug channels")
    pv.add_argument("--config", required=True)
    pv.add_argument("--background", required=True)
    pv.add_argument("--out", help="output directory (default <output_root>/preview)")
    pv.set_defaults(func=_cmd_preview)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except ThermsynthError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
