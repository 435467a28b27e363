"""Command-line entry point: ``posesynth {generate,evaluate,preview,make-desk-corpus}``.

The log level comes from ``POSESYNTH_LOG_LEVEL`` (default ``INFO``).
Exit codes: 0 success, 1 fatal error, 2 partial run (some samples skipped).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .exceptions import PoseSynthError
from .pipeline import (
    EXIT_FATAL,
    EXIT_OK,
    RunConfig,
    cmd_evaluate,
    cmd_generate,
    cmd_make_desk_corpus,
    cmd_preview,
)

LOG_ENV = "POSESYNTH_LOG_LEVEL"
log = logging.getLogger("posesynth")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posesynth", description="Pose-conditioned image mosaic synthesis.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize images for projected mocap poses")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--workers", type=int)
    g.add_argument("--trace", action="store_true", default=None, help="write match_trace.jsonl")
    g.add_argument("--debug-maps", action="store_true", default=None, help="write index map and distance field PNGs")

    e = sub.add_parser("evaluate", help="pose-class protocol on projected mocap poses")
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")

    v = sub.add_parser("preview", help="contact sheet of generated images with skeleton overlay")
    v.add_argument("--manifest", required=True)
    v.add_argument("--count", type=int, default=16)
    v.add_argument("--out")

    d = sub.add_parser("make-desk-corpus", help="write a procedurally generated annotated corpus")
    d.add_argument("--size", type=int, required=True)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--mocap-size", type=int)
    return p


def _configure_logging():
    level = os.environ.get(LOG_ENV, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _configure_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            cfg = RunConfig.load(args.config, seed=args.seed, out=args.out, workers=args.workers,
                                 trace=args.trace, debug_maps=args.debug_maps)
            manifest, code = cmd_generate(cfg)
            print(f"{manifest.stats['n_emitted']} image(s) written to {cfg.out}")
            return code
        if args.command == "evaluate":
            cfg = RunConfig.load(args.config, seed=args.seed, out=args.out)
            report = cmd_evaluate(cfg)
            print(f"aligned 3D error {report.aligned_3d_mm:.1f} mm, 2D error {report.err_2d_px:.2f} px, "
                  f"top-1 {report.top1_accuracy:.3f} (n={report.n_test})")
            return EXIT_OK
        if args.command == "preview":
            print(cmd_preview(args.manifest, args.count, args.out))
            return EXIT_OK
        print(cmd_make_desk_corpus(args.size, args.seed, args.out, args.mocap_size))
        return EXIT_OK
    except (PoseSynthError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
