"""Command line front-end: ``metricseg <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import build_metric_graph, nearest_neighbor_offsets
from .evaluation import boundary_exclusion_mask, evaluate
from .loss import LossParams
from .metricfit import ProjectionConfig, make_inconsistent_fixture, project_to_metric, sampled_offsets
from .optimize import FitConfig, fit_embeddings
from .segment import SegmentationConfig, connected_components, postprocess, seed_segment
from .synth import voronoi_labels
from .viz import fit_pca, render_rgb, save_png

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_NONFINITE = 5

EPILOG = """exit codes:
  0  success, all outputs written and finite
  1  unexpected error
  2  bad command line (unknown flag, invalid value)
  3  input file missing
  4  input has the wrong shape, dtype or contents
  5  an output would contain non-finite values
"""

log = logging.getLogger("metricseg")


class NonFiniteOutput(FloatingPointError):
    pass


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteOutput(f"{name} contains non-finite values")


def _seg_config(args) -> SegmentationConfig:
    return SegmentationConfig(
        cc_threshold=args.threshold,
        affinity_threshold=args.affinity_threshold,
        min_size=args.min_size,
        max_dilation=args.max_dilation,
        connectivity=args.connectivity,
    )


def _fit_config(args) -> FitConfig:
    return FitConfig(
        max_iters=args.iters,
        loss=LossParams(delta_d=args.delta_d, gamma=args.gamma, dim=args.dim),
        seed=args.seed,
        init_scale=args.init_scale,
        lr=args.lr,
    )


def _fit_log(result) -> dict:
    return {
        "converged": result.converged,
        "iterations": result.iterations,
        "final": result.report.to_dict(),
        "log": result.log,
    }


def cmd_synth(args) -> None:
    labels = voronoi_labels(args.height, args.width, args.objects, args.seed)
    io.save_labels(args.out, labels)


def cmd_fixture(args) -> None:
    graph = make_inconsistent_fixture((args.height, args.width), args.merge_fraction,
                                      sampled_offsets(args.radius))
    io.save_graph(args.out, graph)


def cmd_fit(args) -> None:
    labels = io.load_labels(args.labels)
    result = fit_embeddings(labels, _fit_config(args))
    _check_finite("field", result.field)
    io.save_field(args.out, result.field)
    if args.log:
        io.write_json(args.log, _fit_log(result))


def cmd_segment_cc(args) -> None:
    config = _seg_config(args)
    if args.field:
        graph = build_metric_graph(io.load_field(args.field), nearest_neighbor_offsets(args.connectivity))
    else:
        graph = io.load_graph(args.graph)
    labels = connected_components(graph, config)
    if not args.raw:
        labels = postprocess(labels, config)
    io.save_labels(args.out, labels)
    print(f"segments: {len(np.unique(labels[labels > 0]))}")


def cmd_segment_seed(args) -> None:
    field, gt = io.load_field(args.field), io.load_labels(args.gt)
    if field.shape[:2] != gt.shape:
        raise io.FormatError(f"field {field.shape[:2]} and gt {gt.shape} differ in shape")
    labels = seed_segment(field, gt)
    if not args.raw:
        labels = postprocess(labels, _seg_config(args))
    io.save_labels(args.out, labels)


def cmd_project(args) -> None:
    target = io.load_graph(args.graph)
    if target.kind != "affinity":
        raise io.FormatError(f"{args.graph}: project needs an affinity graph")
    config = ProjectionConfig(embed_dim=args.dim, max_radius=args.radius, lr=args.lr,
                              max_iters=args.iters, seed=args.seed)
    result = project_to_metric(target, config)
    _check_finite("fitted field", result.field)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_field(out / "field.npy", result.field)
    io.save_graph(out / "metric.npy", result.metric)
    io.save_graph(out / "affinity.npy", result.affinity)
    io.write_json(out / "residual.json", {
        "objective": result.objective,
        "num_edges": result.num_edges,
        "mean_squared_residual": result.residual,
        "converged": result.converged,
        "history": result.history,
    })


def _score(pred, gt, radius: int):
    if pred.shape != gt.shape:
        raise io.FormatError(f"pred {pred.shape} and gt {gt.shape} differ in shape")
    return evaluate(pred, gt, boundary_exclusion_mask(gt, radius))


def cmd_evaluate(args) -> None:
    report = _score(io.load_labels(args.pred), io.load_labels(args.gt), args.radius)
    if args.out:
        io.write_json(args.out, report.to_dict())
    print(report.table())


def cmd_visualize(args) -> None:
    field = io.load_field(args.field)
    save_png(render_rgb(field, fit_pca(field)), args.out)


def cmd_pipeline(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt = voronoi_labels(args.height, args.width, args.objects, args.seed)
    io.save_labels(out / "gt.npy", gt)
    result = fit_embeddings(gt, _fit_config(args))
    _check_finite("field", result.field)
    io.save_field(out / "field.npy", result.field)
    io.write_json(out / "train_log.json", _fit_log(result))
    config = _seg_config(args)
    graph = build_metric_graph(result.field, nearest_neighbor_offsets(args.connectivity))
    seg = postprocess(connected_components(graph, config), config)
    io.save_labels(out / "segmentation.npy", seg)
    report = _score(seg, gt, args.radius)
    io.write_json(out / "report.json", {
        "loss": result.report.to_dict(),
        "converged": result.converged,
        "iterations": result.iterations,
        "eval": report.to_dict(),
    })
    print(report.table())


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=32, help="embedding dimension (default 32)")
    p.add_argument("--iters", type=int, default=2000, help="maximum Adam iterations (default 2000)")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default 0.001)")
    p.add_argument("--delta-d", type=float, default=1.5, help="hinge margin delta_d (default 1.5)")
    p.add_argument("--gamma", type=float, default=0.001, help="mean-norm weight (default 0.001)")
    p.add_argument("--init-scale", type=float, default=0.1, help="initial Gaussian scale (default 0.1)")
    p.add_argument("--seed", type=int, default=0)


def _add_seg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=1.5,
                   help="join metric edges with distance below this (default 1.5)")
    p.add_argument("--affinity-threshold", type=float, default=0.5,
                   help="join affinity edges above this (default 0.5)")
    p.add_argument("--min-size", type=int, default=1, help="segments this small become background (default 1)")
    p.add_argument("--max-dilation", type=int, default=10, help="dilation rounds (default 10)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    p.add_argument("--raw", action="store_true", help="skip small-segment removal and dilation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricseg",
        description="Metric-graph instance segmentation: fit, segment, project, evaluate.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a random Voronoi label map")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--objects", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("fixture", cmd_fixture, "write the two-object inconsistent affinity graph")
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--merge-fraction", type=float, default=0.5)
    p.add_argument("--radius", type=int, default=8, help="longest sampled offset (default 8)")
    p.add_argument("--out", required=True)

    p = add("fit", cmd_fit, "optimize per-pixel embeddings for a label map")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="output vector field (.npy)")
    p.add_argument("--log", help="training log (.json)")
    _add_fit_flags(p)

    p = add("segment-cc", cmd_segment_cc, "connected components on a vector field or affinity/metric graph")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--field")
    src.add_argument("--graph")
    p.add_argument("--out", required=True)
    _add_seg_flags(p)

    p = add("segment-seed", cmd_segment_seed, "nearest ground-truth mean assignment")
    p.add_argument("--field", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    _add_seg_flags(p)

    p = add("project", cmd_project, "fit a metric graph to an affinity graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--radius", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)

    p = add("evaluate", cmd_evaluate, "Rand F-score and VI against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--radius", type=int, default=2, help="boundary exclusion radius (default 2)")
    p.add_argument("--out", help="report (.json)")

    p = add("visualize", cmd_visualize, "PCA-to-RGB rendering of a vector field")
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True, help="output PNG")

    p = add("pipeline", cmd_pipeline, "synth -> fit -> segment-cc -> evaluate")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--objects", type=int, default=8)
    p.add_argument("--radius", type=int, default=2, help="boundary exclusion radius (default 2)")
    p.add_argument("--out-dir", required=True)
    _add_fit_flags(p)
    _add_seg_flags(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    except io.FormatError as exc:
        log.error("%s", exc)
        return EXIT_FORMAT
    except FloatingPointError as exc:
        log.error("%s", exc)
        return EXIT_NONFINITE
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except Exception:  # noqa: BLE001
        log.exception("unexpected failure")
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
