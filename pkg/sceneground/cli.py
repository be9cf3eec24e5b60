"""
Command-line entry point: ground, eval, stitch and bench subcommands.
"""
import argparse
import asyncio
import json
import logging
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from sceneground import __version__
from sceneground.agent.backends import build_backend
from sceneground.bench import (
    generate_suite,
    run_layout_sweep,
    suite_manifest,
    time_requests,
    truth_map,
    write_sweep_csv,
    write_suite_images,
    write_timing_csv,
)
from sceneground.config import PipelineConfig, load_config
from sceneground.errors import BenchError, ConfigError, EvaluationError, IngestionError, SceneGroundError
from sceneground.evaluation import EvalRecord, accuracy_report, format_report_table, mask_iou, nr3d_accuracy, nr3d_match
from sceneground.pipeline import prepare_scenes, run_batch
from sceneground.scene.loader import load_queries, read_mask_png
from sceneground.scene.models import Aabb3, Query
from sceneground.stitching import STRATEGIES, plan_layouts, stitch_frames
from sceneground.stitching.planner import Layout
from sceneground.stitching.render import plan_manifest
from sceneground.storage import LocalResultStore, read_json, read_results_file, write_json

logger = logging.getLogger("sceneground")

MANIFEST_PACKAGES = ("numpy", "scipy", "pillow", "pydantic", "pydantic-settings", "langgraph", "aiohttp", "httpx", "fastapi")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


# =============================================================================
# SHARED HELPERS
# =============================================================================

def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def package_versions() -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {}
    for name in MANIFEST_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def run_manifest(command: str, config: PipelineConfig, argv: Sequence[str]) -> Dict[str, Any]:
    return {
        "command": command,
        "version": __version__,
        "argv": list(argv),
        "seed": config.seed,
        "config": config.snapshot(),
        "versions": package_versions(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def config_from_args(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Config file < CLI flags; unset flags leave lower layers alone."""
    overrides: Dict[str, Any] = {"jobs": args.jobs, "seed": args.seed}
    if extra:
        overrides.update(extra)
    config = load_config(Path(args.config) if args.config else None, overrides)
    if config.debug:
        logging.getLogger().setLevel(logging.DEBUG)
    return config


def parse_layouts(text: str) -> List[Layout]:
    """"4x1,2x4" -> [Layout(4, 1), Layout(2, 4)]."""
    layouts = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        try:
            rows, cols = (int(v) for v in part.split("x"))
            layouts.append(Layout(rows=rows, cols=cols))
        except ValueError as e:
            raise ConfigError(f"invalid layout {part!r}; expected ROWSxCOLS") from e
    if not layouts:
        raise ConfigError("no layouts given")
    return layouts


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# =============================================================================
# GROUND
# =============================================================================

async def _ground(args: argparse.Namespace, config: PipelineConfig, argv: Sequence[str]) -> int:
    queries = load_queries(args.queries)
    if not queries:
        raise IngestionError("query file holds no queries", args.queries)
    scenes = prepare_scenes(args.scene_root, queries, config.frame_stride)

    backend = build_backend(config.backend)
    store = LocalResultStore(args.out)
    await store.initialize()
    try:
        results = await run_batch(scenes, queries, config, backend, store)
    finally:
        await backend.close()
        await store.write_results_index()
        await store.save_manifest(run_manifest("ground", config, argv))
        await store.close()

    succeeded = sum(1 for r in results if r.status == "success")
    logger.info("Grounded %d/%d queries; outputs in %s", succeeded, len(results), args.out)
    return 0


def cmd_ground(args: argparse.Namespace, argv: Sequence[str] = ()) -> int:
    extra: Dict[str, Any] = {}
    if args.script:
        extra["backend"] = {"kind": "scripted", "script_path": args.script}
    if args.fixtures:
        extra["perception"] = {"kind": "fixture", "fixtures_root": args.fixtures}
    config = config_from_args(args, extra)
    return asyncio.run(_ground(args, config, argv))


# =============================================================================
# EVAL
# =============================================================================

def _results_by_id(results: List[Dict[str, Any]]) -> Dict[str, Dict[str, Any]]:
    if not results:
        raise EvaluationError("results are empty")
    return {str(r["query_id"]): r for r in results}


def _check_ids(result_ids: Sequence[str], gt_ids: Sequence[str]) -> None:
    missing = sorted(set(gt_ids) - set(result_ids))
    unknown = sorted(set(result_ids) - set(gt_ids))
    problems = []
    if missing:
        problems.append(f"no result for {', '.join(missing)}")
    if unknown:
        problems.append(f"no ground truth for {', '.join(unknown)}")
    if problems:
        raise EvaluationError("results and ground truth disagree: " + "; ".join(problems))


def _predicted_box(result: Dict[str, Any]) -> Optional[Aabb3]:
    if result.get("status") != "success" or not result.get("box"):
        return None
    return Aabb3.from_list(result["box"])


def _mask_score(query: Query, result: Dict[str, Any], masks_dir: Path) -> float:
    if not query.gt_mask_per_frame:
        raise EvaluationError(f"query {query.query_id} has no gt_masks for --mask-iou")
    frame_id = result.get("target_frame_id")
    mask_path = masks_dir / f"{query.query_id}.png"
    if result.get("status") != "success" or frame_id not in query.gt_mask_per_frame or not mask_path.is_file():
        return 0.0
    pred = read_mask_png(mask_path, frame_id)
    try:
        return mask_iou(pred, query.gt_mask_per_frame[frame_id])
    except ValueError as e:
        raise EvaluationError(f"query {query.query_id}: {e}") from e


def _eval_nr3d(args: argparse.Namespace, results: Dict[str, Dict[str, Any]], out: Path) -> None:
    targets = read_json(Path(args.nr3d))
    _check_ids(list(results), list(targets))

    matches = []
    for query_id in sorted(targets):
        entry = targets[query_id]
        boxes = [Aabb3.from_list(b) for b in entry["boxes"]]
        pred = _predicted_box(results[query_id])
        matches.append((nr3d_match(pred, boxes) if pred is not None else None, int(entry["target_index"])))

    accuracy = nr3d_accuracy(matches)
    write_json(out / "eval" / "nr3d.json", {"count": len(matches), "accuracy": accuracy})
    print(f"Nr3D top-1 accuracy: {accuracy:.1f} ({len(matches)} queries)")


def _eval_boxes(args: argparse.Namespace, results: Dict[str, Dict[str, Any]], out: Path) -> None:
    if not args.queries:
        raise ConfigError("eval needs --queries (or --nr3d)")

    queries = {q.query_id: q for q in load_queries(args.queries)}
    _check_ids(list(results), list(queries))

    results_path = Path(args.results)
    masks_dir = (results_path if results_path.is_dir() else results_path.parent) / "masks"

    records = []
    for query_id in sorted(queries):
        query = queries[query_id]
        if query.gt_box is None:
            raise EvaluationError(f"query {query_id} has no gt_box")
        result = results[query_id]
        score = _mask_score(query, result, masks_dir) if args.mask_iou else None
        records.append(EvalRecord.score(query_id, _predicted_box(result), query.gt_box, query.splits, score))

    report = accuracy_report(records)
    table = format_report_table(report)
    write_json(out / "eval" / "report.json", report.model_dump(mode="json"))
    _write_text(
        out / "eval" / "records.jsonl",
        "".join(json.dumps(r.model_dump(mode="json"), sort_keys=True) + "\n" for r in records),
    )
    _write_text(out / "eval" / "report.txt", table)
    print(table, end="")


def cmd_eval(args: argparse.Namespace, argv: Sequence[str] = ()) -> int:
    config = config_from_args(args)
    out = Path(args.out)
    results = _results_by_id(read_results_file(args.results))
    if args.nr3d:
        _eval_nr3d(args, results, out)
    else:
        _eval_boxes(args, results, out)
    # out may be the ground run directory; its manifest.json stays untouched.
    write_json(out / "eval" / "manifest.json", run_manifest("eval", config, argv))
    return 0


# =============================================================================
# STITCH
# =============================================================================

def cmd_stitch(args: argparse.Namespace, argv: Sequence[str] = ()) -> int:
    config = config_from_args(args, {"stitching": {"strategy": args.strategy}})
    source = Path(args.input)
    if not source.is_dir():
        raise IngestionError("stitch input is not a directory", source)
    paths = sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise IngestionError("no images to stitch", source)

    images: Dict[str, np.ndarray] = {}
    for path in paths:
        try:
            with Image.open(path) as img:
                images[path.stem] = np.asarray(img.convert("RGB"))
        except OSError as e:
            raise IngestionError(f"unreadable image ({e})", path) from e

    soft_limit = args.soft_limit if args.soft_limit is not None else config.L
    frame_ids = list(images)
    strategy = config.stitching.strategy
    plan = plan_layouts(len(frame_ids), soft_limit, frame_ids, strategy=strategy)
    stitched = stitch_frames(images, plan, tuple(config.cell_size))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for index, composite in enumerate(stitched):
        name = f"stitched_{index:02d}_{composite.layout.rows}x{composite.layout.cols}.png"
        Image.fromarray(composite.raster).save(out / name)
        files.append(name)

    manifest = plan_manifest(stitched, files)
    manifest["soft_limit"] = soft_limit
    manifest["soft_limit_exceeded"] = plan.soft_limit_exceeded
    manifest["strategy"] = strategy
    manifest["layout_counts"] = [[layout.rows, layout.cols, count] for layout, count in plan.layout_counts()]
    write_json(out / "plan.json", manifest)
    write_json(out / "manifest.json", run_manifest("stitch", config, argv))
    logger.info("Stitched %d frames into %d images (%s)", len(frame_ids), len(stitched), out)
    return 0


# =============================================================================
# BENCH
# =============================================================================

async def _bench(args: argparse.Namespace, config: PipelineConfig, argv: Sequence[str]) -> int:
    bench = config.bench
    out = Path(args.out)
    suite = generate_suite(
        args.count,
        config.seed,
        image_source=args.image_source,
        image_size=tuple(bench.image_size),
        block_fraction=bench.block_fraction,
    )
    write_json(out / "suite.json", suite_manifest(suite))
    if args.write_images:
        write_suite_images(suite, out / "suite")

    backend = build_backend(config.backend, truth=truth_map(suite))
    failed = False
    try:
        if args.timing:
            rows = await time_requests(suite[0].image, args.copies, args.trials, backend, bench.timeout_s)
            write_timing_csv(rows, out / "timing.csv")
            failed = all(r.mean_s is None for r in rows)
        else:
            layouts = parse_layouts(args.layouts) if args.layouts else [Layout(rows=r, cols=c) for r, c in bench.layouts]
            rows = await run_layout_sweep(
                suite,
                layouts,
                bench.images_per_request,
                backend,
                config.backend.max_in_flight,
                bench.timeout_s,
                tuple(config.cell_size),
            )
            write_sweep_csv(rows, out / "sweep.csv")
            failed = all(r.accuracy is None for r in rows)
    finally:
        await backend.close()

    write_json(out / "manifest.json", run_manifest("bench", config, argv))
    if failed:
        raise BenchError("every benchmark request failed")
    return 0


def cmd_bench(args: argparse.Namespace, argv: Sequence[str] = ()) -> int:
    extra: Dict[str, Any] = {}
    if args.backend:
        extra["backend"] = {"kind": args.backend}
    if args.images_per_request is not None:
        extra["bench"] = {"images_per_request": args.images_per_request}
    config = config_from_args(args, extra)
    return asyncio.run(_bench(args, config, argv))


# =============================================================================
# PARSER
# =============================================================================

def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=default(None), help="TOML or JSON config file")
    parser.add_argument("--out", default=default("out"), help="output directory")
    parser.add_argument("--jobs", type=int, default=default(None), help="queries in flight")
    parser.add_argument("--seed", type=int, default=default(None))
    parser.add_argument("--log-level", default=default("INFO"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sceneground", description="Zero-shot 3D visual grounding from posed RGB-D frames")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)

    sub = parser.add_subparsers(dest="command", required=True)

    ground = sub.add_parser("ground", parents=[common], help="ground queries to 3D boxes")
    ground.add_argument("--scene-root", required=True)
    ground.add_argument("--queries", required=True, help="JSON-lines query file")
    ground.add_argument("--script", help="scripted VLM replies (JSON)")
    ground.add_argument("--fixtures", help="perception fixtures root")
    ground.set_defaults(handler=cmd_ground)

    evaluate = sub.add_parser("eval", parents=[common], help="score grounding results")
    evaluate.add_argument("--results", required=True, help="results.jsonl, a result JSON or an output directory")
    evaluate.add_argument("--queries", help="JSON-lines query file with ground truth")
    evaluate.add_argument("--mask-iou", action="store_true", help="also score the anchor 2D masks")
    evaluate.add_argument("--nr3d", help="JSON of {query_id: {boxes, target_index}} for top-1 matching")
    evaluate.set_defaults(handler=cmd_eval)

    stitch_cmd = sub.add_parser("stitch", parents=[common], help="plan and render stitched composites")
    stitch_cmd.add_argument("--input", required=True, help="directory of frames named by frame id")
    stitch_cmd.add_argument("--soft-limit", type=int, default=None)
    stitch_cmd.add_argument("--strategy", choices=STRATEGIES, help="layout strategy (default: stitching.strategy)")
    stitch_cmd.set_defaults(handler=cmd_stitch)

    bench = sub.add_parser("bench", parents=[common], help="visual-retrieval benchmark")
    bench.add_argument("--layouts", help="comma-separated ROWSxCOLS list, e.g. 4x1,2x4")
    bench.add_argument("--images-per-request", type=int, default=None)
    bench.add_argument("--count", type=int, default=1000)
    bench.add_argument("--backend", choices=("http", "scripted", "echo"))
    bench.add_argument("--timing", action="store_true", help="time requests instead of sweeping layouts")
    bench.add_argument("--copies", type=int, default=30)
    bench.add_argument("--trials", type=int, default=10)
    bench.add_argument("--image-source", help="directory of base images (default: synthetic)")
    bench.add_argument("--write-images", action="store_true", help="also save every suite image under suite/")
    bench.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args, argv)
    except SceneGroundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
