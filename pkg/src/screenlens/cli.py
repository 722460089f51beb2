"""Command-line interface: extract, evaluate, index, query, serve.

Options can come from a flat ``key = value`` config file (--config); explicit
flags override the file, and the SCREENLENS_OCR_CMD environment variable
overrides both for the engine command. Exit codes: 0 success, 1 fatal
configuration error, 2 completed with per-item failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .imaging import SegmentationParams
from .index import (
    DEFAULT_B,
    DEFAULT_CATEGORY_BOOST,
    DEFAULT_K1,
    CorruptIndex,
    InvertedIndex,
)
from .ocr import OcrEngineConfig
from .pipeline import (
    DEFAULT_FILENAME_PATTERN,
    FatalConfig,
    PipelineConfig,
    cmd_evaluate,
    cmd_extract,
    cmd_index,
    cmd_query,
    render_table,
    report_to_json,
)

log = logging.getLogger(__name__)

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def load_config_file(path: Path) -> dict[str, str]:
    """Flat key = value lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FatalConfig(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _as_bool(raw: str, key: str) -> bool:
    low = raw.lower()
    if low in _BOOL_TRUE:
        return True
    if low in _BOOL_FALSE:
        return False
    raise FatalConfig(f"config key {key}: expected a boolean, got {raw!r}")


def _merge(args: argparse.Namespace, keys: dict[str, type]) -> dict:
    """Config-file values, overridden by any explicitly passed flags."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = load_config_file(Path(args.config))
    merged = {}
    for key, cast in keys.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in file_values:
            raw = file_values[key]
            if cast is bool:
                merged[key] = _as_bool(raw, key)
            else:
                try:
                    merged[key] = cast(raw)
                except ValueError as exc:
                    raise FatalConfig(f"config key {key}: {exc}") from exc
    return merged


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="screenlens")
    sub = parser.add_subparsers(dest="verb", required=True)

    extract = sub.add_parser("extract", help="segment + recognize a directory of screenshots")
    extract.add_argument("--config", help="flat key = value config file")
    extract.add_argument("--input", help="directory of PNG/JPEG screenshots")
    extract.add_argument("--output", help="directory for .txt files and the XML batch")
    extract.add_argument("--engine-cmd", dest="engine_cmd",
                         help="OCR command template with {input} and {output}")
    extract.add_argument("--engine-timeout", dest="engine_timeout", type=float)
    extract.add_argument("--no-banner-strip", dest="no_banner_strip", action="store_true",
                         help="keep recognized status-bar lines")
    extract.add_argument("--parallelism", type=int)
    extract.add_argument("--filename-pattern", dest="filename_pattern")
    extract.add_argument("--kernel-width", dest="kernel_width", type=int)
    extract.add_argument("--kernel-height", dest="kernel_height", type=int)
    extract.add_argument("--iterations", type=int)
    extract.add_argument("--min-area", dest="min_area", type=int)
    extract.add_argument("--min-width", dest="min_width", type=int)
    extract.add_argument("--min-height", dest="min_height", type=int)

    evaluate = sub.add_parser("evaluate", help="score hypothesis texts against references")
    evaluate.add_argument("hyp_dir", help="directory of recognized .txt files")
    evaluate.add_argument("ref_dir", help="directory of ground-truth .txt files")
    evaluate.add_argument("--json", dest="json_path", help="also write the full report as JSON")

    index = sub.add_parser("index", help="build a search index from an XML batch")
    index.add_argument("xml", help="documents.xml batch")
    index.add_argument("index_path", help="output index file")
    index.add_argument("--config")
    index.add_argument("--k1", type=float)
    index.add_argument("--b", type=float)
    index.add_argument("--boost", type=float)

    query = sub.add_parser("query", help="rank documents for a query")
    query.add_argument("index_path")
    query.add_argument("query")
    query.add_argument("--top-k", dest="top_k", type=int, default=10)
    query.add_argument("--category")
    query.add_argument("--boost", type=float)

    serve = sub.add_parser("serve", help="run the HTTP search API")
    serve.add_argument("--index", required=True, dest="index_path")
    serve.add_argument("--addr", default="127.0.0.1:8080")
    serve.add_argument("--images", help="directory of original screenshots, named <id>.<ext>")
    return parser


def _run_extract(args) -> int:
    merged = _merge(
        args,
        {
            "input": str, "output": str, "engine_cmd": str, "engine_timeout": float,
            "parallelism": int, "filename_pattern": str, "kernel_width": int,
            "kernel_height": int, "iterations": int, "min_area": int,
            "min_width": int, "min_height": int, "banner_strip": bool,
        },
    )
    if "input" not in merged or "output" not in merged:
        raise FatalConfig("extract requires --input and --output (flag or config)")
    seg_defaults = SegmentationParams()
    seg = SegmentationParams(
        kernel_width=merged.get("kernel_width", seg_defaults.kernel_width),
        kernel_height=merged.get("kernel_height", seg_defaults.kernel_height),
        iterations=merged.get("iterations", seg_defaults.iterations),
        min_area=merged.get("min_area", seg_defaults.min_area),
        min_width=merged.get("min_width", seg_defaults.min_width),
        min_height=merged.get("min_height", seg_defaults.min_height),
    )
    engine = None
    if merged.get("engine_cmd"):
        try:
            engine = OcrEngineConfig(
                command=merged["engine_cmd"],
                timeout=merged.get("engine_timeout", 30.0),
            )
        except ValueError as exc:
            raise FatalConfig(str(exc)) from exc
    banner_strip = merged.get("banner_strip", True)
    if args.no_banner_strip:
        banner_strip = False
    cfg = PipelineConfig(
        input_dir=Path(merged["input"]),
        output_dir=Path(merged["output"]),
        segmentation=seg,
        engine=engine,
        banner_strip=banner_strip,
        parallelism=merged.get("parallelism", 1),
        filename_pattern=merged.get("filename_pattern", DEFAULT_FILENAME_PATTERN),
    )
    summary = cmd_extract(cfg)
    print(
        f"processed {summary.images_processed} image(s), "
        f"{summary.segments_recognized} segment(s) recognized, "
        f"{len(summary.failures)} failure(s)"
    )
    print(f"batch written to {summary.xml_path}")
    for name, reason in summary.failures:
        print(f"  failed {name}: {reason}")
    return 2 if summary.failures else 0


def _run_evaluate(args) -> int:
    report, ref_only, hyp_only = cmd_evaluate(Path(args.hyp_dir), Path(args.ref_dir))
    print(render_table(report))
    for stem in ref_only:
        print(f"warning: reference {stem} has no hypothesis")
    for stem in hyp_only:
        print(f"warning: hypothesis {stem} has no reference")
    if args.json_path:
        Path(args.json_path).write_text(
            json.dumps(report_to_json(report), indent=2) + "\n", encoding="utf-8"
        )
    return 2 if report.failures else 0


def _run_index(args) -> int:
    merged = _merge(args, {"k1": float, "b": float, "boost": float})
    stats = cmd_index(
        Path(args.xml),
        Path(args.index_path),
        k1=merged.get("k1"),
        b=merged.get("b"),
        boost=merged.get("boost"),
    )
    print(
        f"indexed {stats.documents} document(s), {stats.distinct_terms} distinct term(s), "
        f"avdl {stats.avdl:.2f}"
    )
    return 0


def _run_query(args) -> int:
    hits = cmd_query(
        Path(args.index_path),
        args.query,
        k=args.top_k,
        category=args.category,
        boost=args.boost,
    )
    if not hits:
        print("0 hits")
        return 0
    for hit in hits:
        fields = ",".join(sorted(hit.matched_fields))
        print(f"{hit.rank:3d}  {hit.score:10.4f}  {hit.doc_id}  [{fields}]")
    return 0


def _run_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        raise FatalConfig(f"--addr must be host:port, got {args.addr!r}")
    app = create_app(InvertedIndex.load(args.index_path), images_dir=args.images)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    runners = {
        "extract": _run_extract,
        "evaluate": _run_evaluate,
        "index": _run_index,
        "query": _run_query,
        "serve": _run_serve,
    }
    try:
        return runners[args.verb](args)
    except (FatalConfig, CorruptIndex, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # schema/duplicate-id errors carry doc context
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
