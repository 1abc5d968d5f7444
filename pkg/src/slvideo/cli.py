"""Command-line interface.

Pre-processing commands (ingest, extract-frames, index) take explicit
paths; query commands (search, similar, eval, serve) read the JSON
config file given via --config or $SLVIDEO_CONFIG.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .annotations import AnnotationStore
from .config import load_config
from .embedder import make_encoder
from .errors import SlvideoError
from .evaluation import Evaluator, load_queries, results_csv, summary_csv, text_table
from .pipeline import (
    build_index_from_frames,
    build_runtime,
    extract_corpus_frames,
    ingest_corpus,
)
from .query import SearchMode, SearchRequest
from .segmenter import DEFAULT_EXTRACT_TEMPLATE, PreprocessPipeline

CLI_MODES = {
    "text-plain": SearchMode.TEXT_PLAIN,
    "frame-base": SearchMode.FRAME_BASE,
    "frame-average": SearchMode.FRAME_AVERAGE,
    "frame-best": SearchMode.FRAME_BEST,
    "frame-summed": SearchMode.FRAME_SUMMED,
    "frame-all": SearchMode.FRAME_ALL,
    "annotation": SearchMode.ANNOTATION,
    "combined": SearchMode.COMBINED,
}


def _print_results(results, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps([asdict(r) for r in results],
                         ensure_ascii=False, indent=2))
        return
    if not results:
        print("no results")
        return
    for r in results:
        print(f"{r.rank:>3}  {r.score:.6f}  {r.doc_id}  "
              f"[{r.start_ms}..{r.end_ms}ms]  {r.gloss}")


def cmd_ingest(args) -> int:
    count = ingest_corpus(args.eaf_dir, args.video_dir, args.tier_config,
                          args.out)
    print(f"ingested {count} videos -> {args.out}")
    return 0


def cmd_extract_frames(args) -> int:
    store = AnnotationStore.load(args.corpus)
    count = extract_corpus_frames(
        store,
        args.frames_dir,
        extract_template=args.extract_template,
        preprocess=PreprocessPipeline(steps=tuple(args.preprocess)),
        workers=args.workers,
    )
    print(f"extracted {count} frames -> {args.frames_dir}")
    return 0


def cmd_index(args) -> int:
    store = AnnotationStore.load(args.corpus)
    encoder = make_encoder(args.encoder, args.endpoint, args.dim)
    index, skipped = build_index_from_frames(store, args.frames_dir, encoder)
    index.persist(args.out)
    print(f"indexed {index.doc_count} signs -> {args.out}")
    if skipped:
        print(f"skipped {len(skipped)} signs without frames", file=sys.stderr)
    return 0


def cmd_search(args) -> int:
    runtime = build_runtime(load_config(args.config))
    req = SearchRequest(
        mode=CLI_MODES[args.mode],
        query_text=args.query,
        k=args.k or runtime.config.default_k,
    )
    _print_results(runtime.engine.search_text(req), args.format)
    return 0


def cmd_similar(args) -> int:
    runtime = build_runtime(load_config(args.config))
    results = runtime.engine.search_similar(
        args.doc_id, field=args.field, k=args.k or runtime.config.default_k)
    _print_results(results, args.format)
    return 0


def cmd_eval(args) -> int:
    runtime = build_runtime(load_config(args.config))
    evaluator = Evaluator(
        runtime.engine,
        k=args.k or runtime.config.default_k,
        median_options=args.median_options or runtime.config.median_options,
    )
    queries = load_queries(Path(args.queries).read_bytes())
    report = evaluator.run_report(queries)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "results.csv").write_text(results_csv(report), "utf-8")
        (out_dir / "summary.csv").write_text(summary_csv(report), "utf-8")
        print(f"wrote {out_dir / 'results.csv'} and {out_dir / 'summary.csv'}")
    print(text_table(report), end="")
    return 0


def cmd_export_eaf(args) -> int:
    store = AnnotationStore.load(args.corpus)
    payload = store.export_eaf(args.video_id)
    Path(args.out).write_bytes(payload)
    print(f"exported {args.video_id} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(load_config(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slvideo",
        description="Sign-language video retrieval: ingest, index, search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse EAF files into a corpus dir")
    p.add_argument("--eaf-dir", required=True)
    p.add_argument("--video-dir", required=True,
                   help="directory holding media plus videos.json manifest")
    p.add_argument("--tier-config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract-frames",
                       help="extract keyframes for every facial sign")
    p.add_argument("--corpus", required=True)
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--extract-template", default=DEFAULT_EXTRACT_TEMPLATE,
                   help="command template with {media} {timestamp_ms} {out}")
    p.add_argument("--preprocess", action="append", default=[],
                   help="image-to-image step template with {in} {out}; repeatable")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_extract_frames)

    p = sub.add_parser("index", help="embed extracted frames and build the index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", choices=["mock", "remote"], default="mock")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--dim", type=int, default=512)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="text or embedding search")
    p.add_argument("--mode", choices=sorted(CLI_MODES), required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("similar", help="thesaurus: segments similar to one")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--field", default="all")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_similar)

    p = sub.add_parser("eval", help="precision/recall/F1 over gloss queries")
    p.add_argument("--queries", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--median-options", choices=["seven", "six"], default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-eaf", help="write a video's annotations as EAF")
    p.add_argument("--corpus", required=True)
    p.add_argument("--video-id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_eaf)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SlvideoError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
