"""Command-line entry point mirroring the service pipeline.

Commands: mine, embed, stats, generate, lint, render, export, serve.
Exit codes: 0 success, 2 usage error, 3 backend failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import AppConfig, load_config
from .corpus import FetchConfig, dedupe_and_filter, fetch_raw, load_cached_dump
from .errors import (
    CardforgeError,
    ConfigurationError,
    GenerationFailed,
    RetriableError,
    TemplateError,
)
from .lint import compute_corpus_stats, lint_card_dict, load_corpus_stats
from .model import CardSpec, canonical_dict
from .pipeline import (
    Library,
    attempt_to_dict,
    image_cfg_from_dict,
    make_chat_backend,
    make_diffusion_backend,
    make_embed_backend,
    make_lint_config,
    params_from_dict,
    run_attempt,
    spec_from_dict,
)
from .report import write_ratings_report, write_stats_report
from .store import Store, new_id
from .synth import (
    export_cardmaker_json,
    load_cardmaker_map,
    load_render_template,
    render_card,
    write_cardmaker_json,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardforge",
        description="Trading-card generation engine: corpus mining, retrieval, "
                    "mechanics completion, artwork, rendering, and linting.",
    )
    parser.add_argument("--config", help="path to the config JSON "
                        "(default: $CARDFORGE_CONFIG or built-in defaults)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="fetch the card database and report the "
                          "deduplicated corpus size")
    mine.add_argument("--offline", action="store_true",
                      help="replay the cache/fixture instead of the live API")

    embed = sub.add_parser("embed", help="build (or refresh) the embedding index")
    embed.add_argument("--rebuild", action="store_true",
                       help="force a rebuild even when the index is up to date")

    stats = sub.add_parser("stats", help="compute corpus statistics")
    stats.add_argument("--report-dir",
                       help="also write CSV tables and figures to this directory")
    stats.add_argument("--ratings", action="store_true",
                       help="report rating aggregates from the store instead")

    gen = sub.add_parser("generate", help="generate one card (or a batch)")
    gen.add_argument("--name", help="creature name")
    gen.add_argument("--type", dest="types", action="append",
                     help="energy type (repeat for dual-type)")
    gen.add_argument("--dex", help="the descriptive dex entry (flavor text)")
    gen.add_argument("--seed", type=int, default=None,
                     help="seed for both model backends (default: random, printed)")
    gen.add_argument("--k", type=int, default=None, help="retrieval context size")
    gen.add_argument("--temperature", type=float, default=None)
    gen.add_argument("--out-dir", default="out", help="output root (default: out/)")
    gen.add_argument("--batch", help="JSON-lines file of specs to run in parallel")
    gen.add_argument("--workers", type=int, default=4, help="batch parallelism")

    lint = sub.add_parser("lint", help="lint a card JSON file")
    lint.add_argument("card_json", help="path to a card JSON document")
    lint.add_argument("--out", help="write the JSON report here")

    render = sub.add_parser("render", help="render a card JSON + artwork to PNG")
    render.add_argument("card_json")
    render.add_argument("art_png")
    render.add_argument("-o", "--out", default="card.png")

    export = sub.add_parser("export", help="export cardmaker-compatible JSON")
    export.add_argument("card_json")
    export.add_argument("--artwork", default="", help="artwork path/URL to embed")
    export.add_argument("-o", "--out", default="cardmaker.json")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8320)

    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_mine(args: argparse.Namespace, config: AppConfig) -> int:
    api = config.section("card_api")
    cache_path = config.path("cache_path")
    fetch_config = FetchConfig(
        endpoint=api.get("endpoint", FetchConfig.endpoint),
        page_size=int(api.get("page_size", 250)),
        cache_path=cache_path,
        offline=args.offline,
    )
    if args.offline and not cache_path.exists():
        fixture = config.path("fixture_path")
        print(f"no cache yet; replaying committed fixture {fixture}")
        dump = load_cached_dump(fixture)
    else:
        dump = fetch_raw(fetch_config)
    records = dedupe_and_filter(dump)
    print(f"{len(dump.cards)} raw cards -> {len(records)} unique basic creatures")
    return EXIT_OK


def cmd_embed(args: argparse.Namespace, config: AppConfig) -> int:
    backend = make_embed_backend(config)
    index_path = config.path("index_path")
    before = index_path.stat().st_mtime if index_path.exists() else None
    library = Library.load(config, backend, rebuild=args.rebuild)
    after = index_path.stat().st_mtime
    if before is not None and before == after:
        print(f"index up to date ({len(library.index)} entries, "
              f"model {library.index.model_id}); nothing to do")
    else:
        print(f"index written: {index_path} ({len(library.index)} entries, "
              f"model {library.index.model_id})")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, config: AppConfig) -> int:
    if args.ratings:
        from .service import _rating_means

        store = Store(config.path("store_dir"))
        aggregate = _rating_means(store)
        print(json.dumps(aggregate, indent=2))
        if args.report_dir:
            written = write_ratings_report(aggregate, Path(args.report_dir))
            for path in written:
                print(f"wrote {path}")
        return EXIT_OK

    backend = make_embed_backend(config)
    library = Library.load(config, backend)
    stats = library.stats
    print(f"cards: {stats.card_count}")
    print(f"hp stats cover {len(stats.hp_by_type)} types; "
          f"damage buckets: {sorted(stats.damage_per_cost)}; "
          f"vocabulary: {len(stats.mechanic_vocabulary)} n-grams")
    print(f"stats persisted at {config.path('stats_path')}")
    if args.report_dir:
        written = write_stats_report(stats, Path(args.report_dir))
        for path in written:
            print(f"wrote {path}")
    return EXIT_OK


def _generate_one(spec_data: dict, args: argparse.Namespace, config: AppConfig,
                  library: Library, backends: dict, session_id: str,
                  out_root: Path) -> Path:
    import random

    spec = spec_from_dict(spec_data)
    seed = args.seed
    if seed is None:
        seed = random.SystemRandom().getrandbits(32)
        print(f"seed not given; using {seed}", file=sys.stderr)

    params_data = {"seed": seed}
    if args.temperature is not None:
        params_data["temperature"] = args.temperature
    if args.k is not None:
        params_data["retrieval_k"] = args.k
    params = params_from_dict(params_data, config)
    image_cfg = image_cfg_from_dict({"seed": seed}, config)

    artifacts = run_attempt(
        spec, params, image_cfg, library, backends["chat"], backends["embed"],
        backends["diffusion"], config.path("workflow_template"),
        backends["render_template"], make_lint_config(config),
    )

    attempt_id = new_id("attempt")
    out_dir = out_root / session_id / attempt_id
    out_dir.mkdir(parents=True, exist_ok=True)

    attempt = attempt_to_dict(
        artifacts, attempt_id=attempt_id, session_id=session_id,
        adaptation="initial", spec=spec, params=params, image_cfg=image_cfg,
        art_digest="", card_digest="", created_at="",
    )
    card_doc = dict(attempt["card"])
    (out_dir / "card.json").write_text(
        json.dumps(card_doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    (out_dir / "art.png").write_bytes(artifacts.art.image_bytes)
    (out_dir / "card.png").write_bytes(artifacts.render.png_bytes)
    (out_dir / "lint.json").write_text(
        json.dumps(artifacts.lint.to_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
    (out_dir / "attempt.json").write_text(
        json.dumps(attempt, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    timings = artifacts.timings
    print(f"{spec.name}: ok "
          f"(repairs {artifacts.mech.repair_count}, "
          f"lint {'pass' if artifacts.lint.passed else 'FINDINGS'}, "
          f"backend {timings.backend_ms:.0f} ms, "
          f"overhead {timings.overhead_ms:.0f} ms) -> {out_dir}")
    return out_dir


def cmd_generate(args: argparse.Namespace, config: AppConfig) -> int:
    if args.batch:
        specs = []
        with open(args.batch, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    specs.append(json.loads(line))
    else:
        if not (args.name and args.types and args.dex):
            print("generate needs --name, --type, and --dex (or --batch)",
                  file=sys.stderr)
            return EXIT_USAGE
        specs = [{"name": args.name, "flavorText": args.dex, "types": args.types}]

    backends = {
        "embed": make_embed_backend(config),
        "chat": make_chat_backend(config),
        "diffusion": make_diffusion_backend(config),
        "render_template": load_render_template(config.path("assets_dir")),
    }
    library = Library.load(config, backends["embed"])
    session_id = new_id("session")
    out_root = Path(args.out_dir)

    if len(specs) == 1:
        _generate_one(specs[0], args, config, library, backends, session_id, out_root)
        return EXIT_OK

    # Batch: run in parallel, print results in input order.
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        futures = [
            pool.submit(_generate_one, spec_data, args, config, library,
                        backends, session_id, out_root)
            for spec_data in specs
        ]
        failures = 0
        for spec_data, future in zip(specs, futures):
            try:
                future.result()
            except Exception as exc:
                failures += 1
                print(f"{spec_data.get('name', '?')}: FAILED: {exc}", file=sys.stderr)
    return EXIT_OK if failures == 0 else EXIT_BACKEND


def cmd_lint(args: argparse.Namespace, config: AppConfig) -> int:
    data = json.loads(Path(args.card_json).read_text(encoding="utf-8"))
    stats_path = config.path("stats_path")
    if stats_path.exists():
        stats = load_corpus_stats(stats_path)
    else:
        from .corpus import load_fixture_corpus

        lint_cfg = config.section("lint")
        stats = compute_corpus_stats(
            load_fixture_corpus(config.path("fixture_path")),
            vocab_min_count=int(lint_cfg.get("vocab_min_count", 3)))
    report = lint_card_dict(data, stats, make_lint_config(config))

    print(f"card: {data.get('name', report.card_id)}")
    print(f"passed: {report.passed}")
    if report.findings:
        width = max(len(f.rule) for f in report.findings)
        for f in report.findings:
            score = f" (z={f.score:+.2f})" if f.score is not None and "IMBAL" in f.rule \
                else (f" (score={f.score})" if f.score is not None else "")
            print(f"  {f.severity.upper():7s} {f.rule:<{width}s} {f.locus}: "
                  f"{f.detail}{score}")
    else:
        print("  no findings")
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
    return EXIT_OK


def cmd_render(args: argparse.Namespace, config: AppConfig) -> int:
    from .model import record_from_dict

    data = json.loads(Path(args.card_json).read_text(encoding="utf-8"))
    record = record_from_dict(data, id=data.get("id", ""))
    art = Path(args.art_png).read_bytes()
    template = load_render_template(config.path("assets_dir"))
    rendered = render_card(record, art, template)
    Path(args.out).write_bytes(rendered.png_bytes)
    for warning in rendered.warnings:
        print(f"warning [{warning.box}]: {warning.message}", file=sys.stderr)
    print(f"wrote {args.out} ({len(rendered.png_bytes)} bytes, "
          f"template v{rendered.template_version})")
    return EXIT_OK


def cmd_export(args: argparse.Namespace, config: AppConfig) -> int:
    from .model import record_from_dict

    data = json.loads(Path(args.card_json).read_text(encoding="utf-8"))
    record = record_from_dict(data, id=data.get("id", ""))
    mapping = load_cardmaker_map(config.path("cardmaker_map"))
    doc = export_cardmaker_json(record, args.artwork, mapping)
    write_cardmaker_json(doc, Path(args.out))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, config: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


_COMMANDS = {
    "mine": cmd_mine,
    "embed": cmd_embed,
    "stats": cmd_stats,
    "generate": cmd_generate,
    "lint": cmd_lint,
    "render": cmd_render,
    "export": cmd_export,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )

    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RetriableError, GenerationFailed) as exc:
        stage = args.command
        print(f"backend failure during {stage}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except TemplateError as exc:
        print(f"template error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except CardforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
