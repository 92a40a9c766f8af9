"""Command-line entry point: ``spiral-sim <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis
from .agents import LlmBackend, SyntheticBackend
from .model import (
    SCENARIOS, DataFileError, ModelError, ScenarioConfig, SyntheticPolicy,
    backend_kind, load_config, load_movies, load_personas, validate_config,
)
from .simulation import (
    InsufficientPersonas, audit_history, load_record, run_experiment, save_record,
)

log = logging.getLogger("spiral_sim")

EXIT_OK, EXIT_USER, EXIT_PARTIAL = 0, 1, 2


def _err(msg: str) -> None:
    print(f"spiral-sim: error: {msg}", file=sys.stderr)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(base: dict, pairs) -> dict:
    """Apply ``key=value`` pairs; dotted keys reach into nested sections."""
    d = json.loads(json.dumps(base))
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ModelError(f"override {pair!r} is not key=value")
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
        node[parts[-1]] = _parse_value(value)
    return d


def build_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ScenarioConfig()
    d = cfg.to_dict()
    if getattr(args, "scenario", None):
        d["use_history"], d["use_persona"] = SCENARIOS[args.scenario]
    if getattr(args, "seed", None) is not None:
        d["master_seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        d["jobs"] = args.jobs
    if getattr(args, "audit", False):
        d["audit"] = True
    if getattr(args, "movies", None):
        d["movies_path"] = str(args.movies)
    if getattr(args, "personas", None):
        d["personas_path"] = str(args.personas)
    if getattr(args, "backend", None):
        d["backend_id"] = args.backend
    d = apply_overrides(d, getattr(args, "set", None))
    kind = backend_kind(d.get("backend_id", ""))
    if kind not in (None, "llm"):
        d["backend_id"] = f"synthetic:{kind}"
        syn = d.get("synthetic") or {}
        syn["kind"] = kind
        d["synthetic"] = syn
    return ScenarioConfig.from_dict(d)


def make_backend(cfg: ScenarioConfig, audit_path=None):
    if cfg.backend_id == "llm":
        return LlmBackend(cfg.llm, audit_path)
    return SyntheticBackend(cfg.synthetic or SyntheticPolicy(kind=backend_kind(cfg.backend_id)))


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        cfg = build_config(args)
    except (ModelError, TypeError) as exc:
        _err(str(exc))
        return EXIT_USER
    report = validate_config(cfg)
    print(report)
    return EXIT_OK if report.ok else EXIT_USER


def cmd_run(args) -> int:
    try:
        cfg = build_config(args)
    except (ModelError, TypeError) as exc:
        _err(str(exc))
        return EXIT_USER
    report = validate_config(cfg)
    if not report.ok:
        for v in report.violations:
            _err(f"config {v}")
        return EXIT_USER
    if not cfg.movies_path:
        _err("movies_path: no movie file given (--movies)")
        return EXIT_USER
    if cfg.use_persona and not cfg.personas_path:
        _err("personas_path: persona scenarios need --personas")
        return EXIT_USER
    try:
        movies = load_movies(cfg.movies_path)
        personas = load_personas(cfg.personas_path) if cfg.use_persona else []
    except (OSError, DataFileError) as exc:
        _err(str(exc))
        return EXIT_USER

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    backend = make_backend(cfg, out / "audit.jsonl" if cfg.audit else None)
    try:
        record = run_experiment(cfg, movies, personas, backend)
    except InsufficientPersonas as exc:
        _err(str(exc))
        return EXIT_USER
    finally:
        if hasattr(backend, "close"):
            backend.close()
    save_record(record, out)
    done = len(record.movie_sequences)
    print(f"wrote {done} movie sequence(s) to {out}")
    if record.failures:
        for f in record.failures:
            _err(f"movie {f['movie_id']} failed at step {f['step_index']}: {f['error']}")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        record = load_record(args.record_dir)
    except DataFileError as exc:
        _err(f"malformed record: {exc}")
        return EXIT_USER
    run_id = Path(args.record_dir).resolve().name
    out = Path(args.out) / run_id
    include = not args.exclude_warmups
    try:
        reports = analysis.analyze_run(record, include_warmups=include)
        movie_ids = [args.movie] if args.movie else [s.movie_id for s in record.movie_sequences]
        series = {m: analysis.case_series(record, m, include_warmups=include) for m in movie_ids}
    except analysis.UnknownMovie as exc:
        _err(f"unknown movie {exc.args[0]!r}")
        return EXIT_USER
    except ModelError as exc:
        _err(str(exc))
        return EXIT_USER
    analysis.export(out, reports, series=series, fmt="CSV")
    analysis.export(out, reports, fmt="JSON")
    print(f"analysed {len(reports)} movie(s) into {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.analysis_dir)
    try:
        reports = analysis.read_reports_json(src / "reports.json")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _err(f"cannot read {src / 'reports.json'}: {exc}")
        return EXIT_USER
    out = Path(args.out) if args.out else src
    summaries = [analysis.summarize(reports, m, args.levels_max) for m in analysis.METRICS]
    analysis.export(out, reports, summaries=summaries, fmt="CSV")
    analysis.export(out, reports, summaries=summaries, fmt="JSON")

    if args.record:
        try:
            record = load_record(args.record)
            movies = load_movies(args.movies or record.config.movies_path)
            personas = load_personas(args.personas or record.config.personas_path)
            rows, corr = analysis.match_vs_distance(record, movies, personas)
        except (DataFileError, OSError, TypeError) as exc:
            _err(str(exc))
            return EXIT_USER
        except analysis.ScenarioMismatch as exc:
            _err(str(exc))
            return EXIT_USER
        text = analysis._csv_text(
            ("agent_id", "persona_id", "movie_id", "match_score", "mean_rating_distance"),
            ([r.agent_id, r.persona_id, r.movie_id, analysis.fmt_real(r.match_score),
              analysis.fmt_real(r.mean_rating_distance)] for r in rows),
        )
        (out / "semantic_match.csv").write_text(text, encoding="utf-8")
        print(f"semantic match vs rating distance: spearman {analysis.fmt_real(corr)} over {len(rows)} pairs")

    print(f"{'metric':<16}{'n':>5}{'undef':>7}{'median':>12}")
    for s in summaries:
        vals = sorted(v for v in s.values if v is not None)
        med = vals[len(vals) // 2] if vals else None
        print(f"{s.metric_name:<16}{len(s.values):>5}{len(s.values) - len(vals):>7}{analysis.fmt_real(med):>12}")
    return EXIT_OK


def cmd_replay_audit(args) -> int:
    try:
        record = load_record(args.record_dir)
    except DataFileError as exc:
        _err(f"malformed record: {exc}")
        return EXIT_USER
    problems = audit_history(record)
    cfg = record.config
    if not problems and cfg.backend_id != "llm":
        movies_path = args.movies or cfg.movies_path
        personas_path = args.personas or cfg.personas_path
        try:
            movies = [m for m in load_movies(movies_path)
                      if m.movie_id in {s.movie_id for s in record.movie_sequences}]
            personas = load_personas(personas_path) if cfg.use_persona else []
        except (OSError, TypeError, DataFileError) as exc:
            _err(f"cannot replay: {exc}")
            return EXIT_USER
        replay = run_experiment(cfg, movies, personas, make_backend(cfg))
        for a, b in zip(record.movie_sequences, replay.movie_sequences):
            if a != b:
                problems.append(f"{a.movie_id}: replay differs from stored sequence")
    for p in problems:
        print(p)
    print("audit: " + ("pass" if not problems else f"{len(problems)} problem(s)"))
    return EXIT_OK if not problems else EXIT_USER


def cmd_stub_server(args) -> int:
    from .stub_server import ScriptError, StubServer, load_script
    try:
        script = load_script(args.script)
    except (OSError, ScriptError) as exc:
        _err(str(exc))
        return EXIT_USER
    try:
        server = StubServer((args.host, args.port), script)
    except OSError as exc:
        _err(f"cannot bind {args.host}:{args.port}: {exc}")
        return EXIT_USER
    print(f"stub server listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario config JSON")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="History x Persona preset")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, help="movies run in parallel")
    p.add_argument("--backend", help="synthetic:<kind> or llm")
    p.add_argument("--audit", action="store_true", help="log raw LLM requests/responses")
    p.add_argument("--movies", type=Path, help="movies JSONL")
    p.add_argument("--personas", type=Path, help="personas JSONL")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. synthetic.noise_sd=0.5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiral-sim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario config")
    _config_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run an experiment and write a record directory")
    _config_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="compute per-movie metrics for a record")
    p.add_argument("record_dir", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--movie", help="emit the case series of this movie only")
    p.add_argument("--exclude-warmups", action="store_true",
                   help="drop warm-up ratings from the MCO counts")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="metric distributions from an analysis directory")
    p.add_argument("analysis_dir", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--levels-max", type=int, default=10)
    p.add_argument("--record", type=Path, help="record dir for the similarity study")
    p.add_argument("--movies", type=Path)
    p.add_argument("--personas", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay-audit", help="re-verify a record's history values and replay it")
    p.add_argument("record_dir", type=Path)
    p.add_argument("--movies", type=Path)
    p.add_argument("--personas", type=Path)
    p.set_defaults(func=cmd_replay_audit)

    p = sub.add_parser("stub-server", help="serve scripted chat-completion replies")
    p.add_argument("--script", type=Path, required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_stub_server)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
