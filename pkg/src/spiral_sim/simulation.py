"""Sequential rating runs and their on-disk record.

Within one movie the loop is strictly sequential: every agent sees the
climate produced by all events before it. Movies are independent and may
run on a thread pool.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents.base import AgentContext
from .aggregation import format_climate_for_prompt, running_climate
from .model import (
    FORMAT_VERSION, WARMUP, DataFileError, ModelError, MovieItem, Persona,
    RatingEvent, RatingSequence, ScenarioConfig, dump_config, load_config,
    sample_mean, write_jsonl,
)

log = logging.getLogger(__name__)

WARMUP_DISTRIBUTION = "uniform"


class InsufficientPersonas(ModelError):
    pass


class MovieRunError(RuntimeError):
    def __init__(self, movie_id: str, step_index: int, cause: BaseException):
        self.movie_id = movie_id
        self.step_index = step_index
        self.cause = cause
        super().__init__(f"movie {movie_id}, step {step_index}: {type(cause).__name__}: {cause}")


def derive_seed(master: int, domain: str, index: int) -> int:
    """Stable 64-bit child seed for ``(domain, index)`` under ``master``."""
    key = f"{master}\x1f{domain}\x1f{index}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def generate_warmups(cfg: ScenarioConfig, movie_id: str) -> list[RatingEvent]:
    out = []
    top = cfg.scale.levels_max
    for i in range(cfg.warmup_m):
        seed = derive_seed(cfg.master_seed, "warmup:" + movie_id, i)
        r = int(np.random.default_rng(seed).integers(1, top + 1))
        out.append(RatingEvent(movie_id, i, WARMUP, float(r), (r,), None, seed))
    return out


def agent_ids(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"agent-{i:0{width}d}" for i in range(n)]


def agent_order(cfg: ScenarioConfig, movie_id: str, roster_ids: Sequence[str]) -> list[str]:
    ids = sorted(roster_ids)
    rng = np.random.default_rng(derive_seed(cfg.master_seed, "order:" + movie_id, 0))
    return [ids[i] for i in rng.permutation(len(ids))]


def assign_personas(cfg: ScenarioConfig, personas: Sequence[Persona]) -> dict[str, Persona]:
    """Seeded shuffle of the persona pool, then the first N go to agents in id order."""
    if len(personas) < cfg.population_n:
        raise InsufficientPersonas(
            f"personas: {len(personas)} available, population_n needs {cfg.population_n}"
        )
    pool = sorted(personas, key=lambda p: p.persona_id)
    rng = np.random.default_rng(derive_seed(cfg.master_seed, "persona", 0))
    picked = [pool[i] for i in rng.permutation(len(pool))[: cfg.population_n]]
    return dict(zip(agent_ids(cfg.population_n), picked))


def run_movie(cfg: ScenarioConfig, movie: MovieItem, roster, backend) -> RatingSequence:
    """Run the full warm-up + agent sequence for one movie.

    ``roster`` is a list of ``(agent_id, persona_or_None)``; its order does
    not matter. Backend failures surface as MovieRunError with the step.
    """
    if len(roster) != cfg.population_n:
        raise ModelError(f"roster has {len(roster)} agents, population_n is {cfg.population_n}")
    personas = dict(roster)
    events = generate_warmups(cfg, movie.movie_id)
    visible = [ev.rating for ev in events] if cfg.warmup_visible_to_agents else []
    step = len(events)
    for aid in agent_order(cfg, movie.movie_id, personas):
        avg = display = None
        if cfg.use_history and visible:
            avg = running_climate(visible)
            display = format_climate_for_prompt(avg, cfg.history_display_decimals)
        event_seed = derive_seed(cfg.master_seed, "event:" + movie.movie_id, step)
        ctx = AgentContext(
            movie=movie,
            persona=personas[aid] if cfg.use_persona else None,
            history_avg_display=display,
            scale=cfg.scale,
            rng_seed=event_seed,
            history_avg=avg,
            history_len=len(visible) if cfg.use_history else 0,
            agent_id=aid,
        )
        seeds = [derive_seed(event_seed, "sample", s) for s in range(cfg.samples_per_agent)]
        try:
            samples = [int(x) for x in backend.rate(ctx, cfg, seeds)]
            if len(samples) != cfg.samples_per_agent:
                raise ModelError(f"backend returned {len(samples)} samples, expected {cfg.samples_per_agent}")
            ev = RatingEvent(movie.movie_id, step, aid, sample_mean(samples), tuple(samples), avg, event_seed)
        except Exception as exc:
            raise MovieRunError(movie.movie_id, step, exc) from exc
        events.append(ev)
        visible.append(ev.rating)
        step += 1
    return RatingSequence(movie.movie_id, cfg.warmup_m, tuple(events))


@dataclass(frozen=True)
class RunRecord:
    config: ScenarioConfig
    movie_sequences: tuple[RatingSequence, ...]
    agent_order_per_movie: dict[str, list[str]]
    persona_assignment: dict[str, str]
    created_at: str
    format_version: int = FORMAT_VERSION
    failures: tuple[dict, ...] = ()
    warmup_distribution: str = WARMUP_DISTRIBUTION

    def sequence(self, movie_id: str) -> RatingSequence:
        for seq in self.movie_sequences:
            if seq.movie_id == movie_id:
                return seq
        raise KeyError(movie_id)

    @property
    def complete(self) -> bool:
        return not self.failures


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch else _dt.datetime.now(_dt.timezone.utc)
    )
    return now.replace(microsecond=0).isoformat()


def run_experiment(
    cfg: ScenarioConfig,
    movies: Sequence[MovieItem],
    personas: Sequence[Persona],
    backend,
) -> RunRecord:
    """Run every movie; a failing movie is listed in ``failures`` and skipped."""
    ids = agent_ids(cfg.population_n)
    if cfg.use_persona:
        assigned = assign_personas(cfg, personas)
        roster = [(aid, assigned[aid]) for aid in ids]
    else:
        assigned = {}
        roster = [(aid, None) for aid in ids]

    def one(movie):
        try:
            return run_movie(cfg, movie, roster, backend), None
        except MovieRunError as exc:
            log.error("%s", exc)
            return None, {"movie_id": exc.movie_id, "step_index": exc.step_index,
                          "error": f"{type(exc.cause).__name__}: {exc.cause}"}

    if cfg.jobs > 1 and len(movies) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(one, movies))
    else:
        results = [one(m) for m in movies]

    seqs = tuple(seq for seq, _ in results if seq is not None)
    return RunRecord(
        config=cfg,
        movie_sequences=seqs,
        agent_order_per_movie={s.movie_id: [ev.agent_id for ev in s.agent_events()] for s in seqs},
        persona_assignment={aid: p.persona_id for aid, p in assigned.items()},
        created_at=_timestamp(),
        failures=tuple(f for _, f in results if f is not None),
    )


def audit_history(record: RunRecord, tol: float = 1e-12) -> list[str]:
    """Recompute every shown climate from the stored events; list mismatches."""
    cfg = record.config
    problems = []
    for seq in record.movie_sequences:
        visible = [ev.rating for ev in seq.events[: seq.warmup_len]] if cfg.warmup_visible_to_agents else []
        for ev in seq.agent_events():
            if abs(sample_mean(ev.raw_samples) - ev.rating) > tol:
                problems.append(f"{seq.movie_id}:{ev.step_index}: rating is not the sample mean")
            expect = math.fsum(visible) / len(visible) if (cfg.use_history and visible) else None
            got = ev.observed_history_avg
            if (expect is None) != (got is None) or (
                expect is not None and abs(expect - got) > tol
            ):
                problems.append(f"{seq.movie_id}:{ev.step_index}: observed {got!r}, expected {expect!r}")
            visible.append(ev.rating)
    return problems


# -- persistence --------------------------------------------------------------

def ratings_filename(movie_id: str) -> str:
    return f"ratings_{movie_id}.jsonl"


def save_record(record: RunRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(record.config, out / "config.json")
    for seq in record.movie_sequences:
        write_jsonl(out / ratings_filename(seq.movie_id), (ev.to_dict() for ev in seq.events))
    manifest = {
        "format_version": record.format_version,
        "created_at": record.created_at,
        "warmup_distribution": record.warmup_distribution,
        "movies": [s.movie_id for s in record.movie_sequences],
        "failures": list(record.failures),
        "agent_order_per_movie": record.agent_order_per_movie,
        "persona_assignment": record.persona_assignment,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return out


def load_record(record_dir) -> RunRecord:
    """Read and validate a record directory.

    Raises DataFileError naming the first offending file (and line).
    """
    d = Path(record_dir)
    for name in ("config.json", "manifest.json"):
        if not (d / name).is_file():
            raise DataFileError(d / name, None, "missing")
    cfg = load_config(d / "config.json")
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        movies = manifest["movies"]
        version = int(manifest["format_version"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFileError(d / "manifest.json", None, f"malformed manifest: {exc}") from None
    if version != FORMAT_VERSION:
        raise DataFileError(d / "manifest.json", None, f"unsupported format_version {version}")

    seqs = []
    for movie_id in movies:
        path = d / ratings_filename(movie_id)
        if not path.is_file():
            raise DataFileError(path, None, "missing ratings file")
        events = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                try:
                    ev = RatingEvent.from_dict(json.loads(line))
                    if ev.movie_id != movie_id:
                        raise ModelError(f"movie_id {ev.movie_id!r} in file for {movie_id!r}")
                    if ev.step_index != len(events):
                        raise ModelError(f"step_index {ev.step_index}, expected {len(events)}")
                    if (len(events) < cfg.warmup_m) != ev.is_warmup:
                        raise ModelError("warm-up prefix does not match config warmup_m")
                    if not cfg.scale.contains(ev.rating):
                        raise ModelError(f"rating {ev.rating} outside the scale")
                except (json.JSONDecodeError, ModelError, TypeError, ValueError, KeyError, AttributeError) as exc:
                    raise DataFileError(path, lineno, str(exc)) from None
                events.append(ev)
        if len(events) != cfg.warmup_m + cfg.population_n:
            raise DataFileError(path, None, f"{len(events)} events, expected {cfg.warmup_m + cfg.population_n}")
        seqs.append(RatingSequence(movie_id, cfg.warmup_m, tuple(events)))

    return RunRecord(
        config=cfg,
        movie_sequences=tuple(seqs),
        agent_order_per_movie=manifest.get("agent_order_per_movie", {}),
        persona_assignment=manifest.get("persona_assignment", {}),
        created_at=manifest.get("created_at", ""),
        format_version=version,
        failures=tuple(manifest.get("failures", [])),
        warmup_distribution=manifest.get("warmup_distribution", WARMUP_DISTRIBUTION),
    )
