"""Shared domain types, validation and file loaders.

Everything here is an immutable value object. Other modules import from
this one; it imports nothing from the rest of the package.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

WARMUP = "WARMUP"
FORMAT_VERSION = 1

_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


class ModelError(ValueError):
    """Raised when a domain object violates one of its invariants."""


class DataFileError(ModelError):
    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


def check_identifier(value: str, what: str = "identifier") -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise ModelError(f"invalid {what} {value!r}: use letters, digits, '_', '.', '-'")
    return value


@dataclass(frozen=True)
class RatingScale:
    levels_max: int = 10

    def __post_init__(self):
        if not isinstance(self.levels_max, int) or isinstance(self.levels_max, bool):
            raise ModelError("levels_max must be an integer")
        # levels_max >= 2 is reported by validate_config rather than raised here

    @property
    def levels(self) -> range:
        return range(1, self.levels_max + 1)

    def contains(self, value: float) -> bool:
        return 1 <= value <= self.levels_max

    def midpoint(self) -> float:
        return (1 + self.levels_max) / 2


@dataclass(frozen=True)
class RatingEvent:
    """One rating of one movie at one position of its sequence.

    ``rating`` is the arithmetic mean of ``raw_samples``; a single-sample
    event therefore carries an integer-valued rating.
    """

    movie_id: str
    step_index: int
    agent_id: str
    rating: float
    raw_samples: tuple[int, ...]
    observed_history_avg: float | None
    rng_seed: int

    def __post_init__(self):
        if self.step_index < 0:
            raise ModelError("step_index must be >= 0")
        if len(self.raw_samples) < 1:
            raise ModelError("raw_samples must not be empty")
        if abs(sample_mean(self.raw_samples) - self.rating) > 1e-12:
            raise ModelError(
                f"rating {self.rating!r} is not the mean of raw_samples {list(self.raw_samples)}"
            )
        if self.agent_id == WARMUP:
            if len(self.raw_samples) != 1:
                raise ModelError("warm-up events carry exactly one sample")
            if self.observed_history_avg is not None:
                raise ModelError("warm-up events have no observed history")
        if not 0 <= self.rng_seed < 2**64:
            raise ModelError("rng_seed must be an unsigned 64-bit integer")

    @property
    def is_warmup(self) -> bool:
        return self.agent_id == WARMUP

    def to_dict(self) -> dict[str, Any]:
        return {
            "movie_id": self.movie_id,
            "step_index": self.step_index,
            "agent_id": self.agent_id,
            "rating": self.rating,
            "raw_samples": list(self.raw_samples),
            "observed_history_avg": self.observed_history_avg,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RatingEvent":
        expected = {
            "movie_id", "step_index", "agent_id", "rating",
            "raw_samples", "observed_history_avg", "rng_seed",
        }
        if set(d) != expected:
            raise ModelError(f"rating event fields {sorted(d)} != {sorted(expected)}")
        samples = d["raw_samples"]
        if not isinstance(samples, list) or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in samples
        ):
            raise ModelError("raw_samples must be a list of integers")
        hist = d["observed_history_avg"]
        return cls(
            movie_id=str(d["movie_id"]),
            step_index=int(d["step_index"]),
            agent_id=str(d["agent_id"]),
            rating=float(d["rating"]),
            raw_samples=tuple(samples),
            observed_history_avg=None if hist is None else float(hist),
            rng_seed=int(d["rng_seed"]),
        )


def sample_mean(samples: Iterable[int]) -> float:
    samples = list(samples)
    return math.fsum(samples) / len(samples)


@dataclass(frozen=True)
class RatingSequence:
    movie_id: str
    warmup_len: int
    events: tuple[RatingEvent, ...]

    def __post_init__(self):
        if self.warmup_len < 0:
            raise ModelError("warmup_len must be >= 0")
        for i, ev in enumerate(self.events):
            if ev.step_index != i:
                raise ModelError(f"step_index gap: expected {i}, got {ev.step_index}")
            if ev.movie_id != self.movie_id:
                raise ModelError(f"event for {ev.movie_id!r} in sequence {self.movie_id!r}")
            if (i < self.warmup_len) != ev.is_warmup:
                raise ModelError(f"event {i}: warm-up prefix must be exactly {self.warmup_len} long")

    def __len__(self) -> int:
        return len(self.events)

    def ratings(self) -> list[float]:
        return [ev.rating for ev in self.events]

    def agent_events(self) -> tuple[RatingEvent, ...]:
        return self.events[self.warmup_len:]


@dataclass(frozen=True)
class MovieItem:
    movie_id: str
    title: str
    genres: tuple[str, ...]
    overview: str
    release_date: str
    external_avg: float | None = None

    def __post_init__(self):
        check_identifier(self.movie_id, "movie_id")
        if not self.title.strip():
            raise ModelError(f"movie {self.movie_id}: empty title")
        if not self.overview.strip():
            raise ModelError(f"movie {self.movie_id}: empty overview")
        try:
            _dt.date.fromisoformat(self.release_date)
        except ValueError:
            raise ModelError(f"movie {self.movie_id}: release_date {self.release_date!r} is not ISO-8601")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MovieItem":
        fields = {"movie_id", "title", "genres", "overview", "release_date", "external_avg"}
        missing = fields - set(d) - {"external_avg"}
        extra = set(d) - fields
        if missing or extra:
            raise ModelError(f"movie fields: missing {sorted(missing)}, unknown {sorted(extra)}")
        genres = d["genres"]
        if not isinstance(genres, list) or not all(isinstance(g, str) for g in genres):
            raise ModelError("genres must be a list of strings")
        ext = d.get("external_avg")
        return cls(
            movie_id=d["movie_id"], title=d["title"], genres=tuple(genres),
            overview=d["overview"], release_date=d["release_date"],
            external_avg=None if ext is None else float(ext),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "movie_id": self.movie_id, "title": self.title, "genres": list(self.genres),
            "overview": self.overview, "release_date": self.release_date,
            "external_avg": self.external_avg,
        }


@dataclass(frozen=True)
class Persona:
    persona_id: str
    description: str

    def __post_init__(self):
        check_identifier(self.persona_id, "persona_id")
        if not self.description.strip():
            raise ModelError(f"persona {self.persona_id}: empty description")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Persona":
        if set(d) != {"persona_id", "description"}:
            raise ModelError(f"persona fields must be persona_id, description; got {sorted(d)}")
        return cls(d["persona_id"], d["description"])

    def to_dict(self) -> dict[str, Any]:
        return {"persona_id": self.persona_id, "description": self.description}


# -- synthetic and remote backend parameters ---------------------------------

POLICY_KINDS = ("POSITIVITY_PRIOR", "PERSONA_PRIOR", "CONFORMIST")


@dataclass(frozen=True)
class SyntheticPolicy:
    """Parameters of an offline surrogate agent.

    ``base_rating`` is the fixed rating of POSITIVITY_PRIOR and the persona
    center of the two persona-driven kinds.
    """

    kind: str = "POSITIVITY_PRIOR"
    base_rating: float = 8.0
    conformity_weight: float = 0.0
    noise_sd: float = 0.0
    persona_hash_spread: float = 0.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ModelError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.conformity_weight <= 1.0:
            raise ModelError("conformity_weight must lie in [0, 1]")
        if self.noise_sd < 0:
            raise ModelError("noise_sd must be >= 0")
        if self.persona_hash_spread < 0:
            raise ModelError("persona_hash_spread must be >= 0")


@dataclass(frozen=True)
class LlmBackendConfig:
    endpoint_url: str = "http://127.0.0.1:8000/v1/chat/completions"
    model_name: str = "gpt-4o-mini"
    temperature: float = 0.1
    max_retries: int = 2
    timeout_ms: int = 30000
    auth_token_env_var: str = "OPENAI_API_KEY"
    max_in_flight: int = 8

    def __post_init__(self):
        if self.temperature < 0:
            raise ModelError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ModelError("max_retries must be >= 0")
        if self.timeout_ms <= 0:
            raise ModelError("timeout_ms must be > 0")
        if self.max_in_flight < 1:
            raise ModelError("max_in_flight must be >= 1")


# -- scenario -----------------------------------------------------------------

SCENARIOS = {
    "I": (True, True),
    "II": (True, False),
    "III": (False, True),
    "IV": (False, False),
}


@dataclass(frozen=True)
class ScenarioConfig:
    use_history: bool = True
    use_persona: bool = True
    scale: RatingScale = field(default_factory=RatingScale)
    population_n: int = 100
    warmup_m: int = 10
    late_window_l: int = 30
    samples_per_agent: int = 3
    positive_threshold: float = 6.0
    master_seed: int = 0
    backend_id: str = "synthetic:POSITIVITY_PRIOR"
    history_display_decimals: int = 1
    warmup_visible_to_agents: bool = True
    synthetic: SyntheticPolicy | None = None
    llm: LlmBackendConfig | None = None
    jobs: int = 1
    audit: bool = False
    movies_path: str | None = None
    personas_path: str | None = None

    @property
    def scenario_name(self) -> str:
        for name, flags in SCENARIOS.items():
            if flags == (self.use_history, self.use_persona):
                return name
        raise AssertionError("unreachable")

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["scale"] = {"levels_max": self.scale.levels_max}
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ModelError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        if "scale" in d:
            scale = d["scale"]
            if isinstance(scale, int):
                d["scale"] = RatingScale(scale)
            else:
                _reject_unknown(scale, RatingScale, "scale")
                d["scale"] = RatingScale(**scale)
        if d.get("synthetic") is not None:
            _reject_unknown(d["synthetic"], SyntheticPolicy, "synthetic")
            d["synthetic"] = SyntheticPolicy(**d["synthetic"])
        if d.get("llm") is not None:
            _reject_unknown(d["llm"], LlmBackendConfig, "llm")
            d["llm"] = LlmBackendConfig(**d["llm"])
        return cls(**d)


def _reject_unknown(d: dict, klass, where: str) -> None:
    if not isinstance(d, dict):
        raise ModelError(f"{where} must be an object")
    unknown = set(d) - {f.name for f in dataclasses.fields(klass)}
    if unknown:
        raise ModelError(f"unknown config field(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def fields(self) -> list[str]:
        return [v.field for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return "pass"
        return "\n".join(str(v) for v in self.violations)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_config(cfg: ScenarioConfig) -> ValidationReport:
    """Check every cross-field invariant of a scenario config.

    Never raises; the violations are the report's content.
    """
    out: list[Violation] = []

    def bad(name, msg):
        out.append(Violation(name, msg))

    m_max = cfg.scale.levels_max
    if not _is_int(m_max) or m_max < 2:
        bad("levels_max", "must be an integer >= 2")
    if not _is_int(cfg.population_n) or cfg.population_n < 1:
        bad("population_n", "must be a positive integer")
    if not _is_int(cfg.warmup_m) or cfg.warmup_m < 0:
        bad("warmup_m", "must be a nonnegative integer")
    if not _is_int(cfg.late_window_l) or cfg.late_window_l < 1:
        bad("late_window_l", "must be a positive integer")
    elif _is_int(cfg.population_n) and _is_int(cfg.warmup_m):
        if cfg.late_window_l > cfg.population_n + cfg.warmup_m:
            bad("late_window_l", "must not exceed population_n + warmup_m")
    if not _is_int(cfg.samples_per_agent) or cfg.samples_per_agent < 1:
        bad("samples_per_agent", "must be a positive integer")
    if _is_int(m_max) and not 1 < cfg.positive_threshold <= m_max:
        bad("positive_threshold", f"must lie in (1, {m_max}]")
    if not _is_int(cfg.master_seed) or not 0 <= cfg.master_seed < 2**64:
        bad("master_seed", "must be an unsigned 64-bit integer")
    if not _is_int(cfg.history_display_decimals) or cfg.history_display_decimals < 0:
        bad("history_display_decimals", "must be a nonnegative integer")
    if not _is_int(cfg.jobs) or cfg.jobs < 1:
        bad("jobs", "must be a positive integer")

    kind = backend_kind(cfg.backend_id)
    if kind is None:
        bad("backend_id", "must be 'llm' or 'synthetic:<POSITIVITY_PRIOR|PERSONA_PRIOR|CONFORMIST>'")
    elif kind == "llm":
        if cfg.llm is None:
            bad("llm", "backend 'llm' needs an llm section")
    else:
        if cfg.synthetic is not None and cfg.synthetic.kind != kind:
            bad("synthetic", f"policy kind {cfg.synthetic.kind} does not match backend_id {cfg.backend_id}")
        if kind == "CONFORMIST" and not cfg.use_history:
            bad("use_history", "CONFORMIST agents need the history signal")
        if kind == "CONFORMIST" and not cfg.warmup_visible_to_agents:
            bad("warmup_visible_to_agents", "CONFORMIST agents need a history value for the first agent")
    return ValidationReport(tuple(out))


def backend_kind(backend_id: str) -> str | None:
    """Return 'llm', a synthetic policy kind, or None when unrecognised."""
    if backend_id == "llm":
        return "llm"
    if backend_id.startswith("synthetic:"):
        kind = backend_id.split(":", 1)[1].upper()
        if kind in POLICY_KINDS:
            return kind
    return None


# -- file formats -------------------------------------------------------------

def _read_jsonl(path, parse):
    path = Path(path)
    items = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                item = parse(json.loads(line))
            except (json.JSONDecodeError, ModelError, TypeError, KeyError) as exc:
                raise DataFileError(path, lineno, str(exc)) from None
            key = getattr(item, "movie_id", None) or getattr(item, "persona_id")
            if key in seen:
                raise DataFileError(path, lineno, f"duplicate id {key!r}")
            seen.add(key)
            items.append(item)
    return items


def load_movies(path) -> list[MovieItem]:
    return _read_jsonl(path, MovieItem.from_dict)


def load_personas(path) -> list[Persona]:
    return _read_jsonl(path, Persona.from_dict)


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False) + "\n")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFileError(path, exc.lineno, exc.msg) from None
    if not isinstance(data, dict):
        raise DataFileError(path, None, "config must be a JSON object")
    try:
        return ScenarioConfig.from_dict(data)
    except (ModelError, TypeError) as exc:
        raise DataFileError(path, None, str(exc)) from None


def dump_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
