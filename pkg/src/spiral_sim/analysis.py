"""Per-movie reports, distributions, case series and the persona/movie
similarity study, plus deterministic CSV/JSON export."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .metrics import MetricReport, mco_from_ratings, metric_report, rating_distance
from .model import ModelError, MovieItem, Persona
from .simulation import RunRecord


class UnknownMovie(KeyError):
    pass


class ScenarioMismatch(ModelError):
    pass


class AnalysisError(ModelError):
    def __init__(self, movie_id, cause):
        self.movie_id = movie_id
        super().__init__(f"movie {movie_id}: {cause}")


def analyze_run(record: RunRecord, include_warmups: bool = True) -> list[MetricReport]:
    cfg = record.config
    out = []
    for seq in record.movie_sequences:
        try:
            out.append(metric_report(
                seq, cfg.positive_threshold, cfg.late_window_l, include_warmups=include_warmups,
            ))
        except ModelError as exc:
            raise AnalysisError(seq.movie_id, exc) from exc
    return out


def case_series(record: RunRecord, movie_id: str, include_warmups: bool = True) -> list[tuple[int, float, float]]:
    """``(step, pos, neg)`` rows for one movie, step 1-based."""
    try:
        seq = record.sequence(movie_id)
    except KeyError:
        raise UnknownMovie(movie_id) from None
    ratings = seq.ratings() if include_warmups else [ev.rating for ev in seq.agent_events()]
    series = mco_from_ratings(ratings, record.config.positive_threshold, 1, movie_id)
    return [(s.k, s.pos, s.neg) for s in series.steps]


# -- distributions -----------------------------------------------------------

METRICS = ("mann_kendall_s", "spearman_rho", "kurtosis_late", "iqr_late")


@dataclass(frozen=True)
class DistributionSummary:
    metric_name: str
    values: tuple[float | None, ...]
    movie_ids: tuple[str, ...]
    histogram_bins: tuple[tuple[float, float, int], ...]


def metric_range(metric: str, reports: Sequence[MetricReport], levels_max: int) -> tuple[float, float]:
    if metric == "mann_kendall_s":
        top = max((r.max_abs_s for r in reports), default=1) or 1
        return -float(top), float(top)
    if metric == "spearman_rho":
        return -1.0, 1.0
    if metric == "iqr_late":
        return 0.0, float(levels_max - 1)
    if metric == "kurtosis_late":
        return -3.0, 15.0
    raise ValueError(metric)


def summarize(reports: Sequence[MetricReport], metric: str, levels_max: int = 10, bins: int = 20) -> DistributionSummary:
    """Equal-width histogram of one metric over movies.

    Undefined values (None) are kept in ``values`` but not binned.
    Values outside the range are clipped into the edge bins.
    """
    lo, hi = metric_range(metric, reports, levels_max)
    values = [getattr(r, metric) for r in reports]
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        if v is None or not math.isfinite(v):
            continue
        i = int((v - lo) // width)
        counts[min(bins - 1, max(0, i))] += 1
    edges = [(lo + i * width, lo + (i + 1) * width, counts[i]) for i in range(bins)]
    return DistributionSummary(metric, tuple(values), tuple(r.movie_id for r in reports), tuple(edges))


# -- persona / movie similarity ---------------------------------------------

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 2]


class IdfTable:
    """Smoothed inverse document frequencies over a fixed corpus."""

    def __init__(self, documents: Iterable[str]):
        df = Counter()
        n_docs = 0
        for doc in documents:
            n_docs += 1
            df.update(set(tokenize(doc)))
        self.n_docs = n_docs
        self.df = dict(df)

    @classmethod
    def from_corpus(cls, personas: Iterable[Persona], movies: Iterable[MovieItem]) -> "IdfTable":
        return cls([p.description for p in personas] + [m.overview for m in movies])

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.df.get(term, 0))) + 1.0

    def vector(self, text: str) -> dict[str, float]:
        return {t: c * self.idf(t) for t, c in Counter(tokenize(text)).items()}


def cosine(a: dict[str, float], b: dict[str, float]) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = math.fsum(v * b[t] for t, v in a.items() if t in b)
    na = math.sqrt(math.fsum(v * v for v in a.values()))
    nb = math.sqrt(math.fsum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return min(1.0, max(0.0, dot / (na * nb)))


def text_match(text_a: str, text_b: str, idf: IdfTable) -> float:
    return cosine(idf.vector(text_a), idf.vector(text_b))


def semantic_match(persona: Persona, movie: MovieItem, corpus_stats: IdfTable) -> float:
    return text_match(persona.description, movie.overview, corpus_stats)


@dataclass(frozen=True)
class SemanticMatchRecord:
    agent_id: str
    persona_id: str
    movie_id: str
    match_score: float
    mean_rating_distance: float


def match_vs_distance(
    record: RunRecord, movies: Sequence[MovieItem], personas: Sequence[Persona]
) -> tuple[list[SemanticMatchRecord], float | None]:
    """Similarity vs rating distance for every (agent, movie) pair.

    Returns the records and the rank correlation between score and
    distance, or None when it is undefined (fewer than two records or all
    scores/distances tied).
    """
    cfg = record.config
    if not (cfg.use_history and cfg.use_persona):
        raise ScenarioMismatch("needs a run with both history and persona signals")
    by_movie = {m.movie_id: m for m in movies}
    by_persona = {p.persona_id: p for p in personas}
    idf = IdfTable.from_corpus(personas, movies)
    rows = []
    for seq in record.movie_sequences:
        movie = by_movie[seq.movie_id]
        dists: dict[str, list[float]] = {}
        for ev in seq.agent_events():
            if ev.observed_history_avg is not None:
                dists.setdefault(ev.agent_id, []).append(rating_distance(ev.rating, ev.observed_history_avg))
        for aid in sorted(dists):
            pid = record.persona_assignment[aid]
            rows.append(SemanticMatchRecord(
                aid, pid, seq.movie_id,
                semantic_match(by_persona[pid], movie, idf),
                math.fsum(dists[aid]) / len(dists[aid]),
            ))
    return rows, rank_correlation([r.match_score for r in rows], [r.mean_rating_distance for r in rows])


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman correlation of two samples; None when undefined."""
    if len(x) < 2:
        return None
    rx = kernels.average_ranks(np.asarray(x, dtype=np.float64))
    ry = kernels.average_ranks(np.asarray(y, dtype=np.float64))
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        return None
    return float(kernels.pearson(rx, ry))


# -- export -------------------------------------------------------------------

def fmt_real(v) -> str:
    """Six significant digits; 'NA' for undefined values."""
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "NA"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    out = f"{float(v):.6g}"
    return "0" if out == "-0" else out


def _json_real(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return float(fmt_real(v))


REPORT_COLUMNS = (
    "movie_id", "mann_kendall_s", "mk_p_value", "spearman_rho",
    "kurtosis_late", "iqr_late", "n_trend", "l_window",
)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def reports_csv(reports: Sequence[MetricReport]) -> str:
    return _csv_text(REPORT_COLUMNS, (
        [r.movie_id] + [fmt_real(getattr(r, c)) for c in REPORT_COLUMNS[1:]] for r in reports
    ))


def reports_json(reports: Sequence[MetricReport]) -> str:
    data = [{c: (r.movie_id if c == "movie_id" else _json_real(getattr(r, c))) for c in REPORT_COLUMNS}
            for r in reports]
    return json.dumps(data, indent=2) + "\n"


def metric_csv(reports: Sequence[MetricReport], metric: str) -> str:
    return _csv_text(("movie_id", metric), ([r.movie_id, fmt_real(getattr(r, metric))] for r in reports))


def histogram_csv(summary: DistributionSummary) -> str:
    return _csv_text(("lo", "hi", "count"), ([fmt_real(lo), fmt_real(hi), c] for lo, hi, c in summary.histogram_bins))


def case_csv(rows) -> str:
    return _csv_text(("step", "pos", "neg"), ([k, fmt_real(p), fmt_real(n)] for k, p, n in rows))


def export(
    out_dir,
    reports: Sequence[MetricReport],
    summaries: Sequence[DistributionSummary] = (),
    series: dict[str, list] | None = None,
    fmt: str = "CSV",
) -> list[Path]:
    """Write analysis tables under ``out_dir``; returns the written paths.

    CSV: ``reports.csv``, ``{metric}.csv`` per metric, ``hist_{metric}.csv``
    per summary and ``case_{movie_id}.csv`` per series. JSON: ``reports.json``
    and, when given, ``distributions.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    fmt = fmt.upper()
    if fmt not in ("CSV", "JSON"):
        raise ValueError(f"unknown export format {fmt!r}")
    if fmt == "JSON":
        p = out / "reports.json"
        _write(p, reports_json(reports))
        written.append(p)
        if summaries:
            p = out / "distributions.json"
            _write(p, json.dumps([
                {"metric_name": s.metric_name,
                 "values": [_json_real(v) for v in s.values],
                 "movie_ids": list(s.movie_ids),
                 "histogram_bins": [[_json_real(lo), _json_real(hi), c] for lo, hi, c in s.histogram_bins]}
                for s in summaries], indent=2) + "\n")
            written.append(p)
        return written
    p = out / "reports.csv"
    _write(p, reports_csv(reports))
    written.append(p)
    for metric in METRICS:
        p = out / f"{metric}.csv"
        _write(p, metric_csv(reports, metric))
        written.append(p)
    for s in summaries:
        p = out / f"hist_{s.metric_name}.csv"
        _write(p, histogram_csv(s))
        written.append(p)
    for movie_id, rows in (series or {}).items():
        p = out / f"case_{movie_id}.csv"
        _write(p, case_csv(rows))
        written.append(p)
    return written


def read_reports_json(path) -> list[MetricReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [MetricReport(**{c: d[c] for c in REPORT_COLUMNS}) for d in data]


def report_to_dict(r: MetricReport) -> dict:
    return asdict(r)
