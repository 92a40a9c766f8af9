from __future__ import annotations

from dataclasses import dataclass

from ..model import MovieItem, Persona, RatingScale


class AgentError(RuntimeError):
    """A backend could not produce a rating."""


@dataclass(frozen=True)
class AgentContext:
    """Everything one agent is shown at one step.

    ``history_avg`` is the unrounded climate; ``history_avg_display`` is the
    formatted string that goes into a prompt. Both are None when no history
    is shown.
    """

    movie: MovieItem
    persona: Persona | None
    history_avg_display: str | None
    scale: RatingScale
    rng_seed: int
    history_avg: float | None = None
    history_len: int = 0
    agent_id: str = ""
