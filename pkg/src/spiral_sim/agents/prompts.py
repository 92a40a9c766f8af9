"""Rating prompts for the four History x Persona scenarios."""
from __future__ import annotations

from ..model import ModelError


class MissingPersona(ModelError):
    pass


class MissingHistory(ModelError):
    pass


_HEADER = "Please provide your rating for the movie.\n\n"

_PERSONA = "# Your Character Profile\nYou are {persona}\n\n"

_MOVIE = (
    "# Movie Information\n"
    "Title: {title}\n"
    "Genres: {genres}\n"
    "Overview: {overview}\n"
)

_HISTORY = "Movie average rating: {history} (1-{top})\n"

_PRINCIPLES = (
    "# Rating Principle\n"
    "Rate the above movie on an integer scale from 1 to {top}, where:\n"
    "\n"
    "- 1 = Awful/Abysmal (unwatchable)\n"
    "- 5 = Mediocre/Unsure (forgettable)\n"
    "- {top} = Perfect/Masterpiece (flawless)\n"
    "\n"
    "# Output Principle\n"
    "Provide only a single integer (1-{top}) without extra text."
)


def render_prompt(ctx, scenario) -> str:
    """Instantiate the prompt template matching the scenario flags.

    Raises MissingPersona / MissingHistory when the context lacks a signal
    the scenario requires.

    The baseline template (no history, no persona) keeps the doubled blank
    line after the movie block that the published template carries.
    """
    if scenario.use_persona and ctx.persona is None:
        raise MissingPersona(f"scenario {scenario.scenario_name} needs a persona")
    show_history = scenario.use_history and ctx.history_len > 0
    if show_history and ctx.history_avg_display is None:
        raise MissingHistory(f"scenario {scenario.scenario_name} needs a history value")
    top = ctx.scale.levels_max
    parts = [_HEADER]
    if scenario.use_persona:
        parts.append(_PERSONA.format(persona=ctx.persona.description))
    parts.append(_MOVIE.format(
        title=ctx.movie.title,
        genres=", ".join(ctx.movie.genres),
        overview=ctx.movie.overview,
    ))
    # the very first rater of an empty, warm-up-free history sees no average
    if show_history:
        parts.append(_HISTORY.format(history=ctx.history_avg_display, top=top))
    parts.append("\n")
    if not scenario.use_history and not scenario.use_persona:
        parts.append("\n")
    parts.append(_PRINCIPLES.format(top=top))
    return "".join(parts)
