from .base import AgentContext, AgentError
from .llm import (
    AuthError, ChatClient, LlmBackend, NoRatingFound, ParseError, TransportError,
    llm_rate, parse_rating,
)
from .prompts import MissingHistory, MissingPersona, render_prompt
from .synthetic import SyntheticBackend, persona_offset, synthetic_rate

__all__ = [
    "AgentContext", "AgentError", "AuthError", "ChatClient", "LlmBackend",
    "MissingHistory", "MissingPersona", "NoRatingFound", "ParseError",
    "SyntheticBackend", "TransportError", "llm_rate", "parse_rating",
    "persona_offset", "render_prompt", "synthetic_rate",
]
