"""Deterministic surrogate agents for offline runs and tests."""
from __future__ import annotations

import dataclasses
import hashlib
from typing import Callable

import numpy as np

from ..aggregation import round_half_up
from ..model import SyntheticPolicy
from .base import AgentContext
from .prompts import MissingHistory


def persona_offset(persona_id: str) -> float:
    """Stable value in [-1, 1] derived from a persona id."""
    digest = hashlib.blake2b(persona_id.encode("utf-8"), digest_size=8).digest()
    return 2.0 * (int.from_bytes(digest, "little") / (2**64 - 1)) - 1.0


def persona_base(policy: SyntheticPolicy, ctx: AgentContext) -> float:
    if ctx.persona is None:
        return policy.base_rating
    return policy.base_rating + policy.persona_hash_spread * persona_offset(ctx.persona.persona_id)


def target_rating(policy: SyntheticPolicy, ctx: AgentContext, conformity: float | None = None) -> float:
    if policy.kind == "POSITIVITY_PRIOR":
        return policy.base_rating
    base = persona_base(policy, ctx)
    if policy.kind == "PERSONA_PRIOR":
        return base
    lam = policy.conformity_weight if conformity is None else conformity
    if ctx.history_avg is None:
        raise MissingHistory("CONFORMIST agent was given no history value")
    return (1.0 - lam) * base + lam * ctx.history_avg


def synthetic_rate(policy: SyntheticPolicy, ctx: AgentContext, conformity: float | None = None) -> int:
    target = target_rating(policy, ctx, conformity)
    if policy.noise_sd > 0:
        target += np.random.default_rng(ctx.rng_seed).normal(0.0, policy.noise_sd)
    return int(min(ctx.scale.levels_max, max(1, round_half_up(target))))


class SyntheticBackend:
    """Agent backend wrapping a :class:`SyntheticPolicy`.

    ``conformity_fn`` may override the policy's conformity weight per
    context, e.g. to couple it to persona/movie similarity.
    """

    def __init__(self, policy: SyntheticPolicy, conformity_fn: Callable[[AgentContext], float] | None = None):
        self.policy = policy
        self.conformity_fn = conformity_fn
        self.backend_id = f"synthetic:{policy.kind}"

    def rate(self, ctx: AgentContext, scenario, seeds) -> list[int]:
        lam = None
        if self.conformity_fn is not None:
            lam = min(1.0, max(0.0, float(self.conformity_fn(ctx))))
        return [
            synthetic_rate(self.policy, dataclasses.replace(ctx, rng_seed=s), lam)
            for s in seeds
        ]
