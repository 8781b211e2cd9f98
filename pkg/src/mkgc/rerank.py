"""Iterative entity reranking over a candidate list.

Starting from the KGE candidate order, each round asks the scorer for its
best entity among the remaining pool, removes it from the pool, and
re-inserts it at the next position of the evolving ranking (1-based, so
round t fills position t). After n_rounds rounds, positions 1..n_rounds
hold the picks in order and the tail keeps the initial relative order of
everything never picked.

A pure function of its inputs; safe to parallelize across queries. A
scorer that returns an entity outside the remaining pool is a broken
integration and raises ContractViolation rather than being papered over.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation

# operating point used by the evaluation pipeline
DEFAULT_ROUNDS = 10


@dataclass(frozen=True)
class RoundSnapshot:
    """State at the start of round t plus the entity picked in it."""

    round: int
    remaining: tuple
    ranking: tuple
    pick: object


def rerank_trace(query, candidates, scorer, n_rounds: int = DEFAULT_ROUNDS):
    """Run the full loop and keep per-round snapshots for trend analysis.

    Returns (final_ranking, trace); trace has exactly n_rounds snapshots.
    """
    ranking = list(candidates)
    if len(set(ranking)) != len(ranking):
        raise ValueError("candidates must be distinct")
    if not 1 <= n_rounds <= len(ranking):
        raise ValueError(f"n_rounds must be in [1, {len(ranking)}], got {n_rounds}")

    remaining = list(ranking)
    trace = []
    for t in range(1, n_rounds + 1):
        pick = scorer(query, tuple(remaining))
        if pick not in remaining:
            raise ContractViolation(
                f"scorer returned {pick!r} outside the remaining pool at round {t}")
        trace.append(RoundSnapshot(t, tuple(remaining), tuple(ranking), pick))
        remaining.remove(pick)
        ranking.remove(pick)
        ranking.insert(t - 1, pick)
    return ranking, trace


def rerank(query, candidates, scorer, n_rounds: int = DEFAULT_ROUNDS):
    """Final ranking only; see rerank_trace."""
    return rerank_trace(query, candidates, scorer, n_rounds)[0]


def final_rank(ranking, gold, fallback_rank: int) -> int:
    """1-based rank of `gold` in the reranked list; when the gold never made
    the candidate list, fall back to its rank in the underlying retrieval
    ordering (necessarily beyond the list length)."""
    try:
        return ranking.index(gold) + 1
    except ValueError:
        if fallback_rank <= len(ranking):
            raise ValueError(
                f"fallback rank {fallback_rank} inside the reranked list length "
                f"{len(ranking)} for an absent gold") from None
        return fallback_rank
