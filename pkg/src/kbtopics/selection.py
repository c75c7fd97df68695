"""Topic aggregation, parent enhancement, and knee-based cutoff.

Per-mention winners are folded into document topics scored by total evidence
times a diversity multiplier, broader parent entities inherit a weighted
share of their children's scores, and the sorted score curve is cut at its
knee so only the strong head survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .kb import Iri
from .ranking import ScoredCandidate

TopicOrigin = Literal["direct", "parent"]


@dataclass(frozen=True)
class SelectionParams:
    lambda_diversity: float = 0.2
    kneedle_sensitivity: float = 1.0
    min_topics: int = 3
    include_parents: bool = True

    def __post_init__(self) -> None:
        if not math.isfinite(self.lambda_diversity) or self.lambda_diversity < 0:
            raise ConfigError(
                f"lambda_diversity must be a nonnegative real, got {self.lambda_diversity}"
            )
        if not math.isfinite(self.kneedle_sensitivity) or self.kneedle_sensitivity <= 0:
            raise ConfigError(
                f"kneedle_sensitivity must be positive, got {self.kneedle_sensitivity}"
            )
        if self.min_topics < 0:
            raise ConfigError(f"min_topics must be nonnegative, got {self.min_topics}")


@dataclass(frozen=True)
class TopicResult:
    entity: Iri
    label: str
    final_score: float
    supporting_lemmas: frozenset[str]
    origin: TopicOrigin

    def __post_init__(self) -> None:
        if self.origin == "direct" and not self.supporting_lemmas:
            raise ValueError("direct topics need at least one supporting lemma")


def aggregate(
    per_mention_ranked: Sequence[Sequence[ScoredCandidate]],
    lemmas: Sequence[str],
    params: SelectionParams,
    label_for: Callable[[Iri], str],
) -> list[TopicResult]:
    """Fold per-mention winners into direct topics.

    Each mention contributes its single best candidate by boosted score.
    A topic's final score is the sum of those contributions scaled by
    1 + lambda * (distinct supporting lemmas - 1), so repeat evidence under
    different surface lemmas counts extra.
    """
    if len(per_mention_ranked) != len(lemmas):
        raise ValueError("one lemma per mention required")
    totals: dict[Iri, float] = {}
    lemma_sets: dict[Iri, set[str]] = {}
    for ranked, lemma in zip(per_mention_ranked, lemmas):
        if not ranked:
            continue
        winner = min(ranked, key=lambda c: (-c.effective, c.entity))
        totals[winner.entity] = totals.get(winner.entity, 0.0) + winner.effective
        lemma_sets.setdefault(winner.entity, set()).add(lemma)
    topics = []
    for entity, total in totals.items():
        count = len(lemma_sets[entity])
        final = total * (1.0 + params.lambda_diversity * (count - 1))
        topics.append(
            TopicResult(
                entity=entity,
                label=label_for(entity),
                final_score=final,
                supporting_lemmas=frozenset(lemma_sets[entity]),
                origin="direct",
            )
        )
    topics.sort(key=lambda t: (-t.final_score, t.entity))
    return topics


def enhance_with_parents(
    topics: Sequence[TopicResult],
    parents_of: Callable[[Iri], Sequence[tuple[Iri, float]]],
    params: SelectionParams,
    label_for: Callable[[Iri], str],
) -> list[TopicResult]:
    """Credit broader parent entities with a weighted share of child scores.

    Contributions are computed from the incoming direct scores in one pass;
    parents of parents are not chased. A parent that is itself a direct topic
    absorbs the contribution into its direct score, anything else enters as a
    new topic of parent origin carrying its children's lemmas.
    """
    if not params.include_parents:
        return list(topics)
    contributions: dict[Iri, float] = {}
    inherited: dict[Iri, set[str]] = {}
    for topic in topics:
        for parent, weight in parents_of(topic.entity):
            contributions[parent] = (
                contributions.get(parent, 0.0) + weight * topic.final_score
            )
            inherited.setdefault(parent, set()).update(topic.supporting_lemmas)
    combined: list[TopicResult] = []
    for topic in topics:
        extra = contributions.pop(topic.entity, 0.0)
        if extra:
            topic = TopicResult(
                entity=topic.entity,
                label=topic.label,
                final_score=topic.final_score + extra,
                supporting_lemmas=topic.supporting_lemmas,
                origin=topic.origin,
            )
        combined.append(topic)
    for parent, score in contributions.items():
        combined.append(
            TopicResult(
                entity=parent,
                label=label_for(parent),
                final_score=score,
                supporting_lemmas=frozenset(inherited[parent]),
                origin="parent",
            )
        )
    combined.sort(key=lambda t: (-t.final_score, t.entity))
    return combined


def kneedle_cutoff(scores: Sequence[float], params: SelectionParams) -> int:
    """Number of leading scores to keep, cut at the curve's knee.

    The descending curve is normalized to the unit square and compared with
    the falling diagonal; the knee is the largest gap above it. A knee only
    counts when that gap clears sensitivity/(n-1), otherwise the list is cut
    at the min_topics floor. The result never exceeds the list length and is
    never zero for a non-empty list.
    """
    n = len(scores)
    if n == 0:
        return 0
    if n < 2:
        return n
    for prev, cur in zip(scores, scores[1:]):
        if cur > prev:
            raise ValueError("scores must be sorted descending")
    floor = max(min(params.min_topics, n), 1)
    span = scores[0] - scores[-1]
    if span <= 0:
        return floor
    y = (np.asarray(scores, dtype=np.float64) - scores[-1]) / span
    x = np.linspace(0.0, 1.0, n)
    diff = y - (1.0 - x)
    knee = int(np.argmax(diff))
    if diff[knee] < params.kneedle_sensitivity / (n - 1):
        return floor
    return max(knee + 1, floor)
