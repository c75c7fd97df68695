"""Bounded weighted neighborhood expansion.

For each seed entity we collect every node reachable within ``max_depth``
hops whose cheapest admissible path costs at most ``max_distance``, together
with that minimal cost. Plain Dijkstra is not enough: under a hop bound a
longer-but-shallower path can dominate a shorter-but-deeper one, so the
search keeps a Pareto frontier of (depth, distance) labels per node and
prunes anything dominated on both axes.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ConfigError
from .kb import Iri

logger = logging.getLogger(__name__)

Adjacency = Mapping[Iri, tuple[tuple[Iri, float], ...]]

PROGRESS_EVERY = 1000


@dataclass(frozen=True)
class ExpansionParams:
    max_depth: int = 3
    max_distance: float = 4.0
    max_neighbors: int = 512

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be at least 1, got {self.max_depth}")
        if self.max_distance <= 0:
            raise ConfigError("max_distance must be positive")
        if self.max_neighbors < 1:
            raise ConfigError("max_neighbors must be at least 1")


@dataclass(frozen=True)
class Neighborhood:
    """Entities near a seed with their minimal admissible distances.

    ``neighbors`` is sorted ascending by (distance, entity) and always starts
    with (seed, 0.0).
    """

    seed: Iri
    neighbors: tuple[tuple[Iri, float], ...]

    def distances(self) -> dict[Iri, float]:
        return dict(self.neighbors)

    def __len__(self) -> int:
        return len(self.neighbors)


def _admit(labels: dict[Iri, list[tuple[int, float]]], node: Iri,
           depth: int, dist: float) -> bool:
    """Record (depth, dist) for node unless an existing label dominates it;
    drop labels the new one dominates."""
    existing = labels.get(node)
    if existing is None:
        labels[node] = [(depth, dist)]
        return True
    for d0, w0 in existing:
        if d0 <= depth and w0 <= dist:
            return False
    existing[:] = [(d0, w0) for d0, w0 in existing if not (depth <= d0 and dist <= w0)]
    existing.append((depth, dist))
    return True


def expand(edges: Adjacency, seed: Iri, params: ExpansionParams | None = None) -> Neighborhood:
    """Best-first traversal from seed under the depth and distance bounds."""
    params = params or ExpansionParams()
    labels: dict[Iri, list[tuple[int, float]]] = {seed: [(0, 0.0)]}
    best: dict[Iri, float] = {}
    heap: list[tuple[float, Iri, int]] = [(0.0, seed, 0)]
    while heap:
        dist, node, depth = heapq.heappop(heap)
        if (depth, dist) not in labels[node]:
            continue  # superseded by a dominating label after being queued
        prev = best.get(node)
        if prev is None or dist < prev:
            best[node] = dist
        if depth == params.max_depth:
            continue
        for target, weight in edges.get(node, ()):
            nd = dist + weight
            if nd > params.max_distance:
                break  # neighbors sorted by weight, the rest are farther
            if _admit(labels, target, depth + 1, nd):
                heapq.heappush(heap, (nd, target, depth + 1))
    neighbors = sorted(best.items(), key=lambda kv: (kv[1], kv[0]))
    if len(neighbors) > params.max_neighbors:
        neighbors = neighbors[: params.max_neighbors]
    return Neighborhood(seed, tuple(neighbors))


def expand_all(
    edges: Adjacency, entities: Iterable[Iri], params: ExpansionParams | None = None
) -> dict[Iri, Neighborhood]:
    """Expand every entity; equivalent to calling expand per seed."""
    params = params or ExpansionParams()
    out: dict[Iri, Neighborhood] = {}
    for i, entity in enumerate(entities, start=1):
        out[entity] = expand(edges, entity, params)
        if i % PROGRESS_EVERY == 0:
            logger.info("expanded %d entities", i)
    return out
