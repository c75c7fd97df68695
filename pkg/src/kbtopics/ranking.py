"""Candidate scoring against a mention.

Each candidate contributes one row per text property of itself and of every
entity in its cached neighborhood. Three similarities are computed per row
(lexical n-gram, mention embedding, sentence embedding), squashed through a
generalized-logistic activation

    a(x) = (1 + exp(alpha - beta*x)) ** -2

and combined:

    d_i = w_f,i * (w_l*a(lex_i) + w_sm*a(sem_i) + w_sc*a(ctx_i)) / (1 + w_e,i)

where w_f,i is the row's text-field search weight and w_e,i the graph
distance of the row's owning entity from the candidate (0 for the candidate
itself). The candidate's score is the sum over rows. The activation floor
a(0) > 0 means unrelated rows leak a little mass; that is intentional, the
function's range is (0, 1).

An optional lookup table with linear interpolation replaces exact
activation; its error is far below the 1e-4 budget at the default
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .kb import Iri
from .vectors import SparseVector


@dataclass(frozen=True)
class RankingParams:
    w_l: float = 1.0
    w_sm: float = 1.0
    w_sc: float = 0.5
    alpha: float = 4.0
    beta: float = 8.0
    use_lut: bool = False
    lut_resolution: int = 4096

    def __post_init__(self) -> None:
        if min(self.w_l, self.w_sm, self.w_sc) < 0:
            raise ConfigError("similarity component weights must be nonnegative")
        if self.w_l + self.w_sm + self.w_sc <= 0:
            raise ConfigError("at least one similarity component weight must be positive")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.lut_resolution < 2:
            raise ConfigError("lut_resolution must be at least 2")


def activation(x, alpha: float = 4.0, beta: float = 8.0):
    """a(x) = (1 + exp(alpha - beta*x))^-2, strictly increasing, range (0,1).

    Accepts scalars or arrays; a(alpha/beta) = 0.25 exactly.
    """
    return (1.0 + np.exp(alpha - beta * np.asarray(x, dtype=np.float64))) ** -2.0


class ActivationTable:
    """Tabulated activation over [-1, 1] with linear interpolation.

    Inputs are clipped to the table range; cosines never leave it.
    """

    def __init__(self, alpha: float, beta: float, resolution: int = 4096):
        self.xs = np.linspace(-1.0, 1.0, resolution + 1)
        self.ys = activation(self.xs, alpha, beta)

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.clip(x, -1.0, 1.0), self.xs, self.ys)


@dataclass(frozen=True)
class MentionVectors:
    """The three query vectors of one mention: lexical surface, semantic
    surface, semantic sentence context."""

    lex: SparseVector
    sem: np.ndarray
    ctx: np.ndarray


@dataclass(frozen=True)
class CandidateBlock:
    """All scoring rows of one candidate: its own texts plus the texts of
    its neighborhood, with per-row field weights and owner distances."""

    entity: Iri
    lex_rows: tuple[SparseVector, ...]
    sem_matrix: np.ndarray            # (n, D), rows unit-length or zero
    field_weights: np.ndarray         # (n,)
    distances: np.ndarray             # (n,), w_e of each row's owner

    def __post_init__(self) -> None:
        n = len(self.lex_rows)
        if not (self.sem_matrix.shape[0] == self.field_weights.shape[0]
                == self.distances.shape[0] == n):
            raise ValueError("candidate block row counts disagree")

    def __len__(self) -> int:
        return len(self.lex_rows)


@dataclass(frozen=True)
class ScoredCandidate:
    entity: Iri
    mention_index: int
    score: float
    boost: float = 1.0

    @property
    def effective(self) -> float:
        return self.score * self.boost


def _lexical_cosines(rows: tuple[SparseVector, ...], query: SparseVector) -> np.ndarray:
    """Dot products of sparse unit rows with the sparse unit query.

    Only the query's keys matter, so rows are projected onto them and the
    whole block reduces to one dense matrix-vector product.
    """
    if not query or not rows:
        return np.zeros(len(rows))
    keys = list(query)
    values = np.array([query[k] for k in keys])
    dense = np.array([[row.get(k, 0.0) for k in keys] for row in rows])
    return dense @ values


def score_candidate(
    mention: MentionVectors, block: CandidateBlock, params: RankingParams,
    lut: ActivationTable | None = None,
) -> float:
    """Total activated, field-weighted, distance-attenuated similarity."""
    if len(block) == 0:
        return 0.0
    act = lut if (lut is not None and params.use_lut) else (
        lambda x: activation(x, params.alpha, params.beta))
    lex = _lexical_cosines(block.lex_rows, mention.lex)
    sem = block.sem_matrix @ mention.sem
    ctx = block.sem_matrix @ mention.ctx
    per_row = (params.w_l * act(lex) + params.w_sm * act(sem) + params.w_sc * act(ctx))
    return float(np.sum(block.field_weights * per_row / (1.0 + block.distances)))


def rank_candidates(
    mention: MentionVectors,
    blocks: Sequence[CandidateBlock],
    params: RankingParams,
    mention_index: int = 0,
    lut: ActivationTable | None = None,
) -> list[ScoredCandidate]:
    """Score every block; descending by score, ties broken by entity IRI."""
    scored = [
        ScoredCandidate(b.entity, mention_index, score_candidate(mention, b, params, lut))
        for b in blocks
    ]
    scored.sort(key=lambda c: (-c.score, c.entity))
    return scored
