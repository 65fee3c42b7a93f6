"""Junction coherence scoring for candidate insertions.

The coherence of inserting a sentence at position v composes two adjacency
scores around the junction; the adjacency scorer itself is pluggable
(builtin language-model boundary score, or a remote scorer via the bridge
client). Absolute scale does not matter: the merging step min-max
normalizes over each candidate set.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from .corpus import Document, Sentence
from .errors import PositionOutOfRange
from .ngram import NGramModel

DEFAULT_WINDOW = 8


class AdjacencyScorer(Protocol):
    def score(self, text_a: Sequence[Sentence], text_b: Sequence[Sentence]) -> float:
        """Higher means text_b more plausibly follows text_a."""
        ...


class LmAdjacencyScorer:
    """Boundary score under a shared n-gram model.

    Mean log-probability of the first ``window`` tokens of B, each
    conditioned on its actual predecessors starting from the tail of A.
    """

    def __init__(self, model: NGramModel, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.model = model
        self.window = window

    def score(self, text_a: Sequence[Sentence], text_b: Sequence[Sentence]) -> float:
        a_tokens = [t for s in text_a for t in s.tokens]
        b_tokens = [t for s in text_b for t in s.tokens]
        if not a_tokens or not b_tokens:
            raise ValueError("adjacency_score requires non-empty texts on both sides")
        n_scored = min(self.window, len(b_tokens))
        context = a_tokens[max(0, len(a_tokens) - (self.model.order - 1)) :]
        total = 0.0
        for tok in b_tokens[:n_scored]:
            total += self.model.log_prob(tok, context)
            context = (context + [tok])[-(self.model.order - 1) :] if self.model.order > 1 else []
        return total / n_scored


def adjacency_score(
    scorer: AdjacencyScorer,
    text_a: Sequence[Sentence],
    text_b: Sequence[Sentence],
) -> float:
    return scorer.score(text_a, text_b)


def coherence_score(
    scorer: AdjacencyScorer, document: Document, sentence: Sentence, position: int
) -> float:
    """Junction coherence of inserting ``sentence`` at ``position``.

    At the document edges this is a single adjacency score; inside, it is
    the plain average of the two junction scores (before/after the inserted
    sentence).
    """
    n = len(document.sentences)
    if not 0 <= position <= n:
        raise PositionOutOfRange(f"position {position} outside [0, {n}]")
    body = document.sentences
    if position == 0:
        return scorer.score((sentence,), body)
    if position == n:
        return scorer.score(body, (sentence,))
    before = body[:position]
    after = body[position:]
    return 0.5 * (
        scorer.score(before, (sentence,) + after)
        + scorer.score(before + (sentence,), after)
    )
