"""Ranking attacks: connection-sentence insertion plus three baselines.

Every attack sees only the surrogate ranker. The insertion attack runs in
two stages: generate candidate connection sentences by blank infilling,
then try every candidate at every inter-sentence position and pick the
best trade-off between junction coherence and surrogate relevance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .coherence import AdjacencyScorer, coherence_score
from .corpus import Document, Query, Sentence, join, tokenize
from .errors import (
    EmptyCandidateSet,
    MissingLexicon,
    ParseError,
    PositionOutOfRange,
)
from .ngram import InfillRequest, NGramModel
from .utils import derive_seed

METHOD_IDEM = "idem"
METHOD_QUERY_PLUS = "query_plus"
METHOD_TOKEN_APPEND = "token_append"
METHOD_WORD_SUB = "word_sub"

SHIPPED_PROMPTS = (
    "It is known that",
    "The fact is that",
    "We know that",
    "It is about that",
)
DEFAULT_PROMPT = SHIPPED_PROMPTS[0]


@dataclass(frozen=True)
class PromptTemplate:
    """Fixed lead-in words steering the infill toward query-related content."""

    words: tuple

    def __post_init__(self):
        if not self.words:
            raise ValueError("prompt template must not be empty")

    @classmethod
    def from_text(cls, text: str) -> "PromptTemplate":
        return cls(tuple(tokenize(text)))


@dataclass(frozen=True)
class GenerationBudget:
    sample_rounds: int = 10
    samples_per_round: int = 50
    max_kept: int = 100
    max_words: int = 12
    top_k: int = 50

    def __post_init__(self):
        for name in ("sample_rounds", "samples_per_round", "max_kept", "max_words", "top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class AdversarialCandidate:
    """One grid point of the merging stage: sentence u inserted at position v."""

    sentence_index: int
    position: int
    coherence: float
    relevance: float
    coherence_norm: float = 0.0
    relevance_norm: float = 0.0
    merged: float = 0.0


@dataclass
class AttackResult:
    query_id: str
    doc_id: str
    method: str
    adversarial: Document
    perturbation: dict
    old_rank: int | None = None
    new_rank: int | None = None
    wall_clock_s: float | None = None


def build_template(
    query: Query,
    prompt: PromptTemplate | None,
    document: Document,
    budget: GenerationBudget,
    rng_seed: int,
) -> InfillRequest:
    """Compose the infilling request: punctuated query, prompt, document opening."""
    left = query.punctuated_tokens() + (prompt.words if prompt is not None else ())
    right = document.sentences[0].tokens
    return InfillRequest(
        left_context=left,
        right_context=right,
        max_words=budget.max_words,
        top_k=budget.top_k,
        rng_seed=rng_seed,
    )


def generate_connection_sentences(
    model: NGramModel, request: InfillRequest, budget: GenerationBudget
) -> list[Sentence]:
    """Stage 1: sample candidate sentences in rounds, dedup, enforce the word cap.

    Returns at most ``max_kept`` sentences in first-seen order (the order
    defines the tie-breaking index of stage 2). Deterministic: round and
    sample indices derive sub-seeds from the request seed.
    """
    kept: list[Sentence] = []
    seen: set = set()
    for round_no in range(budget.sample_rounds):
        if len(kept) >= budget.max_kept:
            break
        for sample_no in range(budget.samples_per_round):
            if len(kept) >= budget.max_kept:
                break
            sub_seed = derive_seed(request.rng_seed, round_no, sample_no)
            sentence = model.sample_infill(replace(request, rng_seed=sub_seed))
            if not sentence.tokens or sentence.word_count > budget.max_words:
                continue
            if sentence.tokens in seen:
                continue
            seen.add(sentence.tokens)
            kept.append(sentence)
    return kept


def merge_at(document: Document, sentence: Sentence, position: int) -> Document:
    """Insert a sentence at the given inter-sentence position (0..|d|)."""
    n = len(document.sentences)
    if not 0 <= position <= n:
        raise PositionOutOfRange(f"position {position} outside [0, {n}]")
    merged = document.sentences[:position] + (sentence,) + document.sentences[position:]
    return Document(document.doc_id, merged)


def min_max_normalize(values: Sequence[float]) -> list[float]:
    """Map values onto [0, 1]; a constant sequence maps to all 0.5."""
    if not values:
        raise ValueError("cannot normalize an empty sequence")
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.5] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def score_candidates(
    query: Query,
    document: Document,
    sentences: Sequence[Sentence],
    surrogate,
    scorer: AdjacencyScorer,
) -> list[AdversarialCandidate]:
    """Evaluate every (sentence, position) pair: raw coherence and relevance."""
    out: list[AdversarialCandidate] = []
    for u, sentence in enumerate(sentences):
        for v in range(len(document.sentences) + 1):
            coh = coherence_score(scorer, document, sentence, v)
            rel = surrogate.score(query, merge_at(document, sentence, v))
            out.append(AdversarialCandidate(u, v, coh, rel))
    return out


def select_best(
    candidates: Sequence[AdversarialCandidate], alpha: float
) -> AdversarialCandidate:
    """Normalize both score columns, combine, and take the argmax.

    Ties break toward the smallest (sentence_index, position), so the
    result is independent of evaluation order.
    """
    coh_norm = min_max_normalize([c.coherence for c in candidates])
    rel_norm = min_max_normalize([c.relevance for c in candidates])
    best = None
    for cand, cn, rn in zip(candidates, coh_norm, rel_norm):
        scored = replace(
            cand,
            coherence_norm=cn,
            relevance_norm=rn,
            merged=alpha * cn + (1.0 - alpha) * rn,
        )
        if (
            best is None
            or scored.merged > best.merged
            or (
                scored.merged == best.merged
                and (scored.sentence_index, scored.position)
                < (best.sentence_index, best.position)
            )
        ):
            best = scored
    return best


def idem_attack(
    query: Query,
    document: Document,
    sentences: Sequence[Sentence],
    surrogate,
    scorer: AdjacencyScorer,
    alpha: float,
    old_rank: int | None = None,
) -> AttackResult:
    """Stage 2: position-wise merging scored by the weighted objective."""
    if not sentences:
        raise EmptyCandidateSet("no connection sentences to merge")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    started = time.perf_counter()
    candidates = score_candidates(query, document, sentences, surrogate, scorer)
    best = select_best(candidates, alpha)
    chosen = sentences[best.sentence_index]
    adversarial = merge_at(document, chosen, best.position)
    elapsed = time.perf_counter() - started
    return AttackResult(
        query_id=query.query_id,
        doc_id=document.doc_id,
        method=METHOD_IDEM,
        adversarial=adversarial,
        perturbation={
            "kind": "insertion",
            "sentence": chosen.raw,
            "position": best.position,
            "original_sentence_count": len(document.sentences),
            "merged_score": best.merged,
        },
        old_rank=old_rank,
        wall_clock_s=elapsed,
    )


def query_plus(query: Query, document: Document, old_rank: int | None = None) -> AttackResult:
    """Prepend the raw query text as the first sentence.

    Not idempotent: applying it twice prepends the query twice.
    """
    started = time.perf_counter()
    prefix = Sentence(query.tokens, query.text.strip())
    adversarial = Document(document.doc_id, (prefix,) + document.sentences)
    elapsed = time.perf_counter() - started
    return AttackResult(
        query_id=query.query_id,
        doc_id=document.doc_id,
        method=METHOD_QUERY_PLUS,
        adversarial=adversarial,
        perturbation={"kind": "prefix_query", "text": query.text.strip()},
        old_rank=old_rank,
        wall_clock_s=elapsed,
    )


def token_append_attack(
    query: Query,
    document: Document,
    surrogate,
    candidate_tokens: Sequence[str],
    budget: int = 12,
    old_rank: int | None = None,
) -> AttackResult:
    """Greedy prefix construction: add the best-scoring token while it improves.

    Candidates are the supplied vocabulary (typically the top corpus-frequency
    tokens) plus the query's own word tokens. Stops at the token budget or
    when no token strictly improves the surrogate score.
    """
    started = time.perf_counter()
    pool = tuple(dict.fromkeys(tuple(candidate_tokens) + query.word_tokens))
    chosen: list[str] = []
    current_score = surrogate.score(query, document)
    for _ in range(budget):
        best_token = None
        best_score = current_score
        for token in pool:
            prefix = Sentence.from_tokens(chosen + [token])
            cand = Document(document.doc_id, (prefix,) + document.sentences)
            score = surrogate.score(query, cand)
            if score > best_score or (
                score == best_score and best_token is not None and token < best_token
            ):
                best_token = token
                best_score = score
        if best_token is None:
            break
        chosen.append(best_token)
        current_score = best_score
    if chosen:
        adversarial = Document(
            document.doc_id, (Sentence.from_tokens(chosen),) + document.sentences
        )
    else:
        adversarial = document
    elapsed = time.perf_counter() - started
    return AttackResult(
        query_id=query.query_id,
        doc_id=document.doc_id,
        method=METHOD_TOKEN_APPEND,
        adversarial=adversarial,
        perturbation={"kind": "prefix_tokens", "tokens": chosen},
        old_rank=old_rank,
        wall_clock_s=elapsed,
    )


def _replace_token(document: Document, sent_idx: int, tok_idx: int, new_token: str) -> Document:
    sentences = list(document.sentences)
    tokens = list(sentences[sent_idx].tokens)
    tokens[tok_idx] = new_token
    sentences[sent_idx] = Sentence.from_tokens(tokens)
    return Document(document.doc_id, tuple(sentences))


def _delete_token(document: Document, sent_idx: int, tok_idx: int) -> Document | None:
    sentences = list(document.sentences)
    tokens = list(sentences[sent_idx].tokens)
    del tokens[tok_idx]
    if tokens:
        sentences[sent_idx] = Sentence.from_tokens(tokens)
    else:
        del sentences[sent_idx]
    if not sentences:
        return None
    return Document(document.doc_id, tuple(sentences))


def word_sub_attack(
    query: Query,
    document: Document,
    surrogate,
    lexicon: Mapping[str, Sequence[str]],
    budget: int = 20,
    old_rank: int | None = None,
) -> AttackResult:
    """Replace the most important tokens with their best-scoring synonyms.

    Importance of a token is the surrogate score drop when it is deleted
    (exact for a linear surrogate). A replacement is applied only if it
    strictly improves the score; at most ``budget`` tokens change.
    """
    if lexicon is None:
        raise MissingLexicon("word substitution requires a synonym lexicon")
    started = time.perf_counter()
    base_score = surrogate.score(query, document)
    importance: list[tuple] = []
    for si, sentence in enumerate(document.sentences):
        for ti in range(len(sentence.tokens)):
            reduced = _delete_token(document, si, ti)
            if reduced is None:
                continue
            drop = base_score - surrogate.score(query, reduced)
            importance.append((-drop, si, ti))
    importance.sort()

    current = document
    current_score = base_score
    edits: list[dict] = []
    for _, si, ti in importance:
        if len(edits) >= budget:
            break
        token = current.sentences[si].tokens[ti]
        best_syn = None
        best_score = current_score
        for synonym in lexicon.get(token, ()):
            if synonym == token:
                continue
            cand = _replace_token(current, si, ti, synonym)
            score = surrogate.score(query, cand)
            if score > best_score or (
                score == best_score and best_syn is not None and synonym < best_syn
            ):
                best_syn = synonym
                best_score = score
        if best_syn is not None:
            current = _replace_token(current, si, ti, best_syn)
            current_score = best_score
            edits.append({"sentence": si, "token": ti, "old": token, "new": best_syn})
    elapsed = time.perf_counter() - started
    return AttackResult(
        query_id=query.query_id,
        doc_id=document.doc_id,
        method=METHOD_WORD_SUB,
        adversarial=current,
        perturbation={"kind": "substitution", "edits": edits},
        old_rank=old_rank,
        wall_clock_s=elapsed,
    )


# ----- lexicon and results IO ------------------------------------------------

def load_lexicon(path) -> dict:
    """Synonym lexicon TSV: ``word<TAB>synonym1,synonym2,...``."""
    path = Path(path)
    lexicon: dict[str, tuple] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError(path, line_no, "expected word<TAB>synonyms")
            word, synonyms = line.split("\t", 1)
            lexicon[word] = tuple(s.strip() for s in synonyms.split(",") if s.strip())
    return lexicon


def result_to_record(result: AttackResult, include_timing: bool = False) -> dict:
    record = {
        "query_id": result.query_id,
        "doc_id": result.doc_id,
        "method": result.method,
        "adversarial_text": join(result.adversarial),
        "perturbation": result.perturbation,
        "old_rank": result.old_rank,
        "new_rank": result.new_rank,
    }
    if include_timing:
        record["wall_clock_s"] = result.wall_clock_s
    return record
