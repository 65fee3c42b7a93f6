"""Relevance scoring and ranking.

BM25 first-stage retrieval, a pairwise-trained linear ranker used both as
the attacker's surrogate and as the simulated victim, surrogate training
data construction from observed rankings, and TREC-format run file IO.

The victim is the same model family behind a rank-only interface: attacks
never see its scores, weights, or features, only ranked lists.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, CorpusStats, Document, Query
from .errors import (
    DegenerateFeatures,
    EmptyList,
    ListTooShort,
    ParseError,
    UnknownDocId,
)

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

FEATURE_NAMES = (
    "bm25",
    "coverage",
    "idf_coverage",
    "query_tf_sum",
    "query_bigram_matches",
    "length_ratio",
    "first_match_rr",
)

# Hidden-ranker base weights; the simulated victim perturbs these per seed.
# Term coverage dominates; raw BM25 mass acts as a tie-breaker, so imitating
# the victim means learning the balance, not copying one feature.
_VICTIM_BASE_WEIGHTS = (0.15, 4.0, 3.0, 0.6, 1.5, -0.6, 0.4)


@dataclass(frozen=True)
class RankedList:
    """Per-query ordered doc ids; rank of position i is i + 1 (no scores)."""

    query_id: str
    doc_ids: tuple

    def __post_init__(self):
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError(f"duplicate doc_ids in ranked list for {self.query_id!r}")

    def __len__(self) -> int:
        return len(self.doc_ids)

    @property
    def entries(self) -> tuple:
        return tuple((doc_id, i + 1) for i, doc_id in enumerate(self.doc_ids))

    def rank_of(self, doc_id: str) -> int:
        return self.doc_ids.index(doc_id) + 1

    def top(self, k: int) -> tuple:
        return self.doc_ids[:k]


@dataclass(frozen=True)
class SurrogatePairSet:
    """(query_id, positive doc_id, negative doc_id) preference triples."""

    triples: tuple

    def __len__(self) -> int:
        return len(self.triples)

    def __add__(self, other: "SurrogatePairSet") -> "SurrogatePairSet":
        return SurrogatePairSet(self.triples + other.triples)


def idf(stats: CorpusStats, term: str) -> float:
    """Positive-valued Okapi idf: ln(1 + (N - df + 0.5) / (df + 0.5))."""
    df = stats.df.get(term, 0)
    return math.log(1.0 + (stats.n_docs - df + 0.5) / (df + 0.5))


def bm25_score(
    stats: CorpusStats,
    query: Query,
    document: Document,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """Okapi BM25 over the query's unique word terms; 0 when nothing matches."""
    counts = document.token_counts
    norm = k1 * (1.0 - b + b * document.length / stats.avg_len)
    score = 0.0
    for term in dict.fromkeys(query.word_tokens):
        tf = counts.get(term, 0)
        if tf:
            score += idf(stats, term) * tf * (k1 + 1.0) / (tf + norm)
    return score


class FeatureExtractor:
    """Fixed query-document feature map shared by surrogate and victim."""

    def __init__(self, stats: CorpusStats, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.stats = stats
        self.k1 = k1
        self.b = b

    def features(self, query: Query, document: Document) -> tuple:
        counts = document.token_counts
        terms = tuple(dict.fromkeys(query.word_tokens))
        term_set = set(terms)
        matched = [t for t in terms if counts.get(t)]

        coverage = len(matched) / len(terms) if terms else 0.0
        idf_total = sum(idf(self.stats, t) for t in terms)
        idf_cov = (
            sum(idf(self.stats, t) for t in matched) / idf_total if idf_total > 0 else 0.0
        )
        tf_sum = float(sum(counts.get(t, 0) for t in terms))

        q_words = query.word_tokens
        q_bigrams = set(zip(q_words, q_words[1:]))
        bigram_matches = 0.0
        if q_bigrams:
            d_tokens = document.all_tokens
            matched_pairs = q_bigrams & set(zip(d_tokens, d_tokens[1:]))
            bigram_matches = float(len(matched_pairs))

        length_ratio = document.length / self.stats.avg_len
        first_match = 0.0
        for i, tok in enumerate(document.all_tokens):
            if tok in term_set:
                first_match = 1.0 / (1.0 + i)
                break

        return (
            bm25_score(self.stats, query, document, self.k1, self.b),
            coverage,
            idf_cov,
            tf_sum,
            bigram_matches,
            length_ratio,
            first_match,
        )


@dataclass
class TrainingMeta:
    loss_curve: tuple
    epochs: int
    margin: float
    learning_rate: float


class LinearRanker:
    """Inner-product ranker over the fixed feature map. Deterministic."""

    def __init__(
        self,
        extractor: FeatureExtractor,
        weights: Sequence[float],
        training_meta: TrainingMeta | None = None,
    ):
        if len(weights) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} weights, got {len(weights)}")
        self.extractor = extractor
        self.weights = tuple(float(w) for w in weights)
        self.training_meta = training_meta

    def score(self, query: Query, document: Document) -> float:
        feats = self.extractor.features(query, document)
        w = self.weights
        return (
            w[0] * feats[0]
            + w[1] * feats[1]
            + w[2] * feats[2]
            + w[3] * feats[3]
            + w[4] * feats[4]
            + w[5] * feats[5]
            + w[6] * feats[6]
        )


def hinge_loss(pos_score: float, neg_score: float, margin: float) -> float:
    """max(0, margin - (pos_score - neg_score))."""
    return max(0.0, margin - (pos_score - neg_score))


def retrieve_top(corpus: Corpus, query: Query, limit: int, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> RankedList:
    """Top-limit documents by BM25, ties broken by lexicographic doc_id."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    scored = sorted(
        ((doc.doc_id, bm25_score(corpus.stats, query, doc, k1, b)) for doc in corpus),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return RankedList(query.query_id, tuple(doc_id for doc_id, _ in scored[:limit]))


def build_pairs(ranked: RankedList, top_r: int) -> SurrogatePairSet:
    """All ordered preference pairs (d_j above d_k) with j < k <= top_r."""
    if top_r > len(ranked):
        raise ListTooShort(
            f"need {top_r} ranked documents for {ranked.query_id!r}, have {len(ranked)}"
        )
    ids = ranked.doc_ids[:top_r]
    triples = tuple(
        (ranked.query_id, ids[j], ids[k])
        for j in range(len(ids))
        for k in range(j + 1, len(ids))
    )
    return SurrogatePairSet(triples)


def train_surrogate(
    pairs: SurrogatePairSet,
    corpus: Corpus,
    queries: Mapping[str, Query],
    epochs: int = 300,
    learning_rate: float = 0.05,
    margin: float = 1.0,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> LinearRanker:
    """Full-batch subgradient descent on mean hinge loss over preference pairs.

    Feature columns are standardized over the pair set during optimization
    (otherwise the largest-scale feature absorbs all the weight); the
    returned weights are folded back into raw feature space. Deterministic
    for a fixed pair order. Weights start at zero, so zero epochs returns
    the initialization unchanged.
    """
    if len(pairs) == 0:
        raise EmptyList("cannot train a surrogate on an empty pair set")
    extractor = FeatureExtractor(corpus.stats, k1, b)
    feat_cache: dict = {}

    def feats(query_id: str, doc_id: str) -> tuple:
        key = (query_id, doc_id)
        if key not in feat_cache:
            feat_cache[key] = extractor.features(queries[query_id], corpus.get(doc_id))
        return feat_cache[key]

    diffs = np.array(
        [
            np.subtract(feats(qid, pos), feats(qid, neg))
            for qid, pos, neg in pairs.triples
        ],
        dtype=float,
    )
    for i, name in enumerate(FEATURE_NAMES):
        if np.all(diffs[:, i] == 0.0):
            warnings.warn(
                f"feature {name!r} is constant across all training pairs",
                DegenerateFeatures,
                stacklevel=2,
            )

    scale = diffs.std(axis=0)
    scale[scale == 0.0] = 1.0
    scaled = diffs / scale
    w = np.zeros(len(FEATURE_NAMES))
    losses: list[float] = []
    for _ in range(epochs):
        scores = scaled @ w
        violating = scores < margin
        if violating.any():
            w = w + learning_rate * scaled[violating].sum(axis=0) / len(scaled)
        losses.append(float(np.maximum(0.0, margin - scaled @ w).mean()))
    meta = TrainingMeta(tuple(losses), epochs, margin, learning_rate)
    return LinearRanker(extractor, (w / scale).tolist(), meta)


def rerank(
    ranker: LinearRanker,
    query: Query,
    candidates: RankedList,
    documents: Mapping[str, Document],
) -> RankedList:
    """Reorder candidates by descending ranker score, ties by doc_id.

    The output carries ranks only; scores never leave this function.
    """
    if len(candidates) == 0:
        raise EmptyList(f"no candidates to rerank for {query.query_id!r}")
    scored = []
    for doc_id in candidates.doc_ids:
        if doc_id not in documents:
            raise UnknownDocId(f"candidate {doc_id!r} not in collection")
        scored.append((doc_id, ranker.score(query, documents[doc_id])))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankedList(query.query_id, tuple(doc_id for doc_id, _ in scored))


class VictimFeatureExtractor(FeatureExtractor):
    """The hidden victim's own feature shaping.

    Same dimensionality, different response curves: term-frequency mass
    saturates (log), coverage is rewarded convexly, phrase evidence counts
    only corpus-attested collocations (capped), and repeating one query
    term beyond a natural level reads as keyword stuffing. The surrogate
    never sees these internals; it has to imitate them from ranked lists
    alone, so imitation quality depends on how much data it harvested.
    """

    _ATTESTED_MIN_CF = 5

    def features(self, query: Query, document: Document) -> tuple:
        base = super().features(query, document)
        q_words = query.word_tokens
        attested = {
            pair
            for pair in zip(q_words, q_words[1:])
            if self.stats.bigram_cf.get(pair, 0) >= self._ATTESTED_MIN_CF
        }
        phrase_hits = 0.0
        if attested:
            d_tokens = document.all_tokens
            phrase_hits = float(
                sum(1 for pair in zip(d_tokens, d_tokens[1:]) if pair in attested)
            )
        return (
            base[0],
            base[1] ** 2,
            base[2],
            math.log1p(base[3]),
            min(phrase_hits, 2.0),
            base[5],
            base[6],
        )


class VictimRanker:
    """The black-box ranker under attack: exposes ranked lists, never scores."""

    def __init__(self, ranker: LinearRanker):
        self._ranker = ranker

    @classmethod
    def create(cls, extractor: FeatureExtractor, seed: int) -> "VictimRanker":
        """A hidden linear ranker: victim features, seeded weight perturbation."""
        rng = random.Random(seed)
        weights = [w * (1.0 + 0.6 * (rng.random() - 0.5)) for w in _VICTIM_BASE_WEIGHTS]
        hidden = VictimFeatureExtractor(extractor.stats, extractor.k1, extractor.b)
        return cls(LinearRanker(hidden, weights))

    def rank(
        self, query: Query, candidates: RankedList, documents: Mapping[str, Document]
    ) -> RankedList:
        return rerank(self._ranker, query, candidates, documents)


# ----- persistence and run files --------------------------------------------

def save_ranker(ranker: LinearRanker, path) -> None:
    payload = {
        "format": "linear-ranker",
        "version": 1,
        "feature_names": list(FEATURE_NAMES),
        "weights": list(ranker.weights),
        "k1": ranker.extractor.k1,
        "b": ranker.extractor.b,
    }
    if ranker.training_meta is not None:
        payload["training_meta"] = {
            "loss_curve": list(ranker.training_meta.loss_curve),
            "epochs": ranker.training_meta.epochs,
            "margin": ranker.training_meta.margin,
            "learning_rate": ranker.training_meta.learning_rate,
        }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_ranker(path, stats: CorpusStats) -> LinearRanker:
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != "linear-ranker" or payload.get("version") != 1:
        raise ParseError(path, 1, "unsupported ranker file format/version")
    meta = None
    if "training_meta" in payload:
        tm = payload["training_meta"]
        meta = TrainingMeta(
            tuple(tm["loss_curve"]), tm["epochs"], tm["margin"], tm["learning_rate"]
        )
    extractor = FeatureExtractor(stats, payload["k1"], payload["b"])
    return LinearRanker(extractor, payload["weights"], meta)


def write_trec_run(ranked_lists: Iterable[RankedList], path, tag: str) -> None:
    """TREC run format: ``query_id Q0 doc_id rank score tag``.

    Rank-only sources get a placeholder score of 1/rank, which preserves the
    ordering for standard tools without leaking model scores.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for ranked in ranked_lists:
            for doc_id, rank in ranked.entries:
                fh.write(f"{ranked.query_id} Q0 {doc_id} {rank} {1.0 / rank:.6f} {tag}\n")


def read_trec_run(path) -> dict:
    """Read a TREC run file into {query_id: RankedList} (rank order enforced)."""
    path = Path(path)
    by_query: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(path, line_no, "expected 6 whitespace-separated fields")
            query_id, _, doc_id, rank = parts[0], parts[1], parts[2], parts[3]
            by_query.setdefault(query_id, []).append((int(rank), doc_id))
    out = {}
    for query_id, entries in by_query.items():
        entries.sort()
        ranks = [r for r, _ in entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ParseError(path, 0, f"ranks for {query_id!r} are not contiguous from 1")
        out[query_id] = RankedList(query_id, tuple(doc_id for _, doc_id in entries))
    return out


def read_qrels(path) -> dict:
    """Read qrels TSV ``query_id 0 doc_id label`` into {query_id: {doc_id: label}}."""
    path = Path(path)
    qrels: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(path, line_no, "expected query_id 0 doc_id label")
            qrels.setdefault(parts[0], {})[parts[2]] = int(parts[3])
    return qrels
