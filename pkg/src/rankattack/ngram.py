"""Backoff n-gram language model: infilling generation and perplexity.

Interpolated absolute discounting over per-order sentence-padded counts.
Each order k is counted from its own stream (k-1 lead markers plus one end
marker per sentence), so dropping the top order reproduces the lower-order
model exactly.
"""

from __future__ import annotations

import json
import math
import random
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, Document, Sentence, TERMINAL_MARKS, is_word
from .errors import EmptyCorpus, EmptyDocument, ParseError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


@dataclass
class InfillRequest:
    """One generation call: fill text between a left and a right context."""

    left_context: tuple
    right_context: tuple
    max_words: int
    top_k: int
    rng_seed: int

    def __post_init__(self):
        if self.max_words < 1:
            raise ValueError("max_words must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class NGramModel:
    order: int
    discount: float
    counts: dict  # order k -> {context tuple (len k-1) -> Counter(token)}
    context_totals: dict  # order k -> {context tuple -> total count}
    vocab: frozenset
    _pool_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _unigram_ranking: tuple = field(default=None, repr=False, compare=False)

    # ----- probabilities -------------------------------------------------

    def _map_token(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def _map_context(self, context: Sequence[str]) -> tuple:
        ctx = tuple(context)[-(self.order - 1) :] if self.order > 1 else ()
        return tuple(t if (t in self.vocab or t == BOS) else UNK for t in ctx)

    def _prob(self, token: str, ctx: tuple) -> float:
        if not ctx:
            total = self.context_totals.get(1, {}).get((), 0)
            uniform = 1.0 / len(self.vocab)
            if total == 0:
                return uniform
            table = self.counts[1][()]
            c = table.get(token, 0)
            distinct = len(table)
            return max(c - self.discount, 0.0) / total + (
                self.discount * distinct / total
            ) * uniform
        k = len(ctx) + 1
        table = self.counts.get(k, {}).get(ctx)
        if not table:
            return self._prob(token, ctx[1:])
        total = self.context_totals[k][ctx]
        c = table.get(token, 0)
        distinct = len(table)
        return max(c - self.discount, 0.0) / total + (
            self.discount * distinct / total
        ) * self._prob(token, ctx[1:])

    def probability(self, token: str, context: Sequence[str] = ()) -> float:
        """P(token | context), using the longest matching context suffix.

        Out-of-vocabulary tokens map to the reserved UNK symbol; the result
        is always strictly positive.
        """
        return self._prob(self._map_token(token), self._map_context(context))

    def log_prob(self, token: str, context: Sequence[str] = ()) -> float:
        return math.log(self.probability(token, context))

    def distribution(self, context: Sequence[str] = ()) -> dict:
        """Full conditional distribution over the vocabulary (test/debug use)."""
        ctx = self._map_context(context)
        return {t: self._prob(t, ctx) for t in sorted(self.vocab)}

    # ----- sampling -------------------------------------------------------

    def _ranked_unigrams(self) -> tuple:
        if self._unigram_ranking is None:
            self._unigram_ranking = tuple(
                sorted(self.vocab, key=lambda t: (-self._prob(t, ()), t))
            )
        return self._unigram_ranking

    def _top_pool(self, ctx: tuple, m: int) -> tuple:
        """The m most probable continuations of ctx, as (token, prob) pairs.

        Any token unseen after ctx has probability proportional to the
        backoff distribution, so the true top-m is contained in the seen
        continuations of ctx plus the top-m of the backoff context.
        """
        key = (ctx, m)
        cached = self._pool_cache.get(key)
        if cached is not None:
            return cached
        if not ctx:
            candidates = self._ranked_unigrams()[: m + 4]
        else:
            table = self.counts.get(len(ctx) + 1, {}).get(ctx)
            lower = self._top_pool(ctx[1:], m)
            cand = set(t for t, _ in lower)
            if table:
                cand.update(table.keys())
            candidates = cand
        scored = sorted(
            ((t, self._prob(t, ctx)) for t in candidates),
            key=lambda tp: (-tp[1], tp[0]),
        )[:m]
        pool = tuple(scored)
        self._pool_cache[key] = pool
        return pool

    def sample_infill(self, request: InfillRequest) -> Sentence:
        """Generate one sentence by seeded top-k sampling from the left context.

        Generation stops at a terminal punctuation token, a sentence-end
        draw, or max_words words, whichever comes first.
        """
        rng = random.Random(request.rng_seed)
        ctx = self._map_context(request.left_context)
        tokens: list[str] = []
        words = 0
        # Guards pathological punctuation-only cycles in degenerate models.
        max_tokens = 4 * request.max_words + 4
        while words < request.max_words and len(tokens) < max_tokens:
            exclude = {UNK} if tokens else {UNK, EOS}
            pool = self._top_pool(ctx, request.top_k + len(exclude))
            kept = [(t, p) for t, p in pool if t not in exclude][: request.top_k]
            if not kept:
                break
            cum = list(accumulate(p for _, p in kept))
            tok = kept[bisect_right(cum, rng.random() * cum[-1])][0]
            if tok == EOS:
                break
            tokens.append(tok)
            if tok in TERMINAL_MARKS:
                break
            if is_word(tok):
                words += 1
            if self.order > 1:
                ctx = (ctx + (tok,))[-(self.order - 1) :]
        return Sentence.from_tokens(tokens)

    # ----- constructors ---------------------------------------------------

    @classmethod
    def uniform(cls, vocab: Iterable[str]) -> "NGramModel":
        """Count-free unigram model: exactly uniform over vocab + end marker."""
        full = frozenset(vocab) | {EOS}
        return cls(order=1, discount=0.5, counts={1: {}}, context_totals={1: {}}, vocab=full)


def train(corpus: Corpus, order: int = 3, discount: float = 0.75) -> NGramModel:
    """Count every n-gram of every document, all orders up to n.

    Each document is one stream padded at its edges (lead markers plus one
    end marker per order); sentence boundaries stay in-stream as their
    terminal punctuation tokens, so cross-sentence transitions are learned.
    """
    if not isinstance(order, int) or order < 1:
        raise ValueError("order must be a positive integer")
    if not 0 < discount < 1:
        raise ValueError("discount must be in (0, 1)")
    if len(corpus) == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    counts: dict[int, dict] = {k: {} for k in range(1, order + 1)}
    vocab: set[str] = {EOS, UNK}
    for doc in corpus:
        tokens = doc.all_tokens
        vocab.update(tokens)
        for k in range(1, order + 1):
            seq = (BOS,) * (k - 1) + tokens + (EOS,)
            for i in range(k - 1, len(seq)):
                ctx = seq[i - k + 1 : i]
                table = counts[k].setdefault(ctx, Counter())
                table[seq[i]] += 1
    totals = {
        k: {ctx: sum(table.values()) for ctx, table in tables.items()}
        for k, tables in counts.items()
    }
    return NGramModel(order, discount, counts, totals, frozenset(vocab))


def perplexity(model: NGramModel, document: Document) -> float:
    """exp of the mean negative log-probability per token, with boundary padding.

    The document is scored as one stream (matching training): its tokens
    plus one end-of-document event.
    """
    if not document.sentences:
        raise EmptyDocument("cannot compute perplexity of an empty document")
    total_lp = 0.0
    n_events = 0
    ctx = (BOS,) * (model.order - 1)
    for tok in document.all_tokens + (EOS,):
        total_lp += model.log_prob(tok, ctx)
        n_events += 1
        if model.order > 1:
            ctx = (ctx + (model._map_token(tok),))[-(model.order - 1) :]
    return math.exp(-total_lp / n_events)


# ----- persistence ---------------------------------------------------------

def save_model(model: NGramModel, path) -> None:
    """Write the model as a line-oriented count file (documented, versioned)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": "ngram-counts",
            "version": 1,
            "order": model.order,
            "discount": model.discount,
            "vocab": sorted(model.vocab),
        }
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
        for k in sorted(model.counts):
            for ctx in sorted(model.counts[k]):
                table = model.counts[k][ctx]
                for tok in sorted(table):
                    fh.write(f"{k}\t{' '.join(ctx)}\t{tok}\t{table[tok]}\n")


def load_model(path) -> NGramModel:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise ParseError(path, 1, f"bad model header: {exc}") from exc
        if header.get("format") != "ngram-counts" or header.get("version") != 1:
            raise ParseError(path, 1, "unsupported model file format/version")
        order = int(header["order"])
        discount = float(header["discount"])
        vocab = frozenset(header["vocab"])
        counts: dict[int, dict] = {k: {} for k in range(1, order + 1)}
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(path, line_no, "expected order<TAB>context<TAB>token<TAB>count")
            k = int(parts[0])
            ctx = tuple(parts[1].split(" ")) if parts[1] else ()
            if k not in counts or len(ctx) != k - 1:
                raise ParseError(path, line_no, f"inconsistent context length for order {k}")
            counts[k].setdefault(ctx, Counter())[parts[2]] = int(parts[3])
    totals = {
        k: {ctx: sum(table.values()) for ctx, table in tables.items()}
        for k, tables in counts.items()
    }
    return NGramModel(order, discount, counts, totals, vocab)
