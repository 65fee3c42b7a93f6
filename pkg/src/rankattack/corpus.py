"""Text ingestion: tokenization, sentence segmentation, and collections.

The tokenizer is deliberately plain: lowercase, split on whitespace, and
isolate ASCII punctuation as single-character tokens. Everything downstream
(budgets, language models, ranking features) counts the same units, so the
whole pipeline stays reproducible.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DuplicateDocId, EmptyDocument, ParseError

TERMINAL_MARKS = frozenset(".!?")
_ASCII_PUNCT = frozenset("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")

# Lead words that make an unpunctuated query read as a question.
_INTERROGATIVES = frozenset(
    "what who whom whose when where why how which is are was were do does did "
    "can could should would will".split()
)


def is_punctuation(token: str) -> bool:
    return len(token) == 1 and token in _ASCII_PUNCT


def is_word(token: str) -> bool:
    return not is_punctuation(token)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, isolate punctuation marks.

    Deterministic and idempotent: ``tokenize(" ".join(tokens)) == tokens``
    for any token list this function can produce.
    """
    tokens: list[str] = []
    buf: list[str] = []
    for ch in text.lower():
        if ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf.clear()
        elif ch in _ASCII_PUNCT:
            if buf:
                tokens.append("".join(buf))
                buf.clear()
            tokens.append(ch)
        else:
            buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    return tokens


@dataclass(frozen=True)
class Sentence:
    """An ordered token sequence plus the surface span it came from."""

    tokens: tuple[str, ...]
    raw: str

    @classmethod
    def from_raw(cls, raw: str) -> "Sentence":
        raw = raw.strip()
        return cls(tuple(tokenize(raw)), raw)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Sentence":
        toks = tuple(tokens)
        return cls(toks, " ".join(toks))

    @property
    def word_count(self) -> int:
        return sum(1 for t in self.tokens if is_word(t))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class Document:
    """A document identifier plus its ordered sentences."""

    doc_id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        if not self.sentences:
            raise EmptyDocument(f"document {self.doc_id!r} has no sentences")

    @cached_property
    def all_tokens(self) -> tuple[str, ...]:
        out: list[str] = []
        for s in self.sentences:
            out.extend(s.tokens)
        return tuple(out)

    @cached_property
    def token_counts(self) -> Counter:
        return Counter(self.all_tokens)

    @property
    def length(self) -> int:
        return len(self.all_tokens)

    @classmethod
    def from_text(cls, doc_id: str, text: str) -> "Document":
        return cls(doc_id, tuple(segment_sentences(text)))


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    tokens: tuple[str, ...]
    terminal_punctuated: bool

    @classmethod
    def from_text(cls, query_id: str, text: str) -> "Query":
        toks = tuple(tokenize(text))
        punctuated = bool(toks) and toks[-1] in TERMINAL_MARKS
        return cls(query_id, text, toks, punctuated)

    def punctuated_tokens(self) -> tuple[str, ...]:
        """Query tokens, guaranteed to end with a terminal mark."""
        if self.terminal_punctuated:
            return self.tokens
        mark = "?" if self.tokens and self.tokens[0] in _INTERROGATIVES else "."
        return self.tokens + (mark,)

    @property
    def word_tokens(self) -> tuple[str, ...]:
        return tuple(t for t in self.tokens if is_word(t))


def segment_sentences(text: str) -> list[Sentence]:
    """Split text into sentences after '.', '!', '?' followed by whitespace.

    Single pass, no abbreviation dictionary. Text without terminal marks is
    one sentence. Raises EmptyDocument on empty or whitespace-only input.
    """
    if not text or not text.strip():
        raise EmptyDocument("cannot segment empty text")
    spans: list[str] = []
    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch in TERMINAL_MARKS and (i + 1 == n or text[i + 1].isspace()):
            raw = text[start : i + 1].strip()
            if raw:
                spans.append(raw)
            start = i + 1
    tail = text[start:].strip()
    if tail:
        spans.append(tail)
    return [Sentence.from_raw(raw) for raw in spans]


def join(document: Document) -> str:
    """Serialize a document: sentence raws joined by single spaces."""
    return " ".join(s.raw for s in document.sentences)


@dataclass
class CorpusStats:
    """Collection statistics: recomputable from the documents at any time."""

    n_docs: int
    total_tokens: int
    avg_len: float
    df: dict  # term -> number of documents containing it
    cf: dict  # term -> total occurrences in the collection
    bigram_cf: dict  # (token, token) -> adjacent-pair occurrences
    _top_tokens_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_documents(cls, documents: Iterable[Document]) -> "CorpusStats":
        df: Counter = Counter()
        cf: Counter = Counter()
        bigram_cf: Counter = Counter()
        n_docs = 0
        total = 0
        for doc in documents:
            n_docs += 1
            total += doc.length
            counts = doc.token_counts
            cf.update(counts)
            df.update(counts.keys())
            tokens = doc.all_tokens
            bigram_cf.update(zip(tokens, tokens[1:]))
        avg = total / n_docs if n_docs else 0.0
        return cls(n_docs, total, avg, dict(df), dict(cf), dict(bigram_cf))

    @property
    def vocabulary(self) -> frozenset:
        return frozenset(self.df)

    def top_tokens(self, limit: int) -> tuple[str, ...]:
        """Most frequent word tokens by collection frequency (punctuation excluded)."""
        if limit not in self._top_tokens_cache:
            words = sorted(
                (t for t in self.cf if is_word(t)),
                key=lambda t: (-self.cf[t], t),
            )
            self._top_tokens_cache[limit] = tuple(words[:limit])
        return self._top_tokens_cache[limit]


@dataclass
class Corpus:
    documents: dict
    stats: CorpusStats

    @classmethod
    def from_documents(cls, documents: Iterable[Document]) -> "Corpus":
        by_id: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in by_id:
                raise DuplicateDocId(doc.doc_id)
            by_id[doc.doc_id] = doc
        return cls(by_id, CorpusStats.from_documents(by_id.values()))

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents.values())

    def get(self, doc_id: str) -> Document:
        return self.documents[doc_id]


def _detect_format(path: Path) -> str:
    if path.suffix.lower() in (".jsonl", ".json"):
        return "jsonl"
    return "tsv"


def load_collection(path, format: str = "auto") -> Corpus:
    """Load a collection file: TSV ``doc_id<TAB>text`` or JSONL ``{"id","text"}``.

    Blank lines are skipped. Raises ParseError with the offending line number,
    or DuplicateDocId on repeated identifiers.
    """
    path = Path(path)
    fmt = _detect_format(path) if format == "auto" else format
    if fmt not in ("tsv", "jsonl"):
        raise ParseError(path, 0, f"unknown collection format {fmt!r}")
    docs: dict[str, Document] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if fmt == "tsv":
                if "\t" not in line:
                    raise ParseError(path, line_no, "expected doc_id<TAB>text")
                doc_id, text = line.split("\t", 1)
            else:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, line_no, f"bad JSON: {exc}") from exc
                if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                    raise ParseError(path, line_no, 'expected {"id": ..., "text": ...}')
                doc_id, text = str(obj["id"]), str(obj["text"])
            if not doc_id:
                raise ParseError(path, line_no, "empty doc_id")
            if doc_id in docs:
                raise DuplicateDocId(doc_id, line_no)
            try:
                docs[doc_id] = Document.from_text(doc_id, text)
            except EmptyDocument as exc:
                raise ParseError(path, line_no, f"empty document text: {exc}") from exc
    return Corpus(docs, CorpusStats.from_documents(docs.values()))


def load_queries(path) -> list[Query]:
    """Load a queries file: TSV ``query_id<TAB>text``."""
    path = Path(path)
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError(path, line_no, "expected query_id<TAB>text")
            query_id, text = line.split("\t", 1)
            if not query_id:
                raise ParseError(path, line_no, "empty query_id")
            if query_id in seen:
                raise ParseError(path, line_no, f"duplicate query_id {query_id!r}")
            seen.add(query_id)
            queries.append(Query.from_text(query_id, text))
    return queries
