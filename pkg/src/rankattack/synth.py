"""Deterministic synthetic fixture generation.

Builds a topical pseudo-language collection plus matching queries, sized
for desk-scale experiments: documents cluster around topics with heavy
"head" words, queries ask about a topic's head words, and a slice of
sentences opens with the shipped prompt phrases so the language model
learns continuations for them.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path

from .utils import derive_seed

_CONSONANTS = "bdfglmnprstvz"
_VOWELS = "aeiou"
_CODAS = ("", "", "n", "r", "s", "l")

# Zipf-weighted by position: the leading function words saturate nearly
# every document, the tail stays mid-frequency.
COMMON_WORDS = (
    "the a an of in on to is it and or as that what how was are for with we "
    "does do why this where when from by at were has have had be been did can "
    "will such many most more some also often only new old good great small "
    "large know known fact about people world time year way place part kind "
    "form case group number system process result study report area field "
    "level state point course question problem example service work life day "
    "home water food air land city country house school family power order "
    "value matter sense effect cause change growth which who"
).split()

_COMMON_CUM_WEIGHTS = tuple(
    accumulate(1.0 / (rank + 2.0) for rank in range(len(COMMON_WORDS)))
)


def _common_word(rng: random.Random) -> str:
    point = rng.random() * _COMMON_CUM_WEIGHTS[-1]
    return COMMON_WORDS[bisect_right(_COMMON_CUM_WEIGHTS, point)]

PROMPT_OPENERS = (
    ("it", "is", "known", "that"),
    ("the", "fact", "is", "that"),
    ("we", "know", "that"),
    ("it", "is", "about", "that"),
)


@dataclass(frozen=True)
class Topic:
    head_words: tuple
    support_words: tuple

    @property
    def phrase(self) -> tuple:
        """The topic's fixed collocation: these two words appear adjacent, in order."""
        return self.head_words[:2]


@dataclass(frozen=True)
class Fixture:
    collection_lines: tuple  # "doc_id\ttext"
    query_lines: tuple  # "query_id\ttext"
    topics: tuple


def _make_word(rng: random.Random) -> str:
    n_syllables = rng.choice((2, 2, 3))
    parts = []
    for _ in range(n_syllables):
        parts.append(rng.choice(_CONSONANTS) + rng.choice(_VOWELS))
    return "".join(parts) + rng.choice(_CODAS)


def _make_vocabulary(rng: random.Random, n_topics: int, words_per_topic: int) -> list:
    words: set = set(COMMON_WORDS)
    topics = []
    for _ in range(n_topics):
        topic_words = []
        while len(topic_words) < words_per_topic:
            w = _make_word(rng)
            if w not in words:
                words.add(w)
                topic_words.append(w)
        topics.append(Topic(tuple(topic_words[:8]), tuple(topic_words[8:])))
    return topics


def _make_sentence(rng: random.Random, topic: Topic, open_with_prompt: bool) -> str:
    words: list[str] = []
    if open_with_prompt:
        words.extend(rng.choice(PROMPT_OPENERS))
    length = rng.randint(6, 12)
    while len(words) < length:
        roll = rng.random()
        if roll < 0.38:
            word = rng.choice(topic.head_words)
        elif roll < 0.62:
            word = rng.choice(topic.support_words)
        else:
            word = _common_word(rng)
        # The topic collocation is a unit half the time; otherwise its words
        # appear solo, so adjacency varies independently of co-occurrence.
        if word in topic.phrase and rng.random() < 0.5:
            words.extend(topic.phrase)
        else:
            words.append(word)
    mark = "." if rng.random() < 0.92 else rng.choice("!?")
    return " ".join(words) + mark


def _stuff_repeats(rng: random.Random, sentences: list, topic: Topic) -> None:
    """Inject extra copies of two head words into otherwise normal sentences.

    This plants documents that differ from their peers only by repetition,
    which is how rankers learn (or fail to learn) that stuffing reads badly.
    """
    stuffed = rng.sample(topic.head_words, 2)
    for _ in range(rng.randint(2, 4)):
        idx = rng.randrange(len(sentences))
        words = sentences[idx].split(" ")
        words.insert(rng.randrange(len(words)), rng.choice(stuffed))
        sentences[idx] = " ".join(words)


def make_fixture(
    seed: int,
    n_docs: int = 2000,
    n_queries: int = 50,
    n_topics: int = 25,
    words_per_topic: int = 24,
    topic_offset: int = 0,
) -> Fixture:
    """Generate a collection and queries; fully determined by the arguments.

    topic_offset shifts which topics the queries ask about, which makes it
    easy to build an out-of-domain query set over the same collection.
    """
    vocab_rng = random.Random(derive_seed(seed, "vocab"))
    topics = _make_vocabulary(vocab_rng, n_topics, words_per_topic)

    collection = []
    for i in range(n_docs):
        rng = random.Random(derive_seed(seed, "doc", i))
        topic = topics[rng.randrange(n_topics)]
        secondary = topics[rng.randrange(n_topics)] if rng.random() < 0.2 else None
        n_sentences = rng.randint(3, 6)
        sentences = []
        for _ in range(n_sentences):
            active = secondary if (secondary is not None and rng.random() < 0.4) else topic
            sentences.append(_make_sentence(rng, active, rng.random() < 0.12))
        # A quarter of the documents repeat a couple of head words beyond
        # their natural frequency; everything else about them is ordinary.
        if rng.random() < 0.25:
            _stuff_repeats(rng, sentences, topic)
        collection.append(f"d{i:04d}\t" + " ".join(sentences))

    queries = []
    for i in range(n_queries):
        rng = random.Random(derive_seed(seed, "query", i))
        topic = topics[(topic_offset + i) % n_topics]
        pool = [w for w in topic.head_words + topic.support_words if w not in topic.phrase]
        terms = rng.sample(pool, rng.randint(2, 3))
        if rng.random() < 0.5:
            terms.append(rng.choice(COMMON_WORDS[60:100]))
        if rng.random() < 0.8:
            # The collocation enters the query as a unit, preserving its order.
            pos = rng.randrange(len(terms) + 1)
            terms[pos:pos] = list(topic.phrase)
        queries.append(f"q{i:03d}\t" + " ".join(terms) + "?")

    return Fixture(tuple(collection), tuple(queries), tuple(topics))


def make_lexicon(fixture: Fixture, seed: int, synonyms_per_word: int = 3) -> dict:
    """Synonym table over the fixture vocabulary.

    Synonyms stay mostly within the word's own topic, with a slice drawn
    from other topics' head words so substitution attacks have material to
    work with.
    """
    rng = random.Random(derive_seed(seed, "lexicon"))
    all_heads = [w for topic in fixture.topics for w in topic.head_words]
    lexicon: dict[str, tuple] = {}
    for topic in fixture.topics:
        own = list(topic.head_words + topic.support_words)
        for word in own:
            picks: list[str] = []
            while len(picks) < synonyms_per_word:
                if rng.random() < 0.6:
                    candidate = rng.choice(own)
                else:
                    candidate = rng.choice(all_heads)
                if candidate != word and candidate not in picks:
                    picks.append(candidate)
            lexicon[word] = tuple(picks)
    return lexicon


def write_lexicon(lexicon: dict, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(lexicon):
            fh.write(f"{word}\t{','.join(lexicon[word])}\n")


def write_fixture(fixture: Fixture, out_dir) -> tuple:
    """Write collection.tsv and queries.tsv; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    collection_path = out_dir / "collection.tsv"
    queries_path = out_dir / "queries.tsv"
    collection_path.write_text("\n".join(fixture.collection_lines) + "\n", encoding="utf-8")
    queries_path.write_text("\n".join(fixture.query_lines) + "\n", encoding="utf-8")
    return collection_path, queries_path
