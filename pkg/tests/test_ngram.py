import math
import random
from dataclasses import replace

import pytest

from rankattack.corpus import Corpus, Document
from rankattack.errors import EmptyCorpus
from rankattack.ngram import (
    BOS,
    EOS,
    UNK,
    InfillRequest,
    NGramModel,
    load_model,
    perplexity,
    save_model,
    train,
)


def corpus_of(texts):
    return Corpus.from_documents(
        Document.from_text(f"d{i}", t) for i, t in enumerate(texts)
    )


@pytest.fixture
def abab_model():
    return train(corpus_of(["a b a b"]), order=2, discount=0.1)


def test_train_counts_hand_checked(abab_model):
    bigrams = abab_model.counts[2]
    assert bigrams[("a",)]["b"] == 2
    assert bigrams[("b",)]["a"] == 1
    assert bigrams[(BOS,)]["a"] == 1
    assert bigrams[("b",)][EOS] == 1


def test_unseen_bigram_positive_probability():
    model = train(corpus_of(["a b a b. z."]), order=2, discount=0.5)
    assert "z" in model.vocab
    assert model.probability("z", ("b",)) > 0.0


def test_conditional_distribution_normalizes(abab_model):
    total = sum(abab_model.distribution(("a",)).values())
    assert total == pytest.approx(1.0, abs=1e-9)


def test_log_prob_hand_evaluated_backoff(abab_model):
    # Oracle: interpolated absolute discounting evaluated by hand.
    # Unigram stream "a b a b </s>": C=5, counts a:2 b:2 </s>:1, 3 distinct.
    # vocab = {a, b, </s>, <unk>} -> uniform floor 1/4.
    d = 0.1
    p1_b = max(2 - d, 0) / 5 + (d * 3 / 5) * (1 / 4)
    # Context (a): total 2, one distinct continuation {b}, count(a->b)=2.
    expected = max(2 - d, 0) / 2 + (d * 1 / 2) * p1_b
    assert abab_model.probability("b", ("a",)) == pytest.approx(expected, abs=1e-12)
    assert abab_model.log_prob("b", ("a",)) == pytest.approx(math.log(expected), abs=1e-12)


def test_seen_token_beats_unseen_sibling():
    model = train(corpus_of(["a b a b. a c."]), order=2, discount=0.3)
    assert model.log_prob("b", ("a",)) > model.log_prob("c", ("a",))
    assert model.log_prob("c", ("a",)) > model.log_prob(EOS, ("a",))


def test_unknown_token_maps_to_unk_not_exception(abab_model):
    value = abab_model.log_prob("never-seen", ("a",))
    assert value == abab_model.log_prob(UNK, ("a",))
    assert math.isfinite(value)


def test_uniform_model_log_prob_and_perplexity():
    model = NGramModel.uniform(["a", "b", "c"])
    v = len(model.vocab)
    assert v == 4  # three tokens plus the end marker
    for tok in ("a", "b", "c", EOS, "zzz"):
        assert model.log_prob(tok) == pytest.approx(-math.log(v), abs=1e-12)
    doc = Document.from_text("d", "a")
    assert perplexity(model, doc) == pytest.approx(v, abs=1e-6)


def test_uniform_model_ppl_any_doc():
    model = NGramModel.uniform([f"w{i}" for i in range(9)])
    doc = Document.from_text("d", "w0 w3 w5. w2 w8.")
    assert perplexity(model, doc) == pytest.approx(len(model.vocab), abs=1e-6)


def test_overfit_model_prefers_training_order():
    text = "the cat sat on the mat. the dog ran to the park. a bird flew over the house."
    model = train(corpus_of([text]), order=4, discount=0.2)
    doc = Document.from_text("d", text)
    rng = random.Random(3)
    shuffled_sentences = []
    for sentence in doc.sentences:
        tokens = list(sentence.tokens)
        rng.shuffle(tokens)
        shuffled_sentences.append(" ".join(tokens))
    shuffled = Document.from_text("d2", " ".join(shuffled_sentences))
    assert perplexity(model, doc) < perplexity(model, shuffled)


def test_train_validation():
    with pytest.raises(EmptyCorpus):
        train(Corpus.from_documents([]), order=2, discount=0.5)
    with pytest.raises(ValueError):
        train(corpus_of(["a b."]), order=2, discount=1.5)
    with pytest.raises(ValueError):
        train(corpus_of(["a b."]), order=0, discount=0.5)


def test_normalization_over_random_contexts():
    model = train(
        corpus_of(["the cat sat. the dog ran. a cat ran fast. dogs sat here."]),
        order=3,
        discount=0.75,
    )
    rng = random.Random(11)
    vocab = sorted(model.vocab)
    for _ in range(100):
        ctx = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 2)))
        total = sum(model.probability(t, ctx) for t in vocab)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_backoff_consistency_dropping_top_order():
    texts = ["the cat sat on the mat. a dog ran.", "the cat ran. dogs sat."]
    tri = train(corpus_of(texts), order=3, discount=0.4)
    bi = train(corpus_of(texts), order=2, discount=0.4)
    # Remove all trigram counts: conditionals must equal the bigram model's.
    tri.counts[3] = {}
    tri.context_totals[3] = {}
    rng = random.Random(5)
    vocab = sorted(bi.vocab)
    for _ in range(50):
        tok = rng.choice(vocab)
        ctx = (rng.choice(vocab), rng.choice(vocab))
        assert tri.probability(tok, ctx) == pytest.approx(
            bi.probability(tok, ctx), abs=1e-12
        )


@pytest.fixture
def sampling_model():
    texts = [
        "it is known that cats sleep. cats sleep all day. dogs run far.",
        "it is known that dogs run. the sun is warm. cats purr loudly.",
        "birds sing in the morning. it is known that birds sing.",
    ]
    return train(corpus_of(texts), order=3, discount=0.75)


def base_request(seed=42, top_k=5, max_words=12):
    return InfillRequest(
        left_context=("it", "is", "known", "that"),
        right_context=("cats",),
        max_words=max_words,
        top_k=top_k,
        rng_seed=seed,
    )


def test_top_k_one_is_greedy(sampling_model):
    outputs = {
        sampling_model.sample_infill(base_request(seed=s, top_k=1)).tokens
        for s in (1, 2, 99, 12345)
    }
    assert len(outputs) == 1


def test_sampling_deterministic(sampling_model):
    a = sampling_model.sample_infill(base_request(seed=7))
    b = sampling_model.sample_infill(base_request(seed=7))
    assert a == b
    c = sampling_model.sample_infill(base_request(seed=8))
    # Different seeds are allowed to coincide, but tokens must come from the
    # same deterministic machinery; check object-level equality semantics.
    assert c == sampling_model.sample_infill(base_request(seed=8))


def test_emitted_tokens_within_top_k(sampling_model):
    # Instrumented replay: every emitted token must be among the k most
    # probable continuations of its context under the full distribution.
    request = base_request(seed=21, top_k=4)
    sentence = sampling_model.sample_infill(request)
    assert sentence.tokens
    ctx = tuple(request.left_context)[-(sampling_model.order - 1):]
    for i, tok in enumerate(sentence.tokens):
        dist = sampling_model.distribution(ctx)
        dist.pop(UNK, None)
        if i == 0:
            dist.pop(EOS, None)
        ranked = sorted(dist, key=lambda t: (-dist[t], t))
        assert tok in ranked[: request.top_k]
        ctx = (ctx + (tok,))[-(sampling_model.order - 1):]


def test_length_bound_holds(sampling_model):
    for seed in range(30):
        for max_words in (1, 2, 5, 12):
            s = sampling_model.sample_infill(base_request(seed=seed, max_words=max_words))
            assert s.word_count <= max_words


def test_sample_never_empty(sampling_model):
    for seed in range(20):
        s = sampling_model.sample_infill(base_request(seed=seed))
        assert s.tokens


def test_request_validation():
    with pytest.raises(ValueError):
        InfillRequest((), (), max_words=0, top_k=5, rng_seed=1)
    with pytest.raises(ValueError):
        InfillRequest((), (), max_words=3, top_k=0, rng_seed=1)


def test_persistence_round_trip(tmp_path, sampling_model):
    path = tmp_path / "model.counts"
    save_model(sampling_model, path)
    loaded = load_model(path)
    assert loaded.order == sampling_model.order
    assert loaded.discount == sampling_model.discount
    assert loaded.vocab == sampling_model.vocab
    assert loaded.counts == sampling_model.counts
    request = base_request(seed=77)
    assert loaded.sample_infill(request) == sampling_model.sample_infill(request)
