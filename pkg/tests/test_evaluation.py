import random

import pytest
from hypothesis import given, settings, strategies as st

from rankattack.attack import AttackResult
from rankattack.corpus import Document
from rankattack.errors import EmptyList, LengthMismatch, ListTooShort, MethodMismatch
from rankattack.evaluation import (
    EASY5,
    HARD5,
    MetricReport,
    asr,
    boost,
    inter_at_10,
    mrr_at,
    pct_rank_at_most,
    position_histogram,
    ppl_report,
    rbo,
    render_report,
    sample_targets,
)
from rankattack.ngram import NGramModel
from rankattack.relevance import RankedList


def result(old, new, method="idem", perturbation=None):
    doc = Document.from_text("d", "text here.")
    return AttackResult(
        query_id="q",
        doc_id="d",
        method=method,
        adversarial=doc,
        perturbation=perturbation or {"kind": "insertion", "position": 0, "original_sentence_count": 1},
        old_rank=old,
        new_rank=new,
    )


def ranked(n, prefix="d", qid="q"):
    return RankedList(qid, tuple(f"{prefix}{i}" for i in range(n)))


def test_sample_targets_hard5_bottom_ranks():
    lists = {"q1": ranked(200)}
    targets = sample_targets(lists, HARD5, rng_seed=1)
    assert [t.rank for t in targets.items] == [196, 197, 198, 199, 200]
    assert [t.doc_id for t in targets.items] == [f"d{i}" for i in range(195, 200)]


def test_sample_targets_easy5_one_per_decile():
    lists = {"q1": ranked(150)}
    targets = sample_targets(lists, EASY5, rng_seed=9)
    ranks = [t.rank for t in targets.items]
    assert len(ranks) == 5
    for rank, (lo, hi) in zip(ranks, ((51, 60), (61, 70), (71, 80), (81, 90), (91, 100))):
        assert lo <= rank <= hi


def test_sample_targets_deterministic():
    lists = {"q1": ranked(150), "q2": ranked(150, prefix="e", qid="q2")}
    a = sample_targets(lists, EASY5, rng_seed=4)
    b = sample_targets(lists, EASY5, rng_seed=4)
    assert a == b


def test_sample_targets_order_independent():
    l1 = ranked(150, qid="q1")
    l2 = ranked(150, prefix="e", qid="q2")
    a = sample_targets({"q1": l1, "q2": l2}, EASY5, rng_seed=4)
    b = sample_targets({"q2": l2, "q1": l1}, EASY5, rng_seed=4)
    assert a == b


def test_sample_targets_too_short():
    with pytest.raises(ListTooShort):
        sample_targets({"q": ranked(99)}, EASY5, rng_seed=1)
    with pytest.raises(ListTooShort):
        sample_targets({"q": ranked(4)}, HARD5, rng_seed=1)


def test_asr_counts_strict_improvements():
    results = [result(10, 5), result(10, 2), result(10, 20), result(7, 3), result(4, 4)]
    assert asr(results) == pytest.approx(3 / 5)


def test_asr_unchanged_is_failure():
    assert asr([result(5, 5), result(9, 9)]) == 0.0


def test_asr_example_from_reported_case():
    assert asr([result(88, 9)]) == 1.0


def test_boost_values():
    assert boost([result(88, 9)]) == pytest.approx(79.0)
    assert boost([result(88, 107)]) == pytest.approx(-19.0)
    assert boost([result(5, 5)]) == 0.0


def test_pct_rank_at_most():
    results = [result(100, 9), result(100, 12), result(100, 55)]
    assert pct_rank_at_most(results, 10) == pytest.approx(1 / 3)
    assert pct_rank_at_most(results, 50) == pytest.approx(2 / 3)
    assert pct_rank_at_most([result(50, 1), result(60, 1)], 10) == 1.0


def test_inter_at_10():
    a = ranked(20)
    assert inter_at_10(a, a) == 1.0
    b = RankedList("q", tuple(f"x{i}" for i in range(20)))
    assert inter_at_10(a, b) == 0.0
    mixed = RankedList("q", tuple(f"d{i}" for i in range(7)) + ("x0", "x1", "x2") + tuple(f"d{i}" for i in range(7, 17)))
    assert inter_at_10(a, mixed) == pytest.approx(0.7)
    with pytest.raises(ListTooShort):
        inter_at_10(ranked(5), a)


def test_rbo_identical_lists_is_one():
    for n in (1, 3, 50, 1000):
        a = ranked(n)
        for p in (0.3, 0.7, 0.95):
            assert rbo(a, a, p=p, depth=1000) == pytest.approx(1.0, abs=1e-12)


def test_rbo_disjoint_lists_is_zero():
    a = ranked(30)
    b = RankedList("q", tuple(f"x{i}" for i in range(30)))
    assert rbo(a, b, p=0.7, depth=30) == 0.0


def test_rbo_fixture_value_direct_summation():
    # Independent arithmetic: X = (0, 2, 3) at depths 1..3 for these lists.
    # (X_3/3)*p^3 + ((1-p)/p) * (0*p + (2/2)*p^2 + (3/3)*p^3) with p = 0.7:
    p = 0.7
    expected = (3 / 3) * p**3 + ((1 - p) / p) * (0.0 * p + (2 / 2) * p**2 + (3 / 3) * p**3)
    assert expected == pytest.approx(0.700, abs=1e-9)
    a = RankedList("q", ("x", "y", "z"))
    b = RankedList("q", ("y", "x", "z"))
    assert rbo(a, b, p=0.7, depth=3) == pytest.approx(0.700, abs=1e-9)


def test_rbo_symmetric_and_bounded():
    rng = random.Random(6)
    base = [f"d{i}" for i in range(40)]
    for _ in range(25):
        left = base[:]
        right = base[:]
        rng.shuffle(left)
        rng.shuffle(right)
        a = RankedList("q", tuple(left))
        b = RankedList("q", tuple(right))
        forward = rbo(a, b, p=0.7, depth=40)
        assert forward == pytest.approx(rbo(b, a, p=0.7, depth=40), abs=1e-12)
        assert 0.0 <= forward <= 1.0


@given(
    st.integers(min_value=1, max_value=30),
    st.floats(min_value=0.05, max_value=0.95),
    st.randoms(use_true_random=False),
)
@settings(max_examples=60, deadline=None)
def test_rbo_bounds_property(n, p, rng):
    docs = [f"d{i}" for i in range(n)]
    other = docs[:]
    rng.shuffle(other)
    a = RankedList("q", tuple(docs))
    b = RankedList("q", tuple(other))
    value = rbo(a, b, p=p, depth=1000)
    assert 0.0 <= value <= 1.0 + 1e-12
    assert rbo(a, a, p=p, depth=1000) == pytest.approx(1.0, abs=1e-12)


def test_rbo_validation():
    a = ranked(5)
    with pytest.raises(EmptyList):
        rbo(RankedList("q", ()), a)
    with pytest.raises(ValueError):
        rbo(a, a, p=1.0)
    with pytest.raises(ValueError):
        rbo(a, a, p=0.5, depth=0)


def test_ppl_report_no_op_attack_equal_means():
    model = NGramModel.uniform(["a", "b", "c"])
    docs = [Document.from_text("d1", "a b."), Document.from_text("d2", "c a.")]
    orig, adv = ppl_report(model, docs, docs)
    assert orig == adv


def test_ppl_report_random_appends_increase_mean():
    rng = random.Random(12)
    from rankattack.corpus import Corpus
    from rankattack.ngram import train

    texts = [
        "the cat sat on the mat. the cat purred.",
        "the dog ran in the park. the dog barked.",
        "birds sing in the trees. birds fly south.",
    ]
    corpus = Corpus.from_documents(Document.from_text(f"d{i}", t) for i, t in enumerate(texts))
    model = train(corpus, order=3, discount=0.6)
    vocab = sorted(t for t in model.vocab if t.isalpha())
    originals = list(corpus)
    adversarials = []
    for doc in originals:
        noise = " ".join(rng.choice(vocab) for _ in range(12)) + "."
        adversarials.append(Document.from_text(doc.doc_id, " ".join(s.raw for s in doc.sentences) + " " + noise))
    orig, adv = ppl_report(model, originals, adversarials)
    assert adv > orig


def test_ppl_report_guards():
    model = NGramModel.uniform(["a"])
    doc = Document.from_text("d", "a.")
    with pytest.raises(LengthMismatch):
        ppl_report(model, [doc], [])
    with pytest.raises(LengthMismatch):
        ppl_report(model, [], [])
    with pytest.raises(LengthMismatch):
        ppl_report(model, [doc, doc], [doc])


def insertion_result(v, n):
    return result(
        100,
        50,
        perturbation={"kind": "insertion", "position": v, "original_sentence_count": n},
    )


def test_position_histogram_all_begin():
    hist = position_histogram([insertion_result(0, 4) for _ in range(6)])
    assert hist["fractions"]["begin"] == 1.0
    assert hist["counts"] == {"begin": 6, "middle": 0, "end": 0}


def test_position_histogram_mixed_counts():
    results = [insertion_result(0, 4)] * 3 + [insertion_result(2, 4)] * 5 + [insertion_result(4, 4)] * 2
    hist = position_histogram(results)
    assert hist["counts"] == {"begin": 3, "middle": 5, "end": 2}
    assert hist["fractions"]["begin"] == pytest.approx(0.3)
    assert sum(hist["fractions"].values()) == pytest.approx(1.0)


def test_position_histogram_rejects_other_methods():
    bad = result(10, 5, method="token_append", perturbation={"kind": "prefix_tokens", "tokens": []})
    with pytest.raises(MethodMismatch):
        position_histogram([bad])


def test_mrr_at_fixture_self_check():
    lists = {"q1": ranked(10), "q2": RankedList("q2", ("a", "b", "c") + tuple(f"z{i}" for i in range(7)))}
    qrels = {"q1": {"d2": 1}, "q2": {"b": 1}}
    assert mrr_at(lists, qrels, k=10) == pytest.approx((1 / 3 + 1 / 2) / 2)


def test_render_report_lines():
    report = MetricReport(0.9, 42.0, 0.5, 0.8, 0.7, 0.66, 30.0, 33.0, None)
    text = render_report(report)
    assert "ASR" in text and "90.0%" in text
    assert "Wall clock" in text and text.rstrip().endswith("-")
