"""Target sampling and attack metrics.

Success/boost/promotion rates read the before/after ranks off attack
results; ranked-list agreement uses top-10 intersection and extrapolated
rank-biased overlap; fluency uses the shared language model's perplexity
so all methods are compared under the same yardstick.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .attack import METHOD_IDEM, AttackResult
from .corpus import Document
from .errors import EmptyList, LengthMismatch, ListTooShort, MethodMismatch
from .ngram import NGramModel, perplexity
from .relevance import RankedList
from .utils import derive_seed

EASY5 = "easy5"
HARD5 = "hard5"

_EASY5_DECILES = ((51, 60), (61, 70), (71, 80), (81, 90), (91, 100))


@dataclass(frozen=True)
class TargetItem:
    query_id: str
    doc_id: str
    rank: int


@dataclass(frozen=True)
class TargetSet:
    kind: str
    items: tuple


def sample_targets(
    ranked_lists: Mapping[str, RankedList], kind: str, rng_seed: int
) -> TargetSet:
    """Pick attack targets from each query's ranked list.

    easy5: one uniform pick from each rank decile [51-60] .. [91-100].
    hard5: the five bottom-ranked documents.
    Per-query seeding keeps the choice independent of query order.
    """
    if kind not in (EASY5, HARD5):
        raise ValueError(f"unknown target kind {kind!r}")
    items: list[TargetItem] = []
    for query_id in sorted(ranked_lists):
        ranked = ranked_lists[query_id]
        if kind == EASY5:
            if len(ranked) < 100:
                raise ListTooShort(
                    f"easy5 needs >= 100 ranked documents for {query_id!r}, have {len(ranked)}"
                )
            rng = random.Random(derive_seed(rng_seed, kind, query_id))
            for lo, hi in _EASY5_DECILES:
                rank = rng.randint(lo, hi)
                items.append(TargetItem(query_id, ranked.doc_ids[rank - 1], rank))
        else:
            if len(ranked) < 5:
                raise ListTooShort(
                    f"hard5 needs >= 5 ranked documents for {query_id!r}, have {len(ranked)}"
                )
            for rank in range(len(ranked) - 4, len(ranked) + 1):
                items.append(TargetItem(query_id, ranked.doc_ids[rank - 1], rank))
    return TargetSet(kind, tuple(items))


def _require_results(results: Sequence[AttackResult]):
    if not results:
        raise EmptyList("no attack results to evaluate")
    for r in results:
        if r.old_rank is None or r.new_rank is None:
            raise ValueError(f"result {r.query_id}/{r.doc_id} is missing ranks")


def asr(results: Sequence[AttackResult]) -> float:
    """Fraction of targets whose rank strictly improved."""
    _require_results(results)
    return sum(1 for r in results if r.new_rank < r.old_rank) / len(results)


def boost(results: Sequence[AttackResult]) -> float:
    """Mean rank improvement (old rank minus new rank); negative on demotion."""
    _require_results(results)
    return sum(r.old_rank - r.new_rank for r in results) / len(results)


def pct_rank_at_most(results: Sequence[AttackResult], threshold: int) -> float:
    """Fraction of targets promoted to rank <= threshold."""
    _require_results(results)
    return sum(1 for r in results if r.new_rank <= threshold) / len(results)


def inter_at_10(list_a: RankedList, list_b: RankedList) -> float:
    if len(list_a) < 10 or len(list_b) < 10:
        raise ListTooShort("inter@10 needs at least 10 entries in both lists")
    return len(set(list_a.top(10)) & set(list_b.top(10))) / 10.0


def rbo(list_a: RankedList, list_b: RankedList, p: float = 0.7, depth: int = 1000) -> float:
    """Extrapolated rank-biased overlap truncated at the evaluation depth.

    With X_d the size of the top-d intersection and k the evaluation depth:
    (X_k / k) * p^k + ((1 - p) / p) * sum_{d=1..k} (X_d / d) * p^d.
    Identical lists score exactly 1.
    """
    if len(list_a) == 0 or len(list_b) == 0:
        raise EmptyList("rbo requires non-empty lists")
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    k = min(depth, len(list_a), len(list_b))
    seen_a: set = set()
    seen_b: set = set()
    overlap = 0
    terms = []
    x_k = 0
    for d in range(1, k + 1):
        a = list_a.doc_ids[d - 1]
        b = list_b.doc_ids[d - 1]
        if a == b:
            overlap += 1
        else:
            if a in seen_b:
                overlap += 1
            if b in seen_a:
                overlap += 1
            seen_a.add(a)
            seen_b.add(b)
        terms.append((overlap / d) * p**d)
        x_k = overlap
    return (x_k / k) * p**k + (1.0 - p) / p * math.fsum(terms)


def ppl_report(
    model: NGramModel,
    originals: Sequence[Document],
    adversarials: Sequence[Document],
) -> tuple:
    """Mean per-document perplexity of both sides under the same model."""
    if not originals or not adversarials:
        raise LengthMismatch("ppl_report needs non-empty paired document sets")
    if len(originals) != len(adversarials):
        raise LengthMismatch(
            f"{len(originals)} originals vs {len(adversarials)} adversarials"
        )
    mean_orig = sum(perplexity(model, d) for d in originals) / len(originals)
    mean_adv = sum(perplexity(model, d) for d in adversarials) / len(adversarials)
    return mean_orig, mean_adv


def position_histogram(results: Sequence[AttackResult]) -> dict:
    """Counts and fractions of insertion positions: begin / middle / end."""
    if not results:
        raise EmptyList("no results to histogram")
    counts = {"begin": 0, "middle": 0, "end": 0}
    for r in results:
        if r.method != METHOD_IDEM or r.perturbation.get("kind") != "insertion":
            raise MethodMismatch(
                f"position histogram applies to insertion attacks, got {r.method!r}"
            )
        v = r.perturbation["position"]
        n = r.perturbation["original_sentence_count"]
        if v == 0:
            counts["begin"] += 1
        elif v == n:
            counts["end"] += 1
        else:
            counts["middle"] += 1
    total = len(results)
    fractions = {key: counts[key] / total for key in counts}
    return {"counts": counts, "fractions": fractions}


def mrr_at(ranked_lists: Mapping[str, RankedList], qrels: Mapping[str, Mapping[str, int]], k: int = 10) -> float:
    """Minimal MRR@k for fixture self-checks (not an official scorer)."""
    if not ranked_lists:
        raise EmptyList("no ranked lists")
    total = 0.0
    for query_id, ranked in ranked_lists.items():
        relevant = {d for d, label in qrels.get(query_id, {}).items() if label > 0}
        for doc_id, rank in ranked.entries[:k]:
            if doc_id in relevant:
                total += 1.0 / rank
                break
    return total / len(ranked_lists)


@dataclass
class MetricReport:
    asr: float
    mean_boost: float
    pct_r_le_10: float
    pct_r_le_50: float
    inter_at_10: float | None
    rbo: float | None
    mean_ppl_original: float
    mean_ppl_adversarial: float
    total_wall_clock: float | None

    def to_dict(self) -> dict:
        return {
            "asr": self.asr,
            "mean_boost": self.mean_boost,
            "pct_r_le_10": self.pct_r_le_10,
            "pct_r_le_50": self.pct_r_le_50,
            "inter_at_10": self.inter_at_10,
            "rbo": self.rbo,
            "mean_ppl_original": self.mean_ppl_original,
            "mean_ppl_adversarial": self.mean_ppl_adversarial,
            "total_wall_clock": self.total_wall_clock,
        }


def render_report(report: MetricReport) -> str:
    """Aligned plain-text table of the report."""
    rows = [
        ("ASR", f"{report.asr * 100:.1f}%"),
        ("Boost", f"{report.mean_boost:.2f}"),
        ("% r<=10", f"{report.pct_r_le_10 * 100:.1f}%"),
        ("% r<=50", f"{report.pct_r_le_50 * 100:.1f}%"),
        ("Inter@10", "-" if report.inter_at_10 is None else f"{report.inter_at_10:.3f}"),
        ("RBO", "-" if report.rbo is None else f"{report.rbo:.3f}"),
        ("PPL (original)", f"{report.mean_ppl_original:.2f}"),
        ("PPL (adversarial)", f"{report.mean_ppl_adversarial:.2f}"),
        (
            "Wall clock",
            "-" if report.total_wall_clock is None else f"{report.total_wall_clock:.2f}s",
        ),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)
