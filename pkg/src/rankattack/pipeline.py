"""Experiment pipeline: the command implementations behind the CLI.

Each step reads declared inputs, writes declared artifacts under the
configured output directory, and embeds (or sidecars) the resolved
configuration. Volatile wall-clock measurements go to a separate timing
file so the canonical artifacts stay bit-identical across repeat runs.
"""

from __future__ import annotations

import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import attack as attacks
from .attack import (
    AttackResult,
    GenerationBudget,
    PromptTemplate,
    build_template,
    generate_connection_sentences,
    result_to_record,
)
from .bridgeclient import BridgeScorer, resolve_endpoint
from .coherence import LmAdjacencyScorer
from .config import ExperimentConfig
from .corpus import (
    Corpus,
    Document,
    Query,
    join,
    load_collection,
    load_queries,
    segment_sentences,
)
from .errors import ConfigError, MissingInput
from .evaluation import (
    MetricReport,
    TargetItem,
    TargetSet,
    asr,
    boost,
    inter_at_10,
    pct_rank_at_most,
    position_histogram,
    ppl_report,
    rbo,
    render_report,
    sample_targets,
)
from .ngram import NGramModel, load_model, save_model, train
from .relevance import (
    FeatureExtractor,
    LinearRanker,
    VictimRanker,
    build_pairs,
    load_ranker,
    read_trec_run,
    rerank,
    retrieve_top,
    save_ranker,
    train_surrogate,
    write_trec_run,
)
from .utils import derive_seed

METHODS = (
    attacks.METHOD_IDEM,
    attacks.METHOD_QUERY_PLUS,
    attacks.METHOD_TOKEN_APPEND,
    attacks.METHOD_WORD_SUB,
)


# ----- artifact paths --------------------------------------------------------

def stats_path(cfg):
    return cfg.out_path / "stats.json"


def lm_path(cfg):
    return cfg.out_path / "lm.counts"


def run_path(cfg, kind):
    return cfg.out_path / f"{kind}.run"


def surrogate_path(cfg):
    return cfg.out_path / "surrogate.json"


def targets_path(cfg):
    return cfg.out_path / "targets.jsonl"


def results_path(cfg, method):
    return cfg.out_path / f"results_{method}.jsonl"


def adversarial_path(cfg, method):
    return cfg.out_path / f"adversarial_{method}.tsv"


def timing_path(cfg, method):
    return cfg.out_path / f"timing_{method}.json"


def metrics_path(cfg, method):
    return cfg.out_path / f"metrics_{method}.json"


def _write_json(path, payload):
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_sidecar(path, cfg):
    _write_json(Path(str(path) + ".meta.json"), {"config": cfg.resolved()})


# ----- shared loading --------------------------------------------------------

def _load_corpus(cfg) -> Corpus:
    return load_collection(cfg.require_path("collection"))


def _load_queries(cfg) -> dict:
    return {q.query_id: q for q in load_queries(cfg.require_path("queries"))}


def _victim(cfg, corpus: Corpus) -> VictimRanker:
    # The simulated victim is pinned by the global seed: same seed, same victim.
    extractor = FeatureExtractor(corpus.stats, cfg.k1, cfg.b)
    return VictimRanker.create(extractor, derive_seed(cfg.seed, "victim"))


def _scorer(cfg, model: NGramModel):
    if cfg.backend == "builtin":
        return LmAdjacencyScorer(model, cfg.window)
    if cfg.backend == "bridge":
        return BridgeScorer(resolve_endpoint(cfg.bridge_endpoint), timeout=cfg.bridge_timeout)
    raise ConfigError(f"unknown backend {cfg.backend!r}")


# ----- commands --------------------------------------------------------------

def cmd_build_stats(cfg: ExperimentConfig) -> Path:
    corpus = _load_corpus(cfg)
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    out = stats_path(cfg)
    _write_json(
        out,
        {
            "config": cfg.resolved(),
            "n_docs": corpus.stats.n_docs,
            "total_tokens": corpus.stats.total_tokens,
            "avg_len": corpus.stats.avg_len,
            "vocabulary_size": len(corpus.stats.df),
        },
    )
    return out


def cmd_train_lm(cfg: ExperimentConfig) -> Path:
    corpus = _load_corpus(cfg)
    model = train(corpus, cfg.order, cfg.discount)
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    out = lm_path(cfg)
    save_model(model, out)
    _write_sidecar(out, cfg)
    return out


def cmd_rank(cfg: ExperimentConfig, ranker: str = "victim") -> Path:
    """Write a TREC run: bm25 retrieval, victim re-ranking, or surrogate re-ranking."""
    corpus = _load_corpus(cfg)
    queries = _load_queries(cfg)
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    ranked_lists = []
    if ranker == "bm25":
        for qid in sorted(queries):
            ranked_lists.append(retrieve_top(corpus, queries[qid], cfg.candidates, cfg.k1, cfg.b))
    elif ranker in ("victim", "surrogate"):
        bm25_file = run_path(cfg, "bm25")
        if not bm25_file.exists():
            raise MissingInput(f"{bm25_file} not found; run the bm25 ranking first")
        candidates = read_trec_run(bm25_file)
        if ranker == "victim":
            victim = _victim(cfg, corpus)
            score = lambda q, c: victim.rank(q, c, corpus.documents)
        else:
            surrogate = load_ranker(surrogate_path(cfg), corpus.stats)
            score = lambda q, c: rerank(surrogate, q, c, corpus.documents)
        for qid in sorted(candidates):
            if qid not in queries:
                raise MissingInput(f"run file query {qid!r} missing from queries file")
            ranked_lists.append(score(queries[qid], candidates[qid]))
    else:
        raise ConfigError(f"unknown ranker {ranker!r}")
    out = run_path(cfg, ranker)
    write_trec_run(ranked_lists, out, tag=ranker)
    _write_sidecar(out, cfg)
    return out


def _training_query_ids(cfg, queries) -> list:
    if cfg.train_queries:
        path = cfg.require_path("train_queries")
        ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        missing = [qid for qid in ids if qid not in queries]
        if missing:
            raise MissingInput(f"training query ids not in queries file: {missing[:5]}")
        return ids
    return sorted(queries)


def cmd_train_surrogate(cfg: ExperimentConfig) -> Path:
    corpus = _load_corpus(cfg)
    queries = _load_queries(cfg)
    victim_run = run_path(cfg, "victim")
    if not victim_run.exists():
        raise MissingInput(f"{victim_run} not found; run the victim ranking first")
    rankings = read_trec_run(victim_run)
    pairs = None
    for qid in _training_query_ids(cfg, queries):
        if qid not in rankings:
            raise MissingInput(f"training query {qid!r} missing from the victim run")
        query_pairs = build_pairs(rankings[qid], cfg.top_r)
        pairs = query_pairs if pairs is None else pairs + query_pairs
    surrogate = train_surrogate(
        pairs,
        corpus,
        queries,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        margin=cfg.margin,
        k1=cfg.k1,
        b=cfg.b,
    )
    out = surrogate_path(cfg)
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    save_ranker(surrogate, out)
    return out


def cmd_select_targets(cfg: ExperimentConfig) -> Path:
    victim_run = run_path(cfg, "victim")
    if not victim_run.exists():
        raise MissingInput(f"{victim_run} not found; run the victim ranking first")
    rankings = read_trec_run(victim_run)
    if cfg.query_limit:
        keep = sorted(rankings)[: cfg.query_limit]
        rankings = {qid: rankings[qid] for qid in keep}
    target_set = sample_targets(rankings, cfg.targets, derive_seed(cfg.seed, "targets"))
    out = targets_path(cfg)
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"record": "header", "kind": target_set.kind, "config": cfg.resolved()},
                       sort_keys=True, ensure_ascii=False) + "\n"
        )
        for item in target_set.items:
            fh.write(
                json.dumps(
                    {"query_id": item.query_id, "doc_id": item.doc_id, "rank": item.rank},
                    sort_keys=True,
                    ensure_ascii=False,
                )
                + "\n"
            )
    return out


def read_targets(path) -> TargetSet:
    kind = None
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("record") == "header":
                kind = obj["kind"]
                continue
            items.append(TargetItem(obj["query_id"], obj["doc_id"], obj["rank"]))
    return TargetSet(kind or "unknown", tuple(items))


class AttackContext:
    """Everything one attack run needs, loaded once and shared across targets."""

    def __init__(self, cfg: ExperimentConfig, corpus: Corpus, surrogate: LinearRanker,
                 scorer=None, model: NGramModel | None = None, lexicon=None):
        self.cfg = cfg
        self.corpus = corpus
        self.surrogate = surrogate
        self.scorer = scorer
        self.model = model
        self.lexicon = lexicon
        self.budget = GenerationBudget(
            cfg.sample_rounds, cfg.samples_per_round, cfg.max_kept, cfg.max_words, cfg.top_k
        )
        self.prompt = PromptTemplate.from_text(cfg.prompt) if cfg.prompt.strip() else None
        self.alpha = cfg.resolve_alpha()
        self.append_pool = corpus.stats.top_tokens(cfg.append_vocab)


def run_single_attack(
    method: str,
    query: Query,
    document: Document,
    target_rank: int,
    ctx: AttackContext,
) -> AttackResult:
    cfg = ctx.cfg
    seed = derive_seed(cfg.seed, "attack", query.query_id, document.doc_id)
    if method == attacks.METHOD_IDEM:
        request = build_template(query, ctx.prompt, document, ctx.budget, seed)
        sentences = generate_connection_sentences(ctx.model, request, ctx.budget)
        return attacks.idem_attack(
            query, document, sentences, ctx.surrogate, ctx.scorer, ctx.alpha, target_rank
        )
    if method == attacks.METHOD_QUERY_PLUS:
        return attacks.query_plus(query, document, target_rank)
    if method == attacks.METHOD_TOKEN_APPEND:
        return attacks.token_append_attack(
            query, document, ctx.surrogate, ctx.append_pool, cfg.append_budget, target_rank
        )
    if method == attacks.METHOD_WORD_SUB:
        if ctx.lexicon is None:
            raise MissingInput("word substitution requires the lexicon config key")
        return attacks.word_sub_attack(
            query, document, ctx.surrogate, ctx.lexicon, cfg.sub_budget, target_rank
        )
    raise ConfigError(f"unknown attack method {method!r}")


_WORKER_STATE: dict = {}


def _attack_worker(indices):
    state = _WORKER_STATE
    out = []
    for i in indices:
        item = state["targets"][i]
        out.append(
            (
                i,
                run_single_attack(
                    state["method"],
                    state["queries"][item.query_id],
                    state["ctx"].corpus.get(item.doc_id),
                    item.rank,
                    state["ctx"],
                ),
            )
        )
    return out


def run_attacks(
    ctx: AttackContext,
    queries: dict,
    targets: TargetSet,
    victim_lists: dict,
    victim: VictimRanker,
    method: str,
) -> list:
    """Attack every target, then ask the victim to re-rank with the swap applied.

    Targets are processed in a fixed order and results keep that order, so
    the worker count never changes the output.
    """
    corpus = ctx.corpus
    items = sorted(targets.items, key=lambda t: (t.query_id, t.doc_id))
    if ctx.cfg.workers > 1:
        # Workers inherit the shared state by forking; per-target seeds plus
        # the fixed merge order keep the output schedule-independent.
        _WORKER_STATE.update(targets=items, method=method, queries=queries, ctx=ctx)
        chunks = [list(range(i, len(items), ctx.cfg.workers)) for i in range(ctx.cfg.workers)]
        results_by_index: dict[int, AttackResult] = {}
        with ProcessPoolExecutor(
            max_workers=ctx.cfg.workers, mp_context=multiprocessing.get_context("fork")
        ) as pool:
            for chunk_result in pool.map(_attack_worker, chunks):
                for i, result in chunk_result:
                    results_by_index[i] = result
        _WORKER_STATE.clear()
        results = [results_by_index[i] for i in range(len(items))]
    else:
        results = [
            run_single_attack(
                method,
                queries[item.query_id],
                corpus.get(item.doc_id),
                item.rank,
                ctx,
            )
            for item in items
        ]
    # Victim evaluation: same candidate pool, adversarial document swapped in.
    for item, result in zip(items, results):
        candidates = victim_lists[item.query_id]
        documents = dict(corpus.documents)
        documents[item.doc_id] = result.adversarial
        reranked = victim.rank(queries[item.query_id], candidates, documents)
        result.new_rank = reranked.rank_of(item.doc_id)
    return results


def cmd_attack(cfg: ExperimentConfig, scorer_override=None) -> Path:
    corpus = _load_corpus(cfg)
    queries = _load_queries(cfg)
    victim_run = run_path(cfg, "victim")
    if not victim_run.exists():
        raise MissingInput(f"{victim_run} not found; run the victim ranking first")
    victim_lists = read_trec_run(victim_run)
    targets_file = targets_path(cfg)
    if not targets_file.exists():
        raise MissingInput(f"{targets_file} not found; run select-targets first")
    targets = read_targets(targets_file)
    surrogate = load_ranker(surrogate_path(cfg), corpus.stats)
    method = cfg.method
    if method not in METHODS:
        raise ConfigError(f"unknown attack method {method!r}")
    model = None
    scorer = None
    lexicon = None
    if method == attacks.METHOD_IDEM:
        model = load_model(lm_path(cfg))
        scorer = scorer_override if scorer_override is not None else _scorer(cfg, model)
    if method == attacks.METHOD_WORD_SUB:
        lexicon = attacks.load_lexicon(cfg.require_path("lexicon"))
    victim = _victim(cfg, corpus)
    ctx = AttackContext(cfg, corpus, surrogate, scorer=scorer, model=model, lexicon=lexicon)
    results = run_attacks(ctx, queries, targets, victim_lists, victim, method)

    out = results_path(cfg, method)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"record": "header", "config": cfg.resolved()}, sort_keys=True,
                       ensure_ascii=False) + "\n"
        )
        for result in results:
            fh.write(json.dumps(result_to_record(result), sort_keys=True, ensure_ascii=False) + "\n")

    adv = adversarial_path(cfg, method)
    with open(adv, "w", encoding="utf-8") as fh:
        for result in results:
            # Composite id: the same document may be attacked for several queries.
            fh.write(f"{result.doc_id}#{result.query_id}\t{join(result.adversarial)}\n")
    _write_sidecar(adv, cfg)

    _write_json(
        timing_path(cfg, method),
        {
            "total_seconds": sum(r.wall_clock_s or 0.0 for r in results),
            "per_target": [
                {"query_id": r.query_id, "doc_id": r.doc_id, "seconds": r.wall_clock_s}
                for r in results
            ],
        },
    )
    return out


def read_results(path) -> list:
    """Read an attack-results JSONL back into AttackResult objects."""
    results = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("record") == "header":
                continue
            results.append(
                AttackResult(
                    query_id=obj["query_id"],
                    doc_id=obj["doc_id"],
                    method=obj["method"],
                    adversarial=Document(
                        obj["doc_id"], tuple(segment_sentences(obj["adversarial_text"]))
                    ),
                    perturbation=obj["perturbation"],
                    old_rank=obj["old_rank"],
                    new_rank=obj["new_rank"],
                )
            )
    return results


def cmd_evaluate(cfg: ExperimentConfig, include_timing: bool = False) -> Path:
    corpus = _load_corpus(cfg)
    method = cfg.method
    results = read_results(results_path(cfg, method))
    model = load_model(lm_path(cfg))

    originals = [corpus.get(r.doc_id) for r in results]
    adversarials = [r.adversarial for r in results]
    ppl_orig, ppl_adv = ppl_report(model, originals, adversarials)

    inter = None
    overlap = None
    victim_run = run_path(cfg, "victim")
    surrogate_run = run_path(cfg, "surrogate")
    if victim_run.exists() and surrogate_run.exists():
        victim_lists = read_trec_run(victim_run)
        surrogate_lists = read_trec_run(surrogate_run)
        shared = sorted(set(victim_lists) & set(surrogate_lists))
        if shared:
            inter = sum(inter_at_10(victim_lists[q], surrogate_lists[q]) for q in shared) / len(shared)
            overlap = sum(
                rbo(victim_lists[q], surrogate_lists[q], cfg.rbo_p, cfg.rbo_depth)
                for q in shared
            ) / len(shared)

    total_clock = None
    if include_timing and timing_path(cfg, method).exists():
        total_clock = json.loads(timing_path(cfg, method).read_text(encoding="utf-8"))[
            "total_seconds"
        ]

    report = MetricReport(
        asr=asr(results),
        mean_boost=boost(results),
        pct_r_le_10=pct_rank_at_most(results, 10),
        pct_r_le_50=pct_rank_at_most(results, 50),
        inter_at_10=inter,
        rbo=overlap,
        mean_ppl_original=ppl_orig,
        mean_ppl_adversarial=ppl_adv,
        total_wall_clock=total_clock,
    )
    payload = {"config": cfg.resolved(), "method": method, "report": report.to_dict()}
    if method == attacks.METHOD_IDEM:
        payload["position_histogram"] = position_histogram(results)
    out = metrics_path(cfg, method)
    _write_json(out, payload)
    (cfg.out_path / f"report_{method}.txt").write_text(
        render_report(report) + "\n", encoding="utf-8"
    )
    return out
