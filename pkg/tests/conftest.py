"""Shared fixtures: the bundled desk-scale experiment, built once per session."""

from dataclasses import dataclass
from pathlib import Path

import pytest

from rankattack import pipeline
from rankattack.coherence import LmAdjacencyScorer
from rankattack.config import ExperimentConfig, load_config
from rankattack.corpus import Corpus, load_collection, load_queries
from rankattack.ngram import NGramModel, load_model
from rankattack.relevance import (
    FeatureExtractor,
    LinearRanker,
    VictimRanker,
    build_pairs,
    read_trec_run,
    train_surrogate,
)
from rankattack.utils import derive_seed

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_DIR = REPO_ROOT / "data" / "fixture"

EXPERIMENT_SEED = 13


@dataclass
class Experiment:
    """The bundled corpus plus every trained artifact the experiments share."""

    cfg: ExperimentConfig
    out_dir: Path
    corpus: Corpus
    queries: dict
    victim_lists: dict
    victim: VictimRanker
    model: NGramModel
    scorer: LmAdjacencyScorer
    surrogate: LinearRanker
    surrogate_small: LinearRanker
    lexicon: dict

    def config(self, **overrides) -> ExperimentConfig:
        values = {
            "collection": str(FIXTURE_DIR / "collection.tsv"),
            "queries": str(FIXTURE_DIR / "queries.tsv"),
            "lexicon": str(FIXTURE_DIR / "lexicon.tsv"),
            "out_dir": str(self.out_dir),
            "candidates": 200,
            "append_vocab": 500,
            "seed": EXPERIMENT_SEED,
        }
        values.update(overrides)
        return load_config(None, values)

    def context(self, surrogate=None, **overrides) -> pipeline.AttackContext:
        return pipeline.AttackContext(
            self.config(**overrides),
            self.corpus,
            surrogate if surrogate is not None else self.surrogate,
            scorer=self.scorer,
            model=self.model,
            lexicon=self.lexicon,
        )


def _train_on(queries_subset, victim_lists, corpus, queries, cfg):
    pairs = None
    for query_id in queries_subset:
        batch = build_pairs(victim_lists[query_id], cfg.top_r)
        pairs = batch if pairs is None else pairs + batch
    return train_surrogate(
        pairs,
        corpus,
        queries,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        margin=cfg.margin,
        k1=cfg.k1,
        b=cfg.b,
    )


@pytest.fixture(scope="session")
def experiment(tmp_path_factory) -> Experiment:
    out_dir = tmp_path_factory.mktemp("experiment")
    cfg = load_config(
        None,
        {
            "collection": str(FIXTURE_DIR / "collection.tsv"),
            "queries": str(FIXTURE_DIR / "queries.tsv"),
            "lexicon": str(FIXTURE_DIR / "lexicon.tsv"),
            "out_dir": str(out_dir),
            "candidates": 200,
            "append_vocab": 500,
            "seed": EXPERIMENT_SEED,
        },
    )
    pipeline.cmd_build_stats(cfg)
    pipeline.cmd_train_lm(cfg)
    pipeline.cmd_rank(cfg, "bm25")
    pipeline.cmd_rank(cfg, "victim")
    pipeline.cmd_train_surrogate(cfg)
    pipeline.cmd_rank(cfg, "surrogate")

    corpus = load_collection(FIXTURE_DIR / "collection.tsv")
    queries = {q.query_id: q for q in load_queries(FIXTURE_DIR / "queries.tsv")}
    victim_lists = read_trec_run(out_dir / "victim.run")
    victim = VictimRanker.create(
        FeatureExtractor(corpus.stats, cfg.k1, cfg.b), derive_seed(cfg.seed, "victim")
    )
    model = load_model(out_dir / "lm.counts")
    from rankattack.attack import load_lexicon

    surrogate = _train_on(sorted(queries), victim_lists, corpus, queries, cfg)
    # The degraded surrogate: retrained on the first 10% of queries.
    tenth = sorted(queries)[: max(1, len(queries) // 10)]
    surrogate_small = _train_on(tenth, victim_lists, corpus, queries, cfg)

    return Experiment(
        cfg=cfg,
        out_dir=out_dir,
        corpus=corpus,
        queries=queries,
        victim_lists=victim_lists,
        victim=victim,
        model=model,
        scorer=LmAdjacencyScorer(model, cfg.window),
        surrogate=surrogate,
        surrogate_small=surrogate_small,
        lexicon=load_lexicon(FIXTURE_DIR / "lexicon.tsv"),
    )
