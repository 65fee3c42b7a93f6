#!/usr/bin/env python3
"""Regenerate the bundled synthetic fixture under data/fixture/.

The fixture is fully determined by the parameters below; rerunning this
script must reproduce the committed files byte for byte.
"""

from pathlib import Path

from rankattack.synth import make_fixture, make_lexicon, write_fixture, write_lexicon

FIXTURE_SEED = 21
N_DOCS = 2000
N_QUERIES = 50
N_TOPICS = 10


def main():
    out_dir = Path(__file__).resolve().parent.parent / "data" / "fixture"
    fixture = make_fixture(
        seed=FIXTURE_SEED, n_docs=N_DOCS, n_queries=N_QUERIES, n_topics=N_TOPICS
    )
    collection, queries = write_fixture(fixture, out_dir)
    lexicon_path = out_dir / "lexicon.tsv"
    write_lexicon(make_lexicon(fixture, seed=FIXTURE_SEED), lexicon_path)
    print(collection)
    print(queries)
    print(lexicon_path)


if __name__ == "__main__":
    main()
