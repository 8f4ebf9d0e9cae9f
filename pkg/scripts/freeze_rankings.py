#!/usr/bin/env python3
"""Regenerate tests/data/frozen_rankings.json.

Runs the offline fallback embedder over the desk fixture and freezes the
ranked predicate list for each relation phrase the desk suite exercises.
Tests compare live rankings against this file, so regenerate it whenever
the fixture graph, the embedder, or the label normalization changes:

    python scripts/freeze_rankings.py
"""

from __future__ import annotations

import json
import os

from kgchat import datafiles
from kgchat.kg.store import TripleStore
from kgchat.kg.terms import Iri
from kgchat.kg.access import predicates_between
from kgchat.matching import TrigramEmbedder, cosine
from kgchat.textnorm import predicate_label

E = "http://desk.example/e/"

CASES = [
    {"relation": "founded", "source": f"{E}Intel", "object": None},
    {"relation": "located in", "source": f"{E}Intel", "object": None},
    {"relation": "released", "source": f"{E}Harry_Potter", "object": None},
    {"relation": "author of", "source": f"{E}Harry_Potter", "object": None},
    {"relation": "adapted from", "source": f"{E}Harry_Potter", "object": None},
    {"relation": "write", "source": f"{E}Gerhard_Kramer", "object": None},
    {"relation": "spouse", "source": f"{E}Michelle_Obama", "object": f"{E}Barack_Obama"},
    {"relation": "wife of", "source": f"{E}Michelle_Obama", "object": f"{E}Barack_Obama"},
]


def main() -> None:
    store = TripleStore.from_file(datafiles.desk_store_path())
    embedder = TrigramEmbedder()
    frozen = []
    for case in CASES:
        source = Iri(case["source"])
        obj = Iri(case["object"]) if case["object"] else None
        predicates = predicates_between(source, obj, store)
        phrase_vector = embedder.embed(case["relation"])
        ranked = [
            (iri, cosine(phrase_vector, embedder.embed(predicate_label(iri))))
            for iri in predicates
        ]
        ranked.sort(key=lambda pair: (-pair[1], pair[0]))
        frozen.append({**case, "expected": [[iri, score] for iri, score in ranked]})
    out_path = os.path.join(os.path.dirname(__file__), "..", "tests", "data", "frozen_rankings.json")
    out_path = os.path.normpath(out_path)
    with open(out_path, "w", encoding="utf-8") as handle:
        json.dump(frozen, handle, indent=2)
    print(f"wrote {len(frozen)} frozen rankings to {out_path}")
    for entry in frozen:
        names = [predicate_label(iri) for iri, _ in entry["expected"]]
        print(f"  {entry['relation']!r}: {names}")


if __name__ == "__main__":
    main()
