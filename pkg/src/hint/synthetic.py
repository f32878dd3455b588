"""Toy corpora with a known decision rule, for sanity checks and demos."""

from __future__ import annotations

import numpy as np

FILLER = (
    "movie film plot scene actor actress story script camera music score ending "
    "director cast character dialogue sequel studio budget screen theater ticket "
    "popcorn night friend family weekend trailer poster genre drama comedy action "
    "romance thriller horror season episode series minute hour review critic"
).split()


def separable_corpus(n_docs: int = 200, seed: int = 0, token: str = "good",
                     min_sentences: int = 2, max_sentences: int = 5,
                     min_len: int = 4, max_len: int = 9, id_prefix: str = "syn") -> list[dict]:
    """Balanced two-class corpus whose label is 1 iff ``token`` occurs.

    Positive documents carry the token once, at a random slot of a random
    sentence; all other words are drawn uniformly from a fixed filler list.
    Returned records follow the {"id", "text", "label"} JSONL schema.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_docs):
        label = i % 2
        n_sent = int(rng.integers(min_sentences, max_sentences + 1))
        sents = [list(rng.choice(FILLER, size=int(rng.integers(min_len, max_len + 1))))
                 for _ in range(n_sent)]
        if label:
            s = int(rng.integers(n_sent))
            sents[s].insert(int(rng.integers(len(sents[s]) + 1)), token)
        text = " ".join(" ".join(s).capitalize() + "." for s in sents)
        rows.append({"id": f"{id_prefix}-{seed}-{i}", "text": text, "label": label})
    order = rng.permutation(n_docs)
    return [rows[j] for j in order]
