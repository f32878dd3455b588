"""Desk-scale IMDB subset drawn from the ``movie-reviews`` wheel.

The wheel ships the 25,000 IMDB training reviews in their canonical order
(12,500 negative followed by 12,500 positive) but its label column is
constant, so labels are recovered from the row position. The subset is
pinned by the id list in ``fixtures/imdb_desk_subset.json``; run this file
to regenerate it.
"""

import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

FIXTURE = Path(__file__).parent / "fixtures" / "imdb_desk_subset.json"
N_IMDB = 25_000
SEED = 20240501


def imdb_reviews() -> list[str]:
    try:
        data = resources.files("movie_reviews").joinpath("data/combined_movie_reviews.csv")
    except ModuleNotFoundError as exc:
        raise RuntimeError("the IMDB check needs `pip install movie-reviews==0.0.2`") from exc
    csv.field_size_limit(sys.maxsize)
    with data.open(encoding="utf-8") as fh:
        texts = [row["text"] for row in csv.DictReader(fh) if row["source"] == "imdb"]
    if len(texts) != N_IMDB:
        raise RuntimeError(f"expected {N_IMDB} IMDB rows, found {len(texts)}")
    return texts


def label_of(index: int) -> int:
    return int(index >= N_IMDB // 2)


def build_ids(n_train=5000, n_test=2000, seed=SEED) -> dict:
    """Balanced, disjoint train/test index lists."""
    rng = np.random.default_rng(seed)
    half = N_IMDB // 2
    out = {"seed": seed, "train": [], "test": []}
    for offset in (0, half):
        pool = rng.permutation(half) + offset
        out["train"] += pool[: n_train // 2].tolist()
        out["test"] += pool[n_train // 2: n_train // 2 + n_test // 2].tolist()
    out["train"] = rng.permutation(out["train"]).tolist()
    out["test"] = sorted(out["test"])
    return out


def load_subset():
    ids = json.loads(FIXTURE.read_text())
    texts = imdb_reviews()
    rows = lambda idx: [{"id": f"imdb-{i}", "text": texts[i], "label": label_of(i)} for i in idx]  # noqa: E731
    return rows(ids["train"]), rows(ids["test"])


if __name__ == "__main__":
    FIXTURE.parent.mkdir(exist_ok=True)
    FIXTURE.write_text(json.dumps(build_ids()) + "\n")
    print(f"wrote {FIXTURE}")
