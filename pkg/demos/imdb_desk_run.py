"""Train on the pinned 5,000-review IMDB subset and score 2,000 held-out reviews.

Needs the ``movie-reviews`` wheel (installed with the ``test`` extra). The
subset ids live in tests/fixtures/imdb_desk_subset.json; pass --regenerate
to rebuild that list from its fixed seed first. A full run takes a few
minutes on one CPU core.

    python3 demos/imdb_desk_run.py [--regenerate]
"""

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from imdb_subset import FIXTURE, build_ids, load_subset  # noqa: E402

from hint import Corpus, ModelConfig, PreprocessConfig, TrainConfig, tokenize_document, train  # noqa: E402
from hint.interpret import model_topic_word_table  # noqa: E402
from hint.trainer import evaluate_docs  # noqa: E402

if "--regenerate" in sys.argv:
    FIXTURE.write_text(json.dumps(build_ids()) + "\n")
    print(f"rewrote {FIXTURE}")

pre = PreprocessConfig(embed_dim=64)
start = time.perf_counter()
train_rows, test_rows = load_subset()
train_docs = [tokenize_document(r["text"], pre, r["id"], r["label"]) for r in train_rows]
test_docs = [tokenize_document(r["text"], pre, r["id"], r["label"]) for r in test_rows]
corpus = Corpus.build(train_docs, pre, seed=0)
train_docs = corpus.prepare(train_docs, pre, "train")
test_docs = corpus.prepare(test_docs, pre, "test")
print(f"{len(train_docs)} train / {len(test_docs)} held-out reviews, vocabulary {len(corpus.vocab)}")

model_cfg = ModelConfig(embed_dim=64, num_topics=20, node_hidden=64, node_dim=32, clf_hidden=64)
train_cfg = TrainConfig(learning_rate=1e-4, epochs=8, batch_size=32)
result = train(train_docs, corpus, model_cfg, train_cfg, test_docs, keep="last",
               on_epoch=lambda e: print(f"  epoch {e['epoch']}: val loss {e['val_loss']:.4f}, "
                                        f"val acc {e['val_accuracy']:.4f}", flush=True))
acc = evaluate_docs(result.model, test_docs, corpus.tfidf)["accuracy"]
print(f"held-out accuracy {acc:.4f} after {(time.perf_counter() - start) / 60:.1f} min")

table = model_topic_word_table(result.model, n=10)
for k in range(model_cfg.num_topics):
    print(f"  topic {k:2d}: {' '.join(table.top_tokens(corpus.vocab, k))}")
