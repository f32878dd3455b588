"""Write HTML and JSON interpretation reports for a few documents.

Trains a small model on the toy corpus, then renders one report per
document into ./reports (or the directory given as the first argument).
Open the HTML files in a browser to see topic word clouds, per-topic label
bars and the sentence-by-topic heatmap.

    python3 demos/interpretation_report.py [out_dir]
"""

import sys
from pathlib import Path

from hint import Corpus, ModelConfig, PreprocessConfig, TrainConfig, tokenize_document, train
from hint.interpret import document_interpretation, render_report
from hint.synthetic import separable_corpus

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "reports")
out_dir.mkdir(parents=True, exist_ok=True)

pre = PreprocessConfig(embed_dim=32)
rows = separable_corpus(120, seed=3)
docs = [tokenize_document(r["text"], pre, r["id"], r["label"]) for r in rows]
corpus = Corpus.build(docs[:100], pre, seed=0)
train_docs = corpus.prepare(docs[:100], pre, "train")
shown = corpus.prepare(docs[100:104], pre, "test")

model = train(train_docs, corpus,
              ModelConfig(embed_dim=32, num_topics=6, node_hidden=32, node_dim=16, clf_hidden=32),
              TrainConfig(learning_rate=5e-3, epochs=6, batch_size=16)).model

for doc in shown:
    report = document_interpretation(model, doc, corpus, top_n=8)
    for fmt in ("html", "json"):
        (out_dir / f"{doc.id}.{fmt}").write_bytes(render_report(report, fmt))
    label = "positive" if report.predicted_label == 1 else "negative"
    print(f"{doc.id}: predicted {label}, prominent topic {report.prominent_topic}, "
          f"keyphrase {report.topics[0].keyphrase!r}")
print(f"reports written to {out_dir.resolve()}")
