"""Train on a toy corpus where one word decides the label, then look inside.

The corpus is generated on the fly: positive documents contain the word
"good" exactly once, negative documents never do. A correct model should
learn to rely on that single word, and the evaluation tools should be able
to show it.

    python3 demos/synthetic_walkthrough.py
"""

from hint import Corpus, ModelConfig, PreprocessConfig, TrainConfig, tokenize_document, train
from hint.evalkit import completeness_sufficiency, topic_coherence, word_removal_curve
from hint.interpret import document_interpretation, model_topic_word_table
from hint.synthetic import separable_corpus
from hint.trainer import evaluate_docs

pre = PreprocessConfig(embed_dim=64)


def load(n, seed, prefix):
    rows = separable_corpus(n, seed=seed, id_prefix=prefix)
    return [tokenize_document(r["text"], pre, r["id"], r["label"]) for r in rows]


train_docs, test_docs = load(200, 0, "train"), load(200, 1, "test")
corpus = Corpus.build(train_docs, pre, seed=0)
train_docs = corpus.prepare(train_docs, pre, "train")
test_docs = corpus.prepare(test_docs, pre, "test")
print(f"vocabulary: {len(corpus.vocab)} tokens, {len(train_docs)} training documents")

# Training
model_cfg = ModelConfig(embed_dim=64, num_topics=10, node_hidden=64, node_dim=32, clf_hidden=64)
train_cfg = TrainConfig(learning_rate=5e-3, epochs=10, batch_size=16)
result = train(train_docs, corpus, model_cfg, train_cfg, test_docs, keep="last",
               on_epoch=lambda e: print(f"  epoch {e['epoch']}: loss {e['train_loss']:.3f} "
                                        f"held-out acc {e['val_accuracy']:.3f}"))
model = result.model
print("held-out accuracy:", evaluate_docs(model, test_docs, corpus.tfidf)["accuracy"])

# What happens when the deciding word is hidden?
good = corpus.vocab.id("good")
curve = word_removal_curve(model, test_docs, corpus, {0: [], 1: [good]})
print(f"accuracy with 'good' replaced by <unk>: {curve['points'][1]['accuracy']:.3f} "
      f"(was {curve['baseline_accuracy']:.3f})")

positive = next(d for d in test_docs if d.label == 1)
where = {(i, j) for i, s in enumerate(positive.sentences) for j, t in enumerate(s) if t == good}
scores = completeness_sufficiency(model, positive, corpus, where)
print(f"doc {positive.id}: completeness {scores['completeness']:.3f}, sufficiency {scores['sufficiency']:.3f}")

# Topics: global word lists and their coherence against the training text
table = model_topic_word_table(model, n=8)
topics = [table.top_tokens(corpus.vocab, k) for k in range(model_cfg.num_topics)]
for k, words in enumerate(topics):
    print(f"  topic {k}: {' '.join(words)}")
coherence = topic_coherence(topics, [sum(d.tokens, []) for d in train_docs], "npmi")
print(f"mean NPMI: {coherence.mean:.3f}")

report = document_interpretation(model, positive, corpus)
print(f"prominent topic {report.prominent_topic}, contrastive topic {report.contrastive_topic}")
for sent in report.sentences:
    print(f"  [topic {sent.topic_id}] {' '.join(sent.tokens)}")
