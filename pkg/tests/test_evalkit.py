import json
import math
import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hint import evalkit
from hint.corpus import Document
from hint.errors import ConfigError
from hint.evalkit import (RationaleSet, accuracy, bin_sizes, coherence_cv, coherence_npmi, coherence_uci,
                          completeness_sufficiency, faithfulness_bins, npmi_pair, per_class_prf,
                          rationale_agreement, read_rationales, removal_lists, replace_with_unk,
                          topic_coherence, window_counts, word_removal_curve)
from hint.trainer import predict_many


def test_accuracy_and_prf():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    table = per_class_prf([0, 0, 0, 0], [0, 0, 1, 1])
    assert table["classes"][0]["recall"] == 1.0
    assert table["classes"][0]["precision"] == 0.5
    assert table["classes"][1]["f1"] == 0.0 and not table["classes"][1]["absent"]
    five = per_class_prf([0, 1, 2], [0, 1, 2], num_classes=5)
    assert five["classes"][4]["absent"] and five["classes"][4]["f1"] == 0.0
    assert five["classes"][2]["f1"] == 1.0


def test_window_counts_boolean_windows():
    single, joint, total = window_counts([["a", "b", "a", "c"]], {"a", "c"}, window=2)
    # windows: ab, ba, ac
    assert total == 3 and single["a"] == 3 and single["c"] == 1 and joint[("a", "c")] == 1
    single, _, total = window_counts([["a"], ["b", "a"]], {"a"}, window=5)
    assert total == 2 and single["a"] == 2


def test_npmi_extremes():
    always = [["x", "y"], ["x", "y", "z"], ["w"]]
    assert npmi_pair("x", "y", always) == pytest.approx(1.0)
    assert npmi_pair("x", "x", always) == pytest.approx(1.0, abs=1e-9)
    # p(a)=p(b)=1/2, p(ab)=1/4
    indep = [["a", "b"], ["a"], ["b"], ["c"]]
    assert npmi_pair("a", "b", indep) == pytest.approx(0.0, abs=1e-9)
    assert coherence_uci(["a", "b"], indep) == pytest.approx(0.0, abs=1e-9)


def test_coherence_skips_absent_words():
    docs = [["a", "b"], ["a"]]
    with pytest.warns(UserWarning):
        res = topic_coherence([["a", "b", "zzz"]], docs, "npmi")
    assert res.skipped == [["zzz"]]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert res.scores[0] == coherence_npmi(["a", "b"], docs)
    with pytest.raises(ConfigError):
        topic_coherence([["a"]], docs, "bogus")


def test_cv_hand_case():
    docs = [["a", "b"], ["a", "b"], ["c"]]
    # a and b always co-occur: NPMI vectors are identical, cosine 1
    assert coherence_cv(["a", "b"], docs) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=12), min_size=1, max_size=6),
       st.integers(1, 6))
def test_npmi_bounded(docs, window):
    single, joint, total = window_counts(docs, set("abcde"), window)
    for w1 in "abcde":
        for w2 in "abcde":
            if w1 < w2 and joint[(w1, w2)] > 0:
                v = npmi_pair(w1, w2, docs, window)
                assert -1 - 1e-9 <= v <= 1 + 1e-9


def test_bins_and_kept_counts():
    assert bin_sizes(30) == [1, 2, 3, 6, 15]
    assert bin_sizes(200) == [2, 10, 20, 40, 100]
    kept = [30 - b for b in bin_sizes(30)]
    assert all(a >= b for a, b in zip(kept, kept[1:]))


def test_replace_with_unk():
    doc = Document("d", [["a", "b"], ["c"]], sentences=[[2, 3], [4]])
    out = replace_with_unk(doc, positions={(0, 1)})
    assert out.sentences == [[2, 1], [4]] and out.tokens == [["a", "<unk>"], ["c"]]
    assert replace_with_unk(doc, token_ids={4}).sentences == [[2, 3], [1]]
    assert replace_with_unk(doc, positions={(0, 1)}, keep_only=True).sentences == [[1, 3], [1]]
    assert doc.sentences == [[2, 3], [4]]


def test_completeness_arithmetic_on_stub(monkeypatch):
    def fake_predict(model, doc, corpus):
        p = 0.9 if doc.sentences == [[2, 3]] else (0.6 if doc.sentences == [[1, 3]] else 0.7)
        return SimpleNamespace(label=1, probs=np.array([1 - p, p]))

    monkeypatch.setattr(evalkit, "predict", fake_predict)
    doc = Document("d", [["a", "b"]], sentences=[[2, 3]])
    res = completeness_sufficiency(None, doc, None, {(0, 0)})
    assert res["completeness"] == pytest.approx(0.3)
    assert res["sufficiency"] == pytest.approx(0.2)


def test_faithfulness_contracts_exact(small_data, small_model):
    corpus, _, test_docs = small_data
    doc = test_docs[0]
    everything = {(i, j) for i, s in enumerate(doc.sentences) for j in range(len(s))}
    assert completeness_sufficiency(small_model, doc, corpus, everything)["sufficiency"] == 0.0
    assert completeness_sufficiency(small_model, doc, corpus, set())["completeness"] == 0.0
    rows = faithfulness_bins(small_model, doc, corpus)
    kept = [r["kept_tokens"] for r in rows]
    assert kept == sorted(kept, reverse=True)


def test_removal_curve_empty_list_is_baseline(small_data, small_model):
    corpus, _, test_docs = small_data
    base = accuracy(predict_many(small_model, test_docs, corpus).argmax(-1), [d.label for d in test_docs])
    res = word_removal_curve(small_model, test_docs, corpus, {0: []})
    assert res["points"][0]["accuracy"] == base and res["points"][0]["drop"] == 0.0


def test_removal_lists_strategies(small_data, small_model):
    corpus, _, test_docs = small_data
    for strategy in ("context", "topic", "unique_topic"):
        lists = removal_lists(small_model, test_docs, corpus, strategy, [0, 3, 5])
        assert lists[0] == [] and len(lists[5]) == 5 and lists[5][:3] == lists[3]
        assert len(set(lists[5])) == 5 and not {0, 1} & set(lists[5])
    with pytest.raises(ConfigError):
        removal_lists(small_model, test_docs, corpus, "context", [len(corpus.vocab) + 1])
    with pytest.raises(ConfigError):
        removal_lists(small_model, test_docs, corpus, "random", [1])


def test_rationale_agreement():
    a = RationaleSet("d", {1, 2, 3})
    b = RationaleSet("d", {2, 3, 4, 5}, gold=True)
    p, r, f = rationale_agreement(a, b)
    assert (p, r) == (2 / 3, 0.5) and f == pytest.approx(2 * p * r / (p + r))
    assert rationale_agreement(b, a)[:2] == (r, p)
    assert rationale_agreement(a, a) == (1.0, 1.0, 1.0)
    assert rationale_agreement(RationaleSet("d", {7}), a) == (0.0, 0.0, 0.0)
    assert rationale_agreement(RationaleSet("d", set()), a)[0] == 0.0
    with pytest.raises(ConfigError):
        rationale_agreement(a, RationaleSet("d", {1}, "sentence"))
    with pytest.raises(ConfigError):
        RationaleSet("d", {5}).check_bounds(Document("d", [["a", "b"]]))


def test_read_eraser_rationales(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text(json.dumps({"doc_id": "x", "spans": [{"start_token": 1, "end_token": 3},
                                                         {"start_token": 5, "end_token": 6}]}) + "\n")
    got = read_rationales(path)
    assert got["x"].indices == frozenset({1, 2, 5}) and got["x"].gold


def test_metrics_report_json_handles_nan():
    rep = evalkit.MetricsReport(accuracy=0.5, removal={"correlation": math.nan})
    data = json.loads(rep.to_json())
    assert data["removal"]["correlation"] is None
