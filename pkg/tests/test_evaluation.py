import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmsonic.classifiers import Prediction
from palmsonic.evaluation import (
    ConfusionMatrix,
    DatasetManifest,
    ManifestRecord,
    confusion,
    load_manifest,
    metrics,
    save_manifest,
    split,
)


def manifest_of(n, infested_every=2):
    records = []
    for i in range(n):
        label = "infested" if i % infested_every == 0 else "not_infested"
        records.append(ManifestRecord(f"clip{i:04d}", f"/audio/clip{i:04d}.wav", label))
    return DatasetManifest(tuple(records))


def preds(labels, score=0.9):
    return [Prediction(lbl, score if lbl == "infested" else 1 - score) for lbl in labels]


class TestSplit:
    def test_corpus_of_1106_splits_884_110_112(self):
        s = split(manifest_of(1106), seed=0)
        assert (len(s.train), len(s.val), len(s.test)) == (884, 110, 112)

    def test_same_seed_gives_identical_split(self):
        m = manifest_of(100)
        assert split(m, seed=7) == split(m, seed=7)

    def test_ten_clips_split_8_1_1(self):
        s = split(manifest_of(10), seed=3)
        assert (len(s.train), len(s.val), len(s.test)) == (8, 1, 1)

    def test_too_few_clips_rejected(self):
        with pytest.raises(ValueError):
            split(manifest_of(2), seed=0)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(3, 1500), seed=st.integers(0, 2**31))
    def test_split_is_partition(self, n, seed):
        m = manifest_of(n)
        s = split(m, seed)
        parts = list(s.train) + list(s.val) + list(s.test)
        assert len(parts) == n
        assert set(parts) == {r.clip_id for r in m.records}
        assert not (set(s.train) & set(s.val))
        assert not (set(s.train) & set(s.test))
        assert not (set(s.val) & set(s.test))

    def test_stratified_split_keeps_class_ratio(self):
        m = manifest_of(200, infested_every=4)  # 50 infested / 150 clean
        s = split(m, seed=1, stratify=True)
        labels = m.labels_by_id()
        train_pos = sum(labels[c] == "infested" for c in s.train)
        assert train_pos == int(0.8 * 50)
        assert len(s.train) == 160


class TestConfusion:
    def test_all_correct(self):
        truth = ["infested"] * 5 + ["not_infested"] * 5
        cm = confusion(preds(truth), truth)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (5, 5, 0, 0)

    def test_all_predicted_positive(self):
        truth = ["infested"] * 5 + ["not_infested"] * 5
        cm = confusion(preds(["infested"] * 10), truth)
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (5, 5, 0, 0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            confusion(preds(["infested"]), ["infested", "infested"])

    def test_total_matches_input_size(self):
        truth = ["infested", "not_infested", "infested"]
        cm = confusion(preds(["not_infested", "not_infested", "infested"]), truth)
        assert cm.total == 3


class TestMetrics:
    def test_reference_row(self):
        # brute force: 38 correct of 40, 36 of 38 predicted positives correct,
        # no missed positives
        m = metrics(ConfusionMatrix(tp=36, fp=2, tn=2, fn=0))
        assert m.accuracy == pytest.approx(0.950, abs=5e-4)
        assert m.precision == pytest.approx(0.947, abs=5e-4)
        assert m.recall == pytest.approx(1.000, abs=5e-4)
        assert m.f1 == pytest.approx(0.973, abs=5e-4)

    def test_perfect_predictions(self):
        m = metrics(ConfusionMatrix(tp=10, fp=0, tn=10, fn=0))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_degenerate_no_positive_predictions(self):
        m = metrics(ConfusionMatrix(tp=0, fp=0, tn=3, fn=2))
        assert m.precision == 0.0
        assert not m.precision_defined
        assert m.recall == 0.0
        assert m.recall_defined

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    @settings(max_examples=100, deadline=None)
    @given(
        tp=st.integers(0, 50),
        fp=st.integers(0, 50),
        tn=st.integers(0, 50),
        fn=st.integers(0, 50),
    )
    def test_f1_between_precision_and_recall(self, tp, fp, tn, fn):
        if tp + fp + tn + fn == 0:
            return
        m = metrics(ConfusionMatrix(tp, fp, tn, fn))
        if m.precision > 0 and m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**9), n=st.integers(1, 200))
    def test_accuracy_equals_mean_correctness(self, seed, n):
        g = np.random.default_rng(seed)
        truth = ["infested" if v else "not_infested" for v in g.integers(0, 2, n)]
        guessed = ["infested" if v else "not_infested" for v in g.integers(0, 2, n)]
        p = preds(guessed)
        m = metrics(confusion(p, truth))
        expected = np.mean([a == b for a, b in zip(guessed, truth)])
        assert m.accuracy == pytest.approx(expected, abs=1e-12)

    def test_permutation_invariance(self, rng):
        truth = ["infested" if v else "not_infested" for v in rng.integers(0, 2, 40)]
        guessed = ["infested" if v else "not_infested" for v in rng.integers(0, 2, 40)]
        base = metrics(confusion(preds(guessed), truth))
        perm = rng.permutation(40)
        shuffled = metrics(
            confusion(preds([guessed[i] for i in perm]), [truth[i] for i in perm])
        )
        assert base == shuffled


class TestManifestIo:
    def test_round_trip(self, tmp_path):
        m = manifest_of(7)
        path = save_manifest(m, tmp_path / "manifest.csv")
        assert load_manifest(path) == m

    def test_header_enforced(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,file,cls\n1,a.wav,infested\n")
        with pytest.raises(ValueError, match="header"):
            load_manifest(p)

    def test_duplicate_ids_rejected(self):
        records = (
            ManifestRecord("a", "a.wav", "infested"),
            ManifestRecord("a", "b.wav", "not_infested"),
        )
        with pytest.raises(ValueError, match="unique"):
            DatasetManifest(records)

    def test_class_counts(self):
        m = manifest_of(10, infested_every=5)
        assert m.class_counts() == {"infested": 2, "not_infested": 8}

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="label"):
            ManifestRecord("x", "x.wav", "sick")

    def test_validate_paths_reports_missing(self, tmp_path):
        real = tmp_path / "real.wav"
        real.write_bytes(b"")
        m = DatasetManifest(
            (
                ManifestRecord("ok", str(real), "infested"),
                ManifestRecord("gone", str(tmp_path / "gone.wav"), "not_infested"),
            )
        )
        assert m.validate_paths() == ["gone"]
