import pytest
from hypothesis import given
from hypothesis import strategies as st

from tubeforge.containers import DatasetManifest, ManifestEntry
from tubeforge.errors import EmptyInput
from tubeforge.labels import Label
from tubeforge.metrics import ConfusionMatrix, confusion, metrics_of, split_report, validate_split

from oracles import rational_metrics

F, N = Label.FIGHT, Label.NONFIGHT


def test_confusion_basic():
    assert confusion([(F, F), (N, N)]) == ConfusionMatrix(tp=1, fp=0, tn=1, fn=0)
    assert confusion([(F, N)]) == ConfusionMatrix(fp=1)
    assert confusion([("fight", "nonfight")]).fp == 1


def test_confusion_empty():
    with pytest.raises(EmptyInput):
        confusion([])


def fixture_pairs():
    return [(F, F)] * 41 + [(N, F)] * 6 + [(N, N)] * 36 + [(F, N)] * 8


def test_confusion_constructed_fixture():
    pairs = fixture_pairs()
    assert len(pairs) == 91
    assert confusion(pairs) == ConfusionMatrix(tp=41, fp=8, tn=36, fn=6)


def test_metrics_fixture():
    m = metrics_of(ConfusionMatrix(tp=41, fp=8, tn=36, fn=6))
    assert m["sensitivity"] == 41 / 47
    assert m["specificity"] == 36 / 44
    assert m["accuracy"] == 77 / 91
    assert m["precision"] == 41 / 49


def test_metrics_perfect():
    assert metrics_of(ConfusionMatrix(tp=10, tn=10)) == dict.fromkeys(
        ["accuracy", "precision", "sensitivity", "specificity"], 1.0)


def test_undefined_precision_is_absent():
    m = metrics_of(ConfusionMatrix(tp=0, fp=0, tn=5, fn=2))
    assert "precision" not in m
    assert m["sensitivity"] == 0.0


counts = st.integers(0, 10**6)


@given(counts, counts, counts, counts)
def test_metrics_equal_rational_oracle(tp, fp, tn, fn):
    got = metrics_of(ConfusionMatrix(tp, fp, tn, fn))
    ref = rational_metrics(tp, fp, tn, fn)
    assert set(got) == set(ref)
    for k, v in ref.items():
        assert got[k] == float(v)


pairs = st.lists(st.tuples(st.sampled_from([F, N]), st.sampled_from([F, N])), min_size=1, max_size=50)


@given(pairs)
def test_swapping_columns_swaps_fp_and_fn(ps):
    cm = confusion(ps)
    swapped = confusion([(t, p) for p, t in ps])
    assert (swapped.tp, swapped.tn, swapped.fp, swapped.fn) == (cm.tp, cm.tn, cm.fn, cm.fp)


@given(pairs)
def test_accuracy_invariant_under_relabeling(ps):
    flip = {F: N, N: F}
    relabeled = confusion([(flip[p], flip[t]) for p, t in ps])
    assert metrics_of(relabeled)["accuracy"] == metrics_of(confusion(ps))["accuracy"]


def counts_of(fight, nonfight):
    return {"fight": fight, "nonfight": nonfight}


def test_split_counts_from_dataset():
    report = split_report({"train": counts_of(324, 306), "test": counts_of(47, 44), "val": counts_of(91, 88)})
    assert report.fractions == (630 / 900, 91 / 900, 179 / 900)
    assert report.consistent
    assert abs(sum(report.fractions) - 1) <= 1e-12


def test_split_off_target_warns(caplog):
    report = split_report({"train": counts_of(25, 25), "test": counts_of(25, 0), "val": counts_of(0, 25)})
    assert report.fractions == (0.5, 0.25, 0.25)
    assert not report.consistent
    assert "deviates" in caplog.text


def test_split_single_split():
    report = split_report({"train": counts_of(10, 0), "test": counts_of(0, 0), "val": counts_of(0, 0)})
    assert report.fractions == (1.0, 0.0, 0.0)
    assert len(report.warnings) == 3


def test_validate_split_from_manifests():
    def manifest(split, n_fight, n_non):
        labels = [F] * n_fight + [N] * n_non
        return DatasetManifest([ManifestEntry(f"{i}.npy", "npy", (1,), l, "0") for i, l in enumerate(labels)], split)

    report = validate_split(manifest("train", 7, 0), manifest("test", 0, 1), manifest("val", 1, 1))
    assert report.fractions == (0.7, 0.1, 0.2)
    assert report.counts["val"] == {"fight": 1, "nonfight": 1}
    assert report.consistent
