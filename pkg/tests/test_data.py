from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molpix.data import (CLASSIFICATION, REGRESSION, Dataset, Record, load_csv, make_splits, oversample,
                         sample_weights, holdout_fraction)
from molpix.exceptions import DegenerateClass, MalformedCSV, TooFewRecords, UnknownTask
from oracles import random_labels, split_violations, toy_classification
from conftest import DATA


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCSV:
    def test_missing_label_dropped(self, tmp_path):
        p = write(tmp_path, "id,smiles,tox\na,CCO,1\nb,CCN,\nc,CCC,0\n")
        d = load_csv(p, "tox")
        assert [r.id for r in d.records] == ["a", "c"]
        assert d.kind == CLASSIFICATION and d.skipped["missing label"] == 1

    def test_unparseable_smiles_counted(self, tmp_path):
        p = write(tmp_path, "smiles,y\nCCO,1.5\nC1CC,2.0\n[Fe],3\nCC,-1\n")
        d = load_csv(p, "y")
        assert len(d) == 2 and d.kind == REGRESSION
        assert d.skipped == Counter({"SmilesSyntaxError": 1, "UnsupportedElement": 1})
        assert [r.id for r in d.records] == ["1", "4"]

    def test_regression_file_of_643_rows(self, tmp_path):
        rows = "".join(f"m{i},{'C' * (1 + i % 9)}O,{-0.01 * i:.2f}\n" for i in range(643))
        d = load_csv(write(tmp_path, "id,smiles,expt\n" + rows), "expt", "freesolv")
        assert len(d) == 643 and d.kind == REGRESSION

    def test_unknown_task(self, tmp_path):
        with pytest.raises(UnknownTask):
            load_csv(write(tmp_path, "smiles,a\nC,1\n"), "b")

    @pytest.mark.parametrize("text", ["", "id,a\n1,2\n", "smiles,y\nC,1,2\n", "smiles,y\nC,high\n"])
    def test_malformed(self, tmp_path, text):
        with pytest.raises(MalformedCSV):
            load_csv(write(tmp_path, text), "y" if "y" in text else "a")

    def test_header_case_insensitive(self, tmp_path):
        d = load_csv(write(tmp_path, "ID,SMILES,y\nq,CC,0\nr,CO,1\n"), "y")
        assert d.smiles == ["CC", "CO"] and d.records[0].id == "q"

    def test_bundled_toy_sets(self):
        d60 = load_csv(DATA / "toy60.csv", "has_nitrogen")
        d20 = load_csv(DATA / "toy20.csv", "has_ring")
        assert len(d60) == 60 and d60.labels.sum() == 30
        assert len(d20) == 20 and d20.labels.sum() == 10

    def test_dataset_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            Dataset([Record("a", "C", 0.5)], CLASSIFICATION)


class TestFractions:
    @pytest.mark.parametrize("name, share", [("tox21-NR-AR", 1 / 6), ("hiv", 1 / 6), ("freesolv", 1 / 10), ("custom", 1 / 10)])
    def test_holdout_fraction(self, name, share):
        assert holdout_fraction(name) == share


class TestSplits:
    def test_600_balanced(self):
        plan = make_splits(toy_classification([0, 1] * 300), seed=0)
        assert len(plan.test) == 60
        assert [len(v) for _, v in plan.folds] == [108] * 5
        assert all(len(t) == 432 for t, _ in plan.folds)

    def test_regression_split_sizes(self):
        d = Dataset([Record(str(i), "C", float(i)) for i in range(643)], REGRESSION, "freesolv")
        plan = make_splits(d, seed=3)
        assert len(plan.test) == 64
        assert sorted(len(v) for _, v in plan.folds) == [115, 116, 116, 116, 116]

    def test_deterministic(self):
        d = toy_classification(random_labels(np.random.default_rng(1), 300))
        assert make_splits(d, 5) == make_splits(d, 5)
        assert make_splits(d, 5) != make_splits(d, 6)

    def test_worst_imbalance(self):
        labels = np.zeros(35 * 20)
        labels[::35] = 1
        assert split_violations(labels, 0) == []

    def test_too_few(self):
        with pytest.raises(TooFewRecords):
            make_splits(toy_classification([0, 1] * 20), 0)

    def test_single_class(self):
        with pytest.raises(DegenerateClass):
            make_splits(toy_classification([0] * 80), 0)

    def test_too_few_positives_for_every_fold(self):
        labels = [0] * 98 + [1] * 2
        with pytest.raises(DegenerateClass):
            make_splits(toy_classification(labels), 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(60, 600), st.integers(0, 2**31))
    def test_properties(self, n, seed):
        labels = random_labels(np.random.default_rng(seed), n)
        try:
            assert split_violations(labels, seed) == []
        except DegenerateClass:
            # too few minority samples to place one in every split
            assert labels.sum() < 12 or (n - labels.sum()) < 12


class TestOversample:
    def test_25x(self):
        labels = np.array([0] * 100 + [1] * 4)
        out = oversample(range(104), labels)
        assert Counter(labels[out].tolist()) == {0: 100, 1: 100}
        assert all(out.count(i) == 25 for i in range(100, 104))

    def test_balanced_unchanged(self):
        labels = np.array([0, 1] * 10)
        assert oversample(range(20), labels) == list(range(20))

    def test_top_up_keeps_ratio(self):
        # floor(7/4) = 1 would leave 7:4; top-up adds copies of the lowest minority indices
        labels = np.array([0] * 7 + [1] * 4)
        out = oversample(range(11), labels)
        c = Counter(labels[out].tolist())
        assert c[0] / c[1] <= 1.25
        assert out.count(7) == 2 and out.count(10) == 1

    def test_worst_case(self):
        labels = np.array([0] * 340 + [1] * 10)
        c = Counter(labels[oversample(range(350), labels)].tolist())
        assert 0.8 <= c[0] / c[1] <= 1.25

    def test_subset_of_indices(self):
        labels = np.array([0, 0, 0, 1, 1, 0, 0, 0])
        out = oversample([0, 1, 3, 5], labels)
        assert out == [0, 1, 3, 3, 3, 5]

    def test_weights(self):
        labels = np.array([0, 0, 1])
        assert sample_weights([0, 1, 2], labels) == {0: 1, 1: 1, 2: 2}
