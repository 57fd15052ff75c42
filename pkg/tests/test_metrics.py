import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molpix.exceptions import DegenerateClass, EmptyInput
from molpix.metrics import auc, rmse
from oracles import brute_auc


class TestAUC:
    def test_separated(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_ties(self):
        assert auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_hand_example(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_single_class(self):
        with pytest.raises(DegenerateClass):
            auc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.2], [1])

    def test_exhaustive_n4(self):
        # every labelling and every score ranking with ties over 3 levels
        for labels in itertools.product([0, 1], repeat=4):
            if len(set(labels)) < 2:
                continue
            for scores in itertools.product([0, 1, 2], repeat=4):
                assert auc(scores, labels) == float(brute_auc(scores, labels))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 12).flatmap(lambda n: st.tuples(
        st.lists(st.integers(0, 5), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n))))
    def test_matches_brute_force(self, case):
        scores, labels = case
        if len(set(labels)) < 2:
            return
        assert auc(scores, labels) == float(brute_auc(scores, labels))


class TestRMSE:
    def test_examples(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert abs(rmse([0, 2], [1, 2]) - math.sqrt(0.5)) <= 1e-12
        assert rmse([0.0], [3.0]) == 3.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            rmse([], [])

    def test_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])

    def test_accepts_arrays(self):
        assert rmse(np.array([[1.0], [3.0]]), [1.0, 1.0]) == pytest.approx(math.sqrt(2))
