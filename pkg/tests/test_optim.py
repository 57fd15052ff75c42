import math

import numpy as np
import pytest

from molpix.exceptions import NumericalFault, ShapeMismatch
from molpix.optim import RMSPROP, SGD_MOMENTUM, OptimizerState, rmsprop_step, sgd_momentum_step, step


def single(v=0.0):
    return [np.array([v], dtype=np.float64)]


class TestRMSprop:
    def test_zero_gradient_leaves_params(self):
        p = [np.array([1.0, -2.0])]
        rmsprop_step(OptimizerState(), [np.zeros(2)], p)
        assert p[0].tolist() == [1.0, -2.0]

    def test_first_step(self):
        p = single()
        state = OptimizerState()
        rmsprop_step(state, [np.array([1.0])], p)
        assert state.buffers[0][0] == pytest.approx(0.1, abs=1e-15)
        assert -p[0][0] == pytest.approx(3.1623e-3, abs=1e-7)
        assert -p[0][0] == pytest.approx(1e-3 / (math.sqrt(0.1) + 1e-8), abs=1e-9)

    def test_hand_trajectory(self):
        grads = [1.0, 1.0, -0.5, 2.0]
        acc, w = 0.0, 0.3
        hand = []
        for g in grads:
            acc = 0.9 * acc + 0.1 * g * g
            w = w - 1e-3 * g / (math.sqrt(acc) + 1e-8)
            hand.append(w)
        p, state = single(0.3), OptimizerState()
        for g, expect in zip(grads, hand):
            rmsprop_step(state, [np.array([g])], p)
            assert abs(p[0][0] - expect) <= 1e-9

    def test_repeated_gradient_shrinks_step(self):
        p, state = single(), OptimizerState()
        rmsprop_step(state, [np.array([1.0])], p)
        first = -p[0][0]
        rmsprop_step(state, [np.array([1.0])], p)
        assert -p[0][0] - first < first

    def test_learning_rate_constant(self):
        s = OptimizerState(RMSPROP)
        assert s.lr(0) == s.lr(30) == 1e-3


class TestSGDMomentum:
    @pytest.mark.parametrize("epoch, lr", [(0, 1e-3), (1, 9.2e-4), (2, 8.464e-4), (3, 7.78688e-4)])
    def test_decay(self, epoch, lr):
        assert OptimizerState(SGD_MOMENTUM).lr(epoch) == pytest.approx(lr, abs=1e-15)

    def test_pure_decayed_descent(self):
        p, state = single(), OptimizerState(SGD_MOMENTUM, momentum=0.0)
        sgd_momentum_step(state, [np.array([1.0])], p)
        assert abs(p[0][0] + 1e-3) <= 1e-9
        state.epoch = 1
        sgd_momentum_step(state, [np.array([1.0])], p)
        assert abs(p[0][0] + 1.92e-3) <= 1e-9

    def test_hand_trajectory_with_momentum(self):
        # (epoch, gradient) per step
        plan = [(0, 1.0), (0, 0.5), (1, -1.0), (2, 2.0), (5, 0.25)]
        v, w, hand = 0.0, 1.0, []
        for e, g in plan:
            v = 0.9 * v - 1e-3 * 0.92 ** e * g
            w += v
            hand.append(w)
        p, state = single(1.0), OptimizerState(SGD_MOMENTUM)
        for (e, g), expect in zip(plan, hand):
            state.epoch = e
            sgd_momentum_step(state, [np.array([g])], p)
            assert abs(p[0][0] - expect) <= 1e-9

    def test_two_step_momentum_values(self):
        p, state = single(), OptimizerState(SGD_MOMENTUM)
        sgd_momentum_step(state, [np.array([1.0])], p)
        state.epoch = 1
        sgd_momentum_step(state, [np.array([1.0])], p)
        # v2 = 0.9 * -1e-3 - 9.2e-4
        assert state.buffers[0][0] == pytest.approx(-1.82e-3, abs=1e-15)
        assert p[0][0] == pytest.approx(-2.82e-3, abs=1e-15)


class TestDispatchAndErrors:
    def test_step_dispatch(self):
        a, b = single(), single()
        step(OptimizerState(RMSPROP), [np.array([1.0])], a)
        step(OptimizerState(SGD_MOMENTUM), [np.array([1.0])], b)
        assert a[0][0] != b[0][0]

    def test_unknown_stage(self):
        with pytest.raises(ValueError):
            OptimizerState("adam")

    def test_buffer_shape_mismatch(self):
        state = OptimizerState()
        rmsprop_step(state, [np.ones(2)], [np.zeros(2)])
        with pytest.raises(ShapeMismatch):
            rmsprop_step(state, [np.ones(3)], [np.zeros(3)])

    def test_non_finite_parameter(self):
        with pytest.raises(NumericalFault):
            sgd_momentum_step(OptimizerState(SGD_MOMENTUM), [np.array([np.inf])], single())
