import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ewaf.environments import ABSOLUTE, SQUARED, LossFunction
from ewaf.forecaster import (
    Forecaster,
    ForecasterError,
    LossRangeError,
    compute_weights,
)
from ewaf.schedules import LearningRateSchedule, ScheduleError

CONST = LearningRateSchedule.constant(0.5)


def naive_weights(losses, eta):
    w = [math.exp(-eta * L) for L in losses]
    total = sum(w)
    return [x / total for x in w]


def test_new_forecaster():
    f = Forecaster(3, LearningRateSchedule.paper_sqrt(3), ABSOLUTE)
    assert f.round == 0
    assert f.cumulative_expert_losses.tolist() == [0, 0, 0]
    assert f.cumulative_forecaster_loss == 0
    assert Forecaster(1, CONST).num_experts == 1
    with pytest.raises(ForecasterError):
        Forecaster(0, CONST)


def test_rejects_bad_schedules():
    with pytest.raises(ScheduleError):
        Forecaster(2, LearningRateSchedule.custom([0.4, 0.5]))
    with pytest.raises(ScheduleError):
        Forecaster(3, LearningRateSchedule.paper_sqrt(2))


def test_weight_examples():
    assert compute_weights(np.zeros(3), 1.7) == pytest.approx([1 / 3] * 3, abs=1e-15)
    assert compute_weights(np.array([0.0, 1.0]), math.log(2)) == pytest.approx([2 / 3, 1 / 3], abs=1e-15)
    assert compute_weights(np.array([5.0, 6.0]), math.log(2)) == pytest.approx([2 / 3, 1 / 3], abs=1e-15)


def test_weights_survive_huge_losses():
    w = compute_weights(np.array([1e6, 1e6 + 1.0]), math.log(2))
    assert w == pytest.approx([2 / 3, 1 / 3], abs=1e-12)


losses_st = st.lists(st.floats(0, 1000, allow_nan=False), min_size=1, max_size=16)


@given(losses_st, st.floats(1e-3, 5), st.floats(-500, 500))
def test_weights_normalized_and_shift_invariant(losses, eta, c):
    L = np.array(losses)
    w = compute_weights(L, eta)
    assert (w >= 0).all()
    assert abs(w.sum() - 1) <= 1e-12
    assert np.max(np.abs(compute_weights(L + c, eta) - w)) <= 1e-12


@given(st.lists(st.floats(0, 20), min_size=1, max_size=4), st.floats(0.01, 3))
def test_weights_positive_on_moderate_losses(losses, eta):
    assert (compute_weights(np.array(losses), eta) > 0).all()


def test_predict_examples():
    f = Forecaster(2, CONST)
    assert f.predict([0, 1]) == 0.5
    f.cumulative_expert_losses = np.array([0.0, 1.0])
    f1 = Forecaster(2, LearningRateSchedule.constant(math.log(2)))
    f1.cumulative_expert_losses = np.array([0.0, 1.0])
    assert f1.predict([0, 1]) == pytest.approx(1 / 3, abs=1e-15)
    assert Forecaster(1, CONST).predict([0.7]) == 0.7
    with pytest.raises(ForecasterError):
        f.predict([0.1, 0.2, 0.3])


def test_step_forced_arithmetic():
    f = Forecaster(2, CONST)
    rec = f.step([0, 1], 1)
    assert rec.prediction == 0.5
    assert rec.expert_losses.tolist() == [1, 0]
    assert rec.forecaster_loss == 0.5
    assert f.round == 1 and rec.round == 1 and rec.eta == 0.5
    assert f.regret() == 0.5


def test_perfect_single_expert():
    f = Forecaster(1, CONST, SQUARED)
    for a in (0.1, 0.9, 0.33):
        rec = f.step([a], a)
        assert rec.forecaster_loss == 0 and rec.expert_losses[0] == 0
    assert f.cumulative_forecaster_loss == 0


def test_step_rejects_broken_loss():
    bad = LossFunction("bad", lambda p, y: 1.5)
    with pytest.raises(LossRangeError):
        Forecaster(2, CONST, bad).step([0.2, 0.4], 1.0)


def test_custom_schedule_runs_out():
    f = Forecaster(2, LearningRateSchedule.custom([1.0, 0.5]))
    f.step([0, 1], 0)
    f.step([0, 1], 0)
    with pytest.raises(ScheduleError):
        f.step([0, 1], 0)


def test_regret_and_best_expert():
    f = Forecaster(3, CONST)
    assert f.regret() == 0
    f.cumulative_forecaster_loss = 5.0
    f.cumulative_expert_losses = np.array([4.0, 6.0, 7.0])
    assert f.regret() == 1.0
    f.cumulative_expert_losses = np.array([3.0, 1.0, 2.0])
    assert f.best_expert() == 1
    f.cumulative_expert_losses = np.array([2.0, 2.0, 5.0])
    assert f.best_expert() == 0
    assert Forecaster(1, CONST).best_expert() == 0


def test_replay_oracle_ten_rounds():
    rng = np.random.default_rng(2024)
    f = Forecaster(4, LearningRateSchedule.paper_sqrt(4), ABSOLUTE)
    log = [f.step(rng.random(4), float(rng.random())) for _ in range(10)]
    # Independent replay: recompute weights, prediction, and losses in plain Python.
    cum = [0.0] * 4
    cum_hat = 0.0
    for t, rec in enumerate(log, 1):
        eta = math.sqrt(4 * math.log(4) / t)
        w = naive_weights(cum, eta)
        p = sum(wi * ai for wi, ai in zip(w, rec.advice))
        assert p == pytest.approx(rec.prediction, abs=1e-12)
        cum = [c + abs(a - rec.outcome) for c, a in zip(cum, rec.advice)]
        cum_hat += abs(p - rec.outcome)
    assert f.cumulative_expert_losses.tolist() == pytest.approx(cum, abs=1e-12)
    assert f.cumulative_forecaster_loss == pytest.approx(cum_hat, abs=1e-12)


@given(
    st.integers(1, 6),
    st.lists(st.tuples(st.lists(st.floats(0, 1), min_size=6, max_size=6), st.floats(0, 1)),
             min_size=1, max_size=30),
    st.sampled_from([ABSOLUTE, SQUARED]),
)
def test_round_invariants(n_experts, rounds, loss):
    f = Forecaster(n_experts, LearningRateSchedule.constant(0.8), loss)
    for advice, y in rounds:
        a = advice[:n_experts]
        rec = f.step(a, y)
        assert min(a) <= rec.prediction <= max(a)
        assert abs(rec.weights.sum() - 1) <= 1e-12
        assert rec.prediction == pytest.approx(float(np.dot(rec.weights, rec.advice)), abs=1e-12)
        assert rec.forecaster_loss <= float(np.dot(rec.weights, rec.expert_losses)) + 1e-12
    t = f.round
    assert (f.cumulative_expert_losses <= t + 1e-12).all() and f.cumulative_forecaster_loss <= t + 1e-12


def test_record_is_immutable():
    rec = Forecaster(2, CONST).step([0.1, 0.2], 0.0)
    with pytest.raises(ValueError):
        rec.weights[0] = 1.0
