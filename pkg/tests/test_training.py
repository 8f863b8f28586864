from __future__ import annotations

import math

import numpy as np
import pytest

from cpalab.datasets import GameSpec, build_dataset, split_dataset
from cpalab.estimator import MlpDistinguisher, evaluate, resolve_hidden_layers
from cpalab.network import forward, init_params
from cpalab.training import (
    DESK_SCHEDULE,
    EarlyStopping,
    EpochRecord,
    ReduceLrOnPlateau,
    TrainingHistory,
    TrainingSchedule,
    evaluate_loss_acc,
    train_network,
)


def rng_for(n: int) -> np.random.Generator:
    return np.random.default_rng(n)


# --- schedule defaults -------------------------------------------------------


def test_schedule_defaults_match_regimen():
    s = TrainingSchedule()
    assert s.max_epochs == 1000
    assert s.batch_size == 1024
    assert s.learning_rate == 1e-4
    assert s.momentum == 0.9 and s.nesterov
    assert s.lr_factor == 0.5 and s.lr_patience == 20
    assert s.lr_min_delta == 1e-5 and s.lr_min == 1e-7
    assert s.es_patience == 100 and s.es_min_delta == 1e-6


def test_desk_schedule_scales_budget_only():
    assert DESK_SCHEDULE.max_epochs == 150
    assert DESK_SCHEDULE.es_patience == 30 and DESK_SCHEDULE.lr_patience == 10
    assert DESK_SCHEDULE.learning_rate == 1e-4 and DESK_SCHEDULE.batch_size == 1024


# --- plateau reduction -------------------------------------------------------


def test_lr_halves_after_exactly_20_frozen_epochs():
    cb = ReduceLrOnPlateau(1e-4)
    assert cb.update(0.6931) == 1e-4  # establishes the baseline
    for _ in range(19):
        assert cb.update(0.6931) == 1e-4
    assert cb.update(0.6931) == 5e-5  # 20th non-improving epoch


def test_lr_counter_resets_on_improvement():
    cb = ReduceLrOnPlateau(1e-4)
    cb.update(0.6931)
    for _ in range(10):
        cb.update(0.6931)
    assert cb.update(0.6931 - 2e-5) == 1e-4  # > min_delta improvement resets
    for _ in range(19):
        assert cb.update(0.69308) == 1e-4
    assert cb.update(0.69308) == 5e-5


def test_sub_threshold_improvement_does_not_reset():
    cb = ReduceLrOnPlateau(1e-4, min_delta=1e-5)
    cb.update(0.5)
    for _ in range(19):
        cb.update(0.5 - 0.9e-5)  # improves, but below min_delta
    assert cb.update(0.5 - 0.9e-5) == 5e-5


def test_lr_floors_at_min_and_counter_resets_after_reduction():
    cb = ReduceLrOnPlateau(1e-4, patience=2, min_lr=1e-7)
    cb.update(1.0)
    rates = [cb.update(1.0) for _ in range(40)]
    assert rates[-1] == 1e-7
    assert min(rates) == 1e-7
    halvings = [r for i, r in enumerate(rates) if i and rates[i - 1] != r]
    assert halvings[0] == 5e-5  # first reduction after exactly `patience` epochs


# --- early stopping ----------------------------------------------------------


def test_early_stop_after_exactly_100_frozen_epochs():
    cb = EarlyStopping()
    assert cb.update(0.6931) is False
    for _ in range(99):
        assert cb.update(0.6931) is False
    assert cb.update(0.6931) is True


def test_early_stop_counter_resets_on_improvement():
    cb = EarlyStopping(patience=100, min_delta=1e-6)
    cb.update(0.5)
    for _ in range(99):
        cb.update(0.5)
    assert cb.update(0.5 - 1e-5) is False  # improvement at the brink resets
    for _ in range(99):
        assert cb.update(0.5 - 1e-5) is False
    assert cb.update(0.5 - 1e-5) is True


def test_early_stop_never_fires_before_patience():
    rng = rng_for(0)
    cb = EarlyStopping(patience=25)
    for i in range(24):
        assert cb.update(float(rng.random())) is False


# --- training loop -----------------------------------------------------------


def separable_data(n: int = 256, seed: int = 0):
    """One informative feature, classes at 0 and 200 (pre-scaling bytes)."""
    rng = rng_for(seed)
    y = np.tile(np.array([0, 1], dtype=np.uint8), n // 2)
    x = np.zeros((n, 4), dtype=np.uint8)
    x[:, 0] = np.where(y == 1, 200, 0)
    x[:, 1:] = rng.integers(0, 256, size=(n, 3))
    return x, y


def quick_est(**kw) -> MlpDistinguisher:
    base = dict(hidden_layers=(16,), max_epochs=8, batch_size=64, random_state=7)
    base.update(kw)
    return MlpDistinguisher(**base)


def test_budget_ends_loop_without_trigger():
    x, y = separable_data()
    est = quick_est(max_epochs=5).fit(x, y)
    assert len(est.history_.records) == 5


def test_two_fits_same_seed_bitwise_identical():
    x, y = separable_data()
    a = quick_est().fit(x, y, validation_data=(x, y))
    b = quick_est().fit(x, y, validation_data=(x, y))
    assert a.history_ == b.history_
    for wa, wb in zip(a.coefs_, b.coefs_):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(a.intercepts_, b.intercepts_):
        assert np.array_equal(ba, bb)


def test_history_lr_non_increasing_and_floored():
    x, y = separable_data()
    est = quick_est(max_epochs=30, lr_patience=2, lr_min=1e-6).fit(x, y)
    lrs = est.history_.column("lr")
    assert (np.diff(lrs) <= 0).all()
    assert (lrs >= 1e-6).all()


def test_best_epoch_attains_minimum_and_weights_reproduce_it():
    x, y = separable_data(seed=3)
    est = quick_est(max_epochs=12).fit(x, y, validation_data=(x, y))
    h = est.history_
    losses = h.column("val_loss")
    assert h.best_epoch == int(np.argmin(losses)) + 1
    params = list(zip(est.coefs_, est.intercepts_))
    val_loss, val_acc = evaluate_loss_acc(params, est._scale(x), y.astype(np.float32))
    rec = h.records[h.best_epoch - 1]
    assert val_loss == rec.val_loss and val_acc == rec.val_acc


def test_early_stopping_fires_in_loop():
    # constant features make every epoch identical: stop at es_patience + 1
    x = np.full((64, 3), 7, dtype=np.uint8)
    y = np.tile(np.array([0, 1], dtype=np.uint8), 32)
    est = quick_est(max_epochs=100, es_patience=4, learning_rate=0.0).fit(x, y)
    assert len(est.history_.records) == 5


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # the blow-up is the point
def test_nan_loss_aborts_with_diagnostic():
    x, y = separable_data()
    with pytest.raises(RuntimeError, match="non-finite"):
        quick_est(learning_rate=1e30, max_epochs=10).fit(x, y)


def test_shape_and_label_validation():
    x, y = separable_data()
    with pytest.raises(ValueError, match="labels"):
        quick_est().fit(x, np.full_like(y, 2))
    est = quick_est().fit(x, y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 9)))
    with pytest.raises(ValueError, match="width"):
        quick_est().fit(x, y, validation_data=(np.zeros((4, 9)), np.zeros(4, dtype=int)))


def test_validation_defaults_to_training_set():
    # with lr = 0 nothing moves, so the pre-update train metrics equal the
    # post-epoch validation metrics computed over the same (training) data
    x, y = separable_data()
    est = quick_est(max_epochs=3, learning_rate=0.0, batch_size=512).fit(x, y)
    rec = est.history_.records[0]
    assert math.isclose(rec.train_loss, rec.val_loss, rel_tol=1e-12)
    assert rec.train_acc == rec.val_acc


def test_train_network_rejects_empty_sets():
    params = init_params([3, 2, 1], rng_for(1))
    empty = np.empty((0, 3), np.float32)
    with pytest.raises(ValueError, match="non-empty"):
        train_network(params, empty, np.empty(0, np.float32), empty,
                      np.empty(0, np.float32), TrainingSchedule(), rng_for(2))


# --- estimator surface -------------------------------------------------------


def test_presets_resolve():
    assert resolve_hidden_layers("small") == (100, 100)
    assert resolve_hidden_layers("big") == (600, 600, 600, 600)
    assert resolve_hidden_layers([64, 32]) == (64, 32)
    with pytest.raises(ValueError, match="preset"):
        resolve_hidden_layers("huge")
    with pytest.raises(ValueError, match="positive"):
        resolve_hidden_layers([0, 3])


def test_sklearn_params_roundtrip():
    est = MlpDistinguisher(hidden_layers="small", learning_rate=2e-4, random_state=5)
    params = est.get_params()
    clone = MlpDistinguisher(**params)
    assert clone.get_params() == params


def test_from_schedule_carries_seed():
    sched = TrainingSchedule(seed=11, max_epochs=7)
    est = MlpDistinguisher.from_schedule(sched, hidden_layers=(8,))
    assert est.random_state == 11 and est.max_epochs == 7 and est.hidden_layers == (8,)


def test_predict_proba_and_predict_agree():
    x, y = separable_data()
    est = quick_est(max_epochs=20, learning_rate=1e-2).fit(x, y, validation_data=(x, y))
    proba = est.predict_proba(x)
    assert proba.shape == (len(x), 2)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-6)
    assert np.array_equal(est.predict(x), (proba[:, 1] >= 0.5).astype(int))
    assert est.score(x, y) > 0.9


def test_estimator_checkpoint_roundtrip(tmp_path):
    x, y = separable_data()
    est = quick_est(max_epochs=10).fit(x, y)
    path = tmp_path / "est.mlp"
    est.save(path)
    back = MlpDistinguisher.load(path)
    assert back.hidden_layers == (16,)
    assert np.array_equal(back.predict(x), est.predict(x))
    assert np.allclose(back.predict_proba(x), est.predict_proba(x))


# --- evaluation --------------------------------------------------------------


def test_evaluate_tie_rule_on_constant_half_model():
    params = [(np.zeros((2, 1), np.float32), np.zeros(1, np.float32))]
    est = MlpDistinguisher(hidden_layers=())  # placeholder; inject raw params
    est.coefs_ = [params[0][0]]
    est.intercepts_ = [params[0][1]]
    est.n_features_in_ = 2
    est.classes_ = np.array([0, 1])
    x = np.zeros((10, 2), dtype=np.uint8)
    y = np.tile(np.array([0, 1]), 5)
    result = evaluate(est, x, y)
    # constant 0.5 predicts class 1 everywhere; balanced labels give exactly 1/2
    assert (result.predictions == 1).all()
    assert result.accuracy == 0.5 and result.k == 5 and result.n == 10


def test_evaluate_perfect_oracle_and_counts():
    x, y = separable_data()
    est = quick_est(max_epochs=40, learning_rate=1e-2).fit(x, y, validation_data=(x, y))
    result = evaluate(est, x, y)
    assert result.k == result.n == len(x)
    assert result.accuracy == 1.0
    with pytest.raises(ValueError, match="non-empty"):
        evaluate(est, np.zeros((0, 4)), np.zeros(0))


def test_evaluate_loss_acc_chunking_invariant():
    params = init_params([5, 4, 1], rng_for(3))
    x = rng_for(4).random((37, 5), dtype=np.float32)
    y = (rng_for(5).random(37) < 0.5).astype(np.float32)
    whole = evaluate_loss_acc(params, x, y, chunk=1000)
    parts = evaluate_loss_acc(params, x, y, chunk=5)
    assert math.isclose(whole[0], parts[0], rel_tol=1e-12)
    assert whole[1] == parts[1]


# --- history serialization ----------------------------------------------------


def test_history_csv_roundtrip(tmp_path):
    h = TrainingHistory(
        records=[
            EpochRecord(1, 0.7, 0.5, 0.69, 0.51, 1e-4),
            EpochRecord(2, 0.6512345678901234, 0.625, 0.64, 0.60, 1e-4),
            EpochRecord(3, 0.60, 0.70, 0.66, 0.58, 5e-5),
        ],
        best_epoch=2,
    )
    path = tmp_path / "h.csv"
    h.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr"
    back = TrainingHistory.from_csv(path)
    assert back.records == h.records
    assert back.best_epoch == 2
