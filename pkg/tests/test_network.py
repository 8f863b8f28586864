from __future__ import annotations

import math

import numpy as np
import pytest

from cpalab.network import (
    PROB_EPS,
    backward,
    bce_loss,
    clone_params,
    forward,
    glorot_uniform,
    init_params,
    layer_dims,
    load_checkpoint,
    save_checkpoint,
    sgd_momentum_step,
    zero_velocity,
)


def rng_for(n: int) -> np.random.Generator:
    return np.random.default_rng(n)


def random_params_f64(dims, rng):
    """Float64 model in general position: random biases keep every ReLU
    pre-activation away from the kink that breaks finite differences."""
    return [
        (w.astype(np.float64), 0.1 * rng.standard_normal(b.shape))
        for w, b in init_params(dims, rng)
    ]


# --- initialization ---------------------------------------------------------


def test_glorot_limit_is_one_for_fan_3_3():
    w = glorot_uniform(3, 3, rng_for(0))
    assert w.shape == (3, 3)
    assert math.isclose(math.sqrt(6.0 / 6.0), 1.0)
    assert (np.abs(w) < 1.0).all()


def test_glorot_entries_strictly_inside_bounds():
    limit = math.sqrt(6.0 / (50 + 20))
    w = glorot_uniform(50, 20, rng_for(1))
    assert (np.abs(w) < limit).all()
    assert w.dtype == np.float32


def test_glorot_variance_matches_uniform_moment():
    # Var[U(-L, L)] = L^2 / 3, checked over 1e6 draws
    fan_in, fan_out = 1000, 1000
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    w = glorot_uniform(fan_in, fan_out, rng_for(2))
    target = limit**2 / 3.0
    assert abs(w.var() - target) / target < 0.02


def test_glorot_rejects_bad_fans():
    with pytest.raises(ValueError):
        glorot_uniform(0, 3, rng_for(0))


def test_init_params_shapes_and_zero_biases():
    params = init_params([8, 5, 3, 1], rng_for(3))
    assert layer_dims(params) == [8, 5, 3, 1]
    for w, b in params:
        assert b.dtype == np.float32 and (b == 0).all()
        assert w.shape[1] == b.shape[0]
    with pytest.raises(ValueError, match="output width"):
        init_params([8, 5, 2], rng_for(0))


# --- forward ----------------------------------------------------------------


def test_forward_zero_params_gives_half():
    params = [(np.zeros((4, 3), np.float32), np.zeros(3, np.float32)),
              (np.zeros((3, 1), np.float32), np.zeros(1, np.float32))]
    p = forward(params, rng_for(0).random((7, 4), dtype=np.float32))
    assert p.shape == (7,)
    assert (p == 0.5).all()


def test_forward_saturation_is_clamped():
    params = [(np.zeros((2, 1), np.float32), np.array([50.0], np.float32))]
    p = forward(params, np.zeros((3, 2), np.float32))
    assert (p == np.float32(1.0 - PROB_EPS)).all()
    params_neg = [(np.zeros((2, 1), np.float32), np.array([-50.0], np.float32))]
    assert (forward(params_neg, np.zeros((3, 2), np.float32)) == np.float32(PROB_EPS)).all()


def test_forward_permutation_equivariance():
    params = init_params([6, 4, 1], rng_for(5))
    x = rng_for(6).random((10, 6), dtype=np.float32)
    perm = rng_for(7).permutation(10)
    assert np.array_equal(forward(params, x)[perm], forward(params, x[perm]))


def test_forward_shape_mismatch():
    params = init_params([6, 4, 1], rng_for(5))
    with pytest.raises(ValueError, match="input width"):
        forward(params, np.zeros((3, 7), np.float32))


# --- loss ------------------------------------------------------------------


def test_bce_closed_forms():
    assert math.isclose(bce_loss(np.array([1.0]), np.array([0.5])), math.log(2.0), rel_tol=1e-12)
    loss = bce_loss(np.array([1.0, 0.0]), np.array([0.9, 0.1]))
    assert math.isclose(loss, -math.log(0.9), rel_tol=1e-12)


def test_bce_clamp_floor():
    y = np.array([1.0, 0.0], dtype=np.float32)
    p = np.clip(np.array([1.0, 0.0], np.float32), PROB_EPS, 1.0 - PROB_EPS)
    loss = bce_loss(y, p)
    assert 0.0 < loss <= -math.log(1.0 - float(np.float32(1.0 - PROB_EPS))) + 1e-12
    assert loss < 2e-7


def test_bce_length_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        bce_loss(np.zeros(3), np.zeros(4))


# --- backward ---------------------------------------------------------------


def central_difference_grads(params, x, y, step=1e-5):
    grads = []
    for layer, (w, b) in enumerate(params):
        dw = np.zeros_like(w)
        db = np.zeros_like(b)
        for arr, darr in ((w, dw), (b, db)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = arr[idx]
                arr[idx] = keep + step
                up = bce_loss(y, forward(params, x))
                arr[idx] = keep - step
                down = bce_loss(y, forward(params, x))
                arr[idx] = keep
                darr[idx] = (up - down) / (2.0 * step)
        grads.append((dw, db))
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-4)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def test_gradients_match_central_differences_20_models():
    rng = rng_for(8)
    worst = 0.0
    for trial in range(20):
        depth = int(rng.integers(1, 4))
        dims = [int(rng.integers(2, 9))] + [int(rng.integers(2, 7)) for _ in range(depth)] + [1]
        params = random_params_f64(dims, rng)
        x = rng.standard_normal((4, dims[0]))
        y = rng.integers(0, 2, size=4).astype(np.float64)
        analytic = backward(params, x, y)
        numeric = central_difference_grads(params, x, y)
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < 1e-4


def test_zero_input_batch_zeroes_first_layer_weight_grads():
    params = random_params_f64([5, 4, 1], rng_for(9))
    x = np.zeros((6, 5))
    y = np.array([0, 1, 0, 1, 0, 1], dtype=np.float64)
    grads = backward(params, x, y)
    assert (grads[0][0] == 0).all()  # dW1 = x^T @ delta = 0
    assert not (grads[0][1] == 0).all()  # biases still learn


def test_duplicating_samples_preserves_mean_gradient():
    rng = rng_for(10)
    params = random_params_f64([6, 5, 1], rng)
    x = rng.standard_normal((8, 6))
    y = rng.integers(0, 2, size=8).astype(np.float64)
    single = backward(params, x, y)
    doubled = backward(params, np.vstack([x, x]), np.concatenate([y, y]))
    for (gw, gb), (hw, hb) in zip(single, doubled):
        assert np.allclose(gw, hw, rtol=1e-10, atol=1e-12)
        assert np.allclose(gb, hb, rtol=1e-10, atol=1e-12)


# --- optimizer --------------------------------------------------------------


def test_momentum_step_closed_form():
    params = [(np.array([[1.0]], np.float32), np.zeros(1, np.float32))]
    grads = [(np.array([[0.5]], np.float32), np.zeros(1, np.float32))]
    velocity = zero_velocity(params)
    sgd_momentum_step(params, grads, velocity, lr=0.1, momentum=0.9, nesterov=True)
    assert math.isclose(float(velocity[0][0][0, 0]), -0.05, rel_tol=1e-6)
    assert math.isclose(float(params[0][0][0, 0]), 0.905, rel_tol=1e-6)


def test_zero_momentum_reduces_to_plain_sgd():
    params = [(np.array([[2.0]], np.float32), np.zeros(1, np.float32))]
    grads = [(np.array([[0.25]], np.float32), np.zeros(1, np.float32))]
    sgd_momentum_step(params, grads, zero_velocity(params), lr=0.1, momentum=0.0)
    assert math.isclose(float(params[0][0][0, 0]), 2.0 - 0.1 * 0.25, rel_tol=1e-6)


def test_zero_gradient_zero_velocity_is_fixed_point():
    params = [(np.array([[3.0]], np.float32), np.ones(1, np.float32))]
    grads = zero_velocity(params)
    sgd_momentum_step(params, grads, zero_velocity(params), lr=0.5)
    assert float(params[0][0][0, 0]) == 3.0 and float(params[0][1][0]) == 1.0


def test_classical_momentum_variant():
    params = [(np.array([[1.0]], np.float32), np.zeros(1, np.float32))]
    grads = [(np.array([[0.5]], np.float32), np.zeros(1, np.float32))]
    velocity = zero_velocity(params)
    sgd_momentum_step(params, grads, velocity, lr=0.1, momentum=0.9, nesterov=False)
    # v = -0.05; theta += v
    assert math.isclose(float(params[0][0][0, 0]), 0.95, rel_tol=1e-6)


def test_small_step_never_increases_loss_100_models():
    rng = rng_for(11)
    for _ in range(100):
        dims = [int(rng.integers(2, 7)), int(rng.integers(2, 6)), 1]
        params = random_params_f64(dims, rng)
        x = rng.standard_normal((8, dims[0]))
        y = rng.integers(0, 2, size=8).astype(np.float64)
        before = bce_loss(y, forward(params, x))
        grads = backward(params, x, y)
        sgd_momentum_step(params, grads, zero_velocity(params), lr=1e-6)
        after = bce_loss(y, forward(params, x))
        assert after <= before + 1e-12


def test_small_preset_overfits_random_labels():
    """2x100 memorizes 64 random samples at lr 1e-2 within 5000 full-batch epochs."""
    rng = rng_for(12)
    x = (rng.integers(0, 256, size=(64, 16)) / 255.0).astype(np.float32)
    y = rng.integers(0, 2, size=64).astype(np.float32)
    params = init_params([16, 100, 100, 1], rng)
    velocity = zero_velocity(params)
    for epoch in range(5000):
        p = forward(params, x)
        if (((p >= 0.5) == (y >= 0.5)).all()):
            break
        grads = backward(params, x, y)
        sgd_momentum_step(params, grads, velocity, lr=1e-2)
    p = forward(params, x)
    assert (((p >= 0.5) == (y >= 0.5)).all()), "failed to memorize within 5000 epochs"


# --- checkpoints ------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    params = init_params([7, 5, 1], rng_for(13))
    path = tmp_path / "model.mlp"
    save_checkpoint(path, params, feature_scale=255.0)
    loaded, scale = load_checkpoint(path)
    assert scale == 255.0
    for (w, b), (lw, lb) in zip(params, loaded):
        assert np.array_equal(w, lw) and np.array_equal(b, lb)
    header = path.read_bytes().split(b"\n", 1)[0].decode()
    assert "dims=7,5,1" in header and "relu" in header and "sigmoid" in header


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.mlp"
    path.write_bytes(b"not a checkpoint\n\x00\x00")
    with pytest.raises(ValueError, match="checkpoint"):
        load_checkpoint(path)
    params = init_params([3, 2, 1], rng_for(14))
    good = tmp_path / "good.mlp"
    save_checkpoint(good, params)
    raw = good.read_bytes()
    good.write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="payload"):
        load_checkpoint(good)


def test_clone_params_is_independent():
    params = init_params([3, 2, 1], rng_for(15))
    clone = clone_params(params)
    clone[0][0][0, 0] += 1.0
    assert params[0][0][0, 0] != clone[0][0][0, 0]
