"""Cell equations, BPTT gradients vs finite differences, training, and model io."""

import json
import math

import numpy as np
import pytest

from armsense.dataset import SequenceWindow, split_holdout
from armsense.frames import HandSide, MotionType
from armsense.lstm import (
    AdamState,
    LstmConfig,
    LstmModel,
    ModelFormatError,
    TrainingDivergedError,
    TrainingError,
    adam_update,
    cell_forward,
    evaluate,
    evaluate_arrays,
    forward,
    forward_batch,
    init_params,
    load_model,
    loss_and_grads,
    param_shapes,
    predict,
    save_model,
    train,
    zero_params,
)

TINY = LstmConfig(
    features=3, window=5, layers=2, hidden=4, classes=3,
    epochs=1, batch_size=2, clip_norm=None, seed=123,
)


def _tiny_setup(seed=99):
    rng = np.random.Generator(np.random.PCG64(seed))
    params = init_params(TINY, rng)
    x = rng.normal(0, 1, size=(2, 5, 3))
    y = np.array([0, 2])
    return params, x, y


def test_cell_forward_zero_parameters():
    h = np.zeros(4)
    c = np.zeros(4)
    w = np.zeros((16, 3))
    u = np.zeros((16, 4))
    b = np.zeros(16)
    h2, c2 = cell_forward(np.array([5.0, -3.0, 2.0]), h, c, w, u, b)
    # gates sigmoid(0)=0.5, candidate tanh(0)=0 -> state stays zero
    np.testing.assert_array_equal(c2, np.zeros(4))
    np.testing.assert_array_equal(h2, np.zeros(4))


def test_cell_forward_forget_saturation_preserves_state():
    h = np.zeros(4)
    c = np.array([0.3, -0.7, 1.2, 0.05])
    w = np.zeros((16, 3))
    u = np.zeros((16, 4))
    b = np.zeros(16)
    b[4:8] = 50.0   # forget gate pinned open
    b[0:4] = -50.0  # input gate pinned shut
    _, c2 = cell_forward(np.zeros(3), h, c, w, u, b)
    np.testing.assert_allclose(c2, c, atol=1e-12)


def test_hidden_state_strictly_bounded():
    rng = np.random.Generator(np.random.PCG64(8))
    params = init_params(TINY, rng)
    x = rng.normal(0, 3, size=(4, 5, 3))
    cache = forward_batch(x, params, TINY)
    for layer_cache in cache.layers:
        assert np.all(np.abs(layer_cache.h) < 1.0)


def test_zero_params_give_uniform_probabilities():
    config = LstmConfig(features=11, window=150, layers=2, hidden=64, classes=9,
                        epochs=1, batch_size=1)
    params = zero_params(config)
    rng = np.random.Generator(np.random.PCG64(0))
    probs = forward(rng.normal(0, 1, (150, 11)), params, config)
    np.testing.assert_allclose(probs, np.full(9, 1.0 / 9.0), atol=1e-15)
    assert abs(probs.sum() - 1.0) <= 1e-9


def test_probabilities_normalized_for_random_params():
    params, x, _ = _tiny_setup()
    cache = forward_batch(x, params, TINY)
    probs = np.exp(cache.log_probs)
    assert np.all(probs > 0) and np.all(probs < 1)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_permuting_output_head_permutes_probabilities():
    params, x, _ = _tiny_setup()
    base = np.exp(forward_batch(x, params, TINY).log_probs)
    perm = np.array([2, 0, 1])
    permuted = {k: v.copy() for k, v in params.items()}
    permuted["out.W"] = params["out.W"][perm]
    permuted["out.b"] = params["out.b"][perm]
    shuffled = np.exp(forward_batch(x, permuted, TINY).log_probs)
    np.testing.assert_allclose(shuffled, base[:, perm], atol=1e-12)


def test_zero_parameter_loss_is_log_class_count():
    config = LstmConfig(features=4, window=6, layers=2, hidden=5, classes=9,
                        epochs=1, batch_size=4)
    params = zero_params(config)
    rng = np.random.Generator(np.random.PCG64(1))
    x = rng.normal(0, 1, (4, 6, 4))
    y = np.array([0, 3, 5, 8])
    loss, _ = loss_and_grads(x, y, params, config)
    assert abs(loss - math.log(9)) <= 1e-12


def test_gradients_match_central_finite_differences():
    params, x, y = _tiny_setup()
    _, grads = loss_and_grads(x, y, params, TINY)

    def loss_at():
        cache = forward_batch(x, params, TINY)
        return -float(cache.log_probs[np.arange(2), y].mean())

    eps = 1e-5
    worst = 0.0
    for name in param_shapes(TINY):
        tensor, grad = params[name], grads[name]
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            keep = tensor[idx]
            tensor[idx] = keep + eps
            up = loss_at()
            tensor[idx] = keep - eps
            down = loss_at()
            tensor[idx] = keep
            numeric = (up - down) / (2 * eps)
            rel = abs(numeric - grad[idx]) / max(abs(numeric), abs(grad[idx]), 1e-8)
            worst = max(worst, rel)
            it.iternext()
    assert worst < 1e-4


def test_duplicating_batch_leaves_loss_and_grads_unchanged():
    params, x, y = _tiny_setup()
    loss1, grads1 = loss_and_grads(x, y, params, TINY)
    loss2, grads2 = loss_and_grads(
        np.concatenate([x, x]), np.concatenate([y, y]), params, TINY
    )
    assert loss2 == pytest.approx(loss1, abs=1e-12)
    for name in grads1:
        np.testing.assert_allclose(grads2[name], grads1[name], atol=1e-12)


def test_one_hot_labels_are_accepted():
    params, x, y = _tiny_setup()
    loss_idx, grads_idx = loss_and_grads(x, y, params, TINY)
    onehot = np.zeros((2, 3))
    onehot[np.arange(2), y] = 1.0
    loss_hot, grads_hot = loss_and_grads(x, onehot, params, TINY)
    assert loss_hot == loss_idx
    for name in grads_idx:
        np.testing.assert_array_equal(grads_hot[name], grads_idx[name])


def test_gradient_clipping_scales_global_norm():
    config = LstmConfig(features=3, window=5, layers=1, hidden=4, classes=3,
                        epochs=1, batch_size=2, clip_norm=1e-6, seed=5)
    rng = np.random.Generator(np.random.PCG64(5))
    params = init_params(config, rng)
    x = rng.normal(0, 1, (2, 5, 3))
    _, grads = loss_and_grads(x, np.array([0, 1]), params, config)
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    assert norm == pytest.approx(1e-6, rel=1e-6)


def _toy_split(per_class=12, t=10, noise=0.1, seed=0):
    """Two linearly separable sequence classes on two features."""
    rng = np.random.Generator(np.random.PCG64(seed))
    windows = []
    for label, center in ((MotionType.OVERHEAD_PRESS, 1.0), (MotionType.BICEP_CURLS, -1.0)):
        for j in range(per_class):
            values = rng.normal(center, noise, size=(t, 2))
            windows.append(
                SequenceWindow(
                    values=values, label=label, side=HandSide.LEFT,
                    respondent=f"S{j:02d}", session_id=f"{label.label}-{j}", offset=0,
                )
            )
    return split_holdout(windows, 0.8, seed=seed, feature_names=("accelerometer_x", "accelerometer_y"))


def test_toy_two_class_reaches_full_train_accuracy():
    split = _toy_split()
    config = LstmConfig(features=2, window=10, layers=2, hidden=8, classes=2,
                        epochs=50, batch_size=4, seed=3)
    model, history = train(split, config)
    assert any(e.train_acc == 1.0 for e in history.epochs)
    assert history.final.train_acc == 1.0
    assert len(history.epochs) == config.epochs


def test_training_is_bit_deterministic():
    split = _toy_split()
    config = LstmConfig(features=2, window=10, layers=2, hidden=8, classes=2,
                        epochs=6, batch_size=4, seed=11)
    model_a, history_a = train(split, config)
    model_b, history_b = train(split, config)
    assert history_a.to_csv() == history_b.to_csv()
    for name in model_a.params:
        np.testing.assert_array_equal(model_a.params[name], model_b.params[name])


def test_divergence_raises_with_partial_history():
    split = _toy_split()
    config = LstmConfig(features=2, window=10, layers=2, hidden=8, classes=2,
                        epochs=10, batch_size=4, learning_rate=1e200, clip_norm=None, seed=1)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergedError) as err:
            train(split, config)
    assert isinstance(err.value.history.epochs, list)


def test_history_csv_shape():
    split = _toy_split()
    config = LstmConfig(features=2, window=10, layers=1, hidden=4, classes=2,
                        epochs=3, batch_size=4, seed=2)
    _, history = train(split, config)
    lines = history.to_csv().strip().split("\n")
    assert lines[0] == "epoch,train_loss,train_acc,test_loss,test_acc"
    assert len(lines) == 1 + 3


def test_evaluate_uniform_model_on_balanced_set():
    config = LstmConfig(features=2, window=4, layers=1, hidden=3, classes=9,
                        epochs=1, batch_size=2)
    params = zero_params(config)
    rng = np.random.Generator(np.random.PCG64(4))
    x = rng.normal(0, 1, (45, 4, 2))
    y = np.repeat(np.arange(9), 5)
    result = evaluate_arrays(params, config, x, y)
    # uniform probabilities tie-break to class 0 on every window
    assert result.accuracy == pytest.approx(1.0 / 9.0)
    assert result.confusion[:, 0].sum() == 45
    np.testing.assert_array_equal(result.confusion.sum(axis=1), np.full(9, 5))
    assert result.support == tuple([5] * 9)


def test_predict_uniform_model_tiebreak():
    config = LstmConfig(features=2, window=4, layers=1, hidden=3, classes=9,
                        epochs=1, batch_size=2)
    model = LstmModel(
        config=config,
        params=zero_params(config),
        feature_names=("accelerometer_x", "accelerometer_y"),
        feature_mean=np.zeros(2),
        feature_std=np.ones(2),
    )
    motion, prob = predict(model, np.ones((4, 2)))
    assert motion is MotionType.OVERHEAD_PRESS
    assert prob == pytest.approx(1.0 / 9.0)
    with pytest.raises(Exception):
        predict(model, np.ones((5, 2)))


def test_prediction_invariant_under_logit_shift():
    params, x, _ = _tiny_setup()
    base = np.exp(forward_batch(x, params, TINY).log_probs)
    shifted = {k: v.copy() for k, v in params.items()}
    shifted["out.b"] = params["out.b"] + 123.456
    moved = np.exp(forward_batch(x, shifted, TINY).log_probs)
    np.testing.assert_allclose(moved, base, atol=1e-9)


def test_adam_step_moves_parameters():
    params, x, y = _tiny_setup()
    before = {k: v.copy() for k, v in params.items()}
    state = AdamState.for_params(params)
    _, grads = loss_and_grads(x, y, params, TINY)
    adam_update(params, grads, state, TINY)
    assert any(not np.array_equal(params[k], before[k]) for k in params)
    assert state.step == 1


def _trained_toy_model():
    split = _toy_split(per_class=6, t=8)
    config = LstmConfig(features=2, window=8, layers=2, hidden=6, classes=2,
                        epochs=3, batch_size=4, seed=21)
    model, _ = train(split, config)
    return model


def test_save_load_roundtrip_predicts_identically(tmp_path):
    model = _trained_toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    rng = np.random.Generator(np.random.PCG64(31))
    for _ in range(100):
        window = rng.normal(0, 2, (8, 2))
        a = forward(model.normalize(window), model.params, model.config)
        b = forward(loaded.normalize(window), loaded.params, loaded.config)
        np.testing.assert_array_equal(a, b)
    for name in model.params:
        np.testing.assert_array_equal(model.params[name], loaded.params[name])


def test_load_rejects_corrupted_tensor(tmp_path):
    model = _trained_toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["params"]["layer1.U"][0] = doc["params"]["layer1.U"][0][:-1]
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="layer1.U"):
        load_model(path)


def test_load_rejects_schema_version_bump(tmp_path):
    model = _trained_toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["schema_version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="schema_version"):
        load_model(path)


def test_load_rejects_truncated_file(tmp_path):
    model = _trained_toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    path.write_text(path.read_text()[: 200])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_train_requires_matching_shapes():
    split = _toy_split()
    config = LstmConfig(features=5, window=10, layers=1, hidden=4, classes=2,
                        epochs=1, batch_size=4)
    with pytest.raises(TrainingError):
        train(split, config)
