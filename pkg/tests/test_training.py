import math

import numpy as np
import pytest

from gesturelstm.errors import BadLabel, NanLoss, ShapeMismatch
from gesturelstm.features import GestureSequence
from gesturelstm.network import DlstmModel, forward_batch, load_checkpoint
from gesturelstm.training import (
    LabeledSequence,
    TrainConfig,
    backward,
    compare_gradients,
    finite_difference_grads,
    global_grad_norm,
    gradcheck,
    loss,
    sgd_step,
    stack_batch,
    train,
)


def feature_batch(rng, count=3, steps=6, classes=3):
    out = []
    for _ in range(count):
        data = rng.normal(size=(steps, 31))
        label = int(rng.integers(classes))
        out.append(LabeledSequence(sequence=GestureSequence(data=data, label=label), label=label))
    return out


def small_model(classes=3, seed=0):
    return DlstmModel.init_random(4, 2, classes, seed=seed)


def test_defaults():
    cfg = TrainConfig()
    assert cfg.learning_rate == 1e-4
    assert cfg.batch_size == 16
    assert cfg.clip_norm is None
    assert cfg.shuffle is True


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


# --- loss ------------------------------------------------------------------

def test_loss_is_summed_negative_log_prob(rng):
    model = small_model()
    batch = feature_batch(rng)
    x = np.stack([item.sequence.data for item in batch])
    probs = forward_batch(model, x).probs
    expected = -sum(math.log(probs[m, item.label]) for m, item in enumerate(batch))
    assert loss(model, batch) == pytest.approx(expected, rel=1e-12)


def test_loss_validation(rng):
    model = small_model(classes=3)
    with pytest.raises(ValueError):
        loss(model, [])
    bad = feature_batch(rng)
    bad[1] = LabeledSequence(sequence=bad[1].sequence, label=3)
    with pytest.raises(BadLabel):
        loss(model, bad)
    mixed = feature_batch(rng, steps=6) + feature_batch(rng, steps=7)
    with pytest.raises(ShapeMismatch):
        stack_batch(mixed, 3)


# --- gradients -------------------------------------------------------------

def test_analytic_matches_finite_difference(rng):
    model = small_model()
    batch = feature_batch(rng, count=2, steps=5)
    _, analytic = backward(model, batch)
    numeric = finite_difference_grads(model, batch, step=1e-5)
    report = compare_gradients(analytic, numeric, tolerance=1e-4)
    assert report.passed, (report.worst_tensor, report.worst_error)


def test_gradcheck_api():
    report = gradcheck(layers=1, hidden=3, classes=2, steps=4, seed=1, input_dim=5)
    assert report.passed
    assert set(report.per_tensor) == {
        name for name, _ in DlstmModel.init_random(3, 1, 2, seed=0, input_dim=5).named_parameters()
    }
    assert report.worst_error == max(report.per_tensor.values())
    assert report.worst_error < 1e-4


def test_gradcheck_detects_fault(rng):
    # corrupt one analytic gradient; the comparator must notice
    model = small_model()
    batch = feature_batch(rng, count=2, steps=4)
    _, analytic = backward(model, batch)
    numeric = finite_difference_grads(model, batch)
    analytic["layer1/w_hf"] = analytic["layer1/w_hf"] + 0.5
    report = compare_gradients(analytic, numeric, tolerance=1e-4)
    assert not report.passed
    assert report.worst_tensor == "layer1/w_hf"


def test_output_bias_gradient_carries_sequence_length(rng):
    # the head bias enters the score sum once per instant, so its exact
    # gradient is T times the summed probability error
    model = small_model()
    steps = 7
    batch = feature_batch(rng, count=4, steps=steps)
    x = np.stack([b.sequence.data for b in batch])
    labels = np.array([b.label for b in batch])
    probs = forward_batch(model, x).probs
    dy = probs.copy()
    dy[np.arange(len(batch)), labels] -= 1.0
    _, grads = backward(model, batch)
    assert np.allclose(grads["output/b_y"], steps * dy.sum(axis=0), atol=1e-12)
    # and the finite-difference oracle agrees with the factor
    numeric = finite_difference_grads(model, batch)
    assert np.allclose(numeric["output/b_y"], steps * dy.sum(axis=0), atol=1e-6)


def test_output_weight_gradient_closed_form(rng):
    model = small_model()
    batch = feature_batch(rng, count=3, steps=5)
    x = np.stack([b.sequence.data for b in batch])
    labels = np.array([b.label for b in batch])
    trace = forward_batch(model, x)
    dy = trace.probs.copy()
    dy[np.arange(len(batch)), labels] -= 1.0
    _, grads = backward(model, batch)
    expected = dy.T @ trace.hidden[-1].sum(axis=0)
    assert np.allclose(grads["output/w_y"], expected, atol=1e-12)


def test_gradients_invariant_to_batch_order(rng):
    model = small_model()
    batch = feature_batch(rng, count=5, steps=4)
    loss_a, grads_a = backward(model, batch)
    loss_b, grads_b = backward(model, list(reversed(batch)))
    assert loss_a == pytest.approx(loss_b, rel=1e-9)
    for name in grads_a:
        denom = max(np.max(np.abs(grads_a[name])), 1e-12)
        assert np.max(np.abs(grads_a[name] - grads_b[name])) / denom < 1e-9


# --- sgd -------------------------------------------------------------------

def test_sgd_step_updates(rng):
    model = small_model()
    batch = feature_batch(rng)
    _, grads = backward(model, batch)
    lr = 0.01
    updated = sgd_step(model, grads, lr)
    before = dict(model.named_parameters())
    for name, arr in updated.named_parameters():
        assert np.allclose(arr, before[name] - lr * grads[name], atol=1e-15)
    # functional: original untouched
    assert np.array_equal(before["output/w_y"], dict(model.named_parameters())["output/w_y"])


def test_sgd_step_reduces_loss(rng):
    model = small_model()
    batch = feature_batch(rng, count=4)
    before, grads = backward(model, batch)
    after = loss(sgd_step(model, grads, 1e-2), batch)
    assert after < before


def test_sgd_clip(rng):
    model = small_model()
    batch = feature_batch(rng)
    _, grads = backward(model, batch)
    norm = global_grad_norm(grads)
    clip = norm / 2.0
    updated = sgd_step(model, grads, 1.0, clip_norm=clip)
    before = dict(model.named_parameters())
    scale = clip / norm
    for name, arr in updated.named_parameters():
        assert np.allclose(arr, before[name] - scale * grads[name], atol=1e-12)
    # below the threshold: no rescaling
    untouched = sgd_step(model, grads, 1.0, clip_norm=norm * 2.0)
    for name, arr in untouched.named_parameters():
        assert np.allclose(arr, before[name] - grads[name], atol=1e-12)


def test_sgd_step_shape_guard(rng):
    model = small_model()
    _, grads = backward(model, feature_batch(rng))
    broken = dict(grads)
    del broken["output/b_y"]
    with pytest.raises(ShapeMismatch):
        sgd_step(model, broken, 0.1)
    wrong = dict(grads)
    wrong["output/b_y"] = np.zeros(7)
    with pytest.raises(ShapeMismatch):
        sgd_step(model, wrong, 0.1)


# --- training loop ---------------------------------------------------------

def separable_set(rng, count=12, classes=3, steps=8):
    anchors = 3.0 * rng.standard_normal((classes, 31))
    items = []
    for i in range(count):
        label = i % classes
        data = anchors[label] + 0.2 * rng.standard_normal((steps, 31))
        items.append(LabeledSequence(sequence=GestureSequence(data=data, label=label), label=label))
    return items


def test_train_deterministic(rng):
    items = separable_set(rng)
    cfg = TrainConfig(learning_rate=1e-3, epochs=4, batch_size=4, seed=11)
    m1, h1 = train(small_model(seed=2), items, items[:3], cfg)
    m2, h2 = train(small_model(seed=2), items, items[:3], cfg)
    for (_, a), (_, b) in zip(m1.named_parameters(), m2.named_parameters()):
        assert np.array_equal(a, b)
    assert [m.train_loss for m in h1] == [m.train_loss for m in h2]
    assert [m.val_acc for m in h1] == [m.val_acc for m in h2]


def test_train_loss_decreases(rng):
    items = separable_set(rng, count=12)
    for attempt, lr in enumerate((3e-3, 1.5e-3)):
        cfg = TrainConfig(learning_rate=lr, epochs=5, batch_size=4, seed=1)
        _, history = train(small_model(seed=4), items, [], cfg)
        losses = [m.train_loss for m in history]
        if all(b < a for a, b in zip(losses, losses[1:])):
            break
    else:
        pytest.fail(f"loss not monotone at either rate: {losses}")


def test_train_history_bookkeeping(rng):
    items = separable_set(rng, count=10)
    cfg = TrainConfig(learning_rate=1e-3, epochs=3, batch_size=4, seed=0)
    _, history = train(small_model(), items, items[:4], cfg)
    assert [m.epoch for m in history] == [1, 2, 3]
    batches_per_epoch = math.ceil(len(items) / cfg.batch_size)
    assert [m.iterations for m in history] == [batches_per_epoch * e for e in (1, 2, 3)]
    for m in history:
        assert m.train_loss_per_seq == pytest.approx(m.train_loss / len(items))
        assert 0.0 <= m.train_acc <= 1.0
        assert m.val_acc is not None and m.val_loss_per_seq is not None
        assert m.wall_ms >= 0.0


def test_train_without_validation(rng):
    items = separable_set(rng, count=6)
    cfg = TrainConfig(learning_rate=1e-3, epochs=2, batch_size=3, seed=0)
    _, history = train(small_model(), items, [], cfg)
    assert all(m.val_loss is None and m.val_acc is None for m in history)


def test_train_zero_epochs_keeps_model(tmp_path, rng):
    items = separable_set(rng, count=4)
    start = small_model(seed=8)
    cfg = TrainConfig(epochs=0, seed=0)
    final, history = train(start, items, [], cfg, checkpoint_dir=tmp_path)
    assert history == []
    for (_, a), (_, b) in zip(start.named_parameters(), final.named_parameters()):
        assert np.array_equal(a, b)
    loaded, _ = load_checkpoint(tmp_path / "final.ckpt")
    for (_, a), (_, b) in zip(start.named_parameters(), loaded.named_parameters()):
        assert np.array_equal(a, b)


def test_train_checkpoint_files(tmp_path, rng):
    items = separable_set(rng, count=8)
    cfg = TrainConfig(learning_rate=1e-3, epochs=4, batch_size=4, seed=0, checkpoint_every=2)
    train(small_model(), items, items[:3], cfg, checkpoint_dir=tmp_path, config_hash="h")
    assert (tmp_path / "final.ckpt").is_file()
    assert (tmp_path / "best.ckpt").is_file()
    assert (tmp_path / "epoch_0002.ckpt").is_file()
    assert (tmp_path / "epoch_0004.ckpt").is_file()
    assert not (tmp_path / "epoch_0003.ckpt").exists()
    _, meta = load_checkpoint(tmp_path / "final.ckpt")
    assert meta["config_hash"] == "h"
    assert meta["train_target_len"] == 8


def test_train_empty_set_rejected():
    with pytest.raises(ValueError):
        train(small_model(), [], [], TrainConfig(epochs=1))


def test_nan_loss_raises_with_iteration(rng):
    # saturate the head so the true class gets probability exactly zero
    model = small_model(classes=2)
    model.w_y[0, :] = 5000.0
    model.w_y[1, :] = -5000.0
    model.b_y[:] = np.array([5000.0, -5000.0])
    data = np.abs(rng.normal(size=(6, 31))) + 1.0
    items = [
        LabeledSequence(sequence=GestureSequence(data=data), label=1),
    ]
    with pytest.raises(NanLoss) as exc:
        train(model, items, [], TrainConfig(epochs=1, batch_size=1, seed=0))
    assert exc.value.iteration == 1


def test_nan_loss_mid_training_iteration_index(rng):
    model = small_model(classes=2)
    good = separable_set(rng, count=2, classes=2)
    with pytest.raises(NanLoss) as exc:
        # gigantic learning rate blows the parameters up after the first step
        train(model, good, [], TrainConfig(learning_rate=1e14, epochs=3, batch_size=1, seed=0))
    assert exc.value.iteration >= 2
