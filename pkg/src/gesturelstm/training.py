"""Cross-entropy loss, exact reverse-mode gradients through the unrolled
recurrence, plain SGD updates, and a finite-difference gradient verifier.

The loss over a batch is the sum of negative log-probabilities of the
true classes.  Because each sequence's logits are a sum of per-instant
projections, the logit gradient is one shared vector per sequence; it
fans out over all instants and layers during the reverse sweep, which
walks time backwards inside each layer and layers top to bottom,
collecting every path: cell chain, hidden recurrence, the three
peephole hops into the next instant's gates, and the projections into
the layer above.  Everything runs in float64 so the verifier's
tolerances are meaningful.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import BadLabel, NanLoss, ShapeMismatch
from .features import GestureSequence
from .network import DlstmModel, forward_batch, save_checkpoint


@dataclass(frozen=True)
class LabeledSequence:
    """A fixed-length gesture sequence with its ground-truth class."""

    sequence: GestureSequence
    label: int


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    shuffle: bool = True
    clip_norm: float | None = None  # global-norm clip threshold, None = off
    checkpoint_every: int = 0       # save every k epochs, 0 = only best/final

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass
class EpochMetrics:
    epoch: int
    iterations: int
    train_loss: float
    train_loss_per_seq: float
    train_acc: float
    val_loss: float | None
    val_loss_per_seq: float | None
    val_acc: float | None
    wall_ms: float


GradientSet = dict[str, np.ndarray]


def stack_batch(batch: list[LabeledSequence], classes: int) -> tuple[np.ndarray, np.ndarray]:
    if not batch:
        raise ValueError("batch must be non-empty")
    lengths = {len(item.sequence) for item in batch}
    if len(lengths) != 1:
        raise ShapeMismatch(f"batch mixes sequence lengths {sorted(lengths)}")
    labels = np.array([item.label for item in batch], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= classes:
        bad = labels[(labels < 0) | (labels >= classes)][0]
        raise BadLabel(f"label {bad} outside [0, {classes})")
    x = np.stack([item.sequence.data for item in batch])
    return x, labels


def _loss_arrays(model: DlstmModel, x: np.ndarray, labels: np.ndarray) -> float:
    probs = forward_batch(model, x).probs
    # A saturated model can hand the true class probability exactly 0;
    # the resulting inf is caught by the trainer's finiteness check.
    with np.errstate(divide="ignore"):
        return float(-np.log(probs[np.arange(len(labels)), labels]).sum())


def loss(model: DlstmModel, batch: list[LabeledSequence]) -> float:
    """Summed negative log-probability of the true classes."""
    x, labels = stack_batch(batch, model.classes)
    return _loss_arrays(model, x, labels)


def _backward_full(model: DlstmModel, x: np.ndarray, labels: np.ndarray):
    trace = forward_batch(model, x)
    batch, steps = x.shape[0], x.shape[1]
    n, h = model.depth, model.hidden

    probs = trace.probs
    with np.errstate(divide="ignore"):
        total = float(-np.log(probs[np.arange(batch), labels]).sum())
    dy = probs.copy()
    dy[np.arange(batch), labels] -= 1.0  # (B, K)

    grads: GradientSet = {}
    top = trace.hidden[n - 1]  # (T, B, H)
    grads["output/w_y"] = dy.T @ top.sum(axis=0)
    # The bias enters every instant's projection, so its gradient carries
    # a factor of the sequence length.
    grads["output/b_y"] = steps * dy.sum(axis=0)

    xt_flat = trace.inputs.reshape(steps * batch, -1)
    d_above = np.broadcast_to(dy @ model.w_y, (steps, batch, h))

    for l in reversed(range(n)):
        layer = model.layers[l]
        i, f, o = trace.gate_i[l], trace.gate_f[l], trace.gate_o[l]
        g, th = trace.candidate[l], trace.cell_tanh[l]
        c = trace.cell[l]
        zeros = np.zeros((1, batch, h))
        c_prev = np.concatenate([zeros, c[:-1]], axis=0)
        h_prev = np.concatenate([zeros, trace.hidden[l, :-1]], axis=0)
        w_h = layer.stacked_hidden_weights()  # (4H, H)

        da = np.empty((steps, batch, 4 * h))
        dh_time = np.zeros((batch, h))
        dc_time = np.zeros((batch, h))
        for t in reversed(range(steps)):
            dh = d_above[t] + dh_time
            dc = dc_time + dh * o[t] * (1.0 - th[t] ** 2)
            da_i = (dc * g[t]) * i[t] * (1.0 - i[t])
            da_f = (dc * c_prev[t]) * f[t] * (1.0 - f[t])
            da_g = (dc * i[t]) * (1.0 - g[t] ** 2)
            da_o = (dh * th[t]) * o[t] * (1.0 - o[t])
            da[t, :, :h] = da_i
            da[t, :, h:2 * h] = da_f
            da[t, :, 2 * h:3 * h] = da_g
            da[t, :, 3 * h:] = da_o
            dh_time = da[t] @ w_h
            # Into c_{t-1}: the forget chain plus all three peephole hops
            # (the output gate's peephole reads the previous cell state).
            dc_time = dc * f[t] + layer.w_ci * da_i + layer.w_cf * da_f + layer.w_co * da_o

        da_flat = da.reshape(steps * batch, 4 * h)
        gx = da_flat.T @ xt_flat              # (4H, D)
        gh = da_flat.T @ h_prev.reshape(steps * batch, h)
        gb = da.sum(axis=(0, 1))
        sl_i, sl_f = slice(0, h), slice(h, 2 * h)
        sl_g, sl_o = slice(2 * h, 3 * h), slice(3 * h, 4 * h)
        grads[f"layer{l}/w_xi"], grads[f"layer{l}/w_xf"] = gx[sl_i], gx[sl_f]
        grads[f"layer{l}/w_xc"], grads[f"layer{l}/w_xo"] = gx[sl_g], gx[sl_o]
        grads[f"layer{l}/w_hi"], grads[f"layer{l}/w_hf"] = gh[sl_i], gh[sl_f]
        grads[f"layer{l}/w_hc"], grads[f"layer{l}/w_ho"] = gh[sl_g], gh[sl_o]
        grads[f"layer{l}/b_i"], grads[f"layer{l}/b_f"] = gb[sl_i], gb[sl_f]
        grads[f"layer{l}/b_c"], grads[f"layer{l}/b_o"] = gb[sl_g], gb[sl_o]
        grads[f"layer{l}/w_ci"] = np.einsum("tbh,tbh->h", da[:, :, sl_i], c_prev)
        grads[f"layer{l}/w_cf"] = np.einsum("tbh,tbh->h", da[:, :, sl_f], c_prev)
        grads[f"layer{l}/w_co"] = np.einsum("tbh,tbh->h", da[:, :, sl_o], c_prev)
        if l > 0:
            below_flat = trace.hidden[l - 1].reshape(steps * batch, h)
            gbelow = da_flat.T @ below_flat
            grads[f"layer{l}/w_bi"], grads[f"layer{l}/w_bf"] = gbelow[sl_i], gbelow[sl_f]
            grads[f"layer{l}/w_bc"], grads[f"layer{l}/w_bo"] = gbelow[sl_g], gbelow[sl_o]
            d_above = da @ layer.stacked_below_weights()  # (T, B, H)

    return total, grads, probs


def backward(model: DlstmModel, batch: list[LabeledSequence]) -> tuple[float, GradientSet]:
    """Loss and its exact gradient for every parameter tensor."""
    x, labels = stack_batch(batch, model.classes)
    total, grads, _ = _backward_full(model, x, labels)
    return total, grads


def global_grad_norm(grads: GradientSet) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def sgd_step(
    model: DlstmModel,
    grads: GradientSet,
    lr: float,
    clip_norm: float | None = None,
) -> DlstmModel:
    """theta <- theta - lr * grad, with optional global-norm clipping."""
    shapes = {name: arr.shape for name, arr in model.named_parameters()}
    if set(grads) != set(shapes):
        raise ShapeMismatch("gradient set does not cover the model's parameters")
    for name, g in grads.items():
        if g.shape != shapes[name]:
            raise ShapeMismatch(f"gradient {name} has shape {g.shape}, expected {shapes[name]}")
    scale = 1.0
    if clip_norm is not None:
        norm = global_grad_norm(grads)
        if norm > clip_norm:
            scale = clip_norm / norm
    updated = model.copy()
    for name, arr in updated.named_parameters():
        arr -= lr * scale * grads[name]
    return updated


def _dataset_metrics(model, items, batch_size):
    total, correct = 0.0, 0
    for start in range(0, len(items), batch_size):
        chunk = items[start:start + batch_size]
        x, labels = stack_batch(chunk, model.classes)
        probs = forward_batch(model, x).probs
        with np.errstate(divide="ignore"):
            total += float(-np.log(probs[np.arange(len(labels)), labels]).sum())
        correct += int((np.argmax(probs, axis=1) == labels).sum())
    return total, correct / len(items)


def train(
    model: DlstmModel,
    train_set: list[LabeledSequence],
    val_set: list[LabeledSequence],
    config: TrainConfig,
    checkpoint_dir=None,
    config_hash: str | None = None,
) -> tuple[DlstmModel, list[EpochMetrics]]:
    """Minibatch SGD over the training set, deterministic for a fixed seed.

    Per epoch: seeded shuffle, backward + update per minibatch, then
    metrics (running loss/accuracy over the epoch's pre-update batches,
    full-set metrics on the validation set).  When ``checkpoint_dir`` is
    given, the best-validation-accuracy model is kept as best.ckpt, a
    cadence snapshot every ``checkpoint_every`` epochs, and the returned
    model as final.ckpt.  Raises NanLoss (with the iteration index) the
    moment a batch loss stops being finite.
    """
    if not train_set:
        raise ValueError("training set must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    order = np.arange(len(train_set))
    history: list[EpochMetrics] = []
    iteration = 0
    best_acc = -1.0
    target_len = len(train_set[0].sequence)

    def save(name):
        if checkpoint_dir is not None:
            save_checkpoint(
                model,
                f"{checkpoint_dir}/{name}",
                seed=config.seed,
                config_hash=config_hash,
                train_target_len=target_len,
            )

    for epoch in range(config.epochs):
        start_time = time.perf_counter()
        if config.shuffle:
            rng.shuffle(order)
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[j] for j in order[start:start + config.batch_size]]
            x, labels = stack_batch(batch, model.classes)
            batch_loss, grads, probs = _backward_full(model, x, labels)
            iteration += 1
            if not np.isfinite(batch_loss):
                raise NanLoss(iteration)
            epoch_loss += batch_loss
            epoch_correct += int((np.argmax(probs, axis=1) == labels).sum())
            model = sgd_step(model, grads, config.learning_rate, config.clip_norm)

        val_loss = val_acc = val_per_seq = None
        if val_set:
            val_loss, val_acc = _dataset_metrics(model, val_set, config.batch_size)
            val_per_seq = val_loss / len(val_set)
            if val_acc > best_acc:
                best_acc = val_acc
                save("best.ckpt")
        if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            save(f"epoch_{epoch + 1:04d}.ckpt")

        history.append(EpochMetrics(
            epoch=epoch + 1,
            iterations=iteration,
            train_loss=epoch_loss,
            train_loss_per_seq=epoch_loss / len(train_set),
            train_acc=epoch_correct / len(train_set),
            val_loss=val_loss,
            val_loss_per_seq=val_per_seq,
            val_acc=val_acc,
            wall_ms=(time.perf_counter() - start_time) * 1000.0,
        ))

    save("final.ckpt")
    return model, history


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

@dataclass
class GradcheckReport:
    tolerance: float
    per_tensor: dict[str, float]
    worst_tensor: str
    worst_error: float
    passed: bool


def _fd_arrays(model: DlstmModel, x: np.ndarray, labels: np.ndarray, step: float) -> GradientSet:
    grads: GradientSet = {}
    for name, arr in model.named_parameters():
        flat = arr.ravel()
        out = np.zeros(flat.size)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            plus = _loss_arrays(model, x, labels)
            flat[idx] = orig - step
            minus = _loss_arrays(model, x, labels)
            flat[idx] = orig
            out[idx] = (plus - minus) / (2.0 * step)
        grads[name] = out.reshape(arr.shape)
    return grads


def finite_difference_grads(
    model: DlstmModel, batch: list[LabeledSequence], step: float = 1e-5
) -> GradientSet:
    """Central-difference loss gradients, one parameter entry at a time."""
    x, labels = stack_batch(batch, model.classes)
    return _fd_arrays(model, x, labels, step)


def compare_gradients(
    analytic: GradientSet, numeric: GradientSet, tolerance: float
) -> GradcheckReport:
    """Worst relative disagreement per tensor; pass iff all below tolerance."""
    per_tensor: dict[str, float] = {}
    for name in sorted(analytic):
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        per_tensor[name] = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
    worst = max(per_tensor, key=per_tensor.get)
    return GradcheckReport(
        tolerance=tolerance,
        per_tensor=per_tensor,
        worst_tensor=worst,
        worst_error=per_tensor[worst],
        passed=all(v < tolerance for v in per_tensor.values()),
    )


def gradcheck(
    layers: int,
    hidden: int,
    classes: int,
    steps: int,
    seed: int,
    tolerance: float = 1e-4,
    batch_size: int = 2,
    input_dim: int = 31,
    fd_step: float = 1e-5,
) -> GradcheckReport:
    """Verify the analytic gradients of a random small model on random data."""
    model = DlstmModel.init_random(hidden, layers, classes, seed=seed, input_dim=input_dim)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    x = rng.normal(scale=0.5, size=(batch_size, steps, input_dim))
    labels = rng.integers(classes, size=batch_size)
    _, analytic, _ = _backward_full(model, x, labels)
    numeric = _fd_arrays(model, x, labels, step=fd_step)
    return compare_gradients(analytic, numeric, tolerance)
