"""Stacked peephole-LSTM classifier with a summed-over-time softmax head.

Gate equations per layer l and instant t (sigma is the logistic
sigmoid, * the element-wise product, all states zero at t=0):

    i = sigma(W_xi x_t + W_hi h_{l,t-1} [+ W_bi h_{l-1,t}] + w_ci * c_{l,t-1} + b_i)
    f = sigma(W_xf x_t + W_hf h_{l,t-1} [+ W_bf h_{l-1,t}] + w_cf * c_{l,t-1} + b_f)
    c_{l,t} = f * c_{l,t-1} + i * tanh(W_xc x_t + W_hc h_{l,t-1} [+ W_bc h_{l-1,t}] + b_c)
    o = sigma(W_xo x_t + W_ho h_{l,t-1} [+ W_bo h_{l-1,t}] + w_co * c_{l,t-1} + b_o)
    h_{l,t} = o * tanh(c_{l,t})

Two deliberate quirks of this architecture, kept exactly as designed:
the raw input x_t feeds every layer (not just the bottom one), and the
output gate's peephole reads the previous cell state c_{l,t-1}, not the
freshly computed c_{l,t}.  Peepholes are element-wise vectors.

The class scores of one sequence are the per-instant projections of the
top hidden state, summed over all instants and pushed through a softmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import BadHeader, ShapeMismatch
from .features import FEATURE_DIM, GestureSequence

CHECKPOINT_HEADER = "DLSTM-CKPT v1"

#: Hidden width and depth defaults for the full-scale configuration.
DEFAULT_HIDDEN = 200
DEFAULT_LAYERS = 4


@dataclass
class LstmLayerParams:
    """All weights of one layer.

    ``w_b*`` project the hidden state of the layer below at the same
    instant and exist only above the bottom layer.  ``w_c*`` are the
    element-wise peephole vectors.
    """

    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xc: np.ndarray
    w_xo: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_hc: np.ndarray
    w_ho: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    w_bi: np.ndarray | None = None
    w_bf: np.ndarray | None = None
    w_bc: np.ndarray | None = None
    w_bo: np.ndarray | None = None

    FIELD_ORDER = (
        "w_xi", "w_xf", "w_xc", "w_xo",
        "w_hi", "w_hf", "w_hc", "w_ho",
        "w_bi", "w_bf", "w_bc", "w_bo",
        "w_ci", "w_cf", "w_co",
        "b_i", "b_f", "b_c", "b_o",
    )

    @property
    def has_below(self) -> bool:
        return self.w_bi is not None

    def named_arrays(self):
        for name in self.FIELD_ORDER:
            arr = getattr(self, name)
            if arr is not None:
                yield name, arr

    def stacked_input_weights(self) -> np.ndarray:
        return np.concatenate([self.w_xi, self.w_xf, self.w_xc, self.w_xo], axis=0)

    def stacked_hidden_weights(self) -> np.ndarray:
        return np.concatenate([self.w_hi, self.w_hf, self.w_hc, self.w_ho], axis=0)

    def stacked_below_weights(self) -> np.ndarray:
        return np.concatenate([self.w_bi, self.w_bf, self.w_bc, self.w_bo], axis=0)

    def stacked_biases(self) -> np.ndarray:
        return np.concatenate([self.b_i, self.b_f, self.b_c, self.b_o])


@dataclass
class DlstmModel:
    """A stack of peephole-LSTM layers plus the class projection."""

    layers: list[LstmLayerParams]
    w_y: np.ndarray
    b_y: np.ndarray
    init_seed: int | None = None

    @property
    def input_dim(self) -> int:
        return self.layers[0].w_xi.shape[1]

    @property
    def hidden(self) -> int:
        return self.layers[0].w_xi.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def classes(self) -> int:
        return self.w_y.shape[0]

    @classmethod
    def init_random(
        cls,
        hidden: int,
        layers: int,
        classes: int,
        seed: int,
        input_dim: int = FEATURE_DIM,
    ) -> "DlstmModel":
        """Seeded initialization: matrices uniform in +-1/sqrt(hidden),
        biases zero except the forget bias, which starts at 1 so early
        gradients can flow through the cell chain."""
        if layers < 1:
            raise ValueError("need at least one layer")
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(hidden)

        def mat(rows, cols):
            return rng.uniform(-scale, scale, size=(rows, cols))

        built = []
        for l in range(layers):
            params = dict(
                w_xi=mat(hidden, input_dim), w_xf=mat(hidden, input_dim),
                w_xc=mat(hidden, input_dim), w_xo=mat(hidden, input_dim),
                w_hi=mat(hidden, hidden), w_hf=mat(hidden, hidden),
                w_hc=mat(hidden, hidden), w_ho=mat(hidden, hidden),
                w_ci=rng.uniform(-scale, scale, size=hidden),
                w_cf=rng.uniform(-scale, scale, size=hidden),
                w_co=rng.uniform(-scale, scale, size=hidden),
                b_i=np.zeros(hidden), b_f=np.full(hidden, 1.0),
                b_c=np.zeros(hidden), b_o=np.zeros(hidden),
            )
            if l > 0:
                params.update(
                    w_bi=mat(hidden, hidden), w_bf=mat(hidden, hidden),
                    w_bc=mat(hidden, hidden), w_bo=mat(hidden, hidden),
                )
            built.append(LstmLayerParams(**params))
        return cls(
            layers=built,
            w_y=mat(classes, hidden),
            b_y=np.zeros(classes),
            init_seed=seed,
        )

    @classmethod
    def zeros(cls, hidden: int, layers: int, classes: int, input_dim: int = FEATURE_DIM) -> "DlstmModel":
        model = cls.init_random(hidden, layers, classes, seed=0, input_dim=input_dim)
        for _, arr in model.named_parameters():
            arr[...] = 0.0
        model.init_seed = None
        return model

    def named_parameters(self):
        """(name, array) pairs in the canonical checkpoint order."""
        for l, layer in enumerate(self.layers):
            for suffix, arr in layer.named_arrays():
                yield f"layer{l}/{suffix}", arr
        yield "output/w_y", self.w_y
        yield "output/b_y", self.b_y

    def copy(self) -> "DlstmModel":
        new_layers = [
            LstmLayerParams(**{name: arr.copy() for name, arr in layer.named_arrays()})
            for layer in self.layers
        ]
        return DlstmModel(
            layers=new_layers, w_y=self.w_y.copy(), b_y=self.b_y.copy(), init_seed=self.init_seed
        )


@dataclass
class ForwardTrace:
    """Everything the forward pass computed, batch-major on the last axes.

    Per-layer arrays have shape (depth, T, batch, hidden); ``outputs`` is
    (T, batch, classes); ``logits`` and ``probs`` are (batch, classes).
    """

    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_o: np.ndarray
    candidate: np.ndarray
    cell: np.ndarray
    cell_tanh: np.ndarray
    hidden: np.ndarray
    outputs: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    inputs: np.ndarray = field(repr=False, default=None)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(x) -> np.ndarray:
    if isinstance(x, GestureSequence):
        x = x.data
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3:
        raise ShapeMismatch(f"expected (T, D) or (B, T, D) input, got shape {x.shape}")
    return x


def forward_batch(model: DlstmModel, x) -> ForwardTrace:
    """Run a (batch, T, input_dim) stack of sequences through the model."""
    x = _as_batch(x)
    batch, steps, dim = x.shape
    if dim != model.input_dim:
        raise ShapeMismatch(f"input feature dim {dim} != model input dim {model.input_dim}")
    if steps < 1:
        raise ShapeMismatch("need at least one time step")
    n, h = model.depth, model.hidden

    xt = np.ascontiguousarray(x.transpose(1, 0, 2))  # (T, B, D)
    shape = (n, steps, batch, h)
    gate_i, gate_f, gate_o = np.empty(shape), np.empty(shape), np.empty(shape)
    candidate, cell, cell_tanh, hidden = (
        np.empty(shape), np.empty(shape), np.empty(shape), np.empty(shape),
    )

    for l, layer in enumerate(model.layers):
        w_x = layer.stacked_input_weights()
        w_h = layer.stacked_hidden_weights()
        pre = xt @ w_x.T + layer.stacked_biases()  # (T, B, 4H)
        if l > 0:
            pre = pre + hidden[l - 1] @ layer.stacked_below_weights().T
        h_prev = np.zeros((batch, h))
        c_prev = np.zeros((batch, h))
        for t in range(steps):
            a = pre[t] + h_prev @ w_h.T
            i = expit(a[:, :h] + c_prev * layer.w_ci)
            f = expit(a[:, h:2 * h] + c_prev * layer.w_cf)
            g = np.tanh(a[:, 2 * h:3 * h])
            c = f * c_prev + i * g
            o = expit(a[:, 3 * h:] + c_prev * layer.w_co)
            th = np.tanh(c)
            h_prev = o * th
            c_prev = c
            gate_i[l, t], gate_f[l, t], gate_o[l, t] = i, f, o
            candidate[l, t], cell[l, t], cell_tanh[l, t] = g, c, th
            hidden[l, t] = h_prev

    outputs = hidden[n - 1] @ model.w_y.T + model.b_y  # (T, B, K)
    logits = outputs.sum(axis=0)
    probs = _softmax(logits)
    return ForwardTrace(
        gate_i=gate_i, gate_f=gate_f, gate_o=gate_o, candidate=candidate,
        cell=cell, cell_tanh=cell_tanh, hidden=hidden,
        outputs=outputs, logits=logits, probs=probs, inputs=xt,
    )


def forward(model: DlstmModel, seq) -> ForwardTrace:
    """Forward pass of a single sequence (GestureSequence or (T, D) array)."""
    if isinstance(seq, np.ndarray) and seq.ndim == 3:
        raise ShapeMismatch("forward takes one sequence; use forward_batch for stacks")
    return forward_batch(model, seq)


def predict(model: DlstmModel, seq) -> tuple[int, np.ndarray]:
    """Most probable class of one sequence; argmax ties go to the lowest index."""
    trace = forward(model, seq)
    probs = trace.probs[0]
    return int(np.argmax(probs)), probs


def predict_batch(model: DlstmModel, x) -> np.ndarray:
    trace = forward_batch(model, x)
    return np.argmax(trace.probs, axis=1)


# ---------------------------------------------------------------------------
# Checkpoint container: one ASCII header line, one JSON metadata line, then
# the raw little-endian float64 bytes of every tensor in manifest order.
# ---------------------------------------------------------------------------

def save_checkpoint(
    model: DlstmModel,
    path,
    seed: int | None = None,
    config_hash: str | None = None,
    train_target_len: int | None = None,
) -> None:
    names, tensors = zip(*model.named_parameters())
    meta = {
        "format_version": 1,
        "dims": {
            "input": model.input_dim,
            "hidden": model.hidden,
            "layers": model.depth,
            "classes": model.classes,
        },
        "seed": seed if seed is not None else model.init_seed,
        "config_hash": config_hash,
        "train_target_len": train_target_len,
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in zip(names, tensors)
        ],
    }
    with open(path, "wb") as fh:
        fh.write((CHECKPOINT_HEADER + "\n").encode("ascii"))
        fh.write((json.dumps(meta, sort_keys=True) + "\n").encode("ascii"))
        for arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[DlstmModel, dict]:
    """Rebuild a model from disk; the round trip is bit-exact."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if header != CHECKPOINT_HEADER:
            raise BadHeader(f"not a checkpoint file (header {header!r})")
        try:
            meta = json.loads(fh.readline().decode("ascii", errors="replace"))
            dims = meta["dims"]
            entries = meta["tensors"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BadHeader(f"unreadable checkpoint metadata: {exc}") from None
        blob = fh.read()

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if offset + count * 8 > len(blob):
            raise BadHeader("checkpoint payload is truncated")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.copy()
        offset += count * 8
    if offset != len(blob):
        raise BadHeader(f"checkpoint payload has {len(blob)} bytes, expected {offset}")

    layers = []
    for l in range(dims["layers"]):
        kwargs = {}
        for suffix in LstmLayerParams.FIELD_ORDER:
            name = f"layer{l}/{suffix}"
            if name in arrays:
                kwargs[suffix] = arrays[name]
            elif suffix.startswith("w_b") and l == 0:
                continue
            else:
                raise BadHeader(f"checkpoint missing tensor {name}")
        layers.append(LstmLayerParams(**kwargs))
    model = DlstmModel(
        layers=layers,
        w_y=arrays["output/w_y"],
        b_y=arrays["output/b_y"],
        init_seed=meta.get("seed"),
    )
    if (model.input_dim, model.hidden, model.depth, model.classes) != (
        dims["input"], dims["hidden"], dims["layers"], dims["classes"],
    ):
        raise BadHeader("checkpoint dims disagree with stored tensors")
    return model, meta
