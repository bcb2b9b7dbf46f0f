"""Command-line front end.

Subcommands: extract, train, eval, gradcheck, ablate, plot.  Runs are
configured by flat ``key=value`` files plus flag overrides; every run
directory receives the effective configuration and its hash so outputs
are traceable.  Exit codes: 0 success, 1 usage/configuration error,
2 data error, 3 numeric failure (non-finite loss, failed gradient
check).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys
from dataclasses import dataclass

import numpy as np

from .dataset_io import (
    PreparedDataset,
    load_native_dir,
    load_shrec,
    native_split,
    prepare,
    subset_by_label,
)
from .errors import BadFilterParams, GestureError, NanLoss
from .evaluation import confusion_csv, evaluate, format_report, render_confusion
from .features import FeatureMask
from .network import DlstmModel, forward_batch, load_checkpoint
from .training import TrainConfig, gradcheck, stack_batch, train

ENV_DATA_ROOT = "GESTURE_DATA_ROOT"
METRICS_VERSION = "metrics v1"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    data_root: str = ""
    data_format: str = "native"     # "native" or "shrec"
    granularity: int = 14           # shrec label granularity (14 or 28)
    labels: str = ""                # optional subset: names (native) or 0-based ids (shrec)
    mask: str = "all"               # feature groups to keep
    target_len: int = 0             # 0 = per-format default (native 200, shrec 100)
    window: int = 9
    order: int = 3
    hidden: int = 200
    layers: int = 4
    lr: float = 1e-4
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    shuffle: bool = True
    clip_norm: float = 0.0          # 0 = clipping off; >0 = global-norm threshold
    checkpoint_every: int = 0
    out_dir: str = "runs/latest"
    cache_dir: str = ""

    # Fields that locate outputs rather than shape them; excluded from the hash.
    UNHASHED = ("out_dir", "cache_dir")

    def resolve(self) -> "RunConfig":
        cfg = dataclasses.replace(self)
        if cfg.target_len == 0:
            cfg.target_len = 100 if cfg.data_format == "shrec" else 200
        return cfg

    def lines(self, include_unhashed=True) -> list[str]:
        out = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            if not include_unhashed and f.name in self.UNHASHED:
                continue
            out.append(f"{f.name}={getattr(self, f.name)!r}")
        return out

    def config_hash(self) -> str:
        text = "\n".join(self.lines(include_unhashed=False))
        return hashlib.sha256(text.encode()).hexdigest()


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, kind, raw: str):
    try:
        if kind is bool:
            return _BOOL_WORDS[raw.strip().lower()]
        return kind(raw)
    except (ValueError, KeyError):
        raise UsageError(f"bad value for {name}: {raw!r}") from None


def read_config_file(path) -> dict[str, str]:
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def build_run_config(args) -> RunConfig:
    """defaults < config file < convenience flags < --set (last wins)."""
    field_types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    type_map = {"str": str, "int": int, "float": float, "bool": bool}
    cfg = RunConfig()

    def apply(key, raw):
        if key not in field_types:
            raise UsageError(f"unknown config key: {key}")
        kind = type_map.get(field_types[key], str)
        setattr(cfg, key, _coerce(key, kind, raw))

    if getattr(args, "config", None):
        for key, raw in read_config_file(args.config).items():
            apply(key, raw)
    flag_map = {
        "data_root": "data_root", "data_format": "data_format", "out_dir": "out_dir",
        "seed": "seed", "epochs": "epochs", "target_len": "target_len", "mask": "mask",
        "hidden": "hidden", "layers": "layers", "cache_dir": "cache_dir",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            apply(key, str(value))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        apply(key.strip(), raw.strip())
    return cfg.resolve()


# ---------------------------------------------------------------------------
# Dataset plumbing
# ---------------------------------------------------------------------------

def load_split_from_config(cfg: RunConfig):
    root = cfg.data_root or os.environ.get(ENV_DATA_ROOT, "")
    if not root:
        raise UsageError(
            f"no data root given (use --data-root, data_root=..., or ${ENV_DATA_ROOT})"
        )
    if cfg.data_format == "shrec":
        split = load_shrec(root, cfg.granularity)
        if cfg.labels:
            keep = [int(tok) for tok in cfg.labels.split(",") if tok.strip()]
            split = subset_by_label(split, keep)
        return split
    if cfg.data_format == "native":
        captures = load_native_dir(root)
        if cfg.labels:
            keep = {tok.strip() for tok in cfg.labels.split(",") if tok.strip()}
            captures = [c for c in captures if c.label in keep]
        if not captures:
            raise UsageError(f"no native captures under {root}")
        return native_split(captures)
    raise UsageError(f"unknown data_format: {cfg.data_format!r}")


def prepare_from_config(cfg: RunConfig) -> PreparedDataset:
    split = load_split_from_config(cfg)
    mask = FeatureMask.from_spec(cfg.mask)
    return prepare(
        split,
        target_len=cfg.target_len,
        seed=cfg.seed,
        mask=mask,
        window=cfg.window,
        order=cfg.order,
        cache_dir=cfg.cache_dir or None,
    )


def write_config(cfg: RunConfig, out_dir) -> str:
    chash = cfg.config_hash()
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write("\n".join(cfg.lines()))
        fh.write(f"\n# config_hash: {chash}\n")
    return chash


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_history(history, out_dir, chash, seed) -> None:
    header = ("epoch,iterations,train_loss,train_loss_per_seq,train_acc,"
              "val_loss,val_loss_per_seq,val_acc")
    provenance = [f"# format: {METRICS_VERSION}", f"# config_hash: {chash}", f"# seed: {seed}"]
    with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
        fh.write("\n".join(provenance) + "\n" + header + "\n")
        for m in history:
            fh.write(",".join(_fmt(v) for v in (
                m.epoch, m.iterations, m.train_loss, m.train_loss_per_seq, m.train_acc,
                m.val_loss, m.val_loss_per_seq, m.val_acc,
            )) + "\n")
    with open(os.path.join(out_dir, "timing.csv"), "w") as fh:
        fh.write("\n".join(provenance) + "\nepoch,wall_ms\n")
        for m in history:
            fh.write(f"{m.epoch},{m.wall_ms!r}\n")


def write_eval_outputs(report, items, model, out_dir, chash, seed, label_names) -> None:
    provenance = f"# format: {METRICS_VERSION}\n# config_hash: {chash}\n# seed: {seed}\n"
    with open(os.path.join(out_dir, "confusion.csv"), "w") as fh:
        fh.write(provenance)
        fh.write(confusion_csv(report.confusion, label_names))
    with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
        fh.write(provenance)
        fh.write(format_report(report, label_names))
    with open(os.path.join(out_dir, "predictions.csv"), "w") as fh:
        fh.write(provenance)
        fh.write("index,true,predicted,correct\n")
        for start in range(0, len(items), 64):
            chunk = items[start:start + 64]
            x, labels = stack_batch(chunk, model.classes)
            preds = np.argmax(forward_batch(model, x).probs, axis=1)
            for off, (t, p) in enumerate(zip(labels, preds)):
                fh.write(f"{start + off},{label_names[t]},{label_names[p]},{int(t == p)}\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    cfg = build_run_config(args)
    prepared = prepare_from_config(cfg)
    out = args.out or os.path.join(cfg.out_dir, "features.npz")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    train_x = np.stack([s.sequence.data for s in prepared.train]) if prepared.train else np.zeros((0,))
    test_x = np.stack([s.sequence.data for s in prepared.test]) if prepared.test else np.zeros((0,))
    np.savez(
        out,
        train_x=train_x,
        train_y=np.array([s.label for s in prepared.train], dtype=np.int64),
        test_x=test_x,
        test_y=np.array([s.label for s in prepared.test], dtype=np.int64),
        label_names=np.array(prepared.label_names),
        config_hash=np.array(cfg.config_hash()),
        fingerprint=np.array(prepared.fingerprint),
    )
    print(f"wrote {out}: {len(prepared.train)} train / {len(prepared.test)} test, "
          f"{len(prepared.label_names)} classes, T={cfg.target_len}")
    return 0


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    chash = write_config(cfg, cfg.out_dir)
    prepared = prepare_from_config(cfg)
    model = DlstmModel.init_random(
        cfg.hidden, cfg.layers, len(prepared.label_names), seed=cfg.seed,
    )
    tconf = TrainConfig(
        learning_rate=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size,
        seed=cfg.seed, shuffle=cfg.shuffle,
        clip_norm=cfg.clip_norm if cfg.clip_norm > 0 else None,
        checkpoint_every=cfg.checkpoint_every,
    )
    model, history = train(
        model, list(prepared.train), list(prepared.test), tconf,
        checkpoint_dir=cfg.out_dir, config_hash=chash,
    )
    write_history(history, cfg.out_dir, chash, cfg.seed)
    if prepared.test:
        report = evaluate(model, list(prepared.test), batch_size=cfg.batch_size)
        write_eval_outputs(
            report, list(prepared.test), model, cfg.out_dir, chash, cfg.seed,
            prepared.label_names,
        )
        print(render_confusion(report.confusion, prepared.label_names))
        print(f"test accuracy: {report.accuracy:.4f}")
    if history:
        print(f"final train loss/seq: {history[-1].train_loss_per_seq:.6f}")
    print(f"run dir: {cfg.out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = build_run_config(args)
    model, meta = load_checkpoint(args.checkpoint)
    if cfg.target_len != meta.get("train_target_len", cfg.target_len):
        stored = meta.get("train_target_len")
        if stored:
            cfg = dataclasses.replace(cfg, target_len=int(stored))
    prepared = prepare_from_config(cfg)
    if len(prepared.label_names) != model.classes:
        raise UsageError(
            f"checkpoint expects {model.classes} classes, dataset has {len(prepared.label_names)}"
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    chash = write_config(cfg, cfg.out_dir)
    report = evaluate(model, list(prepared.test), batch_size=cfg.batch_size)
    write_eval_outputs(
        report, list(prepared.test), model, cfg.out_dir, chash, cfg.seed,
        prepared.label_names,
    )
    print(render_confusion(report.confusion, prepared.label_names))
    print(format_report(report, prepared.label_names))
    return 0


def cmd_gradcheck(args) -> int:
    report = gradcheck(
        layers=args.layers, hidden=args.hidden, classes=args.classes,
        steps=args.steps, seed=args.seed, tolerance=args.tolerance,
        batch_size=args.batch, input_dim=args.input_dim,
    )
    for name in sorted(report.per_tensor):
        print(f"{name}: {report.per_tensor[name]:.3e}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: worst {report.worst_tensor} = {report.worst_error:.3e} "
          f"(tolerance {report.tolerance:.1e})")
    return 0 if report.passed else 3


def cmd_ablate(args) -> int:
    cfg = build_run_config(args)
    masks = [tok.strip() for tok in args.masks.split(";") if tok.strip()]
    if not masks:
        raise UsageError("--masks must list at least one feature-group spec")
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for spec in masks:
        sub = dataclasses.replace(
            cfg, mask=spec,
            out_dir=os.path.join(cfg.out_dir, spec.replace(",", "+") or "none"),
        )
        os.makedirs(sub.out_dir, exist_ok=True)
        chash = write_config(sub, sub.out_dir)
        prepared = prepare_from_config(sub)
        model = DlstmModel.init_random(
            sub.hidden, sub.layers, len(prepared.label_names), seed=sub.seed,
        )
        tconf = TrainConfig(
            learning_rate=sub.lr, epochs=sub.epochs, batch_size=sub.batch_size,
            seed=sub.seed, shuffle=sub.shuffle,
            clip_norm=sub.clip_norm if sub.clip_norm > 0 else None,
        )
        model, history = train(
            model, list(prepared.train), list(prepared.test), tconf,
            checkpoint_dir=sub.out_dir, config_hash=chash,
        )
        write_history(history, sub.out_dir, chash, sub.seed)
        report = evaluate(model, list(prepared.test), batch_size=sub.batch_size)
        write_eval_outputs(
            report, list(prepared.test), model, sub.out_dir, chash, sub.seed,
            prepared.label_names,
        )
        macro = report.macro_f1 if report.macro_f1 is not None else float("nan")
        rows.append((spec, report.accuracy, macro))
        print(f"{spec}: accuracy {report.accuracy:.4f}, macro f1 {macro:.4f}")
    with open(os.path.join(cfg.out_dir, "ablation.csv"), "w") as fh:
        fh.write("mask,accuracy,macro_f1\n")
        for spec, acc, macro in rows:
            fh.write(f"{spec},{acc!r},{macro!r}\n")
    print(f"wrote {os.path.join(cfg.out_dir, 'ablation.csv')}")
    return 0


def _read_metrics_csv(path):
    if not os.path.isfile(path):
        raise UsageError(f"metrics file not found: {path}")
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None or not rows:
        raise UsageError(f"{path} holds no metric rows")
    cols = {name: [] for name in header}
    for row in rows:
        for name, tok in zip(header, row):
            cols[name].append(float(tok) if tok else float("nan"))
    return cols


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    # stable element ids + no embedded date => byte-reproducible SVGs
    matplotlib.rcParams["svg.hashsalt"] = "gesturelstm"
    import matplotlib.pyplot as plt

    cols = _read_metrics_csv(args.metrics)
    out = args.out
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    epochs = cols["epoch"]
    ax_loss.plot(epochs, cols["train_loss_per_seq"], label="train")
    if not all(np.isnan(cols["val_loss_per_seq"])):
        ax_loss.plot(epochs, cols["val_loss_per_seq"], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss per sequence")
    ax_loss.legend()
    ax_acc.plot(epochs, cols["train_acc"], label="train")
    if not all(np.isnan(cols["val_acc"])):
        ax_acc.plot(epochs, cols["val_acc"], label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(sub):
    sub.add_argument("--config", help="flat key=value configuration file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override any config key (repeatable, applied last)")
    sub.add_argument("--data-root", dest="data_root")
    sub.add_argument("--data-format", dest="data_format", choices=("native", "shrec"))
    sub.add_argument("--out-dir", dest="out_dir")
    sub.add_argument("--seed", dest="seed", type=int)
    sub.add_argument("--epochs", dest="epochs", type=int)
    sub.add_argument("--target-len", dest="target_len", type=int)
    sub.add_argument("--mask", dest="mask")
    sub.add_argument("--hidden", dest="hidden", type=int)
    sub.add_argument("--layers", dest="layers", type=int)
    sub.add_argument("--cache-dir", dest="cache_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gesturelstm",
                     description="skeleton-feature gesture sequence classifier")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("extract", help="extract + resample features to an npz")
    _add_config_flags(p)
    p.add_argument("--out", help="output npz path (default <out_dir>/features.npz)")
    p.set_defaults(func=cmd_extract)

    p = subs.add_parser("train", help="train a classifier and write run artifacts")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("gradcheck", help="compare analytic and numeric gradients")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=2)
    p.add_argument("--input-dim", type=int, default=31)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = subs.add_parser("ablate", help="train/evaluate once per feature-group mask")
    _add_config_flags(p)
    p.add_argument("--masks", required=True,
                   help="semicolon-separated mask specs, e.g. 'all;omega;omega,beta'")
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("plot", help="plot loss/accuracy curves from metrics.csv")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BadFilterParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NanLoss as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except GestureError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
