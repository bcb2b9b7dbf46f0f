#!/usr/bin/env python3
"""End-to-end demo: synthesise a small corpus, train, and report accuracy.

Runs the full pipeline at desk scale (a few minutes on one core): skeleton
features -> extrema-guided resampling -> stacked recurrent classifier ->
confusion matrix. Useful as a smoke test and as a template for real runs.
"""

import argparse
import sys
import tempfile
import time

sys.path.insert(0, "src")

from gesturelstm.dataset_io import load_shrec, prepare, subset_by_label
from gesturelstm.evaluation import evaluate, format_report, render_confusion
from gesturelstm.network import DlstmModel
from gesturelstm.synth import write_synthetic_shrec
from gesturelstm.training import TrainConfig, train


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-root", default="",
                    help="existing benchmark tree; default: synthesise one")
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--target-len", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as scratch:
        root = args.data_root
        if not root:
            root = scratch
            write_synthetic_shrec(root, gestures=max(args.classes, 4),
                                  subjects=4, essais_train=5, essais_test=3,
                                  seed=11)
        split = load_shrec(root, granularity=14)
        if args.classes < len(split.label_names):
            split = subset_by_label(split, range(args.classes))
        prep = prepare(split, target_len=args.target_len, seed=args.seed)
        print(f"{len(prep.train)} train / {len(prep.test)} test sequences, "
              f"{len(prep.label_names)} classes")

        model = DlstmModel.init_random(args.hidden, args.layers,
                                       len(prep.label_names), seed=args.seed)
        config = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                             batch_size=16, seed=args.seed)
        start = time.perf_counter()
        model, history = train(model, list(prep.train), list(prep.test), config)
        print(f"trained {args.epochs} epochs in {time.perf_counter() - start:.1f}s; "
              f"final train acc {history[-1].train_acc:.3f}")

        report = evaluate(model, list(prep.test))
        print()
        print(render_confusion(report.confusion, prep.label_names))
        print()
        print(format_report(report, prep.label_names))
    return 0


if __name__ == "__main__":
    sys.exit(main())
