#!/usr/bin/env python3
"""Generate a synthetic gesture corpus for demos and tests.

Writes either the benchmark-style tree (gesture_*/finger_*/subject_*/essai_*/
skeletons_world.txt plus train/test list files) or a directory of native
.gestcap captures. The motions are kinematically plausible hand trajectories,
so the whole pipeline — angles, smoothing, resampling, training — exercises
realistically shaped data without shipping any recordings.
"""

import argparse
import sys

sys.path.insert(0, "src")

from gesturelstm.synth import write_synthetic_native, write_synthetic_shrec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", help="directory to create the corpus in")
    ap.add_argument("--format", choices=("shrec", "native"), default="shrec")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gestures", type=int, default=8,
                    help="gesture classes (shrec layout)")
    ap.add_argument("--subjects", type=int, default=6)
    ap.add_argument("--trials", type=int, default=2,
                    help="captures per subject and label (native layout)")
    args = ap.parse_args(argv)

    if args.format == "shrec":
        write_synthetic_shrec(
            args.out, gestures=args.gestures, subjects=args.subjects,
            essais_train=4, essais_test=2, seed=args.seed,
        )
    else:
        write_synthetic_native(
            args.out, subjects=args.subjects, trials=args.trials, seed=args.seed,
        )
    print(f"wrote {args.format} corpus to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
