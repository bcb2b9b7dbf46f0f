"""Parametric synthetic hand-gesture corpora.

Builds kinematically plausible 21-point hands (palm centre plus four
joints per finger) animated by four motion archetypes — oscillating
curl, palm translation, finger spread, and a held distinct pose — with
per-subject scale/phase variation and coordinate noise.  Writers emit
both the public SHREC-style directory layout (22-joint skeleton lines,
train/test list files) and the native capture format, so the full
ingestion, resampling, and training stack can be exercised end to end
without any external data.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .dataset_io import SHREC_FRAME_RATE, save_native
from .skeleton import PALM_INDEX, HandFrame, RawSequence

# Resting direction of each finger in the palm plane (radians from +y).
_BASE_ANGLES = np.array([-0.72, -0.22, 0.0, 0.20, 0.42])
# How strongly each finger participates when the hand fans open.
_SPREAD_GAIN = np.array([1.6, 0.8, 0.0, -0.8, -1.5])
_SEGMENTS = np.array([0.28, 0.24, 0.20])
_FINGER_SCALE = np.array([0.80, 1.00, 1.06, 1.00, 0.84])

ARCHETYPES = ("curl_wave", "translate", "spread", "pose")

# Native label inventory: 30 raw classes, including both confusable
# pairs that downstream processing merges.
NATIVE_LABELS = tuple("0123456789") + tuple("ABCDEFGHIJKLMNOPQR") + ("V", "W")
NATIVE_RATE = 60.0

_TRANSLATE_DIRS = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.7, 0.7, 0.0],
    [0.6, 0.0, -0.8],
    [-0.7, 0.5, 0.5],
])
_POSE_PATTERNS = np.array([
    [1, 0, 0, 1, 1],
    [0, 1, 1, 0, 0],
    [1, 1, 0, 0, 1],
    [0, 0, 1, 1, 0],
    [1, 0, 1, 0, 1],
], dtype=float)


def hand_points(palm, curls, spread_scale, scale=1.0):
    """21 canonical points for a palm position, per-finger curl angles
    (radians), and a fan-open factor."""
    points = np.empty((21, 3))
    angles = _BASE_ANGLES + 0.22 * spread_scale * _SPREAD_GAIN
    for f in range(5):
        d = np.array([math.sin(angles[f]), math.cos(angles[f]), 0.0])
        pos = palm + scale * 0.35 * d
        points[4 * f] = pos
        for seg in range(3):
            bend = curls[f] * (seg + 1)
            step = math.cos(bend) * d + math.sin(bend) * np.array([0.0, 0.0, -1.0])
            pos = pos + scale * _FINGER_SCALE[f] * _SEGMENTS[seg] * step
            points[4 * f + 1 + seg] = pos
    points[PALM_INDEX] = palm
    return points


def _motion(archetype, variant, progress, phase, duration):
    """Curls, spread factor, and palm offset at a normalised time."""
    base_curl = np.full(5, 0.25)
    spread = 0.0
    offset = np.zeros(3)
    if archetype == 0:  # oscillating whole-hand curl
        freq = 1.2 + 0.35 * (variant % 3)
        wave = 0.5 + 0.5 * math.sin(2.0 * math.pi * freq * progress + phase)
        curls = 0.12 + 0.55 * wave * np.ones(5)
    elif archetype == 1:  # palm glides along a line
        curls = base_curl
        direction = _TRANSLATE_DIRS[variant % len(_TRANSLATE_DIRS)]
        offset = (0.9 * progress) * direction / np.linalg.norm(direction)
    elif archetype == 2:  # fingers fan open and closed
        freq = 1.0 + 0.3 * (variant % 3)
        spread = math.sin(2.0 * math.pi * freq * progress + phase)
        curls = np.full(5, 0.18)
    else:  # held pose, distinct finger pattern
        pattern = _POSE_PATTERNS[variant % len(_POSE_PATTERNS)]
        curls = 0.10 + 0.95 * pattern
    return curls, spread, offset


def synthetic_raw_sequence(
    archetype: int,
    variant: int,
    length: int,
    rate: float,
    rng: np.random.Generator,
    noise: float = 0.003,
) -> RawSequence:
    scale = 0.9 + 0.2 * rng.random()
    phase = 2.0 * math.pi * rng.random()
    curl_bias = 0.08 * (rng.random() - 0.5)
    palm0 = np.array([0.0, 0.0, 0.5]) + 0.05 * rng.standard_normal(3)
    duration = (length - 1) / rate if length > 1 else 0.0
    frames = []
    for i in range(length):
        progress = i / max(length - 1, 1)
        curls, spread, offset = _motion(archetype, variant, progress, phase, duration)
        points = hand_points(palm0 + offset, np.clip(curls + curl_bias, 0.02, 1.45), spread, scale)
        points = points + noise * scale * rng.standard_normal((21, 3))
        frames.append(HandFrame.from_array(points, timestamp=i / rate))
    return RawSequence(frames=tuple(frames), duration=duration)


# ---------------------------------------------------------------------------
# Corpus writers
# ---------------------------------------------------------------------------

def write_synthetic_shrec(
    root,
    gestures: int = 4,
    fingers=(1,),
    subjects: int = 3,
    essais_train: int = 4,
    essais_test: int = 2,
    seed: int = 0,
    min_len: int = 20,
    max_len: int = 170,
) -> None:
    """Emit a SHREC-layout corpus: skeleton files plus the two list files.

    Gesture g uses motion archetype (g-1) mod 4 with variant (g-1) div 4,
    so the first four gestures are the four distinct archetypes.
    """
    os.makedirs(root, exist_ok=True)
    train_rows, test_rows = [], []
    for g in range(1, gestures + 1):
        for f in fingers:
            for s in range(1, subjects + 1):
                for e in range(1, essais_train + essais_test + 1):
                    rng = np.random.default_rng(
                        np.random.SeedSequence([seed, g, f, s, e])
                    )
                    length = int(rng.integers(min_len, max_len + 1))
                    seq = synthetic_raw_sequence(
                        (g - 1) % 4, (g - 1) // 4, length, SHREC_FRAME_RATE, rng,
                    )
                    path = os.path.join(
                        root, f"gesture_{g}", f"finger_{f}", f"subject_{s}", f"essai_{e}",
                    )
                    os.makedirs(path, exist_ok=True)
                    _write_shrec_sequence(os.path.join(path, "skeletons_world.txt"), seq)
                    row = f"{g} {f} {s} {e} {g} {(g - 1) * 2 + f} {length}"
                    (train_rows if e <= essais_train else test_rows).append(row)
    with open(os.path.join(root, "train_gestures.txt"), "w") as fh:
        fh.write("\n".join(train_rows) + "\n")
    with open(os.path.join(root, "test_gestures.txt"), "w") as fh:
        fh.write("\n".join(test_rows) + "\n")


def _write_shrec_sequence(path, sequence: RawSequence) -> None:
    # 22 joints per line: wrist, palm, then base..tip for each finger.
    with open(path, "w") as fh:
        for frame in sequence.frames:
            canonical = frame.as_array()
            palm = canonical[PALM_INDEX]
            wrist = palm - np.array([0.0, 0.45, 0.0])
            joints = np.vstack([wrist, palm, canonical[:20]])
            fh.write(" ".join(f"{v:.6f}" for v in joints.ravel()))
            fh.write("\n")


def write_synthetic_native(
    root,
    labels=None,
    subjects: int = 16,
    trials: int = 1,
    seed: int = 0,
    min_len: int = 30,
    max_len: int = 120,
) -> None:
    """Emit native captures under root/subject_XX/<label>_<trial>.gestcap."""
    if labels is None:
        labels = NATIVE_LABELS
    os.makedirs(root, exist_ok=True)
    for s in range(subjects):
        subject = f"subject_{s:02d}"
        subject_dir = os.path.join(root, subject)
        os.makedirs(subject_dir, exist_ok=True)
        for idx, label in enumerate(labels):
            for trial in range(trials):
                rng = np.random.default_rng(np.random.SeedSequence([seed, s, idx, trial]))
                length = int(rng.integers(min_len, max_len + 1))
                seq = synthetic_raw_sequence(idx % 4, idx // 4, length, NATIVE_RATE, rng)
                save_native(
                    os.path.join(subject_dir, f"{label}_{trial}.gestcap"),
                    seq, subject=subject, label=label, rate=NATIVE_RATE,
                )


def synthetic_feature_set(
    sequences: int,
    classes: int,
    length: int,
    seed: int = 0,
    spread: float = 2.0,
    noise: float = 0.3,
):
    """Directly synthesised feature-space sequences (no skeleton stage):
    class k orbits its own random anchor, which makes a small model able
    to separate the classes quickly.  Returns (list[LabeledSequence],
    class count)."""
    from .features import FEATURE_DIM, GestureSequence
    from .training import LabeledSequence

    rng = np.random.default_rng(np.random.SeedSequence([seed, 97]))
    anchors = spread * rng.standard_normal((classes, FEATURE_DIM))
    items = []
    for i in range(sequences):
        label = i % classes
        t = np.linspace(0.0, 1.0, length)[:, None]
        wobble = 0.25 * np.sin(2 * np.pi * (t + rng.random()))
        data = anchors[label] + wobble + noise * rng.standard_normal((length, FEATURE_DIM))
        items.append(LabeledSequence(sequence=GestureSequence(data=data, label=label), label=label))
    return items, classes
