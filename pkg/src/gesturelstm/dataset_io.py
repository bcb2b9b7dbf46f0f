"""Dataset ingestion: public SHREC-layout corpora, the native capture
format, label merging, subject-based splits, and end-to-end preparation
(feature extraction + adaptive resampling) with an optional on-disk
cache.

Native captures are plain text (``GESTCAP v1``): four header lines
(version tag, subject, label, rate) followed by one line per frame
holding a timestamp and 63 coordinates — the 21 canonical points in
order thumb A-D, index A-D, middle A-D, ring A-D, pinky A-D, palm
centre last, each as x y z.  Floats are written with ``repr`` so a
read-back is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadHeader,
    BadLabel,
    EmptyTestSet,
    MalformedFrame,
    MissingListFile,
    NonFiniteCoordinate,
)
from .features import FeatureMask, GestureSequence, extract_features, feature_matrix
from .sampling import DEFAULT_ORDER, DEFAULT_WINDOW, apply_plan, build_plan, tracks_from_features
from .skeleton import HandFrame, RawSequence
from .training import LabeledSequence

GESTCAP_MAGIC = "GESTCAP v1"
SHREC_JOINTS_PER_FRAME = 22
SHREC_FRAME_RATE = 30.0
# Two pairs of native classes are indistinguishable in practice and get
# merged, leaving 28 classes out of the raw 30.
NATIVE_MERGE_RULES = {"6": "6W", "W": "6W", "2": "2V", "V": "2V"}
NATIVE_TRAIN_SUBJECTS = 14


@dataclass(frozen=True)
class RawSample:
    """One recorded gesture plus the bookkeeping needed for splits."""

    sequence: RawSequence
    label: int
    subject: str
    path: str


@dataclass(frozen=True)
class SplitData:
    train: tuple[RawSample, ...]
    test: tuple[RawSample, ...]
    label_names: tuple[str, ...]


@dataclass(frozen=True)
class NativeCapture:
    subject: str
    label: str
    rate: float
    sequence: RawSequence
    path: str = ""


# ---------------------------------------------------------------------------
# SHREC-layout corpora
# ---------------------------------------------------------------------------
#
# root/gesture_<g>/finger_<f>/subject_<s>/essai_<e>/skeletons_world.txt
# plus train_gestures.txt / test_gestures.txt with lines
#   <gesture> <finger> <subject> <trial> <label14> <label28> <length>
# Each skeleton line holds 22 joints (x y z): wrist, palm, then four
# joints per finger (base, first, second, tip) for thumb through pinky.
# The wrist is dropped; the palm becomes the palm centre; base..tip map
# onto the four canonical joints.  Timestamps assume 30 fps.


def shrec_frame(values, timestamp: float = 0.0) -> HandFrame:
    values = np.asarray(values, dtype=np.float64)
    if values.size != SHREC_JOINTS_PER_FRAME * 3:
        raise MalformedFrame(
            f"expected {SHREC_JOINTS_PER_FRAME * 3} values per skeleton line, got {values.size}"
        )
    if not np.all(np.isfinite(values)):
        raise NonFiniteCoordinate("skeleton line holds a non-finite coordinate")
    joints = values.reshape(SHREC_JOINTS_PER_FRAME, 3)
    points = np.empty((21, 3))
    points[0:20] = joints[2:22]   # five fingers, base..tip == A..D
    points[20] = joints[1]        # palm centre; joints[0] (wrist) is unused
    return HandFrame.from_array(points, timestamp=timestamp)


def load_shrec_sequence(path) -> RawSequence:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                values = [float(tok) for tok in line.split()]
            except ValueError as exc:
                raise MalformedFrame(f"{path}:{lineno + 1}: {exc}") from None
            try:
                frames.append(shrec_frame(values, timestamp=len(frames) / SHREC_FRAME_RATE))
            except (MalformedFrame, NonFiniteCoordinate) as exc:
                raise type(exc)(f"{path}:{lineno + 1}: {exc}") from None
    duration = (len(frames) - 1) / SHREC_FRAME_RATE if len(frames) > 1 else 0.0
    return RawSequence(frames=tuple(frames), duration=duration)


def _read_list_file(path):
    if not os.path.isfile(path):
        raise MissingListFile(f"list file not found: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 7:
                raise MalformedFrame(f"{path}:{lineno + 1}: expected 7 fields, got {len(parts)}")
            try:
                rows.append(tuple(int(tok) for tok in parts))
            except ValueError as exc:
                raise MalformedFrame(f"{path}:{lineno + 1}: {exc}") from None
    return rows


def load_shrec(root, granularity: int = 14) -> SplitData:
    """Load a SHREC-layout corpus with its published train/test lists."""
    if granularity not in (14, 28):
        raise BadLabel(f"granularity must be 14 or 28, got {granularity}")
    label_col = 4 if granularity == 14 else 5

    def load_split(list_name):
        samples = []
        for row in _read_list_file(os.path.join(root, list_name)):
            g, f, s, e = row[0], row[1], row[2], row[3]
            label = row[label_col] - 1  # columns are 1-based
            if not 0 <= label < granularity:
                raise BadLabel(f"{list_name}: label {row[label_col]} outside 1..{granularity}")
            path = os.path.join(
                root, f"gesture_{g}", f"finger_{f}", f"subject_{s}", f"essai_{e}",
                "skeletons_world.txt",
            )
            samples.append(RawSample(
                sequence=load_shrec_sequence(path),
                label=label,
                subject=f"subject_{s}",
                path=path,
            ))
        return tuple(samples)

    names = tuple(f"class_{k + 1:02d}" for k in range(granularity))
    return SplitData(
        train=load_split("train_gestures.txt"),
        test=load_split("test_gestures.txt"),
        label_names=names,
    )


def subset_by_label(split: SplitData, keep_labels) -> SplitData:
    """Restrict to a label subset and re-densify the label ids."""
    keep = sorted(set(keep_labels))
    remap = {old: new for new, old in enumerate(keep)}

    def filt(samples):
        return tuple(
            RawSample(sequence=s.sequence, label=remap[s.label], subject=s.subject, path=s.path)
            for s in samples if s.label in remap
        )

    return SplitData(
        train=filt(split.train),
        test=filt(split.test),
        label_names=tuple(split.label_names[k] for k in keep),
    )


# ---------------------------------------------------------------------------
# Native capture format
# ---------------------------------------------------------------------------

def save_native(path, sequence: RawSequence, subject: str, label: str, rate: float) -> None:
    with open(path, "w") as fh:
        fh.write(f"{GESTCAP_MAGIC}\n")
        fh.write(f"subject {subject}\n")
        fh.write(f"label {label}\n")
        fh.write(f"rate {rate!r}\n")
        for frame in sequence.frames:
            coords = frame.as_array().ravel()
            fh.write(repr(float(frame.timestamp)))
            fh.write(" ")
            fh.write(" ".join(repr(float(v)) for v in coords))
            fh.write("\n")


def read_capture(path) -> NativeCapture:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != GESTCAP_MAGIC:
        raise BadHeader(f"{path}: missing '{GESTCAP_MAGIC}' version line")
    header = {}
    for key in ("subject", "label", "rate"):
        idx = len(header) + 1
        if idx >= len(lines) or not lines[idx].startswith(key + " "):
            raise BadHeader(f"{path}: expected '{key} ...' on line {idx + 1}")
        header[key] = lines[idx][len(key) + 1:]
    try:
        rate = float(header["rate"])
    except ValueError:
        raise BadHeader(f"{path}: rate is not a number: {header['rate']!r}") from None

    frames = []
    for lineno, line in enumerate(lines[4:], start=5):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 1 + 21 * 3:
            raise MalformedFrame(f"{path}:{lineno}: expected 64 fields, got {len(parts)}")
        try:
            values = np.array([float(tok) for tok in parts], dtype=np.float64)
        except ValueError as exc:
            raise MalformedFrame(f"{path}:{lineno}: {exc}") from None
        if not np.all(np.isfinite(values)):
            raise NonFiniteCoordinate(f"{path}:{lineno}: non-finite coordinate")
        frames.append(HandFrame.from_array(values[1:].reshape(21, 3), timestamp=values[0]))
    duration = frames[-1].timestamp - frames[0].timestamp if len(frames) > 1 else 0.0
    sequence = RawSequence(frames=tuple(frames), duration=duration)
    return NativeCapture(
        subject=header["subject"], label=header["label"], rate=rate,
        sequence=sequence, path=str(path),
    )


def load_native_dir(root) -> list[NativeCapture]:
    paths = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            if name.endswith(".gestcap"):
                paths.append(os.path.join(dirpath, name))
    return [read_capture(p) for p in sorted(paths)]


def native_split(
    captures,
    merge_rules=None,
    train_subjects: int = NATIVE_TRAIN_SUBJECTS,
) -> SplitData:
    """Merge confusable labels, then split by subject: the first
    ``train_subjects`` subjects in sorted order train, the rest test."""
    if merge_rules is None:
        merge_rules = NATIVE_MERGE_RULES
    merged = [merge_rules.get(cap.label, cap.label) for cap in captures]
    label_names = tuple(sorted(set(merged)))
    ids = {name: k for k, name in enumerate(label_names)}

    subjects = sorted({cap.subject for cap in captures})
    train_set = set(subjects[:train_subjects])
    train, test = [], []
    for cap, name in zip(captures, merged):
        sample = RawSample(
            sequence=cap.sequence, label=ids[name], subject=cap.subject, path=cap.path,
        )
        (train if cap.subject in train_set else test).append(sample)
    split = SplitData(train=tuple(train), test=tuple(test), label_names=label_names)
    validate_subject_disjoint(split.train, split.test)
    return split


def validate_subject_disjoint(train, test) -> None:
    overlap = {s.subject for s in train} & {s.subject for s in test}
    if overlap:
        raise BadLabel(f"subjects appear in both splits: {sorted(overlap)}")


# ---------------------------------------------------------------------------
# Preparation: features + adaptive resampling, with an optional cache
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreparedDataset:
    train: tuple[LabeledSequence, ...]
    test: tuple[LabeledSequence, ...]
    label_names: tuple[str, ...]
    target_len: int
    fingerprint: str


def _sample_fingerprint(samples) -> hashlib._hashlib.HASH:
    digest = hashlib.sha256()
    for s in samples:
        digest.update(str(s.label).encode())
        digest.update(s.subject.encode())
        digest.update(s.sequence.point_tensor().tobytes())
    return digest


def prepare_sample(
    sample: RawSample,
    target_len: int,
    seed: int,
    mask: FeatureMask | None = None,
    window: int = DEFAULT_WINDOW,
    order: int = DEFAULT_ORDER,
) -> LabeledSequence:
    vectors = extract_features(sample.sequence, mask=mask)
    features = feature_matrix(vectors)
    plan = build_plan(
        tracks_from_features(features), target_len, seed=seed, window=window, order=order,
    )
    sampled = apply_plan(features, plan)
    return LabeledSequence(
        sequence=GestureSequence(data=sampled.data, label=sample.label),
        label=sample.label,
    )


def prepare(
    split: SplitData,
    target_len: int,
    seed: int,
    mask: FeatureMask | None = None,
    window: int = DEFAULT_WINDOW,
    order: int = DEFAULT_ORDER,
    cache_dir=None,
) -> PreparedDataset:
    """Turn raw samples into fixed-length labelled feature sequences.

    Each sample gets its own resampling seed derived from the master
    seed, its split, and its index, so preparation is deterministic and
    independent of batch structure.  With ``cache_dir`` set, the result
    is stored in (and reused from) an npz keyed by the raw data and
    every parameter that affects the output.
    """
    mask_spec = mask.to_spec() if mask is not None else "all"
    digest = _sample_fingerprint(list(split.train) + list(split.test))
    digest.update(json.dumps({
        "target_len": target_len, "seed": seed, "mask": mask_spec,
        "window": window, "order": order, "labels": split.label_names,
    }, sort_keys=True).encode())
    fingerprint = digest.hexdigest()

    cache_path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        cache_path = os.path.join(cache_dir, f"prepared_{fingerprint[:16]}.npz")
        if os.path.isfile(cache_path):
            return _load_cache(cache_path, split.label_names, target_len, fingerprint)

    def build(samples, split_id):
        out = []
        for idx, sample in enumerate(samples):
            child = int(np.random.SeedSequence([seed, split_id, idx]).generate_state(1)[0])
            out.append(prepare_sample(
                sample, target_len, seed=child, mask=mask, window=window, order=order,
            ))
        return tuple(out)

    prepared = PreparedDataset(
        train=build(split.train, 0),
        test=build(split.test, 1),
        label_names=split.label_names,
        target_len=target_len,
        fingerprint=fingerprint,
    )
    if cache_path is not None:
        _save_cache(cache_path, prepared)
    return prepared


def _stack_split(items):
    if not items:
        return np.zeros((0, 0, 0)), np.zeros(0, dtype=np.int64)
    data = np.stack([item.sequence.data for item in items])
    labels = np.array([item.label for item in items], dtype=np.int64)
    return data, labels


def _save_cache(path, prepared: PreparedDataset) -> None:
    train_x, train_y = _stack_split(prepared.train)
    test_x, test_y = _stack_split(prepared.test)
    np.savez(
        path,
        train_x=train_x, train_y=train_y, test_x=test_x, test_y=test_y,
        label_names=np.array(prepared.label_names),
        fingerprint=np.array(prepared.fingerprint),
    )


def _unstack(data, labels):
    return tuple(
        LabeledSequence(sequence=GestureSequence(data=x, label=int(y)), label=int(y))
        for x, y in zip(data, labels)
    )


def _load_cache(path, label_names, target_len, fingerprint) -> PreparedDataset:
    with np.load(path, allow_pickle=False) as blob:
        stored = str(blob["fingerprint"])
        if stored != fingerprint:
            raise BadHeader(f"{path}: cache fingerprint mismatch")
        return PreparedDataset(
            train=_unstack(blob["train_x"], blob["train_y"]),
            test=_unstack(blob["test_x"], blob["test_y"]),
            label_names=tuple(str(n) for n in blob["label_names"]),
            target_len=target_len,
            fingerprint=fingerprint,
        )


def to_eval_sets(prepared: PreparedDataset):
    """Plain lists for the trainer/evaluator."""
    if not prepared.test:
        raise EmptyTestSet("prepared dataset has an empty test split")
    return list(prepared.train), list(prepared.test)
