"""Extrema-driven temporal resampling of feature tracks to a fixed length.

Fourteen scalar tracks are watched per sequence: the ten finger joint
angles, the three inter-finger angles, and phi, the magnitude of the
palm-center displacement.  Each track is smoothed with a Savitzky-Golay
filter and its relative extrema mark candidate instants.  The candidate
set is then grown or thinned to exactly the target length:

* exactly target: keep all candidates;
* too few: top up with uniform random draws from the unmarked instants
  (sequences shorter than the target repeat their final instant);
* too many: give each track a quota proportional to its share of marks
  (largest-remainder rounding), draw that many from each track's marks,
  then backfill random leftover candidates until the target is reached.

All randomness comes from one explicit seed so plans are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .errors import BadFilterParams, EmptySequence, PlanMismatch, TrackTooShort
from .features import (
    FEATURE_DIM,
    BETA_SLICE,
    GAMMA_SLICE,
    OMEGA_SLICE,
    PALM_DISP_SLICE,
    FeatureVector,
    GestureSequence,
    feature_matrix,
)

DEFAULT_WINDOW = 9
DEFAULT_ORDER = 3

#: Track ids in canonical order; quota ties are broken in this order.
TRACK_IDS = (
    "omega0", "omega1", "omega2", "omega3", "omega4",
    "beta0", "beta1", "beta2", "beta3", "beta4",
    "gamma1", "gamma2", "gamma3",
    "phi",
)


@dataclass(frozen=True)
class FeatureTrack:
    """One scalar feature's value at every raw instant."""

    track_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)


def tracks_from_features(features: list[FeatureVector] | np.ndarray) -> list[FeatureTrack]:
    """Build the 14 watched tracks from per-instant feature vectors."""
    matrix = features if isinstance(features, np.ndarray) else feature_matrix(features)
    if matrix.ndim != 2 or matrix.shape[1] != FEATURE_DIM:
        raise ValueError(f"expected (L, {FEATURE_DIM}) features, got {matrix.shape}")
    columns = {}
    for i in range(5):
        columns[f"omega{i}"] = matrix[:, OMEGA_SLICE][:, i]
        columns[f"beta{i}"] = matrix[:, BETA_SLICE][:, i]
    for i in range(3):
        columns[f"gamma{i + 1}"] = matrix[:, GAMMA_SLICE][:, i]
    columns["phi"] = np.linalg.norm(matrix[:, PALM_DISP_SLICE], axis=1)
    return [FeatureTrack(tid, columns[tid]) for tid in TRACK_IDS]


def smooth_values(values: np.ndarray, window: int, order: int) -> np.ndarray:
    """Savitzky-Golay smoothing of one track.

    Interior points get the least-squares local-polynomial fit; each
    boundary is handled by fitting the edge window once and evaluating
    that polynomial at the boundary positions.
    """
    if window % 2 == 0 or window <= order or order < 0:
        raise BadFilterParams(f"window={window} must be odd and greater than order={order}")
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        raise TrackTooShort(f"track length {len(values)} is below window {window}")
    return savgol_filter(values, window_length=window, polyorder=order, mode="interp")


def smooth(track: FeatureTrack, window: int = DEFAULT_WINDOW, order: int = DEFAULT_ORDER) -> FeatureTrack:
    return FeatureTrack(track.track_id, smooth_values(track.values, window, order))


def _adaptive_smooth(values: np.ndarray, window: int, order: int) -> np.ndarray:
    # Short sequences shrink the window to the largest odd length that
    # fits; when even that cannot exceed the order, smoothing is a no-op.
    length = len(values)
    eff = min(window, length if length % 2 == 1 else length - 1)
    if eff <= order:
        return np.asarray(values, dtype=np.float64)
    return smooth_values(values, eff, order)


def find_extrema(track: FeatureTrack) -> set[int]:
    """Instants where the track attains an interior relative max or min.

    A plateau (run of equal values) flanked on both sides by strictly
    lower, or both strictly higher, values counts once at its midpoint.
    Runs touching either end of the track are not interior and never count.
    """
    values = track.values
    n = len(values)
    extrema: set[int] = set()
    start = 0
    while start < n:
        stop = start
        while stop + 1 < n and values[stop + 1] == values[start]:
            stop += 1
        if start > 0 and stop < n - 1:
            before, after = values[start - 1], values[stop + 1]
            if before < values[start] > after or before > values[start] < after:
                extrema.add((start + stop) // 2)
        start = stop + 1
    return extrema


@dataclass(frozen=True)
class SamplePlan:
    """Resolved choice of instants for one sequence.

    ``selected`` always holds exactly ``target_len`` ascending instants;
    repeats appear only when the raw sequence is shorter than the target.
    ``quotas`` is filled only on the thinning branch.
    """

    raw_length: int
    target_len: int
    seed: int
    candidates: tuple[int, ...]
    per_track: dict[str, tuple[int, ...]]
    quotas: dict[str, int] | None
    selected: tuple[int, ...]


def _largest_remainder_quotas(sizes: dict[str, int], target: int) -> dict[str, int]:
    total = sum(sizes.values())
    quotas = {tid: (target * n) // total for tid, n in sizes.items()}
    leftover = target - sum(quotas.values())
    # Distribute remaining units to the largest fractional parts (exact
    # integer remainders, common denominator); ties are broken by
    # canonical track order (dict order here).
    position = {tid: k for k, tid in enumerate(sizes)}
    order = sorted(sizes, key=lambda tid: (-((target * sizes[tid]) % total), position[tid]))
    for tid in order[:leftover]:
        quotas[tid] += 1
    return quotas


def build_plan(
    tracks: list[FeatureTrack],
    target_len: int,
    seed: int,
    window: int = DEFAULT_WINDOW,
    order: int = DEFAULT_ORDER,
) -> SamplePlan:
    """Pick exactly ``target_len`` instants guided by the tracks' extrema."""
    if not tracks or len(tracks[0]) == 0:
        raise EmptySequence("cannot build a plan over an empty sequence")
    length = len(tracks[0])
    if any(len(t) != length for t in tracks):
        raise ValueError("all tracks must have the same length")
    if target_len < 1:
        raise ValueError("target_len must be at least 1")

    rng = np.random.default_rng(seed)
    per_track: dict[str, tuple[int, ...]] = {}
    for track in tracks:
        smoothed = FeatureTrack(track.track_id, _adaptive_smooth(track.values, window, order))
        per_track[track.track_id] = tuple(sorted(find_extrema(smoothed)))
    candidates = tuple(sorted(set().union(*map(set, per_track.values())) if per_track else set()))

    quotas: dict[str, int] | None = None
    if len(candidates) == target_len:
        selected = list(candidates)
    elif len(candidates) < target_len:
        need = target_len - len(candidates)
        pool = sorted(set(range(length)) - set(candidates))
        if len(pool) >= need:
            extra = rng.choice(pool, size=need, replace=False)
            selected = sorted(set(candidates) | set(int(i) for i in extra))
        else:
            # Fewer raw instants than requested: take everything and pad
            # by repeating the final instant.
            selected = list(range(length)) + [length - 1] * (target_len - length)
    else:
        sizes = {tid: len(marks) for tid, marks in per_track.items() if marks}
        quotas = _largest_remainder_quotas(sizes, target_len)
        quotas.update({tid: 0 for tid in per_track if tid not in quotas})
        picked: set[int] = set()
        for tid in (t.track_id for t in tracks):
            count = quotas.get(tid, 0)
            if count > 0:
                draw = rng.choice(per_track[tid], size=count, replace=False)
                picked.update(int(i) for i in draw)
        missing = target_len - len(picked)
        if missing > 0:
            leftovers = sorted(set(candidates) - picked)
            backfill = rng.choice(leftovers, size=missing, replace=False)
            picked.update(int(i) for i in backfill)
        selected = sorted(picked)

    return SamplePlan(
        raw_length=length,
        target_len=target_len,
        seed=int(seed),
        candidates=candidates,
        per_track=per_track,
        quotas=quotas,
        selected=tuple(int(i) for i in selected),
    )


def apply_plan(features: list[FeatureVector] | np.ndarray, plan: SamplePlan) -> GestureSequence:
    """Gather the planned instants into a fixed-length gesture sequence."""
    matrix = features if isinstance(features, np.ndarray) else feature_matrix(features)
    if matrix.shape[0] != plan.raw_length:
        raise PlanMismatch(
            f"plan was built over {plan.raw_length} instants but got {matrix.shape[0]}"
        )
    return GestureSequence(data=matrix[list(plan.selected)])


def resample_sequence(
    features: list[FeatureVector] | np.ndarray,
    target_len: int,
    seed: int,
    window: int = DEFAULT_WINDOW,
    order: int = DEFAULT_ORDER,
) -> GestureSequence:
    """Convenience composition: tracks, plan, gather."""
    matrix = features if isinstance(features, np.ndarray) else feature_matrix(features)
    plan = build_plan(tracks_from_features(matrix), target_len, seed, window=window, order=order)
    return apply_plan(matrix, plan)
