"""Hand-skeleton data model.

A hand is modeled as 21 points: four points per finger plus the palm
center.  Per finger the points are named A, B, C, D walking from the
proximal end of the modeled chain out to the fingertip, so the segments
are AB, BC and CD.  For the four long fingers AB/BC/CD are the proximal,
intermediate and distal phalanges; for the thumb the chain starts one
bone earlier, so AB is the metacarpal, BC the proximal phalanx and CD
the distal phalanx.  The wrist is not part of the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DegenerateBone, EmptySequence, MissingPoint, NonFiniteCoordinate

#: Minimum bone length (mm) below which angles are undefined.
EPSILON_LEN = 1e-6


class Finger(IntEnum):
    THUMB = 0
    INDEX = 1
    MIDDLE = 2
    RING = 3
    PINKY = 4


class Joint(IntEnum):
    """Chain position within a finger; A is proximal-most, D the fingertip."""

    A = 0
    B = 1
    C = 2
    D = 3


FINGERS = tuple(Finger)
JOINTS = tuple(Joint)

#: Canonical flat ordering of the 21 points: thumb A..D, index A..D,
#: middle A..D, ring A..D, pinky A..D, palm center last.
PALM_INDEX = 20
POINT_COUNT = 21


def point_index(finger: Finger, joint: Joint) -> int:
    """Row of (finger, joint) in the canonical 21x3 layout."""
    return int(finger) * 4 + int(joint)


def _as_coord(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class HandFrame:
    """3D positions (mm) of the 21 hand points at one time instant.

    ``points`` maps (Finger, Joint) to a 3-vector; ``palm_center`` is the
    central point of the palm.  Instances are immutable after construction.
    """

    points: dict[tuple[Finger, Joint], np.ndarray]
    palm_center: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        coerced = {key: _as_coord(pos) for key, pos in self.points.items()}
        object.__setattr__(self, "points", coerced)
        object.__setattr__(self, "palm_center", _as_coord(self.palm_center))

    def point(self, finger: Finger, joint: Joint) -> np.ndarray:
        try:
            return self.points[(finger, joint)]
        except KeyError:
            raise MissingPoint(f"frame has no point ({finger.name}, {joint.name})") from None

    def fingertip(self, finger: Finger) -> np.ndarray:
        return self.point(finger, Joint.D)

    def as_array(self) -> np.ndarray:
        """All 21 points as a (21, 3) array in canonical order."""
        out = np.empty((POINT_COUNT, 3))
        for f in FINGERS:
            for j in JOINTS:
                out[point_index(f, j)] = self.point(f, j)
        out[PALM_INDEX] = self.palm_center
        return out

    @classmethod
    def from_array(cls, coords: np.ndarray, timestamp: float = 0.0) -> "HandFrame":
        """Rebuild a frame from the canonical (21, 3) layout."""
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (POINT_COUNT, 3):
            raise ValueError(f"expected (21, 3) coordinates, got {coords.shape}")
        points = {
            (f, j): coords[point_index(f, j)] for f in FINGERS for j in JOINTS
        }
        return cls(points=points, palm_center=coords[PALM_INDEX], timestamp=timestamp)


@dataclass(frozen=True)
class RawSequence:
    """An ordered run of hand frames spanning ``duration`` seconds."""

    frames: tuple[HandFrame, ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise EmptySequence("a raw sequence needs at least one frame")
        # single-frame captures legitimately span zero seconds
        if not self.duration >= 0:
            raise ValueError("sequence duration must be non-negative and finite")

    def __len__(self) -> int:
        return len(self.frames)

    def point_tensor(self) -> np.ndarray:
        """Stacked (len, 21, 3) coordinates in canonical point order."""
        return np.stack([f.as_array() for f in self.frames])


def validate_frame(frame: HandFrame) -> HandFrame:
    """Check the 21-point invariants and return the frame unchanged.

    Raises MissingPoint if any finger point is absent and
    NonFiniteCoordinate if any coordinate is NaN or infinite.
    """
    for f in FINGERS:
        for j in JOINTS:
            if (f, j) not in frame.points:
                raise MissingPoint(f"frame missing point ({f.name}, {j.name})")
    extra = set(frame.points) - {(f, j) for f in FINGERS for j in JOINTS}
    if extra:
        raise MissingPoint(f"frame has unexpected point keys: {sorted(extra)}")
    for f in FINGERS:
        for j in JOINTS:
            if not np.isfinite(frame.points[(f, j)]).all():
                raise NonFiniteCoordinate(f"non-finite coordinate at ({f.name}, {j.name})")
    if not np.isfinite(frame.palm_center).all():
        raise NonFiniteCoordinate("non-finite coordinate at palm center")
    return frame


def bone_vectors(frame: HandFrame, finger: Finger) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Segment vectors (AB, BC, CD) of one finger, tip-ward point minus base-ward.

    Raises DegenerateBone when a segment is shorter than EPSILON_LEN, since
    such a segment has no usable direction.
    """
    a = frame.point(finger, Joint.A)
    b = frame.point(finger, Joint.B)
    c = frame.point(finger, Joint.C)
    d = frame.point(finger, Joint.D)
    ab, bc, cd = b - a, c - b, d - c
    for name, vec in (("AB", ab), ("BC", bc), ("CD", cd)):
        if np.linalg.norm(vec) < EPSILON_LEN:
            raise DegenerateBone(f"{finger.name} segment {name} has near-zero length")
    return ab, bc, cd
