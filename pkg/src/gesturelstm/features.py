"""Per-instant 31-component feature vectors from consecutive hand frames.

Flat layout (length 31, fixed):

    [ 0.. 4]  omega_0..omega_4   distal joint angle per finger (rad)
    [ 5.. 9]  beta_0..beta_4     proximal joint angle per finger (rad)
    [10..24]  (u_l, v_l, z_l)    fingertip displacement per finger (mm)
    [25..27]  (u_5, v_5, z_5)    palm-center displacement (mm)
    [28..30]  gamma_1..gamma_3   angles between adjacent fingers (rad)

omega is the angle between segments BC and CD, beta between AB and BC.
A finger's direction for gamma is fingertip minus finger base (D - A);
gamma covers index/middle, middle/ring and ring/pinky.  Displacements
are current minus previous raw frame, and zero at the first instant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBone
from .skeleton import (
    EPSILON_LEN,
    FINGERS,
    Finger,
    HandFrame,
    Joint,
    RawSequence,
    bone_vectors,
)

FEATURE_DIM = 31

OMEGA_SLICE = slice(0, 5)
BETA_SLICE = slice(5, 10)
TIP_DISP_SLICE = slice(10, 25)
PALM_DISP_SLICE = slice(25, 28)
GAMMA_SLICE = slice(28, 31)
DISP_SLICE = slice(10, 28)


def joint_angle(p: np.ndarray, q: np.ndarray) -> float:
    """Angle in [0, pi] between two bone vectors.

    The cosine is clamped to [-1, 1] so floating-point drift on collinear
    vectors cannot produce NaN.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ < EPSILON_LEN or nq < EPSILON_LEN:
        raise DegenerateBone("cannot take the angle of a near-zero vector")
    cos = np.clip(np.dot(p, q) / (np_ * nq), -1.0, 1.0)
    return float(np.arccos(cos))


def finger_angles(frame: HandFrame, finger: Finger) -> tuple[float, float]:
    """(omega, beta) for one finger: distal and proximal joint angles."""
    ab, bc, cd = bone_vectors(frame, finger)
    return joint_angle(bc, cd), joint_angle(ab, bc)


def _finger_direction(frame: HandFrame, finger: Finger) -> np.ndarray:
    direction = frame.point(finger, Joint.D) - frame.point(finger, Joint.A)
    if np.linalg.norm(direction) < EPSILON_LEN:
        raise DegenerateBone(f"{finger.name} direction (tip minus base) is near zero")
    return direction


def intra_finger_angles(frame: HandFrame) -> tuple[float, float, float]:
    """Angles between adjacent finger directions: index/middle, middle/ring, ring/pinky."""
    dirs = [_finger_direction(frame, f) for f in (Finger.INDEX, Finger.MIDDLE, Finger.RING, Finger.PINKY)]
    return (
        joint_angle(dirs[0], dirs[1]),
        joint_angle(dirs[1], dirs[2]),
        joint_angle(dirs[2], dirs[3]),
    )


def displacements(prev: HandFrame | None, curr: HandFrame) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis fingertip and palm motion since the previous frame.

    Returns (tip_disp, palm_disp) with shapes (5, 3) and (3,).  The first
    instant of a sequence has no predecessor and reports zero motion.
    """
    if prev is None:
        return np.zeros((5, 3)), np.zeros(3)
    tips = np.stack([curr.fingertip(f) - prev.fingertip(f) for f in FINGERS])
    return tips, curr.palm_center - prev.palm_center


@dataclass(frozen=True)
class FeatureVector:
    """One instant's features, grouped; flattens to the fixed 31-slot layout."""

    omega: np.ndarray      # (5,) radians in [0, pi]
    beta: np.ndarray       # (5,) radians in [0, pi]
    tip_disp: np.ndarray   # (5, 3) mm
    palm_disp: np.ndarray  # (3,) mm
    gamma: np.ndarray      # (3,) radians in [0, pi]

    def flatten(self) -> np.ndarray:
        out = np.empty(FEATURE_DIM)
        out[OMEGA_SLICE] = self.omega
        out[BETA_SLICE] = self.beta
        out[TIP_DISP_SLICE] = np.asarray(self.tip_disp).reshape(15)
        out[PALM_DISP_SLICE] = self.palm_disp
        out[GAMMA_SLICE] = self.gamma
        return out

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "FeatureVector":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (FEATURE_DIM,):
            raise ValueError(f"expected shape (31,), got {flat.shape}")
        return cls(
            omega=flat[OMEGA_SLICE].copy(),
            beta=flat[BETA_SLICE].copy(),
            tip_disp=flat[TIP_DISP_SLICE].reshape(5, 3).copy(),
            palm_disp=flat[PALM_DISP_SLICE].copy(),
            gamma=flat[GAMMA_SLICE].copy(),
        )


@dataclass(frozen=True)
class FeatureMask:
    """Feature-group toggles for ablation runs.

    Disabled groups are zero-filled rather than dropped, so the input
    width stays 31 and one network shape serves every ablation.
    """

    omega: bool = True
    beta: bool = True
    gamma: bool = True
    disp: bool = True

    def __post_init__(self):
        if not (self.omega or self.beta or self.gamma or self.disp):
            raise ValueError("at least one feature group must be enabled")

    GROUP_NAMES = ("omega", "beta", "gamma", "disp")

    @classmethod
    def from_spec(cls, spec: str) -> "FeatureMask":
        """Parse e.g. "omega,beta" or "all" into a mask."""
        spec = spec.strip()
        if spec in ("all", ""):
            return cls()
        groups = {part.strip() for part in spec.split(",") if part.strip()}
        unknown = groups - set(cls.GROUP_NAMES)
        if unknown:
            raise ValueError(f"unknown feature group(s): {sorted(unknown)}")
        return cls(**{name: name in groups for name in cls.GROUP_NAMES})

    def to_spec(self) -> str:
        enabled = [name for name in self.GROUP_NAMES if getattr(self, name)]
        return ",".join(enabled) if len(enabled) < 4 else "all"

    def apply(self, flat: np.ndarray) -> np.ndarray:
        """Zero-fill disabled groups of a flat (..., 31) feature array."""
        out = np.array(flat, dtype=np.float64, copy=True)
        if not self.omega:
            out[..., OMEGA_SLICE] = 0.0
        if not self.beta:
            out[..., BETA_SLICE] = 0.0
        if not self.gamma:
            out[..., GAMMA_SLICE] = 0.0
        if not self.disp:
            out[..., DISP_SLICE] = 0.0
        return out


@dataclass(frozen=True)
class GestureSequence:
    """A fixed-length feature matrix (length, 31), optionally labeled."""

    data: np.ndarray
    label: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != FEATURE_DIM:
            raise ValueError(f"expected (T, {FEATURE_DIM}) data, got {data.shape}")
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]


def frame_features(prev: HandFrame | None, curr: HandFrame) -> FeatureVector:
    """Features of one instant given its predecessor (None at t=0)."""
    omega = np.empty(5)
    beta = np.empty(5)
    for f in FINGERS:
        omega[f], beta[f] = finger_angles(curr, f)
    gamma = np.array(intra_finger_angles(curr))
    tip_disp, palm_disp = displacements(prev, curr)
    return FeatureVector(omega=omega, beta=beta, tip_disp=tip_disp, palm_disp=palm_disp, gamma=gamma)


def extract_features(seq: RawSequence, mask: FeatureMask | None = None) -> list[FeatureVector]:
    """One FeatureVector per frame, in frame order, with the mask applied.

    DegenerateBone errors are re-raised with the frame index attached.
    """
    mask = mask or FeatureMask()
    vectors = []
    prev = None
    for idx, frame in enumerate(seq.frames):
        try:
            vec = frame_features(prev, frame)
        except DegenerateBone as exc:
            raise DegenerateBone(f"frame {idx}: {exc}") from exc
        vectors.append(FeatureVector.from_flat(mask.apply(vec.flatten())))
        prev = frame
    return vectors


def feature_matrix(vectors: list[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into a (len, 31) float matrix."""
    return np.stack([v.flatten() for v in vectors]) if vectors else np.empty((0, FEATURE_DIM))
