import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_frame
from gesturelstm.errors import (
    DegenerateBone,
    EmptySequence,
    MissingPoint,
    NonFiniteCoordinate,
)
from gesturelstm.skeleton import (
    EPSILON_LEN,
    FINGERS,
    JOINTS,
    PALM_INDEX,
    POINT_COUNT,
    Finger,
    HandFrame,
    Joint,
    RawSequence,
    bone_vectors,
    point_index,
    validate_frame,
)


def test_canonical_point_order():
    # thumb A..D first, pinky D at 19, palm centre last
    assert point_index(Finger.THUMB, Joint.A) == 0
    assert point_index(Finger.THUMB, Joint.D) == 3
    assert point_index(Finger.INDEX, Joint.A) == 4
    assert point_index(Finger.MIDDLE, Joint.B) == 9
    assert point_index(Finger.RING, Joint.C) == 14
    assert point_index(Finger.PINKY, Joint.D) == 19
    assert PALM_INDEX == 20
    assert POINT_COUNT == 21
    seen = {point_index(f, j) for f in FINGERS for j in JOINTS}
    assert seen == set(range(20))


def test_frame_round_trip(rng):
    frame = make_frame(rng, timestamp=1.25)
    coords = frame.as_array()
    assert coords.shape == (21, 3)
    back = HandFrame.from_array(coords, timestamp=frame.timestamp)
    assert np.array_equal(back.as_array(), coords)
    assert back.timestamp == 1.25
    for f in FINGERS:
        for j in JOINTS:
            assert np.array_equal(back.point(f, j), coords[point_index(f, j)])
    assert np.array_equal(back.palm_center, coords[PALM_INDEX])


@given(arrays(np.float64, (21, 3), elements=st.floats(-100, 100, allow_nan=False)))
def test_round_trip_any_coords(coords):
    frame = HandFrame.from_array(coords)
    assert np.array_equal(frame.as_array(), coords)


def test_points_read_only(rng):
    frame = make_frame(rng)
    with pytest.raises(ValueError):
        frame.point(Finger.THUMB, Joint.A)[0] = 99.0
    with pytest.raises(ValueError):
        frame.palm_center[1] = 99.0


def test_fingertip_is_joint_d(rng):
    frame = make_frame(rng)
    for f in FINGERS:
        assert np.array_equal(frame.fingertip(f), frame.point(f, Joint.D))


def test_validate_frame_accepts_valid(rng):
    frame = make_frame(rng)
    assert validate_frame(frame) is frame


def test_validate_frame_missing_point(rng):
    frame = make_frame(rng)
    points = dict(frame.points)
    del points[(Finger.RING, Joint.B)]
    broken = HandFrame(points=points, palm_center=frame.palm_center)
    with pytest.raises(MissingPoint):
        validate_frame(broken)


def test_validate_frame_extra_key(rng):
    frame = make_frame(rng)
    points = dict(frame.points)
    points[("extra", "key")] = np.zeros(3)
    with pytest.raises(MissingPoint):
        validate_frame(HandFrame(points=points, palm_center=frame.palm_center))


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_validate_frame_non_finite(rng, bad):
    frame = make_frame(rng)
    points = dict(frame.points)
    coords = points[(Finger.INDEX, Joint.C)].copy()
    coords[2] = bad
    points[(Finger.INDEX, Joint.C)] = coords
    with pytest.raises(NonFiniteCoordinate):
        validate_frame(HandFrame(points=points, palm_center=frame.palm_center))


def test_validate_frame_non_finite_palm(rng):
    frame = make_frame(rng)
    palm = frame.palm_center.copy()
    palm[0] = np.nan
    with pytest.raises(NonFiniteCoordinate):
        validate_frame(HandFrame(points=dict(frame.points), palm_center=palm))


def test_bone_vectors_directions(rng):
    frame = make_frame(rng)
    ab, bc, cd = bone_vectors(frame, Finger.MIDDLE)
    assert np.allclose(ab, frame.point(Finger.MIDDLE, Joint.B) - frame.point(Finger.MIDDLE, Joint.A))
    assert np.allclose(bc, frame.point(Finger.MIDDLE, Joint.C) - frame.point(Finger.MIDDLE, Joint.B))
    assert np.allclose(cd, frame.point(Finger.MIDDLE, Joint.D) - frame.point(Finger.MIDDLE, Joint.C))


def test_bone_vectors_degenerate(rng):
    frame = make_frame(rng)
    points = dict(frame.points)
    # collapse C onto B: BC length ~ 0
    points[(Finger.THUMB, Joint.C)] = points[(Finger.THUMB, Joint.B)] + 0.1 * EPSILON_LEN
    broken = HandFrame(points=points, palm_center=frame.palm_center)
    with pytest.raises(DegenerateBone):
        bone_vectors(broken, Finger.THUMB)
    # other fingers unaffected
    bone_vectors(broken, Finger.INDEX)


def test_raw_sequence_empty():
    with pytest.raises(EmptySequence):
        RawSequence(frames=(), duration=0.0)


def test_raw_sequence_tensor(rng):
    frames = tuple(make_frame(rng, timestamp=i * 0.1) for i in range(4))
    seq = RawSequence(frames=frames, duration=0.3)
    assert len(seq) == 4
    tensor = seq.point_tensor()
    assert tensor.shape == (4, 21, 3)
    for i, frame in enumerate(frames):
        assert np.array_equal(tensor[i], frame.as_array())
