import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordance.errors import InvalidPoseError, InvalidScaleError, ShapeError
from affordance.pose import (
    N_JOINTS,
    NormalizedPose,
    Pose,
    ScaleDeform,
    decode,
    encode,
    normalize,
    pose_euclidean_distance,
    procrustes_distance,
    shape_distance,
)
from affordance.synthetic import random_pose


def test_pose_requires_17_joints():
    with pytest.raises(InvalidPoseError):
        Pose(np.zeros((5, 2)))


def test_pose_rejects_nonfinite():
    joints = np.random.default_rng(0).uniform(0, 10, (N_JOINTS, 2))
    joints[3, 1] = np.nan
    with pytest.raises(InvalidPoseError):
        Pose(joints)


def test_pose_rejects_degenerate_bbox():
    joints = np.zeros((N_JOINTS, 2))
    joints[:, 0] = np.arange(N_JOINTS)  # width > 0, height == 0
    with pytest.raises(InvalidPoseError):
        Pose(joints)


def test_normalize_divides_by_bbox_height():
    rng = np.random.default_rng(1)
    pose = random_pose(rng)
    h = pose.bbox_height
    c = pose.bbox_center
    out = normalize(pose)
    np.testing.assert_allclose(out.joints, (pose.joints - c) / h, atol=1e-9)
    assert abs(out.bbox_height - 1.0) < 1e-9


def test_normalize_idempotent_bit_exact():
    rng = np.random.default_rng(2)
    pose = random_pose(rng)
    once = normalize(pose)
    twice = normalize(once)
    assert np.array_equal(once.joints, twice.joints)


def test_normalize_removes_translation():
    rng = np.random.default_rng(3)
    pose = random_pose(rng)
    moved = pose.translated(50.0, 30.0)
    np.testing.assert_allclose(normalize(pose).joints, normalize(moved).joints, atol=1e-9)


def test_normalized_pose_invariants_enforced():
    rng = np.random.default_rng(4)
    with pytest.raises(InvalidPoseError):
        NormalizedPose(random_pose(rng).joints)  # not unit height / centered


# -- shape distance ---------------------------------------------------------

# frozen from the brute-force grid-search oracle over (scale >= 0, tx, ty)
# against the unit-normalized first shape (notes/oracle_procrustes.py)
TOY_A = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
TOY_B = np.array([[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]])
TOY_EXPECTED = 0.11514154661795953


def test_shape_distance_matches_alignment_oracle():
    assert shape_distance(TOY_A, TOY_B) == pytest.approx(TOY_EXPECTED, abs=1e-9)
    assert shape_distance(TOY_B, TOY_A) == pytest.approx(TOY_EXPECTED, abs=1e-9)


def test_procrustes_identity_is_zero():
    rng = np.random.default_rng(5)
    pose = random_pose(rng)
    assert procrustes_distance(pose, pose) == 0.0


def test_procrustes_similarity_aligned_is_zero():
    rng = np.random.default_rng(6)
    a = random_pose(rng)
    b = a.scaled(2.0).translated(17.0, -4.0)
    assert procrustes_distance(a, b) < 1e-9


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_procrustes_symmetric_and_invariant(seed):
    rng = np.random.default_rng(seed)
    a = random_pose(rng)
    b = random_pose(rng)
    d_ab = procrustes_distance(a, b)
    d_ba = procrustes_distance(b, a)
    assert abs(d_ab - d_ba) < 1e-9
    scale = float(rng.uniform(0.2, 5.0))
    moved = b.scaled(scale).translated(float(rng.uniform(-100, 100)),
                                       float(rng.uniform(-100, 100)))
    assert abs(procrustes_distance(a, moved) - d_ab) < 1e-9
    a_moved = a.scaled(scale).translated(-3.0, 9.0)
    assert abs(procrustes_distance(a_moved, b) - d_ab) < 1e-9


def test_shape_distance_rejects_mismatched_shapes():
    with pytest.raises(ShapeError):
        shape_distance(TOY_A, np.zeros((4, 2)))


# -- scale/deformation codec --------------------------------------------------

def test_scale_deform_rejects_nonpositive_scale():
    with pytest.raises(InvalidScaleError):
        ScaleDeform(0.0, 1.0, np.zeros((N_JOINTS, 2)))
    with pytest.raises(InvalidScaleError):
        ScaleDeform(1.0, -2.0, np.zeros((N_JOINTS, 2)))


def test_scale_deform_flatten_roundtrip():
    rng = np.random.default_rng(7)
    sd = ScaleDeform(2.5, 0.75, rng.normal(size=(N_JOINTS, 2)))
    flat = sd.flatten()
    assert flat.shape == (36,)
    assert flat[0] == 2.5 and flat[1] == 0.75
    back = ScaleDeform.from_flat(flat)
    np.testing.assert_array_equal(back.deform, sd.deform)


def test_encode_unit_height_center_gives_pixel_height_scale():
    rng = np.random.default_rng(8)
    center = normalize(random_pose(rng))
    pose = random_pose(rng)
    target_h = 150.0
    pose = Pose(pose.joints * (target_h / pose.bbox_height))
    sd = encode(pose, center, (40.0, 60.0))
    assert sd.s_h == pytest.approx(150.0, rel=1e-12)


def test_encode_exact_match_gives_zero_deform():
    rng = np.random.default_rng(9)
    center = normalize(random_pose(rng))
    anchor = (33.0, 77.0)
    placed = Pose(center.joints * np.array([4.0, 2.0]) + np.array(anchor))
    sd = encode(placed, center, anchor)
    np.testing.assert_allclose(sd.deform, 0.0, atol=1e-9)
    assert sd.s_h == pytest.approx(2.0)
    assert sd.s_w == pytest.approx(4.0)


def test_decode_zero_deform_places_scaled_center_at_anchor():
    rng = np.random.default_rng(10)
    center = normalize(random_pose(rng))
    sd = ScaleDeform(1.0, 1.0, np.zeros((N_JOINTS, 2)))
    anchor = (100.0, 50.0)
    pose = decode(sd, center, anchor)
    np.testing.assert_allclose(pose.bbox_center, anchor, atol=1e-9)
    assert pose.bbox_height == pytest.approx(1.0)


def test_decode_scale_linearity():
    rng = np.random.default_rng(11)
    center = normalize(random_pose(rng))
    zero = np.zeros((N_JOINTS, 2))
    one = decode(ScaleDeform(1.0, 1.0, zero), center, (0.0, 0.0))
    two = decode(ScaleDeform(2.0, 1.0, zero), center, (0.0, 0.0))
    assert two.bbox_height == pytest.approx(2.0 * one.bbox_height, rel=1e-12)


def test_codec_roundtrip_1000_random_poses():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(1000):
        pose = random_pose(rng, span=float(rng.uniform(10, 2000)))
        center = normalize(random_pose(rng))
        anchor = (float(rng.uniform(-500, 500)), float(rng.uniform(-500, 500)))
        back = decode(encode(pose, center, anchor), center, anchor)
        worst = max(worst, float(np.abs(back.joints - pose.joints).max()))
    assert worst < 1e-9


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_codec_roundtrip_property(seed):
    rng = np.random.default_rng(seed)
    pose = random_pose(rng)
    center = normalize(random_pose(rng))
    anchor = (float(rng.uniform(-100, 100)), float(rng.uniform(-100, 100)))
    back = decode(encode(pose, center, anchor), center, anchor)
    assert np.abs(back.joints - pose.joints).max() < 1e-9


def test_pose_euclidean_distance_translation():
    rng = np.random.default_rng(13)
    pose = random_pose(rng)
    assert pose_euclidean_distance(pose, pose.translated(3.0, 4.0)) == pytest.approx(5.0)
