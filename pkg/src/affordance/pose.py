"""17-joint 2D pose representation and the scale/deformation codec.

Coordinate convention: x grows rightward, y grows downward, origin at the
image top-left (pixel convention).

The joint schema is a fixed, ordered 17-name list. Indices are stable and
shared by every artifact (dataset files, vocabularies, checkpoints, the
annotation UI), so any change is a format break.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidPoseError, InvalidScaleError, ShapeError

JOINT_NAMES = (
    "head_top",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "chest",
    "spine",
    "pelvis",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
)
N_JOINTS = len(JOINT_NAMES)

# Skeleton edges, used for rendering only. Pairs of joint indices.
BONES = (
    (0, 1), (1, 8), (8, 9), (9, 10),
    (1, 2), (2, 3), (3, 4),
    (1, 5), (5, 6), (6, 7),
    (10, 11), (11, 12), (12, 13),
    (10, 14), (14, 15), (15, 16),
)


def joint_schema_hash() -> str:
    """Short hash identifying the joint ordering; embedded in file headers."""
    return hashlib.sha256(",".join(JOINT_NAMES).encode()).hexdigest()[:16]


def _validated_joints(joints, *, what: str) -> np.ndarray:
    a = np.asarray(joints, dtype=np.float64)
    if a.shape != (N_JOINTS, 2):
        raise InvalidPoseError(f"{what} needs shape ({N_JOINTS}, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidPoseError(f"{what} contains non-finite coordinates")
    a = a.copy()
    a.setflags(write=False)
    return a


def _bbox(joints: np.ndarray):
    lo = joints.min(axis=0)
    hi = joints.max(axis=0)
    return lo, hi


class Pose:
    """An absolute pose: 17 (x, y) joints in pixel coordinates.

    Degenerate poses (zero bounding-box width or height) are rejected at
    construction so downstream scale math never divides by zero.
    """

    __slots__ = ("joints",)

    def __init__(self, joints):
        a = _validated_joints(joints, what="Pose")
        lo, hi = _bbox(a)
        if hi[0] - lo[0] <= 0.0 or hi[1] - lo[1] <= 0.0:
            raise InvalidPoseError("degenerate bounding box (zero width or height)")
        self.joints = a

    @property
    def bbox_center(self) -> np.ndarray:
        lo, hi = _bbox(self.joints)
        return (lo + hi) / 2.0

    @property
    def bbox_height(self) -> float:
        lo, hi = _bbox(self.joints)
        return float(hi[1] - lo[1])

    @property
    def bbox_width(self) -> float:
        lo, hi = _bbox(self.joints)
        return float(hi[0] - lo[0])

    def translated(self, dx: float, dy: float) -> "Pose":
        return Pose(self.joints + np.array([dx, dy]))

    def scaled(self, factor: float) -> "Pose":
        """Uniform scale about the bounding-box center."""
        if factor <= 0:
            raise InvalidScaleError(f"scale must be positive, got {factor}")
        c = self.bbox_center
        return Pose((self.joints - c) * factor + c)

    def __repr__(self):
        c = self.bbox_center
        return f"Pose(center=({c[0]:.1f}, {c[1]:.1f}), h={self.bbox_height:.1f})"


class NormalizedPose:
    """A pose in the canonical frame: unit bounding-box height, bbox center
    at the origin, aspect ratio preserved."""

    __slots__ = ("joints",)

    _TOL = 1e-9

    def __init__(self, joints):
        a = _validated_joints(joints, what="NormalizedPose")
        lo, hi = _bbox(a)
        w, h = hi - lo
        center = (lo + hi) / 2.0
        if w <= 0.0:
            raise InvalidPoseError("degenerate bounding box (zero width)")
        if abs(h - 1.0) > self._TOL:
            raise InvalidPoseError(f"bounding-box height must be 1.0, got {h!r}")
        if abs(center[0]) > self._TOL or abs(center[1]) > self._TOL:
            raise InvalidPoseError(f"bounding box must be centered at the origin, center={center}")
        self.joints = a

    @property
    def bbox_height(self) -> float:
        lo, hi = _bbox(self.joints)
        return float(hi[1] - lo[1])

    @property
    def bbox_width(self) -> float:
        lo, hi = _bbox(self.joints)
        return float(hi[0] - lo[0])

    def __repr__(self):
        return f"NormalizedPose(w={self.bbox_width:.3f})"


def normalize(pose: Pose | NormalizedPose) -> NormalizedPose:
    """Map a pose into the canonical frame (unit height, origin-centered).

    Idempotent: a pose already in the canonical frame is returned unchanged,
    bit for bit.
    """
    a = pose.joints
    lo, hi = _bbox(a)
    center = (lo + hi) / 2.0
    h = hi[1] - lo[1]
    if h <= 0.0:
        raise InvalidPoseError("degenerate bounding box (zero height)")
    if abs(h - 1.0) <= 1e-12 and abs(center[0]) <= 1e-12 and abs(center[1]) <= 1e-12:
        return NormalizedPose(a)
    out = (a - center) / h
    # second pass kills the rounding residue so the class invariants hold
    lo, hi = _bbox(out)
    out = (out - (lo + hi) / 2.0) / (hi[1] - lo[1])
    return NormalizedPose(out)


def shape_distance(a_xy: np.ndarray, b_xy: np.ndarray) -> float:
    """Translation- and scale-invariant shape distance between two joint sets.

    Both shapes are centered on their centroid and scaled to unit Frobenius
    norm; the second is then aligned to the first by the least-squares uniform
    scale (constrained nonnegative: rotations and reflections, including the
    point reflection a negative scale would give, are deliberately NOT removed
    so that e.g. upright and inverted configurations stay far apart). Returns
    the root-mean-square per-point residual, symmetric in its arguments.
    """
    a = np.asarray(a_xy, dtype=np.float64)
    b = np.asarray(b_xy, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
        raise ShapeError(f"shapes must match and be (n, 2); got {a.shape} and {b.shape}")
    n = a.shape[0]
    if np.array_equal(a, b):
        return 0.0
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    na = np.linalg.norm(ac)
    nb = np.linalg.norm(bc)
    if na == 0.0 or nb == 0.0:
        raise InvalidPoseError("degenerate shape (all points coincide)")
    ah = ac / na
    bh = bc / nb
    s = max(float(np.sum(ah * bh)), 0.0)
    # residual computed elementwise: algebraically sqrt(1 - cos^2) but far
    # better conditioned when the shapes are near-identical
    resid = np.linalg.norm(ah - s * bh)
    return float(resid / np.sqrt(n))


def procrustes_distance(a, b) -> float:
    """Shape distance between two poses (Pose or NormalizedPose).

    Zero iff the poses are identical up to translation and uniform positive
    scale; symmetric; invariant to translating or uniformly scaling either
    argument.
    """
    return shape_distance(a.joints, b.joints)


class ScaleDeform:
    """The 36-number encoding of a pose relative to a vocabulary center:
    height scale, width scale, and 17 per-joint (dx, dy) offsets in pixels.

    Flattening order is (s_h, s_w, dx_1, dy_1, ..., dx_17, dy_17).
    """

    __slots__ = ("s_h", "s_w", "deform")

    DIM = 2 + 2 * N_JOINTS  # 36

    def __init__(self, s_h: float, s_w: float, deform):
        if not (np.isfinite(s_h) and np.isfinite(s_w)):
            raise InvalidScaleError("scales must be finite")
        if s_h <= 0.0 or s_w <= 0.0:
            raise InvalidScaleError(f"scales must be positive, got s_h={s_h}, s_w={s_w}")
        d = np.asarray(deform, dtype=np.float64)
        if d.shape != (N_JOINTS, 2):
            raise ShapeError(f"deform needs shape ({N_JOINTS}, 2), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidScaleError("deform contains non-finite values")
        d = d.copy()
        d.setflags(write=False)
        self.s_h = float(s_h)
        self.s_w = float(s_w)
        self.deform = d

    def flatten(self) -> np.ndarray:
        return np.concatenate(([self.s_h, self.s_w], self.deform.ravel()))

    @classmethod
    def from_flat(cls, vec) -> "ScaleDeform":
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (cls.DIM,):
            raise ShapeError(f"flat vector needs shape ({cls.DIM},), got {v.shape}")
        return cls(v[0], v[1], v[2:].reshape(N_JOINTS, 2))

    def __repr__(self):
        return f"ScaleDeform(s_h={self.s_h:.2f}, s_w={self.s_w:.2f})"


def _place_center(center: NormalizedPose, s_h: float, s_w: float, anchor) -> np.ndarray:
    ax, ay = float(anchor[0]), float(anchor[1])
    return center.joints * np.array([s_w, s_h]) + np.array([ax, ay])


def encode(pose: Pose, center: NormalizedPose, anchor) -> ScaleDeform:
    """Express `pose` as scales plus per-joint offsets from `center`.

    The center is scaled anisotropically by (s_w, s_h) and pinned so its
    bounding-box center sits on `anchor`; the deformations are whatever
    per-joint offsets remain.
    """
    s_h = pose.bbox_height / center.bbox_height
    s_w = pose.bbox_width / center.bbox_width
    placed = _place_center(center, s_h, s_w, anchor)
    return ScaleDeform(s_h, s_w, pose.joints - placed)


def decode(sd: ScaleDeform, center: NormalizedPose, anchor) -> Pose:
    """Exact inverse of :func:`encode` for the same center and anchor."""
    placed = _place_center(center, sd.s_h, sd.s_w, anchor)
    return Pose(placed + sd.deform)


def pose_euclidean_distance(a, b) -> float:
    """Mean per-joint euclidean distance between two poses, in pixels."""
    return float(np.mean(np.linalg.norm(a.joints - b.joints, axis=1)))
