"""Empty-scene filtering, retrieval matching, and optical-flow pose transfer.

The detectors behind the filter cascade (face, person, emptiness) are
pluggable scorers; the bundled implementation reads precomputed sidecar
files. Flow fields are inputs, never estimated here. Flow composition is
forward: the composed field maps a point in the first frame through every
field in order, so transferred joints land in the last frame's coordinates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInputError,
    IncompleteScoringError,
    InvalidFeatureError,
    ShapeError,
)
from .pose import Pose
from .records import AffordanceRecord


@dataclass(frozen=True)
class FrameScore:
    """Per-frame detector outputs: largest face size (px), best person
    detection confidence, and empty-scene classifier probability."""

    frame_id: str
    face_size: float
    person_score: float
    emptiness: float

    def __post_init__(self):
        if not (np.isfinite(self.face_size) and np.isfinite(self.person_score)
                and np.isfinite(self.emptiness)):
            raise ShapeError(f"scores for {self.frame_id!r} must be finite")
        if self.face_size < 0 or self.person_score < 0:
            raise ShapeError(f"face/person scores for {self.frame_id!r} must be >= 0")
        if not 0.0 <= self.emptiness <= 1.0:
            raise ShapeError(f"emptiness for {self.frame_id!r} must be in [0, 1]")


@dataclass(frozen=True)
class FilterThresholds:
    tau_face: float
    tau_person: float
    tau_empty: float


def filter_empty(frame_ids, scorer, thresholds: FilterThresholds) -> list[str]:
    """Frames passing the cascade: face below tau_face AND person confidence
    below tau_person AND emptiness above tau_empty, in input order.

    `scorer` maps a frame id to a FrameScore (mapping or callable).
    """
    get = scorer.get if hasattr(scorer, "get") else lambda fid: scorer(fid)
    passed = []
    for fid in frame_ids:
        score = get(fid)
        if score is None:
            raise IncompleteScoringError(f"no scores for frame {fid!r}")
        if (score.face_size < thresholds.tau_face
                and score.person_score < thresholds.tau_person
                and score.emptiness > thresholds.tau_empty):
            passed.append(fid)
    return passed


@dataclass(frozen=True)
class HardNegativeSelection:
    selected: tuple       # frame ids, highest score first
    subset: tuple         # (frame_id, corrected_label) pairs for retraining


def hard_negative_refresh(predictions, top_n: int, labels) -> HardNegativeSelection:
    """Pick the top_n most confident predictions for manual labeling and pair
    them with their corrected labels as a retraining subset.

    `predictions` is (frame_id, score) pairs; `labels` maps frame id to the
    human verdict. Retraining itself is the scorer's job.
    """
    preds = list(predictions)
    if top_n > len(preds):
        warnings.warn(f"top_n={top_n} exceeds {len(preds)} predictions; truncating")
        top_n = len(preds)
    ranked = sorted(preds, key=lambda p: (-p[1], p[0]))[:top_n]
    selected = tuple(fid for fid, _ in ranked)
    subset = tuple((fid, labels[fid]) for fid in selected if fid in labels)
    return HardNegativeSelection(selected=selected, subset=subset)


def global_match(query: np.ndarray, corpus, top_k: int) -> list[tuple[str, float]]:
    """Rank corpus frames by cosine similarity to the query feature vector.

    `corpus` is (frame_id, vector) pairs. Descending similarity, ties broken
    by ascending frame id.
    """
    q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0:
        raise InvalidFeatureError("query feature has zero norm")
    sims = []
    for fid, vec in corpus:
        v = np.asarray(vec, dtype=np.float64)
        vn = np.linalg.norm(v)
        if vn == 0:
            raise InvalidFeatureError(f"corpus feature {fid!r} has zero norm")
        sims.append((fid, float(q @ v / (qn * vn))))
    sims.sort(key=lambda p: (-p[1], p[0]))
    return sims[:top_k]


class FlowField:
    """Dense per-pixel displacement (dx, dy) for one frame pair."""

    __slots__ = ("field",)

    def __init__(self, field):
        a = np.asarray(field, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 2:
            raise ShapeError(f"flow field must be (H, W, 2), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ShapeError("flow field contains non-finite values")
        self.field = a

    @property
    def shape(self):
        return self.field.shape[:2]

    @classmethod
    def identity(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))


def sample_flow(field: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinearly interpolate displacements at float (x, y) points, clamping
    samples to the field border."""
    h, w = field.shape[:2]
    x = np.clip(points[:, 0], 0.0, w - 1.0)
    y = np.clip(points[:, 1], 0.0, h - 1.0)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = field[y0, x0] * (1 - fx) + field[y0, x1] * fx
    bot = field[y1, x0] * (1 - fx) + field[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def accumulate_flow(flows) -> FlowField:
    """Compose an ordered list of flow fields into one displacement field.

    A point p moves to p + f1(p), then on through each later field sampled at
    its current (bilinear) position; the result stores the total displacement
    per starting pixel. Identity fields compose to the identity.
    """
    flows = list(flows)
    if not flows:
        raise EmptyInputError("need at least one flow field")
    h, w = flows[0].shape
    for f in flows:
        if f.shape != (h, w):
            raise ShapeError(f"flow dimensions differ: {f.shape} vs {(h, w)}")
    ys, xs = np.mgrid[0:h, 0:w]
    start = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    pos = start.copy()
    for f in flows:
        pos = pos + sample_flow(f.field, pos)
    total = (pos - start).reshape(h, w, 2)
    return FlowField(total)


def transfer_pose(pose: Pose, field: FlowField, *, scene_id: str, show: str,
                  record_id: str, target_size, image_ref: str | None = None,
                  source: str = "local") -> AffordanceRecord:
    """Warp a detected pose through a composed field into the target frame.

    Joints are displaced by the bilinearly interpolated field; the anchor is
    the warped pose's bounding-box center. Joints landing outside the target
    flags the hypothesis rather than failing — annotation decides its fate.
    """
    displaced = pose.joints + sample_flow(field.field, pose.joints)
    warped = Pose(displaced)
    tw, th = target_size
    out = bool(np.any(displaced[:, 0] < 0) or np.any(displaced[:, 0] >= tw)
               or np.any(displaced[:, 1] < 0) or np.any(displaced[:, 1] >= th))
    return AffordanceRecord(
        record_id=record_id,
        scene_id=scene_id,
        show=show,
        anchor=tuple(warped.bbox_center),
        pose=warped,
        image_ref=image_ref,
        source=source,
        status="hypothesis",
        out_of_frame=out,
    )
