"""The dataset row: a pose hypothesis attached to a scene location, with its
provenance and annotation status.

Status machine: ``hypothesis`` -> ``accepted`` | ``rejected`` (accept, reject,
or adjust-with-replacement-joints), and ``accepted`` <-> ``adjusted`` (an
accepted pose may be re-adjusted, which also refreshes the anchor to the new
bounding-box center). Nothing leaves ``rejected``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ShapeError, TransitionError
from .pose import Pose

SOURCES = ("global", "local", "manual")
STATUSES = ("hypothesis", "accepted", "rejected", "adjusted")
LABELS = ("positive", "negative")

# statuses whose records feed training and evaluation
USABLE_STATUSES = ("accepted", "adjusted")


@dataclass
class AffordanceRecord:
    record_id: str
    scene_id: str
    show: str
    anchor: tuple
    pose: Pose
    image_ref: str | None = None
    class_id: int | None = None
    source: str = "manual"
    status: str = "hypothesis"
    label: str = "positive"
    out_of_frame: bool = False
    features: np.ndarray | None = None  # (3, F) cached crop features

    def __post_init__(self):
        if not self.record_id or not self.scene_id or not self.show:
            raise ShapeError("record_id, scene_id, and show must be nonempty")
        if self.source not in SOURCES:
            raise ShapeError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.status not in STATUSES:
            raise ShapeError(f"status must be one of {STATUSES}, got {self.status!r}")
        if self.label not in LABELS:
            raise ShapeError(f"label must be one of {LABELS}, got {self.label!r}")
        self.anchor = (float(self.anchor[0]), float(self.anchor[1]))
        if self.features is not None:
            f = np.asarray(self.features, dtype=np.float64)
            if f.ndim != 2 or f.shape[0] != 3:
                raise ShapeError(f"features must be (3, F), got {f.shape}")
            self.features = f

    @property
    def usable(self) -> bool:
        return self.status in USABLE_STATUSES


_TRANSITIONS = {
    "accept": {"hypothesis": "accepted", "adjusted": "accepted"},
    "reject": {"hypothesis": "rejected"},
    "adjust": {"hypothesis": "accepted", "accepted": "adjusted", "adjusted": "adjusted"},
}


def next_status(current: str, action: str) -> str:
    """Status after an annotation action; TransitionError when illegal."""
    allowed = _TRANSITIONS.get(action)
    if allowed is None:
        raise TransitionError(f"unknown action {action!r}")
    if current not in allowed:
        raise TransitionError(f"cannot {action} a record in status {current!r}")
    return allowed[current]


def adjusted_record(record: AffordanceRecord, joints) -> AffordanceRecord:
    """Copy of `record` with replacement joints, the anchor moved to the new
    bounding-box center, stale cached features dropped, and the status
    advanced through the `adjust` transition."""
    pose = Pose(joints)
    status = next_status(record.status, "adjust")
    return replace(
        record,
        pose=pose,
        anchor=tuple(pose.bbox_center),
        status=status,
        features=None,
        out_of_frame=False,
    )
