"""Dataset persistence, splits, and negative-sample synthesis.

The dataset file is newline-delimited JSON with a header line. Records are
serialized in a fixed field order with compact separators, so writing the
same records always produces the same bytes; floats go through ``repr`` and
round-trip exactly, feature blobs are base64 of raw float64.

Header:  {"format": "affordance-dataset", "version": 1,
          "joint_schema_hash": ..., "featurizer_seed": ...}
Record:  {"id": ..., "scene": ..., "show": ..., "image": ...,
          "anchor": [x, y], "joints": [[x, y] * 17], "class": ...,
          "source": ..., "status": ..., "label": ..., "out_of_frame": ...,
          "features": {"dim": F, "data": <b64>} | null}
"""

from __future__ import annotations

import base64
import json
import os

import numpy as np

from .clustering import PoseVocabulary
from .errors import DatasetFormatError, EmptyInputError, InvalidSplitError
from .pose import N_JOINTS, Pose, joint_schema_hash
from .records import AffordanceRecord

FORMAT_NAME = "affordance-dataset"
FORMAT_VERSION = 1


def _features_to_json(features):
    if features is None:
        return None
    f = np.ascontiguousarray(features, dtype=np.float64)
    return {"dim": int(f.shape[1]), "data": base64.b64encode(f.tobytes()).decode()}


def _features_from_json(blob):
    if blob is None:
        return None
    raw = base64.b64decode(blob["data"])
    return np.frombuffer(raw, dtype=np.float64).reshape(3, int(blob["dim"])).copy()


def record_to_json(record: AffordanceRecord) -> str:
    doc = {
        "id": record.record_id,
        "scene": record.scene_id,
        "show": record.show,
        "image": record.image_ref,
        "anchor": [float(record.anchor[0]), float(record.anchor[1])],
        "joints": [[float(x), float(y)] for x, y in record.pose.joints],
        "class": record.class_id,
        "source": record.source,
        "status": record.status,
        "label": record.label,
        "out_of_frame": record.out_of_frame,
        "features": _features_to_json(record.features),
    }
    return json.dumps(doc, separators=(",", ":"))


def record_from_json(doc: dict) -> AffordanceRecord:
    return AffordanceRecord(
        record_id=doc["id"],
        scene_id=doc["scene"],
        show=doc["show"],
        anchor=tuple(doc["anchor"]),
        pose=Pose(doc["joints"]),
        image_ref=doc["image"],
        class_id=None if doc["class"] is None else int(doc["class"]),
        source=doc["source"],
        status=doc["status"],
        label=doc["label"],
        out_of_frame=bool(doc["out_of_frame"]),
        features=_features_from_json(doc["features"]),
    )


def header_line(featurizer_seed: int | None) -> str:
    return json.dumps(
        {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "joint_schema_hash": joint_schema_hash(),
            "featurizer_seed": featurizer_seed,
        },
        separators=(",", ":"),
        sort_keys=True,
    )


def write_dataset(records, path, featurizer_seed: int | None = None) -> None:
    """Serialize records. Writers are exclusive (flock on a `.lock` sidecar);
    the write itself is atomic via temp + fsync + rename, so readers always
    see a complete file."""
    import fcntl

    records = list(records)
    seen = set()
    for r in records:
        if r.record_id in seen:
            raise DatasetFormatError(0, f"duplicate record id {r.record_id!r}")
        seen.add(r.record_id)
    lines = [header_line(featurizer_seed)]
    lines.extend(record_to_json(r) for r in records)
    tmp = str(path) + ".tmp"
    with open(str(path) + ".lock", "w") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


def read_dataset(path) -> tuple[list[AffordanceRecord], dict]:
    """Parse a dataset file; errors cite the 1-based line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(1, "empty file, expected a header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(1, f"bad header: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise DatasetFormatError(1, f"not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(1, f"unsupported version {header.get('version')!r}")
    records = []
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except Exception as exc:
            raise DatasetFormatError(i, str(exc)) from exc
        rid = records[-1].record_id
        if rid in seen:
            raise DatasetFormatError(i, f"duplicate record id {rid!r}")
        seen.add(rid)
    return records, header


def split_by_show(records, test_show: str):
    """Leave-one-show-out split; disjoint and exhaustive."""
    records = list(records)
    shows = {r.show for r in records}
    if test_show not in shows:
        raise InvalidSplitError(f"show {test_show!r} not in dataset (have {sorted(shows)})")
    train = [r for r in records if r.show != test_show]
    test = [r for r in records if r.show == test_show]
    return train, test


# The four perturbation families that turn a real pose into an implausible
# one. Anchor-preserving families keep the cached features; the translation
# family moves the anchor, so features must be recomputed downstream.
NEGATIVE_KINDS = ("scale", "translate", "flip", "class_swap")


def _perturb(record: AffordanceRecord, kind: str, rng: np.random.Generator,
             vocab: PoseVocabulary, scene_sizes) -> tuple[Pose, tuple, bool]:
    joints = record.pose.joints
    center = record.pose.bbox_center
    if kind == "scale":
        factor = 0.2 if rng.random() < 0.5 else 5.0
        return Pose((joints - center) * factor + center), record.anchor, True
    if kind == "translate":
        h = record.pose.bbox_height
        angle = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(4.0, 8.0) * h
        offset = np.array([np.cos(angle), np.sin(angle)]) * dist
        anchor = np.asarray(record.anchor) + offset
        if scene_sizes and record.scene_id in scene_sizes:
            w, hh = scene_sizes[record.scene_id]
            anchor = np.clip(anchor, [0.0, 0.0], [w - 1.0, hh - 1.0])
        shift = anchor - np.asarray(record.anchor)
        return Pose(joints + shift), tuple(anchor), False
    if kind == "flip":
        flipped = joints.copy()
        flipped[:, 1] = 2 * center[1] - flipped[:, 1]
        return Pose(flipped), record.anchor, True
    if kind == "class_swap":
        other = int(rng.integers(vocab.k))
        c = vocab.centers[other]
        s_h = record.pose.bbox_height
        s_w = record.pose.bbox_width / c.bbox_width
        swapped = c.joints * np.array([s_w, s_h]) + np.asarray(record.anchor)
        return Pose(swapped), record.anchor, True
    raise ValueError(f"unknown perturbation {kind!r}")


def synthesize_negatives(records, vocab: PoseVocabulary, seed: int,
                         per_positive: float = 2.47,
                         scene_sizes=None) -> list[AffordanceRecord]:
    """Generate implausible poses from positives, deterministically per seed.

    Produces round(per_positive * n_positives) negatives by cycling the
    positives and applying one seeded perturbation each. Every negative
    differs from its source pose.
    """
    positives = [r for r in records if r.label == "positive"]
    if per_positive < 0:
        raise ValueError("per_positive must be >= 0")
    n_neg = int(round(per_positive * len(positives)))
    if n_neg and not positives:
        raise EmptyInputError("no positive records to perturb")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_neg):
        src = positives[i % len(positives)]
        kind = NEGATIVE_KINDS[int(rng.integers(len(NEGATIVE_KINDS)))]
        pose, anchor, keep_features = _perturb(src, kind, rng, vocab, scene_sizes)
        if float(np.abs(pose.joints - src.pose.joints).max()) == 0.0:
            # e.g. flipping a y-symmetric pose; fall back to a translation
            pose, anchor, keep_features = _perturb(src, "translate", rng, vocab, scene_sizes)
        out.append(AffordanceRecord(
            record_id=f"{src.record_id}~neg{i}",
            scene_id=src.scene_id,
            show=src.show,
            anchor=anchor,
            pose=pose,
            image_ref=src.image_ref,
            class_id=None,
            source=src.source,
            status="accepted",
            label="negative",
            features=src.features if keep_features else None,
        ))
    return out
