"""Synthetic poses, scenes, and a bundled corpus for the end-to-end pipeline.

Five hand-built pose archetypes give the corpus distinct, clusterable shape
families; scene images carry a distinct texture per archetype region so crop
features are informative. Everything is deterministic per seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .arrayio import write_array
from .pose import N_JOINTS, Pose

# joint order: head_top, neck, r_shoulder, r_elbow, r_wrist, l_shoulder,
# l_elbow, l_wrist, chest, spine, pelvis, r_hip, r_knee, r_ankle, l_hip,
# l_knee, l_ankle. Coordinates in an abstract unit frame, y down.
_ARCHETYPES = {
    "stand": [
        (0.00, 0.00), (0.00, 0.12), (-0.12, 0.14), (-0.14, 0.34), (-0.13, 0.52),
        (0.12, 0.14), (0.14, 0.34), (0.13, 0.52), (0.00, 0.25), (0.00, 0.38),
        (0.00, 0.50), (-0.08, 0.52), (-0.09, 0.75), (-0.09, 0.98), (0.08, 0.52),
        (0.09, 0.75), (0.09, 0.98),
    ],
    "sit": [
        (0.00, 0.00), (0.00, 0.12), (-0.13, 0.14), (-0.15, 0.32), (-0.10, 0.46),
        (0.13, 0.14), (0.15, 0.32), (0.10, 0.46), (0.00, 0.24), (0.00, 0.36),
        (0.00, 0.48), (-0.09, 0.50), (-0.30, 0.52), (-0.32, 0.76), (0.09, 0.50),
        (0.30, 0.52), (0.32, 0.76),
    ],
    "reach": [
        (0.02, 0.10), (0.00, 0.22), (-0.12, 0.24), (-0.20, 0.08), (-0.26, -0.10),
        (0.12, 0.24), (0.20, 0.08), (0.26, -0.10), (0.00, 0.34), (0.00, 0.46),
        (0.00, 0.57), (-0.08, 0.59), (-0.08, 0.80), (-0.08, 1.00), (0.08, 0.59),
        (0.08, 0.80), (0.08, 1.00),
    ],
    "crouch": [
        (0.05, 0.00), (0.03, 0.10), (-0.10, 0.12), (-0.14, 0.28), (-0.08, 0.40),
        (0.14, 0.12), (0.18, 0.28), (0.12, 0.40), (0.00, 0.20), (-0.02, 0.30),
        (-0.04, 0.40), (-0.12, 0.42), (-0.22, 0.36), (-0.16, 0.58), (0.06, 0.42),
        (0.18, 0.36), (0.12, 0.58),
    ],
    "lie": [
        (-0.50, 0.10), (-0.38, 0.10), (-0.36, 0.02), (-0.18, 0.00), (0.00, 0.02),
        (-0.36, 0.18), (-0.18, 0.20), (0.00, 0.18), (-0.26, 0.10), (-0.14, 0.10),
        (-0.02, 0.10), (0.00, 0.02), (0.22, 0.04), (0.46, 0.02), (0.00, 0.18),
        (0.22, 0.16), (0.46, 0.18),
    ],
}

ARCHETYPE_NAMES = tuple(sorted(_ARCHETYPES))


def archetype_pose(name: str, *, height: float = 100.0, center=(0.0, 0.0),
                   jitter: float = 0.0, rng: np.random.Generator | None = None) -> Pose:
    """A stick-figure pose of the named archetype, scaled to the given
    bounding-box height and bbox-centered on `center`."""
    base = np.array(_ARCHETYPES[name], dtype=np.float64)
    if jitter > 0.0:
        if rng is None:
            raise ValueError("jitter needs an rng")
        base = base + rng.normal(0.0, jitter, size=base.shape)
    lo = base.min(axis=0)
    hi = base.max(axis=0)
    scaled = (base - (lo + hi) / 2.0) / (hi[1] - lo[1]) * height
    return Pose(scaled + np.asarray(center, dtype=np.float64))


def random_pose(rng: np.random.Generator, *, span: float = 100.0) -> Pose:
    """Random non-degenerate 17-joint pose with coordinates in [0, span]."""
    while True:
        joints = rng.uniform(0.0, span, size=(N_JOINTS, 2))
        lo = joints.min(axis=0)
        hi = joints.max(axis=0)
        if hi[0] - lo[0] > 1e-3 * span and hi[1] - lo[1] > 1e-3 * span:
            return Pose(joints)


# ---------------------------------------------------------------------------
# bundled synthetic corpus
#
# Layout under the corpus root:
#   corpus.json      manifest (shows, frames, transfers, retrieval pairs)
#   scenes/*.png     frame images
#   scores.bin       (n_frames, 3) float64 sidecar: face, person, emptiness
#   flows/*.bin      (H, W, 2) float64 displacement fields
# ---------------------------------------------------------------------------

IMAGE_W, IMAGE_H = 128, 96

# one texture per archetype; regions are drawn as filled blocks with
# distinct base intensity + stripe patterns so crops separate linearly
_REGION_STYLES = {
    "stand": dict(base=40, stripe=0, axis=0),
    "sit": dict(base=210, stripe=60, axis=0),
    "reach": dict(base=120, stripe=90, axis=1),
    "crouch": dict(base=230, stripe=0, axis=0),
    "lie": dict(base=70, stripe=120, axis=1),
}
_REGION_HEIGHTS = {"stand": 62.0, "sit": 40.0, "reach": 58.0, "crouch": 30.0, "lie": 26.0}


def _scene_background(rng: np.random.Generator, regions) -> np.ndarray:
    img = np.full((IMAGE_H, IMAGE_W), 150.0)
    img += rng.normal(0.0, 3.0, size=img.shape)
    for name, cx, cy in regions:
        style = _REGION_STYLES[name]
        half = 16
        x0, x1 = int(cx) - half, int(cx) + half
        y0, y1 = int(cy) - half, int(cy) + half
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, IMAGE_W), min(y1, IMAGE_H)
        block = np.full((y1 - y0, x1 - x0), float(style["base"]))
        if style["stripe"]:
            ii = np.arange(y0, y1)[:, None] if style["axis"] == 0 else np.arange(x0, x1)[None, :]
            block = block + style["stripe"] * ((ii // 4) % 2)
        img[y0:y1, x0:x1] = block
    return np.clip(img, 0, 255)


def _save_png(path: Path, gray: np.ndarray) -> None:
    from PIL import Image

    arr = np.clip(gray, 0, 255).astype(np.uint8)
    Image.fromarray(np.stack([arr] * 3, axis=2)).save(path)


def _shift_image(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.full_like(img, 150.0)
    h, w = img.shape
    sx0, sx1 = max(0, -dx), min(w, w - dx)
    dx0 = max(0, dx)
    sy0, sy1 = max(0, -dy), min(h, h - dy)
    dy0 = max(0, dy)
    out[dy0:dy0 + (sy1 - sy0), dx0:dx0 + (sx1 - sx0)] = img[sy0:sy1, sx0:sx1]
    return out


def build_corpus(root, seed: int = 0, shows: tuple = ("alpha", "beta", "gamma"),
                 scenes_per_show: int = 5, poses_per_scene: int = 3) -> dict:
    """Write a synthetic mining corpus and return its manifest.

    Each scene contributes one empty frame plus occupied frames reachable two
    ways: a same-background retrieval twin carrying pose detections (global
    path) and a short panned sequence with per-step uniform flow fields
    ending at the empty frame (local path).
    """
    root = Path(root)
    (root / "scenes").mkdir(parents=True, exist_ok=True)
    (root / "flows").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    frames = []       # {id, show, image, role}
    scores = []       # face, person, emptiness rows aligned with frames
    transfers = []    # local-path entries: pose + flow chain + target frame
    detections = []   # global-path entries: poses detected on occupied frames

    region_cycle = list(ARCHETYPE_NAMES)
    for show in shows:
        for s in range(scenes_per_show):
            scene = f"{show}-s{s:02d}"
            k = len(region_cycle)
            picks = [region_cycle[(s * poses_per_scene + j) % k] for j in range(poses_per_scene)]
            xs = np.linspace(24, IMAGE_W - 24, poses_per_scene)
            regions = []
            for j, name in enumerate(picks):
                cy = float(rng.uniform(34, IMAGE_H - 34))
                regions.append((name, float(xs[j]), cy))
            background = _scene_background(rng, regions)

            empty_id = f"{scene}-empty"
            _save_png(root / "scenes" / f"{empty_id}.png", background)
            frames.append({"id": empty_id, "show": show, "image": f"scenes/{empty_id}.png"})
            scores.append([0.0, rng.uniform(0.0, 0.05), rng.uniform(0.9, 1.0)])

            # retrieval twin: same background, flagged occupied, with detections
            twin_id = f"{scene}-occupied"
            _save_png(root / "scenes" / f"{twin_id}.png", background)
            frames.append({"id": twin_id, "show": show, "image": f"scenes/{twin_id}.png"})
            scores.append([rng.uniform(30.0, 60.0), rng.uniform(0.8, 1.0),
                           rng.uniform(0.0, 0.2)])
            twin_poses = []
            for name, cx, cy in regions:
                h = _REGION_HEIGHTS[name] * rng.uniform(0.85, 1.15)
                pose = archetype_pose(name, height=h, center=(cx, cy),
                                      jitter=0.012, rng=rng)
                twin_poses.append(pose.joints.tolist())
            detections.append({"frame": twin_id, "show": show, "target": empty_id,
                               "poses": twin_poses})

            # panned sequence: source frame -> 2 steps -> empty frame geometry
            steps = [(int(rng.integers(-3, 4)), int(rng.integers(-2, 3))) for _ in range(2)]
            total = (sum(d[0] for d in steps), sum(d[1] for d in steps))
            src_id = f"{scene}-clipstart"
            src_img = _shift_image(background, -total[0], -total[1])
            _save_png(root / "scenes" / f"{src_id}.png", src_img)
            frames.append({"id": src_id, "show": show, "image": f"scenes/{src_id}.png"})
            scores.append([rng.uniform(30.0, 60.0), rng.uniform(0.8, 1.0),
                           rng.uniform(0.0, 0.2)])
            flow_chain = []
            for t, (dx, dy) in enumerate(steps):
                flow = np.zeros((IMAGE_H, IMAGE_W, 2))
                flow[:, :, 0] = dx
                flow[:, :, 1] = dy
                flow_path = f"flows/{scene}-f{t}.bin"
                write_array(root / flow_path, flow)
                flow_chain.append(flow_path)
            seq_poses = []
            for name, cx, cy in regions:
                h = _REGION_HEIGHTS[name] * rng.uniform(0.85, 1.15)
                pose = archetype_pose(name, height=h,
                                      center=(cx - total[0], cy - total[1]),
                                      jitter=0.012, rng=rng)
                seq_poses.append(pose.joints.tolist())
            transfers.append({"frame": src_id, "show": show, "target": empty_id,
                              "flows": flow_chain, "poses": seq_poses})

    write_array(root / "scores.bin", np.asarray(scores, dtype=np.float64))
    manifest = {
        "image_size": [IMAGE_W, IMAGE_H],
        "shows": list(shows),
        "frames": frames,
        "scores": "scores.bin",
        "detections": detections,
        "transfers": transfers,
    }
    with open(root / "corpus.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest
