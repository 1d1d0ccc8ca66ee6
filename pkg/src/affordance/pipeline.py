"""Pipeline stages behind the CLI: mine, cluster, train, generate, score,
evaluate. Each stage reads and writes versioned artifacts and is
deterministic given its seeds."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .arrayio import read_array
from .checkpoint import load_params, save_params
from .clustering import assign_class, build_vocabulary, load_vocabulary, save_vocabulary
from .dataset import read_dataset, split_by_show, synthesize_negatives, write_dataset
from .errors import MissingArtifactError, ShapeError
from .evaluate import EvalReport, calibrate_delta, evaluate_topk, pr_curve
from .features import RandomProjectionFeaturizer, Rect, condition_features, load_image
from .mining import (
    FilterThresholds,
    FlowField,
    FrameScore,
    accumulate_flow,
    filter_empty,
    global_match,
    transfer_pose,
)
from .model import (
    ClassifierModel,
    TrainConfig,
    VAEModel,
    classify,
    generate_pose,
    prepare_vae_samples,
    score_pose,
    train_classifier,
    train_vae,
)
from .pose import Pose
from .records import AffordanceRecord


def require_artifact(path, produced_by: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(
            f"{p} does not exist; run `affordance {produced_by}` first")
    return p


# ---------------------------------------------------------------------------
# mine
# ---------------------------------------------------------------------------

def run_mine(corpus_dir, out_path, *, thresholds: FilterThresholds,
             feat_dim: int, featurizer_seed: int, retrieval_min_similarity: float = 0.98,
             auto_accept: bool = False) -> dict:
    """Empty-scene filter, retrieval + flow pose transfer, feature caching.

    Reads the corpus manifest (corpus.json), emits hypothesis records sorted
    by (scene, record id). Returns summary counts.
    """
    corpus_dir = Path(corpus_dir)
    manifest_path = require_artifact(corpus_dir / "corpus.json", "synth")
    manifest = json.loads(manifest_path.read_text())
    frames = manifest["frames"]
    frame_ids = [f["id"] for f in frames]
    by_id = {f["id"]: f for f in frames}
    width, height = manifest["image_size"]

    scores = read_array(corpus_dir / manifest["scores"])
    if scores.shape != (len(frames), 3):
        raise ShapeError(f"score sidecar is {scores.shape}, expected ({len(frames)}, 3)")
    scorer = {
        f["id"]: FrameScore(f["id"], float(s[0]), float(s[1]), float(s[2]))
        for f, s in zip(frames, scores)
    }
    empty_ids = set(filter_empty(frame_ids, scorer, thresholds))

    featurizer = RandomProjectionFeaturizer(dim=feat_dim, seed=featurizer_seed)
    images: dict[str, np.ndarray] = {}

    def image_of(fid):
        if fid not in images:
            images[fid] = load_image(corpus_dir / by_id[fid]["image"])
        return images[fid]

    whole = Rect(0, 0, width, height)
    records = []

    # global path: retrieval by whole-image features within the same show
    detections = manifest.get("detections", [])
    det_by_show: dict[str, list] = {}
    for det in detections:
        det_by_show.setdefault(det["show"], []).append(det)
    det_feats = {det["frame"]: featurizer(image_of(det["frame"]), whole)
                 for dets in det_by_show.values() for det in dets}
    identity = FlowField.identity(height, width)
    for fid in sorted(empty_ids):
        show = by_id[fid]["show"]
        candidates = [(d["frame"], det_feats[d["frame"]])
                      for d in det_by_show.get(show, [])]
        if not candidates:
            continue
        ranked = global_match(featurizer(image_of(fid), whole), candidates, top_k=1)
        match_id, similarity = ranked[0]
        if similarity < retrieval_min_similarity:
            continue
        det = next(d for d in det_by_show[show] if d["frame"] == match_id)
        for j, joints in enumerate(det["poses"]):
            records.append(transfer_pose(
                Pose(joints), identity, scene_id=fid, show=show,
                record_id=f"{fid}~g{j:02d}", target_size=(width, height),
                image_ref=by_id[fid]["image"], source="global"))

    # local path: accumulate each clip's flow chain into the empty frame
    for entry in manifest.get("transfers", []):
        target = entry["target"]
        if target not in empty_ids:
            continue
        chain = [FlowField(read_array(corpus_dir / p)) for p in entry["flows"]]
        total = accumulate_flow(chain)
        for j, joints in enumerate(entry["poses"]):
            records.append(transfer_pose(
                Pose(joints), total, scene_id=target, show=entry["show"],
                record_id=f"{target}~l{j:02d}", target_size=(width, height),
                image_ref=by_id[target]["image"], source="local"))

    for rec in records:
        if not rec.out_of_frame:
            ax, ay = rec.anchor
            if 0 <= ax < width and 0 <= ay < height:
                rec.features = condition_features(image_of(rec.scene_id), rec.anchor,
                                                  featurizer)
        if auto_accept and not rec.out_of_frame:
            rec.status = "accepted"

    records.sort(key=lambda r: (r.scene_id, r.record_id))
    write_dataset(records, out_path, featurizer_seed=featurizer_seed)
    return {
        "frames": len(frames),
        "empty": len(empty_ids),
        "records": len(records),
        "global": sum(1 for r in records if r.source == "global"),
        "local": sum(1 for r in records if r.source == "local"),
    }


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------

def run_cluster(dataset_path, vocab_path, *, k: int, seed: int,
                test_show: str | None = None, out_dataset=None) -> dict:
    """Build the pose vocabulary from usable training poses and write every
    usable record's class id back into the dataset."""
    require_artifact(dataset_path, "mine")
    records, header = read_dataset(dataset_path)
    usable = [r for r in records if r.usable and r.label == "positive"]
    train = usable
    if test_show is not None:
        train = [r for r in usable if r.show != test_show]
    if not train:
        raise MissingArtifactError("no usable training poses; annotate or mine --auto-accept")
    vocab = build_vocabulary([r.pose for r in train], k, seed)
    digest = save_vocabulary(vocab, vocab_path)
    for r in usable:
        r.class_id = assign_class(r.pose, vocab)
    write_dataset(records, out_dataset or dataset_path,
                  featurizer_seed=header.get("featurizer_seed"))
    return {"k": k, "train_poses": len(train), "labeled": len(usable),
            "vocab_checksum": digest}


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

def save_classifier(model: ClassifierModel, path, meta: dict) -> str:
    doc = dict(meta)
    doc.update({"kind": "classifier", "feat_dim": model.feat_dim,
                "n_classes": model.n_classes, "hidden": model.hidden})
    return save_params(path, model.store.params, doc)


def load_classifier(path) -> tuple[ClassifierModel, dict]:
    params, meta = load_params(path)
    if meta.get("kind") != "classifier":
        raise ShapeError(f"{path} is not a classifier checkpoint")
    model = ClassifierModel(meta["feat_dim"], meta["n_classes"], meta["hidden"], seed=0)
    for name, value in params.items():
        model.store.params[name][...] = value
    model.trained = True
    return model, meta


def save_vae(model: VAEModel, path, meta: dict) -> str:
    doc = dict(meta)
    doc.update({"kind": "vae", "feat_dim": model.feat_dim,
                "n_classes": model.n_classes, "hidden": model.hidden,
                "latent_dim": model.latent_dim})
    params = dict(model.store.params)
    params["standardize.mean"] = model.target_mean
    params["standardize.std"] = model.target_std
    return save_params(path, params, doc)


def load_vae(path) -> tuple[VAEModel, dict]:
    params, meta = load_params(path)
    if meta.get("kind") != "vae":
        raise ShapeError(f"{path} is not a VAE checkpoint")
    model = VAEModel(meta["feat_dim"], meta["n_classes"], meta["hidden"],
                     meta["latent_dim"], seed=0)
    model.target_mean = params.pop("standardize.mean")
    model.target_std = params.pop("standardize.std")
    for name, value in params.items():
        model.store.params[name][...] = value
    model.trained = True
    return model, meta


# ---------------------------------------------------------------------------
# training stages
# ---------------------------------------------------------------------------

def _training_records(dataset_path, vocab_path, test_show):
    require_artifact(dataset_path, "mine")
    require_artifact(vocab_path, "cluster")
    records, header = read_dataset(dataset_path)
    vocab, vocab_digest = load_vocabulary(vocab_path)
    usable = [r for r in records if r.usable and r.label == "positive"]
    if test_show is not None:
        usable = [r for r in usable if r.show != test_show]
    ready = [r for r in usable if r.features is not None and r.class_id is not None]
    if not ready:
        raise MissingArtifactError(
            "no training-ready records (need cached features and class ids; "
            "run `affordance mine` then `affordance cluster`)")
    return ready, vocab, vocab_digest, header


def run_train_classifier(dataset_path, vocab_path, ckpt_path, *,
                         config: TrainConfig, seed: int,
                         test_show: str | None = None) -> dict:
    ready, vocab, vocab_digest, header = _training_records(dataset_path, vocab_path, test_show)
    model, log = train_classifier(ready, vocab, config, seed)
    meta = {"vocab_checksum": vocab_digest,
            "featurizer_seed": header.get("featurizer_seed"), "seed": seed}
    save_classifier(model, ckpt_path, meta)
    log_path = Path(str(ckpt_path) + ".log.json")
    log_path.write_text(json.dumps(log.epochs, separators=(",", ":")) + "\n")
    return {"records": len(ready), "final": log.last()}


def run_train_vae(dataset_path, vocab_path, ckpt_path, *, config: TrainConfig,
                  seed: int, test_show: str | None = None,
                  delta: float | None = None) -> dict:
    ready, vocab, vocab_digest, header = _training_records(dataset_path, vocab_path, test_show)
    samples = prepare_vae_samples(ready, vocab)
    model, log = train_vae(samples, vocab, config, seed)
    meta = {"vocab_checksum": vocab_digest,
            "featurizer_seed": header.get("featurizer_seed"), "seed": seed,
            "lam": config.lam, "delta": delta}
    save_vae(model, ckpt_path, meta)
    log_path = Path(str(ckpt_path) + ".log.json")
    log_path.write_text(json.dumps(log.epochs, separators=(",", ":")) + "\n")
    return {"records": len(samples), "final": log.last()}


# ---------------------------------------------------------------------------
# inference stages
# ---------------------------------------------------------------------------

class InferenceBundle:
    """Vocabulary, models, featurizer, and the image resolver used by the
    generate/score stages and the prediction endpoints."""

    def __init__(self, *, vocab_path, classifier_path, vae_path, dataset_path=None,
                 images_root=None, feat_dim: int | None = None):
        require_artifact(vocab_path, "cluster")
        require_artifact(classifier_path, "train-classifier")
        require_artifact(vae_path, "train-vae")
        self.vocab, self.vocab_digest = load_vocabulary(vocab_path)
        self.classifier, self.clf_meta = load_classifier(classifier_path)
        self.vae, self.vae_meta = load_vae(vae_path)
        for meta, what in ((self.clf_meta, "classifier"), (self.vae_meta, "vae")):
            if meta.get("vocab_checksum") not in (None, self.vocab_digest):
                raise MissingArtifactError(
                    f"{what} checkpoint was trained against a different vocabulary; "
                    "re-run the training stage")
        seed = self.clf_meta.get("featurizer_seed")
        self.featurizer = RandomProjectionFeaturizer(
            dim=feat_dim or self.classifier.feat_dim, seed=0 if seed is None else seed)
        self.images_root = None if images_root is None else Path(images_root)
        self.image_refs: dict[str, str] = {}
        if dataset_path is not None and Path(dataset_path).exists():
            records, _ = read_dataset(dataset_path)
            for r in records:
                if r.image_ref is not None:
                    self.image_refs.setdefault(r.scene_id, r.image_ref)

    def scene_image(self, scene_id: str):
        if self.images_root is None:
            raise MissingArtifactError("no images root configured; pass --images")
        ref = self.image_refs.get(scene_id, scene_id)
        path = self.images_root / ref
        if not path.exists():
            raise MissingArtifactError(f"no image for scene {scene_id!r} under {self.images_root}")
        return load_image(path)

    def features_at(self, scene_id: str, point):
        return condition_features(self.scene_image(scene_id), point, self.featurizer)


def run_generate(bundle: InferenceBundle, scene_id: str, point, *, n_samples: int,
                 seed: int, condition: str = "soft") -> dict:
    feats = bundle.features_at(scene_id, point)
    samples = generate_pose(bundle.classifier, bundle.vae, feats, point,
                            bundle.vocab, seed, n_samples, condition)
    return {
        "scene": scene_id,
        "point": [float(point[0]), float(point[1])],
        "seed": seed,
        "samples": [
            {
                "class_id": g.class_id,
                "joints": [[float(x), float(y)] for x, y in g.pose.joints],
                "s_h": g.sd.s_h,
                "s_w": g.sd.s_w,
                "class_scores": [float(v) for v in g.class_scores],
            }
            for g in samples
        ],
    }


def run_score(bundle: InferenceBundle, scene_id: str, point, candidate_joints, *,
              m: int, delta: float, seed: int) -> dict:
    candidate = Pose(candidate_joints)
    feats = bundle.features_at(scene_id, point)
    distance, plausible = score_pose(bundle.classifier, bundle.vae, feats, point,
                                     candidate, m, bundle.vocab, seed, delta)
    return {"scene": scene_id, "point": [float(point[0]), float(point[1])],
            "distance": distance, "plausible": plausible, "delta": delta, "m": m}


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def run_evaluate(dataset_path, bundle: InferenceBundle, *, test_show: str,
                 per_positive: float, m: int, seed: int,
                 delta: float | None = None) -> tuple[EvalReport, dict]:
    """The two-protocol harness: top-k classification on positive test
    records, PR over plausibility distances on positives plus synthesized
    negatives. Lower distance means more plausible."""
    require_artifact(dataset_path, "mine")
    records, _ = read_dataset(dataset_path)
    usable = [r for r in records if r.usable and r.label == "positive"]
    _, test = split_by_show(usable, test_show)
    test = [r for r in test if r.class_id is not None]
    if not test:
        raise MissingArtifactError(
            f"no labeled test records for show {test_show!r}; run `affordance cluster`")

    with_features = [r for r in test if r.features is not None]
    topk = evaluate_topk(bundle.classifier, with_features, k_max=5)

    sizes = {}
    for r in test:
        img = bundle.scene_image(r.scene_id)
        sizes[r.scene_id] = (img.shape[1], img.shape[0])
    negatives = synthesize_negatives(test, bundle.vocab, seed=seed,
                                     per_positive=per_positive, scene_sizes=sizes)

    scores, labels = [], []
    for i, rec in enumerate(list(test) + list(negatives)):
        feats = rec.features
        if feats is None:
            feats = bundle.features_at(rec.scene_id, rec.anchor)
        distance, _ = score_pose(bundle.classifier, bundle.vae, feats, rec.anchor,
                                 rec.pose, m, bundle.vocab, seed=seed + i,
                                 delta=float("inf"))
        scores.append(distance)
        labels.append(rec.label == "positive")

    points, ap = pr_curve(np.asarray(scores), np.asarray(labels))
    chosen_delta = calibrate_delta(np.asarray(scores), np.asarray(labels)) \
        if delta is None else delta
    report = EvalReport(
        topk=topk,
        pr_points=points,
        average_precision=ap,
        n_positive=sum(labels),
        n_negative=len(labels) - sum(labels),
    )
    extras = {"test_show": test_show, "delta": chosen_delta, "m": m,
              "n_topk_records": len(with_features)}
    return report, extras
