"""HTTP service for annotation and prediction.

All mutations run through one lock and are persisted to the dataset file
(atomic temp-write + rename + fsync) before the response goes out, so an
acknowledged accept/reject/adjust survives a crash or restart. Prediction
endpoints are read-only over frozen models; each request gets its own RNG
stream derived from the server seed and a request counter unless the client
pins a seed.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .dataset import read_dataset, write_dataset
from .errors import (
    AffordanceError,
    MissingArtifactError,
    OutOfBoundsError,
    TransitionError,
)
from .model import generate_pose, score_pose
from .pipeline import InferenceBundle
from .pose import Pose, pose_euclidean_distance
from .records import AffordanceRecord, adjusted_record, next_status
from .schemas import (
    AdjustRequest,
    CreateRecordRequest,
    HealthOut,
    PredictRequest,
    PredictResponse,
    PredictedSample,
    RecordOut,
    SceneOut,
    ScoreRequest,
    ScoreResponse,
)


class DatasetStore:
    """In-memory record index over the dataset file, single-writer."""

    def __init__(self, path):
        self.path = Path(path)
        records, header = read_dataset(self.path)
        self.header = header
        self._records: dict[str, AffordanceRecord] = {r.record_id: r for r in records}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._records)

    def scenes(self) -> list[dict]:
        by_scene: dict[str, list[AffordanceRecord]] = {}
        for r in self._records.values():
            by_scene.setdefault(r.scene_id, []).append(r)
        out = []
        for scene_id in sorted(by_scene):
            rows = by_scene[scene_id]
            out.append({
                "scene_id": scene_id,
                "show": rows[0].show,
                "n_records": len(rows),
                "n_hypotheses": sum(1 for r in rows if r.status == "hypothesis"),
            })
        return out

    def scene_records(self, scene_id: str, status: str | None = None):
        rows = [r for r in self._records.values() if r.scene_id == scene_id]
        if status is not None:
            rows = [r for r in rows if r.status == status]
        return sorted(rows, key=lambda r: r.record_id)

    def scene_show(self, scene_id: str) -> str | None:
        for r in self._records.values():
            if r.scene_id == scene_id:
                return r.show
        return None

    def get(self, record_id: str) -> AffordanceRecord | None:
        return self._records.get(record_id)

    def _persist(self) -> None:
        ordered = sorted(self._records.values(), key=lambda r: (r.scene_id, r.record_id))
        write_dataset(ordered, self.path,
                      featurizer_seed=self.header.get("featurizer_seed"))

    def transition(self, record_id: str, action: str) -> AffordanceRecord:
        with self._lock:
            rec = self._records.get(record_id)
            if rec is None:
                raise KeyError(record_id)
            rec.status = next_status(rec.status, action)  # raises TransitionError
            self._persist()
            return rec

    def adjust(self, record_id: str, joints, refeature=None) -> AffordanceRecord:
        with self._lock:
            rec = self._records.get(record_id)
            if rec is None:
                raise KeyError(record_id)
            adjusted = adjusted_record(rec, joints)
            if refeature is not None:
                adjusted.features = refeature(adjusted)
            self._records[record_id] = adjusted
            self._persist()
            return adjusted

    def add(self, record: AffordanceRecord, refeature=None) -> AffordanceRecord:
        with self._lock:
            if record.record_id in self._records:
                raise TransitionError(f"record id {record.record_id!r} already exists")
            if refeature is not None:
                record.features = refeature(record)
            self._records[record.record_id] = record
            self._persist()
            return record

    def next_manual_id(self, scene_id: str) -> str:
        with self._lock:
            for i in itertools.count():
                rid = f"{scene_id}~m{i:03d}"
                if rid not in self._records:
                    return rid


@dataclass
class ServerConfig:
    dataset: str
    images_root: str | None = None
    vocab: str | None = None
    classifier: str | None = None
    vae: str | None = None
    seed: int = 0
    delta: float = 25.0
    m: int = 10
    frontend_dir: str | None = None


def _record_out(r: AffordanceRecord) -> RecordOut:
    return RecordOut(
        record_id=r.record_id,
        scene_id=r.scene_id,
        show=r.show,
        anchor=r.anchor,
        joints=[(float(x), float(y)) for x, y in r.pose.joints],
        class_id=r.class_id,
        source=r.source,
        status=r.status,
        label=r.label,
        out_of_frame=r.out_of_frame,
    )


def create_app(config: ServerConfig) -> FastAPI:
    store = DatasetStore(config.dataset)
    bundle: InferenceBundle | None = None
    if config.vocab and config.classifier and config.vae:
        bundle = InferenceBundle(
            vocab_path=config.vocab,
            classifier_path=config.classifier,
            vae_path=config.vae,
            dataset_path=config.dataset,
            images_root=config.images_root,
        )
    request_counter = itertools.count()

    def refeature(rec: AffordanceRecord):
        """Fresh crop features at the record's anchor; None when the scene
        image is unavailable or the anchor left the frame."""
        if bundle is None:
            return None
        try:
            return bundle.features_at(rec.scene_id, rec.anchor)
        except AffordanceError:
            return None

    app = FastAPI(title="pose affordance service", version="0.1.0")
    app.state.store = store
    app.state.bundle = bundle

    @app.exception_handler(AffordanceError)
    async def domain_error(request: Request, exc: AffordanceError):
        if isinstance(exc, TransitionError):
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        if isinstance(exc, (OutOfBoundsError,)):
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        if isinstance(exc, MissingArtifactError):
            return JSONResponse(status_code=503, content={"detail": str(exc)})
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/health", response_model=HealthOut)
    def health():
        return HealthOut(status="ok", records=len(store),
                         scenes=len(store.scenes()), models_loaded=bundle is not None)

    @app.get("/scenes", response_model=list[SceneOut])
    def list_scenes():
        return [SceneOut(image_url=f"/scenes/{s['scene_id']}/image", **s)
                for s in store.scenes()]

    @app.get("/scenes/{scene_id}/records", response_model=list[RecordOut])
    def scene_records(scene_id: str, status: str | None = None):
        if store.scene_show(scene_id) is None:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id!r}")
        return [_record_out(r) for r in store.scene_records(scene_id, status)]

    @app.get("/scenes/{scene_id}/image")
    def scene_image(scene_id: str):
        if config.images_root is None:
            raise HTTPException(status_code=404, detail="no images root configured")
        rows = store.scene_records(scene_id)
        if not rows or rows[0].image_ref is None:
            raise HTTPException(status_code=404, detail=f"no image for scene {scene_id!r}")
        path = Path(config.images_root) / rows[0].image_ref
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"image file missing: {path.name}")
        return FileResponse(path)

    @app.get("/records/{record_id}", response_model=RecordOut)
    def get_record(record_id: str):
        rec = store.get(record_id)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"unknown record {record_id!r}")
        return _record_out(rec)

    def _transition(record_id: str, action: str) -> RecordOut:
        try:
            return _record_out(store.transition(record_id, action))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown record {record_id!r}")

    @app.post("/records/{record_id}/accept", response_model=RecordOut)
    def accept(record_id: str):
        return _transition(record_id, "accept")

    @app.post("/records/{record_id}/reject", response_model=RecordOut)
    def reject(record_id: str):
        return _transition(record_id, "reject")

    @app.post("/records/{record_id}/adjust", response_model=RecordOut)
    def adjust(record_id: str, body: AdjustRequest):
        try:
            return _record_out(store.adjust(record_id, body.joints, refeature=refeature))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown record {record_id!r}")

    @app.post("/scenes/{scene_id}/records", response_model=RecordOut, status_code=201)
    def create_record(scene_id: str, body: CreateRecordRequest):
        show = store.scene_show(scene_id)
        if show is None:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id!r}")
        template = store.scene_records(scene_id)[0]
        pose = Pose(body.joints)
        rec = AffordanceRecord(
            record_id=store.next_manual_id(scene_id),
            scene_id=scene_id,
            show=show,
            anchor=tuple(pose.bbox_center),
            pose=pose,
            image_ref=template.image_ref,
            class_id=body.class_id,
            source=body.source,
            status="hypothesis",
        )
        return _record_out(store.add(rec, refeature=refeature))

    def _require_models() -> InferenceBundle:
        if bundle is None:
            raise HTTPException(status_code=503,
                                detail="no model checkpoints loaded; start the "
                                       "server with --vocab/--classifier/--vae")
        return bundle

    @app.post("/predict", response_model=PredictResponse)
    def predict(body: PredictRequest):
        b = _require_models()
        seed = body.seed if body.seed is not None else \
            int(np.random.default_rng((config.seed, next(request_counter))).integers(2 ** 31))
        feats = b.features_at(body.scene_id, body.point)
        samples = generate_pose(b.classifier, b.vae, feats, body.point, b.vocab,
                                seed, body.n_samples, body.condition)
        point = np.asarray(body.point)
        return PredictResponse(
            scene_id=body.scene_id,
            point=body.point,
            seed=seed,
            class_scores=[float(v) for v in samples[0].class_scores],
            samples=[
                PredictedSample(
                    class_id=g.class_id,
                    joints=[(float(x), float(y)) for x, y in g.pose.joints],
                    s_h=g.sd.s_h,
                    s_w=g.sd.s_w,
                    distance_to_point=float(np.linalg.norm(g.pose.bbox_center - point)),
                )
                for g in samples
            ],
        )

    @app.post("/score", response_model=ScoreResponse)
    def score(body: ScoreRequest):
        b = _require_models()
        candidate = Pose(body.joints)
        point = body.point if body.point is not None else tuple(candidate.bbox_center)
        seed = body.seed if body.seed is not None else \
            int(np.random.default_rng((config.seed, next(request_counter))).integers(2 ** 31))
        delta = body.delta if body.delta is not None else config.delta
        feats = b.features_at(body.scene_id, point)
        distance, plausible = score_pose(b.classifier, b.vae, feats, point,
                                         candidate, body.m, b.vocab, seed, delta)
        return ScoreResponse(scene_id=body.scene_id, point=point, distance=distance,
                             plausible=plausible, delta=delta, m=body.m)

    if config.frontend_dir and Path(config.frontend_dir).exists():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True),
                  name="frontend")

    return app
