/** Typed client for the annotation service. Every mutation returns the
 * server's acknowledged record, which is the only state the UI trusts. */

import type { Joints, Point } from "./skeleton.js";

export interface SceneSummary {
  scene_id: string;
  show: string;
  n_records: number;
  n_hypotheses: number;
  image_url: string | null;
}

export interface RecordView {
  record_id: string;
  scene_id: string;
  show: string;
  anchor: Point;
  joints: Joints;
  class_id: number | null;
  source: string;
  status: string;
  label: string;
  out_of_frame: boolean;
}

export interface PredictedSample {
  class_id: number;
  joints: Joints;
  s_h: number;
  s_w: number;
  distance_to_point: number;
}

export interface Prediction {
  scene_id: string;
  point: Point;
  seed: number;
  class_scores: number[];
  samples: PredictedSample[];
}

export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConflictError";
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function handle<T>(response: Response): Promise<T> {
  if (response.ok) return response.json() as Promise<T>;
  let detail = response.statusText;
  try {
    const body = await response.json();
    detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  if (response.status === 409) throw new ConflictError(detail);
  throw new ApiError(response.status, detail);
}

export class AnnotationApi {
  constructor(private base = "", private fetchFn: typeof fetch = fetch) {}

  private get(path: string) {
    return this.fetchFn(`${this.base}${path}`);
  }

  private post(path: string, body?: unknown) {
    return this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  async health(): Promise<{ status: string; records: number; models_loaded: boolean }> {
    return handle(await this.get("/health"));
  }

  async scenes(): Promise<SceneSummary[]> {
    return handle(await this.get("/scenes"));
  }

  async sceneRecords(sceneId: string, status?: string): Promise<RecordView[]> {
    const qs = status ? `?status=${encodeURIComponent(status)}` : "";
    return handle(await this.get(`/scenes/${encodeURIComponent(sceneId)}/records${qs}`));
  }

  sceneImageUrl(sceneId: string): string {
    return `${this.base}/scenes/${encodeURIComponent(sceneId)}/image`;
  }

  async record(recordId: string): Promise<RecordView> {
    return handle(await this.get(`/records/${encodeURIComponent(recordId)}`));
  }

  async accept(recordId: string): Promise<RecordView> {
    return handle(await this.post(`/records/${encodeURIComponent(recordId)}/accept`));
  }

  async reject(recordId: string): Promise<RecordView> {
    return handle(await this.post(`/records/${encodeURIComponent(recordId)}/reject`));
  }

  async adjust(recordId: string, joints: Joints, scale: number,
               translateBy: Point): Promise<RecordView> {
    return handle(await this.post(`/records/${encodeURIComponent(recordId)}/adjust`, {
      joints,
      scale,
      translate: translateBy,
    }));
  }

  async createHypothesis(sceneId: string, joints: Joints,
                         classId: number | null = null): Promise<RecordView> {
    return handle(await this.post(`/scenes/${encodeURIComponent(sceneId)}/records`, {
      joints,
      class_id: classId,
      source: "manual",
    }));
  }

  async predict(sceneId: string, point: Point, nSamples: number,
                seed?: number): Promise<Prediction> {
    return handle(await this.post("/predict", {
      scene_id: sceneId,
      point,
      n_samples: nSamples,
      ...(seed === undefined ? {} : { seed }),
    }));
  }
}
