/** Annotation session state. The only writes to `records` come from
 * server-acknowledged responses: what the canvas renders is always what the
 * service has persisted. Local edits live in a separate draft until
 * committed through the adjust endpoint. */

import type { AnnotationApi, Prediction, RecordView } from "./api.js";
import { ConflictError } from "./api.js";
import { applyTransform, jointsEqual, moveJoint, scaleAboutCenter, translate } from "./geometry.js";
import type { Joints, Point } from "./skeleton.js";

export interface Notice {
  kind: "info" | "conflict" | "error";
  text: string;
}

interface Draft {
  joints: Joints;
  scale: number;
  translate: [number, number];
}

export class Store {
  sceneId: string | null = null;
  records = new Map<string, RecordView>();
  order: string[] = [];
  selectedId: string | null = null;
  draft: Draft | null = null;
  preview: Prediction | null = null;
  notice: Notice | null = null;
  /** Per record, the server-acknowledged joint lists superseded by adjusts. */
  private undoStacks = new Map<string, Joints[]>();

  constructor(private api: AnnotationApi) {}

  async loadScene(sceneId: string): Promise<void> {
    const rows = await this.api.sceneRecords(sceneId);
    this.sceneId = sceneId;
    this.records = new Map(rows.map((r) => [r.record_id, r]));
    // hypotheses first so triage lands on actionable rows immediately
    this.order = rows
      .slice()
      .sort((a, b) =>
        Number(b.status === "hypothesis") - Number(a.status === "hypothesis") ||
        a.record_id.localeCompare(b.record_id))
      .map((r) => r.record_id);
    this.selectedId = this.order[0] ?? null;
    this.draft = null;
    this.preview = null;
    this.undoStacks.clear();
  }

  get selected(): RecordView | null {
    return this.selectedId ? this.records.get(this.selectedId) ?? null : null;
  }

  select(recordId: string): void {
    if (!this.records.has(recordId)) return;
    this.selectedId = recordId;
    this.draft = null;
  }

  selectNext(step = 1): void {
    if (this.order.length === 0) return;
    const at = this.selectedId ? this.order.indexOf(this.selectedId) : -1;
    const next = (at + step + this.order.length) % this.order.length;
    this.selectedId = this.order[next];
    this.draft = null;
  }

  /** Joints the canvas should draw for the selection: draft if one exists,
   * otherwise the server-acknowledged record. */
  displayJoints(): Joints | null {
    if (this.draft) return this.draft.joints;
    return this.selected?.joints ?? null;
  }

  private ensureDraft(): Draft {
    const rec = this.selected;
    if (!rec) throw new Error("nothing selected");
    if (!this.draft) {
      this.draft = { joints: rec.joints.map((j) => [j[0], j[1]] as const), scale: 1.0, translate: [0, 0] };
    }
    return this.draft;
  }

  draftTranslate(dx: number, dy: number): void {
    const d = this.ensureDraft();
    d.joints = translate(d.joints, dx, dy);
    d.translate = [d.translate[0] + dx, d.translate[1] + dy];
  }

  draftScale(factor: number): void {
    const d = this.ensureDraft();
    d.joints = scaleAboutCenter(d.joints, factor);
    d.scale *= factor;
  }

  draftMoveJoint(index: number, to: Point): void {
    const d = this.ensureDraft();
    d.joints = moveJoint(d.joints, index, to);
  }

  discardDraft(): void {
    this.draft = null;
  }

  private applyServerRecord(rec: RecordView): void {
    this.records.set(rec.record_id, rec);
  }

  /** Submit the draft through the adjust endpoint. A 409 means someone else
   * got there first: reload the record, surface a notice, keep nothing. */
  async commitAdjust(): Promise<RecordView | null> {
    const rec = this.selected;
    if (!rec || !this.draft) return null;
    const before = rec.joints;
    try {
      const acked = await this.api.adjust(rec.record_id, this.draft.joints,
                                          this.draft.scale, this.draft.translate);
      const stack = this.undoStacks.get(rec.record_id) ?? [];
      stack.push(before);
      this.undoStacks.set(rec.record_id, stack);
      this.applyServerRecord(acked);
      this.draft = null;
      this.notice = { kind: "info", text: `adjusted ${rec.record_id} (${acked.status})` };
      return acked;
    } catch (err) {
      if (err instanceof ConflictError) {
        await this.reloadSelected();
        this.notice = { kind: "conflict", text: `record changed elsewhere: ${err.message}` };
        return null;
      }
      throw err;
    }
  }

  /** Undo: discard an uncommitted draft, else re-submit the joint list from
   * before the last committed adjustment, exactly as it was. */
  async undo(): Promise<void> {
    if (this.draft) {
      this.draft = null;
      return;
    }
    const rec = this.selected;
    if (!rec) return;
    const stack = this.undoStacks.get(rec.record_id);
    const previous = stack?.pop();
    if (!previous) {
      this.notice = { kind: "info", text: "nothing to undo" };
      return;
    }
    const acked = await this.api.adjust(rec.record_id, previous, 1.0, [0, 0]);
    if (!jointsEqual(acked.joints, previous)) {
      this.notice = { kind: "error", text: "server echo does not match undo target" };
    }
    this.applyServerRecord(acked);
  }

  private async transition(action: "accept" | "reject"): Promise<RecordView | null> {
    const rec = this.selected;
    if (!rec) return null;
    try {
      const acked = action === "accept"
        ? await this.api.accept(rec.record_id)
        : await this.api.reject(rec.record_id);
      this.applyServerRecord(acked);
      this.notice = { kind: "info", text: `${acked.record_id}: ${acked.status}` };
      return acked;
    } catch (err) {
      if (err instanceof ConflictError) {
        await this.reloadSelected();
        this.notice = { kind: "conflict", text: err.message };
        return null;
      }
      throw err;
    }
  }

  async accept(): Promise<RecordView | null> {
    return this.transition("accept");
  }

  async reject(): Promise<RecordView | null> {
    return this.transition("reject");
  }

  async reloadSelected(): Promise<void> {
    if (!this.selectedId) return;
    const fresh = await this.api.record(this.selectedId);
    this.applyServerRecord(fresh);
    this.draft = null;
  }

  async requestPreview(point: Point, nSamples: number): Promise<void> {
    if (!this.sceneId) return;
    try {
      this.preview = await this.api.predict(this.sceneId, point, nSamples);
    } catch (err) {
      // advisory feature: never block annotation on it
      this.preview = null;
      this.notice = { kind: "error", text: `prediction unavailable: ${(err as Error).message}` };
    }
  }

  clearPreview(): void {
    this.preview = null;
  }

  /** Keyboard-accept on a previewed sample: persist it as a new hypothesis. */
  async adoptPreviewSample(index: number): Promise<RecordView | null> {
    if (!this.sceneId || !this.preview) return null;
    const sample = this.preview.samples[index];
    if (!sample) return null;
    const acked = await this.api.createHypothesis(this.sceneId, sample.joints, sample.class_id);
    this.applyServerRecord(acked);
    this.order.push(acked.record_id);
    this.selectedId = acked.record_id;
    this.preview = null;
    this.notice = { kind: "info", text: `created hypothesis ${acked.record_id}` };
    return acked;
  }
}

export { applyTransform };
