/** End-to-end tests against a live service instance.
 *
 * A scratch corpus is built with the python CLI, models are trained at smoke
 * scale, and the service is spawned as a real subprocess; the client talks
 * to it over HTTP exactly as the browser does. Covers the annotation-flow
 * release criteria: identity adjust, scale-about-center, persistence across
 * restart, and concurrent-mutation conflicts.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApi, ConflictError } from "../src/api.js";
import { bboxCenter, bboxHeight, jointsEqual, scaleAboutCenter } from "../src/geometry.js";
import { Store } from "../src/state.js";

const PORT = 18731;
const BASE = `http://127.0.0.1:${PORT}`;

let work: string;
let server: ChildProcess | null = null;
const api = new AnnotationApi(BASE);

function cli(...args: string[]): void {
  execFileSync("affordance", args, { stdio: "pipe" });
}

async function startServer(): Promise<void> {
  server = spawn("affordance", [
    "serve",
    "--dataset", join(work, "data.jsonl"),
    "--images", join(work, "corpus"),
    "--vocab", join(work, "vocab.txt"),
    "--classifier", join(work, "clf.ckpt"),
    "--vae", join(work, "vae.ckpt"),
    "--port", String(PORT),
  ], { stdio: "ignore" });
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const health = await api.health();
      if (health.status === "ok") return;
    } catch {
      await new Promise((r) => setTimeout(r, 250));
    }
  }
  throw new Error("service did not come up");
}

async function stopServer(): Promise<void> {
  if (!server) return;
  const child = server;
  server = null;
  const gone = new Promise((resolve) => child.once("exit", resolve));
  child.kill("SIGTERM");
  await Promise.race([gone, new Promise((r) => setTimeout(r, 5_000))]);
  if (child.exitCode === null) child.kill("SIGKILL");
  await gone;
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "annot-it-"));
  cli("synth", "--out", join(work, "corpus"), "--seed", "0");
  cli("mine", "--corpus", join(work, "corpus"), "--out", join(work, "data.jsonl"),
      "--feat-dim", "32");
  // leave status=hypothesis so triage actions have something to do; a copy of
  // the records is auto-accepted for training via a second mine pass
  cli("mine", "--corpus", join(work, "corpus"), "--out", join(work, "train.jsonl"),
      "--feat-dim", "32", "--auto-accept");
  cli("cluster", "--dataset", join(work, "train.jsonl"),
      "--vocab", join(work, "vocab.txt"), "--k", "5", "--seed", "0");
  cli("train-classifier", "--dataset", join(work, "train.jsonl"),
      "--vocab", join(work, "vocab.txt"), "--out", join(work, "clf.ckpt"),
      "--seed", "1", "--hidden", "24", "--lr", "5e-3", "--epochs", "20",
      "--batch-size", "32");
  cli("train-vae", "--dataset", join(work, "train.jsonl"),
      "--vocab", join(work, "vocab.txt"), "--out", join(work, "vae.ckpt"),
      "--seed", "2", "--hidden", "32", "--latent-dim", "4", "--lr", "3e-3",
      "--lr-decay", "0.99", "--epochs", "60", "--batch-size", "128");
  await startServer();
});

afterAll(async () => {
  await stopServer();
  rmSync(work, { recursive: true, force: true });
});

async function freshHypothesis(): Promise<{ sceneId: string; recordId: string }> {
  const scenes = await api.scenes();
  for (const scene of scenes) {
    const rows = await api.sceneRecords(scene.scene_id, "hypothesis");
    if (rows.length > 0) return { sceneId: scene.scene_id, recordId: rows[0].record_id };
  }
  throw new Error("no hypotheses left");
}

describe("annotation flow against the live service", () => {
  it("adjust with the identity transform leaves joints unchanged", async () => {
    const { recordId } = await freshHypothesis();
    const before = await api.record(recordId);
    const acked = await api.adjust(recordId, before.joints, 1.0, [0, 0]);
    expect(jointsEqual(acked.joints, before.joints)).toBe(true);
    expect(acked.status).toBe("accepted");
    const persisted = await api.record(recordId);
    expect(jointsEqual(persisted.joints, before.joints)).toBe(true);
  });

  it("scale x2 about the bbox center doubles the height server-side", async () => {
    const { recordId } = await freshHypothesis();
    const before = await api.record(recordId);
    const doubled = scaleAboutCenter(before.joints, 2.0);
    const acked = await api.adjust(recordId, doubled, 2.0, [0, 0]);
    expect(bboxHeight(acked.joints)).toBeCloseTo(2 * bboxHeight(before.joints), 6);
    const cBefore = bboxCenter(before.joints);
    const cAfter = bboxCenter(acked.joints);
    expect(cAfter[0]).toBeCloseTo(cBefore[0], 6);
    expect(cAfter[1]).toBeCloseTo(cBefore[1], 6);
  });

  it("translation by (10, 5) shifts every submitted joint", async () => {
    const { recordId } = await freshHypothesis();
    const before = await api.record(recordId);
    const moved = before.joints.map(([x, y]) => [x + 10, y + 5] as const);
    const acked = await api.adjust(recordId, moved, 1.0, [10, 5]);
    acked.joints.forEach(([x, y], i) => {
      expect(x).toBeCloseTo(before.joints[i][0] + 10, 9);
      expect(y).toBeCloseTo(before.joints[i][1] + 5, 9);
    });
  });

  it("concurrent accept and reject yield exactly one winner and one conflict", async () => {
    const { recordId } = await freshHypothesis();
    const results = await Promise.allSettled([api.accept(recordId), api.reject(recordId)]);
    const fulfilled = results.filter((r) => r.status === "fulfilled");
    const conflicts = results.filter(
      (r) => r.status === "rejected" && r.reason instanceof ConflictError);
    expect(fulfilled.length).toBe(1);
    expect(conflicts.length).toBe(1);
  });

  it("prediction preview renders n samples and adoption persists a hypothesis", async () => {
    const scenes = await api.scenes();
    const store = new Store(api);
    await store.loadScene(scenes[0].scene_id);
    await store.requestPreview([64, 48], 5);
    expect(store.preview?.samples.length).toBe(5);
    for (const sample of store.preview!.samples) {
      expect(sample.joints.length).toBe(17);
      expect(sample.distance_to_point).toBeGreaterThanOrEqual(0);
    }
    const created = await store.adoptPreviewSample(0);
    expect(created?.status).toBe("hypothesis");
    const persisted = await api.record(created!.record_id);
    expect(jointsEqual(persisted.joints, created!.joints)).toBe(true);
  });

  it("store commits are what the server persisted (refetch equality)", async () => {
    const { sceneId, recordId } = await freshHypothesis();
    const store = new Store(api);
    await store.loadScene(sceneId);
    store.select(recordId);
    store.draftTranslate(4, -3);
    const acked = await store.commitAdjust();
    expect(acked).not.toBeNull();
    const persisted = await api.record(recordId);
    expect(jointsEqual(store.selected!.joints, persisted.joints)).toBe(true);
  });

  it("undo restores the pre-adjustment joint list exactly, server-side", async () => {
    const { sceneId, recordId } = await freshHypothesis();
    const store = new Store(api);
    await store.loadScene(sceneId);
    store.select(recordId);
    const original = store.selected!.joints.map((j) => [j[0], j[1]] as const);
    store.draftScale(1.7);
    store.draftTranslate(6, 6);
    await store.commitAdjust();
    await store.undo();
    const persisted = await api.record(recordId);
    expect(jointsEqual(persisted.joints, original)).toBe(true);
  });

  it("accept and reject persist across a service restart", async () => {
    const a = await freshHypothesis();
    await api.accept(a.recordId);
    const b = await freshHypothesis();
    await api.reject(b.recordId);

    await stopServer();
    await startServer();

    const accepted = await api.record(a.recordId);
    const rejected = await api.record(b.recordId);
    expect(accepted.status).toBe("accepted");
    expect(rejected.status).toBe("rejected");
  });
});
