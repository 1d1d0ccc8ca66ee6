/** DOM wiring: scene list, canvas interactions, keyboard triage.
 *
 * Keys: a=accept r=reject j/n=next k/p=previous u=undo enter=commit draft
 * esc=discard draft/preview +/-=scale p1..p9 adopt preview sample (digit).
 * Drag inside the selection box translates; drag a joint dot moves that
 * joint; shift+drag scales about the bbox center.
 */

import { AnnotationApi } from "./api.js";
import { hitTestJoint, insideBBox, bboxCenter } from "./geometry.js";
import { render } from "./draw.js";
import { Store } from "./state.js";
import type { Point } from "./skeleton.js";

const api = new AnnotationApi("");
const store = new Store(api);

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const sceneList = document.getElementById("scene-list") as HTMLUListElement;
const recordInfo = document.getElementById("record-info") as HTMLDivElement;
const noticeBar = document.getElementById("notice") as HTMLDivElement;

let image: HTMLImageElement | null = null;

function repaint(): void {
  const records = [...store.records.values()].sort((a, b) =>
    a.record_id.localeCompare(b.record_id));
  render(ctx, image, records, store.selectedId, store.draft?.joints ?? null,
         store.preview);
  const rec = store.selected;
  recordInfo.textContent = rec
    ? `${rec.record_id}  status=${rec.status}  source=${rec.source}` +
      (rec.class_id === null ? "" : `  class=${rec.class_id}`) +
      (store.draft ? "  [draft]" : "")
    : "no selection";
  if (store.notice) {
    noticeBar.textContent = store.notice.text;
    noticeBar.className = `notice ${store.notice.kind}`;
  } else {
    noticeBar.textContent = "";
    noticeBar.className = "notice";
  }
}

async function openScene(sceneId: string): Promise<void> {
  await store.loadScene(sceneId);
  image = new Image();
  image.onload = () => {
    canvas.width = image!.naturalWidth;
    canvas.height = image!.naturalHeight;
    repaint();
  };
  image.onerror = () => {
    image = null;
    repaint();
  };
  image.src = api.sceneImageUrl(sceneId);
  repaint();
}

async function refreshSceneList(): Promise<void> {
  const scenes = await api.scenes();
  sceneList.replaceChildren(
    ...scenes.map((s) => {
      const li = document.createElement("li");
      li.textContent = `${s.scene_id} (${s.n_hypotheses}/${s.n_records} open)`;
      li.onclick = () => void openScene(s.scene_id).then(repaint);
      return li;
    }),
  );
}

function canvasPoint(ev: MouseEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) * canvas.width) / rect.width,
    ((ev.clientY - rect.top) * canvas.height) / rect.height,
  ];
}

type DragMode =
  | { kind: "none" }
  | { kind: "joint"; index: number }
  | { kind: "move"; last: Point }
  | { kind: "scale"; center: Point; startDist: number };

let drag: DragMode = { kind: "none" };

canvas.addEventListener("mousedown", (ev) => {
  const p = canvasPoint(ev);
  const joints = store.displayJoints();
  if (!joints) return;
  if (ev.shiftKey) {
    const center = bboxCenter(joints);
    drag = { kind: "scale", center, startDist: Math.hypot(p[0] - center[0], p[1] - center[1]) };
    return;
  }
  const hit = hitTestJoint(joints, p, 8);
  if (hit >= 0) {
    drag = { kind: "joint", index: hit };
  } else if (insideBBox(joints, p, 8)) {
    drag = { kind: "move", last: p };
  } else {
    // click on empty scene: ask the model what fits there
    void store.requestPreview(p, 5).then(repaint);
  }
});

canvas.addEventListener("mousemove", (ev) => {
  if (drag.kind === "none") return;
  const p = canvasPoint(ev);
  if (drag.kind === "joint") {
    store.draftMoveJoint(drag.index, p);
  } else if (drag.kind === "move") {
    store.draftTranslate(p[0] - drag.last[0], p[1] - drag.last[1]);
    drag.last = p;
  } else {
    const dist = Math.hypot(p[0] - drag.center[0], p[1] - drag.center[1]);
    if (drag.startDist > 1 && dist > 1) {
      store.draftScale(dist / drag.startDist);
      drag.startDist = dist;
    }
  }
  repaint();
});

window.addEventListener("mouseup", () => {
  drag = { kind: "none" };
});

window.addEventListener("keydown", (ev) => {
  const run = (p: Promise<unknown>) => void p.then(repaint).catch((err) => {
    store.notice = { kind: "error", text: String(err) };
    repaint();
  });
  if (ev.key >= "1" && ev.key <= "9" && store.preview) {
    run(store.adoptPreviewSample(Number(ev.key) - 1));
    return;
  }
  switch (ev.key) {
    case "a": run(store.accept().then(() => store.selectNext())); break;
    case "r": run(store.reject().then(() => store.selectNext())); break;
    case "j":
    case "n": store.selectNext(); repaint(); break;
    case "k":
    case "p": store.selectNext(-1); repaint(); break;
    case "u": run(store.undo()); break;
    case "Enter": run(store.commitAdjust()); break;
    case "Escape": store.discardDraft(); store.clearPreview(); repaint(); break;
    case "+": store.draftScale(1.05); repaint(); break;
    case "-": store.draftScale(1 / 1.05); repaint(); break;
  }
});

void refreshSceneList().then(async () => {
  const scenes = await api.scenes();
  if (scenes.length > 0) await openScene(scenes[0].scene_id);
  repaint();
});
