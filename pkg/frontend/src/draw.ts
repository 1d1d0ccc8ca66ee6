/** Canvas rendering: scene raster, skeleton overlays, selection handles,
 * and preview samples. */

import type { Prediction, RecordView } from "./api.js";
import { bbox } from "./geometry.js";
import { BONES, STATUS_COLORS, type Joints } from "./skeleton.js";

export const HANDLE_RADIUS = 5;

export function drawSkeleton(ctx: CanvasRenderingContext2D, joints: Joints,
                             color: string, lineWidth = 2, jointRadius = 3): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = lineWidth;
  for (const [a, b] of BONES) {
    ctx.beginPath();
    ctx.moveTo(joints[a][0], joints[a][1]);
    ctx.lineTo(joints[b][0], joints[b][1]);
    ctx.stroke();
  }
  ctx.fillStyle = color;
  for (const [x, y] of joints) {
    ctx.beginPath();
    ctx.arc(x, y, jointRadius, 0, Math.PI * 2);
    ctx.fill();
  }
}

export function drawSelectionBox(ctx: CanvasRenderingContext2D, joints: Joints): void {
  const b = bbox(joints);
  ctx.save();
  ctx.strokeStyle = "#ffffff";
  ctx.setLineDash([5, 4]);
  ctx.lineWidth = 1;
  ctx.strokeRect(b.xMin - 6, b.yMin - 6, b.xMax - b.xMin + 12, b.yMax - b.yMin + 12);
  ctx.restore();
}

export function render(ctx: CanvasRenderingContext2D,
                       image: HTMLImageElement | null,
                       records: RecordView[],
                       selectedId: string | null,
                       draftJoints: Joints | null,
                       preview: Prediction | null): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  if (image) ctx.drawImage(image, 0, 0);

  for (const rec of records) {
    if (rec.status === "rejected" && rec.record_id !== selectedId) continue;
    const selected = rec.record_id === selectedId;
    const joints = selected && draftJoints ? draftJoints : rec.joints;
    const color = STATUS_COLORS[rec.status] ?? "#cccccc";
    drawSkeleton(ctx, joints, color, selected ? 3 : 1.5, selected ? HANDLE_RADIUS : 2);
    if (selected) drawSelectionBox(ctx, joints);
  }

  if (preview) {
    ctx.save();
    ctx.globalAlpha = 0.75;
    preview.samples.forEach((sample, i) => {
      drawSkeleton(ctx, sample.joints, "#7fb3ff", 1.5, 2);
      const [x, y] = sample.joints[0];
      ctx.fillStyle = "#7fb3ff";
      ctx.font = "11px monospace";
      ctx.fillText(`#${i + 1} c${sample.class_id} d=${sample.distance_to_point.toFixed(1)}`,
                   x + 6, y - 6);
    });
    ctx.restore();
  }
}
