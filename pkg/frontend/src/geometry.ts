/** Pure pose geometry used by the adjustment interactions. All transforms
 * are about the bounding-box center so scaling never drags the pose away
 * from its scene location. */

import type { Joints, Point } from "./skeleton.js";

export interface BBox {
  xMin: number;
  yMin: number;
  xMax: number;
  yMax: number;
}

export function bbox(joints: Joints): BBox {
  let xMin = Infinity, yMin = Infinity, xMax = -Infinity, yMax = -Infinity;
  for (const [x, y] of joints) {
    if (x < xMin) xMin = x;
    if (x > xMax) xMax = x;
    if (y < yMin) yMin = y;
    if (y > yMax) yMax = y;
  }
  return { xMin, yMin, xMax, yMax };
}

export function bboxCenter(joints: Joints): Point {
  const b = bbox(joints);
  return [(b.xMin + b.xMax) / 2, (b.yMin + b.yMax) / 2];
}

export function bboxHeight(joints: Joints): number {
  const b = bbox(joints);
  return b.yMax - b.yMin;
}

export function translate(joints: Joints, dx: number, dy: number): Joints {
  return joints.map(([x, y]) => [x + dx, y + dy] as const);
}

/** Uniform scale about the bounding-box center; the center stays fixed. */
export function scaleAboutCenter(joints: Joints, factor: number): Joints {
  const [cx, cy] = bboxCenter(joints);
  return joints.map(([x, y]) => [(x - cx) * factor + cx, (y - cy) * factor + cy] as const);
}

export function moveJoint(joints: Joints, index: number, to: Point): Joints {
  return joints.map((j, i) => (i === index ? to : j));
}

/** Index of the joint within `radius` of the point, or -1. Nearest wins. */
export function hitTestJoint(joints: Joints, p: Point, radius: number): number {
  let best = -1;
  let bestDist = radius;
  joints.forEach(([x, y], i) => {
    const d = Math.hypot(x - p[0], y - p[1]);
    if (d <= bestDist) {
      bestDist = d;
      best = i;
    }
  });
  return best;
}

export function insideBBox(joints: Joints, p: Point, margin = 0): boolean {
  const b = bbox(joints);
  return p[0] >= b.xMin - margin && p[0] <= b.xMax + margin &&
         p[1] >= b.yMin - margin && p[1] <= b.yMax + margin;
}

/** Composite transform the adjust endpoint records as metadata. */
export interface AdjustTransform {
  scale: number;
  translate: Point;
}

export function applyTransform(joints: Joints, t: AdjustTransform): Joints {
  return translate(scaleAboutCenter(joints, t.scale), t.translate[0], t.translate[1]);
}

export function jointsEqual(a: Joints, b: Joints, tol = 0): boolean {
  if (a.length !== b.length) return false;
  return a.every(([x, y], i) => Math.abs(x - b[i][0]) <= tol && Math.abs(y - b[i][1]) <= tol);
}
