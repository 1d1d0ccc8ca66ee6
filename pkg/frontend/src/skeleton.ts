/** Joint schema shared with the service: 17 named joints, fixed order. */

export const JOINT_NAMES = [
  "head_top",
  "neck",
  "right_shoulder",
  "right_elbow",
  "right_wrist",
  "left_shoulder",
  "left_elbow",
  "left_wrist",
  "chest",
  "spine",
  "pelvis",
  "right_hip",
  "right_knee",
  "right_ankle",
  "left_hip",
  "left_knee",
  "left_ankle",
] as const;

export const N_JOINTS = JOINT_NAMES.length;

/** Bone list as joint-index pairs; must match the server's rendering order. */
export const BONES: ReadonlyArray<readonly [number, number]> = [
  [0, 1], [1, 8], [8, 9], [9, 10],
  [1, 2], [2, 3], [3, 4],
  [1, 5], [5, 6], [6, 7],
  [10, 11], [11, 12], [12, 13],
  [10, 14], [14, 15], [15, 16],
];

export type Point = readonly [number, number];
export type Joints = Point[];

export const STATUS_COLORS: Record<string, string> = {
  hypothesis: "#ffcc00",
  accepted: "#2ecc71",
  adjusted: "#27dfae",
  rejected: "#e74c3c",
};
