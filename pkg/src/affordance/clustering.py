"""Pose vocabulary construction: k-medoid clustering under the shape distance.

The medoid update is the classic alternation — assign every sample to its
nearest medoid, then re-pick each cluster's medoid as the member minimizing
the within-cluster distance sum — iterated until the medoid set is stable.
All tie-breaks go to the lowest index, so a (seed, input) pair always yields
bit-identical output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointFormatError, EmptyInputError, InvalidKError, ShapeError
from .pose import N_JOINTS, NormalizedPose, Pose, joint_schema_hash, normalize, procrustes_distance


def pairwise_distances(poses: list) -> np.ndarray:
    """Symmetric matrix of shape distances; D[i][j] = distance(poses[i], poses[j])."""
    if len(poses) == 0:
        raise EmptyInputError("need at least one pose")
    n = len(poses)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = procrustes_distance(poses[i], poses[j])
            D[i, j] = d
            D[j, i] = d
    return D


@dataclass(frozen=True)
class KMedoidsResult:
    medoids: tuple          # sample indices, one per class id
    assignment: np.ndarray  # sample index -> class id
    cost: float             # sum of point-to-assigned-medoid distances
    cost_history: tuple     # cost after each assignment step, non-increasing
    n_iter: int


def _assign(D: np.ndarray, medoids) -> np.ndarray:
    # argmin is stable: ties go to the lowest class id
    assignment = np.argmin(D[:, medoids], axis=1)
    for cid, m in enumerate(medoids):
        assignment[m] = cid  # a medoid always belongs to its own cluster
    return assignment


def _cost(D: np.ndarray, medoids, assignment) -> float:
    med = np.asarray(medoids)
    return float(D[np.arange(D.shape[0]), med[assignment]].sum())


def _alternate(D: np.ndarray, init: list[int], k: int, max_iter: int) -> KMedoidsResult:
    """One alternation + swap run from the given initial medoids."""
    n = D.shape[0]
    medoids = list(init)
    assignment = _assign(D, medoids)
    history = [_cost(D, medoids, assignment)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_medoids = list(medoids)
        for cid in range(k):
            members = np.where(assignment == cid)[0]
            if members.size == 0:
                # unreachable with medoid-forced assignment; repair by
                # promoting the globally farthest point to a fresh medoid
                far = np.argmax(D[np.arange(n), np.asarray(medoids)[assignment]])
                new_medoids[cid] = int(far)
                continue
            within = D[np.ix_(members, members)].sum(axis=0)
            new_medoids[cid] = int(members[np.argmin(within)])
        if new_medoids == list(medoids):
            break
        medoids = new_medoids
        assignment = _assign(D, medoids)
        history.append(_cost(D, medoids, assignment))

    # swap phase: greedily apply the best (medoid, non-medoid) exchange until
    # none improves; the alternation alone stalls in poor local optima
    for _ in range(max_iter):
        cost_now = history[-1]
        best_swap, best_cost = None, cost_now
        in_set = np.zeros(n, dtype=bool)
        in_set[medoids] = True
        candidates = np.where(~in_set)[0]
        if candidates.size == 0:
            break
        for ci in range(k):
            others = [m for j, m in enumerate(medoids) if j != ci]
            min_other = (D[:, others].min(axis=1) if others
                         else np.full(n, np.inf))
            costs = np.minimum(min_other[:, None], D[:, candidates]).sum(axis=0)
            local_best = int(np.argmin(costs))
            if costs[local_best] < best_cost - 1e-12:
                best_cost = float(costs[local_best])
                best_swap = (ci, int(candidates[local_best]))
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        assignment = _assign(D, medoids)
        history.append(_cost(D, medoids, assignment))
        n_iter += 1

    return KMedoidsResult(
        medoids=tuple(medoids),
        assignment=assignment,
        cost=history[-1],
        cost_history=tuple(history),
        n_iter=n_iter,
    )


def k_medoids(D: np.ndarray, k: int, seed: int, max_iter: int = 200,
              restarts: int = 8) -> KMedoidsResult:
    """Cluster a distance matrix into k medoids.

    Runs the alternation from several greedy farthest-point seedings (the
    seeded RNG picks the root medoid of each restart) and keeps the lowest
    final cost; the alternation alone lands in local optima too often.
    Within every run the objective never increases across iterations;
    `cost_history` exposes the winning run's trace for verification.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeError(f"distance matrix must be square, got {D.shape}")
    n = D.shape[0]
    if n == 0:
        raise EmptyInputError("empty distance matrix")
    if not 1 <= k <= n:
        raise InvalidKError(f"k must be in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    inits: list[list[int]] = []
    # greedy BUILD seeding: each new medoid is the point cutting the current
    # cost the most
    build = [int(np.argmin(D.sum(axis=0)))]
    while len(build) < k:
        min_d = D[:, build].min(axis=1)
        gains = np.maximum(min_d[:, None] - D, 0.0).sum(axis=0)
        gains[build] = -np.inf
        build.append(int(np.argmax(gains)))
    inits.append(build)
    # farthest-point seeding from a seeded root, then random k-subsets: the
    # deterministic seedings share basins often enough that diversity pays
    root = int(rng.integers(n))
    fp = [root]
    while len(fp) < k:
        min_d = D[:, fp].min(axis=1)
        min_d[fp] = -np.inf
        fp.append(int(np.argmax(min_d)))
    inits.append(fp)
    for _ in range(max(0, restarts - 2)):
        inits.append([int(i) for i in rng.permutation(n)[:k]])

    best: KMedoidsResult | None = None
    for init in inits:
        result = _alternate(D, init, k, max_iter)
        if best is None or result.cost < best.cost - 1e-15:
            best = result
    return best


class PoseVocabulary:
    """K medoid poses in the canonical frame, the categorical prediction targets."""

    __slots__ = ("centers", "assignment", "seed")

    def __init__(self, centers, assignment=None, seed=None):
        if len(centers) == 0:
            raise EmptyInputError("vocabulary needs at least one center")
        for c in centers:
            if not isinstance(c, NormalizedPose):
                raise ShapeError("vocabulary centers must be NormalizedPose")
        self.centers = tuple(centers)
        self.assignment = None if assignment is None else np.asarray(assignment, dtype=np.int64)
        self.seed = seed

    @property
    def k(self) -> int:
        return len(self.centers)


def build_vocabulary(poses: list, k: int, seed: int) -> PoseVocabulary:
    """Normalize training poses, cluster them, and keep the medoids as centers."""
    normalized = [normalize(p) for p in poses]
    D = pairwise_distances(normalized)
    result = k_medoids(D, k, seed)
    centers = [normalized[m] for m in result.medoids]
    return PoseVocabulary(centers, assignment=result.assignment, seed=seed)


def assign_class(pose: Pose | NormalizedPose, vocab: PoseVocabulary) -> int:
    """Nearest vocabulary center under the shape distance; ties to the lowest id."""
    q = normalize(pose)
    dists = [procrustes_distance(q, c) for c in vocab.centers]
    return int(np.argmin(dists))


# ---------------------------------------------------------------------------
# Vocabulary file format (versioned text artifact)
#
#   affordance-vocab v1
#   meta {...json: k, seed, joint_schema_hash...}
#   center <id> <x1> <y1> ... <x17> <y17>     (repr'd floats, round-trip exact)
#   checksum <sha256 hex of all preceding lines joined with '\n'>
# ---------------------------------------------------------------------------

_VOCAB_MAGIC = "affordance-vocab v1"


def _checksum(lines: list[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def save_vocabulary(vocab: PoseVocabulary, path) -> str:
    """Write the vocabulary as a versioned text artifact; returns its checksum."""
    meta = {"joint_schema_hash": joint_schema_hash(), "k": vocab.k, "seed": vocab.seed}
    lines = [_VOCAB_MAGIC, "meta " + json.dumps(meta, sort_keys=True)]
    for cid, center in enumerate(vocab.centers):
        coords = " ".join(repr(float(v)) for v in center.joints.ravel())
        lines.append(f"center {cid} {coords}")
    digest = _checksum(lines)
    lines.append("checksum " + digest)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return digest


def load_vocabulary(path) -> tuple[PoseVocabulary, str]:
    """Read a vocabulary artifact; returns (vocabulary, checksum)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _VOCAB_MAGIC:
        raise CheckpointFormatError(f"not a vocabulary file: {path}")
    if len(lines) < 3 or not lines[-1].startswith("checksum "):
        raise CheckpointFormatError("vocabulary file is truncated")
    digest = lines[-1].split(" ", 1)[1]
    if _checksum(lines[:-1]) != digest:
        raise CheckpointFormatError("vocabulary checksum mismatch")
    meta = json.loads(lines[1].split(" ", 1)[1])
    if meta.get("joint_schema_hash") != joint_schema_hash():
        raise CheckpointFormatError("vocabulary was built with a different joint schema")
    centers = []
    for line in lines[2:-1]:
        parts = line.split()
        if parts[0] != "center":
            raise CheckpointFormatError(f"unexpected line in vocabulary file: {line[:40]}")
        vals = np.array([float(v) for v in parts[2:]]).reshape(N_JOINTS, 2)
        centers.append(NormalizedPose(vals))
    return PoseVocabulary(centers, seed=meta.get("seed")), digest
