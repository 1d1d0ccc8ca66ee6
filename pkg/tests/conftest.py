"""Shared fixtures: the separable-feature helpers and a trained pose world
(vocabulary + classifier + VAE over three archetype classes)."""

from types import SimpleNamespace

import numpy as np
import pytest

from affordance.clustering import assign_class, build_vocabulary
from affordance.model import TrainConfig, prepare_vae_samples, train_classifier, train_vae
from affordance.synthetic import archetype_pose

FEAT_DIM = 12


def block_features(kind: int, n_kinds: int = 3, dim: int = FEAT_DIM,
                   rng: np.random.Generator | None = None, noise: float = 0.02):
    """(3, dim) crop features with a one-hot block per kind; linearly separable."""
    f = np.zeros((3, dim))
    width = dim // n_kinds
    f[:, kind * width:(kind + 1) * width] = 1.0
    if rng is not None:
        f = f + rng.normal(0.0, noise, size=f.shape)
    return f / np.linalg.norm(f, axis=1, keepdims=True)


class PoseWorld(SimpleNamespace):
    pass


@pytest.fixture(scope="session")
def pose_world():
    """Three archetype classes with class-coded features, trained end to end."""
    rng = np.random.default_rng(42)
    names = ("stand", "sit", "lie")
    heights = {"stand": 120.0, "sit": 80.0, "lie": 50.0}

    vocab_poses = [archetype_pose(n, height=100.0, center=(0, 0), jitter=0.01, rng=rng)
                   for n in names for _ in range(4)]
    vocab = build_vocabulary(vocab_poses, 3, seed=0)
    kind_to_class = {i: assign_class(archetype_pose(n, height=100.0), vocab)
                     for i, n in enumerate(names)}
    assert len(set(kind_to_class.values())) == 3

    records = []
    for ki, name in enumerate(names):
        for i in range(40):
            h = heights[name] * rng.uniform(0.9, 1.1)
            anchor = (float(rng.uniform(100, 540)), float(rng.uniform(100, 380)))
            pose = archetype_pose(name, height=h, center=anchor, jitter=0.01, rng=rng)
            records.append(SimpleNamespace(
                record_id=f"{name}-{i}",
                features=block_features(ki, rng=rng),
                class_id=kind_to_class[ki],
                pose=pose,
                anchor=anchor,
            ))

    clf, clf_log = train_classifier(
        records, vocab, TrainConfig(hidden=24, lr=5e-3, epochs=30, batch_size=32), seed=1)
    vae, vae_log = train_vae(
        prepare_vae_samples(records, vocab), vocab,
        TrainConfig(hidden=48, latent_dim=4, lr=3e-3, lr_decay=0.99,
                    epochs=300, batch_size=256, lam=1.0), seed=2)

    return PoseWorld(
        names=names,
        heights=heights,
        vocab=vocab,
        kind_to_class=kind_to_class,
        records=records,
        classifier=clf,
        classifier_log=clf_log,
        vae=vae,
        vae_log=vae_log,
    )
