"""The two-stage affordance model.

Stage one classifies which vocabulary pose fits a scene location; stage two
is a conditional VAE over the 36-d scale/deformation vector that turns the
chosen center into a concrete pose. Both stages condition on the same
three-crop features; the VAE's class/feature condition trunk is shared
between its encoder and decoder (same parameter slots, so one update moves
both).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import PoseVocabulary
from .errors import EmptyInputError, ShapeError, StateError, TrainingDivergedError
from .nn import (
    AdamState,
    Dense,
    DenseNet,
    GaussianParams,
    ParamStore,
    adam_step,
    kl_to_standard_normal,
    reparameterize,
    reparameterize_backward,
    softmax,
    softmax_cross_entropy,
)
from .pose import Pose, ScaleDeform, decode, pose_euclidean_distance

# decoded scales are floored here before building a pose; a freshly
# initialized decoder can emit non-positive scales that decode() rejects
MIN_SCALE = 1e-3


@dataclass
class TrainConfig:
    hidden: int = 512
    latent_dim: int = 30
    lr: float = 2e-4
    lr_decay: float = 1.0  # per-epoch geometric factor; 1.0 = constant lr
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 64
    lam: float = 1.0  # weight on the KL term

    def validate(self) -> None:
        if self.hidden < 1 or self.latent_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ShapeError("hidden, latent_dim, epochs, batch_size must be >= 1")
        if self.lam < 0:
            raise ShapeError("KL weight must be >= 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ShapeError("lr_decay must be in (0, 1]")


def _as_feature_matrix(features_list, feat_dim: int) -> np.ndarray:
    """(N, 3F) matrix from per-record (3, F) crop features."""
    out = np.empty((len(features_list), 3 * feat_dim))
    for i, f in enumerate(features_list):
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (3, feat_dim):
            raise ShapeError(f"record features must be (3, {feat_dim}), got {f.shape}")
        out[i] = f.ravel()
    return out


class ClassifierModel:
    """Per-crop feature encoder with weights shared across the three crops,
    concatenated and fed to a dense head producing one logit per pose class."""

    def __init__(self, feat_dim: int, n_classes: int, hidden: int = 512, seed: int = 0):
        self.feat_dim = feat_dim
        self.n_classes = n_classes
        self.hidden = hidden
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        self.crop_encoder = Dense(self.store, "crop", feat_dim, hidden, "relu", rng)
        self.head = DenseNet(self.store, "head", [3 * hidden, hidden, n_classes],
                             ["relu", "identity"], rng)
        self.trained = False

    def _forward(self, feats: np.ndarray):
        # feats (B, 3F); the encoder runs once per crop with shared weights
        b = feats.shape[0]
        crops = feats.reshape(b, 3, self.feat_dim)
        encoded, caches = [], []
        for c in range(3):
            h, cache = self.crop_encoder.forward(crops[:, c, :])
            encoded.append(h)
            caches.append(cache)
        concat = np.concatenate(encoded, axis=1)
        logits, head_caches = self.head.forward(concat)
        return logits, (caches, head_caches)

    def _backward(self, cache, grad_logits: np.ndarray) -> None:
        crop_caches, head_caches = cache
        grad_concat = self.head.backward(head_caches, grad_logits)
        parts = np.split(grad_concat, 3, axis=1)
        for c in range(3):
            self.crop_encoder.backward(crop_caches[c], parts[c])

    def logits(self, feats: np.ndarray) -> np.ndarray:
        out, _ = self._forward(np.atleast_2d(np.asarray(feats, dtype=np.float64)))
        return out

    def probabilities(self, feats: np.ndarray) -> np.ndarray:
        return softmax(self.logits(feats))


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)

    def add(self, **kwargs) -> None:
        self.epochs.append(kwargs)

    def last(self) -> dict:
        return self.epochs[-1]


def train_classifier(records, vocab: PoseVocabulary, config: TrainConfig,
                     seed: int) -> tuple[ClassifierModel, TrainingLog]:
    """Fit the pose-class classifier with softmax cross-entropy and Adam.

    Every record must carry cached (3, F) crop features and a ground-truth
    class id. Deterministic per seed.
    """
    config.validate()
    records = list(records)
    if not records:
        raise EmptyInputError("no training records")
    for r in records:
        if r.features is None or r.class_id is None:
            raise StateError(f"record {r.record_id!r} is missing features or a class id")
    feat_dim = np.asarray(records[0].features).shape[1]
    X = _as_feature_matrix([r.features for r in records], feat_dim)
    y = np.array([r.class_id for r in records], dtype=np.int64)

    model = ClassifierModel(feat_dim, vocab.k, config.hidden, seed)
    adam = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(seed)
    log = TrainingLog()
    n = len(records)
    for epoch in range(config.epochs):
        adam.lr = config.lr * config.lr_decay ** epoch
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits, cache = model._forward(X[idx])
            loss, grad = softmax_cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            model.store.zero_grads()
            model._backward(cache, grad)
            adam_step(adam, model.store.params, model.store.grads)
            losses.append(loss)
        probs = model.probabilities(X)
        acc = float((probs.argmax(axis=1) == y).mean())
        log.add(epoch=epoch, loss=float(np.mean(losses)), accuracy=acc)
    model.trained = True
    return model, log


def classify(model: ClassifierModel, feats) -> np.ndarray:
    """Probability distribution over the pose classes for one feature stack."""
    f = np.asarray(feats, dtype=np.float64)
    if f.shape == (3, model.feat_dim):
        f = f.ravel()
    if f.shape != (3 * model.feat_dim,):
        raise ShapeError(f"expected (3, {model.feat_dim}) features, got {f.shape}")
    return model.probabilities(f[None, :])[0]


class VAEModel:
    """Conditional VAE over standardized scale/deformation targets.

    The condition trunk (raw crop features concatenated with a two-layer
    encoding of the class vector) is shared between encoder and decoder: both
    read the same parameter slots, so mutating one side's trunk is mutating
    the other's.
    """

    TARGET_DIM = ScaleDeform.DIM

    def __init__(self, feat_dim: int, n_classes: int, hidden: int = 512,
                 latent_dim: int = 30, seed: int = 0):
        self.feat_dim = feat_dim
        self.n_classes = n_classes
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        cond_dim = 3 * feat_dim + hidden
        self.class_trunk = DenseNet(self.store, "cond.cls", [n_classes, hidden, hidden],
                                    ["relu", "relu"], rng)
        self.enc_target = DenseNet(self.store, "enc.y", [self.TARGET_DIM, hidden, hidden],
                                   ["relu", "relu"], rng)
        self.enc_head = Dense(self.store, "enc.out", cond_dim + hidden,
                              2 * latent_dim, "identity", rng)
        self.dec_latent = DenseNet(self.store, "dec.z", [latent_dim, hidden, hidden],
                                   ["relu", "relu"], rng)
        self.dec_head = Dense(self.store, "dec.out", cond_dim + hidden,
                              self.TARGET_DIM, "identity", rng)
        # per-dimension standardization of the 36-d targets, set by train_vae
        self.target_mean = np.zeros(self.TARGET_DIM)
        self.target_std = np.ones(self.TARGET_DIM)
        self.trained = False

    # -- condition trunk (shared slots) -------------------------------------
    def cond_forward(self, feats: np.ndarray, class_vec: np.ndarray):
        cls_repr, cache = self.class_trunk.forward(class_vec)
        return np.concatenate([feats, cls_repr], axis=1), cache

    def cond_backward(self, cache, grad_cond: np.ndarray) -> None:
        grad_cls = grad_cond[:, 3 * self.feat_dim:]
        self.class_trunk.backward(cache, grad_cls)

    # -- encoder -------------------------------------------------------------
    def encode(self, cond: np.ndarray, y_std: np.ndarray):
        y_repr, y_cache = self.enc_target.forward(y_std)
        joint = np.concatenate([cond, y_repr], axis=1)
        out, head_cache = self.enc_head.forward(joint)
        mu = out[:, :self.latent_dim]
        log_var = out[:, self.latent_dim:]
        return GaussianParams(mu, log_var), (y_cache, head_cache)

    def encode_backward(self, cache, grad_mu, grad_log_var):
        y_cache, head_cache = cache
        grad_out = np.concatenate([grad_mu, grad_log_var], axis=1)
        grad_joint = self.enc_head.backward(head_cache, grad_out)
        cond_dim = grad_joint.shape[1] - self.hidden
        grad_cond = grad_joint[:, :cond_dim]
        self.enc_target.backward(y_cache, grad_joint[:, cond_dim:])
        return grad_cond

    # -- decoder -------------------------------------------------------------
    def decode_net(self, cond: np.ndarray, z: np.ndarray):
        z_repr, z_cache = self.dec_latent.forward(z)
        joint = np.concatenate([cond, z_repr], axis=1)
        y_hat, head_cache = self.dec_head.forward(joint)
        return y_hat, (z_cache, head_cache)

    def decode_backward(self, cache, grad_y: np.ndarray):
        z_cache, head_cache = cache
        grad_joint = self.dec_head.backward(head_cache, grad_y)
        cond_dim = grad_joint.shape[1] - self.hidden
        grad_cond = grad_joint[:, :cond_dim]
        grad_z = self.dec_latent.backward(z_cache, grad_joint[:, cond_dim:])
        return grad_cond, grad_z

    # -- standardization -----------------------------------------------------
    def standardize(self, y: np.ndarray) -> np.ndarray:
        return (y - self.target_mean) / self.target_std

    def unstandardize(self, y_std: np.ndarray) -> np.ndarray:
        return y_std * self.target_std + self.target_mean

    # -- sampling ------------------------------------------------------------
    def sample_targets(self, feats: np.ndarray, class_vec: np.ndarray,
                       z: np.ndarray) -> np.ndarray:
        """Decode latent draws into unstandardized 36-d target vectors."""
        if not self.trained:
            raise StateError("VAE has not been trained")
        cond, _ = self.cond_forward(np.atleast_2d(feats), np.atleast_2d(class_vec))
        y_std, _ = self.decode_net(cond, np.atleast_2d(z))
        return self.unstandardize(y_std)


def vae_batch_loss(model: VAEModel, feats, class_vec, y_std, alpha, lam: float,
                   accumulate_grads: bool = True):
    """One forward/backward pass of the full VAE objective on a batch.

    Returns (reconstruction, kl) as batch means. The reconstruction term is
    the squared euclidean distance between the decoded and true standardized
    targets; the KL term pulls the encoder posterior to N(0, I).
    """
    b = y_std.shape[0]
    cond, cond_cache = model.cond_forward(feats, class_vec)
    g, enc_cache = model.encode(cond, y_std)
    z = reparameterize(g, alpha)
    y_hat, dec_cache = model.decode_net(cond, z)

    diff = y_hat - y_std
    recon = float(np.sum(diff ** 2) / b)
    kl_vec, kl_grad_mu, kl_grad_lv = kl_to_standard_normal(g)
    kl = float(np.mean(kl_vec))

    if accumulate_grads:
        grad_y_hat = 2.0 * diff / b
        grad_cond_dec, grad_z = model.decode_backward(dec_cache, grad_y_hat)
        rep_grad_mu, rep_grad_lv = reparameterize_backward(g, alpha, grad_z)
        grad_mu = rep_grad_mu + (lam / b) * kl_grad_mu
        grad_lv = rep_grad_lv + (lam / b) * kl_grad_lv
        grad_cond_enc = model.encode_backward(enc_cache, grad_mu, grad_lv)
        model.cond_backward(cond_cache, grad_cond_enc + grad_cond_dec)
    return recon, kl


def train_vae(records, vocab: PoseVocabulary, config: TrainConfig,
              seed: int) -> tuple[VAEModel, TrainingLog]:
    """Fit the conditional VAE on records carrying features, a class id, and
    an encoded ScaleDeform target.

    Targets are standardized per dimension over the training set; the
    statistics travel with the checkpoint. Conditioning during training is
    the one-hot ground-truth class.
    """
    config.validate()
    records = list(records)
    if not records:
        raise EmptyInputError("no training records")
    for r in records:
        if r.features is None or r.class_id is None or r.scale_deform is None:
            raise StateError(f"record {r.record_id!r} is missing features, class, or target")
    feat_dim = np.asarray(records[0].features).shape[1]
    X = _as_feature_matrix([r.features for r in records], feat_dim)
    y = np.stack([r.scale_deform.flatten() for r in records])
    classes = np.array([r.class_id for r in records], dtype=np.int64)
    onehot = np.zeros((len(records), vocab.k))
    onehot[np.arange(len(records)), classes] = 1.0

    model = VAEModel(feat_dim, vocab.k, config.hidden, config.latent_dim, seed)
    model.target_mean = y.mean(axis=0)
    std = y.std(axis=0)
    model.target_std = np.where(std > 1e-12, std, 1.0)
    y_std = model.standardize(y)

    adam = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(seed)
    log = TrainingLog()
    n = len(records)
    for epoch in range(config.epochs):
        adam.lr = config.lr * config.lr_decay ** epoch
        order = rng.permutation(n)
        recon_sum = kl_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            alpha = rng.standard_normal((len(idx), config.latent_dim))
            model.store.zero_grads()
            recon, kl = vae_batch_loss(model, X[idx], onehot[idx], y_std[idx],
                                       alpha, config.lam)
            if not (np.isfinite(recon) and np.isfinite(kl)):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            adam_step(adam, model.store.params, model.store.grads)
            recon_sum += recon
            kl_sum += kl
            n_batches += 1
        log.add(epoch=epoch, reconstruction=recon_sum / n_batches, kl=kl_sum / n_batches)
    model.trained = True
    return model, log


@dataclass
class VAESample:
    """One VAE training row: features, class id, encoded target."""

    record_id: str
    features: np.ndarray
    class_id: int
    scale_deform: ScaleDeform


def prepare_vae_samples(records, vocab: PoseVocabulary) -> list[VAESample]:
    """Encode each record's pose against its class center and anchor."""
    from .pose import encode

    rows = []
    for r in records:
        if r.features is None or r.class_id is None:
            raise StateError(f"record {r.record_id!r} is missing features or a class id")
        sd = encode(r.pose, vocab.centers[r.class_id], r.anchor)
        rows.append(VAESample(r.record_id, np.asarray(r.features), r.class_id, sd))
    return rows


@dataclass(frozen=True)
class GeneratedPose:
    pose: Pose
    class_id: int
    sd: ScaleDeform
    z: np.ndarray
    class_scores: np.ndarray


def _clamped_scale_deform(vec: np.ndarray) -> ScaleDeform:
    v = vec.copy()
    v[0] = max(v[0], MIN_SCALE)
    v[1] = max(v[1], MIN_SCALE)
    return ScaleDeform.from_flat(v)


def generate_pose(classifier: ClassifierModel, vae: VAEModel, feats, anchor,
                  vocab: PoseVocabulary, seed: int, n_samples: int = 1,
                  condition: str = "soft") -> list[GeneratedPose]:
    """Sample plausible poses at a scene location.

    The class is the classifier argmax; the decoder conditions on the full
    score vector (``condition="soft"``, the default) or on the argmax one-hot
    (``condition="onehot"``). Each sample draws its own latent from N(0, I).
    """
    if not getattr(classifier, "trained", False) or not vae.trained:
        raise StateError("both models must be trained before generation")
    if condition not in ("soft", "onehot"):
        raise ShapeError(f"unknown conditioning mode {condition!r}")
    scores = classify(classifier, feats)
    class_id = int(np.argmax(scores))
    if condition == "soft":
        class_vec = scores
    else:
        class_vec = np.zeros_like(scores)
        class_vec[class_id] = 1.0
    f = np.asarray(feats, dtype=np.float64).ravel()
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, vae.latent_dim))
    targets = vae.sample_targets(np.tile(f, (n_samples, 1)),
                                 np.tile(class_vec, (n_samples, 1)), z)
    center = vocab.centers[class_id]
    out = []
    for i in range(n_samples):
        sd = _clamped_scale_deform(targets[i])
        out.append(GeneratedPose(pose=decode(sd, center, anchor), class_id=class_id,
                                 sd=sd, z=z[i].copy(), class_scores=scores))
    return out


def score_pose(classifier: ClassifierModel, vae: VAEModel, feats, anchor,
               candidate: Pose, m: int, vocab: PoseVocabulary, seed: int,
               delta: float, condition: str = "soft") -> tuple[float, bool]:
    """Plausibility of a candidate pose at a location.

    Generates m poses at the anchor, averages their euclidean joint distance
    to the candidate, and flags the candidate plausible when that average is
    below delta. Deterministic per seed.
    """
    if m < 1:
        raise ShapeError(f"m must be >= 1, got {m}")
    if not isinstance(candidate, Pose):
        raise ShapeError("candidate must be a Pose")
    samples = generate_pose(classifier, vae, feats, anchor, vocab, seed,
                            n_samples=m, condition=condition)
    distance = float(np.mean([pose_euclidean_distance(s.pose, candidate) for s in samples]))
    return distance, distance < delta
