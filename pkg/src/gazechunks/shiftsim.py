"""Desk-scale simulation of gaze-preserving domain-shift training.

A toy differentiable pipeline of three affine maps stands in for the
encoder / generator / gaze extractor of a GAN-inversion stack:

* E (learnable) embeds an image vector into a low-dimensional latent,
* G (fixed after construction, standing in for a pretrained generator)
  maps the latent back to image space,
* F (trained in phase 1, frozen in phase 2 unless joint mode is on)
  predicts (yaw, pitch) in radians from an image vector.

Phase 1 fits F on raw source images.  Phase 2 trains E on a weighted sum
of reconstruction loss, two pluggable perceptual/identity slots
(defaulting to zero), and the gaze-distortion loss
``|| v(F(G(E(I)))) - g ||^2`` where both sides are 3D unit gaze vectors.
Keeping every map affine makes all gradients hand-derivable and exactly
checkable against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ConfigError,
    GazeLabel,
    InsufficientDataError,
    TrainingDivergedError,
    angles_to_vector,
    gaze_to_vector,
)
from .regressor import INIT_SCALE, TrainConfig

# Floor for the finite-difference relative-error denominator: coordinates
# whose gradients sit below this scale are compared absolutely against it,
# which keeps difference noise from inflating the reported error.
FD_REL_FLOOR = 1e-3


@dataclass
class LossWeights:
    """Weights of the four encoder-loss terms; all must be nonnegative."""

    lambda_l2: float = 1.0
    lambda_lpips: float = 0.0
    lambda_sim: float = 0.0
    lambda_gd: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lambda_l2", "lambda_lpips", "lambda_sim", "lambda_gd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


class ZeroLoss:
    """Default pluggable loss: identically zero with zero gradient.

    Stands in for the perceptual / identity terms that require pretrained
    networks.  Custom plugs implement the same two methods; ``grad`` is
    the derivative with respect to the reconstruction.
    """

    def value(self, images: np.ndarray, recons: np.ndarray) -> np.ndarray:
        return np.zeros(images.shape[0])

    def grad(self, images: np.ndarray, recons: np.ndarray) -> np.ndarray:
        return np.zeros_like(recons)


@dataclass
class ToyPipelineParams:
    """Affine encoder/generator/extractor weights.

    The generator arrays are frozen (read-only) at construction; the
    ``extractor_trained`` flag gates phase-2 training.
    """

    w_enc: np.ndarray  # (image_dim, latent_dim)
    b_enc: np.ndarray  # (latent_dim,)
    w_gen: np.ndarray  # (latent_dim, image_dim), fixed
    b_gen: np.ndarray  # (image_dim,), fixed
    w_ext: np.ndarray  # (image_dim, 2)
    b_ext: np.ndarray  # (2,)
    extractor_trained: bool = False

    def __post_init__(self) -> None:
        m, d = self.w_enc.shape
        if self.b_enc.shape != (d,) or self.w_gen.shape != (d, m) or self.b_gen.shape != (m,):
            raise ConfigError("encoder/generator shapes do not chain")
        if self.w_ext.shape != (m, 2) or self.b_ext.shape != (2,):
            raise ConfigError("extractor shapes do not chain")
        self.w_gen.flags.writeable = False
        self.b_gen.flags.writeable = False

    @property
    def image_dim(self) -> int:
        return int(self.w_enc.shape[0])

    @property
    def latent_dim(self) -> int:
        return int(self.w_enc.shape[1])

    def copy(self) -> "ToyPipelineParams":
        # generator arrays are immutable and intentionally shared
        return replace(
            self,
            w_enc=self.w_enc.copy(),
            b_enc=self.b_enc.copy(),
            w_ext=self.w_ext.copy(),
            b_ext=self.b_ext.copy(),
        )


@dataclass
class DomainPair:
    """Source/target image vectors with gaze labels, sharing one image dim."""

    source_images: np.ndarray
    source_labels_deg: np.ndarray  # (n, 2) yaw, pitch
    target_images: np.ndarray
    target_labels_deg: np.ndarray

    def __post_init__(self) -> None:
        if self.source_images.ndim != 2 or self.target_images.ndim != 2:
            raise ConfigError("image sets must be 2-D arrays")
        if self.source_images.shape[1] != self.target_images.shape[1]:
            raise ConfigError("source and target image dimensions differ")


def init_pipeline(image_dim: int, latent_dim: int, seed: int = 0) -> ToyPipelineParams:
    """Seeded construction; the generator is drawn once and then frozen."""
    rng = np.random.default_rng(seed)
    w_enc = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(image_dim, latent_dim))
    b_enc = rng.uniform(-INIT_SCALE, INIT_SCALE, size=latent_dim)
    w_gen = rng.standard_normal((latent_dim, image_dim)) / math.sqrt(latent_dim)
    b_gen = np.zeros(image_dim)
    w_ext = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(image_dim, 2))
    b_ext = rng.uniform(-INIT_SCALE, INIT_SCALE, size=2)
    return ToyPipelineParams(w_enc, b_enc, w_gen, b_gen, w_ext, b_ext)


def encode(params: ToyPipelineParams, images: np.ndarray) -> np.ndarray:
    return images @ params.w_enc + params.b_enc


def generate(params: ToyPipelineParams, latents: np.ndarray) -> np.ndarray:
    return latents @ params.w_gen + params.b_gen


def extract(params: ToyPipelineParams, images: np.ndarray) -> np.ndarray:
    """(batch, 2) predicted (yaw, pitch) in radians."""
    return images @ params.w_ext + params.b_ext


def shift(params: ToyPipelineParams, images: np.ndarray) -> np.ndarray:
    """The domain shifter: reconstruction through the frozen generator."""
    return generate(params, encode(params, images))


def _labels_to_vectors(labels_deg: np.ndarray) -> np.ndarray:
    labels_deg = np.asarray(labels_deg, dtype=np.float64)
    return angles_to_vector(np.radians(labels_deg[:, 0]), np.radians(labels_deg[:, 1]))


def _angle_jacobian_pullback(angles: np.ndarray, dvec: np.ndarray) -> np.ndarray:
    """Pull a gradient on the 3D gaze vector back to (yaw, pitch) angles."""
    yaw, pitch = angles[:, 0], angles[:, 1]
    sy, cy = np.sin(yaw), np.cos(yaw)
    sp, cp = np.sin(pitch), np.cos(pitch)
    dyaw = cp * cy * dvec[:, 0] - cp * sy * dvec[:, 2]
    dpitch = -sp * sy * dvec[:, 0] + cp * dvec[:, 1] - sp * cy * dvec[:, 2]
    return np.stack([dyaw, dpitch], axis=1)


def _batch_loss_and_grads(
    params: ToyPipelineParams,
    images: np.ndarray,
    gaze_vectors: np.ndarray,
    weights: LossWeights,
    lpips_loss: ZeroLoss,
    sim_loss: ZeroLoss,
    with_extractor_grads: bool,
):
    """Mean total loss over the batch and gradients for E (and optionally F)."""
    b = images.shape[0]
    latents = encode(params, images)
    recons = generate(params, latents)
    angles = extract(params, recons)
    vecs = angles_to_vector(angles[:, 0], angles[:, 1])

    resid_rec = images - recons
    l2 = np.sum(resid_rec * resid_rec, axis=1)
    resid_gaze = vecs - gaze_vectors
    lgd = np.sum(resid_gaze * resid_gaze, axis=1)
    lp = lpips_loss.value(images, recons)
    ls = sim_loss.value(images, recons)
    total = float(
        np.mean(
            weights.lambda_l2 * l2
            + weights.lambda_lpips * lp
            + weights.lambda_sim * ls
            + weights.lambda_gd * lgd
        )
    )

    dangles = _angle_jacobian_pullback(angles, 2.0 * resid_gaze)
    drecon = weights.lambda_gd * (dangles @ params.w_ext.T)
    drecon += weights.lambda_l2 * (-2.0 * resid_rec)
    if weights.lambda_lpips != 0.0:
        drecon += weights.lambda_lpips * lpips_loss.grad(images, recons)
    if weights.lambda_sim != 0.0:
        drecon += weights.lambda_sim * sim_loss.grad(images, recons)
    drecon /= b

    dlatent = drecon @ params.w_gen.T
    dw_enc = images.T @ dlatent
    db_enc = dlatent.sum(axis=0)

    dw_ext = db_ext = None
    if with_extractor_grads:
        dang_gd = weights.lambda_gd * dangles / b
        dw_ext = recons.T @ dang_gd
        db_ext = dang_gd.sum(axis=0)
    return total, dw_enc, db_enc, dw_ext, db_ext


def gaze_distortion_loss(params: ToyPipelineParams, image: np.ndarray, label: GazeLabel) -> float:
    """Squared distance between the recovered and true 3D gaze vectors."""
    recon = shift(params, np.asarray(image, dtype=np.float64)[None, :])
    ang = extract(params, recon)[0]
    v = angles_to_vector(ang[0], ang[1])
    diff = v - gaze_to_vector(label)
    return float(diff @ diff)


def mean_gaze_distortion(
    params: ToyPipelineParams, images: np.ndarray, labels_deg: np.ndarray
) -> float:
    """Mean gaze-distortion loss over an image set."""
    recons = shift(params, np.asarray(images, dtype=np.float64))
    angles = extract(params, recons)
    vecs = angles_to_vector(angles[:, 0], angles[:, 1])
    diff = vecs - _labels_to_vectors(labels_deg)
    return float(np.mean(np.sum(diff * diff, axis=1)))


def total_loss(
    params: ToyPipelineParams,
    image: np.ndarray,
    label: GazeLabel,
    weights: LossWeights,
    lpips_loss: ZeroLoss | None = None,
    sim_loss: ZeroLoss | None = None,
) -> float:
    """Weighted single-sample encoder loss (reconstruction + plugs + gaze)."""
    lpips_loss = lpips_loss or ZeroLoss()
    sim_loss = sim_loss or ZeroLoss()
    images = np.asarray(image, dtype=np.float64)[None, :]
    gaze = gaze_to_vector(label)[None, :]
    loss, *_ = _batch_loss_and_grads(params, images, gaze, weights, lpips_loss, sim_loss, False)
    return loss


def train_extractor(
    params: ToyPipelineParams,
    images: np.ndarray,
    labels_deg: np.ndarray,
    config: TrainConfig,
    history: list[float] | None = None,
) -> ToyPipelineParams:
    """Phase 1: fit the extractor on raw source images by angle MSE.

    E and G are untouched; the returned params carry the trained-flag that
    phase 2 requires.  If ``history`` is given, the mean epoch loss is
    appended per epoch.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.shape[0] == 0:
        raise InsufficientDataError("phase 1 needs a nonempty source set")
    labels = np.radians(np.asarray(labels_deg, dtype=np.float64))
    out = params.copy()
    rng = np.random.default_rng(config.seed + 1)
    n = images.shape[0]
    v_w = np.zeros_like(out.w_ext)
    v_b = np.zeros_like(out.b_ext)
    snapshot = out.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            epoch_losses = []
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                x, y = images[batch], labels[batch]
                pred = extract(out, x)
                resid = pred - y
                loss = float(np.sum(resid * resid) / x.shape[0])
                if not math.isfinite(loss):
                    raise TrainingDivergedError(
                        f"extractor loss non-finite at epoch {epoch}",
                        last_params=snapshot,
                        epoch=epoch,
                    )
                dang = 2.0 * resid / x.shape[0]
                v_w = config.momentum * v_w - config.learning_rate * (x.T @ dang)
                v_b = config.momentum * v_b - config.learning_rate * dang.sum(axis=0)
                out.w_ext += v_w
                out.b_ext += v_b
                epoch_losses.append(loss)
            snapshot = out.copy()
            if history is not None:
                history.append(float(np.mean(epoch_losses)))
    out.extractor_trained = True
    return out


def train_encoder(
    params: ToyPipelineParams,
    images: np.ndarray,
    labels_deg: np.ndarray,
    weights: LossWeights,
    config: TrainConfig,
    lpips_loss: ZeroLoss | None = None,
    sim_loss: ZeroLoss | None = None,
    joint: bool = False,
    history: list[float] | None = None,
) -> ToyPipelineParams:
    """Phase 2: descend the total loss in E (and in F too when ``joint``).

    Rejects pipelines whose extractor was never trained; G stays frozen.
    """
    if not params.extractor_trained:
        raise ConfigError("phase 2 requires a trained extractor (run train_extractor first)")
    images = np.asarray(images, dtype=np.float64)
    if images.shape[0] == 0:
        raise InsufficientDataError("phase 2 needs a nonempty source set")
    gaze = _labels_to_vectors(labels_deg)
    lpips_loss = lpips_loss or ZeroLoss()
    sim_loss = sim_loss or ZeroLoss()

    out = params.copy()
    rng = np.random.default_rng(config.seed + 2)
    n = images.shape[0]
    v_we = np.zeros_like(out.w_enc)
    v_be = np.zeros_like(out.b_enc)
    v_wf = np.zeros_like(out.w_ext)
    v_bf = np.zeros_like(out.b_ext)
    snapshot = out.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            epoch_losses = []
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                loss, dw_enc, db_enc, dw_ext, db_ext = _batch_loss_and_grads(
                    out, images[batch], gaze[batch], weights, lpips_loss, sim_loss, joint
                )
                if not math.isfinite(loss):
                    raise TrainingDivergedError(
                        f"encoder loss non-finite at epoch {epoch}",
                        last_params=snapshot,
                        epoch=epoch,
                    )
                v_we = config.momentum * v_we - config.learning_rate * dw_enc
                v_be = config.momentum * v_be - config.learning_rate * db_enc
                out.w_enc += v_we
                out.b_enc += v_be
                if joint:
                    v_wf = config.momentum * v_wf - config.learning_rate * dw_ext
                    v_bf = config.momentum * v_bf - config.learning_rate * db_ext
                    out.w_ext += v_wf
                    out.b_ext += v_bf
                epoch_losses.append(loss)
            snapshot = out.copy()
            if history is not None:
                history.append(float(np.mean(epoch_losses)))
    return out


def domain_gap(
    shifted_targets: np.ndarray, source_images: np.ndarray, feature_map=None
) -> float:
    """Norm of the difference between mean features of the two image sets."""
    shifted_targets = np.asarray(shifted_targets, dtype=np.float64)
    source_images = np.asarray(source_images, dtype=np.float64)
    if shifted_targets.shape[0] == 0 or source_images.shape[0] == 0:
        raise InsufficientDataError("domain_gap needs nonempty image sets")
    if shifted_targets.shape[1] != source_images.shape[1]:
        raise ConfigError("image sets must share one dimension")
    if feature_map is not None:
        shifted_targets = np.asarray(feature_map(shifted_targets), dtype=np.float64)
        source_images = np.asarray(feature_map(source_images), dtype=np.float64)
    return float(np.linalg.norm(shifted_targets.mean(axis=0) - source_images.mean(axis=0)))


def grad_check(
    params: ToyPipelineParams,
    image: np.ndarray,
    label: GazeLabel,
    weights: LossWeights,
    step: float = 1e-5,
) -> float:
    """Worst relative error of the analytic total-loss gradients vs central differences.

    Every learnable coordinate (encoder and extractor) is perturbed; the
    generator is fixed by contract and excluded.
    """
    image = np.asarray(image, dtype=np.float64)
    images = image[None, :]
    gaze = gaze_to_vector(label)[None, :]
    zero = ZeroLoss()
    _, dw_enc, db_enc, dw_ext, db_ext = _batch_loss_and_grads(
        params, images, gaze, weights, zero, zero, True
    )
    analytic = {"w_enc": dw_enc, "b_enc": db_enc, "w_ext": dw_ext, "b_ext": db_ext}

    work = params.copy()

    def loss_at() -> float:
        out, *_ = _batch_loss_and_grads(work, images, gaze, weights, zero, zero, False)
        return out

    worst = 0.0
    for name, grad in analytic.items():
        arr = getattr(work, name)
        flat = arr.ravel()
        gflat = grad.ravel()
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_at()
            flat[i] = orig - step
            down = loss_at()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(gflat[i]), abs(numeric), FD_REL_FLOOR)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
