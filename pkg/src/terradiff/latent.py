"""KL-regularized variational autoencoders for heightmaps and textures.

One architecture serves both modalities: a conv encoder that downsamples
by a power-of-two factor f and emits 2c channels (mean and log-variance
of the latent posterior), and a mirrored decoder. Heightmaps use 1 input
channel, textures 3. The loss is reconstruction MSE plus a tiny
KL-to-standard-normal term; training is a plain sequential loop whose
checkpoints carry optimizer moments and RNG state so a resumed run is
bit-identical to an uninterrupted one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .autodiff import (
    Conv2d,
    GroupNorm,
    OptimizerState,
    ParameterSet,
    Tensor,
    adamw_step,
    backward,
    no_grad,
    ops,
)
from .checkpoint import ModelCheckpoint, read_checkpoint, write_checkpoint
from .config import rng_stream

__all__ = [
    "VaeModel", "LatentGrid", "build_vae", "vae_encode", "vae_decode",
    "kl_divergence", "vae_loss", "train_vae", "load_vae", "KlImageVae",
]

PROVENANCE_TAGS = {1: "heightmap", 3: "texture"}


@dataclass(frozen=True)
class LatentGrid:
    """An encoded image: (h, w, c) values plus the modality it came from."""

    values: np.ndarray
    provenance: str

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise ValueError(f"latent grid must be (h, w, c), got {self.values.shape}")
        if self.provenance not in PROVENANCE_TAGS.values():
            raise ValueError(f"unknown provenance {self.provenance!r}")


class _VaeBlock:
    """Pre-activation residual conv block; 1x1 skip on channel change."""

    def __init__(self, params, name, c_in, c_out, rng):
        self.gn1 = GroupNorm(params, f"{name}.gn1", c_in)
        self.conv1 = Conv2d(params, f"{name}.conv1", c_in, c_out, rng=rng)
        self.gn2 = GroupNorm(params, f"{name}.gn2", c_out)
        self.conv2 = Conv2d(params, f"{name}.conv2", c_out, c_out, rng=rng)
        self.skip = None
        if c_in != c_out:
            self.skip = Conv2d(params, f"{name}.skip", c_in, c_out, kernel=1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.conv1(ops.silu(self.gn1(x)))
        h = self.conv2(ops.silu(self.gn2(h)))
        return ops.add(h, self.skip(x) if self.skip else x)


class VaeModel:
    """Encoder/decoder pair with the downsample factor and latent width.

    ``encoder`` and ``decoder`` are separate parameter sets (they can be
    frozen or persisted independently); ``params`` is their union and is
    what the optimizer walks.
    """

    def __init__(self, in_channels: int, f: int = 4, c: int = 4, width: int = 16,
                 rng: np.random.Generator | None = None) -> None:
        if in_channels not in PROVENANCE_TAGS:
            raise ValueError(f"in_channels must be 1 or 3, got {in_channels}")
        n_down = int(np.log2(f))
        if f < 2 or 2 ** n_down != f:
            raise ValueError(f"downsample factor must be a power of two >= 2, got {f}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.in_channels = in_channels
        self.f = f
        self.c = c
        self.width = width
        self.encoder = ParameterSet()
        self.decoder = ParameterSet()

        widths = [width * 2 ** min(i, 2) for i in range(n_down)]
        enc, dec = self.encoder, self.decoder

        self._enc_in = Conv2d(enc, "enc.conv_in", in_channels, width, rng=rng)
        self._enc_stages = []
        prev = width
        for i, w in enumerate(widths):
            block = _VaeBlock(enc, f"enc.b{i + 1}", prev, w, rng)
            down = Conv2d(enc, f"enc.down{i + 1}", w, w, stride=2, rng=rng)
            self._enc_stages.append((block, down))
            prev = w
        self._enc_tail = _VaeBlock(enc, f"enc.b{n_down + 1}", prev, prev, rng)
        self._enc_gn = GroupNorm(enc, "enc.gn_out", prev)
        self._enc_out = Conv2d(enc, "enc.conv_mu_logvar", prev, 2 * c, rng=rng)

        self._dec_in = Conv2d(dec, "dec.conv_in", c, widths[-1], rng=rng)
        self._dec_head = _VaeBlock(dec, "dec.b1", widths[-1], widths[-1], rng)
        self._dec_stages = []
        prev = widths[-1]
        for i in range(n_down - 1, -1, -1):
            target = widths[i - 1] if i > 0 else width
            self._dec_stages.append(_VaeBlock(dec, f"dec.b{n_down - i + 1}", prev, target, rng))
            prev = target
        self._dec_gn = GroupNorm(dec, "dec.gn_out", prev)
        self._dec_out = Conv2d(dec, "dec.conv_out", prev, in_channels, rng=rng)

        self.params = ParameterSet.union(self.encoder, self.decoder)

    # ---------------------------------------------------------- forwards

    def encode_raw(self, x: Tensor) -> Tensor:
        """(N, in, H, W) -> (N, 2c, H/f, W/f): mean then log-variance."""
        h = self._enc_in(x)
        for block, down in self._enc_stages:
            h = down(block(h))
        h = self._enc_tail(h)
        return self._enc_out(ops.silu(self._enc_gn(h)))

    def decode_raw(self, z: Tensor) -> Tensor:
        """(N, c, h, w) -> (N, in, H, W), unclamped (training target space)."""
        h = self._dec_head(self._dec_in(z))
        for block in self._dec_stages:
            h = block(ops.upsample_nearest2(h))
        return self._dec_out(ops.silu(self._dec_gn(h)))

    # ------------------------------------------------------- persistence

    def to_checkpoint(self, kind: str, metadata: dict | None = None) -> ModelCheckpoint:
        meta = {
            "arch": {"in_channels": self.in_channels, "f": self.f,
                     "c": self.c, "width": self.width},
        }
        meta.update(metadata or {})
        params = dict(self.params.state_dict())
        trainable = {name: self.params.is_trainable(name) for name in params}
        return ModelCheckpoint(kind=kind, params=params, trainable=trainable, metadata=meta)

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "VaeModel":
        arch = ckpt.metadata["arch"]
        model = cls(in_channels=int(arch["in_channels"]), f=int(arch["f"]),
                    c=int(arch["c"]), width=int(arch["width"]))
        weights = {n: v for n, v in ckpt.params.items() if not n.startswith("opt.")}
        model.params.load_state_dict(weights)
        for name in weights:
            model.params.set_trainable(name, ckpt.trainable.get(name, True))
        return model


def build_vae(in_channels: int, f: int = 4, c: int = 4, width: int = 16,
              rng: np.random.Generator | None = None) -> VaeModel:
    return VaeModel(in_channels, f=f, c=c, width=width, rng=rng)


def load_vae(path: str) -> VaeModel:
    return VaeModel.from_checkpoint(read_checkpoint(path))


# ------------------------------------------------------------- image plumbing


def _to_nchw(image: np.ndarray, in_channels: int) -> np.ndarray:
    image = np.asarray(image, dtype=np.float32)
    if in_channels == 1 and image.ndim == 2:
        image = image[None, None]
    elif in_channels == 3 and image.ndim == 3 and image.shape[-1] == 3:
        image = image.transpose(2, 0, 1)[None]
    else:
        raise ValueError(f"image shape {image.shape} does not match {in_channels} channel(s)")
    if image.size and np.abs(image).max() > 1.0 + 1e-4:
        raise ValueError("image must be normalized to [-1, 1]")
    return image


def _from_nchw(batch: np.ndarray, in_channels: int) -> np.ndarray:
    if in_channels == 1:
        return batch[0, 0]
    return batch[0].transpose(1, 2, 0)


def _sample_latent(mu: np.ndarray, logvar: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    eps = rng.standard_normal(mu.shape).astype(np.float32)
    return mu + np.exp(0.5 * logvar) * eps


def vae_encode(model: VaeModel, image: np.ndarray,
               rng: np.random.Generator | None = None) -> LatentGrid:
    """Encode one normalized image; samples z = mu + sigma*eps when given an rng.

    Without an rng the posterior mean is returned, so repeated calls are
    identical. Image sides must be divisible by the downsample factor.
    """
    x = _to_nchw(image, model.in_channels)
    if x.shape[2] % model.f or x.shape[3] % model.f:
        raise ValueError(f"image sides {x.shape[2:]} not divisible by f={model.f}")
    with no_grad():
        out = model.encode_raw(Tensor(x)).data
    mu, logvar = out[0, : model.c], out[0, model.c :]
    z = mu if rng is None else _sample_latent(mu, logvar, rng)
    return LatentGrid(values=z.transpose(1, 2, 0), provenance=PROVENANCE_TAGS[model.in_channels])


def vae_decode(model: VaeModel, z: LatentGrid | np.ndarray) -> np.ndarray:
    """Decode a latent grid back to image space, clamped to [-1, 1]."""
    values = z.values if isinstance(z, LatentGrid) else np.asarray(z, dtype=np.float32)
    if values.ndim != 3 or values.shape[-1] != model.c:
        raise ValueError(f"latent must be (h, w, {model.c}), got {values.shape}")
    batch = values.transpose(2, 0, 1)[None].astype(np.float32)
    with no_grad():
        out = model.decode_raw(Tensor(batch)).data
    return _from_nchw(np.clip(out, -1.0, 1.0), model.in_channels)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float:
    """Mean over elements of KL(N(mu, sigma^2) || N(0, 1))."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return float(np.mean(0.5 * (mu**2 + np.exp(logvar) - 1.0 - logvar)))


def _kl_tensor(mu: Tensor, logvar: Tensor) -> Tensor:
    inner = ops.sub(ops.add(ops.mul(mu, mu), ops.exp(logvar)), logvar)
    return ops.mean_all(ops.scalar_affine(inner, 0.5, -0.5))


def vae_loss(model: VaeModel, batch: np.ndarray, beta: float,
             rng: np.random.Generator | None = None) -> Tensor:
    """Reconstruction MSE plus beta * KL, as a differentiable scalar.

    With an rng the latent is reparameterization-sampled; without one the
    posterior mean is used. Reconstruction compares the raw (unclamped)
    decoder output against the batch.
    """
    x = Tensor(np.ascontiguousarray(batch, dtype=np.float32))
    out = model.encode_raw(x)
    mu, logvar = ops.split_channels(out, (model.c, model.c))
    if rng is None:
        z = mu
    else:
        eps = rng.standard_normal(mu.data.shape).astype(np.float32)
        sigma = ops.exp(ops.scalar_affine(logvar, 0.5))
        z = ops.add(mu, ops.mul(sigma, Tensor(eps)))
    recon = model.decode_raw(z)
    mse = ops.mean_square(ops.sub(recon, x))
    return ops.add(mse, ops.scalar_affine(_kl_tensor(mu, logvar), beta))


# ------------------------------------------------------------------ training


def _validate_training_set(dataset: np.ndarray, f: int) -> np.ndarray:
    dataset = np.asarray(dataset, dtype=np.float32)
    if dataset.ndim != 4:
        raise ValueError(f"dataset must be (N, C, H, W), got {dataset.shape}")
    if dataset.shape[0] == 0:
        raise ValueError("dataset is empty")
    if dataset.shape[2] % f or dataset.shape[3] % f:
        raise ValueError(f"image sides {dataset.shape[2:]} not divisible by f={f}")
    if np.abs(dataset).max() > 1.0 + 1e-4:
        raise ValueError("dataset must be normalized to [-1, 1]")
    return dataset


def train_vae(dataset: np.ndarray, config: dict, kind: str = "vae",
              checkpoint_path: str | None = None,
              resume_from: str | ModelCheckpoint | None = None) -> ModelCheckpoint:
    """Train a VAE on a normalized (N, C, H, W) dataset; returns the checkpoint.

    Deterministic given the seed: batch order, reparameterization noise
    and weight init all come from named sub-streams. Checkpoints land at
    ``checkpoint_path`` every ``checkpoint_every`` epochs and at the end;
    resuming from one continues the identical arithmetic sequence.
    """
    cfg = config["vae"]
    seed = int(config["seed"])
    dataset = _validate_training_set(dataset, int(cfg["f"]))
    n = dataset.shape[0]

    train_rng = rng_stream(seed, f"training/{kind}")
    opt = OptimizerState()
    start_epoch = 0

    if resume_from is not None:
        ckpt = read_checkpoint(resume_from) if isinstance(resume_from, str) else resume_from
        model = VaeModel.from_checkpoint(ckpt)
        opt.load_state_dict(ckpt.params, step=int(ckpt.metadata["opt_step"]))
        start_epoch = int(ckpt.metadata["epoch"])
        train_rng.bit_generator.state = ckpt.metadata["rng_state"]
    else:
        model = build_vae(dataset.shape[1], f=int(cfg["f"]), c=int(cfg["c"]),
                          width=int(cfg["width"]), rng=rng_stream(seed, f"init/{kind}"))

    epochs = int(cfg["epochs"])
    batch_size = int(cfg["batch_size"])
    every = int(cfg.get("checkpoint_every", 0) or 0)
    beta = float(cfg["beta"])
    last_loss = float("nan")

    def snapshot(epoch: int) -> ModelCheckpoint:
        ckpt = model.to_checkpoint(kind, metadata={
            "epoch": epoch,
            "opt_step": opt.step,
            "rng_state": train_rng.bit_generator.state,
            "seed": seed,
            "last_loss": last_loss,
        })
        ckpt.params.update(opt.state_dict())
        for name in opt.state_dict():
            ckpt.trainable[name] = False
        return ModelCheckpoint(kind=ckpt.kind, params=ckpt.params,
                               trainable=ckpt.trainable, metadata=ckpt.metadata)

    for epoch in range(start_epoch, epochs):
        order = train_rng.permutation(n)
        for lo in range(0, n, batch_size):
            batch = dataset[order[lo : lo + batch_size]]
            try:
                loss = vae_loss(model, batch, beta, rng=train_rng)
                last_loss = float(loss.data)
                if not np.isfinite(last_loss):
                    raise FloatingPointError(str(last_loss))
                grads = backward(loss, model.params)
                adamw_step(model.params, grads, opt, lr=float(cfg["lr"]),
                           weight_decay=float(cfg.get("weight_decay", 0.0)))
            except FloatingPointError as exc:
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} step {lo // batch_size}: {exc}"
                ) from exc
        if checkpoint_path and every and (epoch + 1) % every == 0 and epoch + 1 < epochs:
            write_checkpoint(snapshot(epoch + 1), checkpoint_path)

    final = snapshot(epochs)
    if checkpoint_path:
        write_checkpoint(final, checkpoint_path)
    return final


# ----------------------------------------------------------------- estimator


class KlImageVae(TransformerMixin, BaseEstimator):
    """Variational autoencoder with the fit/transform/inverse_transform shape.

    X is (N, H, W) for single-channel data or (N, H, W, 3) for RGB, already
    normalized to [-1, 1]. ``transform`` returns posterior means (N, h, w, c);
    ``inverse_transform`` decodes back to clamped images.
    """

    def __init__(self, f: int = 4, c: int = 4, width: int = 16, beta: float = 1e-6,
                 lr: float = 1e-4, weight_decay: float = 0.0, epochs: int = 30,
                 batch_size: int = 16, random_state: int = 0):
        self.f = f
        self.c = c
        self.width = width
        self.beta = beta
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _as_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 3:
            return X[:, None]
        if X.ndim == 4 and X.shape[-1] == 3:
            return X.transpose(0, 3, 1, 2)
        raise ValueError(f"X must be (N, H, W) or (N, H, W, 3), got {X.shape}")

    def fit(self, X: np.ndarray, y=None) -> "KlImageVae":
        batch = self._as_batch(X)
        config = {
            "seed": int(self.random_state),
            "vae": {
                "f": self.f, "c": self.c, "width": self.width, "beta": self.beta,
                "lr": self.lr, "weight_decay": self.weight_decay,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "checkpoint_every": 0,
            },
        }
        self.checkpoint_ = train_vae(batch, config, kind="vae")
        self.model_ = VaeModel.from_checkpoint(self.checkpoint_)
        self.n_channels_ = batch.shape[1]
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        batch = self._as_batch(X)
        out = []
        with no_grad():
            for i in range(batch.shape[0]):
                enc = self.model_.encode_raw(Tensor(batch[i : i + 1])).data
                out.append(enc[0, : self.model_.c].transpose(1, 2, 0))
        return np.stack(out)

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float32)
        images = [vae_decode(self.model_, Z[i]) for i in range(Z.shape[0])]
        return np.stack(images)
