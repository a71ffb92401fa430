"""Raster-conditioned generation via a trainable side branch on a frozen denoiser.

The adapter clones the denoiser's encoder half, embeds the condition
image down to latent resolution with strided convolutions, and feeds its
features back into the frozen decoder through 1x1 projections that start
at exactly zero. A freshly initialized adapter therefore leaves the base
model's predictions untouched for every condition, and training moves
only adapter weights. The same machinery conditions on geomorphology
sketches and on two-color texture hints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import (
    Conv2d,
    OptimizerState,
    ParameterSet,
    Tensor,
    adamw_step,
    backward,
    ops,
)
from .checkpoint import ModelCheckpoint, read_checkpoint, write_checkpoint
from .config import rng_stream
from .diffusion import (
    DenoiserModel,
    NoiseSchedule,
    _UnetEncoder,
    make_schedule,
    strided_sample,
)
from .latent import LatentGrid, VaeModel, vae_decode
from .raster import (
    Heightmap,
    Texture,
    denormalize_elevations,
    denormalize_texture,
)

__all__ = [
    "ConditionRaster", "ControlAdapter", "init_adapter", "control_loss",
    "train_control", "conditional_sample", "decode_pair", "load_adapter",
    "SketchControlAdapter",
]

CONDITION_KINDS = ("sketch", "two-color-texture")

# base-parameter prefixes that make up the encoder half the adapter clones
_ENCODER_PREFIXES = ("conv_in", "d1", "down1", "d2", "mid")


@dataclass
class ConditionRaster:
    """H x W x 3 uint8 condition image at generation resolution."""

    values: np.ndarray
    kind: str = "sketch"

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"condition raster must be HxWx3, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError("condition raster values must be uint8")
        if self.kind not in CONDITION_KINDS:
            raise ValueError(f"kind must be one of {CONDITION_KINDS}, got {self.kind!r}")
        self.values = arr


def _condition_batch(conds, n: int) -> np.ndarray:
    """Normalize conditions to a float32 (N, 3, H, W) batch in [0, 1]."""
    if conds is None:
        raise ValueError("dataset lacks condition rasters")
    if isinstance(conds, ConditionRaster):
        conds = conds.values[None]
    conds = np.asarray(conds)
    if conds.ndim != 4 or conds.shape[-1] != 3:
        raise ValueError(f"conditions must be (N, H, W, 3), got {conds.shape}")
    if conds.shape[0] != n:
        raise ValueError(f"got {conds.shape[0]} conditions for {n} latent pairs")
    if conds.dtype == np.uint8:
        batch = conds.astype(np.float32) / 255.0
    else:
        batch = conds.astype(np.float32)
        if batch.size and (batch.min() < 0.0 or batch.max() > 1.0):
            raise ValueError("float conditions must lie in [0, 1]")
    return np.ascontiguousarray(batch.transpose(0, 3, 1, 2))


class ControlAdapter:
    """Condition branch: cloned encoder, hint embedding, zero projections.

    Construction freezes every parameter of ``base``; the adapter's own
    parameters are the only trainable state. ``latent_scale`` and
    ``schedule`` metadata from the base checkpoint ride along so sampling
    needs no extra bookkeeping.
    """

    def __init__(self, base: DenoiserModel, rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        for name in base.params.names():
            base.params.set_trainable(name, False)
        self.base = base
        self.in_channels = base.in_channels
        self.width = base.width
        w = base.width
        p = self.params = ParameterSet()

        self.encoder = _UnetEncoder(p, "enc", base.in_channels, w, base.emb_dim, rng)
        clones = {}
        for name, value in base.params.state_dict().items():
            if name.split(".")[0] in _ENCODER_PREFIXES:
                clones[f"enc.{name}"] = value.copy()
        p.load_state_dict(clones)

        # condition embedding: image resolution -> latent resolution (f=4)
        self.hint1 = Conv2d(p, "hint.c1", 3, w, stride=2, rng=rng)
        self.hint2 = Conv2d(p, "hint.c2", w, w, stride=2, rng=rng)
        self.hint3 = Conv2d(p, "hint.c3", w, w, rng=rng)
        # zero-init injections: a fresh adapter is an exact no-op
        self.zp1 = Conv2d(p, "zp1", w, w, kernel=1, zero_init=True)
        self.zp2 = Conv2d(p, "zp2", 2 * w, 2 * w, kernel=1, zero_init=True)
        self.zpm = Conv2d(p, "zpm", 2 * w, 2 * w, kernel=1, zero_init=True)

        self.latent_scale: dict | None = None
        self.schedule_params: dict | None = None

    def embed_condition(self, c: Tensor) -> Tensor:
        h = ops.silu(self.hint1(c))
        h = ops.silu(self.hint2(h))
        return self.hint3(h)

    def residuals(self, z: Tensor, e: Tensor, c: Tensor) -> dict:
        hint = self.embed_condition(c)
        if hint.data.shape[2:] != z.data.shape[2:]:
            raise ValueError(
                f"condition embeds to {hint.data.shape[2:]}, latents are {z.data.shape[2:]}"
            )
        h1, h2, m = self.encoder.features(z, e, hint=hint)
        return {"h1": self.zp1(h1), "h2": self.zp2(h2), "m": self.zpm(m)}

    def forward(self, z: Tensor, t, c: Tensor, context=None) -> Tensor:
        """Conditional noise prediction through the frozen base."""
        n = z.data.shape[0]
        e = self.base.embed(t, context, n)
        return self.base.forward(z, t, context, residuals=self.residuals(z, e, c))

    # ------------------------------------------------------- persistence

    def to_checkpoint(self, kind: str = "control", metadata: dict | None = None) -> ModelCheckpoint:
        meta = {"arch": {"in_channels": self.in_channels, "width": self.width}}
        if self.latent_scale is not None:
            meta["latent_scale"] = self.latent_scale
        if self.schedule_params is not None:
            meta["schedule"] = self.schedule_params
        meta.update(metadata or {})
        params = dict(self.params.state_dict())
        trainable = {name: self.params.is_trainable(name) for name in params}
        return ModelCheckpoint(kind=kind, params=params, trainable=trainable, metadata=meta)

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint, base) -> "ControlAdapter":
        base = _load_base(base)
        arch = ckpt.metadata["arch"]
        if int(arch["in_channels"]) != base.in_channels or int(arch["width"]) != base.width:
            raise ValueError(
                f"adapter was built for in={arch['in_channels']} width={arch['width']}, "
                f"base has in={base.in_channels} width={base.width}"
            )
        adapter = cls(base)
        weights = {n: v for n, v in ckpt.params.items() if not n.startswith("opt.")}
        adapter.params.load_state_dict(weights)
        for name in weights:
            adapter.params.set_trainable(name, ckpt.trainable.get(name, True))
        adapter.latent_scale = ckpt.metadata.get("latent_scale")
        adapter.schedule_params = ckpt.metadata.get("schedule")
        return adapter


def _load_base(base) -> DenoiserModel:
    if isinstance(base, str):
        base = read_checkpoint(base)
    if isinstance(base, ModelCheckpoint):
        return DenoiserModel.from_checkpoint(base)
    if isinstance(base, DenoiserModel):
        return base
    raise TypeError(f"expected a checkpoint or denoiser, got {type(base).__name__}")


def init_adapter(base, rng: np.random.Generator | None = None) -> ControlAdapter:
    """Fresh adapter for a trained unconditional checkpoint; the base is frozen."""
    ckpt = read_checkpoint(base) if isinstance(base, str) else base
    adapter = ControlAdapter(_load_base(ckpt), rng=rng)
    if isinstance(ckpt, ModelCheckpoint):
        adapter.latent_scale = ckpt.metadata.get("latent_scale")
        adapter.schedule_params = ckpt.metadata.get("schedule")
    return adapter


def load_adapter(path: str, base) -> ControlAdapter:
    return ControlAdapter.from_checkpoint(read_checkpoint(path), base)


# ---------------------------------------------------------------- objectives


def control_loss(adapter: ControlAdapter, z0_h: np.ndarray, z0_x: np.ndarray,
                 conds, schedule: NoiseSchedule, rng: np.random.Generator,
                 condition_dropout: float = 0.0) -> Tensor:
    """Noise-prediction MSE through the conditioned predictor.

    Draws (t, eps) exactly like the unconditional loss, so at adapter
    initialization the two losses agree bit for bit under paired seeds.
    With probability ``condition_dropout`` a sample's condition is
    replaced by zeros, which trains the all-black input to behave like
    unconditional generation.
    """
    z0_h = np.asarray(z0_h, dtype=np.float32)
    z0_x = np.asarray(z0_x, dtype=np.float32)
    if z0_h.shape != z0_x.shape:
        raise ValueError(f"latent halves differ in shape: {z0_h.shape} vs {z0_x.shape}")
    if z0_h.ndim != 4:
        raise ValueError(f"latents must be (N, c, h, w), got {z0_h.shape}")
    z0 = np.concatenate([z0_h, z0_x], axis=1)
    n = z0.shape[0]
    cond = _condition_batch(conds, n)

    t = rng.integers(1, schedule.timesteps + 1, size=n)
    eps = rng.standard_normal(z0.shape).astype(np.float32)
    if condition_dropout > 0.0:
        dropped = rng.random(n) < condition_dropout
        cond[dropped] = 0.0
    abar = schedule.alpha_bar[t].reshape(n, 1, 1, 1)
    z_t = (np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps).astype(np.float32)
    pred = adapter.forward(Tensor(z_t), t, Tensor(cond))
    return ops.mean_square(ops.sub(pred, Tensor(eps)))


# ------------------------------------------------------------------ training


def train_control(z_h: np.ndarray, z_x: np.ndarray, conds, base, config: dict,
                  kind: str = "control", checkpoint_path: str | None = None,
                  resume_from: str | ModelCheckpoint | None = None) -> ModelCheckpoint:
    """Train the condition adapter on (latent pair, raster) triples.

    ``base`` is the trained unconditional checkpoint; its weights are
    frozen and its stored latent scales and noise schedule are reused, so
    the adapter sees exactly the latent distribution the base was trained
    on. Deterministic per seed; resume continues bit-exactly.
    """
    cfg = config["control"]
    seed = int(config["seed"])
    base_ckpt = read_checkpoint(base) if isinstance(base, str) else base
    if not isinstance(base_ckpt, ModelCheckpoint):
        raise TypeError("base must be a trained checkpoint (path or ModelCheckpoint)")

    z_h = np.asarray(z_h, dtype=np.float32)
    z_x = np.asarray(z_x, dtype=np.float32)
    if z_h.ndim != 4 or z_h.shape != z_x.shape:
        raise ValueError(f"latents must be equal-shape (N, c, h, w), got {z_h.shape} / {z_x.shape}")
    if z_h.shape[0] == 0:
        raise ValueError("dataset is empty")
    cond_all = _condition_batch(conds, z_h.shape[0]).transpose(0, 2, 3, 1)

    sched_meta = base_ckpt.metadata["schedule"]
    schedule = make_schedule(int(sched_meta["timesteps"]),
                             float(sched_meta["beta_start"]),
                             float(sched_meta["beta_end"]))
    scale_h = float(base_ckpt.metadata["latent_scale"]["heightmap"])
    scale_x = float(base_ckpt.metadata["latent_scale"]["texture"])
    dropout = float(cfg.get("condition_dropout", 0.0))

    train_rng = rng_stream(seed, f"training/{kind}")
    opt = OptimizerState()
    start_epoch = 0

    if resume_from is not None:
        ckpt = read_checkpoint(resume_from) if isinstance(resume_from, str) else resume_from
        adapter = ControlAdapter.from_checkpoint(ckpt, base_ckpt)
        opt.load_state_dict(ckpt.params, step=int(ckpt.metadata["opt_step"]))
        start_epoch = int(ckpt.metadata["epoch"])
        train_rng.bit_generator.state = ckpt.metadata["rng_state"]
    else:
        adapter = init_adapter(base_ckpt, rng=rng_stream(seed, f"init/{kind}"))

    zs_h = (z_h * scale_h).astype(np.float32)
    zs_x = (z_x * scale_x).astype(np.float32)
    n = zs_h.shape[0]
    epochs = int(cfg["epochs"])
    batch_size = int(cfg["batch_size"])
    every = int(cfg.get("checkpoint_every", 0) or 0)
    last_loss = float("nan")

    def snapshot(epoch: int) -> ModelCheckpoint:
        ckpt = adapter.to_checkpoint(kind, metadata={
            "epoch": epoch,
            "opt_step": opt.step,
            "rng_state": train_rng.bit_generator.state,
            "seed": seed,
            "last_loss": last_loss,
            "latent_scale": {"heightmap": scale_h, "texture": scale_x},
            "schedule": dict(sched_meta),
            "condition_dropout": dropout,
        })
        ckpt.params.update(opt.state_dict())
        for name in opt.state_dict():
            ckpt.trainable[name] = False
        return ModelCheckpoint(kind=ckpt.kind, params=ckpt.params,
                               trainable=ckpt.trainable, metadata=ckpt.metadata)

    for epoch in range(start_epoch, epochs):
        order = train_rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            try:
                loss = control_loss(adapter, zs_h[idx], zs_x[idx], cond_all[idx],
                                    schedule, train_rng, condition_dropout=dropout)
                last_loss = float(loss.data)
                if not np.isfinite(last_loss):
                    raise FloatingPointError(str(last_loss))
                grads = backward(loss, adapter.params)
                adamw_step(adapter.params, grads, opt, lr=float(cfg["lr"]),
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


# ------------------------------------------------------------------ sampling


class _ConditionedModel:
    """Adapts (base, adapter, fixed condition) to the samplers' interface."""

    def __init__(self, model: DenoiserModel, adapter: ControlAdapter, cond: np.ndarray):
        self.model = model
        self.adapter = adapter
        self.cond = cond  # (1, 3, H, W) float32

    def forward(self, z, t, context=None, residuals=None):
        n = z.data.shape[0]
        cond = Tensor(np.broadcast_to(self.cond, (n,) + self.cond.shape[1:]).copy())
        return self.adapter.forward(z, t, cond, context=context)


def decode_pair(z_h: LatentGrid, z_x: LatentGrid, vae_h: VaeModel, vae_x: VaeModel,
                *, max_elevation_m: float, resolution_m: float = 30.0) -> tuple[Heightmap, Texture]:
    """Decode an unscaled latent pair to a meter heightmap and uint8 texture."""
    elev = denormalize_elevations(vae_decode(vae_h, z_h), max_elevation_m)
    rgb = denormalize_texture(vae_decode(vae_x, z_x))
    return (Heightmap(elevations=elev, resolution_m=resolution_m),
            Texture(values=rgb, resolution_m=resolution_m))


def conditional_sample(model: DenoiserModel, adapter: ControlAdapter, cond,
                       steps: int = 20, rng: np.random.Generator | None = None,
                       *, vae_h: VaeModel, vae_x: VaeModel, max_elevation_m: float,
                       resolution_m: float = 30.0, context=None) -> tuple[Heightmap, Texture]:
    """Strided sampling conditioned on ``cond``, decoded through both VAEs.

    The condition raster must match the generation resolution; latent
    scales and the noise schedule come from the adapter's checkpoint
    metadata.
    """
    if adapter.latent_scale is None or adapter.schedule_params is None:
        raise ValueError("adapter carries no latent_scale/schedule metadata; "
                         "initialize it from a trained checkpoint")
    cond_batch = _condition_batch(cond, 1)
    img_h, img_w = cond_batch.shape[2:]
    if img_h % vae_h.f or img_w % vae_h.f:
        raise ValueError(f"condition size {(img_h, img_w)} is not divisible by f={vae_h.f}")
    shape = (img_h // vae_h.f, img_w // vae_h.f, vae_h.c)

    sched = adapter.schedule_params
    schedule = make_schedule(int(sched["timesteps"]), float(sched["beta_start"]),
                             float(sched["beta_end"]))
    wrapped = _ConditionedModel(model, adapter, cond_batch)
    zh, zx = strided_sample(wrapped, schedule, shape, steps=steps, rng=rng, context=context)
    zh = LatentGrid(values=zh.values / float(adapter.latent_scale["heightmap"]),
                    provenance="heightmap")
    zx = LatentGrid(values=zx.values / float(adapter.latent_scale["texture"]),
                    provenance="texture")
    return decode_pair(zh, zx, vae_h, vae_x, max_elevation_m=max_elevation_m,
                       resolution_m=resolution_m)


# ----------------------------------------------------------------- estimator


class SketchControlAdapter(BaseEstimator):
    """Condition adapter with a fit/sample interface over latent triples.

    ``fit`` takes fused latents (N, h, w, 2c) and conditions (N, H, W, 3);
    ``sample`` returns fused latents conditioned on one raster.
    """

    def __init__(self, base_checkpoint=None, lr: float = 1e-5,
                 weight_decay: float = 0.0, epochs: int = 60, batch_size: int = 32,
                 condition_dropout: float = 0.1, sample_steps: int = 20,
                 random_state: int = 0):
        self.base_checkpoint = base_checkpoint
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.condition_dropout = condition_dropout
        self.sample_steps = sample_steps
        self.random_state = random_state

    def fit(self, X: np.ndarray, y=None, conditions=None) -> "SketchControlAdapter":
        if self.base_checkpoint is None:
            raise ValueError("base_checkpoint is required to fit an adapter")
        X = np.asarray(X, dtype=np.float32)
        if X.ndim != 4 or X.shape[-1] % 2:
            raise ValueError(f"X must be (N, h, w, 2c), got {X.shape}")
        c = X.shape[-1] // 2
        batch = X.transpose(0, 3, 1, 2)
        config = {
            "seed": int(self.random_state),
            "control": {
                "lr": self.lr, "weight_decay": self.weight_decay,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "condition_dropout": self.condition_dropout,
                "checkpoint_every": 0,
            },
        }
        self.checkpoint_ = train_control(batch[:, :c], batch[:, c:], conditions,
                                         self.base_checkpoint, config, kind="control")
        self.adapter_ = ControlAdapter.from_checkpoint(self.checkpoint_, self.base_checkpoint)
        self.latent_shape_ = (X.shape[1], X.shape[2], c)
        return self

    def sample(self, condition, n_samples: int = 1, steps: int | None = None,
               random_state: int | None = None) -> np.ndarray:
        steps = self.sample_steps if steps is None else steps
        rng = np.random.default_rng(
            self.random_state if random_state is None else random_state)
        sched = self.adapter_.schedule_params
        schedule = make_schedule(int(sched["timesteps"]), float(sched["beta_start"]),
                                 float(sched["beta_end"]))
        cond_batch = _condition_batch(condition, 1)
        wrapped = _ConditionedModel(self.adapter_.base, self.adapter_, cond_batch)
        scales = self.adapter_.latent_scale
        out = []
        for _ in range(n_samples):
            zh, zx = strided_sample(wrapped, schedule, self.latent_shape_,
                                    steps=steps, rng=rng)
            out.append(np.concatenate([
                zh.values / float(scales["heightmap"]),
                zx.values / float(scales["texture"]),
            ], axis=-1))
        return np.stack(out)
