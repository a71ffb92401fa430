"""Joint latent diffusion: schedule, forward process, U-Net denoiser, samplers.

Heightmap and texture latents are concatenated channel-wise (heightmap
first) and denoised together, so the model learns their joint structure.
The denoiser is a small U-Net with sinusoidal timestep embeddings and a
learned constant context vector. Sampling is either full DDPM ancestral
or a deterministic uniformly-strided reduced-step variant. A pretrained
single-modality checkpoint can be widened to the joint channel count with
new-channel weights drawn at a chosen scale; at scale zero the widened
model reproduces the original exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import (
    Conv2d,
    GroupNorm,
    Linear,
    OptimizerState,
    ParameterSet,
    Tensor,
    adamw_step,
    backward,
    no_grad,
    ops,
    timestep_embedding,
)
from .checkpoint import ModelCheckpoint, read_checkpoint, write_checkpoint
from .config import rng_stream
from .latent import LatentGrid

__all__ = [
    "NoiseSchedule", "FusedLatent", "DenoiserModel", "make_schedule",
    "forward_diffuse", "fuse_latents", "split_latents", "joint_loss",
    "ddpm_sample", "strided_sample", "extend_channels", "constant_context",
    "train_joint", "load_denoiser", "JointDiffusion",
]


# ------------------------------------------------------------------ schedule


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete-time noising schedule; arrays are indexed by t with t=0 clean.

    ``betas[0]`` is 0 by convention and ``alpha_bar[0]`` is 1, so index t
    always means "after t noising steps".
    """

    timesteps: int
    betas: np.ndarray
    alpha_bar: np.ndarray


def make_schedule(timesteps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule with cumulative products precomputed in float64."""
    if timesteps < 1:
        raise ValueError("timesteps must be >= 1")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    betas = np.zeros(timesteps + 1, dtype=np.float64)
    betas[1:] = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
    alpha_bar = np.ones(timesteps + 1, dtype=np.float64)
    alpha_bar[1:] = np.cumprod(1.0 - betas[1:])
    return NoiseSchedule(timesteps=timesteps, betas=betas, alpha_bar=alpha_bar)


# -------------------------------------------------------------- latent fusion


@dataclass(frozen=True)
class FusedLatent:
    """Channel-concatenated latent pair: first c channels heightmap, last c texture."""

    values: np.ndarray
    c: int

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[-1] != 2 * self.c:
            raise ValueError(
                f"fused latent must be (h, w, {2 * self.c}), got {self.values.shape}"
            )


def _grid_values(z, expect: str | None = None) -> np.ndarray:
    if isinstance(z, LatentGrid):
        if expect is not None and z.provenance != expect:
            raise ValueError(f"expected a {expect} latent, got {z.provenance}")
        return z.values
    return np.asarray(z, dtype=np.float32)


def fuse_latents(z_h, z_x) -> FusedLatent:
    """Concatenate heightmap and texture latents channel-wise, heightmap first."""
    vh = _grid_values(z_h, expect="heightmap")
    vx = _grid_values(z_x, expect="texture")
    if vh.shape[:2] != vx.shape[:2]:
        raise ValueError(f"spatial dims differ: {vh.shape[:2]} vs {vx.shape[:2]}")
    if vh.shape[-1] != vx.shape[-1]:
        raise ValueError(f"latent channel counts differ: {vh.shape[-1]} vs {vx.shape[-1]}")
    return FusedLatent(values=np.concatenate([vh, vx], axis=-1), c=vh.shape[-1])


def split_latents(fused: FusedLatent) -> tuple[LatentGrid, LatentGrid]:
    """Exact inverse of fuse_latents, restoring provenance tags."""
    c = fused.c
    return (
        LatentGrid(values=fused.values[..., :c], provenance="heightmap"),
        LatentGrid(values=fused.values[..., c:], provenance="texture"),
    )


def forward_diffuse(z0, t: int, eps, schedule: NoiseSchedule):
    """z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps; returns z0's type."""
    values = z0.values if isinstance(z0, FusedLatent) else np.asarray(z0)
    noise = eps.values if isinstance(eps, FusedLatent) else np.asarray(eps)
    if noise.shape != values.shape:
        raise ValueError(f"eps shape {noise.shape} does not match z0 {values.shape}")
    if not 0 <= t <= schedule.timesteps:
        raise ValueError(f"t must lie in [0, {schedule.timesteps}], got {t}")
    abar = schedule.alpha_bar[t]
    out = np.sqrt(abar) * values + np.sqrt(1.0 - abar) * noise
    out = out.astype(values.dtype, copy=False)
    if isinstance(z0, FusedLatent):
        return FusedLatent(values=out, c=z0.c)
    return out


# ------------------------------------------------------------------ denoiser


class _TimeBlock:
    """Pre-activation residual block with an additive timestep-embedding shift."""

    def __init__(self, params, name, c_in, c_out, emb_dim, rng):
        self.gn1 = GroupNorm(params, f"{name}.gn1", c_in)
        self.conv1 = Conv2d(params, f"{name}.conv1", c_in, c_out, rng=rng)
        self.emb_proj = Linear(params, f"{name}.emb_proj", emb_dim, c_out, rng=rng)
        self.gn2 = GroupNorm(params, f"{name}.gn2", c_out)
        self.conv2 = Conv2d(params, f"{name}.conv2", c_out, c_out, rng=rng)
        self.skip = None
        if c_in != c_out:
            self.skip = Conv2d(params, f"{name}.skip", c_in, c_out, kernel=1, rng=rng)
        self.c_out = c_out

    def __call__(self, x: Tensor, e: Tensor) -> Tensor:
        h = self.conv1(ops.silu(self.gn1(x)))
        h = ops.add(h, ops.reshape(self.emb_proj(e), (-1, self.c_out, 1, 1)))
        h = self.conv2(ops.silu(self.gn2(h)))
        return ops.add(h, self.skip(x) if self.skip else x)


class _UnetEncoder:
    """conv_in -> block -> strided down -> block -> mid block.

    Shared between the denoiser and the condition adapter (which clones
    its weights); ``hint`` is an optional feature map added right after
    conv_in.
    """

    def __init__(self, params, prefix, in_channels, width, emb_dim, rng):
        p = f"{prefix}." if prefix else ""
        self.conv_in = Conv2d(params, f"{p}conv_in", in_channels, width, rng=rng)
        self.d1 = _TimeBlock(params, f"{p}d1", width, width, emb_dim, rng)
        self.down1 = Conv2d(params, f"{p}down1", width, width, stride=2, rng=rng)
        self.d2 = _TimeBlock(params, f"{p}d2", width, 2 * width, emb_dim, rng)
        self.mid = _TimeBlock(params, f"{p}mid", 2 * width, 2 * width, emb_dim, rng)

    def features(self, z: Tensor, e: Tensor, hint: Tensor | None = None):
        x0 = self.conv_in(z)
        if hint is not None:
            x0 = ops.add(x0, hint)
        h1 = self.d1(x0, e)
        h2 = self.d2(self.down1(h1), e)
        m = self.mid(h2, e)
        return h1, h2, m


class DenoiserModel:
    """U-Net noise predictor over fused latents.

    Output shape always equals input shape. The context is a learned
    constant vector (zero-initialized) projected into the timestep
    embedding; it stands in for a frozen text encoding and trains along
    with everything else.
    """

    def __init__(self, in_channels: int, width: int = 48, context_dim: int = 16,
                 out_channels: int | None = None,
                 rng: np.random.Generator | None = None) -> None:
        if rng is None:
            rng = np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = in_channels if out_channels is None else out_channels
        self.width = width
        self.context_dim = context_dim
        self.emb_dim = 2 * width
        p = self.params = ParameterSet()

        self.fc1 = Linear(p, "emb.fc1", width, self.emb_dim, rng=rng)
        self.fc2 = Linear(p, "emb.fc2", self.emb_dim, self.emb_dim, rng=rng)
        self.ctx = p.add("ctx", np.zeros(context_dim, dtype=np.float32))
        self.ctx_proj = Linear(p, "ctx_proj", context_dim, self.emb_dim, rng=rng)

        self.encoder = _UnetEncoder(p, "", in_channels, width, self.emb_dim, rng)
        self.u2 = _TimeBlock(p, "u2", 4 * width, 2 * width, self.emb_dim, rng)
        self.u1 = _TimeBlock(p, "u1", 3 * width, width, self.emb_dim, rng)
        self.gn_out = GroupNorm(p, "gn_out", width)
        # zero-init: a fresh model predicts exactly zero noise
        self.conv_out = Conv2d(p, "conv_out", width, self.out_channels, zero_init=True)

    def embed(self, t, context, n: int) -> Tensor:
        temb = timestep_embedding(np.broadcast_to(np.asarray(t), (n,)), self.width)
        e = self.fc2(ops.silu(self.fc1(Tensor(temb))))
        ctx = self.ctx if context is None else context
        if not isinstance(ctx, Tensor):
            ctx = Tensor(np.asarray(ctx, dtype=np.float32))
        return ops.add(e, self.ctx_proj(ops.reshape(ctx, (1, -1))))

    def forward(self, z: Tensor, t, context=None, residuals: dict | None = None) -> Tensor:
        n, ch, height, width_px = z.data.shape
        if ch != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {ch}")
        if height % 2 or width_px % 2:
            raise ValueError(f"latent sides must be even, got {(height, width_px)}")
        e = self.embed(t, context, n)
        h1, h2, m = self.encoder.features(z, e)
        if residuals is not None:
            h1 = ops.add(h1, residuals["h1"])
            h2 = ops.add(h2, residuals["h2"])
            m = ops.add(m, residuals["m"])
        y2 = self.u2(ops.concat_channels(m, h2), e)
        y1 = self.u1(ops.concat_channels(ops.upsample_nearest2(y2), h1), e)
        return self.conv_out(ops.silu(self.gn_out(y1)))

    # ------------------------------------------------------- persistence

    def to_checkpoint(self, kind: str = "denoiser", metadata: dict | None = None) -> ModelCheckpoint:
        meta = {"arch": {"in_channels": self.in_channels, "out_channels": self.out_channels,
                         "width": self.width, "context_dim": self.context_dim}}
        meta.update(metadata or {})
        params = dict(self.params.state_dict())
        trainable = {name: self.params.is_trainable(name) for name in params}
        return ModelCheckpoint(kind=kind, params=params, trainable=trainable, metadata=meta)

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "DenoiserModel":
        arch = ckpt.metadata["arch"]
        model = cls(in_channels=int(arch["in_channels"]), width=int(arch["width"]),
                    context_dim=int(arch["context_dim"]),
                    out_channels=int(arch["out_channels"]))
        weights = {n: v for n, v in ckpt.params.items() if not n.startswith("opt.")}
        model.params.load_state_dict(weights)
        for name in weights:
            model.params.set_trainable(name, ckpt.trainable.get(name, True))
        return model


def load_denoiser(path: str) -> DenoiserModel:
    return DenoiserModel.from_checkpoint(read_checkpoint(path))


def constant_context(model: DenoiserModel) -> Tensor:
    """The model's learned constant context vector (same tensor every call)."""
    return model.ctx


# ---------------------------------------------------------------- objectives


def joint_loss(model: DenoiserModel, z0_h: np.ndarray, z0_x: np.ndarray,
               schedule: NoiseSchedule, rng: np.random.Generator) -> Tensor:
    """Noise-prediction MSE on fused latents, differentiable in the model.

    Per batch element: t ~ U[1, T], eps ~ N(0, I) over all 2c channels,
    and the loss is mean((eps_hat - eps)^2).
    """
    z0_h = np.asarray(z0_h, dtype=np.float32)
    z0_x = np.asarray(z0_x, dtype=np.float32)
    if z0_h.shape != z0_x.shape:
        raise ValueError(f"latent halves differ in shape: {z0_h.shape} vs {z0_x.shape}")
    if z0_h.ndim != 4:
        raise ValueError(f"latents must be (N, c, h, w), got {z0_h.shape}")
    z0 = np.concatenate([z0_h, z0_x], axis=1)
    n = z0.shape[0]
    t = rng.integers(1, schedule.timesteps + 1, size=n)
    eps = rng.standard_normal(z0.shape).astype(np.float32)
    abar = schedule.alpha_bar[t].reshape(n, 1, 1, 1)
    z_t = (np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps).astype(np.float32)
    pred = model.forward(Tensor(z_t), t)
    return ops.mean_square(ops.sub(pred, Tensor(eps)))


# ------------------------------------------------------------------ sampling


def _predict(model, z: np.ndarray, t: int, context) -> np.ndarray:
    with no_grad():
        out = model.forward(Tensor(z.astype(np.float32, copy=False)), t, context)
    return out.data


def _split_sample(z: np.ndarray) -> tuple[LatentGrid, LatentGrid]:
    fused = FusedLatent(values=z[0].transpose(1, 2, 0), c=z.shape[1] // 2)
    return split_latents(fused)


def ddpm_sample(model, schedule: NoiseSchedule, shape: tuple[int, int, int],
                rng: np.random.Generator, context=None) -> tuple[LatentGrid, LatentGrid]:
    """Full ancestral sampling: T posterior-mean steps from pure noise.

    ``shape`` is the per-modality latent shape (h, w, c); the trajectory
    runs on 2c fused channels and the final latents are split and
    returned heightmap-first.
    """
    h, w, c = shape
    z = rng.standard_normal((1, 2 * c, h, w)).astype(np.float32)
    for t in range(schedule.timesteps, 0, -1):
        try:
            eps_hat = _predict(model, z, t, context)
        except FloatingPointError as exc:
            raise RuntimeError(f"non-finite denoiser output at t={t}") from exc
        beta = schedule.betas[t]
        alpha = 1.0 - beta
        abar = schedule.alpha_bar[t]
        mean = (z - beta / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(alpha)
        if t > 1:
            z = mean + np.sqrt(beta) * rng.standard_normal(z.shape)
        else:
            z = mean
        z = z.astype(np.float32)
        if not np.isfinite(z).all():
            raise RuntimeError(f"non-finite latent values at t={t}")
    return _split_sample(z)


def _strided_timesteps(timesteps: int, steps: int) -> np.ndarray:
    if not 1 <= steps <= timesteps:
        raise ValueError(f"steps must lie in [1, {timesteps}], got {steps}")
    if steps == 1:
        return np.array([timesteps], dtype=np.int64)
    return np.unique(np.rint(np.linspace(1, timesteps, steps)).astype(np.int64))


def strided_sample(model, schedule: NoiseSchedule, shape: tuple[int, int, int],
                   steps: int = 20, rng: np.random.Generator | None = None,
                   context=None) -> tuple[LatentGrid, LatentGrid]:
    """Deterministic reduced-step sampling over uniformly strided timesteps.

    The update is the eta=0 rule: project to the x0 estimate, then step to
    the previous retained timestep. steps=T walks every timestep; the
    model is evaluated exactly ``steps`` times either way.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h, w, c = shape
    taus = _strided_timesteps(schedule.timesteps, steps)
    z = rng.standard_normal((1, 2 * c, h, w)).astype(np.float32)
    for i in range(len(taus) - 1, -1, -1):
        t = int(taus[i])
        prev = int(taus[i - 1]) if i > 0 else 0
        try:
            eps_hat = _predict(model, z, t, context)
        except FloatingPointError as exc:
            raise RuntimeError(f"non-finite denoiser output at t={t}") from exc
        abar_t = schedule.alpha_bar[t]
        abar_prev = schedule.alpha_bar[prev]
        x0 = (z - np.sqrt(1.0 - abar_t) * eps_hat) / np.sqrt(abar_t)
        z = (np.sqrt(abar_prev) * x0 + np.sqrt(1.0 - abar_prev) * eps_hat).astype(np.float32)
        if not np.isfinite(z).all():
            raise RuntimeError(f"non-finite latent values at t={t}")
    return _split_sample(z)


# ----------------------------------------------------------- channel widening


def extend_channels(ckpt: ModelCheckpoint, old_in: int, old_out: int,
                    new_in: int, new_out: int, init_scale: float,
                    rng: np.random.Generator | None = None) -> ModelCheckpoint:
    """Widen a denoiser checkpoint's input/output channel counts.

    Existing weights are copied; weights touching new channels are drawn
    from N(0, init_scale^2) (exact zeros at scale 0, which makes the
    widened model agree with the original on the original channels).
    """
    if new_in < old_in or new_out < old_out:
        raise ValueError("new channel counts must not shrink")
    if rng is None:
        rng = np.random.default_rng(0)
    params = dict(ckpt.params)
    w_in = params.get("conv_in.weight")
    w_out = params.get("conv_out.weight")
    b_out = params.get("conv_out.bias")
    if w_in is None or w_out is None or b_out is None:
        raise ValueError("checkpoint lacks conv_in/conv_out parameters")
    if w_in.shape[1] != old_in:
        raise ValueError(f"conv_in expects {w_in.shape[1]} channels, caller said {old_in}")
    if w_out.shape[0] != old_out or b_out.shape[0] != old_out:
        raise ValueError(f"conv_out emits {w_out.shape[0]} channels, caller said {old_out}")

    def drawn(shape):
        return rng.normal(0.0, init_scale, size=shape).astype(np.float32)

    if new_in > old_in:
        extra = drawn((w_in.shape[0], new_in - old_in) + w_in.shape[2:])
        params["conv_in.weight"] = np.concatenate([w_in, extra], axis=1)
    if new_out > old_out:
        extra = drawn((new_out - old_out,) + w_out.shape[1:])
        params["conv_out.weight"] = np.concatenate([w_out, extra], axis=0)
        params["conv_out.bias"] = np.concatenate(
            [b_out, np.zeros(new_out - old_out, dtype=np.float32)])

    metadata = dict(ckpt.metadata)
    arch = dict(metadata.get("arch", {}))
    arch["in_channels"] = new_in
    arch["out_channels"] = new_out
    metadata["arch"] = arch
    trainable = dict(ckpt.trainable)
    return ModelCheckpoint(kind=ckpt.kind, params=params, trainable=trainable, metadata=metadata)


# ------------------------------------------------------------------ training


def _latent_scale(latents: np.ndarray) -> float:
    std = float(np.std(latents.astype(np.float64)))
    return 1.0 / std if std > 0 else 1.0


def train_joint(z_h: np.ndarray, z_x: np.ndarray, config: dict, kind: str = "ldm",
                checkpoint_path: str | None = None,
                resume_from: str | ModelCheckpoint | None = None) -> ModelCheckpoint:
    """Train the joint denoiser on paired (N, c, h, w) latents.

    Each modality is rescaled to roughly unit variance by a scalar
    (stored in the checkpoint metadata and applied again at sampling
    time). Deterministic per seed; resume continues bit-exactly.
    """
    cfg = config["ldm"]
    seed = int(config["seed"])
    z_h = np.asarray(z_h, dtype=np.float32)
    z_x = np.asarray(z_x, dtype=np.float32)
    if z_h.ndim != 4 or z_h.shape != z_x.shape:
        raise ValueError(f"latents must be equal-shape (N, c, h, w), got {z_h.shape} / {z_x.shape}")
    if z_h.shape[0] == 0:
        raise ValueError("dataset is empty")

    schedule = make_schedule(int(cfg["timesteps"]), float(cfg["beta_start"]), float(cfg["beta_end"]))
    train_rng = rng_stream(seed, f"training/{kind}")
    opt = OptimizerState()
    start_epoch = 0

    if resume_from is not None:
        ckpt = read_checkpoint(resume_from) if isinstance(resume_from, str) else resume_from
        model = DenoiserModel.from_checkpoint(ckpt)
        opt.load_state_dict(ckpt.params, step=int(ckpt.metadata["opt_step"]))
        start_epoch = int(ckpt.metadata["epoch"])
        train_rng.bit_generator.state = ckpt.metadata["rng_state"]
        scale_h = float(ckpt.metadata["latent_scale"]["heightmap"])
        scale_x = float(ckpt.metadata["latent_scale"]["texture"])
    else:
        c = z_h.shape[1]
        model = DenoiserModel(in_channels=2 * c, width=int(cfg["width"]),
                              context_dim=int(cfg["context_dim"]),
                              rng=rng_stream(seed, f"init/{kind}"))
        scale_h = _latent_scale(z_h)
        scale_x = _latent_scale(z_x)

    zs_h = (z_h * scale_h).astype(np.float32)
    zs_x = (z_x * scale_x).astype(np.float32)
    n = zs_h.shape[0]
    epochs = int(cfg["epochs"])
    batch_size = int(cfg["batch_size"])
    every = int(cfg.get("checkpoint_every", 0) or 0)
    last_loss = float("nan")

    def snapshot(epoch: int) -> ModelCheckpoint:
        ckpt = model.to_checkpoint(kind, metadata={
            "epoch": epoch,
            "opt_step": opt.step,
            "rng_state": train_rng.bit_generator.state,
            "seed": seed,
            "last_loss": last_loss,
            "latent_scale": {"heightmap": scale_h, "texture": scale_x},
            "schedule": {"timesteps": schedule.timesteps,
                         "beta_start": float(cfg["beta_start"]),
                         "beta_end": float(cfg["beta_end"])},
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
                loss = joint_loss(model, zs_h[idx], zs_x[idx], schedule, train_rng)
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


class JointDiffusion(BaseEstimator):
    """Joint latent diffusion with a fit/sample interface.

    ``fit`` takes fused latents (N, h, w, 2c); ``sample`` returns fused
    latents in the same (unscaled) space.
    """

    def __init__(self, width: int = 48, context_dim: int = 16, timesteps: int = 1000,
                 beta_start: float = 1e-4, beta_end: float = 0.02, lr: float = 1e-4,
                 weight_decay: float = 0.0, epochs: int = 150, batch_size: int = 32,
                 sample_steps: int = 20, random_state: int = 0):
        self.width = width
        self.context_dim = context_dim
        self.timesteps = timesteps
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.sample_steps = sample_steps
        self.random_state = random_state

    def fit(self, X: np.ndarray, y=None) -> "JointDiffusion":
        X = np.asarray(X, dtype=np.float32)
        if X.ndim != 4 or X.shape[-1] % 2:
            raise ValueError(f"X must be (N, h, w, 2c), got {X.shape}")
        c = X.shape[-1] // 2
        batch = X.transpose(0, 3, 1, 2)
        config = {
            "seed": int(self.random_state),
            "ldm": {
                "timesteps": self.timesteps, "beta_start": self.beta_start,
                "beta_end": self.beta_end, "width": self.width,
                "context_dim": self.context_dim, "lr": self.lr,
                "weight_decay": self.weight_decay, "epochs": self.epochs,
                "batch_size": self.batch_size, "checkpoint_every": 0,
            },
        }
        self.checkpoint_ = train_joint(batch[:, :c], batch[:, c:], config, kind="ldm")
        self.model_ = DenoiserModel.from_checkpoint(self.checkpoint_)
        self.schedule_ = make_schedule(self.timesteps, self.beta_start, self.beta_end)
        self.latent_shape_ = (X.shape[1], X.shape[2], c)
        self.scales_ = self.checkpoint_.metadata["latent_scale"]
        return self

    def sample(self, n_samples: int = 1, steps: int | None = None,
               random_state: int | None = None) -> np.ndarray:
        steps = self.sample_steps if steps is None else steps
        rng = np.random.default_rng(
            self.random_state if random_state is None else random_state)
        out = []
        for _ in range(n_samples):
            zh, zx = strided_sample(self.model_, self.schedule_, self.latent_shape_,
                                    steps=steps, rng=rng)
            fused = np.concatenate([
                zh.values / self.scales_["heightmap"],
                zx.values / self.scales_["texture"],
            ], axis=-1)
            out.append(fused)
        return np.stack(out)
