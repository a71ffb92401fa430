"""Deterministic synthetic paired heightmap + texture corpus.

Value-noise fBm terrain with a texture whose coupling to the geometry is
tunable: at correlation strength 1 the texture is a pure function of
elevation and slope, at 0 it is independent noise. This gives training
and evaluation a corpus with a *known* geometry-texture correlation, in
the on-disk layout the raster module defines.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .geomorph import SketchParams, extract_sketch
from .raster import (
    Heightmap,
    Texture,
    atomic_write_bytes,
    load_heightmap_png,
    load_sidecar,
    load_texture_png,
    save_heightmap_png,
    save_sidecar,
    save_texture_png,
)

__all__ = [
    "SynthConfig", "fbm_heightmap", "correlated_texture",
    "build_synthetic_dataset", "load_dataset", "pair_seed",
]

MAX_ELEVATION_M = 2000.0


@dataclass
class SynthConfig:
    """Knobs for one synthetic pair (or a whole dataset via seed spawning)."""

    seed: int = 0
    size_px: int = 64
    octaves: int = 4
    persistence: float = 0.5
    elevation_scale_m: float = 1600.0
    palette_low: tuple[int, int, int] = (40, 70, 30)
    palette_high: tuple[int, int, int] = (240, 240, 235)
    palette_slope: tuple[int, int, int] = (120, 100, 80)
    correlation_strength: float = 0.9
    resolution_m: float = 25.0

    def validate(self) -> None:
        if self.size_px < 16:
            raise ValueError("size_px must be >= 16")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if not 0.0 < self.persistence < 1.0:
            raise ValueError("persistence must lie in (0, 1)")
        if not 0.0 <= self.correlation_strength <= 1.0:
            raise ValueError("correlation_strength must lie in [0, 1]")
        if self.elevation_scale_m <= 0:
            raise ValueError("elevation_scale_m must be positive")


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    """Bilinear value noise: random lattice, smoothstep-interpolated."""
    lattice = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    coords = np.linspace(0.0, cells, size)
    i0 = np.minimum(coords.astype(int), cells - 1)
    frac = _smoothstep(coords - i0)
    i1 = i0 + 1
    top = lattice[np.ix_(i0, i0)] * (1 - frac)[None, :] + lattice[np.ix_(i0, i1)] * frac[None, :]
    bottom = lattice[np.ix_(i1, i0)] * (1 - frac)[None, :] + lattice[np.ix_(i1, i1)] * frac[None, :]
    return top * (1 - frac)[:, None] + bottom * frac[:, None]


def fbm_heightmap(config: SynthConfig) -> Heightmap:
    """Fractional-Brownian-motion terrain, deterministic per seed.

    Octave o contributes value noise on a 2^(o+1)-cell lattice with
    amplitude persistence^o; the sum is normalized to [-1, 1] by the
    amplitude total, mapped to meters and clamped to [0, 2000].
    """
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(config.seed), 0)))
    total = np.zeros((config.size_px, config.size_px))
    amplitude_sum = 0.0
    for octave in range(config.octaves):
        cells = 2 ** (octave + 1)
        if cells >= config.size_px:
            cells = config.size_px // 2  # lattice can never outresolve the grid
        amplitude = config.persistence**octave
        total += amplitude * _value_noise(rng, config.size_px, cells)
        amplitude_sum += amplitude
    normalized = total / amplitude_sum  # [-1, 1]
    meters = (normalized + 1.0) * 0.5 * config.elevation_scale_m
    meters = np.clip(meters, 0.0, MAX_ELEVATION_M)
    return Heightmap(meters.astype(np.float32), resolution_m=config.resolution_m)


def correlated_texture(hm: Heightmap, config: SynthConfig) -> Texture:
    """Texture with tunable geometry coupling.

    Signal part: elevation-interpolated palette pulled toward the slope
    color by local gradient magnitude (clipped at a 45-degree slope).
    Final color = strength * signal + (1 - strength) * uniform noise.
    Deterministic per config seed; the noise stream is independent of the
    elevation stream.
    """
    config.validate()
    elev = hm.elevations.astype(np.float64)
    if elev.min() < 0 or elev.max() > MAX_ELEVATION_M:
        raise ValueError("heightmap must lie within [0, 2000] m")
    h01 = elev / MAX_ELEVATION_M

    low = np.array(config.palette_low, dtype=np.float64)
    high = np.array(config.palette_high, dtype=np.float64)
    slope_color = np.array(config.palette_slope, dtype=np.float64)
    base = low[None, None, :] * (1.0 - h01[..., None]) + high[None, None, :] * h01[..., None]

    gy, gx = np.gradient(elev)  # meters per pixel
    slope = np.hypot(gy, gx) / hm.resolution_m  # rise over run
    blend = np.clip(slope, 0.0, 1.0)[..., None]
    signal = base * (1.0 - blend) + slope_color[None, None, :] * blend

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(config.seed), 1)))
    noise = rng.uniform(0.0, 255.0, size=signal.shape)
    s = config.correlation_strength
    mixed = s * signal + (1.0 - s) * noise
    values = np.clip(np.rint(mixed), 0, 255).astype(np.uint8)
    return Texture(values, resolution_m=hm.resolution_m)


def pair_seed(master_seed: int, index: int) -> int:
    """Stable per-pair seed derived from the dataset master seed."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _pair_id(index: int) -> str:
    return f"{index:06d}"


def _build_one(out_dir: str, index: int, config: SynthConfig, sketch_params: SketchParams) -> dict:
    pair_cfg = replace(config, seed=pair_seed(config.seed, index))
    hm = fbm_heightmap(pair_cfg)
    texture = correlated_texture(hm, pair_cfg)

    pid = _pair_id(index)
    height_path = os.path.join(out_dir, f"{pid}_height.png")
    save_heightmap_png(hm, height_path)
    # sketches come from the *persisted* (meter-rounded) heights so a
    # reload + re-extract reproduces them byte for byte
    hm_disk = load_heightmap_png(height_path, resolution_m=config.resolution_m)
    sketch = extract_sketch(hm_disk, sketch_params)
    save_texture_png(texture.values, os.path.join(out_dir, f"{pid}_texture.png"))
    save_texture_png(sketch, os.path.join(out_dir, f"{pid}_sketch.png"))
    save_sidecar(
        os.path.join(out_dir, f"{pid}.json"),
        resolution_m=config.resolution_m,
        source_id=f"synth-{config.seed}-{index}",
        max_elevation_m=float(hm_disk.elevations.max()),
    )
    return {"id": pid, "seed": pair_cfg.seed}


def build_synthetic_dataset(
    n: int,
    config: SynthConfig,
    out_dir: str,
    sketch_params: SketchParams | None = None,
    workers: int = 1,
) -> dict:
    """Write ``n`` heightmap/texture/sketch pairs plus a manifest.

    Regeneration with the same config is byte-identical; items are
    independent, so the worker pool never affects content.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    config.validate()
    sketch_params = sketch_params or SketchParams()
    os.makedirs(out_dir, exist_ok=True)

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(lambda i: _build_one(out_dir, i, config, sketch_params), range(n)))
    else:
        entries = [_build_one(out_dir, i, config, sketch_params) for i in range(n)]

    manifest = {
        "count": n,
        "size_px": config.size_px,
        "resolution_m": config.resolution_m,
        "seed": config.seed,
        "correlation_strength": config.correlation_strength,
        "pairs": entries,
    }
    atomic_write_bytes(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True).encode(),
    )
    return manifest


def load_dataset(dataset_dir: str, with_sketches: bool = False) -> list[dict]:
    """Load all pairs listed in a dataset manifest.

    Returns one dict per pair: heightmap, texture, sidecar metadata and
    (optionally) the sketch raster.
    """
    manifest_path = os.path.join(dataset_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    pairs = []
    for entry in manifest["pairs"]:
        pid = entry["id"]
        sidecar = load_sidecar(os.path.join(dataset_dir, f"{pid}.json"))
        resolution = float(sidecar["resolution_m"])
        item = {
            "id": pid,
            "heightmap": load_heightmap_png(
                os.path.join(dataset_dir, f"{pid}_height.png"), resolution_m=resolution
            ),
            "texture": load_texture_png(
                os.path.join(dataset_dir, f"{pid}_texture.png"), resolution_m=resolution
            ),
            "meta": sidecar,
        }
        if with_sketches:
            sketch_path = os.path.join(dataset_dir, f"{pid}_sketch.png")
            if not os.path.exists(sketch_path):
                raise FileNotFoundError(f"dataset pair {pid} lacks a sketch raster")
            item["sketch"] = load_texture_png(sketch_path, resolution_m=resolution).values
        pairs.append(item)
    return pairs
