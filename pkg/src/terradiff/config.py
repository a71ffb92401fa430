"""Pipeline configuration, seed sub-streams and run manifests.

One JSON config drives every CLI command; flags override single keys.
All randomness descends from one integer seed through named sub-streams
(``dataset``, ``init``, ``training``, ``sampling``, plus dotted
sub-names), so any stage can be reproduced in isolation.
"""
from __future__ import annotations

import hashlib
import json
import os
import zlib
from copy import deepcopy

import numpy as np

from . import __version__
from .raster import atomic_write_bytes

__all__ = [
    "DEFAULT_CONFIG", "load_config", "merge_config", "config_hash",
    "seed_for", "rng_stream", "worker_count", "write_run_manifest",
]

THREADS_ENV_VAR = "TERRAFUSION_THREADS"

DEFAULT_CONFIG: dict = {
    "seed": 1234,
    "out_dir": "runs/default",
    "dataset": {
        "dir": "data/synthetic",
        "count": 512,
        "size_px": 64,
        "resolution_m": 25.0,
        "octaves": 4,
        "persistence": 0.5,
        "elevation_scale_m": 1600.0,
        "correlation_strength": 0.9,
        "palette": {
            "low": [40, 70, 30],
            "high": [240, 240, 235],
            "slope": [120, 100, 80],
        },
    },
    "sketch": {
        "threshold_percentile": 98.0,
        "canny_sigma": 1.4,
        "canny_low": 0.1,
        "canny_high": 0.2,
    },
    "vae": {
        "f": 4,
        "c": 4,
        "width": 16,
        "beta": 1e-6,
        "lr": 1e-4,
        "weight_decay": 0.0,
        "epochs": 30,
        "batch_size": 16,
        "checkpoint_every": 10,
        "max_elevation_m": 2000.0,
    },
    "ldm": {
        "timesteps": 1000,
        "beta_start": 1e-4,
        "beta_end": 0.02,
        "width": 48,
        "context_dim": 16,
        "lr": 1e-4,
        "weight_decay": 0.0,
        "epochs": 150,
        "batch_size": 32,
        "checkpoint_every": 50,
        "sample_steps": 20,
    },
    "control": {
        "lr": 1e-5,
        "weight_decay": 0.0,
        "epochs": 60,
        "batch_size": 32,
        "checkpoint_every": 20,
        "condition_dropout": 0.1,
        "sample_steps": 20,
    },
    "paths": {
        "vae_heightmap": "runs/default/vae_heightmap.tfck",
        "vae_texture": "runs/default/vae_texture.tfck",
        "ldm": "runs/default/ldm.tfck",
        "adapter": "runs/default/adapter.tfck",
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8765,
        "queue_depth": 16,
        "resolution_px": 64,
        "allowed_origins": ["*"],
        "default_steps": 20,
    },
}


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins on leaves."""
    merged = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged


def load_config(path: str | None) -> dict:
    """Defaults deep-merged with the JSON file at ``path`` (if given)."""
    if path is None:
        return deepcopy(DEFAULT_CONFIG)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(user, dict):
        raise ValueError(f"config {path}: top level must be an object")
    return merge_config(DEFAULT_CONFIG, user)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def seed_for(seed: int, stream: str) -> np.random.SeedSequence:
    """Named child of the master seed; stable across runs and platforms."""
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))


def rng_stream(seed: int, stream: str) -> np.random.Generator:
    """Generator for a named sub-stream (e.g. "training/ldm")."""
    return np.random.default_rng(seed_for(seed, stream))


def worker_count(default: int | None = None) -> int:
    """Worker-pool size, capped by the TERRAFUSION_THREADS env var."""
    if default is None:
        default = min(4, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return max(1, default)
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 1, got {cap}")
    return min(max(1, default), cap)


def write_run_manifest(out_dir: str, command: str, config: dict, extra: dict | None = None) -> str:
    """Record what produced the artifacts in ``out_dir``; returns the path."""
    manifest = {
        "command": command,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "package_version": __version__,
        "config": config,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, f"run_manifest_{command}.json")
    atomic_write_bytes(path, json.dumps(manifest, indent=2, sort_keys=True).encode())
    return path
