"""Evaluation: height-texture correlation statistics and a Fréchet feature distance.

The correlation suite measures how strongly generated textures track the
underlying elevation, pair by pair, and summarizes a set of pairs with
the usual table statistics. The Fréchet distance compares feature
distributions of two texture sets under a pluggable extractor; the
default extractor pools a texture VAE's posterior means to a fixed-width
vector, standing in for a large pretrained image encoder.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .latent import VaeModel, vae_encode
from .raster import Heightmap, Texture, atomic_write_bytes, normalize_texture

__all__ = [
    "CorrelationStats", "VaeFeatureExtractor", "pearson_corr_pair",
    "corr_stats", "frechet_feature_distance", "evaluate_model",
]


@dataclass(frozen=True)
class CorrelationStats:
    """Summary of a set of per-pair correlations (dimensionless)."""

    mean: float
    std: float
    q25: float
    q50: float
    q75: float
    iqr: float


def pearson_corr_pair(hm, texture) -> float:
    """Mean over the 3 channels of the Pearson correlation with elevation.

    Raw meter elevations are used; Pearson is invariant to the affine
    normalization, so normalized inputs would give the same coefficients.
    """
    elevations = hm.elevations if isinstance(hm, Heightmap) else np.asarray(hm)
    values = texture.values if isinstance(texture, Texture) else np.asarray(texture)
    if elevations.shape != values.shape[:2]:
        raise ValueError(
            f"heightmap {elevations.shape} does not match texture {values.shape[:2]}")
    h = elevations.astype(np.float64).ravel()
    h = h - h.mean()
    ss_h = float(h @ h)
    if ss_h == 0.0:
        raise ValueError("heightmap is constant; correlation undefined")
    coeffs = []
    for k in range(3):
        c = values[..., k].astype(np.float64).ravel()
        c = c - c.mean()
        ss_c = float(c @ c)
        if ss_c == 0.0:
            raise ValueError(f"texture channel {k} is constant; correlation undefined")
        coeffs.append(float(h @ c) / np.sqrt(ss_h * ss_c))
    return float(np.mean(coeffs))


def corr_stats(correlations) -> CorrelationStats:
    """Mean, (n-1)-divisor std, and linearly interpolated quartiles."""
    values = np.asarray(list(correlations), dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError(
            f"need at least two correlations for a spread, got {values.size}")
    if np.abs(values).max() > 1.0 + 1e-9:
        raise ValueError("correlations must lie in [-1, 1]")
    q25, q50, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    return CorrelationStats(
        mean=float(values.mean()),
        std=float(values.std(ddof=1)),
        q25=float(q25), q50=float(q50), q75=float(q75),
        iqr=float(q75 - q25),
    )


class VaeFeatureExtractor:
    """Deterministic texture features: pooled VAE posterior means.

    Encodes through the texture VAE without sampling and block-averages
    the latent grid down to ``grid`` x ``grid`` cells, giving a
    grid*grid*c vector (64 for the default c=4, grid=4).
    """

    def __init__(self, vae: VaeModel, grid: int = 4):
        if vae.in_channels != 3:
            raise ValueError("feature extraction expects the texture VAE")
        self.vae = vae
        self.grid = int(grid)
        self.name = f"texture-vae-pool{self.grid}"

    def __call__(self, texture) -> np.ndarray:
        values = texture.values if isinstance(texture, Texture) else np.asarray(texture)
        z = vae_encode(self.vae, normalize_texture(values)).values
        h, w = z.shape[:2]
        if h < self.grid or w < self.grid:
            raise ValueError(
                f"latent grid {(h, w)} is smaller than the {self.grid}x{self.grid} pooling")
        rows = np.array_split(np.arange(h), self.grid)
        cols = np.array_split(np.arange(w), self.grid)
        pooled = np.empty((self.grid, self.grid, z.shape[2]), dtype=np.float64)
        for i, r in enumerate(rows):
            for j, c in enumerate(cols):
                pooled[i, j] = z[np.ix_(r, c)].mean(axis=(0, 1))
        return pooled.ravel()


def _gaussian_moments(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError(f"features must be (n, d), got shape {feats.shape}")
    n, d = feats.shape
    if n == 0:
        raise ValueError("empty feature set")
    mu = feats.mean(axis=0)
    if n == 1:
        sigma = np.zeros((d, d))
    else:
        sigma = np.atleast_2d(np.cov(feats, rowvar=False, ddof=1))
    if n <= d:
        # too few samples for a full-rank covariance
        sigma = sigma + 1e-6 * np.eye(d)
    return mu, sigma


def frechet_feature_distance(set_a, set_b, extractor=None) -> float:
    """Fréchet distance between Gaussian fits of two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the
    matrix square root taken by eigendecomposition of the symmetrized
    product and negative eigenvalues clamped at zero. With ``extractor``
    the sets are sequences of textures; without it they are already
    (n, d) feature arrays.
    """
    if extractor is not None:
        set_a = np.stack([extractor(t) for t in set_a]) if len(set_a) else np.empty((0, 1))
        set_b = np.stack([extractor(t) for t in set_b]) if len(set_b) else np.empty((0, 1))
    mu_a, sigma_a = _gaussian_moments(set_a)
    mu_b, sigma_b = _gaussian_moments(set_b)
    if mu_a.shape != mu_b.shape:
        raise ValueError(f"feature dimensions differ: {mu_a.shape} vs {mu_b.shape}")
    diff = mu_a - mu_b
    product = sigma_a @ sigma_b
    eigenvalues = np.linalg.eigvalsh((product + product.T) / 2.0)
    trace_sqrt = np.sqrt(np.clip(eigenvalues, 0.0, None)).sum()
    distance = float(diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * trace_sqrt)
    return max(distance, 0.0)


_STAT_FIELDS = ("mean", "std", "q25", "q50", "q75", "iqr")


def evaluate_model(samples, reference, extractor,
                   csv_path: str | None = None,
                   json_path: str | None = None) -> dict:
    """Compare generated (heightmap, texture) pairs against a reference set.

    Returns a JSON-ready report with correlation statistics for both
    sets, their per-statistic absolute differences, and the Fréchet
    feature distance between the texture sets. ``csv_path`` gets one
    correlation per row for external plotting.
    """
    sample_corrs = [pearson_corr_pair(h, t) for h, t in samples]
    reference_corrs = [pearson_corr_pair(h, t) for h, t in reference]
    sample_stats = corr_stats(sample_corrs)
    reference_stats = corr_stats(reference_corrs)
    distance = frechet_feature_distance(
        [t for _, t in samples], [t for _, t in reference], extractor)
    report = {
        "samples": asdict(sample_stats),
        "reference": asdict(reference_stats),
        "differences": {
            f: abs(getattr(sample_stats, f) - getattr(reference_stats, f))
            for f in _STAT_FIELDS
        },
        "frechet_distance": distance,
        "counts": {"samples": len(sample_corrs), "reference": len(reference_corrs)},
        "extractor": extractor.name,
    }
    if csv_path:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["set", "index", "correlation"])
        for i, r in enumerate(sample_corrs):
            writer.writerow(["samples", i, repr(r)])
        for i, r in enumerate(reference_corrs):
            writer.writerow(["reference", i, repr(r)])
        atomic_write_bytes(csv_path, buf.getvalue().encode())
    if json_path:
        atomic_write_bytes(json_path, json.dumps(report, indent=2).encode())
    return report
