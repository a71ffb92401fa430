"""DEM and texture raster handling.

Covers the data plumbing between raw elevation tiles and model-ready
arrays: ``.hgt`` parsing, bilinear resampling, patch extraction, the
elevation normalization used by the autoencoders, PNG/JSON persistence,
region screening and two-color texture summaries.

On-disk formats:
  * heightmaps: 16-bit grayscale PNG storing integer meters (0..65535),
  * textures and sketches: 8-bit RGB PNG,
  * one JSON sidecar per pair: {resolution_m, source_id, max_elevation_m}.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

__all__ = [
    "Heightmap", "Texture", "HgtTile", "RegionInfo", "TwoColorSummary",
    "parse_hgt", "write_hgt", "hgt_to_heightmap",
    "resample_bilinear", "resample_to_resolution", "extract_patches", "upsample_texture",
    "normalize_elevations", "denormalize_elevations", "normalize_texture", "denormalize_texture",
    "elevation_filter", "region_filter", "cap_per_category", "quantize_two_color",
    "save_heightmap_png", "load_heightmap_png", "save_texture_png", "load_texture_png",
    "save_sidecar", "load_sidecar", "atomic_write_bytes",
]

HGT_VOID = -32768
DEFAULT_MAX_ELEVATION_M = 2000.0


@dataclass
class Heightmap:
    """Elevation grid in meters, row 0 = northmost."""

    elevations: np.ndarray
    resolution_m: float = 30.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.elevations, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError(f"heightmap must be 2-D with sides >= 2, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("heightmap contains non-finite elevations")
        if self.resolution_m <= 0:
            raise ValueError("resolution_m must be positive")
        self.elevations = arr

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevations.shape


@dataclass
class Texture:
    """RGB surface image aligned with a heightmap."""

    values: np.ndarray
    resolution_m: float = 30.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"texture must be HxWx3, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError("texture values must be uint8")
        self.values = arr

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]


@dataclass
class HgtTile:
    """Raw DEM tile: integer elevations plus a per-pixel void mask."""

    elevations: np.ndarray  # (n, n) int16, may contain HGT_VOID
    void_mask: np.ndarray  # (n, n) bool
    resolution_m: float = 30.0


# -- .hgt parsing ----------------------------------------------------------------

def parse_hgt(data: bytes, resolution_m: float = 30.0) -> HgtTile:
    """Decode a big-endian int16 square elevation tile.

    Standard 1-degree tiles are 3601x3601 (1 arc-second). Rows run
    north-to-south from the NW corner. Void pixels carry -32768 and are
    reported in the mask, not patched over.
    """
    if len(data) % 2 != 0:
        raise ValueError(f"odd byte length {len(data)}: not an int16 grid")
    count = len(data) // 2
    side = math.isqrt(count)
    if side * side != count or side < 2:
        raise ValueError(f"byte length {len(data)} is not a square int16 grid")
    grid = np.frombuffer(data, dtype=">i2").reshape(side, side).astype(np.int16)
    return HgtTile(elevations=grid, void_mask=grid == HGT_VOID, resolution_m=resolution_m)


def write_hgt(tile: HgtTile) -> bytes:
    """Inverse of :func:`parse_hgt` (exact round-trip)."""
    grid = np.asarray(tile.elevations, dtype=np.int16)
    return grid.astype(">i2").tobytes()


def hgt_to_heightmap(tile: HgtTile) -> Heightmap:
    """Promote a void-free tile to a float heightmap; voids are a hard error."""
    if np.any(tile.void_mask):
        raise ValueError(f"tile has {int(tile.void_mask.sum())} void pixels")
    return Heightmap(tile.elevations.astype(np.float32), resolution_m=tile.resolution_m)


# -- resampling and patching ------------------------------------------------------

def _bilinear_grid(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear sampling of a 2-D array, in float64."""
    in_h, in_w = src.shape
    src64 = src.astype(np.float64)
    if out_h == 1:
        ys = np.zeros(1)
    else:
        ys = np.linspace(0.0, in_h - 1.0, out_h)
    if out_w == 1:
        xs = np.zeros(1)
    else:
        xs = np.linspace(0.0, in_w - 1.0, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = src64[np.ix_(y0, x0)] * (1 - wx) + src64[np.ix_(y0, x1)] * wx
    bottom = src64[np.ix_(y1, x0)] * (1 - wx) + src64[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def resample_bilinear(hm: Heightmap, out_shape: tuple[int, int], resolution_m: float | None = None) -> Heightmap:
    """Bilinear align-corners resample to an explicit output shape."""
    out_h, out_w = out_shape
    if out_h < 2 or out_w < 2:
        raise ValueError("output sides must be >= 2")
    res = resolution_m if resolution_m is not None else (
        hm.resolution_m * (hm.shape[0] - 1) / (out_h - 1)
    )
    out = _bilinear_grid(hm.elevations, out_h, out_w).astype(np.float32)
    return Heightmap(out, resolution_m=res)


def resample_to_resolution(hm: Heightmap, target_resolution_m: float) -> Heightmap:
    """Resample so pixel pitch becomes ``target_resolution_m``.

    Output side n' = round((n-1) * res / target) + 1, which maps the
    corner samples onto themselves (align-corners). Same resolution in
    and out returns an identical grid.
    """
    if target_resolution_m <= 0:
        raise ValueError("target resolution must be positive")
    h, w = hm.shape
    out_h = int(round((h - 1) * hm.resolution_m / target_resolution_m)) + 1
    out_w = int(round((w - 1) * hm.resolution_m / target_resolution_m)) + 1
    return resample_bilinear(hm, (out_h, out_w), resolution_m=target_resolution_m)


def extract_patches(
    hm: Heightmap, texture: Texture | None, patch_px: int = 256
) -> list[tuple[Heightmap, Texture | None]]:
    """Non-overlapping row-major tiling; trailing partial rows/cols dropped."""
    if patch_px < 2:
        raise ValueError("patch size must be >= 2")
    h, w = hm.shape
    if texture is not None and texture.shape != (h, w):
        raise ValueError(f"texture shape {texture.shape} does not match heightmap {hm.shape}")
    rows, cols = h // patch_px, w // patch_px
    if rows == 0 or cols == 0:
        raise ValueError(f"grid {hm.shape} smaller than one {patch_px}px patch")
    patches: list[tuple[Heightmap, Texture | None]] = []
    for r in range(rows):
        for c in range(cols):
            ys = slice(r * patch_px, (r + 1) * patch_px)
            xs = slice(c * patch_px, (c + 1) * patch_px)
            hp = Heightmap(hm.elevations[ys, xs].copy(), resolution_m=hm.resolution_m)
            tp = None
            if texture is not None:
                tp = Texture(texture.values[ys, xs].copy(), resolution_m=texture.resolution_m)
            patches.append((hp, tp))
    return patches


def upsample_texture(texture: Texture, factor: int = 2) -> Texture:
    """Bilinear align-corners upsample of an RGB texture by an integer factor."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return Texture(texture.values.copy(), resolution_m=texture.resolution_m)
    h, w = texture.shape
    out_h, out_w = h * factor, w * factor
    channels = [
        _bilinear_grid(texture.values[:, :, k].astype(np.float64), out_h, out_w)
        for k in range(3)
    ]
    out = np.clip(np.rint(np.stack(channels, axis=2)), 0, 255).astype(np.uint8)
    return Texture(out, resolution_m=texture.resolution_m / factor)


# -- normalization (model I/O ranges) ----------------------------------------------

def normalize_elevations(elevations: np.ndarray, max_elevation_m: float = DEFAULT_MAX_ELEVATION_M) -> np.ndarray:
    """Map meters [0, max] to [-1, 1]: (h / max - 0.5) * 2, computed in float64."""
    if max_elevation_m <= 0:
        raise ValueError("max_elevation_m must be positive")
    h = np.asarray(elevations, dtype=np.float64)
    return ((h / max_elevation_m - 0.5) * 2.0).astype(np.float32)


def denormalize_elevations(scaled: np.ndarray, max_elevation_m: float = DEFAULT_MAX_ELEVATION_M) -> np.ndarray:
    s = np.asarray(scaled, dtype=np.float64)
    return ((s * 0.5 + 0.5) * max_elevation_m).astype(np.float32)


def normalize_texture(values: np.ndarray) -> np.ndarray:
    """uint8 [0,255] -> float32 [-1,1] via v / 127.5 - 1."""
    v = np.asarray(values)
    if v.dtype != np.uint8:
        raise ValueError("texture normalization expects uint8 input")
    return (v.astype(np.float32) / 127.5) - 1.0


def denormalize_texture(scaled: np.ndarray) -> np.ndarray:
    v = np.rint((np.asarray(scaled, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(v, 0, 255).astype(np.uint8)


# -- corpus screening ----------------------------------------------------------------

def elevation_filter(hm: Heightmap, limit_m: float = DEFAULT_MAX_ELEVATION_M) -> bool:
    """Keep patches whose peak elevation stays within the limit (inclusive)."""
    return bool(np.max(hm.elevations) <= limit_m)


#: climate categories retained for the corpus
ACCEPTED_CLIMATES = ("tropical", "temperate", "subarctic", "polar")


@dataclass
class RegionInfo:
    """Screening metadata for one candidate region."""

    mean_elevation_m: float
    human_modification: float  # 0..1 index
    climate: str  # e.g. "temperate", "arid"
    landcover_flags: tuple[str, ...] = ()  # e.g. ("water", "cropland")
    cloud_obscured: bool = False
    source_id: str = ""


REJECT_LANDCOVER = frozenset({"cropland", "built-up", "water"})


def region_filter(info: RegionInfo) -> tuple[bool, str | None]:
    """Screen a region; returns (accepted, reason-if-rejected).

    Checks run in a fixed order so the reported reason is deterministic:
    low mean elevation, heavy human modification, unsupported climate,
    excluded land cover, cloud obstruction.
    """
    if info.mean_elevation_m < 100.0:
        return False, "mean elevation below 100 m"
    if info.human_modification >= 0.3:
        return False, "human modification index >= 0.3"
    if info.climate not in ACCEPTED_CLIMATES:
        return False, f"climate {info.climate!r} not sampled"
    flagged = REJECT_LANDCOVER.intersection(info.landcover_flags)
    if flagged:
        return False, f"landcover excluded: {sorted(flagged)[0]}"
    if info.cloud_obscured:
        return False, "cloud obscured"
    return True, None


def cap_per_category(
    items: list[tuple[str, object]], limit: int = 125
) -> list[tuple[str, object]]:
    """Keep at most ``limit`` items per category key, preserving order."""
    counts: dict[str, int] = {}
    kept = []
    for category, payload in items:
        n = counts.get(category, 0)
        if n < limit:
            kept.append((category, payload))
            counts[category] = n + 1
    return kept


# -- two-color texture summary ---------------------------------------------------------

@dataclass
class TwoColorSummary:
    """2-means quantization of a texture into dominant color pair."""

    colors: np.ndarray  # (2, 3) float32 centroids in 0..255
    counts: np.ndarray  # (2,) pixel counts
    degenerate: bool  # fewer than two distinct input colors
    labels: np.ndarray = field(repr=False, default=None)  # (H, W) uint8


def quantize_two_color(texture: Texture, max_iter: int = 20) -> TwoColorSummary:
    """Lloyd 2-means over RGB pixels, seeded by the two most distant colors.

    Distance is squared Euclidean in RGB. The most-distant pair is found
    over the distinct colors, which keeps the search exact and cheap for
    desk-scale textures. Single-color inputs are flagged degenerate.
    """
    pixels = texture.values.reshape(-1, 3).astype(np.float64)
    h, w = texture.shape
    unique = np.unique(pixels, axis=0)
    if unique.shape[0] < 2:
        color = unique[0] if unique.shape[0] else np.zeros(3)
        colors = np.stack([color, color]).astype(np.float32)
        return TwoColorSummary(
            colors=colors,
            counts=np.array([pixels.shape[0], 0]),
            degenerate=True,
            labels=np.zeros((h, w), dtype=np.uint8),
        )

    # exact farthest pair over distinct colors
    sq = np.sum(unique**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (unique @ unique.T)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    centers = np.stack([unique[i], unique[j]])

    labels = None
    for _ in range(max_iter):
        dist = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in (0, 1):
            members = pixels[labels == k]
            if members.shape[0]:
                centers[k] = members.mean(axis=0)
    counts = np.array([(labels == 0).sum(), (labels == 1).sum()])
    return TwoColorSummary(
        colors=centers.astype(np.float32),
        counts=counts,
        degenerate=False,
        labels=labels.reshape(h, w).astype(np.uint8),
    )


# -- persistence -------------------------------------------------------------------------

def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp.{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _png_bytes(image: Image.Image) -> bytes:
    import io

    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def heightmap_png_bytes(hm: Heightmap) -> bytes:
    """Encode as 16-bit grayscale PNG of integer meters (lossy below 1 m)."""
    meters = np.clip(np.rint(hm.elevations), 0, 65535).astype(np.uint16)
    return _png_bytes(Image.fromarray(meters))  # uint16 -> mode I;16


def save_heightmap_png(hm: Heightmap, path: str) -> None:
    atomic_write_bytes(path, heightmap_png_bytes(hm))


def load_heightmap_png(path: str, resolution_m: float = 30.0) -> Heightmap:
    with Image.open(path) as image:
        arr = np.array(image)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel heightmap PNG")
    return Heightmap(arr.astype(np.float32), resolution_m=resolution_m)


def texture_png_bytes(values: np.ndarray) -> bytes:
    """Encode an HxWx3 uint8 array (texture or sketch) as RGB PNG."""
    arr = np.asarray(values)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("expected HxWx3 uint8 values")
    return _png_bytes(Image.fromarray(arr, mode="RGB"))


def save_texture_png(values: np.ndarray, path: str) -> None:
    atomic_write_bytes(path, texture_png_bytes(values))


def load_texture_png(path: str, resolution_m: float = 30.0) -> Texture:
    with Image.open(path) as image:
        arr = np.array(image.convert("RGB"))
    return Texture(arr, resolution_m=resolution_m)


def save_sidecar(path: str, resolution_m: float, source_id: str, max_elevation_m: float) -> None:
    payload = {
        "resolution_m": float(resolution_m),
        "source_id": str(source_id),
        "max_elevation_m": float(max_elevation_m),
    }
    atomic_write_bytes(path, json.dumps(payload, indent=2, sort_keys=True).encode())


def load_sidecar(path: str) -> dict:
    with open(path, "rb") as fh:
        payload = json.loads(fh.read())
    for key in ("resolution_m", "source_id", "max_elevation_m"):
        if key not in payload:
            raise ValueError(f"{path}: sidecar missing {key!r}")
    return payload
