"""Command-line pipeline driver.

Subcommands cover the whole workflow: synthetic dataset construction,
sketch extraction, VAE and diffusion training, conditional/unconditional
sampling, evaluation, and the local HTTP service. Every command reads
one JSON config (defaults deep-merged), honors --seed/--out overrides,
writes artifacts atomically, and drops a run manifest recording the
config hash so identical inputs provably produced identical outputs.

Exit codes: 0 success, 1 user error (bad flags, config, or missing
prerequisites), 2 internal error.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from glob import glob

import numpy as np

from .checkpoint import read_checkpoint
from .config import load_config, rng_stream, worker_count, write_run_manifest
from .control import ConditionRaster, conditional_sample, decode_pair, load_adapter, train_control
from .diffusion import DenoiserModel, make_schedule, strided_sample, train_joint
from .geomorph import SketchParams, extract_sketch
from .latent import LatentGrid, load_vae, train_vae, vae_encode
from .metrics import VaeFeatureExtractor, evaluate_model
from .raster import (
    load_heightmap_png,
    load_texture_png,
    normalize_elevations,
    normalize_texture,
    save_heightmap_png,
    save_texture_png,
)
from .synthterra import SynthConfig, build_synthetic_dataset, load_dataset

__all__ = ["main", "UserError"]


class UserError(Exception):
    """Operator mistake: bad invocation, bad config, missing artifact."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are code 1
        raise UserError(message)


def _require(path: str, what: str, hint: str) -> str:
    if not os.path.exists(path):
        raise UserError(f"{what} not found at {path}; {hint}")
    return path


def _artifact_path(config: dict, out: str | None, key: str) -> str:
    configured = config["paths"][key]
    if out:
        return os.path.join(out, os.path.basename(configured))
    return configured


def _synth_config(config: dict) -> SynthConfig:
    ds = config["dataset"]
    palette = ds["palette"]
    return SynthConfig(
        seed=int(config["seed"]),
        size_px=int(ds["size_px"]),
        octaves=int(ds["octaves"]),
        persistence=float(ds["persistence"]),
        elevation_scale_m=float(ds["elevation_scale_m"]),
        palette_low=tuple(palette["low"]),
        palette_high=tuple(palette["high"]),
        palette_slope=tuple(palette["slope"]),
        correlation_strength=float(ds["correlation_strength"]),
        resolution_m=float(ds["resolution_m"]),
    )


def _sketch_params(config: dict) -> SketchParams:
    sk = config["sketch"]
    return SketchParams(
        threshold_percentile=float(sk["threshold_percentile"]),
        canny_sigma=float(sk["canny_sigma"]),
        canny_low=float(sk["canny_low"]),
        canny_high=float(sk["canny_high"]),
    )


def _load_items(config: dict, with_sketches: bool = False) -> list[dict]:
    ds_dir = config["dataset"]["dir"]
    try:
        return load_dataset(ds_dir, with_sketches=with_sketches)
    except FileNotFoundError as exc:
        raise UserError(f"{exc}; run `terradiff dataset-build` first") from exc


def _encode_latents(config: dict, items: list[dict], vae_h, vae_x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-mean latents for every pair, in dataset order."""
    max_elev = float(config["vae"]["max_elevation_m"])
    z_h, z_x = [], []
    for item in items:
        heights = normalize_elevations(item["heightmap"].elevations, max_elev)
        z_h.append(vae_encode(vae_h, heights).values)
        z_x.append(vae_encode(vae_x, normalize_texture(item["texture"].values)).values)
    return (np.stack(z_h).transpose(0, 3, 1, 2),
            np.stack(z_x).transpose(0, 3, 1, 2))


def _load_both_vaes(config: dict, out: str | None):
    hint = "run `terradiff train-vae` first"
    vae_h = load_vae(_require(_artifact_path(config, out, "vae_heightmap"),
                              "heightmap VAE checkpoint", hint))
    vae_x = load_vae(_require(_artifact_path(config, out, "vae_texture"),
                              "texture VAE checkpoint", hint))
    return vae_h, vae_x


# ------------------------------------------------------------------ commands


def cmd_dataset_build(args, config: dict) -> int:
    out_dir = args.out or config["dataset"]["dir"]
    count = args.count if args.count is not None else int(config["dataset"]["count"])
    if count < 1:
        raise UserError(f"--count must be >= 1, got {count}")
    manifest = build_synthetic_dataset(
        count, _synth_config(config), out_dir,
        sketch_params=_sketch_params(config), workers=worker_count())
    write_run_manifest(out_dir, "dataset-build", config, extra={"count": count})
    print(f"wrote {manifest['count']} pairs to {out_dir}")
    return 0


def cmd_sketch_extract(args, config: dict) -> int:
    in_dir = config["dataset"]["dir"]
    out_dir = args.out or in_dir
    height_paths = sorted(glob(os.path.join(in_dir, "*_height.png")))
    if not height_paths:
        raise UserError(f"no *_height.png files in {in_dir}; "
                        "run `terradiff dataset-build` first")
    params = _sketch_params(config)
    resolution = float(config["dataset"]["resolution_m"])
    os.makedirs(out_dir, exist_ok=True)

    def one(path: str) -> str:
        hm = load_heightmap_png(path, resolution_m=resolution)
        sketch = extract_sketch(hm, params)
        name = os.path.basename(path)[: -len("_height.png")] + "_sketch.png"
        save_texture_png(sketch, os.path.join(out_dir, name))
        return name

    workers = worker_count()
    if workers > 1 and len(height_paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            names = list(pool.map(one, height_paths))
    else:
        names = [one(p) for p in height_paths]
    write_run_manifest(out_dir, "sketch-extract", config, extra={"count": len(names)})
    print(f"extracted {len(names)} sketches to {out_dir}")
    return 0


def cmd_train_vae(args, config: dict) -> int:
    items = _load_items(config)
    max_elev = float(config["vae"]["max_elevation_m"])
    heights = np.stack([
        normalize_elevations(item["heightmap"].elevations, max_elev) for item in items
    ])[:, None]
    textures = np.stack([
        normalize_texture(item["texture"].values) for item in items
    ]).transpose(0, 3, 1, 2)

    path_h = _artifact_path(config, args.out, "vae_heightmap")
    path_x = _artifact_path(config, args.out, "vae_texture")
    ck_h = train_vae(heights, config, kind="vae_heightmap", checkpoint_path=path_h)
    ck_x = train_vae(textures, config, kind="vae_texture", checkpoint_path=path_x)
    write_run_manifest(os.path.dirname(os.path.abspath(path_h)), "train-vae", config,
                       extra={"heightmap_loss": ck_h.metadata["last_loss"],
                              "texture_loss": ck_x.metadata["last_loss"]})
    print(f"heightmap VAE -> {path_h} (loss {ck_h.metadata['last_loss']:.5f})")
    print(f"texture VAE -> {path_x} (loss {ck_x.metadata['last_loss']:.5f})")
    return 0


def cmd_train_ldm(args, config: dict) -> int:
    vae_h, vae_x = _load_both_vaes(config, args.out)
    items = _load_items(config)
    z_h, z_x = _encode_latents(config, items, vae_h, vae_x)
    path = _artifact_path(config, args.out, "ldm")
    ckpt = train_joint(z_h, z_x, config, kind="ldm", checkpoint_path=path)
    write_run_manifest(os.path.dirname(os.path.abspath(path)), "train-ldm", config,
                       extra={"loss": ckpt.metadata["last_loss"]})
    print(f"joint denoiser -> {path} (loss {ckpt.metadata['last_loss']:.5f})")
    return 0


def cmd_train_control(args, config: dict) -> int:
    base_path = _require(_artifact_path(config, args.out, "ldm"),
                         "joint denoiser checkpoint", "run `terradiff train-ldm` first")
    vae_h, vae_x = _load_both_vaes(config, args.out)
    try:
        items = _load_items(config, with_sketches=True)
    except FileNotFoundError as exc:
        raise UserError(f"{exc}; run `terradiff sketch-extract` first") from exc
    z_h, z_x = _encode_latents(config, items, vae_h, vae_x)
    conds = np.stack([item["sketch"] for item in items])
    path = _artifact_path(config, args.out, "adapter")
    ckpt = train_control(z_h, z_x, conds, base_path, config, checkpoint_path=path)
    write_run_manifest(os.path.dirname(os.path.abspath(path)), "train-control", config,
                       extra={"loss": ckpt.metadata["last_loss"]})
    print(f"condition adapter -> {path} (loss {ckpt.metadata['last_loss']:.5f})")
    return 0


def cmd_sample(args, config: dict) -> int:
    count = args.count if args.count is not None else 1
    if count < 1:
        raise UserError(f"--count must be >= 1, got {count}")
    conditional = args.sketch is not None
    steps = args.steps if args.steps is not None else int(
        config["control" if conditional else "ldm"]["sample_steps"])
    if steps < 1:
        raise UserError(f"--steps must be >= 1, got {steps}")

    out_dir = args.out or os.path.join(config["out_dir"], "samples")
    seed = int(config["seed"])
    resolution = float(config["dataset"]["resolution_m"])
    max_elev = float(config["vae"]["max_elevation_m"])
    vae_h, vae_x = _load_both_vaes(config, None)
    base_path = _require(config["paths"]["ldm"], "joint denoiser checkpoint",
                         "run `terradiff train-ldm` first")
    base_ckpt = read_checkpoint(base_path)

    if conditional:
        adapter_path = _require(config["paths"]["adapter"], "condition adapter checkpoint",
                                "run `terradiff train-control` first")
        sketch = load_texture_png(args.sketch, resolution_m=resolution)
        cond = ConditionRaster(values=sketch.values, kind="sketch")
        adapter = load_adapter(adapter_path, base_ckpt)
        pairs = [
            conditional_sample(adapter.base, adapter, cond, steps=steps,
                               rng=rng_stream(seed, f"sample/{i}"),
                               vae_h=vae_h, vae_x=vae_x,
                               max_elevation_m=max_elev, resolution_m=resolution)
            for i in range(count)
        ]
    else:
        model = DenoiserModel.from_checkpoint(base_ckpt)
        sched = base_ckpt.metadata["schedule"]
        schedule = make_schedule(int(sched["timesteps"]), float(sched["beta_start"]),
                                 float(sched["beta_end"]))
        scales = base_ckpt.metadata["latent_scale"]
        size = int(config["dataset"]["size_px"])
        shape = (size // vae_h.f, size // vae_h.f, vae_h.c)
        pairs = []
        for i in range(count):
            zh, zx = strided_sample(model, schedule, shape, steps=steps,
                                    rng=rng_stream(seed, f"sample/{i}"))
            pairs.append(decode_pair(
                LatentGrid(values=zh.values / float(scales["heightmap"]),
                           provenance="heightmap"),
                LatentGrid(values=zx.values / float(scales["texture"]),
                           provenance="texture"),
                vae_h, vae_x, max_elevation_m=max_elev, resolution_m=resolution))

    os.makedirs(out_dir, exist_ok=True)
    for i, (hm, tex) in enumerate(pairs):
        save_heightmap_png(hm, os.path.join(out_dir, f"{i:06d}_height.png"))
        save_texture_png(tex.values, os.path.join(out_dir, f"{i:06d}_texture.png"))
    write_run_manifest(out_dir, "sample", config,
                       extra={"count": count, "steps": steps, "conditional": conditional})
    print(f"wrote {count} generated pairs to {out_dir}")
    return 0


def _load_pairs_from_dir(directory: str, resolution_m: float):
    height_paths = sorted(glob(os.path.join(directory, "*_height.png")))
    pairs = []
    for hp in height_paths:
        tp = hp[: -len("_height.png")] + "_texture.png"
        if not os.path.exists(tp):
            raise UserError(f"heightmap {hp} has no matching texture {tp}")
        pairs.append((load_heightmap_png(hp, resolution_m=resolution_m),
                      load_texture_png(tp, resolution_m=resolution_m)))
    if len(pairs) < 2:
        raise UserError(f"need at least two generated pairs in {directory}, "
                        f"found {len(pairs)}")
    return pairs


def cmd_evaluate(args, config: dict) -> int:
    resolution = float(config["dataset"]["resolution_m"])
    items = _load_items(config)
    reference = [(item["heightmap"], item["texture"]) for item in items]
    if args.out:
        samples = _load_pairs_from_dir(args.out, resolution)
        report_dir = args.out
    else:
        # no sample directory: sanity comparison of the reference with itself
        samples = reference
        report_dir = config["out_dir"]
    vae_x = load_vae(_require(config["paths"]["vae_texture"], "texture VAE checkpoint",
                              "run `terradiff train-vae` first"))
    extractor = VaeFeatureExtractor(vae_x)
    os.makedirs(report_dir, exist_ok=True)
    report = evaluate_model(samples, reference, extractor,
                            csv_path=os.path.join(report_dir, "correlations.csv"),
                            json_path=os.path.join(report_dir, "report.json"))
    write_run_manifest(report_dir, "evaluate", config,
                       extra={"frechet_distance": report["frechet_distance"]})
    print(f"mean correlation: samples {report['samples']['mean']:.4f}, "
          f"reference {report['reference']['mean']:.4f}")
    print(f"frechet distance: {report['frechet_distance']:.6f}")
    print(f"report -> {os.path.join(report_dir, 'report.json')}")
    return 0


def cmd_serve(args, config: dict) -> int:
    from .service import run_service  # deferred: pulls in the HTTP stack

    run_service(config)
    return 0


_COMMANDS = {
    "dataset-build": (cmd_dataset_build, "generate the synthetic paired dataset"),
    "sketch-extract": (cmd_sketch_extract, "extract geomorphology sketches from heightmaps"),
    "train-vae": (cmd_train_vae, "train the heightmap and texture autoencoders"),
    "train-ldm": (cmd_train_ldm, "train the unconditional joint denoiser"),
    "train-control": (cmd_train_control, "train the sketch-condition adapter"),
    "sample": (cmd_sample, "generate heightmap/texture pairs"),
    "evaluate": (cmd_evaluate, "score generated pairs against the reference dataset"),
    "serve": (cmd_serve, "run the local HTTP generation service"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="terradiff",
                     description="Terrain heightmap+texture generation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (func, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", metavar="PATH", default=None,
                        help="JSON config; missing keys fall back to defaults")
        sp.add_argument("--seed", type=int, default=None, metavar="N",
                        help="override the config seed")
        sp.add_argument("--out", default=None, metavar="DIR",
                        help="override the output location")
        if name in ("dataset-build", "sample"):
            sp.add_argument("--count", type=int, default=None, metavar="N",
                            help="number of items to produce")
        if name == "sample":
            sp.add_argument("--steps", type=int, default=None, metavar="N",
                            help="sampling steps (default from config)")
            sp.add_argument("--sketch", default=None, metavar="PATH",
                            help="condition on this sketch PNG")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = int(args.seed)
        return args.func(args, config)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
