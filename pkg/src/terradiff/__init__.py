"""terradiff: joint terrain heightmap + texture generation with latent diffusion.

The package bundles a small numpy autodiff engine, a DEM/raster pipeline,
geomorphological sketch extraction, KL image autoencoders, a fused-latent
denoising diffusion model with sketch conditioning, evaluation metrics, a
CLI driver and a local HTTP generation service.
"""
__version__ = "0.1.0"
