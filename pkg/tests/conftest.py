import math

import numpy as np
import pytest

from rockfrag.segmentation import Particle, ParticleSet


@pytest.fixture
def lab_sieve():
    from rockfrag.fileio import load_lab_pile_sieve

    return load_lab_pile_sieve()


def make_particle_set(diameters_mm, mm_per_pixel=1.0, unresolved_area_px=0.0):
    """Particle set with areas consistent with the stated diameters."""
    particles = tuple(
        Particle(
            area_px=math.pi * (d / mm_per_pixel / 2.0) ** 2,
            equivalent_diameter_mm=float(d),
        )
        for d in diameters_mm
    )
    return ParticleSet(particles, unresolved_area_px, mm_per_pixel)


def draw_disc_image(shape, discs, fg=170.0, bg=40.0, noise_sd=0.0, seed=0):
    """Reference rasterizer for segmentation tests: filled circles at pixel
    centers, independent of the production renderer."""
    h, w = shape
    img = np.full((h, w), bg, dtype=float)
    for cx, cy, r in discs:
        cols = np.arange(w)[None, :] + 0.5
        rows = np.arange(h)[:, None] + 0.5
        img[(cols - cx) ** 2 + (rows - cy) ** 2 <= r**2] = fg
    if noise_sd:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, noise_sd, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)
