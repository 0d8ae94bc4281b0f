"""Synthetic rock-pile simulation with known ground truth.

Generates disc layouts whose mass-passing curve follows a prescribed Swebrec
curve, plans two-level nadir surveys with configurable frame overlap, and
renders deterministic grayscale frames — the end-to-end oracle for the
measurement pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import SizeDistribution, mass_passing_curve
from .swebrec import SwebrecParams, evaluate, invert
from .validation import check_positive

N_AGGREGATION_BINS = 26
_PLACEMENT_ATTEMPTS = 200
_MAX_WAYPOINTS = 10_000

# Rendering intensities (gray levels).  Foreground sits well above the
# background so the Otsu split is well-posed; per-particle jitter is +-15.
_BACKGROUND_LEVEL = 40.0
_PARTICLE_LEVEL = 170.0
_PARTICLE_JITTER = 15.0
_BOUNDARY_DROP = 45.0
_SCALE_BAR_LEVEL = 235.0
_PIXEL_NOISE_SD = 1.5


@dataclass(frozen=True)
class PileSpec:
    """Recipe for a synthetic pile with known size-distribution truth."""

    truth: SwebrecParams
    footprint_m: tuple[float, float]
    packing_fraction: float
    seed: int = 0
    min_diameter_mm: float = 2.0
    min_gap_mm: float = 0.0

    def __post_init__(self):
        w, d = self.footprint_m
        check_positive("footprint width", w)
        check_positive("footprint depth", d)
        if not 0.0 < self.packing_fraction <= 0.7:
            raise ValueError(
                f"packing_fraction must lie in (0, 0.7], got {self.packing_fraction!r}"
            )
        check_positive("min_diameter_mm", self.min_diameter_mm)
        if self.min_diameter_mm >= self.truth.x_max:
            raise ValueError("min_diameter_mm must be below the truth x_max")
        if self.min_gap_mm < 0:
            raise ValueError("min_gap_mm must be non-negative")


@dataclass(frozen=True)
class CameraModel:
    """Nadir camera: horizontal field of view and sensor resolution."""

    fov_deg: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"fov_deg must lie in (0, 180), got {self.fov_deg!r}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class Waypoint:
    x_m: float
    y_m: float
    altitude_m: float


@dataclass(frozen=True)
class FlightPlan:
    waypoints: tuple[Waypoint, ...]
    altitudes: tuple[float, float]
    overlap: float


@dataclass(frozen=True)
class Disc:
    x_m: float
    y_m: float
    diameter_mm: float


@dataclass(frozen=True)
class ScaleObject:
    """High-contrast calibration bar of known length lying on the ground."""

    x_m: float
    y_m: float
    length_mm: float = 60.0
    width_mm: float = 12.0


@dataclass(frozen=True)
class PileLayout:
    discs: tuple[Disc, ...]
    scale_object: ScaleObject
    footprint_m: tuple[float, float]
    truth: SwebrecParams
    seed: int
    achieved_packing_fraction: float


def ground_footprint_m(camera: CameraModel, altitude_m: float) -> float:
    """Width of the ground strip imaged from the given altitude."""
    h = check_positive("altitude_m", altitude_m)
    return 2.0 * h * math.tan(math.radians(camera.fov_deg) / 2.0)


def mm_per_pixel(camera: CameraModel, altitude_m: float) -> float:
    return 1000.0 * ground_footprint_m(camera, altitude_m) / camera.image_width


def _disc_volume(d_mm):
    return (math.pi / 6.0) * np.asarray(d_mm, dtype=float) ** 3


def _sample_quanta(spec: PileSpec, rng, target_area_mm2: float):
    """Draw equal-mass quanta by inverse-CDF sampling until the implied
    particle population would reach the target projected area."""
    truth = spec.truth
    p_floor = float(evaluate(truth, spec.min_diameter_mm))
    edges = np.geomspace(0.01 * truth.x_max, truth.x_max, N_AGGREGATION_BINS + 1)
    log_edges = np.log(edges)
    # Each quantum carries a fixed parcel of volume; a fraction of the
    # median-size particle keeps coarse-bin counts smooth without wasting
    # draws on the fine end.
    quantum_volume = float(_disc_volume(truth.x_50)) / 24.0

    bin_sizes: list[list[float]] = [[] for _ in range(N_AGGREGATION_BINS)]
    counts = np.zeros(N_AGGREGATION_BINS, dtype=np.int64)
    size_sums = np.zeros(N_AGGREGATION_BINS)
    implied_area = 0.0
    total_draws = 0
    while implied_area < target_area_mm2 and total_draws < 5_000_000:
        u = p_floor + rng.random(4096) * (1.0 - p_floor)
        sizes = invert(truth, u)
        total_draws += sizes.size
        idx = np.clip(
            np.digitize(np.log(sizes), log_edges) - 1, 0, N_AGGREGATION_BINS - 1
        )
        for b in range(N_AGGREGATION_BINS):
            sel = sizes[idx == b]
            if sel.size:
                bin_sizes[b].extend(sel.tolist())
        counts = np.array([len(b) for b in bin_sizes], dtype=np.int64)
        size_sums = np.array([sum(b) for b in bin_sizes])
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_size = np.where(counts > 0, size_sums / np.maximum(counts, 1), 1.0)
            n_particles = counts * quantum_volume / _disc_volume(mean_size)
            implied_area = float(
                np.sum(n_particles * (math.pi / 4.0) * mean_size**2)
            )
    return bin_sizes, quantum_volume


def _realize_diameters(bin_sizes, quantum_volume, rng) -> np.ndarray:
    """Aggregate same-bin quanta into particles: the particle count per bin
    follows number density = mass density / volume(d), and each particle
    takes a size quantile of its bin so the mass curve stays faithful."""
    diameters: list[float] = []
    for sizes in bin_sizes:
        if not sizes:
            continue
        sizes = np.sort(np.asarray(sizes))
        bin_volume = quantum_volume * sizes.size
        mean_volume = float(_disc_volume(sizes.mean()))
        exact = bin_volume / mean_volume
        count = int(exact) + (1 if rng.random() < exact - int(exact) else 0)
        if count <= 0:
            continue
        picks = np.minimum(
            ((np.arange(count) + 0.5) / count * sizes.size).astype(int),
            sizes.size - 1,
        )
        diameters.extend(sizes[picks].tolist())
    return np.asarray(diameters)


def _place_discs(diameters_mm, spec: PileSpec, rng):
    """Largest-first rejection placement without overlap inside the footprint."""
    width_mm = spec.footprint_m[0] * 1000.0
    depth_mm = spec.footprint_m[1] * 1000.0
    cell = spec.truth.x_max  # one cell ring always covers any pair of radii
    grid: dict[tuple[int, int], list[int]] = {}
    placed_x: list[float] = []
    placed_y: list[float] = []
    placed_r: list[float] = []

    order = np.argsort(diameters_mm)[::-1]
    gap = spec.min_gap_mm
    for i in order:
        d = float(diameters_mm[i])
        r = d / 2.0
        if 2.0 * r > min(width_mm, depth_mm):
            continue
        for _ in range(_PLACEMENT_ATTEMPTS):
            cx = r + rng.random() * (width_mm - 2.0 * r)
            cy = r + rng.random() * (depth_mm - 2.0 * r)
            gx, gy = int(cx / cell), int(cy / cell)
            neighbors = []
            for ux in (gx - 1, gx, gx + 1):
                for uy in (gy - 1, gy, gy + 1):
                    neighbors.extend(grid.get((ux, uy), ()))
            if neighbors:
                nx = np.array([placed_x[j] for j in neighbors])
                ny = np.array([placed_y[j] for j in neighbors])
                nr = np.array([placed_r[j] for j in neighbors])
                if np.any((nx - cx) ** 2 + (ny - cy) ** 2 < (nr + r + gap) ** 2):
                    continue
            index = len(placed_x)
            placed_x.append(cx)
            placed_y.append(cy)
            placed_r.append(r)
            grid.setdefault((gx, gy), []).append(index)
            break
    discs = tuple(
        Disc(x / 1000.0, y / 1000.0, 2.0 * r)
        for x, y, r in zip(placed_x, placed_y, placed_r)
    )
    placed_area = float(np.sum(math.pi * np.asarray(placed_r) ** 2)) if placed_r else 0.0
    achieved = placed_area / (width_mm * depth_mm)
    return discs, achieved


def generate_pile(spec: PileSpec) -> PileLayout:
    """Generate a pile layout whose mass-passing curve follows the truth
    parameters; deterministic for a fixed seed.

    If the footprint jams before the target packing fraction is reached,
    the achieved fraction is reported on the layout rather than raising.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x9B1E]))
    width_mm = spec.footprint_m[0] * 1000.0
    depth_mm = spec.footprint_m[1] * 1000.0
    target_area = spec.packing_fraction * width_mm * depth_mm

    bin_sizes, quantum_volume = _sample_quanta(spec, rng, target_area)
    diameters = _realize_diameters(bin_sizes, quantum_volume, rng)
    discs, achieved = _place_discs(diameters, spec, rng)

    bar = ScaleObject(
        x_m=min(0.08, spec.footprint_m[0] / 4.0),
        y_m=min(0.05, spec.footprint_m[1] / 4.0),
    )
    return PileLayout(
        discs=discs,
        scale_object=bar,
        footprint_m=spec.footprint_m,
        truth=spec.truth,
        seed=spec.seed,
        achieved_packing_fraction=achieved,
    )


def ground_truth_distribution(layout: PileLayout, grid=None) -> SizeDistribution:
    """Mass-passing curve of the placed discs (diameter-cubed weights), the
    synthetic stand-in for a physical sieve baseline."""
    if not layout.discs:
        raise ValueError("layout has no discs")
    return mass_passing_curve([d.diameter_mm for d in layout.discs], grid=grid)


def plan_flight(
    footprint_m: tuple[float, float],
    camera: CameraModel,
    overlap: float,
    altitudes: tuple[float, float],
) -> FlightPlan:
    """Two-level lawnmower survey over the pile footprint.

    Per altitude, frames are spaced by footprint_width * (1 - overlap)
    starting at the pile edge, so the last row/column of centers lands on or
    beyond the far edge and every interior point is covered with margin.
    Waypoints are ordered altitude-major (lower level first), serpentine
    within a level.
    """
    if not 0.0 <= overlap <= 0.9:
        raise ValueError(f"overlap must lie in [0, 0.9], got {overlap!r}")
    if len(altitudes) != 2:
        raise ValueError("exactly two altitude levels are required")
    width, depth = footprint_m
    check_positive("footprint width", width)
    check_positive("footprint depth", depth)

    waypoints: list[Waypoint] = []
    levels = tuple(sorted(check_positive("altitude", h) for h in altitudes))
    for altitude in levels:
        spacing = ground_footprint_m(camera, altitude) * (1.0 - overlap)
        nx = math.ceil(width / spacing) + 1
        ny = math.ceil(depth / spacing) + 1
        if len(waypoints) + nx * ny > _MAX_WAYPOINTS:
            raise ValueError(
                f"plan would exceed {_MAX_WAYPOINTS} waypoints; "
                "shrink the footprint or raise the altitude"
            )
        xs = [i * spacing for i in range(nx)]
        for j in range(ny):
            row = xs if j % 2 == 0 else xs[::-1]
            for x in row:
                waypoints.append(Waypoint(x, j * spacing, altitude))
    return FlightPlan(tuple(waypoints), levels, overlap)


def _window_mm(camera: CameraModel, waypoint: Waypoint):
    mpp = mm_per_pixel(camera, waypoint.altitude_m)
    win_w = camera.image_width * mpp
    win_h = camera.image_height * mpp
    x0 = waypoint.x_m * 1000.0 - win_w / 2.0
    y0 = waypoint.y_m * 1000.0 - win_h / 2.0
    return mpp, x0, y0, win_w, win_h


def _frame_rng(layout: PileLayout, waypoint: Waypoint, stream: int):
    entropy = [
        int(layout.seed),
        stream,
        int(round((waypoint.x_m + 1e4) * 1e4)),
        int(round((waypoint.y_m + 1e4) * 1e4)),
        int(round(waypoint.altitude_m * 1e4)),
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def render_frame(layout: PileLayout, camera: CameraModel, waypoint: Waypoint) -> np.ndarray:
    """Orthographic nadir rendering of the layout from one waypoint.

    Discs are filled circles with per-particle intensity jitter on a darker
    background; 2 px darker boundary rings appear where discs are adjacent,
    giving the watershed stage real gradients to work with.  The scale bar
    is drawn on top as a high-contrast rectangle whenever it is in view.
    Every pixel is a deterministic function of (layout, camera, waypoint).
    """
    width_m, depth_m = layout.footprint_m
    margin = ground_footprint_m(camera, waypoint.altitude_m)
    if not (-margin <= waypoint.x_m <= width_m + margin) or not (
        -margin <= waypoint.y_m <= depth_m + margin
    ):
        raise ValueError("waypoint lies unreasonably far from the pile footprint")

    mpp, x0, y0, _, _ = _window_mm(camera, waypoint)
    h_px, w_px = camera.image_height, camera.image_width
    img = np.full((h_px, w_px), _BACKGROUND_LEVEL, dtype=float)
    owner = np.full((h_px, w_px), -1, dtype=np.int32)

    jitter_rng = np.random.default_rng(np.random.SeedSequence([layout.seed, 0x11]))
    jitter = jitter_rng.uniform(-_PARTICLE_JITTER, _PARTICLE_JITTER, len(layout.discs))

    for i, disc in enumerate(layout.discs):
        r_px = disc.diameter_mm / 2.0 / mpp
        cx = (disc.x_m * 1000.0 - x0) / mpp
        cy = (disc.y_m * 1000.0 - y0) / mpp
        c0 = int(math.floor(cx - r_px - 1))
        c1 = int(math.ceil(cx + r_px + 1))
        r0 = int(math.floor(cy - r_px - 1))
        r1 = int(math.ceil(cy + r_px + 1))
        if c1 < 0 or r1 < 0 or c0 >= w_px or r0 >= h_px:
            continue
        c0, c1 = max(c0, 0), min(c1, w_px)
        r0, r1 = max(r0, 0), min(r1, h_px)
        rows = np.arange(r0, r1)[:, None] + 0.5
        cols = np.arange(c0, c1)[None, :] + 0.5
        inside = (cols - cx) ** 2 + (rows - cy) ** 2 <= r_px**2
        patch_img = img[r0:r1, c0:c1]
        patch_owner = owner[r0:r1, c0:c1]
        patch_img[inside] = _PARTICLE_LEVEL + jitter[i]
        patch_owner[inside] = i

    _darken_adjacent_boundaries(img, owner)
    _draw_scale_bar(img, layout.scale_object, mpp, x0, y0)

    noise_rng = _frame_rng(layout, waypoint, stream=0x22)
    img += noise_rng.normal(0.0, _PIXEL_NOISE_SD, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _darken_adjacent_boundaries(img: np.ndarray, owner: np.ndarray) -> None:
    """Darken foreground pixels within 2 px of a pixel owned by a different
    disc, carving an intensity valley along every contact."""
    h, w = owner.shape
    padded = np.pad(owner, 2, constant_values=-1)
    boundary = np.zeros((h, w), dtype=bool)
    shifts = [(0, 1), (1, 0), (1, 1), (1, -1), (0, 2), (2, 0)]
    for dr, dc in shifts:
        for sr, sc in ((dr, dc), (-dr, -dc)):
            neighbor = padded[2 + sr : 2 + sr + h, 2 + sc : 2 + sc + w]
            boundary |= (owner >= 0) & (neighbor >= 0) & (owner != neighbor)
    img[boundary] -= _BOUNDARY_DROP


def _draw_scale_bar(img, bar: ScaleObject, mpp, x0, y0) -> None:
    c0 = (bar.x_m * 1000.0 - x0) / mpp
    r0 = (bar.y_m * 1000.0 - y0) / mpp
    c1 = c0 + bar.length_mm / mpp
    r1 = r0 + bar.width_mm / mpp
    c0i, c1i = int(round(c0)), int(round(c1))
    r0i, r1i = int(round(r0)), int(round(r1))
    c0i, c1i = max(c0i, 0), min(c1i, img.shape[1])
    r0i, r1i = max(r0i, 0), min(r1i, img.shape[0])
    if c0i < c1i and r0i < r1i:
        img[r0i:r1i, c0i:c1i] = _SCALE_BAR_LEVEL


def scale_bar_pixel_polygon(
    layout: PileLayout, camera: CameraModel, waypoint: Waypoint, pad_px: float = 3.0
):
    """Exclusion polygon (pixel coordinates) around the scale bar in this
    frame, or None when the bar is out of view.  Used to keep the bright
    calibration bar from being delineated as a rock."""
    bar = layout.scale_object
    mpp, x0, y0, _, _ = _window_mm(camera, waypoint)
    c0 = (bar.x_m * 1000.0 - x0) / mpp - pad_px
    r0 = (bar.y_m * 1000.0 - y0) / mpp - pad_px
    c1 = c0 + bar.length_mm / mpp + 2 * pad_px
    r1 = r0 + bar.width_mm / mpp + 2 * pad_px
    if c1 < 0 or r1 < 0 or c0 > camera.image_width or r0 > camera.image_height:
        return None
    return [[c0, r0], [c1, r0], [c1, r1], [c0, r1]]
