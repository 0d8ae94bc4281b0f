import math

import numpy as np
import pytest

from rockfrag.distribution import characteristic_size, percent_passing_at
from rockfrag.swebrec import SwebrecParams, evaluate
from rockfrag.synthpile import (
    CameraModel,
    Disc,
    PileLayout,
    PileSpec,
    ScaleObject,
    Waypoint,
    generate_pile,
    ground_footprint_m,
    ground_truth_distribution,
    mm_per_pixel,
    plan_flight,
    render_frame,
    scale_bar_pixel_polygon,
)

TRUTH = SwebrecParams(x_max=27.53, x_50=17.84, b=2.79)
CAMERA = CameraModel(fov_deg=60.0, image_width=640, image_height=480)


def empirical_sup_norm(diameters, truth):
    """Brute-force oracle: mass-weighted empirical CDF of placed diameters
    against the analytic curve, sup over the sample points."""
    d = np.sort(np.asarray(diameters))
    weights = d**3
    emp = np.cumsum(weights) / weights.sum()
    ana = evaluate(truth, d)
    return float(np.max(np.abs(emp - ana)))


def single_disc_layout(diameter_mm, footprint=(2.0, 2.0), center=None):
    w, dpt = footprint
    cx, cy = center if center else (w / 2.0, dpt / 2.0)
    return PileLayout(
        discs=(Disc(cx, cy, diameter_mm),),
        scale_object=ScaleObject(0.05, 0.05),
        footprint_m=footprint,
        truth=TRUTH,
        seed=0,
        achieved_packing_fraction=0.0,
    )


class TestPileSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PileSpec(TRUTH, (0.0, 1.0), 0.3)
        with pytest.raises(ValueError):
            PileSpec(TRUTH, (1.0, 1.0), 0.0)
        with pytest.raises(ValueError):
            PileSpec(TRUTH, (1.0, 1.0), 0.8)
        with pytest.raises(ValueError):
            PileSpec(TRUTH, (1.0, 1.0), 0.3, min_diameter_mm=30.0)


class TestGeneratePile:
    def test_deterministic_for_seed(self):
        spec = PileSpec(TRUTH, (0.8, 0.8), 0.3, seed=42)
        a = generate_pile(spec)
        b = generate_pile(spec)
        assert a.discs == b.discs
        assert a.achieved_packing_fraction == b.achieved_packing_fraction

    def test_different_seeds_differ(self):
        a = generate_pile(PileSpec(TRUTH, (0.8, 0.8), 0.3, seed=1))
        b = generate_pile(PileSpec(TRUTH, (0.8, 0.8), 0.3, seed=2))
        assert a.discs != b.discs

    def test_discs_inside_footprint_and_disjoint(self):
        layout = generate_pile(PileSpec(TRUTH, (0.6, 0.6), 0.35, seed=3))
        xs = np.array([d.x_m for d in layout.discs])
        ys = np.array([d.y_m for d in layout.discs])
        rs = np.array([d.diameter_mm for d in layout.discs]) / 2000.0
        assert np.all(xs - rs >= -1e-9) and np.all(xs + rs <= 0.6 + 1e-9)
        assert np.all(ys - rs >= -1e-9) and np.all(ys + rs <= 0.6 + 1e-9)
        # pairwise non-overlap, brute force on a subsample cross the whole set
        order = np.argsort(rs)[::-1][:200]
        for i in order:
            dx = xs - xs[i]
            dy = ys - ys[i]
            dist2 = dx * dx + dy * dy
            min_sep = (rs + rs[i]) ** 2
            overlap = dist2 < min_sep - 1e-12
            overlap[i] = False
            assert not overlap.any()

    def test_mass_curve_matches_truth(self):
        layout = generate_pile(PileSpec(TRUTH, (2.0, 2.0), 0.4, seed=5))
        diameters = [d.diameter_mm for d in layout.discs]
        assert len(diameters) >= 5000
        assert empirical_sup_norm(diameters, TRUTH) <= 0.02

    def test_mass_median_matches_x50(self):
        layout = generate_pile(PileSpec(TRUTH, (2.0, 2.0), 0.4, seed=6))
        dist = ground_truth_distribution(layout)
        assert len(layout.discs) >= 5000
        assert characteristic_size(dist, 0.5) == pytest.approx(17.84, rel=0.03)

    def test_achieved_fraction_reported(self):
        layout = generate_pile(PileSpec(TRUTH, (0.8, 0.8), 0.35, seed=7))
        assert 0.0 < layout.achieved_packing_fraction <= 0.7
        assert layout.achieved_packing_fraction == pytest.approx(0.35, abs=0.08)

    def test_min_diameter_respected(self):
        layout = generate_pile(
            PileSpec(TRUTH, (0.5, 0.5), 0.25, seed=8, min_diameter_mm=6.0)
        )
        assert min(d.diameter_mm for d in layout.discs) >= 6.0

    def test_min_gap_respected(self):
        layout = generate_pile(
            PileSpec(TRUTH, (0.4, 0.4), 0.15, seed=9, min_diameter_mm=10.0,
                     min_gap_mm=4.0)
        )
        xs = np.array([d.x_m for d in layout.discs]) * 1000.0
        ys = np.array([d.y_m for d in layout.discs]) * 1000.0
        rs = np.array([d.diameter_mm for d in layout.discs]) / 2.0
        for i in range(len(xs)):
            dx = xs - xs[i]
            dy = ys - ys[i]
            sep = np.sqrt(dx * dx + dy * dy) - (rs + rs[i])
            sep[i] = np.inf
            assert sep.min() >= 4.0 - 1e-9


class TestGroundTruthDistribution:
    def test_single_disc_step(self):
        dist = ground_truth_distribution(single_disc_layout(10.0))
        below = dist.sizes_mm[dist.sizes_mm < 10.0]
        assert all(percent_passing_at(dist, s) == 0.0 for s in below)
        assert percent_passing_at(dist, 10.0) == 1.0

    def test_two_disc_weighting(self):
        layout = PileLayout(
            discs=(Disc(0.5, 0.5, 10.0), Disc(1.5, 1.5, 20.0)),
            scale_object=ScaleObject(0.05, 0.05),
            footprint_m=(2.0, 2.0),
            truth=TRUTH,
            seed=0,
            achieved_packing_fraction=0.0,
        )
        dist = ground_truth_distribution(layout, grid=[10.0, 15.0, 20.0])
        assert percent_passing_at(dist, 15.0) == pytest.approx(1.0 / 9.0)

    def test_empty_layout_rejected(self):
        layout = single_disc_layout(10.0)
        empty = PileLayout((), layout.scale_object, layout.footprint_m, TRUTH, 0, 0.0)
        with pytest.raises(ValueError):
            ground_truth_distribution(empty)


class TestPlanFlight:
    def test_footprint_and_spacing_geometry(self):
        # 2 h tan(fov/2) at h = 2 m, fov 60 deg
        width = ground_footprint_m(CAMERA, 2.0)
        assert width == pytest.approx(2.309, abs=1e-3)
        plan = plan_flight((2.0, 2.0), CAMERA, 0.5, (2.0, 4.0))
        low = [wp for wp in plan.waypoints if wp.altitude_m == 2.0]
        xs = sorted({wp.x_m for wp in low})
        assert xs[1] - xs[0] == pytest.approx(1.155, abs=1e-3)

    def test_zero_overlap_spacing_equals_footprint(self):
        plan = plan_flight((2.0, 2.0), CAMERA, 0.0, (2.0, 4.0))
        low = [wp for wp in plan.waypoints if wp.altitude_m == 2.0]
        xs = sorted({wp.x_m for wp in low})
        assert xs[1] - xs[0] == pytest.approx(2.309, abs=1e-3)

    def test_three_by_three_grid(self):
        plan = plan_flight((2.0, 2.0), CAMERA, 0.5, (2.0, 8.0))
        low = [wp for wp in plan.waypoints if wp.altitude_m == 2.0]
        assert len(low) == 9
        assert len({wp.x_m for wp in low}) == 3
        assert len({wp.y_m for wp in low}) == 3

    def test_waypoint_spacing_invariant(self):
        plan = plan_flight((1.7, 0.9), CAMERA, 0.4, (1.0, 2.0))
        for altitude in plan.altitudes:
            level = [wp for wp in plan.waypoints if wp.altitude_m == altitude]
            limit = ground_footprint_m(CAMERA, altitude) * (1.0 - plan.overlap)
            for a, b in zip(level, level[1:]):
                step = math.hypot(b.x_m - a.x_m, b.y_m - a.y_m)
                assert step <= limit + 1e-9

    def test_altitude_major_ordering(self):
        plan = plan_flight((1.0, 1.0), CAMERA, 0.5, (2.0, 1.0))
        assert plan.altitudes == (1.0, 2.0)
        alts = [wp.altitude_m for wp in plan.waypoints]
        switch = alts.index(2.0)
        assert all(a == 1.0 for a in alts[:switch])
        assert all(a == 2.0 for a in alts[switch:])

    def test_waypoint_guard(self):
        with pytest.raises(ValueError, match="waypoints"):
            plan_flight((500.0, 500.0), CAMERA, 0.9, (0.5, 0.6))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            plan_flight((1.0, 1.0), CAMERA, 0.95, (1.0, 2.0))
        with pytest.raises(ValueError):
            plan_flight((1.0, 1.0), CAMERA, 0.5, (1.0,))
        with pytest.raises(ValueError):
            plan_flight((1.0, 1.0), CAMERA, 0.5, (0.0, 2.0))


class TestRenderFrame:
    def test_deterministic(self):
        layout = generate_pile(PileSpec(TRUTH, (0.5, 0.5), 0.3, seed=4))
        wp = Waypoint(0.25, 0.25, 1.0)
        a = render_frame(layout, CAMERA, wp)
        b = render_frame(layout, CAMERA, wp)
        assert np.array_equal(a, b)

    def test_empty_layout_background_and_bar_only(self):
        layout = PileLayout(
            discs=(),
            scale_object=ScaleObject(0.25, 0.25),
            footprint_m=(0.5, 0.5),
            truth=TRUTH,
            seed=0,
            achieved_packing_fraction=0.0,
        )
        img = render_frame(layout, CAMERA, Waypoint(0.25, 0.25, 0.8))
        bright = img > 120
        polygon = scale_bar_pixel_polygon(layout, CAMERA, Waypoint(0.25, 0.25, 0.8))
        assert polygon is not None
        xs = [p[0] for p in polygon]
        ys = [p[1] for p in polygon]
        cols, rows = np.where(bright)[1], np.where(bright)[0]
        assert cols.min() >= min(xs) and cols.max() <= max(xs)
        assert rows.min() >= min(ys) and rows.max() <= max(ys)

    def test_disc_pixel_diameter(self):
        # choose altitude so mm_per_pixel = 0.5: 1000 * 2h tan30 / 640 = 0.5
        h = 0.5 * 640 / (1000.0 * 2.0 * math.tan(math.radians(30.0)))
        layout = single_disc_layout(40.0, footprint=(2.0, 2.0))
        wp = Waypoint(1.0, 1.0, h)
        assert mm_per_pixel(CAMERA, h) == pytest.approx(0.5, rel=1e-12)
        img = render_frame(layout, CAMERA, wp)
        area = int((img > 100).sum())
        d_px = 2.0 * math.sqrt(area / math.pi)
        assert d_px == pytest.approx(80.0, abs=1.0)

    def test_altitude_ratio_scales_pixel_diameter(self):
        layout = single_disc_layout(40.0)
        lo = render_frame(layout, CAMERA, Waypoint(1.0, 1.0, 0.8))
        hi = render_frame(layout, CAMERA, Waypoint(1.0, 1.0, 1.6))
        d_lo = 2.0 * math.sqrt(int((lo > 100).sum()) / math.pi)
        d_hi = 2.0 * math.sqrt(int((hi > 100).sum()) / math.pi)
        assert d_lo / 2.0 == pytest.approx(d_hi, abs=1.0)

    def test_projection_consistency(self):
        # rendered pixel area x (mm per px)^2 within 5% of analytic disc area
        layout = single_disc_layout(30.0)
        for h in (0.6, 1.0):
            img = render_frame(layout, CAMERA, Waypoint(1.0, 1.0, h))
            mpp = mm_per_pixel(CAMERA, h)
            if 30.0 / 2.0 / mpp < 8.0:
                continue
            area_mm2 = int((img > 100).sum()) * mpp**2
            assert area_mm2 == pytest.approx(math.pi * 15.0**2, rel=0.05)

    def test_waypoint_sanity_guard(self):
        layout = single_disc_layout(40.0)
        with pytest.raises(ValueError):
            render_frame(layout, CAMERA, Waypoint(50.0, 50.0, 1.0))

    def test_scale_bar_polygon_out_of_view(self):
        layout = single_disc_layout(40.0, footprint=(4.0, 4.0))
        assert scale_bar_pixel_polygon(layout, CAMERA, Waypoint(3.5, 3.5, 0.5)) is None

    def test_adjacent_discs_have_darker_boundary(self):
        layout = PileLayout(
            discs=(Disc(0.99, 1.0, 40.0), Disc(1.031, 1.0, 40.0)),
            scale_object=ScaleObject(0.05, 0.05),
            footprint_m=(2.0, 2.0),
            truth=TRUTH,
            seed=0,
            achieved_packing_fraction=0.0,
        )
        h = 0.5 * 640 / (1000.0 * 2.0 * math.tan(math.radians(30.0)))
        img = render_frame(layout, CAMERA, Waypoint(1.0, 1.0, h)).astype(float)
        # midline between the discs must dip below the disc interiors
        mid_col = img.shape[1] // 2 + round((1.0105 - 1.0) * 1000 / 0.5) - 1
        contact = img[235:245, mid_col - 2 : mid_col + 3].mean()
        interior = img[235:245, mid_col - 30 : mid_col - 20].mean()
        assert contact < interior - 20.0


class TestCoverage:
    def test_fifty_percent_overlap_double_coverage(self):
        footprint = (1.2, 0.8)
        plan = plan_flight(footprint, CAMERA, 0.5, (1.0, 2.0))
        step = 0.01
        eps = 1e-9
        gx = np.arange(step, footprint[0] - step / 2, step)
        gy = np.arange(step, footprint[1] - step / 2, step)
        for altitude in plan.altitudes:
            level = [wp for wp in plan.waypoints if wp.altitude_m == altitude]
            half_w = ground_footprint_m(CAMERA, altitude) / 2.0
            half_h = half_w * CAMERA.image_height / CAMERA.image_width
            counts = np.zeros((gy.size, gx.size), dtype=int)
            for wp in level:
                in_x = np.abs(gx - wp.x_m) <= half_w + eps
                in_y = np.abs(gy - wp.y_m) <= half_h + eps
                counts += in_y[:, None] & in_x[None, :]
            assert counts.min() >= 2
