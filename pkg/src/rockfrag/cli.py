"""Command-line surface: fit, analyze, mission and compare.

Exit codes: 0 success, 1 input error (bad files, flags or config),
2 analysis failure (non-convergent fit, no usable frames).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, mission, svgplot, swebrec, synthpile
from .config import Config, load_config
from .distribution import (
    characteristic_size,
    percent_difference,
    sieve_to_distribution,
    SizeDistribution,
)
from .segmentation import calibrate_from_altitude, calibrate_scale, quality_score
from .svgplot import Series
from .validation import AnalysisError

CONFIG_ENV_VAR = "ROCKFRAG_CONFIG"

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_ANALYSIS_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # Usage problems are input errors (exit 1), not analysis failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT_ERROR)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for f in dataclasses.fields(Config):
        flag = "--" + f.name.replace("_", "-")
        ftype = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
        if ftype == "bool":
            group.add_argument(flag, default=None, action=argparse.BooleanOptionalAction)
        elif ftype == "int":
            group.add_argument(flag, default=None, type=int)
        elif ftype == "float":
            group.add_argument(flag, default=None, type=float)
        elif ftype.startswith("tuple"):
            group.add_argument(flag, default=None, type=float, nargs=2)
        else:
            group.add_argument(flag, default=None, type=str)


def _resolve_config(args) -> Config:
    config = Config()
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if path:
        config = load_config(path)
    for f in dataclasses.fields(Config):
        value = getattr(args, f.name, None)
        if value is not None:
            if isinstance(value, list):
                value = tuple(value)
            setattr(config, f.name, value)
    return config.validate()


def _resolve_calibration(args, config: Config, image_width: int):
    if args.mm_per_pixel is not None:
        return calibrate_scale(1.0, args.mm_per_pixel)
    if args.scale_object_px is not None:
        return calibrate_scale(args.scale_object_px, config.scale_object_mm)
    if args.altitude is not None:
        return calibrate_from_altitude(args.altitude, config.fov_deg, image_width)
    raise ValueError(
        "calibration missing: pass --mm-per-pixel, --scale-object-px or --altitude"
    )


def _distribution_series(dist: SizeDistribution, label: str, **kwargs) -> Series:
    return Series(label, dist.sizes_mm.tolist(), (100.0 * dist.passing).tolist(), **kwargs)


def _write_report(out_dir: Path, name: str, report: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    fileio.write_json_report(path, report)
    return path


def cmd_fit(args) -> int:
    analysis = fileio.read_sieve_csv(args.sieve_csv)
    dist = sieve_to_distribution(analysis)
    keep = dist.passing > 0.0
    result = swebrec.fit(dist.sizes_mm[keep], dist.passing[keep])
    params = result.params
    print(f"x_max = {params.x_max:.4f} mm")
    print(f"x_50  = {params.x_50:.4f} mm")
    print(f"b     = {params.b:.4f}")
    print(f"residual_rms = {result.residual_rms:.6f} (passing fraction)")
    print(f"iterations = {result.iterations}  converged = {result.converged}")

    report = {
        "schema": 1,
        "kind": "fit",
        "params": {"x_max": params.x_max, "x_50": params.x_50, "b": params.b},
        "residual_rms": result.residual_rms,
        "iterations": result.iterations,
        "converged": result.converged,
        "points": {"sizes": dist.sizes_mm.tolist(), "passing": dist.passing.tolist()},
    }
    if args.json:
        fileio.write_json_report(args.json, report)
    if args.svg:
        grid = np.geomspace(dist.sizes_mm[0] * 0.5, params.x_max, 200)
        curve = 100.0 * swebrec.evaluate(params, grid)
        svgplot.save_plot(
            args.svg,
            [
                Series("fitted curve", grid.tolist(), curve.tolist()),
                Series("sieve data", dist.sizes_mm.tolist(),
                       (100.0 * dist.passing).tolist(), markers=True, dashed=True),
            ],
            title="Size distribution and fitted curve",
            xlabel="size (mm)",
            ylabel="passing (%)",
            logx=True,
        )
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_ANALYSIS_ERROR
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _resolve_config(args)
    if not args.images:
        raise ValueError("no images given")
    polygons = fileio.read_polygons_json(args.polygons) if args.polygons else []
    segmenter = config.segmenter()

    frames = []
    distributions = []
    sizes_list = []
    particle_sets = []
    for index, path in enumerate(args.images):
        image = fileio.read_image(path)
        calibration = _resolve_calibration(args, config, image.shape[1])
        mask = None
        if polygons:
            from .segmentation import mask_non_rock

            mask = mask_non_rock(image, polygons)
        particles = segmenter.segment(image, calibration, mask=mask)
        quality = quality_score(image).sharpness
        entry = {
            "frame_id": index,
            "path": str(path),
            "quality": quality,
            "n_particles": len(particles),
        }
        if len(particles) == 0:
            entry["warning"] = particles.warning or "no particles found"
            frames.append(entry)
            continue
        dist = segmenter.distribution(particles)
        char = mission.frame_characteristic_sizes(dist)
        entry["sizes"] = {"p80": char.p80, "p50": char.p50, "p20": char.p20}
        frames.append(entry)
        distributions.append(dist)
        sizes_list.append(char)
        particle_sets.append(particles)

    if not particle_sets:
        raise AnalysisError("no image produced any particles")
    from .distribution import pool_distributions

    pooled = pool_distributions(particle_sets)
    pooled_sizes = mission.frame_characteristic_sizes(pooled)
    report = {
        "schema": 1,
        "kind": "analyze",
        "frames": frames,
        "pooled": {
            "sizes": pooled.sizes_mm.tolist(),
            "passing": pooled.passing.tolist(),
            "characteristic": {
                "p80": pooled_sizes.p80,
                "p50": pooled_sizes.p50,
                "p20": pooled_sizes.p20,
            },
        },
    }
    series = [_distribution_series(pooled, "pooled")]
    if args.reference:
        reference = sieve_to_distribution(fileio.read_sieve_csv(args.reference))
        report.update(mission.error_sections(distributions, sizes_list, reference))
        series.append(_distribution_series(reference, "reference", dashed=True, markers=True))

    out_dir = Path(args.out or config.out_dir)
    path = _write_report(out_dir, "analyze_report.json", report)
    svgplot.save_plot(
        out_dir / "distribution.svg",
        series,
        title="Pooled size distribution",
        xlabel="size (mm)",
        ylabel="passing (%)",
        logx=True,
    )
    if args.reference:
        _write_error_svg(out_dir, report)
    print(f"analyzed {len(args.images)} image(s); report: {path}")
    return EXIT_OK


def _write_error_svg(out_dir: Path, report: dict) -> None:
    log_size = report["errors"]["log_size"]
    frames_axis = list(range(1, len(log_size["p80"]["per_frame"]) + 1))
    svgplot.save_plot(
        out_dir / "log_error_vs_frame.svg",
        [
            Series(f"{t} running avg", frames_axis, log_size[t]["prefix_average"])
            for t in ("p80", "p50", "p20")
        ],
        title="Characteristic-size log error vs frames used",
        xlabel="frames used",
        ylabel="percent log error",
    )


def cmd_mission(args) -> int:
    config = _resolve_config(args)
    runner = mission.MissionRunner(config.segmenter(), config.stopping_config())
    out_dir = Path(args.out or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reference = None

    if args.stream:
        stream_dir = Path(args.stream)
        paths = sorted(
            p for p in stream_dir.iterdir()
            if p.suffix.lower() in (".pgm", ".png") and p.is_file()
        )
        if not paths:
            raise ValueError(f"stream directory {stream_dir} holds no .pgm/.png images")
        if args.reference:
            reference = sieve_to_distribution(fileio.read_sieve_csv(args.reference))
        for path in paths:
            image = fileio.read_image(path)
            calibration = _resolve_calibration(args, config, image.shape[1])
            runner.ingest(image, calibration)
            if runner.should_stop():
                break
    else:
        truth = swebrec.SwebrecParams(*args.truth)
        spec = synthpile.PileSpec(
            truth=truth,
            footprint_m=tuple(args.footprint),
            packing_fraction=config.packing_fraction,
            seed=config.seed,
            min_diameter_mm=config.min_diameter_mm,
        )
        layout = synthpile.generate_pile(spec)
        camera = config.camera()
        plan = synthpile.plan_flight(
            spec.footprint_m, camera, config.overlap, tuple(config.altitudes)
        )
        fileio.write_layout_json(out_dir / "layout.json", layout)
        fileio.write_plan_csv(out_dir / "plan.csv", plan)
        reference = synthpile.ground_truth_distribution(layout)
        frames_dir = out_dir / "frames"
        if args.save_frames:
            frames_dir.mkdir(exist_ok=True)
        for index, waypoint in enumerate(plan.waypoints):
            image = synthpile.render_frame(layout, camera, waypoint)
            if args.save_frames:
                fileio.write_pgm(frames_dir / f"frame_{index:03d}.pgm", image)
            calibration = calibrate_from_altitude(
                waypoint.altitude_m, camera.fov_deg, camera.image_width
            )
            polygon = synthpile.scale_bar_pixel_polygon(layout, camera, waypoint)
            mask = None
            if polygon is not None:
                from .segmentation import mask_non_rock

                mask = mask_non_rock(image, [polygon])
            runner.ingest(image, calibration, mask=mask)
            if runner.should_stop():
                break

    report = runner.report(reference=reference)
    path = _write_report(out_dir, "mission_report.json", report)
    _write_mission_svgs(out_dir, report)
    decision = report["stop"]["decision"]
    accepted = sum(1 for f in report["frames"] if f["accepted"])
    print(
        f"mission {decision}: {accepted} accepted / {len(report['frames'])} frames, "
        f"required = {report['stop']['required']}; report: {path}"
    )
    return EXIT_OK


def _write_mission_svgs(out_dir: Path, report: dict) -> None:
    pooled = report["pooled"]
    series = [Series("pooled", pooled["sizes"], [100.0 * p for p in pooled["passing"]])]
    if "reference" in report:
        ref = report["reference"]
        series.append(
            Series("reference", ref["sizes"], [100.0 * p for p in ref["passing"]],
                   dashed=True)
        )
    svgplot.save_plot(
        out_dir / "distribution.svg",
        series,
        title="Pooled size distribution",
        xlabel="size (mm)",
        ylabel="passing (%)",
        logx=True,
    )
    history = report["stop"]["required_history"]
    if history:
        axis = list(range(1, len(history) + 1))
        svgplot.save_plot(
            out_dir / "required_vs_frame.svg",
            [
                Series("required images", axis, history, markers=True),
                Series("accepted frames", axis, axis, dashed=True),
            ],
            title="Required images vs accepted frames",
            xlabel="accepted frames",
            ylabel="images",
        )
    if "errors" in report:
        _write_error_svg(out_dir, report)


def cmd_compare(args) -> int:
    report_a = fileio.read_json_report(args.report_a)
    report_b = fileio.read_json_report(args.report_b)
    curves = []
    for name, report in (("A", report_a), ("B", report_b)):
        pooled = report.get("pooled")
        if not pooled or "sizes" not in pooled or "passing" not in pooled:
            raise ValueError(f"report {name} has no pooled distribution section")
        curves.append(SizeDistribution(pooled["sizes"], pooled["passing"]))
    manual, automated = curves
    lo = max(manual.sizes_mm[0], automated.sizes_mm[0])
    hi = min(manual.sizes_mm[-1], automated.sizes_mm[-1])
    if lo > hi:
        raise ValueError("the pooled distributions share no common size range")
    grid = sorted(
        {float(s) for s in list(manual.sizes_mm) + list(automated.sizes_mm) if lo <= s <= hi}
    )
    differences = percent_difference(manual, automated, grid)
    print(f"{'size_mm':>10}  {'difference_%':>12}")
    for size, diff in zip(grid, differences):
        text = "undefined" if diff is None else f"{diff:12.4f}"
        print(f"{size:10.4f}  {text}")
    if args.json:
        fileio.write_json_report(
            args.json,
            {
                "schema": 1,
                "kind": "compare",
                "sizes": grid,
                "percent_difference": differences,
            },
        )
    if args.svg:
        svgplot.save_plot(
            args.svg,
            [Series("percent difference", grid,
                    [d for d in differences], markers=True)],
            title="Percent difference between methods",
            xlabel="size (mm)",
            ylabel="difference (%)",
            logx=True,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rockfrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the size-distribution curve to a sieve CSV")
    p_fit.add_argument("sieve_csv")
    p_fit.add_argument("--json", help="write a fit report JSON here")
    p_fit.add_argument("--svg", help="write a data+curve SVG here")
    p_fit.set_defaults(func=cmd_fit)

    p_an = sub.add_parser("analyze", help="batch-analyze pile images")
    p_an.add_argument("images", nargs="+")
    p_an.add_argument("--reference", help="sieve CSV used as the accuracy baseline")
    p_an.add_argument("--mm-per-pixel", type=float, default=None)
    p_an.add_argument("--scale-object-px", type=float, default=None,
                      help="length of the scale object in pixels")
    p_an.add_argument("--altitude", type=float, default=None,
                      help="camera altitude in m (uses the configured fov)")
    p_an.add_argument("--polygons", help="JSON file with exclusion polygons")
    p_an.add_argument("--out", help="output directory")
    p_an.add_argument("--config")
    _add_config_flags(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_mi = sub.add_parser("mission", help="run a streaming survey mission")
    source = p_mi.add_mutually_exclusive_group(required=True)
    source.add_argument("--stream", help="directory of frames, consumed in name order")
    source.add_argument("--truth", nargs=3, type=float, metavar=("X_MAX", "X_50", "B"),
                        help="simulate a pile with this ground-truth curve")
    p_mi.add_argument("--footprint", nargs=2, type=float, default=[1.6, 0.4],
                      metavar=("W_M", "D_M"))
    p_mi.add_argument("--reference", help="sieve CSV baseline (stream mode)")
    p_mi.add_argument("--mm-per-pixel", type=float, default=None)
    p_mi.add_argument("--scale-object-px", type=float, default=None)
    p_mi.add_argument("--altitude", type=float, default=None)
    p_mi.add_argument("--save-frames", action="store_true")
    p_mi.add_argument("--out", help="output directory")
    p_mi.add_argument("--config")
    _add_config_flags(p_mi)
    p_mi.set_defaults(func=cmd_mission)

    p_cmp = sub.add_parser("compare", help="percent difference between two reports")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.add_argument("--json", help="write the difference table as JSON")
    p_cmp.add_argument("--svg", help="write a difference-vs-size SVG")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as exc:
        print(f"analysis failure: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS_ERROR
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
