"""File formats: sieve CSV, PGM/PNG images, exclusion polygons, flight-plan
CSV and layout JSON."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .distribution import SieveAnalysis, SieveRecord
from .swebrec import SwebrecParams
from .synthpile import Disc, FlightPlan, PileLayout, ScaleObject, Waypoint
from .validation import as_gray_image

SIEVE_HEADER = ("mesh_mm", "mass_kg")
FINES_TOKEN = "FINES"


def read_sieve_csv(path) -> SieveAnalysis:
    """Read a sieve analysis.

    Format: header ``mesh_mm,mass_kg``; one row per tray in ascending mesh
    order; the fines pan row uses the literal token ``FINES`` in the mesh
    column.  Parse errors carry the offending line number.
    """
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if lineno == 1:
                if tuple(cell.strip() for cell in row) != SIEVE_HEADER:
                    raise ValueError(
                        f"{path}:{lineno}: expected header "
                        f"'{','.join(SIEVE_HEADER)}', got {','.join(row)!r}"
                    )
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            mesh_cell, mass_cell = (cell.strip() for cell in row)
            try:
                mass = float(mass_cell)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad mass value {mass_cell!r}") from None
            if mesh_cell.upper() == FINES_TOKEN:
                mesh = None
            else:
                try:
                    mesh = float(mesh_cell)
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: bad mesh value {mesh_cell!r} "
                        f"(use {FINES_TOKEN} for the pan)"
                    ) from None
            try:
                records.append(SieveRecord(mesh, mass))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise ValueError(f"{path}: no sieve records found")
    try:
        return SieveAnalysis.from_records(records)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_sieve_csv(path, analysis: SieveAnalysis) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SIEVE_HEADER)
        for record in analysis.records:
            mesh = FINES_TOKEN if record.is_fines else f"{record.mesh_mm:g}"
            writer.writerow([mesh, f"{record.mass_kg:g}"])


def load_lab_pile_sieve() -> SieveAnalysis:
    """The bundled sieve analysis of the laboratory gravel-and-sand pile."""
    ref = resources.files("rockfrag.data").joinpath("lab_pile_sieve.csv")
    with resources.as_file(ref) as path:
        return read_sieve_csv(path)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM image."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise ValueError(f"{path}: malformed PGM header") from None
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise ValueError(f"{path}: truncated PGM pixel data")
    return pixels.reshape(height, width).copy()


def write_pgm(path, image) -> None:
    img = as_gray_image(image)
    height, width = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_image(path) -> np.ndarray:
    """Read a grayscale image; PGM natively, anything else via Pillow."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"))


def write_image(path, image) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(path, image)
        return
    from PIL import Image

    Image.fromarray(as_gray_image(image), mode="L").save(path)


def read_polygons_json(path) -> list[list[list[float]]]:
    """Exclusion polygons: a JSON list of point arrays [[x, y], ...]."""
    with Path(path).open() as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON list of polygons")
    for poly in data:
        if not isinstance(poly, list) or len(poly) < 3:
            raise ValueError(f"{path}: each polygon needs at least 3 points")
        for pt in poly:
            if not (isinstance(pt, list) and len(pt) == 2):
                raise ValueError(f"{path}: polygon points must be [x, y] pairs")
    return data


def write_plan_csv(path, plan: FlightPlan) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "alt_m"])
        for wp in plan.waypoints:
            writer.writerow([f"{wp.x_m:.6f}", f"{wp.y_m:.6f}", f"{wp.altitude_m:.6f}"])


def read_plan_csv(path) -> list[Waypoint]:
    path = Path(path)
    waypoints = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != ["x_m", "y_m", "alt_m"]:
                    raise ValueError(f"{path}:{lineno}: expected header x_m,y_m,alt_m")
                continue
            if not row:
                continue
            try:
                x, y, alt = (float(c) for c in row)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad waypoint row {row!r}") from None
            waypoints.append(Waypoint(x, y, alt))
    return waypoints


def layout_to_dict(layout: PileLayout) -> dict:
    return {
        "schema": 1,
        "kind": "pile-layout",
        "footprint_m": list(layout.footprint_m),
        "truth": {
            "x_max": layout.truth.x_max,
            "x_50": layout.truth.x_50,
            "b": layout.truth.b,
        },
        "seed": layout.seed,
        "achieved_packing_fraction": layout.achieved_packing_fraction,
        "scale_object": {
            "x_m": layout.scale_object.x_m,
            "y_m": layout.scale_object.y_m,
            "length_mm": layout.scale_object.length_mm,
            "width_mm": layout.scale_object.width_mm,
        },
        "discs": [
            {"x_m": d.x_m, "y_m": d.y_m, "diameter_mm": d.diameter_mm}
            for d in layout.discs
        ],
    }


def write_layout_json(path, layout: PileLayout) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout), indent=1, sort_keys=True))


def read_layout_json(path) -> PileLayout:
    with Path(path).open() as fh:
        data = json.load(fh)
    try:
        truth = SwebrecParams(**data["truth"])
        bar = ScaleObject(**data["scale_object"])
        discs = tuple(Disc(**d) for d in data["discs"])
        return PileLayout(
            discs=discs,
            scale_object=bar,
            footprint_m=tuple(data["footprint_m"]),
            truth=truth,
            seed=int(data["seed"]),
            achieved_packing_fraction=float(data["achieved_packing_fraction"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed layout JSON ({exc})") from None


def write_json_report(path, report: dict) -> None:
    """Reports are serialized deterministically: sorted keys, fixed float
    formatting via repr, no timestamps."""
    Path(path).write_text(json.dumps(report, indent=1, sort_keys=True))


def read_json_report(path) -> dict:
    with Path(path).open() as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data
