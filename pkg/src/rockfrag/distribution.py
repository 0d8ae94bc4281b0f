"""Particle size distributions: sieve curves, interpolation, characteristic sizes
and the accuracy metrics used to compare size-measurement methods.

Percent passing is stored internally as a fraction in [0, 1]; values are
formatted as percent only at I/O boundaries.  Interpolation between tabulated
points is log-linear in size (linear in passing), matching the usual
log-axis plotting convention for sieve curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .validation import check_positive

if TYPE_CHECKING:
    from .segmentation import ParticleSet

# Mesh sizes of the bundled laboratory sieve analysis; also anchor points of
# the default tabulation grid so image-derived curves can be compared against
# the sieve baseline without extra interpolation error.
LAB_SIEVE_MESHES_MM = (4.0, 9.53, 12.7, 19.05)


@dataclass(frozen=True)
class SieveRecord:
    """One sieve tray: mesh size in mm and retained mass in kg.

    ``mesh_mm`` is ``None`` for the fines pan at the bottom of the stack.
    """

    mesh_mm: float | None
    mass_kg: float

    def __post_init__(self):
        if self.mesh_mm is not None:
            check_positive("mesh_mm", self.mesh_mm)
        if not math.isfinite(self.mass_kg) or self.mass_kg < 0:
            raise ValueError(f"mass_kg must be non-negative, got {self.mass_kg!r}")

    @property
    def is_fines(self) -> bool:
        return self.mesh_mm is None


@dataclass(frozen=True)
class SieveAnalysis:
    """Ordered sieve records plus the total sample mass.

    Records must be in strictly increasing mesh order with at most one fines
    (pan) record; the stated total mass must equal the sum of record masses
    to within 1e-9 relative.
    """

    records: tuple[SieveRecord, ...]
    total_mass_kg: float

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if not records:
            raise ValueError("sieve analysis has no records")
        if sum(1 for r in records if r.is_fines) > 1:
            raise ValueError("at most one fines (pan) record is allowed")
        meshes = [r.mesh_mm for r in records if not r.is_fines]
        if not meshes:
            raise ValueError("sieve analysis needs at least one sized record")
        if any(b <= a for a, b in zip(meshes, meshes[1:])):
            raise ValueError("mesh sizes must be strictly increasing")
        mass_sum = sum(r.mass_kg for r in records)
        if mass_sum <= 0:
            raise ValueError("total sieve mass must be positive")
        if abs(mass_sum - self.total_mass_kg) > 1e-9 * max(mass_sum, 1.0):
            raise ValueError(
                f"total_mass_kg {self.total_mass_kg} does not match the "
                f"record sum {mass_sum}"
            )

    @classmethod
    def from_records(cls, records: Iterable[SieveRecord]) -> "SieveAnalysis":
        records = tuple(records)
        return cls(records, sum(r.mass_kg for r in records))

    @property
    def fines_mass_kg(self) -> float:
        return sum(r.mass_kg for r in self.records if r.is_fines)


class SizeDistribution:
    """Monotone percent-passing curve tabulated over fragment sizes.

    Parameters
    ----------
    sizes_mm : array-like
        Strictly increasing fragment sizes in mm.
    passing : array-like
        Cumulative mass fractions in [0, 1], non-decreasing, one per size.
    """

    __slots__ = ("sizes_mm", "passing")

    def __init__(self, sizes_mm, passing):
        sizes = np.asarray(sizes_mm, dtype=float)
        frac = np.asarray(passing, dtype=float)
        if sizes.ndim != 1 or frac.ndim != 1 or sizes.size == 0:
            raise ValueError("sizes and passing must be non-empty 1-D sequences")
        if sizes.size != frac.size:
            raise ValueError("sizes and passing must have equal length")
        if np.any(~np.isfinite(sizes)) or np.any(sizes <= 0):
            raise ValueError("sizes must be positive and finite")
        if np.any(np.diff(sizes) <= 0):
            raise ValueError("sizes must be strictly increasing")
        if np.any(~np.isfinite(frac)) or frac.min() < 0 or frac.max() > 1 + 1e-12:
            raise ValueError("passing values must lie in [0, 1]")
        if np.any(np.diff(frac) < -1e-12):
            raise ValueError("passing values must be non-decreasing")
        frac = np.clip(frac, 0.0, 1.0)
        sizes.flags.writeable = False
        frac.flags.writeable = False
        object.__setattr__(self, "sizes_mm", sizes)
        object.__setattr__(self, "passing", frac)

    def __setattr__(self, name, value):
        raise AttributeError("SizeDistribution is immutable")

    def __len__(self) -> int:
        return self.sizes_mm.size

    def __repr__(self) -> str:
        return (
            f"SizeDistribution({self.sizes_mm.size} points, "
            f"{self.sizes_mm[0]:g}..{self.sizes_mm[-1]:g} mm, "
            f"passing {self.passing[0]:.3f}..{self.passing[-1]:.3f})"
        )

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.sizes_mm.tolist(), self.passing.tolist()))

    def passing_at(self, x):
        return percent_passing_at(self, x)

    def size_at(self, p: float) -> float:
        return characteristic_size(self, p)


@dataclass(frozen=True)
class CharacteristicSizes:
    """The standard characteristic fragment sizes P80, P50 and P20 in mm."""

    p80: float
    p50: float
    p20: float

    def __post_init__(self):
        for name in ("p80", "p50", "p20"):
            check_positive(name, getattr(self, name))
        if not (self.p20 <= self.p50 <= self.p80):
            raise ValueError(
                f"characteristic sizes must be ordered p20 <= p50 <= p80, "
                f"got ({self.p20}, {self.p50}, {self.p80})"
            )

    def get(self, target: str) -> float:
        return {"p80": self.p80, "p50": self.p50, "p20": self.p20}[target]


def sieve_to_distribution(analysis: SieveAnalysis) -> SizeDistribution:
    """Convert a sieve analysis to a percent-passing curve.

    Passing at mesh size M is the cumulative mass strictly finer than M
    (fines pan plus all trays below M) divided by the total mass, so the
    coarsest tray's retained mass never appears in its own passing value.
    """
    finer = analysis.fines_mass_kg
    sizes, passing = [], []
    for record in analysis.records:
        if record.is_fines:
            continue
        sizes.append(record.mesh_mm)
        passing.append(finer / analysis.total_mass_kg)
        finer += record.mass_kg
    return SizeDistribution(sizes, passing)


def percent_passing_at(dist: SizeDistribution, x):
    """Passing fraction at size(s) ``x`` (mm), log-linear between knots.

    Exact at tabulated sizes; clamps to the first/last tabulated passing
    value outside the tabulated range.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("query sizes must be positive and finite")
    result = np.interp(np.log(arr), np.log(dist.sizes_mm), dist.passing)
    return float(result) if np.isscalar(x) or arr.ndim == 0 else result


def characteristic_size(dist: SizeDistribution, p: float) -> float:
    """Size (mm) at which the curve attains passing fraction ``p``.

    Inverse of :func:`percent_passing_at` under the same log-linear
    interpolation.  ``p`` must be attained by the curve: either strictly
    between the smallest and largest tabulated passing values, or exactly
    equal to a tabulated value (flat runs resolve to their first size).
    """
    p = float(p)
    passing = dist.passing
    exact = np.flatnonzero(passing == p)
    if exact.size:
        return float(dist.sizes_mm[exact[0]])
    if not (passing[0] < p < passing[-1]):
        raise ValueError(
            f"passing fraction {p} is outside the attained range "
            f"[{passing[0]:.6f}, {passing[-1]:.6f}]"
        )
    i = int(np.searchsorted(passing, p))
    p0, p1 = passing[i - 1], passing[i]
    s0, s1 = dist.sizes_mm[i - 1], dist.sizes_mm[i]
    t = (p - p0) / (p1 - p0)
    return float(math.exp(math.log(s0) + t * (math.log(s1) - math.log(s0))))


def characteristic_sizes(dist: SizeDistribution) -> CharacteristicSizes:
    """P80/P50/P20 read directly off the tabulated curve by interpolation."""
    return CharacteristicSizes(
        p80=characteristic_size(dist, 0.80),
        p50=characteristic_size(dist, 0.50),
        p20=characteristic_size(dist, 0.20),
    )


def percent_true_error(
    estimated: SizeDistribution,
    reference: SizeDistribution,
    sizes: Sequence[float],
) -> list[float | None]:
    """Signed relative error of estimated vs reference passing, in percent.

    Returns ``100 * (P_est - P_ref) / P_ref`` per queried size.  Sizes where
    the reference passing is zero yield ``None`` (undefined) rather than
    aborting the whole comparison.
    """
    out: list[float | None] = []
    for s in sizes:
        p_est = percent_passing_at(estimated, s)
        p_ref = percent_passing_at(reference, s)
        out.append(None if p_ref == 0.0 else 100.0 * (p_est - p_ref) / p_ref)
    return out


def percent_difference(
    manual: SizeDistribution,
    automated: SizeDistribution,
    sizes: Sequence[float],
) -> list[float | None]:
    """Unsigned relative difference between two methods' curves, in percent.

    Returns ``100 * |P_manual - P_automated| / P_manual`` per queried size;
    always non-negative.  Sizes with zero manual passing yield ``None``.
    """
    out: list[float | None] = []
    for s in sizes:
        p_man = percent_passing_at(manual, s)
        p_aut = percent_passing_at(automated, s)
        out.append(None if p_man == 0.0 else 100.0 * abs(p_man - p_aut) / p_man)
    return out


def log_size_error(estimated_size_mm: float, reference_size_mm: float) -> float:
    """Percent logarithmic error of a characteristic size for one frame.

    ``100 * (log(estimated) - log(reference)) / log(reference)``; the value
    is the same for any logarithm base.  A reference of exactly 1 mm has a
    zero log and is rejected.
    """
    est = check_positive("estimated_size_mm", estimated_size_mm)
    ref = check_positive("reference_size_mm", reference_size_mm)
    log_ref = math.log(ref)
    if log_ref == 0.0:
        raise ValueError("reference size of exactly 1 mm has zero logarithm")
    return 100.0 * (math.log(est) - log_ref) / log_ref


def average_log_error(per_frame_errors: Sequence[float]) -> float:
    """Arithmetic mean of per-frame percent logarithmic errors."""
    errors = list(per_frame_errors)
    if not errors:
        raise ValueError("cannot average an empty list of frame errors")
    return float(np.mean(errors))


def default_size_grid(d_min_mm: float, d_max_mm: float) -> np.ndarray:
    """Tabulation grid: powers of two spanning the observed size range,
    plus the reference sieve mesh sizes, plus the largest observed size."""
    d_min = check_positive("d_min_mm", d_min_mm)
    d_max = check_positive("d_max_mm", d_max_mm)
    if d_max < d_min:
        raise ValueError("d_max_mm must be >= d_min_mm")
    k0 = math.floor(math.log2(d_min))
    k1 = math.ceil(math.log2(d_max))
    grid = [2.0**k for k in range(k0, k1 + 1)]
    grid.extend(LAB_SIEVE_MESHES_MM)
    grid.append(d_max)
    grid = np.unique([g for g in grid if 2.0**k0 <= g <= d_max])
    return grid


def mass_passing_curve(
    diameters_mm,
    grid=None,
    extra_mass_below: float = 0.0,
) -> SizeDistribution:
    """Cumulative mass-passing curve of a particle population.

    Each particle is weighted by volume (diameter cubed; the shape constant
    cancels in the fractions, which is also why a constant material density
    drops out).  ``extra_mass_below`` adds unresolved-fines mass, in the same
    d-cubed units, counted as finer than every tabulated size.
    """
    d = np.asarray(diameters_mm, dtype=float)
    if d.size == 0:
        raise ValueError("particle population is empty")
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("diameters must be positive and finite")
    if extra_mass_below < 0:
        raise ValueError("extra_mass_below must be non-negative")
    order = np.argsort(d)
    d_sorted = d[order]
    weights = d_sorted**3
    cum = np.concatenate([[0.0], np.cumsum(weights)])
    total = cum[-1] + extra_mass_below
    if grid is None:
        grid = default_size_grid(d_sorted[0], d_sorted[-1])
    grid = np.asarray(grid, dtype=float)
    idx = np.searchsorted(d_sorted, grid, side="right")
    passing = (extra_mass_below + cum[idx]) / total
    return SizeDistribution(grid, passing)


def pool_distributions(frames: Sequence["ParticleSet"], grid=None) -> SizeDistribution:
    """Pool per-frame particle sets into one population and convert it to a
    volume-weighted passing curve.

    Pooling is concatenation: n identical frames give the same curve as one.
    Unresolved (sub-resolution) area is ignored here, matching a fines
    factor of zero.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to pool")
    diameters = np.concatenate([f.diameters_mm for f in frames])
    if diameters.size == 0:
        raise ValueError("all frames are empty")
    return mass_passing_curve(diameters, grid=grid)
