"""Streaming survey missions: per-frame quality gating, robust outlier
rejection, rolling characteristic-size statistics, and the t-test based
required-image-count stopping rule.

The stopping rule asks: how many frames n make a one-sided one-sample
t-test at level alpha powerful enough (>= the configured power) to detect a
characteristic size ``effect_fraction`` greater than the current mean?  The
mission stops once the accepted-frame count reaches that n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import swebrec
from .distribution import (
    CharacteristicSizes,
    SizeDistribution,
    characteristic_size,
    log_size_error,
    percent_passing_at,
    pool_distributions,
)
from .segmentation import (
    ParticleSet,
    PileSegmenter,
    ScaleCalibration,
    particles_to_distribution,
    quality_score,
)
from .validation import AnalysisError, check_fraction, check_positive

_TARGETS = ("p80", "p50", "p20")
_REQUIRED_N_CAP = 10_000


@dataclass(frozen=True)
class StoppingConfig:
    """Knobs of the stopping rule and the frame filters."""

    target: str = "p80"
    effect_fraction: float = 0.20
    alpha: float = 0.05
    power: float = 0.80
    min_frames: int = 2
    quality_threshold: float = 0.0
    outlier_k: float = 3.0

    def __post_init__(self):
        if self.target not in _TARGETS:
            raise ValueError(f"target must be one of {_TARGETS}, got {self.target!r}")
        check_positive("effect_fraction", self.effect_fraction)
        check_fraction("alpha", self.alpha, open_low=True, open_high=True)
        check_fraction("power", self.power, open_low=True, open_high=True)
        if self.min_frames < 2:
            raise ValueError("min_frames must be at least 2")
        if self.quality_threshold < 0:
            raise ValueError("quality_threshold must be non-negative")
        check_positive("outlier_k", self.outlier_k)


class RunningStat:
    """Numerically stable one-pass mean/variance (Welford update)."""

    __slots__ = ("n", "mean", "_m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (x - self.mean)

    @property
    def sample_sd(self) -> float | None:
        if self.n < 2:
            return None
        return math.sqrt(self._m2 / (self.n - 1))

    def as_dict(self) -> dict:
        return {"mean": self.mean if self.n else None, "sd": self.sample_sd, "n": self.n}


@dataclass
class FrameResult:
    """Outcome of one ingested frame."""

    frame_id: int
    quality: float | None
    accepted: bool
    reason: str | None = None
    distribution: SizeDistribution | None = None
    sizes: CharacteristicSizes | None = None

    def __post_init__(self):
        if self.accepted and self.distribution is None:
            raise ValueError("accepted frames must carry a distribution")
        if not self.accepted and not self.reason:
            raise ValueError("rejected frames must carry a rejection reason")


@dataclass
class MissionState:
    """Streaming aggregate over the frames seen so far."""

    frames: list[FrameResult] = field(default_factory=list)
    particle_sets: list[ParticleSet] = field(default_factory=list)
    pooled: SizeDistribution | None = None
    rolling: dict[str, RunningStat] = field(
        default_factory=lambda: {t: RunningStat() for t in _TARGETS}
    )
    required_history: list[int | None] = field(default_factory=list)

    @property
    def accepted_count(self) -> int:
        return self.rolling["p80"].n

    def accepted_sizes(self, target: str) -> list[float]:
        return [f.sizes.get(target) for f in self.frames if f.accepted]


def _shifted_t_power(n: int, effect_over_sd: float, alpha: float) -> float:
    """Power of the one-sided one-sample t-test by the shifted-t
    approximation to the noncentral t distribution."""
    df = n - 1
    t_crit = stats.t.ppf(1.0 - alpha, df)
    ncp = effect_over_sd * math.sqrt(n)
    return float(1.0 - stats.t.cdf(t_crit - ncp, df))


def _normal_seed(mean: float, sample_sd: float, config: StoppingConfig) -> float:
    delta = config.effect_fraction * mean
    z_alpha = stats.norm.ppf(1.0 - config.alpha)
    z_power = stats.norm.ppf(config.power)
    return ((z_alpha + z_power) * sample_sd / delta) ** 2


def required_samples(mean: float, sample_sd: float, config: StoppingConfig) -> int:
    """Smallest n >= 2 giving the one-sided one-sample t-test at level
    alpha power >= the configured power against an alternative mean of
    mean * (1 + effect_fraction).

    Seeded with the normal-approximation sample size
    ((z_{1-alpha} + z_power) * sd / delta)^2, delta = effect_fraction * mean,
    then refined with the shifted-t power approximation until stable.  A
    zero sample standard deviation floors at 2, the minimum for a variance
    estimate.
    """
    check_positive("mean", mean)
    if sample_sd < 0 or not math.isfinite(sample_sd):
        raise ValueError(f"sample_sd must be non-negative, got {sample_sd!r}")
    if sample_sd == 0.0:
        return 2
    effect_over_sd = config.effect_fraction * mean / sample_sd
    n = max(2, math.ceil(_normal_seed(mean, sample_sd, config)))
    while n < _REQUIRED_N_CAP and _shifted_t_power(n, effect_over_sd, config.alpha) < config.power:
        n += 1
    while n > 2 and _shifted_t_power(n - 1, effect_over_sd, config.alpha) >= config.power:
        n -= 1
    return n


def detect_outlier(state: MissionState, candidate_size_mm: float, config: StoppingConfig) -> bool:
    """Robust gate on a candidate frame's target size: an outlier deviates
    from the accepted frames' median by more than outlier_k times the median
    absolute deviation.  The band never shrinks below 20% of the median:
    that is the degenerate (MAD = 0) band, applied as a floor because the
    MAD of the first few frames is far too noisy to gate on by itself.
    With fewer than min_frames accepted frames the rule is disabled.
    """
    accepted = state.accepted_sizes(config.target)
    if len(accepted) < config.min_frames:
        return False
    values = np.asarray(accepted)
    median = float(np.median(values))
    mad = float(np.median(np.abs(values - median)))
    band = max(config.outlier_k * mad, 0.20 * median)
    return abs(candidate_size_mm - median) > band


def required_now(state: MissionState, config: StoppingConfig) -> int | None:
    """Required frame count given the current rolling statistics, or None
    while fewer than two frames have been accepted."""
    stat = state.rolling[config.target]
    if stat.n < 2 or stat.mean <= 0:
        return None
    return required_samples(stat.mean, stat.sample_sd, config)


def should_stop(state: MissionState, config: StoppingConfig) -> bool:
    """Stop once the accepted-frame count reaches both the required sample
    size and the min_frames floor."""
    n = state.accepted_count
    if n < config.min_frames:
        return False
    required = required_now(state, config)
    return required is not None and n >= required


def frame_characteristic_sizes(dist: SizeDistribution) -> CharacteristicSizes:
    """P80/P50/P20 of a measured curve, the way a frame is summarized:
    fit the Swebrec model to the tabulated points and solve it for the
    characteristic sizes.  Falls back to direct interpolation if the fit
    fails or does not converge.
    """
    keep = dist.passing > 0.0
    sizes = dist.sizes_mm[keep]
    passing = dist.passing[keep]
    try:
        result = swebrec.fit(sizes, passing)
        if result.converged:
            return swebrec.characteristic_sizes(result.params)
    except ValueError:
        pass
    return CharacteristicSizes(
        p80=characteristic_size(dist, 0.80),
        p50=characteristic_size(dist, 0.50),
        p20=characteristic_size(dist, 0.20),
    )


class MissionRunner:
    """Consumes a stream of frames and maintains the mission state.

    Frame analysis is pure and may run anywhere; state updates go through
    this single consumer.  A rejected frame never changes anything beyond
    the frame log.
    """

    def __init__(self, segmenter: PileSegmenter | None = None,
                 config: StoppingConfig | None = None):
        self.segmenter = segmenter if segmenter is not None else PileSegmenter()
        self.config = config if config is not None else StoppingConfig()
        self.state = MissionState()

    def _next_id(self) -> int:
        return len(self.state.frames)

    def _log(self, frame: FrameResult) -> FrameResult:
        self.state.frames.append(frame)
        return frame

    def ingest(self, image, calibration: ScaleCalibration, mask=None) -> FrameResult:
        """Score, segment and (maybe) accept one frame."""
        frame_id = self._next_id()
        quality = quality_score(image).sharpness
        if quality < self.config.quality_threshold:
            return self._log(FrameResult(frame_id, quality, False, reason="quality"))
        try:
            particles = self.segmenter.segment(image, calibration, mask=mask)
        except ValueError as exc:
            return self._log(
                FrameResult(frame_id, quality, False, reason=f"analysis-failure: {exc}")
            )
        return self._ingest_particles(particles, quality, frame_id)

    def ingest_particles(self, particles: ParticleSet, quality: float | None = None) -> FrameResult:
        """Feed a pre-segmented frame (e.g. from an external delineation
        tool) through the same acceptance pipeline."""
        return self._ingest_particles(particles, quality, self._next_id())

    def _ingest_particles(self, particles, quality, frame_id) -> FrameResult:
        if len(particles) == 0:
            reason = particles.warning or "no particles found"
            return self._log(
                FrameResult(frame_id, quality, False, reason=f"analysis-failure: {reason}")
            )
        try:
            dist = particles_to_distribution(
                particles, fines_factor=self.segmenter.fines_factor
            )
            sizes = frame_characteristic_sizes(dist)
        except (ValueError, AnalysisError) as exc:
            return self._log(
                FrameResult(frame_id, quality, False, reason=f"analysis-failure: {exc}")
            )
        if detect_outlier(self.state, sizes.get(self.config.target), self.config):
            return self._log(FrameResult(frame_id, quality, False, reason="outlier"))

        state = self.state
        state.particle_sets.append(particles)
        for target in _TARGETS:
            state.rolling[target].push(sizes.get(target))
        state.pooled = pool_distributions(state.particle_sets)
        frame = self._log(
            FrameResult(frame_id, quality, True, distribution=dist, sizes=sizes)
        )
        state.required_history.append(required_now(state, self.config))
        return frame

    def should_stop(self) -> bool:
        return should_stop(self.state, self.config)

    def report(self, reference: SizeDistribution | None = None) -> dict:
        return mission_report(self.state, self.config, reference=reference)


def _prefix_means(values: list[float]) -> list[float]:
    out, acc = [], 0.0
    for i, v in enumerate(values, start=1):
        acc += v
        out.append(acc / i)
    return out


def mission_report(
    state: MissionState,
    config: StoppingConfig,
    reference: SizeDistribution | None = None,
) -> dict:
    """JSON-ready mission summary.

    Always includes the frame log, the pooled curve, rolling statistics and
    the stop decision.  With a reference curve it adds per-frame percent
    logarithmic errors of each characteristic size, their running averages,
    and the per-size percent true error of passing with its mean and
    standard deviation across frames.
    """
    if state.accepted_count < 1:
        raise AnalysisError("no accepted frames to report on")

    frames_json = []
    for f in state.frames:
        entry: dict = {
            "frame_id": f.frame_id,
            "quality": f.quality,
            "accepted": f.accepted,
            "reason": f.reason,
        }
        if f.sizes is not None:
            entry["sizes"] = {"p80": f.sizes.p80, "p50": f.sizes.p50, "p20": f.sizes.p20}
        frames_json.append(entry)

    report = {
        "schema": 1,
        "kind": "mission",
        "frames": frames_json,
        "pooled": {
            "sizes": state.pooled.sizes_mm.tolist(),
            "passing": state.pooled.passing.tolist(),
        },
        "rolling": {t: state.rolling[t].as_dict() for t in _TARGETS},
        "stop": {
            "required": required_now(state, config),
            "decision": "stop" if should_stop(state, config) else "continue",
            "target": config.target,
            "required_history": list(state.required_history),
        },
    }

    if reference is not None:
        accepted = [f for f in state.frames if f.accepted]
        report.update(
            error_sections(
                [f.distribution for f in accepted],
                [f.sizes for f in accepted],
                reference,
            )
        )
    return report


def error_sections(
    distributions: list[SizeDistribution],
    sizes_list: list[CharacteristicSizes],
    reference: SizeDistribution,
) -> dict:
    """Reference and error sections shared by mission and batch reports:
    per-frame percent logarithmic errors with running averages, plus the
    per-size percent true error of passing with mean and standard deviation
    across frames (the error-bar construction)."""
    ref_sizes = frame_characteristic_sizes(reference)
    log_errors = {
        t: [log_size_error(s.get(t), ref_sizes.get(t)) for s in sizes_list]
        for t in _TARGETS
    }
    query = reference.sizes_mm[reference.passing > 0.0]
    rows = np.array(
        [
            [
                100.0
                * (percent_passing_at(dist, s) - percent_passing_at(reference, s))
                / percent_passing_at(reference, s)
                for s in query
            ]
            for dist in distributions
        ]
    )
    return {
        "reference": {
            "sizes": reference.sizes_mm.tolist(),
            "passing": reference.passing.tolist(),
            "characteristic": {
                "p80": ref_sizes.p80,
                "p50": ref_sizes.p50,
                "p20": ref_sizes.p20,
            },
        },
        "errors": {
            "log_size": {
                t: {
                    "per_frame": log_errors[t],
                    "prefix_average": _prefix_means(log_errors[t]),
                }
                for t in _TARGETS
            },
            "passing": {
                "sizes": query.tolist(),
                "per_frame": rows.tolist(),
                "mean": rows.mean(axis=0).tolist(),
                "sd": rows.std(axis=0, ddof=1).tolist() if len(distributions) > 1 else None,
            },
        },
    }
