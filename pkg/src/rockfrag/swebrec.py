"""The Swebrec size-distribution model: evaluation, inversion, mass-fraction
sampling, and nonlinear least-squares fitting.

The model gives the cumulative passing fraction at fragment size x as

    P(x) = 1 / (1 + f(x)),    f(x) = [ln(x_max / x) / ln(x_max / x_50)] ** b

for 0 < x <= x_max, where x_max is the largest fragment size, x_50 the mass
median, and b a curve-modulation factor.  Sizes at or above x_max evaluate
to exactly 1 so downstream metric queries stay total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .distribution import CharacteristicSizes
from .validation import check_positive

# Convergence policy for the damped Gauss-Newton fitter.
_STEP_TOL = 1e-10
_COST_TOL = 1e-12
_MAX_ITER = 500
_N_STARTS = 5


@dataclass(frozen=True)
class SwebrecParams:
    """The triple (x_max, x_50, b) parameterizing the curve."""

    x_max: float
    x_50: float
    b: float

    def __post_init__(self):
        check_positive("x_50", self.x_50)
        check_positive("b", self.b)
        if not self.x_max > self.x_50:
            raise ValueError(
                f"x_max must exceed x_50, got x_max={self.x_max}, x_50={self.x_50}"
            )


@dataclass(frozen=True)
class FitResult:
    params: SwebrecParams
    residual_rms: float
    iterations: int
    converged: bool


def evaluate(params: SwebrecParams, x):
    """Passing fraction at size(s) x in mm; exactly 1 for x >= x_max."""
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("sizes must be positive and finite")
    v = math.log(params.x_max / params.x_50)
    with np.errstate(over="ignore", divide="ignore"):
        ratio = np.log(params.x_max / arr) / v
        f = np.power(np.maximum(ratio, 0.0), params.b)
        p = np.where(ratio > 0.0, 1.0 / (1.0 + f), 1.0)
    return float(p) if np.isscalar(x) or arr.ndim == 0 else p


def invert(params: SwebrecParams, p):
    """Size in mm at passing fraction p in (0, 1); inverse of :func:`evaluate`."""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr >= 1):
        raise ValueError("passing fraction must lie strictly in (0, 1)")
    v = math.log(params.x_max / params.x_50)
    x = params.x_max / np.exp(v * ((1.0 - arr) / arr) ** (1.0 / params.b))
    return float(x) if np.isscalar(p) or arr.ndim == 0 else x


def sample_size(params: SwebrecParams, u):
    """Inverse-CDF draw: the size below which a uniformly chosen unit of
    mass lies, given uniform variate(s) u in (0, 1)."""
    return invert(params, u)


def characteristic_sizes(params: SwebrecParams) -> CharacteristicSizes:
    """P80/P50/P20 of the curve in closed form."""
    return CharacteristicSizes(
        p80=invert(params, 0.80),
        p50=invert(params, 0.50),
        p20=invert(params, 0.20),
    )


def _theta_to_params(theta) -> SwebrecParams:
    gap, log_x50, log_b = theta
    x_50 = math.exp(log_x50)
    return SwebrecParams(x_max=x_50 + math.exp(gap), x_50=x_50, b=math.exp(log_b))


def _model_and_jacobian(theta, x):
    """Model values and analytic Jacobian w.r.t. the unconstrained
    parameters (log(x_max - x_50), log(x_50), log(b))."""
    gap, log_x50, log_b = theta
    x_50 = math.exp(log_x50)
    e_gap = math.exp(gap)
    x_max = x_50 + e_gap
    b = math.exp(log_b)

    u = np.log(x_max / x)
    v = math.log(x_max / x_50)
    inside = u > 0.0

    p = np.ones_like(x)
    jac = np.zeros((x.size, 3))
    if np.any(inside):
        ui = u[inside]
        ratio = ui / v
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            f = ratio**b
            pi = 1.0 / (1.0 + f)
            dp_df = -(pi**2)
            rpow = ratio ** (b - 1.0)
            df_dxmax = b * rpow * (v - ui) / (x_max * v * v)
            df_dx50 = b * rpow * ui / (x_50 * v * v)
            df_db = f * np.log(ratio)
        p[inside] = np.where(np.isfinite(pi), pi, 0.0)
        j0 = dp_df * df_dxmax * e_gap
        j1 = dp_df * (df_dxmax + df_dx50) * x_50
        j2 = dp_df * df_db * b
        block = np.stack([j0, j1, j2], axis=1)
        jac[inside] = np.nan_to_num(block, nan=0.0, posinf=0.0, neginf=0.0)
    return p, jac


def _levenberg_marquardt(theta0, x, y, max_iter):
    theta = np.asarray(theta0, dtype=float).copy()
    p, jac = _model_and_jacobian(theta, x)
    residual = p - y
    cost = float(residual @ residual)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        a = jac.T @ jac
        g = jac.T @ residual
        diag = np.clip(np.diag(a), 1e-12, None)
        accepted = False
        for _ in range(30):
            try:
                delta = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new, jac_new = _model_and_jacobian(theta + delta, x)
            residual_new = p_new - y
            cost_new = float(residual_new @ residual_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 10.0
        if not accepted:
            break
        rel_step = float(np.linalg.norm(delta)) / max(float(np.linalg.norm(theta)), 1.0)
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        theta += delta
        residual, jac, cost = residual_new, jac_new, cost_new
        if rel_step < _STEP_TOL or rel_drop < _COST_TOL:
            converged = True
            break
    return theta, cost, iterations, converged


def _initial_x50(sizes, passing):
    """Log-linear interpolation of the data at passing 0.5, extrapolated
    from the nearest segment when the data do not span 0.5."""
    log_s = np.log(sizes)
    if passing[0] < 0.5 < passing[-1]:
        return math.exp(float(np.interp(0.5, passing, log_s)))
    if sizes.size >= 2:
        i, j = (0, 1) if passing[0] >= 0.5 else (sizes.size - 2, sizes.size - 1)
        dp = passing[j] - passing[i]
        if dp > 0:
            slope = (log_s[j] - log_s[i]) / dp
            return math.exp(float(log_s[j] + slope * (0.5 - passing[j])))
    return math.exp(float(np.mean(log_s)))


def fit(
    sizes_mm,
    passing,
    *,
    n_starts: int = _N_STARTS,
    max_iter: int = _MAX_ITER,
    seed: int = 0,
) -> FitResult:
    """Least-squares fit of the curve to (size, passing-fraction) points.

    Minimizes the sum of squared residuals in passing-fraction space with a
    damped Gauss-Newton iteration over the unconstrained parameters
    (log(x_max - x_50), log(x_50), log(b)), which keeps x_max > x_50 > 0 and
    b > 0 by construction.  Multiple jittered starts guard against the
    ill-conditioning that appears when x_max sits close to the largest data
    point; the best residual wins.
    """
    x = np.asarray(sizes_mm, dtype=float)
    y = np.asarray(passing, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise ValueError("sizes and passing must be 1-D and the same length")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.unique(x).size < 3:
        raise ValueError("fitting needs at least 3 points with distinct sizes")
    if np.any(x <= 0):
        raise ValueError("sizes must be positive")
    if np.any(y <= 0) or np.any(y > 1):
        raise ValueError("passing fractions must lie in (0, 1]")
    if np.any(np.diff(y) < 0):
        raise ValueError("passing must be non-decreasing with size")
    if y.max() == y.min():
        raise ValueError("degenerate data: all passing values are equal")

    x_max0 = 1.5 * float(x[-1])
    x_500 = _initial_x50(x, y)
    x_500 = min(max(x_500, 0.05 * float(x[0])), 0.95 * x_max0)
    theta0 = np.array([math.log(x_max0 - x_500), math.log(x_500), math.log(2.0)])

    rng = np.random.default_rng(seed)
    best = None
    for start in range(max(1, n_starts)):
        theta_start = theta0.copy()
        if start > 0:
            theta_start += rng.normal(0.0, [0.25, 0.10, 0.30])
        theta, cost, iterations, converged = _levenberg_marquardt(
            theta_start, x, y, max_iter
        )
        if best is None or cost < best[1]:
            best = (theta, cost, iterations, converged)
    theta, cost, iterations, converged = best
    return FitResult(
        params=_theta_to_params(theta),
        residual_rms=math.sqrt(cost / x.size),
        iterations=iterations,
        converged=converged,
    )


class SwebrecCurve(RegressorMixin, BaseEstimator):
    """Swebrec size-distribution curve as a scikit-learn style estimator.

    Parameters
    ----------
    n_starts : int, default=5
        Number of jittered initializations for the damped Gauss-Newton fit.
    max_iter : int, default=500
        Iteration cap per start.
    seed : int, default=0
        Seed for the deterministic initialization jitter.

    Attributes
    ----------
    params_ : SwebrecParams
        Fitted (x_max, x_50, b).
    x_max_, x_50_, b_ : float
        The fitted parameters, unpacked.
    residual_rms_ : float
        Root-mean-square residual in passing-fraction units.
    n_iter_ : int
        Iterations used by the winning start.
    converged_ : bool
        Whether the winning start met the convergence criteria.

    Examples
    --------
    >>> curve = SwebrecCurve().fit([4.0, 9.53, 12.7, 19.05],
    ...                            [0.0042, 0.0854, 0.1622, 0.6129])
    >>> round(curve.x_50_, 1)
    17.8
    """

    def __init__(self, n_starts: int = _N_STARTS, max_iter: int = _MAX_ITER, seed: int = 0):
        self.n_starts = n_starts
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y):
        sizes = np.asarray(X, dtype=float)
        if sizes.ndim == 2 and sizes.shape[1] == 1:
            sizes = sizes[:, 0]
        result = fit(
            sizes,
            np.asarray(y, dtype=float),
            n_starts=self.n_starts,
            max_iter=self.max_iter,
            seed=self.seed,
        )
        self.result_ = result
        self.params_ = result.params
        self.x_max_ = result.params.x_max
        self.x_50_ = result.params.x_50
        self.b_ = result.params.b
        self.residual_rms_ = result.residual_rms
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this SwebrecCurve instance is not fitted yet")

    def predict(self, X):
        self._check_fitted()
        sizes = np.asarray(X, dtype=float)
        if sizes.ndim == 2 and sizes.shape[1] == 1:
            sizes = sizes[:, 0]
        return evaluate(self.params_, sizes)

    def quantile(self, p):
        """Size(s) at passing fraction(s) p, from the fitted curve."""
        self._check_fitted()
        return invert(self.params_, p)

    def characteristic_sizes(self) -> CharacteristicSizes:
        self._check_fitted()
        return characteristic_sizes(self.params_)
