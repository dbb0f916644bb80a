"""Rytov angle under thermal (white) momentum noise.

The noiseless momentum runs once around a cone in time ``T``::

    p0(t) = p0 (sin th0 cos phi, sin th0 sin phi, cos th0),   phi = 2 pi t / T

and is perturbed, ``p = p0 + N``, by white noise with
``<N_i(t) N_j(t')> = 2 D delta(t - t') delta_ij``.  The deviation of the
Rytov angle is

    exact:       dgamma = (2 pi / T) int (cos th - cos th0) dt
    linearized:  dgamma = (2 pi / T) int (N_z / p0 - p0_z (p0 . N) / p0^3) dt

whose variance is ``(8 pi^2 D / T) * mean_t (sin th0 / p0)^2``.

White noise is regularized on a uniform grid of step ``dt``: every grid node
carries an independent Gaussian vector with per-component variance
``2 D / dt`` and integrals use the trapezoid rule.  Note that the exact form
is a nonlinear functional of the noise, so under this regularization its
ensemble mean is shifted by ``-4 pi cos(th0) D / (dt p0^2)``; only the
linearized form is unbiased.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, stats

from .errors import DegenerateMomentum, PhononBerryError

__all__ = [
    "PrescribedPath",
    "NoiseModel",
    "Estimator",
    "EnsembleSummary",
    "NoiseAmplitudeWarning",
    "noise_stream",
    "sample_noise_step",
    "noise_realization",
    "delta_gamma_exact",
    "delta_gamma_linearized",
    "variance_prediction",
    "run_ensemble",
]

AMPLITUDE_GUARD = 0.3

ThetaLike = Union[float, Callable[[np.ndarray], np.ndarray], np.ndarray]


class NoiseAmplitudeWarning(UserWarning):
    """Noise is not small compared with the noiseless momentum."""


@dataclass(frozen=True)
class PrescribedPath:
    """Noiseless cyclic momentum evolution.

    ``theta0`` is a constant zenith angle, a callable of time, or an array of
    samples on a uniform grid over ``[0, period]``.
    """

    p0_mag: float
    theta0: ThetaLike
    period: float

    def __post_init__(self):
        if not self.p0_mag > 0:
            raise ValueError("p0_mag must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")
        th = self.theta(np.linspace(0.0, self.period, 257))
        if np.any(th <= 0) or np.any(th >= math.pi):
            raise ValueError("theta0 must lie strictly inside (0, pi)")

    @property
    def is_constant(self) -> bool:
        return np.isscalar(self.theta0)

    def theta(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.is_constant:
            return np.full(t.shape, float(self.theta0))
        if callable(self.theta0):
            return np.broadcast_to(np.asarray(self.theta0(t), dtype=float), t.shape).copy()
        samples = np.asarray(self.theta0, dtype=float)
        return np.interp(t, np.linspace(0.0, self.period, len(samples)), samples)

    def momentum(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        th = self.theta(t)
        phi = 2.0 * math.pi * t / self.period
        st = np.sin(th)
        return self.p0_mag * np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(th)], axis=-1)


@dataclass(frozen=True)
class NoiseModel:
    D: float
    seed: int
    dt: float

    def __post_init__(self):
        if not self.D >= 0:
            raise ValueError("D must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def node_std(self) -> float:
        return math.sqrt(2.0 * self.D / self.dt)

    def grid(self, period: float) -> np.ndarray:
        m = round(period / self.dt)
        if m < 1 or abs(m * self.dt - period) > 1e-9 * period:
            raise ValueError(f"period {period!r} is not a whole number of steps dt={self.dt!r}")
        return np.linspace(0.0, period, m + 1)


def noise_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, index)``."""
    key = (int(index) << 64) | (int(seed) & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def sample_noise_step(model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """One grid node of white noise: three independent ``N(0, 2D/dt)`` draws."""
    if model.D == 0:
        return np.zeros(3)
    return rng.normal(0.0, model.node_std, 3)


def noise_realization(path: PrescribedPath, model: NoiseModel, index: int) -> np.ndarray:
    """Noise on the full grid for trajectory ``index``, shape ``(nodes, 3)``.

    Row ``k`` equals the ``k``-th successive :func:`sample_noise_step` draw
    from ``noise_stream(model.seed, index)``.
    """
    n = len(model.grid(path.period))
    if model.D == 0:
        return np.zeros((n, 3))
    return noise_stream(model.seed, index).normal(0.0, model.node_std, (n, 3))


def _trapezoid_weights(t):
    w = np.empty_like(t)
    dt = np.diff(t)
    w[0], w[-1] = 0.5 * dt[0], 0.5 * dt[-1]
    w[1:-1] = 0.5 * (dt[:-1] + dt[1:])
    return w


def _grid_for(path, noise):
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != 3 or noise.shape[0] < 2:
        raise ValueError("noise realization must have shape (nodes >= 2, 3)")
    return np.linspace(0.0, path.period, noise.shape[0]), noise


def _linear_weights(path, t):
    u = path.momentum(t) / path.p0_mag
    g = (np.array([0.0, 0.0, 1.0]) - u[:, 2:3] * u) / path.p0_mag
    return (2.0 * math.pi / path.period) * _trapezoid_weights(t)[:, None] * g


def delta_gamma_linearized(path: PrescribedPath, noise) -> float:
    """First-order Rytov-angle deviation; exactly linear in ``noise``."""
    t, noise = _grid_for(path, noise)
    return float(np.sum(_linear_weights(path, t) * noise))


def delta_gamma_exact(path: PrescribedPath, noise, warn: bool = True) -> float:
    """Rytov-angle deviation from the full direction of ``p0 + N``.

    Raises
    ------
    DegenerateMomentum
        If the perturbed momentum vanishes at a grid node.
    """
    t, noise = _grid_for(path, noise)
    p0 = path.momentum(t)
    p = p0 + noise
    pm = np.linalg.norm(p, axis=1)
    if np.any(pm == 0):
        raise DegenerateMomentum(f"p0 + N vanishes at t={float(t[np.argmin(pm)])!r}")
    if warn and np.max(np.linalg.norm(noise, axis=1)) > AMPLITUDE_GUARD * path.p0_mag:
        warnings.warn(f"noise amplitude exceeds {AMPLITUDE_GUARD} p0; linearization premise strained",
                      NoiseAmplitudeWarning, stacklevel=2)
    # cos(th0) via the same expression so that N = 0 cancels exactly
    integrand = p[:, 2] / pm - p0[:, 2] / np.linalg.norm(p0, axis=1)
    return float((2.0 * math.pi / path.period) * np.sum(_trapezoid_weights(t) * integrand))


def variance_prediction(path: PrescribedPath, D: float, period: float | None = None) -> float:
    """Closed-form ``<dgamma^2> = (8 pi^2 D / T) mean_t (sin th0 / p0)^2``."""
    T = path.period if period is None else period
    if path.is_constant:
        mean_sin2 = math.sin(float(path.theta0)) ** 2
    else:
        val, _ = integrate.quad(lambda s: math.sin(float(path.theta(s))) ** 2, 0.0, path.period, limit=200)
        mean_sin2 = val / path.period
    return 8.0 * math.pi**2 * D * mean_sin2 / (T * path.p0_mag**2)


class Estimator(str, enum.Enum):
    EXACT = "exact"
    LINEARIZED = "linearized"


@dataclass(frozen=True)
class EnsembleSummary:
    n: int
    mean: float
    variance: float
    std_error_mean: float
    skewness: float
    excess_kurtosis: float
    histogram: tuple
    predicted_variance: float
    values: np.ndarray | None = None

    def to_text(self) -> str:
        """``key: value`` lines followed by a histogram CSV block."""
        lines = [
            f"n: {self.n}",
            f"mean: {self.mean:.17g}",
            f"variance: {self.variance:.17g}",
            f"std_error_mean: {self.std_error_mean:.17g}",
            f"skewness: {self.skewness:.17g}",
            f"excess_kurtosis: {self.excess_kurtosis:.17g}",
            f"predicted_variance: {self.predicted_variance:.17g}",
            "",
            "bin_left,bin_right,count",
        ]
        edges, counts = self.histogram
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            lines.append(f"{lo:.17g},{hi:.17g},{int(c)}")
        return "\n".join(lines) + "\n"


def _summarize(values, predicted, bins):
    n = len(values)
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1))
    if var > 0:
        skew = float(stats.skew(values, bias=False))
        kurt = float(stats.kurtosis(values, fisher=True, bias=False))
    else:
        skew = kurt = math.nan
    counts, edges = np.histogram(values, bins=bins)
    return EnsembleSummary(n, mean, var, math.sqrt(var / n), skew, kurt, (edges, counts), predicted, values)


def run_ensemble(path: PrescribedPath, model: NoiseModel, n: int,
                 estimator: Estimator | str = Estimator.LINEARIZED,
                 workers: int = 1, bins: int = 50) -> EnsembleSummary:
    """Monte Carlo ensemble of the Rytov-angle deviation.

    Realization ``i`` draws from ``noise_stream(model.seed, i)``, so results
    are bit-identical for any ``workers``.  Reduction is in index order.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    estimator = Estimator(estimator)
    t = model.grid(path.period)
    if model.D == 0:
        values = np.zeros(n)
        return _summarize(values, variance_prediction(path, 0.0), bins)

    if estimator is Estimator.LINEARIZED:
        weights = _linear_weights(path, t)

        def one(i):
            return float(np.sum(weights * noise_realization(path, model, i)))
    else:
        limit = AMPLITUDE_GUARD * path.p0_mag
        strained = np.zeros(n, dtype=bool)

        def one(i):
            noise = noise_realization(path, model, i)
            strained[i] = np.max(np.einsum("ij,ij->i", noise, noise)) > limit * limit
            return delta_gamma_exact(path, noise, warn=False)

    def run_chunk(idx):
        out = np.empty(len(idx))
        for k, i in enumerate(idx):
            try:
                out[k] = one(i)
            except PhononBerryError as exc:
                raise type(exc)(f"realization {i}: {exc}") from exc
        return out

    chunks = np.array_split(np.arange(n), max(1, min(n, 8 * workers)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, chunks))
    else:
        parts = [run_chunk(c) for c in chunks]
    values = np.concatenate(parts)

    if estimator is Estimator.EXACT and strained.any():
        warnings.warn(
            f"{int(strained.sum())} of {n} realizations exceed {AMPLITUDE_GUARD} p0 in amplitude; "
            "the exact estimator carries a nonlinear bias",
            NoiseAmplitudeWarning, stacklevel=2,
        )
    return _summarize(values, variance_prediction(path, model.D), bins)
