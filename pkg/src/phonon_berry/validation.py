"""Built-in acceptance suite, shared by ``phonon-berry validate`` and the tests.

Each ``criterion_*`` function runs one check at its fixed tolerance and
returns a :class:`CriterionResult`.  Metrics are deterministic for a given
seed; wall-clock runtimes are reported separately so that report artifacts
stay byte-identical between runs.
"""

from __future__ import annotations

import hashlib
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.spatial.transform import Rotation

from . import berry, noise, raytrace
from .medium import axial_duct, gaussian_lens

__all__ = ["CriterionResult", "Suite", "CRITERIA", "run_all", "write_artifacts"]

TWO_PI = 2.0 * math.pi


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict
    runtime: float = 0.0
    runtime_limit: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] {self.number:2d} {self.name}: {parts}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _mod2pi_diff(a, b):
    return abs(berry.wrap_angle(a - b))


# -- scenario constants ----------------------------------------------------------

LOOP_THETAS = (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)
LOOP_SAMPLES = 8192

DUCT_KAPPA, DUCT_RADIUS, DUCT_P = 1.0, 1.0, 100.0

LENS = dict(amplitude=0.2, width=5.0)
LENS_R0, LENS_P0, LENS_T = (-20.0, 1.0, 0.5), (1.0, 0.0, 0.0), 40.0
SPLIT_HBARS = (1e-3, 2e-3, 4e-3)

NOISE_P0, NOISE_THETA, NOISE_T, NOISE_D, NOISE_DT = 1.0, math.pi / 3, 100.0, 1e-4, 0.01
ENSEMBLE_N = 10_000
LADDER_T = (10.0, 20.0, 40.0, 80.0)
GAUSS_N, GAUSS_T = 100_000, 10.0
CONSIST_N, CONSIST_DT = 1000, 0.1
CONSIST_D = (1e-5, 1e-4, 1e-3)


@dataclass
class Suite:
    """Holds the seed and caches ensembles shared between criteria."""

    seed: int = 20240611
    workers: int = 1
    _cache: dict = field(default_factory=dict)

    def base_ensemble(self):
        if "base" not in self._cache:
            path = noise.PrescribedPath(NOISE_P0, NOISE_THETA, NOISE_T)
            model = noise.NoiseModel(NOISE_D, self.seed, NOISE_DT)
            self._cache["base"] = noise.run_ensemble(path, model, ENSEMBLE_N, "linearized", self.workers)
        return self._cache["base"]

    def duct_trace(self):
        if "duct" not in self._cache:
            medium = axial_duct(DUCT_KAPPA)
            state, period, alpha = raytrace.duct_helix(medium, DUCT_RADIUS, DUCT_P, +1, 1.0)
            t_eval = np.linspace(0.0, 5 * period, 5 * 40 + 1)
            cfg = raytrace.TraceConfig(t_max=5 * period, hbar_scale=1.0)
            self._cache["duct"] = (raytrace.integrate(state, medium, cfg, t_eval), period, alpha)
        return self._cache["duct"]


def criterion_rytov_loops(suite: Suite) -> CriterionResult:
    worst_abs = worst_pair = 0.0
    for theta in LOOP_THETAS:
        path = berry.circle_path(theta, LOOP_SAMPLES)
        expected = TWO_PI * math.cos(theta)
        g_line = berry.rytov_line_integral(path).gamma
        g_solid = berry.rytov_solid_angle(path).gamma
        g_pt = berry.transport_polarization(path)
        worst_abs = max(worst_abs, abs(g_line - expected), abs(g_solid - expected), _mod2pi_diff(g_pt, expected))
        worst_pair = max(worst_pair, _mod2pi_diff(g_line, g_solid), _mod2pi_diff(g_line, g_pt),
                         _mod2pi_diff(g_solid, g_pt))
    ok = worst_abs < 1e-6 and worst_pair < 1e-6
    return CriterionResult(1, "Rytov law on constant-zenith loops", ok,
                           {"max_abs_error": worst_abs, "max_pairwise": worst_pair}, runtime_limit=1.0)


def fd_curl(func, p, h):
    """Central-difference curl of a vector field at ``p``."""
    J = np.empty((3, 3))
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = h
        J[:, j] = (func(p + dp) - func(p - dp)) / (2 * h)
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def random_offaxis_points(rng, n, min_sin=0.3):
    pts = []
    while len(pts) < n:
        v = rng.normal(size=3)
        u = v / np.linalg.norm(v)
        if math.hypot(u[0], u[1]) >= min_sin:
            pts.append(u * rng.uniform(0.5, 2.0))
    return np.array(pts)


def criterion_monopole(suite: Suite) -> CriterionResult:
    rng = np.random.default_rng([suite.seed, 2])
    worst_curl = 0.0
    for p in random_offaxis_points(rng, 1000):
        h = 1e-4 * np.linalg.norm(p)
        curl = fd_curl(berry.connection, p, h)
        F = berry.curvature(p, +1)
        worst_curl = max(worst_curl, float(np.linalg.norm(curl - F) / np.linalg.norm(F)))
    worst_flux = 0.0
    rots = Rotation.random(10, random_state=np.random.default_rng([suite.seed, 3]))
    radii = rng.uniform(0.1, 10.0, 10)
    for k in range(10):
        sigma = 1 if k % 2 == 0 else -1
        flux = berry.curvature_flux(sigma, radii[k], rots[k].as_matrix())
        worst_flux = max(worst_flux, abs(flux + 4 * math.pi * sigma) / (4 * math.pi))
    ok = worst_curl < 1e-5 and worst_flux < 1e-6
    return CriterionResult(2, "Monopole curl and flux", ok,
                           {"max_curl_rel_error": worst_curl, "max_flux_rel_error": worst_flux},
                           runtime_limit=5.0)


def criterion_hall(suite: Suite) -> CriterionResult:
    medium = axial_duct(DUCT_KAPPA)
    state, period, alpha = raytrace.duct_helix(medium, DUCT_RADIUS, DUCT_P, +1, 1.0)
    traj = raytrace.integrate(state, medium, raytrace.TraceConfig(t_max=period, hbar_scale=1.0), [period])
    expected = np.array([0.0, 0.0, TWO_PI * math.sin(alpha) ** 2 / DUCT_P])
    rel = float(np.linalg.norm(raytrace.hall_shift(traj) - expected) / np.linalg.norm(expected))
    ok = rel < 1e-6 and traj.max_hall_residual < 1e-10
    return CriterionResult(3, "Hall displacement over one cone revolution", ok,
                           {"rel_error": rel, "max_orthogonality_residual": traj.max_hall_residual},
                           runtime_limit=1.0)


def criterion_classical_limit(suite: Suite) -> CriterionResult:
    scenario = raytrace.Scenario(gaussian_lens(**LENS), LENS_R0, LENS_P0)
    cfg = raytrace.TraceConfig(t_max=LENS_T, hbar_scale=0.0)
    plus, minus, sep = raytrace.helicity_splitting(scenario, cfg)
    coincide = float(max(np.max(np.abs(plus.r - minus.r)), np.max(np.abs(plus.p - minus.p))))
    finals = []
    for hb in SPLIT_HBARS:
        _, _, sep = raytrace.helicity_splitting(scenario, raytrace.with_hbar(cfg, hb))
        finals.append(sep[-1])
    fit = stats.linregress(SPLIT_HBARS, finals)
    slope_rel_err = float(fit.stderr / abs(fit.slope))
    intercept_rel = float(abs(fit.intercept) / finals[0])
    ok = coincide <= 10 * cfg.rel_tol and slope_rel_err < 0.01 and intercept_rel < 0.01
    return CriterionResult(4, "Classical limit and linear helicity splitting", ok,
                           {"max_classical_deviation": coincide, "slope": float(fit.slope),
                            "slope_rel_stderr": slope_rel_err, "intercept_rel": intercept_rel},
                           runtime_limit=10.0)


def criterion_duct_rytov(suite: Suite) -> CriterionResult:
    traj, period, _ = suite.duct_trace()
    theta = np.arccos(traj.p[:, 2] / np.linalg.norm(traj.p, axis=1))
    theta_cone = float(np.mean(theta))
    per_rev = np.diff(traj.gamma[::40])
    err = float(np.max(np.abs(per_rev - TWO_PI * math.cos(theta_cone))))
    drift = traj.max_energy_drift()
    ok = len(per_rev) == 5 and err < 1e-5 and drift < 1e-8
    return CriterionResult(5, "Rytov angle along a ducted spiral ray", ok,
                           {"revolutions": len(per_rev), "theta_cone": theta_cone,
                            "max_per_rev_error": err, "H_drift": drift},
                           runtime_limit=10.0)


def criterion_noise_mean(suite: Suite) -> CriterionResult:
    s = suite.base_ensemble()
    sem = math.sqrt(s.variance / s.n)
    ok = abs(s.mean) < 3 * sem
    return CriterionResult(6, "Zero mean of the Rytov deviation", ok,
                           {"mean": s.mean, "three_sem": 3 * sem}, runtime_limit=60.0)


def criterion_variance_law(suite: Suite) -> CriterionResult:
    s = suite.base_ensemble()
    rel = abs(s.variance / s.predicted_variance - 1.0)
    ok = rel < 0.05
    return CriterionResult(7, "Variance law", ok,
                           {"variance": s.variance, "predicted": s.predicted_variance, "rel_error": rel},
                           runtime_limit=60.0)


def criterion_inverse_T(suite: Suite) -> CriterionResult:
    variances = []
    for k, T in enumerate(LADDER_T):
        path = noise.PrescribedPath(NOISE_P0, NOISE_THETA, T)
        model = noise.NoiseModel(NOISE_D, suite.seed + 10 + k, NOISE_DT)
        variances.append(noise.run_ensemble(path, model, ENSEMBLE_N, "linearized", suite.workers).variance)
    slope = float(np.polyfit(np.log(LADDER_T), np.log(variances), 1)[0])
    base = suite.base_ensemble()
    path = noise.PrescribedPath(NOISE_P0, NOISE_THETA, NOISE_T)
    double = noise.run_ensemble(path, noise.NoiseModel(2 * NOISE_D, suite.seed + 20, NOISE_DT),
                                ENSEMBLE_N, "linearized", suite.workers)
    ratio = double.variance / base.variance
    # two independent variance estimates, each with relative s.e. sqrt(2/(n-1))
    ratio_tol = 3.0 * 2.0 * math.sqrt(2.0 * 2.0 / (ENSEMBLE_N - 1))
    ok = abs(slope + 1.0) <= 0.05 and abs(ratio - 2.0) <= ratio_tol
    return CriterionResult(8, "1/T scaling and linearity in D", ok,
                           {"loglog_slope": slope, "variance_ratio_2D": ratio, "ratio_tol": ratio_tol},
                           runtime_limit=300.0)


def criterion_gaussianity(suite: Suite) -> CriterionResult:
    path = noise.PrescribedPath(NOISE_P0, NOISE_THETA, GAUSS_T)
    model = noise.NoiseModel(NOISE_D, suite.seed + 30, NOISE_DT)
    s = noise.run_ensemble(path, model, GAUSS_N, "linearized", suite.workers)
    ok = abs(s.skewness) < 0.08 and abs(s.excess_kurtosis) < 0.05
    return CriterionResult(9, "Gaussianity of the linearized deviation", ok,
                           {"skewness": s.skewness, "excess_kurtosis": s.excess_kurtosis},
                           runtime_limit=300.0)


def estimator_discrepancy(seed, D_values=CONSIST_D, n=CONSIST_N, dt=CONSIST_DT):
    """Mean-square Exact-minus-Linearized difference on shared realizations.

    Returns ``(absolute, relative)`` arrays; ``relative`` is normalized by the
    mean-square linearized deviation.
    """
    path = noise.PrescribedPath(NOISE_P0, NOISE_THETA, NOISE_T)
    absolute, relative = [], []
    for D in D_values:
        model = noise.NoiseModel(D, seed, dt)
        diff = np.empty(n)
        lin = np.empty(n)
        for i in range(n):
            N = noise.noise_realization(path, model, i)
            lin[i] = noise.delta_gamma_linearized(path, N)
            diff[i] = noise.delta_gamma_exact(path, N, warn=False) - lin[i]
        absolute.append(float(np.mean(diff**2)))
        relative.append(float(np.mean(diff**2) / np.mean(lin**2)))
    return np.array(absolute), np.array(relative)


def criterion_estimator_consistency(suite: Suite) -> CriterionResult:
    absolute, relative = estimator_discrepancy(suite.seed + 40)
    logD = np.log(CONSIST_D)
    slope_rel = float(np.polyfit(logD, np.log(relative), 1)[0])
    slope_abs = float(np.polyfit(logD, np.log(absolute), 1)[0])
    ok = abs(slope_rel - 1.0) <= 0.1
    return CriterionResult(10, "Exact vs linearized estimator consistency", ok,
                           {"relative_ms_slope": slope_rel, "absolute_ms_slope": slope_abs},
                           runtime_limit=60.0)


CRITERIA = (
    criterion_rytov_loops,
    criterion_monopole,
    criterion_hall,
    criterion_classical_limit,
    criterion_duct_rytov,
    criterion_noise_mean,
    criterion_variance_law,
    criterion_inverse_T,
    criterion_gaussianity,
    criterion_estimator_consistency,
)


def _timed(func, suite):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", noise.NoiseAmplitudeWarning)
        result = func(suite)
    result.runtime = time.perf_counter() - t0
    return result


def artifact_texts(suite: Suite, results) -> dict:
    """Deterministic artifact contents keyed by file name."""
    report = "\n".join(r.line() for r in results) + "\n"
    traj, _, _ = suite.duct_trace()
    rows = [",".join(raytrace.TRAJECTORY_COLUMNS)]
    rows += [",".join(f"{x:.17g}" for x in row) for row in traj.rows()]
    return {
        "report.txt": report,
        "duct_trajectory.csv": "\n".join(rows) + "\n",
        "ensemble.txt": suite.base_ensemble().to_text(),
    }


def criterion_determinism(suite: Suite, written: dict) -> CriterionResult:
    """Recompute the stochastic and traced artifacts from scratch and compare bytes."""
    fresh = Suite(seed=suite.seed, workers=max(2, suite.workers))
    same_ensemble = np.array_equal(fresh.base_ensemble().values, suite.base_ensemble().values)
    same_trace = artifact_texts(fresh, [])["duct_trajectory.csv"] == written["duct_trajectory.csv"]
    same_summary = fresh.base_ensemble().to_text() == written["ensemble.txt"]
    digest = hashlib.sha256("".join(written[k] for k in sorted(written)).encode()).hexdigest()
    ok = same_ensemble and same_trace and same_summary
    return CriterionResult(11, "Determinism of artifacts", ok,
                           {"ensemble_identical": same_ensemble, "trajectory_identical": same_trace,
                            "summary_identical": same_summary, "digest_without_this_line": digest})


def run_all(seed: int = 20240611, workers: int = 1, progress=None):
    """Run criteria 1-11; returns ``(results, artifacts)``."""
    suite = Suite(seed=seed, workers=workers)
    results = []
    for func in CRITERIA:
        r = _timed(func, suite)
        results.append(r)
        if progress:
            progress(r)
    texts = artifact_texts(suite, results)
    det = _timed(lambda s: criterion_determinism(s, texts), suite)
    results.append(det)
    if progress:
        progress(det)
    texts["report.txt"] += det.line() + "\n"
    return results, texts


def write_artifacts(out_dir, texts: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
