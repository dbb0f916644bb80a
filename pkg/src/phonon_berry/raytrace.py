"""Helicity-dependent semiclassical ray tracing.

With the transverse-mode dispersion ``H(r, p) = c(r) |p|`` the equations of
motion are integrated in explicit form::

    dp/dt = -|p| grad c(r)
    dr/dt = c(r) p_hat + sigma hbar (p x dp/dt) / |p|^3

``dp/dt`` in the second line is the value from the first, which is exact to
first order in ``hbar``.  With ``hbar_scale = 0`` this is the classical
geometric-acoustics ray system and both helicities follow the same ray.

Along the trajectory two accumulators advance with every accepted step:

* ``gamma`` -- the Rytov angle ``sigma int cos(theta) dphi``, integrated exactly
  along the great-circle arc joining the step's end directions;
* ``hall``  -- the anomalous displacement ``sigma hbar int (p x dp) / |p|^3``,
  incremented along ``p0 x p1``, which is orthogonal to both end momenta.

Both are second-order accurate in the momentum turning angle per step, which
is capped by ``TraceConfig.max_turn``.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .berry import MomentumPath
from .errors import DomainError, StepSizeUnderflow, ZeroMomentum
from .medium import MediumModel, adiabaticity

__all__ = [
    "PhononState",
    "TraceConfig",
    "Termination",
    "Trajectory",
    "Scenario",
    "hamiltonian",
    "ray_rhs",
    "integrate",
    "hall_shift",
    "helicity_splitting",
    "momentum_path",
    "duct_helix",
    "TRAJECTORY_COLUMNS",
]

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "r_x", "r_y", "r_z", "p_x", "p_y", "p_z",
                      "gamma", "hall_x", "hall_y", "hall_z", "H")

_MIN_MOMENTUM = 1e-300


@dataclass(frozen=True)
class PhononState:
    r: np.ndarray
    p: np.ndarray
    sigma: int = 1
    gamma_acc: float = 0.0
    hall_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("r", "p", "hall_acc"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.sigma not in (1, -1):
            raise ValueError(f"sigma must be +1 or -1, got {self.sigma}")
        if not np.linalg.norm(self.p) > 0:
            raise ZeroMomentum("initial momentum is zero")


@dataclass(frozen=True)
class TraceConfig:
    """Integration settings.

    ``max_turn`` caps the angle (radians) through which the momentum direction
    may turn in one accepted step; it sets the accuracy of the Rytov and Hall
    accumulators.  ``box_half_width`` bounds the domain: leaving the cube
    ``|r_i| <= box_half_width`` ends the trace with ``DomainExit``.
    """

    t_max: float = 10.0
    hbar_scale: float = 1.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_turn: float = 2e-3
    output_stride: int = 1
    box_half_width: float = math.inf

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.hbar_scale >= 0:
            raise ValueError("hbar_scale must be >= 0")
        if not (self.max_step > 0 and self.max_turn > 0):
            raise ValueError("max_step and max_turn must be positive")
        if int(self.output_stride) < 1:
            raise ValueError("output_stride must be >= 1")


class Termination(str, enum.Enum):
    COMPLETED = "Completed"
    DOMAIN_EXIT = "DomainExit"
    ZERO_MOMENTUM = "ZeroMomentum"


@dataclass(frozen=True)
class Trajectory:
    """Sampled trace; arrays are indexed by output sample.

    ``max_hall_residual`` is the largest ``|dhall . p_hat| / |dhall|`` over
    all accepted steps and ``error_estimate`` the summed local error norm of
    the position.
    """

    t: np.ndarray
    r: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    hall: np.ndarray
    H: np.ndarray
    sigma: int
    hbar_scale: float
    terminated: Termination
    n_steps: int
    n_rejected: int
    max_hall_residual: float
    error_estimate: float

    def __len__(self):
        return len(self.t)

    @property
    def states(self):
        return [
            (float(t), PhononState(r, p, self.sigma, float(g), h))
            for t, r, p, g, h in zip(self.t, self.r, self.p, self.gamma, self.hall)
        ]

    @property
    def final_state(self) -> PhononState:
        return PhononState(self.r[-1], self.p[-1], self.sigma, float(self.gamma[-1]), self.hall[-1])

    def max_energy_drift(self) -> float:
        return float(np.max(np.abs(self.H - self.H[0])) / abs(self.H[0]))

    def rows(self):
        return np.column_stack([self.t, self.r, self.p, self.gamma, self.hall, self.H])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for row in self.rows():
                w.writerow([f"{x:.17g}" for x in row])


def hamiltonian(medium: MediumModel, r, p) -> float:
    return medium.speed_and_gradient(r)[0] * float(np.linalg.norm(p))


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _arc_gamma(u0, u1):
    # scalar twin of berry.arc_connection_integral
    n = _cross(u0, u1)
    s = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    if s == 0 or n[2] == 0:
        return 0.0
    n = n / s
    y0 = n[0] * u0[1] - n[1] * u0[0]
    y1 = n[0] * u1[1] - n[1] * u1[0]
    return math.atan(y0 / n[2]) - math.atan(y1 / n[2])


def _rhs(medium, sigma_hbar, y):
    r, p = y[:3], y[3:]
    pm = math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    if pm < _MIN_MOMENTUM:
        raise ZeroMomentum("momentum vanished during integration")
    c, dc = medium.speed_and_gradient(r)
    dp = -pm * dc
    dr = (c / pm) * p
    if sigma_hbar:
        dr = dr + (sigma_hbar / pm**3) * _cross(p, dp)
    return np.concatenate([dr, dp])


def ray_rhs(state: PhononState, medium: MediumModel, hbar_scale: float = 1.0):
    """Return ``(dr/dt, dp/dt)`` for ``state``."""
    d = _rhs(medium, state.sigma * hbar_scale, np.concatenate([state.r, state.p]))
    return d[:3], d[3:]


# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4


_AM = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _AM[_i, :len(_row)] = _row


def _dopri_step(f, y, k1, h):
    k = np.empty((7, y.size))
    k[0] = k1
    for i in range(1, 7):
        yi = y + h * (_AM[i, :i] @ k[:i])
        k[i] = f(yi)
    # row 6 of _A equals _B, so the last stage input is the 5th-order solution (FSAL)
    return yi, k[6], h * (_E @ k)


def _angle(u, v):
    cx = u[1] * v[2] - u[2] * v[1]
    cy = u[2] * v[0] - u[0] * v[2]
    cz = u[0] * v[1] - u[1] * v[0]
    return math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), u[0] * v[0] + u[1] * v[1] + u[2] * v[2])


def _hall_increment(p0, p1):
    """``int (p x dp) / |p|^3`` over the step, along ``p0 x p1``."""
    m0, m1 = np.linalg.norm(p0), np.linalg.norm(p1)
    n = _cross(p0, p1) / (m0 * m1)
    s = np.linalg.norm(n)
    if s == 0:
        return np.zeros(3)
    psi = math.atan2(s, float(p0 @ p1) / (m0 * m1))
    return n * (psi / s) * 0.5 * (1.0 / m0 + 1.0 / m1)


def integrate(state0: PhononState, medium: MediumModel, config: TraceConfig = TraceConfig(),
              t_eval=None) -> Trajectory:
    """Trace a phonon ray with adaptive Dormand-Prince 5(4) steps.

    If ``t_eval`` is given, steps are clipped to land on those times and only
    they are stored; otherwise every ``output_stride``-th accepted step is
    stored, plus the last.

    Raises
    ------
    StepSizeUnderflow
        If the step size collapses (singular or very stiff dynamics).
    DomainError
        If the medium becomes non-physical along the ray.
    """
    sigma_hbar = state0.sigma * config.hbar_scale
    f = lambda y: _rhs(medium, sigma_hbar, y)  # noqa: E731
    t_end = float(config.t_max)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.ndim != 1 or np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_end:
            raise ValueError("t_eval must be increasing within [0, t_max]")

    y = np.concatenate([state0.r, state0.p])
    gamma = float(state0.gamma_acc)
    hall = np.array(state0.hall_acc, dtype=float)
    t = 0.0
    k1 = f(y)
    out_t, out_y, out_g, out_h = [], [], [], []

    def record():
        out_t.append(t)
        out_y.append(y.copy())
        out_g.append(gamma)
        out_h.append(hall.copy())

    eval_idx = 0
    if t_eval is None or t_eval[0] == 0.0:
        record()
        eval_idx = 1 if t_eval is not None else 0

    pm0 = np.linalg.norm(y[3:])
    turn_rate = np.linalg.norm(_cross(y[3:], k1[3:])) / pm0**2
    scale = config.abs_tol + config.rel_tol * np.abs(y)
    h = 0.01 * float(np.linalg.norm(y) / max(np.linalg.norm(k1), 1e-300))
    h = min(h, config.max_step, t_end, 0.5 * config.max_turn / turn_rate if turn_rate > 0 else math.inf)
    h = max(h, 1e-6 * t_end)

    status = Termination.COMPLETED
    n_steps = n_rej = 0
    max_resid = 0.0
    err_sum = 0.0
    box = config.box_half_width
    stride = int(config.output_stride)
    while t < t_end:
        target = t_end if t_eval is None or eval_idx >= len(t_eval) else t_eval[eval_idx]
        clipped = h >= target - t
        step = target - t if clipped else h
        if step <= 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.17g}")
        y_new, k_new, err = _dopri_step(f, y, k1, step)
        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        turn = _angle(y[3:], y_new[3:])
        fac_err = 0.9 * en ** -0.2 if en > 0 else 5.0
        fac_turn = 0.9 * config.max_turn / turn if turn > 0 else 5.0
        if not math.isfinite(en) or not math.isfinite(turn):
            fac_err = fac_turn = 0.1
        if not (en <= 1.0 and turn <= config.max_turn):
            n_rej += 1
            h = step * max(0.1, min(fac_err, fac_turn, 0.9))
            continue

        p0, p1 = y[3:], y_new[3:]
        if np.linalg.norm(p1) < _MIN_MOMENTUM:
            status = Termination.ZERO_MOMENTUM
            break
        u0, u1 = p0 / np.linalg.norm(p0), p1 / np.linalg.norm(p1)
        gamma += state0.sigma * _arc_gamma(u0, u1)
        if sigma_hbar:
            dh = sigma_hbar * _hall_increment(p0, p1)
            dn = np.linalg.norm(dh)
            if dn > 0:
                umid = (u0 + u1) / np.linalg.norm(u0 + u1)
                max_resid = max(max_resid, abs(float(dh @ umid)) / dn)
            hall += dh
        err_sum += float(np.linalg.norm(err[:3]))
        t = target if clipped else t + step
        y, k1 = y_new, k_new
        n_steps += 1
        if not clipped or t_eval is None:
            h = step * min(5.0, fac_err, fac_turn)
        else:
            h = max(h, step)

        on_grid = t_eval is not None and clipped and eval_idx < len(t_eval)
        if on_grid:
            eval_idx += 1
        if np.any(np.abs(y[:3]) > box):
            status = Termination.DOMAIN_EXIT
            if t_eval is None or on_grid:
                record()
            break
        if t_eval is None:
            if n_steps % stride == 0 or t >= t_end:
                record()
        elif on_grid:
            record()

    if t_eval is None and out_t[-1] != t:
        record()

    ys = np.array(out_y)
    rs, ps = ys[:, :3], ys[:, 3:]
    H = np.array([hamiltonian(medium, r, p) for r, p in zip(rs, ps)])
    return Trajectory(
        t=np.array(out_t), r=rs, p=ps, gamma=np.array(out_g), hall=np.array(out_h), H=H,
        sigma=state0.sigma, hbar_scale=config.hbar_scale, terminated=status,
        n_steps=n_steps, n_rejected=n_rej, max_hall_residual=max_resid, error_estimate=err_sum,
    )


def hall_shift(traj: Trajectory) -> np.ndarray:
    """Accumulated anomalous (spin-Hall) displacement at the last sample."""
    return np.array(traj.hall[-1])


def momentum_path(traj: Trajectory, closed: bool = False, closure_tol: float = 1e-9) -> MomentumPath:
    return MomentumPath(traj.t, traj.p, closed, closure_tol)


@dataclass(frozen=True)
class Scenario:
    """A medium plus an initial ray, without a helicity."""

    medium: MediumModel
    r0: tuple
    p0: tuple

    def state(self, sigma: int) -> PhononState:
        return PhononState(self.r0, self.p0, sigma)


def helicity_splitting(scenario: Scenario, config: TraceConfig, t_eval=None):
    """Trace both helicities from the same initial ray.

    Returns ``(traj_plus, traj_minus, separation)`` where ``separation`` is
    ``|r_plus - r_minus|`` on the common output grid ``t_eval`` (201 points
    over ``[0, t_max]`` by default).
    """
    if t_eval is None:
        t_eval = np.linspace(0.0, config.t_max, 201)
    plus = integrate(scenario.state(+1), scenario.medium, config, t_eval)
    minus = integrate(scenario.state(-1), scenario.medium, config, t_eval)
    n = min(len(plus), len(minus))
    sep = np.linalg.norm(plus.r[:n] - minus.r[:n], axis=1)
    return plus, minus, sep


def duct_helix(medium: MediumModel, radius: float, p_mag: float, sigma: int = 1,
               hbar_scale: float = 0.0):
    """Initial state for an exactly helical ray in an axial duct.

    The ray circles the duct axis at ``radius`` while its momentum direction
    sweeps a cone of fixed half-angle about ``+z``.  Force balance together
    with the anomalous velocity fixes the cone angle ``alpha``::

        c sin^2(alpha) - sigma hbar G sin(alpha) cos(alpha) / p = G radius

    with ``G = |grad c|`` on the helix.  Returns ``(state, period, alpha)``,
    ``period`` being one revolution of the momentum.
    """
    if medium.kind.value != "axial_duct":
        raise ValueError("duct_helix needs an axial_duct medium")
    r0 = np.array([radius, 0.0, 0.0])
    c, dc = medium.speed_and_gradient(r0)
    G = float(np.linalg.norm(dc))
    if G == 0:
        raise DomainError("no guiding gradient at this radius")
    sh = sigma * hbar_scale

    def balance(a):
        return c * math.sin(a) ** 2 - sh * G * math.sin(a) * math.cos(a) / p_mag - G * radius

    top = balance(math.pi / 2)
    if abs(top) <= 1e-14 * c:
        alpha = math.pi / 2
    elif top < 0:
        raise DomainError(f"no helical ray at radius {radius!r}: the duct cannot hold it")
    else:
        alpha = brentq(balance, 1e-9, math.pi / 2, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    omega = G / math.sin(alpha)
    eps = adiabaticity(medium, r0, p_mag, hbar_scale if hbar_scale > 0 else 1.0)
    if eps > 1e-2:
        log.warning("duct helix adiabaticity %.3g exceeds 1e-2", eps)
    p0 = p_mag * np.array([0.0, math.sin(alpha), math.cos(alpha)])
    return PhononState(r0, p0, sigma), 2.0 * math.pi / omega, alpha


def with_hbar(config: TraceConfig, hbar_scale: float) -> TraceConfig:
    return replace(config, hbar_scale=hbar_scale)
