"""Momentum-space geometry of transverse-phonon helicity states.

The helicity eigenstates of the spin-orbit Hamiltonian ``sigma_i p_i`` carry a
monopole Berry curvature ``-sigma p / |p|^3``.  In the gauge used here the
connection is

    A(p) = p_z / (|p| (p_x^2 + p_y^2)) * (-p_y, p_x, 0)

which is singular on the polar axis (the "gauge string").  The Rytov rotation
angle of the polarization plane along a momentum path ``C`` is the line
integral ``sigma * int_C A . dp = sigma * int_C cos(theta) dphi``.

Three estimators are provided and are meant to be used against each other:

* :func:`rytov_line_integral` -- integrates the connection analytically along
  each great-circle segment between consecutive samples.
* :func:`rytov_solid_angle` -- gauge-invariant form ``2 pi w - Omega`` with the
  solid angle ``Omega`` summed from L'Huilier spherical excesses of a fan of
  triangles.
* :func:`transport_polarization` -- parallel transport of a real polarization
  vector kept transverse to ``p``; returns its net rotation.

Sampled paths are interpreted as geodesic polygons on the unit sphere of
directions, so the three estimators agree to rounding error on any path.  The
price is that a sampled smooth curve is only reproduced to
``O(step^2)``; see :func:`circle_path` for a resolution guide.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AntipodalSegment,
    AxisSingularity,
    NotClosed,
    NotTransverse,
    ResolutionError,
    StillSingular,
    ZeroMomentum,
)

__all__ = [
    "MomentumPath",
    "PhaseMethod",
    "PhaseResult",
    "circle_path",
    "connection",
    "curvature",
    "curvature_flux",
    "rytov_line_integral",
    "rytov_solid_angle",
    "transport_polarization",
    "rytov_transport",
    "rotate_gauge",
    "arc_connection_integral",
    "wrap_angle",
]

log = logging.getLogger(__name__)

AXIS_GUARD = 1e-12
CLOSURE_TOL = 1e-9
MAX_STEP = 0.1

_TWO_PI = 2.0 * math.pi
_ZHAT = np.array([0.0, 0.0, 1.0])


def wrap_angle(x):
    """Map angles to ``(-pi, pi]``."""
    y = np.remainder(np.asarray(x, dtype=float) + math.pi, _TWO_PI) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def _unit(p):
    p = np.asarray(p, dtype=float)
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def _angle_between(u, v):
    """Angle between unit vectors, accurate for both tiny and near-pi angles."""
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(cross, np.sum(u * v, axis=-1))


# -- paths -------------------------------------------------------------------


@dataclass(frozen=True)
class MomentumPath:
    """Sampled momentum curve ``p(t)``.

    ``closed`` declares the path cyclic; the first and last directions must
    then coincide to within ``closure_tol`` radians (checked by the
    estimators, which raise :class:`NotClosed` otherwise).
    """

    t: np.ndarray
    p: np.ndarray
    closed: bool = False
    closure_tol: float = CLOSURE_TOL

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("p must have shape (n, 3)")
        if t.shape != (p.shape[0],):
            raise ValueError("t and p must have the same number of samples")
        if len(t) < 3:
            raise ValueError("a momentum path needs at least 3 samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(np.linalg.norm(p, axis=1) == 0):
            raise ZeroMomentum("momentum path contains a zero-momentum sample")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    def __len__(self):
        return len(self.t)

    @property
    def directions(self) -> np.ndarray:
        return _unit(self.p)

    def closure_gap(self) -> float:
        u = self.directions
        return float(_angle_between(u[0], u[-1]))

    def reversed(self) -> "MomentumPath":
        return MomentumPath(self.t[-1] - self.t[::-1], self.p[::-1], self.closed, self.closure_tol)

    def reparametrized(self, func) -> "MomentumPath":
        """Same samples on a new clock ``func(t)`` (must be strictly increasing)."""
        return MomentumPath(func(self.t), self.p, self.closed, self.closure_tol)

    def rotated(self, rotation: np.ndarray) -> "MomentumPath":
        return MomentumPath(self.t, self.p @ np.asarray(rotation).T, self.closed, self.closure_tol)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "p_x", "p_y", "p_z"])
            for ti, pi in zip(self.t, self.p):
                w.writerow([f"{ti:.17g}"] + [f"{x:.17g}" for x in pi])

    @classmethod
    def from_csv(cls, path, closed: bool | None = None, closure_tol: float = CLOSURE_TOL):
        """Read ``t, p_x, p_y, p_z`` columns (header row required).

        With ``closed=None`` the path is declared closed when its end
        directions coincide within ``closure_tol``.
        """
        with open(Path(path), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        want = ["t", "p_x", "p_y", "p_z"]
        if header != want:
            raise ValueError(f"{path}: header must be {','.join(want)}, got {','.join(header)}")
        data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
        if data.ndim != 2 or data.shape[1] != 4:
            raise ValueError(f"{path}: every row needs 4 columns")
        if closed is None:
            u0, u1 = _unit(data[0, 1:]), _unit(data[-1, 1:])
            closed = bool(_angle_between(u0, u1) <= closure_tol)
        return cls(data[:, 0], data[:, 1:], closed, closure_tol)


def circle_path(theta: float, n: int = 4096, windings: int = 1, p_mag: float = 1.0,
                period: float = 1.0, phase: float = 0.0) -> MomentumPath:
    """Closed constant-zenith loop, azimuth advancing ``2 pi windings``.

    As a geodesic polygon the loop's phase differs from ``2 pi cos(theta)`` by
    about ``2 pi cos(theta) sin(theta)^2 dphi^2 / 12``; ``n = 4096`` keeps that
    below ``5e-7`` for one winding.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    t = np.linspace(0.0, period, n)
    phi = phase + _TWO_PI * windings * t / period
    st, ct = math.sin(theta), math.cos(theta)
    p = p_mag * np.column_stack([st * np.cos(phi), st * np.sin(phi), np.full(n, ct)])
    p[-1] = p[0]
    return MomentumPath(t, p, closed=True)


# -- local geometry ------------------------------------------------------------


def connection(p, axis_guard: float = AXIS_GUARD) -> np.ndarray:
    """Berry connection ``A(p)`` of the positive-helicity state.

    Raises
    ------
    AxisSingularity
        If ``p`` lies within ``axis_guard * |p|`` of the polar axis.
    """
    p = np.asarray(p, dtype=float)
    pm = float(np.linalg.norm(p))
    if pm == 0:
        raise ZeroMomentum("connection undefined at p = 0")
    rho2 = p[0] * p[0] + p[1] * p[1]
    if rho2 <= (axis_guard * pm) ** 2:
        raise AxisSingularity(f"p={p.tolist()} is on the gauge string; rotate the gauge or use the solid-angle estimator")
    return (p[2] / (pm * rho2)) * np.array([-p[1], p[0], 0.0])


def curvature(p, sigma: int = 1) -> np.ndarray:
    """Monopole Berry curvature ``-sigma p / |p|^3``."""
    p = np.asarray(p, dtype=float)
    pm = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(pm == 0):
        raise ZeroMomentum("curvature undefined at p = 0")
    return -sigma * p / pm**3


def curvature_flux(sigma: int = 1, radius: float = 1.0, rotation=None, degree: int = 35) -> float:
    """Flux of :func:`curvature` through an origin-centred sphere.

    Uses a Lebedev rule of the given degree, optionally rotated.
    """
    from scipy.integrate import lebedev_rule

    x, w = lebedev_rule(degree)
    nodes = x.T
    if rotation is not None:
        nodes = nodes @ np.asarray(rotation).T
    pts = radius * nodes
    field = curvature(pts, sigma)
    return float(4.0 * math.pi * radius**2 * np.sum(w * np.sum(field * nodes, axis=1)) / np.sum(w))


# -- phase estimators ----------------------------------------------------------


class PhaseMethod(str, enum.Enum):
    LINE_INTEGRAL = "LineIntegral"
    SOLID_ANGLE = "SolidAngle"
    POLARIZATION_TRANSPORT = "PolarizationTransport"


@dataclass(frozen=True)
class PhaseResult:
    gamma: float
    method: PhaseMethod
    winding: int | None = None
    closure_correction: float = 0.0
    solid_angle: float | None = None


def arc_connection_integral(u0, u1):
    """Exact ``int cos(theta) dphi`` along great-circle arcs ``u0 -> u1``.

    Works on arrays of unit vectors of shape ``(..., 3)``.  Along an arc with
    unit normal ``n`` the integrand is ``n_z u_z / (1 - u_z^2)`` per unit arc
    length, whose primitive is ``-atan((n x u)_z / n_z)``.  Arcs lying in a
    meridian plane contribute zero.
    """
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    n = np.cross(u0, u1)
    s = np.linalg.norm(n, axis=-1, keepdims=True)
    nonzero = s[..., 0] > 0
    n = np.divide(n, s, out=np.zeros_like(n), where=s > 0)
    nz = n[..., 2]
    y0 = np.cross(n, u0)[..., 2]
    y1 = np.cross(n, u1)[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = np.arctan(np.divide(y0, nz))
        f1 = np.arctan(np.divide(y1, nz))
    out = np.where(nonzero & (nz != 0), f0 - f1, 0.0)
    return float(out) if out.ndim == 0 else out


def _azimuths(u, axis_guard):
    """Azimuths with the value frozen through samples on the polar axis."""
    rho = np.hypot(u[:, 0], u[:, 1])
    phi = np.arctan2(u[:, 1], u[:, 0])
    on_axis = rho <= axis_guard
    if np.any(on_axis):
        phi = phi.copy()
        last = 0.0
        for i in range(len(phi)):
            if on_axis[i]:
                phi[i] = last
            else:
                last = phi[i]
    return phi


def _winding(u, axis_guard) -> int:
    dphi = wrap_angle(np.diff(_azimuths(u, axis_guard)))
    return int(round(float(np.sum(dphi)) / _TWO_PI))


def _check_closed(path: MomentumPath):
    if not path.closed:
        raise NotClosed("path is not declared closed")
    gap = path.closure_gap()
    if gap > path.closure_tol:
        raise NotClosed(f"closed path endpoints differ by {gap:.3e} rad (tolerance {path.closure_tol:.1e})")


def _check_resolution(u, max_step):
    if max_step is None:
        return
    steps = _angle_between(u[:-1], u[1:])
    worst = float(np.max(steps))
    if worst >= max_step:
        i = int(np.argmax(steps))
        raise ResolutionError(
            f"angular step {worst:.3g} rad between samples {i} and {i + 1} exceeds {max_step:g}; resample the path"
        )


def rytov_line_integral(path: MomentumPath, sigma: int = 1, axis_guard: float = AXIS_GUARD,
                        max_step: float | None = MAX_STEP) -> PhaseResult:
    """Rytov angle as the line integral of the connection around a closed path.

    The result is winding-aware (not reduced modulo ``2 pi``).

    Raises
    ------
    NotClosed
        For open paths; use :func:`rytov_solid_angle`, which closes them.
    AxisSingularity
        If any sample sits on the polar axis; see :func:`rotate_gauge`.
    """
    _check_closed(path)
    u = path.directions
    rho = np.hypot(u[:, 0], u[:, 1])
    bad = np.flatnonzero(rho <= axis_guard)
    if bad.size:
        raise AxisSingularity(f"sample {int(bad[0])} lies on the polar axis; rotate the gauge")
    _check_resolution(u, max_step)
    gamma = float(np.sum(arc_connection_integral(u[:-1], u[1:])))
    return PhaseResult(sigma * gamma, PhaseMethod.LINE_INTEGRAL, _winding(u, axis_guard), 0.0)


def _lhuilier(a, b, c):
    s = 0.5 * (a + b + c)
    prod = np.tan(0.5 * s) * np.tan(0.5 * (s - a)) * np.tan(0.5 * (s - b)) * np.tan(0.5 * (s - c))
    return 4.0 * np.arctan(np.sqrt(np.clip(prod, 0.0, None)))


def signed_solid_angle(u, apex=_ZHAT):
    """Signed area swept by the segments ``u[i] -> u[i+1]`` seen from ``apex``.

    Sum of spherical excesses of the fan triangles ``(apex, u[i], u[i+1])``,
    positive for counter-clockwise traversal about the apex.
    """
    u0, u1 = u[:-1], u[1:]
    a = _angle_between(u0, u1)
    b = _angle_between(apex, u1)
    c = _angle_between(apex, u0)
    excess = _lhuilier(a, b, c)
    orient = np.sign(np.cross(u0, u1) @ apex)
    return float(np.sum(orient * excess))


def rytov_solid_angle(path: MomentumPath, sigma: int = 1, axis_guard: float = AXIS_GUARD,
                      max_step: float | None = MAX_STEP, antipodal_tol: float = 1e-9) -> PhaseResult:
    """Rytov angle from the enclosed solid angle, ``sigma (2 pi w - Omega)``.

    ``Omega`` is measured from the north pole and ``w`` is the azimuthal
    winding about the polar axis.  Open paths are first closed by the
    geodesic between their end directions; a geodesic arc contributes no
    phase of its own, so ``closure_correction`` is zero and the arc length is
    logged.
    """
    u = path.directions
    if path.closed:
        _check_closed(path)
    else:
        arc = float(_angle_between(u[-1], u[0]))
        log.info("closing open path with geodesic arc of %.6g rad", arc)
        u = np.vstack([u, u[:1]])
    steps = _angle_between(u[:-1], u[1:])
    anti = np.flatnonzero(steps >= math.pi - antipodal_tol)
    if anti.size:
        raise AntipodalSegment(f"samples {int(anti[0])} and {int(anti[0]) + 1} are antipodal")
    _check_resolution(u if path.closed else u[:-1], max_step)
    omega = signed_solid_angle(u)
    w = _winding(u, axis_guard)
    return PhaseResult(sigma * (_TWO_PI * w - omega), PhaseMethod.SOLID_ANGLE, w, 0.0, omega)


def _quat_mul(a, b):
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def _compose(q):
    """Product ``q[n-1] ... q[1] q[0]`` by pairwise reduction."""
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    while len(q) > 1:
        if len(q) % 2:
            q = np.vstack([q, identity])
        q = _quat_mul(q[1::2], q[0::2])
    return q[0]


def _quat_rotate(q, v):
    w, xyz = q[0], q[1:]
    t = 2.0 * np.cross(xyz, v)
    return v + w * t + np.cross(xyz, t)


def transport_polarization(path: MomentumPath, e0=None, max_step: float | None = MAX_STEP) -> float:
    """Net rotation of a parallel-transported transverse polarization vector.

    ``e`` is carried along each geodesic segment by the rotation that takes
    one sample direction to the next, which solves
    ``de/dt = -(e . dp_hat/dt) p_hat`` exactly on that segment.  The return
    value is the angle, counter-clockwise about ``p_hat(0)``, that takes the
    final vector back to ``e0``; it equals the positive-helicity Rytov angle
    modulo ``2 pi`` and lies in ``(-pi, pi]``.
    """
    _check_closed(path)
    u = path.directions
    _check_resolution(u, max_step)
    if e0 is None:
        e0 = np.cross(u[0], [1.0, 0.0, 0.0] if abs(u[0, 0]) < 0.9 else [0.0, 1.0, 0.0])
        e0 = e0 / np.linalg.norm(e0)
    e0 = np.asarray(e0, dtype=float)
    if abs(np.linalg.norm(e0) - 1.0) > 1e-10:
        raise NotTransverse("e0 must be a unit vector")
    if abs(float(e0 @ u[0])) > 1e-10:
        raise NotTransverse(f"e0 is not transverse to p(0): e0.p_hat = {float(e0 @ u[0]):.3e}")
    axis = np.cross(u[:-1], u[1:])
    s = np.linalg.norm(axis, axis=1, keepdims=True)
    axis = np.divide(axis, s, out=np.zeros_like(axis), where=s > 0)
    half = 0.5 * _angle_between(u[:-1], u[1:])
    q = np.column_stack([np.cos(half), np.sin(half)[:, None] * axis])
    e = _quat_rotate(_compose(q), e0)
    e = e - (e @ u[0]) * u[0]
    e /= np.linalg.norm(e)
    return float(math.atan2(float(u[0] @ np.cross(e, e0)), float(e @ e0)))


def rytov_transport(path: MomentumPath, sigma: int = 1, e0=None,
                    max_step: float | None = MAX_STEP) -> PhaseResult:
    """:func:`transport_polarization` packaged as a :class:`PhaseResult`."""
    angle = transport_polarization(path, e0, max_step)
    return PhaseResult(sigma * angle, PhaseMethod.POLARIZATION_TRANSPORT)


def _rotation_to_z(axis):
    a = _unit(axis)
    v = np.cross(a, _ZHAT)
    s = float(np.linalg.norm(v))
    c = float(a @ _ZHAT)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = v / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def rotate_gauge(path: MomentumPath, axis, axis_guard: float = AXIS_GUARD) -> MomentumPath:
    """Rigidly rotate a path so that ``axis`` becomes the new polar axis.

    Use when samples sit on (or near) the gauge string of the connection.
    The phase modulo ``2 pi`` is unchanged by the rotation.

    Raises
    ------
    StillSingular
        If the rotated path still touches the polar axis.
    """
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError("axis must be a unit vector")
    rotated = path.rotated(_rotation_to_z(axis))
    u = rotated.directions
    rho = np.hypot(u[:, 0], u[:, 1])
    if np.any(rho <= axis_guard):
        raise StillSingular(f"axis {axis.tolist()} leaves sample {int(np.argmin(rho))} on the gauge string")
    return rotated
