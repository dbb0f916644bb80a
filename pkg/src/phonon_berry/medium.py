"""Analytic isotropic media for transverse (shear) waves.

Every model is a dimensionless shape function ``f(r) > 0`` applied to one of
three quantities, selected by ``varies``:

* ``"speed"``    -- ``c(r) = c0 * f(r)``, i.e. ``mu = mu0 f^2`` at constant density
* ``"modulus"``  -- ``mu(r) = mu0 * f(r)``, density constant
* ``"density"``  -- ``rho(r) = rho0 * f(r)``, modulus constant

with ``c0 = sqrt(mu0 / rho0)``.  Shape functions per kind::

    homogeneous      f = 1
    linear_gradient  f = 1 + g . r
    gaussian_lens    f = 1 - a exp(-|r|^2 / w^2)
    axial_duct       f = 1 + kappa^2 (x^2 + y^2) / 2

All quantities are in dimensionless scenario units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "MediumKind",
    "MediumModel",
    "homogeneous",
    "linear_gradient",
    "gaussian_lens",
    "axial_duct",
    "transverse_speed",
    "speed_gradient",
    "adiabaticity",
    "ADIABATIC_THRESHOLD",
]

ADIABATIC_THRESHOLD = 1e-2


class MediumKind(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    LINEAR_GRADIENT = "linear_gradient"
    GAUSSIAN_LENS = "gaussian_lens"
    AXIAL_DUCT = "axial_duct"


_VARIES = ("speed", "modulus", "density")


@dataclass(frozen=True)
class MediumModel:
    kind: MediumKind
    rho0: float = 1.0
    mu0: float = 1.0
    gradient: tuple[float, float, float] = (0.0, 0.0, 0.0)
    amplitude: float = 0.0
    width: float = 1.0
    kappa: float = 0.0
    varies: str = "speed"
    _g: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", MediumKind(self.kind))
        if not (self.rho0 > 0 and self.mu0 > 0):
            raise DomainError(f"rho0 and mu0 must be positive, got {self.rho0}, {self.mu0}")
        if self.varies not in _VARIES:
            raise DomainError(f"varies must be one of {_VARIES}, got {self.varies!r}")
        if self.kind is MediumKind.GAUSSIAN_LENS and not self.width > 0:
            raise DomainError("gaussian_lens width must be positive")
        if self.kind is MediumKind.GAUSSIAN_LENS and self.amplitude >= 1.0:
            # f(0) = 1 - a must stay positive
            raise DomainError("gaussian_lens amplitude must be < 1")
        g = np.asarray(self.gradient, dtype=float)
        if g.shape != (3,):
            raise DomainError("gradient must be a 3-vector")
        object.__setattr__(self, "gradient", tuple(float(x) for x in g))
        object.__setattr__(self, "_g", g)

    @property
    def c0(self) -> float:
        return math.sqrt(self.mu0 / self.rho0)

    def shape(self, r):
        """Return ``(f, grad f)`` at ``r``."""
        r = np.asarray(r, dtype=float)
        kind = self.kind
        if kind is MediumKind.HOMOGENEOUS:
            return 1.0, np.zeros(3)
        if kind is MediumKind.LINEAR_GRADIENT:
            return 1.0 + float(self._g @ r), self._g.copy()
        if kind is MediumKind.GAUSSIAN_LENS:
            w2 = self.width * self.width
            bump = self.amplitude * math.exp(-float(r @ r) / w2)
            return 1.0 - bump, (2.0 * bump / w2) * r
        k2 = self.kappa * self.kappa
        return (
            1.0 + 0.5 * k2 * (r[0] * r[0] + r[1] * r[1]),
            np.array([k2 * r[0], k2 * r[1], 0.0]),
        )

    def density(self, r) -> float:
        f, _ = self.shape(r)
        return self.rho0 * f if self.varies == "density" else self.rho0

    def modulus(self, r) -> float:
        # a speed-parametrized profile c0 f is carried by mu0 f^2 at fixed density
        f, _ = self.shape(r)
        if self.varies == "speed":
            return self.mu0 * f * f
        return self.mu0 * f if self.varies == "modulus" else self.mu0

    def speed_and_gradient(self, r):
        f, df = self.shape(r)
        if not f > 0:
            raise DomainError(
                f"{self.kind.value} profile is non-positive (f={f:.6g}) at r={np.asarray(r).tolist()}"
            )
        c0 = self.c0
        if self.varies == "speed":
            return c0 * f, c0 * df
        s = math.sqrt(f)
        if self.varies == "modulus":
            return c0 * s, (0.5 * c0 / s) * df
        return c0 / s, (-0.5 * c0 / (f * s)) * df


def homogeneous(rho0: float = 1.0, mu0: float = 1.0) -> MediumModel:
    return MediumModel(MediumKind.HOMOGENEOUS, rho0=rho0, mu0=mu0)


def linear_gradient(gradient, rho0=1.0, mu0=1.0, varies="speed") -> MediumModel:
    return MediumModel(MediumKind.LINEAR_GRADIENT, rho0=rho0, mu0=mu0,
                       gradient=tuple(gradient), varies=varies)


def gaussian_lens(amplitude, width, rho0=1.0, mu0=1.0, varies="speed") -> MediumModel:
    return MediumModel(MediumKind.GAUSSIAN_LENS, rho0=rho0, mu0=mu0,
                       amplitude=amplitude, width=width, varies=varies)


def axial_duct(kappa, rho0=1.0, mu0=1.0, varies="speed") -> MediumModel:
    return MediumModel(MediumKind.AXIAL_DUCT, rho0=rho0, mu0=mu0, kappa=kappa, varies=varies)


def transverse_speed(medium: MediumModel, r) -> float:
    """Shear-wave speed ``sqrt(mu(r) / rho(r))``.

    Raises
    ------
    DomainError
        If the profile makes density or modulus non-positive at ``r``.
    """
    return medium.speed_and_gradient(r)[0]


def speed_gradient(medium: MediumModel, r) -> np.ndarray:
    """Exact analytic gradient of :func:`transverse_speed`."""
    return medium.speed_and_gradient(r)[1]


def adiabaticity(medium: MediumModel, r, p_mag: float, hbar_scale: float = 1.0) -> float:
    """Fractional change of the speed over one reduced wavelength.

    ``eps = |grad c| / (c k)`` with local wavenumber ``k = p_mag / hbar_scale``.
    Values above :data:`ADIABATIC_THRESHOLD` mean the transverse/longitudinal
    decoupling assumed by the ray equations is questionable.
    """
    if not p_mag > 0:
        raise DomainError(f"p_mag must be positive, got {p_mag}")
    c, dc = medium.speed_and_gradient(r)
    return float(np.linalg.norm(dc)) * hbar_scale / (c * p_mag)
