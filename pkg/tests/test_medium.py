import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_berry.errors import DomainError
from phonon_berry.medium import (
    ADIABATIC_THRESHOLD,
    adiabaticity,
    axial_duct,
    gaussian_lens,
    homogeneous,
    linear_gradient,
    speed_gradient,
    transverse_speed,
)

MEDIA = {
    "homogeneous": homogeneous(rho0=2.0, mu0=3.0),
    "linear_speed": linear_gradient((0.01, -0.02, 0.03)),
    "linear_modulus": linear_gradient((0.01, -0.02, 0.03), varies="modulus"),
    "linear_density": linear_gradient((0.01, -0.02, 0.03), rho0=1.5, varies="density"),
    "lens_speed": gaussian_lens(0.3, 2.0),
    "lens_modulus": gaussian_lens(0.3, 2.0, varies="modulus"),
    "lens_density": gaussian_lens(-0.3, 2.0, varies="density"),
    "duct_speed": axial_duct(0.5),
    "duct_modulus": axial_duct(0.5, mu0=4.0, varies="modulus"),
    "duct_density": axial_duct(0.5, varies="density"),
}


def test_speed_examples():
    assert transverse_speed(homogeneous(1.0, 1.0), (5, -2, 7)) == 1.0
    assert transverse_speed(linear_gradient((0, 0, 0.01)), (0, 0, 10)) == pytest.approx(1.1, rel=1e-15)
    assert transverse_speed(gaussian_lens(0.1, 1.0), (0, 0, 0)) == pytest.approx(0.9, rel=1e-15)


def test_gradient_examples():
    assert np.array_equal(speed_gradient(homogeneous(), (3, 1, 4)), np.zeros(3))
    np.testing.assert_allclose(speed_gradient(linear_gradient((0, 0, 0.01)), (1, 2, 3)), [0, 0, 0.01])
    g = speed_gradient(gaussian_lens(0.1, 1.0), (1, 0, 0))
    np.testing.assert_allclose(g, [0.2 * math.exp(-1), 0, 0], rtol=1e-14, atol=1e-300)


def test_speed_is_sqrt_mu_over_rho():
    for m in MEDIA.values():
        r = np.array([0.3, -1.2, 0.7])
        assert transverse_speed(m, r) == pytest.approx(math.sqrt(m.modulus(r) / m.density(r)), rel=1e-14)


@pytest.mark.parametrize("name", sorted(MEDIA))
def test_gradient_matches_finite_differences(name):
    m = MEDIA[name]
    rng = np.random.default_rng(7)
    pts = rng.uniform(-4, 4, size=(1000, 3))
    h = 1e-5
    worst = 0.0
    for r in pts:
        g = speed_gradient(m, r)
        fd = np.array([
            (transverse_speed(m, r + h * e) - transverse_speed(m, r - h * e)) / (2 * h) for e in np.eye(3)
        ])
        scale = max(np.linalg.norm(g), 1e-3)
        worst = max(worst, np.linalg.norm(fd - g) / scale)
    assert worst < 1e-6


def test_adiabaticity_examples():
    lin = linear_gradient((0, 0, 0.01))
    assert adiabaticity(lin, (0, 0, 0), 100.0) == pytest.approx(1e-4, rel=1e-12)
    eps = adiabaticity(lin, (0, 0, 0), 0.1)
    assert eps == pytest.approx(0.1, rel=1e-12)
    assert eps > ADIABATIC_THRESHOLD
    # wavenumber is p / hbar_scale
    assert adiabaticity(lin, (0, 0, 0), 1.0, hbar_scale=0.01) == pytest.approx(1e-4, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_homogeneous_adiabaticity_vanishes(r, p):
    assert adiabaticity(homogeneous(), r, p) == 0.0


def test_adiabaticity_rejects_nonpositive_momentum():
    with pytest.raises(DomainError):
        adiabaticity(homogeneous(), (0, 0, 0), 0.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        transverse_speed(linear_gradient((0, 0, 0.01)), (0, 0, -200))
    with pytest.raises(DomainError):
        speed_gradient(linear_gradient((0, 0, 0.01), varies="density"), (0, 0, -100))
    with pytest.raises(DomainError):
        gaussian_lens(1.0, 1.0)
    with pytest.raises(DomainError):
        homogeneous(rho0=0.0)
    with pytest.raises(DomainError):
        axial_duct(1.0, varies="lambda")


def test_repeated_calls_bit_identical():
    for m in MEDIA.values():
        r = (0.123456789, -2.5, 1.75)
        a = [transverse_speed(m, r) for _ in range(3)]
        g = [speed_gradient(m, r).tobytes() for _ in range(3)]
        assert len(set(a)) == 1 and len(set(g)) == 1
