"""Shared test helpers."""

import math

import numpy as np

from phonon_berry.berry import MomentumPath


def fourier_loop(rng, n=2000, harmonics=4, wind=True, amp=0.35):
    """Random smooth closed momentum loop built from a Fourier series.

    With ``wind`` the loop circles the polar axis once; otherwise it is a
    wobbly loop centred on a random off-axis direction.
    """
    s = np.linspace(0.0, 2.0 * math.pi, n)
    if wind:
        z0 = rng.uniform(-0.8, 0.8)
        v = np.column_stack([np.cos(s), np.sin(s), np.full(n, z0)])
    else:
        centre = rng.normal(size=3)
        centre /= np.linalg.norm(centre)
        a = np.cross(centre, [1.0, 0.0, 0.0] if abs(centre[0]) < 0.9 else [0.0, 1.0, 0.0])
        a /= np.linalg.norm(a)
        b = np.cross(centre, a)
        r = rng.uniform(0.2, 1.0)
        v = centre + r * (np.outer(np.cos(s), a) + np.outer(np.sin(s), b))
    for k in range(1, harmonics + 1):
        ca, sa = rng.normal(scale=amp / k, size=(2, 3))
        v = v + np.outer(np.cos(k * s), ca) + np.outer(np.sin(k * s), sa)
    mag = rng.uniform(0.5, 3.0) * (1.0 + 0.2 * np.sin(3 * s))[:, None]
    p = v / np.linalg.norm(v, axis=1, keepdims=True) * mag
    p[-1] = p[0]
    t = np.cumsum(np.r_[0.0, rng.uniform(0.5, 1.5, n - 1)])
    return MomentumPath(t, p, closed=True)


def mod2pi(x):
    """Distance of ``x`` from the nearest multiple of 2 pi."""
    return abs(math.remainder(x, 2.0 * math.pi))

