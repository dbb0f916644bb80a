"""
Polarization rotation on momentum loops
=======================================

A transverse wave whose momentum direction goes once around a closed loop
comes back with its linear polarization rotated by ``gamma = oint cos(th) dphi``.
Here the angle is computed three ways for constant-zenith circles and for a
wobbly random loop.
"""

# %%
import math

import numpy as np

from phonon_berry import berry

# %%
# Circles of constant zenith angle.  The closed form is ``2 pi cos(th)``.

for theta in (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2):
    loop = berry.circle_path(theta, n=8192)
    line = berry.rytov_line_integral(loop).gamma
    solid = berry.rytov_solid_angle(loop)
    pt = berry.transport_polarization(loop)
    print(f"theta={theta:.4f}  exact={2 * math.pi * math.cos(theta):+.9f}  line={line:+.9f}  "
          f"solid={solid.gamma:+.9f} (Omega={solid.solid_angle:.6f})  transport={pt:+.9f}")

# %%
# Transport returns an angle in ``(-pi, pi]`` so it agrees with the other two
# only modulo ``2 pi``.  The helicity enters as an overall sign.

loop = berry.circle_path(math.pi / 3, n=8192)
print("sigma=-1:", berry.rytov_line_integral(loop, sigma=-1).gamma)

# %%
# A random smooth loop that passes close to the pole.

rng = np.random.default_rng(1)
s = np.linspace(0.0, 2 * math.pi, 3000)
v = np.column_stack([np.cos(s), np.sin(s), 0.3 + 0.0 * s])
for k in (1, 2, 3):
    v += np.outer(np.cos(k * s), rng.normal(scale=0.3 / k, size=3))
p = v / np.linalg.norm(v, axis=1, keepdims=True)
p[-1] = p[0]
wobbly = berry.MomentumPath(s, p, closed=True)
g_line = berry.rytov_line_integral(wobbly).gamma
g_solid = berry.rytov_solid_angle(wobbly).gamma
g_pt = berry.transport_polarization(wobbly)
print(f"line={g_line:.12f}  solid={g_solid:.12f}  transport={g_pt:.12f}")
print("disagreement mod 2 pi:", abs(math.remainder(g_line - g_solid, 2 * math.pi)),
      abs(math.remainder(g_line - g_pt, 2 * math.pi)))
