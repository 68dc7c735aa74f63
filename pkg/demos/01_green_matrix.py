"""Closed-form propagator of the linear (c, v) system, one Fourier mode at a time.

Below mu|xi| = 2 the two rates are complex (oscillating, damped shear
waves); above it they split into a fast viscous rate and a slow elastic one.
"""

import numpy as np

from viscolab import eigenvalues, green_entries, mode_oracle

mu = 1.0
for xi in (0.5, 2.0, 16.0):
    lam = eigenvalues(mu, xi)
    print(f"|xi| = {xi:5.1f}   rates {lam.plus:.4f}, {lam.minus:.4f}")

# closed form vs a fine RK4 integration of the 2x2 system
xi, t = 2.0, 1.0  # confluent point
G = green_entries(mu, xi, t).matrix()
R = mode_oracle(mu, xi, t, 4000)
print("confluent point, max |G - RK4| =", np.abs(G - R).max())

# the slow rate tends to 1/mu: high frequencies of c never decay faster than that
for xi in (4.0, 16.0, 64.0):
    print(f"|xi| = {xi:5.1f}   slow rate {-eigenvalues(mu, xi).plus.real:.6f}")

# semigroup law
a = green_entries(mu, 0.7, 0.3).matrix() @ green_entries(mu, 0.7, 0.9).matrix()
print("G(0.3) G(0.9) - G(1.2):", np.abs(a - green_entries(mu, 0.7, 1.2).matrix()).max())
