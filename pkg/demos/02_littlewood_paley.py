"""Dyadic blocks on the torus and the Besov norms built from them."""

import math

import numpy as np

from viscolab import BesovSpec, Grid, besov_norm, build_partition, forward_transform
from viscolab.littlewood_paley import dyadic_block

grid = Grid(2, 128, 32 * math.pi)  # |xi| = k / 16, Nyquist 4
part = build_partition(grid)
print("blocks", part.q_min, "..", part.q_max)

# the weights sum to one inside the covered window
total = sum(part.weight(q) for q in range(part.q_min, part.q_max + 1))
lo, hi = part.exact_window
sel = (grid.xi_norm >= lo) & (grid.xi_norm <= hi)
print("partition of unity residual", np.abs(total[sel] - 1).max())

# k = 11 (|xi| = 0.6875) sits in block q = -1 only
x, y = grid.coordinates
f = forward_transform(np.cos(11 * x / 16), grid)
for q in range(part.q_min, part.q_max + 1):
    b = dyadic_block(f, q, part)
    print(f"q = {q:2d}  ||Delta_q f||_2 = {np.sqrt(np.sum(np.abs(b.coeffs) ** 2)):.4f}")

# Besov norms weight the block by 2^{qs}
for s in (-0.5, 0.0, 0.5):
    print(f"s = {s:4.1f}  ||f||_B = {besov_norm(f, BesovSpec(s, 2.0, 1.0), part):.4f}")
