"""Parabolic decay of low blocks, damped decay of high blocks."""

import math

import numpy as np

from viscolab import Grid, build_partition, green_entries, leray_project
from viscolab.linear import apply_green, decay_fit, remainder_constants
from viscolab.spectral import random_field

rng = np.random.default_rng(0)


def block_norms(grid, j, times):
    w = build_partition(grid).weight(j)
    c0 = leray_project(random_field(grid, rng, (2,))).coeffs * w
    v0 = leray_project(random_field(grid, rng, (2,))).coeffs * w
    out = []
    for t in times:
        c, v = apply_green(green_entries(1.0, grid.xi_norm, t), c0, v0)
        out.append(math.sqrt(np.sum(np.abs(c) ** 2 + np.abs(v) ** 2)))
    return out


low = Grid()
for j in (-2, -1, 0):
    times = np.linspace(0, 8, 100) * 4.0 ** (-j)
    fit = decay_fit(times, block_norms(low, j, times))
    print(f"low  j = {j:2d}  theta = {fit.theta:.4f}  theta / 4^j = {fit.theta / 4.0 ** j:.4f}")

high = Grid(2, 256, 2 * math.pi)
for j in (2, 3, 4):
    times = np.linspace(0, 6, 121)
    fit = decay_fit(times, block_norms(high, j, times), window=(1.0, 6.0))
    print(f"high j = {j:2d}  theta = {fit.theta:.4f}")

k = remainder_constants(1.0, np.geomspace(4, 128, 6), np.linspace(0, 20, 401))
print("|G1| |xi|   ", np.round(k["g1"], 4))
print("|G2| |xi|^2 ", np.round(k["g2_top"], 4))
