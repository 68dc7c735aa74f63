"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (``-s`` is on by default via
pyproject) to see the lines.  Runtime is a few minutes, dominated by
criteria 6 and 9.
"""

import math
import warnings

import numpy as np

from viscolab.linear import apply_green, decay_fit, evolve_linear, green_entries, remainder_constants
from viscolab.littlewood_paley import BesovSpec, besov_norm, build_partition
from viscolab.monitor import assemble_report, boundedness_report
from viscolab.simulation import (
    FlowState,
    SimConfig,
    _strain_from_c,
    _unit_xi,
    etd_step,
    initial_state,
    oscillatory_velocity,
    run_simulation,
)
from viscolab.spectral import (
    Grid,
    SpectralField,
    forward_transform,
    leray_project,
    random_field,
    spectral_derivative,
)
from viscolab.verify import GREEN_MUS, constraint_suite, green_suite, green_xis, lp_suite


def verdict(k, passed, detail):
    print(f"\nACCEPTANCE {k}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def spread(values):
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.min() - 1.0)


def test_acceptance_1_green_exactness():
    checks = [c for c in green_suite() if c.name.startswith("oracle")]
    worst = max(c.value for c in checks)
    # the confluent point mu |xi| = 2 is part of every mu sweep
    ok = all(c.passed for c in checks) and all(2.0 / mu in green_xis(mu) for mu in GREEN_MUS)
    verdict(1, ok, f"{len(checks)} sweep points, worst relative error vs RK4 oracle {worst:.2e} (limit 1e-6)")


def test_acceptance_2_semigroup():
    checks = green_suite()
    semi = [c for c in checks if c.name.startswith("semigroup")]
    ident = [c for c in checks if c.name.startswith("identity")]
    worst = max(c.value for c in semi)
    ok = all(c.passed for c in semi + ident)
    verdict(2, ok, f"worst semigroup defect {worst:.2e} (limit 1e-10); G(xi, 0) == I exactly: {all(c.passed for c in ident)}")


def _block_decay(grid, j, times, rng, which, window=None, mu=1.0):
    part = build_partition(grid)
    w = part.weight(j)
    c0 = leray_project(random_field(grid, rng, (2,))).coeffs * w
    v0 = leray_project(random_field(grid, rng, (2,))).coeffs * w
    norms = []
    for t in times:
        c, v = apply_green(green_entries(mu, grid.xi_norm, t), c0, v0)
        sq = np.sum(np.abs(c * w) ** 2)
        if which == "cv":
            sq += np.sum(np.abs(v * w) ** 2)
        norms.append(math.sqrt(sq))
    return decay_fit(times, norms, window)


def test_acceptance_3_low_frequency_decay():
    # default box: blocks -2, -1, 0 all lie below R0 = 2; time in units of 2^{-2j}
    grid = Grid()
    rng = np.random.default_rng(1)
    scaled = []
    for j in (-2, -1, 0):
        fit = _block_decay(grid, j, np.linspace(0, 8, 200) * 2.0 ** (-2 * j), rng, "cv")
        scaled.append(fit.theta / 2.0 ** (2 * j))
    sp = spread(scaled)
    ok = min(scaled) > 0 and sp <= 0.2
    verdict(3, ok, f"theta_j / 2^(2j) = {', '.join(f'{x:.4f}' for x in scaled)}; spread {sp:.1%} (limit 20%)")


def test_acceptance_4_high_frequency_decay():
    # the default box has no block above R0 = 2, so this runs on the unit-period box
    grid = Grid(2, 256, 2 * math.pi)
    rng = np.random.default_rng(1)
    thetas = []
    for j in (2, 3, 4, 5):
        fit = _block_decay(grid, j, np.linspace(0, 6, 121), rng, "c", window=(1.0, 6.0))
        thetas.append(fit.theta)
    sp = spread(thetas)
    R0 = 2.0
    xis = np.geomspace(2 * R0, 64 * R0, 11)
    k = remainder_constants(1.0, xis, np.linspace(0, 20, 2001))
    drift = {name: spread(k[name]) for name in ("g1", "g2_top", "g2_bot")}
    ok = min(thetas) > 0 and sp <= 0.2 and max(drift.values()) < 0.2
    verdict(
        4,
        ok,
        f"c-block exponents {', '.join(f'{x:.4f}' for x in thetas)} (spread {sp:.1%}); "
        f"remainder-constant drift g1 {drift['g1']:.1%}, g2 {drift['g2_top']:.1%}/{drift['g2_bot']:.1%} (limit 20%)",
    )


def test_acceptance_5_littlewood_paley():
    checks = lp_suite(Grid(), n_pairs=100, seed=0)
    by = {c.name.split("[")[0]: [] for c in checks}
    for c in checks:
        by[c.name.split("[")[0]].append(c)
    unity = by["partition_of_unity"][0].value
    bony = by["bony_reconstruction"][0].value
    lo = min(c.value for c in by["bernstein_lower"])
    hi = max(c.value for c in by["bernstein_upper"])
    ok = all(c.passed for c in checks)
    verdict(5, ok, f"unity residual {unity:.1e}; Bony error {bony:.1e} over 100 pairs; Bernstein ratios in [{lo:.3f}, {hi:.3f}]")


def test_acceptance_6_constraint_propagation():
    # dt = 0.02 and its half instead of the default 1e-3, to fit the runtime budget
    checks = constraint_suite(SimConfig(dt=0.02, T=10.0, output_every=50))
    ok = all(c.passed for c in checks)
    verdict(6, ok, "; ".join(f"{c.name} {c.value:.3g}" for c in checks if not c.name.startswith("initial")))


def _rescaled_velocity(grid, l, w=2.0):
    """``v = grad^perp psi(l x)`` for ``psi = Lap`` of a centred Gaussian, i.e. ``l (grad^perp psi)(l x)``."""
    x = grid.coordinates
    c = grid.L / 2
    r2 = (l * (x[0] - c)) ** 2 + (l * (x[1] - c)) ** 2
    psi = forward_transform((r2 / w**4 - 2 / w**2) * np.exp(-r2 / (2 * w * w)), grid)
    return SpectralField(grid, np.stack([-spectral_derivative(psi, 1).coeffs, spectral_derivative(psi, 0).coeffs]))


def test_acceptance_7_scaling_invariance():
    coarse, fine = Grid(2, 256, 32 * math.pi), Grid(2, 512, 32 * math.pi)
    spec = BesovSpec(0.0, 2.0, 1.0)  # N/2 - 1 = 0
    a = besov_norm(_rescaled_velocity(coarse, 1), spec, build_partition(coarse))
    b = besov_norm(_rescaled_velocity(fine, 2), spec, build_partition(fine))
    rel = abs(a - b) / a
    verdict(7, rel < 1e-3, f"||v|| = {a:.8f}, ||2 v(2x)|| = {b:.8f}; relative gap {rel:.2e} (limit 1e-3)")


def test_acceptance_8_high_oscillation():
    # 1/eps = 16 needs a finer box than the default (Nyquist 4)
    grid = Grid(2, 256, 4 * math.pi)
    part = build_partition(grid)
    low, crit = [], []
    for eps in (1 / 4, 1 / 8, 1 / 16):
        v = oscillatory_velocity(grid, eps, 4.0, envelope=1.0).velocity
        low.append(besov_norm(v, BesovSpec(-0.6, 2.0, 1.0), part))
        crit.append(besov_norm(v, BesovSpec(0.0, 2.0, 1.0), part))
    ratios = [c / crit[0] for c in crit]
    ok = all(b < a for a, b in zip(low, low[1:])) and all(0.5 <= r <= 2.0 for r in ratios)
    verdict(
        8,
        ok,
        f"B^-0.6 norms {', '.join(f'{x:.4f}' for x in low)}; B^0 ratios to eps=1/4 {', '.join(f'{x:.3f}' for x in ratios)}",
    )


def test_acceptance_9_global_boundedness():
    worst_ratio, worst_hyp, lines = 0.0, 0.0, []
    ok = True
    for seed in range(5):
        cfg = SimConfig(seed=seed, dt=0.01, T=10.0, output_every=10)
        res = run_simulation(cfg)
        rep = assemble_report(res.series, cfg.s, cfg.r, cfg.threshold, (cfg.p1, cfg.p2), cfg.dim, res.residuals)
        verdicts = boundedness_report(rep, cfg.lambda1, constant=1.5, p2=cfg.p2)
        for v in verdicts.values():
            ok &= (not res.aborted) and bool(v.passed) and v.hypothesis_held
            worst_ratio = max(worst_ratio, v.ratio)
            worst_hyp = max(worst_hyp, v.hypothesis_max)
        lines.append(f"{rep.ratio(cfg.p1):.3f}")
    verdict(
        9,
        ok,
        f"sup X/X0 per seed {', '.join(lines)} (worst {worst_ratio:.3f}, limit 1.5); "
        f"max X_p2 {worst_hyp:.3f} <= lambda1 = {SimConfig().lambda1:g}",
    )


def _self_convergence_order(cfg):
    s0 = initial_state(cfg)
    finals = []
    for dt in (0.04, 0.02, 0.01):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            r = run_simulation(cfg.with_(dt=dt, output_every=10**6), initial=s0)
        finals.append(np.concatenate([r.final.v.coeffs.ravel(), r.final.E.coeffs.ravel()]))
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    return math.log2(e1 / e2)


def test_acceptance_10_stepper_order():
    grid = Grid()
    rng = np.random.default_rng(3)
    n, _ = _unit_xi(grid)
    c0 = leray_project(random_field(grid, rng, (2,), kmax=10, kmin=1))
    v0 = leray_project(random_field(grid, rng, (2,), kmax=10, kmin=1))
    s = FlowState(v0, SpectralField(grid, _strain_from_c(c0.coeffs, n)), 0.0, 1.0)
    for _ in range(100):
        s = etd_step(s, 0.01, nonlinear=False)
    c1, v1 = evolve_linear(c0, v0, 1.0, 1.0)
    lin = max(
        np.abs(s.c().coeffs - c1.coeffs).max() / np.abs(c1.coeffs).max(),
        np.abs(s.v.coeffs - v1.coeffs).max() / np.abs(v1.coeffs).max(),
    )
    small = _self_convergence_order(SimConfig(T=1.0))
    strong = _self_convergence_order(SimConfig(T=1.0, M=64, L=2 * math.pi, amplitude=0.5, band=4))
    ok = lin <= 1e-12 and min(small, strong) >= 1.9
    verdict(
        10,
        ok,
        f"linear path gap {lin:.1e} (limit 1e-12); self-convergence order {small:.3f} (default data), "
        f"{strong:.3f} (amplitude 0.5, unit-period box) (limit 1.9)",
    )
