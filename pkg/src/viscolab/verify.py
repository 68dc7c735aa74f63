"""Self-check suites behind the ``verify-*`` subcommands.

Each suite returns a list of :class:`Check` rows; a suite passes when every
row does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .linear import decay_fit, green_entries, mode_oracle, oracle_steps
from .littlewood_paley import (
    bernstein_ratio,
    build_partition,
    dyadic_block,
    embed,
    paraproduct,
)
from .simulation import SimConfig, constraint_residuals, initial_state, run_simulation
from .spectral import Grid, forward_transform, random_field

GREEN_MUS = (0.5, 1.0, 2.0)
GREEN_TIMES = (0.0, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    limit: float
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.suite}/{self.name}: {self.value:.3e} (limit {self.limit:g})"


def green_xis(mu: float) -> List[float]:
    return sorted({0.1, 0.5, 1.0, 2.0 / mu, 4.0, 16.0, 64.0})


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    den = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / den)


def green_oracle_error(mu: float, xi: float, t: float) -> float:
    G = green_entries(mu, xi, t).matrix()
    R = mode_oracle(mu, xi, t, oracle_steps(mu, xi, t))
    return _rel(G, R)


def green_semigroup_error(mu: float, xi: float, t: float, s: float) -> float:
    Gts = green_entries(mu, xi, t + s).matrix()
    prod = green_entries(mu, xi, t).matrix() @ green_entries(mu, xi, s).matrix()
    return _rel(prod, Gts)


def green_suite(mus: Sequence[float] = GREEN_MUS, times: Sequence[float] = GREEN_TIMES) -> List[Check]:
    out = []
    for mu in mus:
        for xi in green_xis(mu):
            for t in times:
                tag = f"mu={mu:g},xi={xi:g},t={t:g}"
                err = green_oracle_error(mu, xi, t)
                out.append(Check("green", f"oracle[{tag}]", err, 1e-6, err <= 1e-6))
                worst = max(green_semigroup_error(mu, xi, t, s) for s in times)
                out.append(Check("green", f"semigroup[{tag}]", worst, 1e-10, worst <= 1e-10))
            ts = np.linspace(0.0, 10.0, 201)
            norms = np.linalg.norm(green_entries(mu, xi, ts).matrix(), ord=2, axis=(-2, -1))
            fit = decay_fit(ts, norms, (2.0, 10.0))
            out.append(Check("green", f"decay_rate[mu={mu:g},xi={xi:g}]", fit.theta, 0.0, fit.theta > 0))
        ident = np.max(np.abs(green_entries(mu, green_xis(mu), 0.0).matrix() - np.eye(2)))
        out.append(Check("green", f"identity[mu={mu:g}]", float(ident), 0.0, ident == 0.0))
    return out


def covered_kmax(part) -> int:
    """Largest ``|k|_inf`` whose whole cube lies where the block sum is exactly 1."""
    hi = part.exact_window[1] * part.grid.L / (2 * math.pi)
    return int(math.floor(hi / math.sqrt(part.grid.dim)))


def bony_corpus(grid: Grid, n_pairs: int, seed: int, kmax: int = None) -> Iterable:
    rng = np.random.default_rng(seed)
    if kmax is None:
        kmax = covered_kmax(build_partition(grid))
    for _ in range(n_pairs):
        yield random_field(grid, rng, kmax=kmax), random_field(grid, rng, kmax=kmax)


def bony_error(u, v, part) -> float:
    """Relative L^2 gap between ``T_u v + T_v u + R(u, v)`` and the exact product."""
    Tuv, Tvu, R = paraproduct(u, v, part)
    g = Tuv.grid
    uu = embed(u, g) if g != u.grid else u
    vv = embed(v, g) if g != v.grid else v
    exact = forward_transform(uu.physical() * vv.physical(), g).coeffs
    total = Tuv.coeffs + Tvu.coeffs + R.coeffs
    return float(np.linalg.norm((total - exact).ravel()) / np.linalg.norm(exact.ravel()))


def annulus_field(grid: Grid, q: int, rng: np.random.Generator, part=None):
    part = part or build_partition(grid)
    return dyadic_block(random_field(grid, rng), q, part)


def lp_suite(grid: Grid, n_pairs: int = 100, seed: int = 0) -> List[Check]:
    part = build_partition(grid)
    out = []
    res = part.unity_residual()
    out.append(Check("lp", "partition_of_unity", res, 1e-12, res < 1e-12))
    worst = max(bony_error(u, v, part) for u, v in bony_corpus(grid, n_pairs, seed))
    out.append(Check("lp", f"bony_reconstruction[{n_pairs} pairs]", worst, 1e-10, worst < 1e-10))
    rng = np.random.default_rng(seed + 1)
    for q in part.q_values:
        lo, hi = bernstein_ratio(annulus_field(grid, int(q), rng, part), int(q), 1, 2.0, 2.0)
        out.append(Check("lp", f"bernstein_lower[q={q}]", lo, 0.75, lo >= 0.75))
        out.append(Check("lp", f"bernstein_upper[q={q}]", hi, 8.0 / 3.0, hi <= 8.0 / 3.0))
    return out


def residual_growth(result) -> dict:
    return {k: float(v[-1] - v[0]) for k, v in result.residuals.items()}


def constraint_suite(config: SimConfig, floor: float = 1e-14) -> List[Check]:
    """Construction residuals, their bound along a run, and the dt-halving ratio of their growth.

    A residual whose growth stays below ``floor`` at the coarse step is
    conserved to roundoff by the scheme; its ratio is not measurable and the
    row records the growth instead.
    """
    out = []
    s0 = initial_state(config)
    for name, val in zip(("r_det", "r_divT", "r_compat"), constraint_residuals(s0).as_tuple()):
        out.append(Check("constraints", f"initial_{name}", val, 1e-6, val < 1e-6))
    coarse = run_simulation(config, initial=s0)
    fine = run_simulation(
        config.with_(dt=config.dt / 2, output_every=2 * config.output_every), initial=s0
    )
    for name, series in coarse.residuals.items():
        top = float(max(series.max(), fine.residuals[name].max()))
        out.append(Check("constraints", f"max_{name}", top, 1e-5, top < 1e-5))
    gc, gf = residual_growth(coarse), residual_growth(fine)
    for name in gc:
        if abs(gc[name]) < floor:
            out.append(Check("constraints", f"growth_{name}_conserved", abs(gc[name]), floor, True))
            continue
        ratio = gc[name] / gf[name] if gf[name] != 0 else math.inf
        out.append(Check("constraints", f"halving_ratio_{name}", ratio, 4.0, 3.5 <= ratio <= 4.5))
    return out
