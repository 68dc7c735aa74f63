"""Dyadic frequency decomposition, Besov and Chemin-Lerner norms, paraproducts."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .spectral import (
    Grid,
    SpectralField,
    forward_transform,
    inverse_array,
    lp_of_samples,
    spectral_derivative,
)

# annulus carrying the bump: supp phi in {INNER <= |xi| <= OUTER}
INNER = 3.0 / 4.0
OUTER = 8.0 / 3.0
# chi == 1 below CHI_FLAT, chi == 0 above CHI_CUT
CHI_FLAT = 3.0 / 4.0
CHI_CUT = 4.0 / 3.0


class LeakageWarning(UserWarning):
    """Energy outside the dyadic range covered by a partition."""


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        b0 = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        b1 = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return b0 / (b0 + b1)


def chi(r: np.ndarray) -> np.ndarray:
    """Radial low-pass profile: 1 on ``|xi| <= 3/4``, 0 on ``|xi| >= 4/3``."""
    return _smooth_step((CHI_CUT - np.asarray(r, dtype=float)) / (CHI_CUT - CHI_FLAT))


def phi(r: np.ndarray) -> np.ndarray:
    """Dyadic bump ``chi(r/2) - chi(r)``, supported in ``[3/4, 8/3]``."""
    r = np.asarray(r, dtype=float)
    return chi(r / 2.0) - chi(r)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.r < 1:
            raise ValueError(f"Besov exponents need p, r >= 1 (got p={self.p}, r={self.r})")


@dataclass(frozen=True)
class HybridThreshold:
    R0: float

    def __post_init__(self):
        if not self.R0 > 0:
            raise ValueError(f"R0 must be > 0, got {self.R0}")

    @property
    def j0(self) -> int:
        """Largest ``q`` with ``2^q <= R0``."""
        q = math.floor(math.log2(self.R0))
        while 2.0 ** (q + 1) <= self.R0:
            q += 1
        while 2.0**q > self.R0:
            q -= 1
        return q

    def is_low(self, q: int) -> bool:
        return 2.0**q <= self.R0


def lp_sum(values: np.ndarray, r: float, axis: int = -1) -> np.ndarray:
    """l^r norm along ``axis`` (r = inf gives the max)."""
    values = np.abs(np.asarray(values, dtype=float))
    if values.shape[axis] == 0:
        return np.zeros(np.delete(values.shape, axis % values.ndim)) if values.ndim > 1 else 0.0
    if math.isinf(r):
        return np.max(values, axis=axis)
    if r == 1:
        return np.sum(values, axis=axis)
    return np.sum(values**r, axis=axis) ** (1.0 / r)


class DyadicPartition:
    """Littlewood-Paley weights ``phi(2^-q |xi|)`` for ``q_min <= q <= q_max`` on a grid."""

    def __init__(self, grid: Grid, q_min: int, q_max: int):
        if not q_min < q_max:
            raise ValueError(f"need q_min < q_max, got {q_min}, {q_max}")
        qmax_ok = max_admissible_q(grid)
        if q_max > qmax_ok:
            raise ValueError(
                f"insufficient spectral room: 2^q_max * 8/3 must stay below the Nyquist radius "
                f"{grid.nyquist:.6g}; admissible q_max <= {qmax_ok}"
            )
        self.grid = grid
        self.q_min = int(q_min)
        self.q_max = int(q_max)
        self.q_values = np.arange(self.q_min, self.q_max + 1)
        r = grid.xi_norm
        self.weights = np.stack([phi(r * 2.0 ** (-q)) for q in self.q_values])
        self.weights.flags.writeable = False

    def __repr__(self):
        return f"DyadicPartition(M={self.grid.M}, L={self.grid.L:.6g}, q={self.q_min}..{self.q_max})"

    def index(self, q: int) -> int:
        if not self.q_min <= q <= self.q_max:
            raise ValueError(f"block q={q} outside partition range [{self.q_min}, {self.q_max}]")
        return int(q - self.q_min)

    def weight(self, q: int) -> np.ndarray:
        return self.weights[self.index(q)]

    @property
    def total(self) -> np.ndarray:
        return np.sum(self.weights, axis=0)

    @property
    def exact_window(self) -> Tuple[float, float]:
        """Radii on which the truncated sum equals 1 identically."""
        return CHI_CUT * 2.0**self.q_min, 1.5 * 2.0**self.q_max

    def covered(self) -> np.ndarray:
        lo, hi = self.exact_window
        r = self.grid.xi_norm
        return (r >= lo) & (r <= hi)

    def unity_residual(self, window: Optional[Tuple[float, float]] = None) -> float:
        """max |sum_q phi_q - 1| over lattice modes in ``window`` (default: the stated annulus)."""
        if window is None:
            window = (INNER * 2.0 ** (self.q_min + 1), OUTER * 2.0 ** (self.q_max - 1))
        r = self.grid.xi_norm
        sel = (r >= window[0]) & (r <= window[1])
        if not np.any(sel):
            return 0.0
        return float(np.max(np.abs(self.total[sel] - 1.0)))

    def leaked_fraction(self, coeffs: np.ndarray) -> float:
        """Relative L2 mass of nonzero modes not reproduced by the block sum."""
        nd = self.grid.dim
        c = np.array(coeffs, copy=True)
        c[(...,) + (0,) * nd] = 0.0
        den = np.linalg.norm(c.ravel())
        if den == 0:
            return 0.0
        return float(np.linalg.norm(((1.0 - self.total) * c).ravel()) / den)


def max_admissible_q(grid: Grid) -> int:
    """Largest q with ``2^q * 8/3`` strictly below the Nyquist radius."""
    q = math.floor(math.log2(grid.nyquist / OUTER))
    while OUTER * 2.0**q >= grid.nyquist:
        q -= 1
    return q


def min_covering_q(grid: Grid) -> int:
    """Smallest q needed for the block sum to reach the lowest lattice mode."""
    xi_min = 2 * math.pi / grid.L
    return math.floor(math.log2(xi_min / CHI_CUT))


def build_partition(grid: Grid, q_min: Optional[int] = None, q_max: Optional[int] = None) -> DyadicPartition:
    """Partition on ``grid``; missing bounds default to the full admissible range."""
    if q_min is None:
        q_min = min_covering_q(grid)
    if q_max is None:
        q_max = max_admissible_q(grid)
    return DyadicPartition(grid, q_min, q_max)


# -- blocks -------------------------------------------------------------------


def _check_grid(f: SpectralField, part: DyadicPartition) -> None:
    if f.grid != part.grid:
        raise ValueError("field and partition live on different grids")


def dyadic_block(f: SpectralField, q: int, part: DyadicPartition) -> SpectralField:
    """``Delta_q f``: modewise product with ``phi(2^-q xi)``."""
    _check_grid(f, part)
    return f.with_coeffs(f.coeffs * part.weight(q))


def low_cut_multiplier(part: DyadicPartition, q: int) -> np.ndarray:
    hi = min(q - 1, part.q_max)
    if hi < part.q_min:
        mult = np.zeros(part.grid.shape)
    else:
        mult = np.sum(part.weights[: hi - part.q_min + 1], axis=0)
    mult = mult.copy()
    mult[(0,) * part.grid.dim] = 1.0
    return mult


def low_cut(f: SpectralField, q: int, part: DyadicPartition) -> SpectralField:
    """``S_q f``: zero mode plus all blocks ``p <= q - 1``."""
    _check_grid(f, part)
    return f.with_coeffs(f.coeffs * low_cut_multiplier(part, q))


def hybrid_split(
    f: SpectralField, R0: float, part: DyadicPartition
) -> Tuple[SpectralField, SpectralField]:
    """Split into ``f^l`` (zero mode + blocks with ``2^q <= R0``) and the rest."""
    _check_grid(f, part)
    j0 = HybridThreshold(R0).j0
    low = f.with_coeffs(f.coeffs * low_cut_multiplier(part, j0 + 1))
    return low, f - low


def block_samples(f: SpectralField, part: DyadicPartition, qs: Optional[Sequence[int]] = None) -> np.ndarray:
    """Physical samples of ``Delta_q f`` stacked along a new leading axis."""
    _check_grid(f, part)
    if qs is None:
        w = part.weights
    else:
        w = np.stack([part.weight(q) for q in qs])
    nd = part.grid.dim
    ncomp = f.coeffs.ndim - nd
    w = w.reshape((w.shape[0],) + (1,) * ncomp + part.grid.shape)
    return inverse_array(f.coeffs[None] * w, nd)


def block_lp_norms(
    f: SpectralField, part: DyadicPartition, ps: Iterable[float] = (2.0,)
) -> Dict[float, np.ndarray]:
    """``{p: [||Delta_q f||_{L^p} for q in partition]}``."""
    samples = block_samples(f, part)
    out = {}
    for p in ps:
        out[float(p)] = np.array([lp_of_samples(b, part.grid, p) for b in samples])
    return out


def besov_norm(
    f: SpectralField,
    spec: BesovSpec,
    part: DyadicPartition,
    leak_tol: float = 1e-8,
) -> float:
    """Homogeneous ``B^s_{p,r}`` norm over the blocks of ``part``.

    Emits :class:`LeakageWarning` when more than ``leak_tol`` of the non-mean
    energy falls outside the covered range.
    """
    _check_grid(f, part)
    leak = part.leaked_fraction(f.coeffs)
    if leak > leak_tol:
        warnings.warn(
            f"besov_norm: {leak:.3e} of the spectrum lies outside blocks "
            f"[{part.q_min}, {part.q_max}]",
            LeakageWarning,
            stacklevel=2,
        )
    norms = block_lp_norms(f, part, (spec.p,))[float(spec.p)]
    return float(lp_sum(2.0 ** (spec.s * part.q_values) * norms, spec.r))


# -- time norms ---------------------------------------------------------------


@dataclass
class BlockSeries:
    """Sampled per-block L^p norms of one field: ``norms[i, n] = ||Delta_{q[n]} f(t_i)||_p``."""

    times: np.ndarray
    q: np.ndarray
    norms: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.q = np.asarray(self.q, dtype=int)
        self.norms = np.asarray(self.norms, dtype=float).reshape(len(self.times), len(self.q))
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(self.norms < 0):
            raise ValueError("block norms must be non-negative")

    def select(self, qs: Sequence[int]) -> "BlockSeries":
        idx = [int(np.nonzero(self.q == q)[0][0]) for q in qs]
        return BlockSeries(self.times, self.q[idx], self.norms[:, idx], self.p)

    def scaled(self, a: float) -> "BlockSeries":
        return BlockSeries(self.times, self.q, abs(a) * self.norms, self.p)


def time_norms(series: BlockSeries, q_time: float) -> np.ndarray:
    """Per-block ``L^{q_time}(0, T)`` norms over the full sample window."""
    if math.isinf(q_time):
        if len(series.times) == 0:
            raise ValueError("empty series")
        return np.max(series.norms, axis=0)
    if q_time < 1:
        raise ValueError(f"time exponent must be >= 1, got {q_time}")
    if len(series.times) < 2:
        raise ValueError("finite time exponents need at least 2 samples")
    return trapezoid(series.norms**q_time, series.times, axis=0) ** (1.0 / q_time)


def running_time_norms(series: BlockSeries, q_time: float) -> np.ndarray:
    """Per-block ``L^{q_time}(0, t_i)`` norms for every sample ``t_i``; shape ``(n_t, n_q)``."""
    if math.isinf(q_time):
        return np.maximum.accumulate(series.norms, axis=0)
    if q_time < 1:
        raise ValueError(f"time exponent must be >= 1, got {q_time}")
    if len(series.times) < 2:
        raise ValueError("finite time exponents need at least 2 samples")
    acc = cumulative_trapezoid(series.norms**q_time, series.times, axis=0, initial=0.0)
    return np.maximum(acc, 0.0) ** (1.0 / q_time)


def _check_p(series: BlockSeries, p: float) -> None:
    if float(series.p) != float(p):
        raise ValueError(f"series holds L^{series.p} block norms, requested L^{p}")


def chemin_lerner_norm(series: BlockSeries, q_time: float, spec: BesovSpec) -> float:
    """``|| 2^{qs} ||Delta_q f||_{L^{q_time}_T L^p} ||_{l^r}`` (trapezoid in time)."""
    _check_p(series, spec.p)
    per_block = time_norms(series, q_time)
    return float(lp_sum(2.0 ** (spec.s * series.q) * per_block, spec.r))


def chemin_lerner_running(series: BlockSeries, q_time: float, spec: BesovSpec) -> np.ndarray:
    """The Chemin-Lerner norm on ``[0, t_i]`` for each sample time."""
    _check_p(series, spec.p)
    per_block = running_time_norms(series, q_time)
    return np.asarray(lp_sum(2.0 ** (spec.s * series.q)[None, :] * per_block, spec.r, axis=1))


def hybrid_weights(q: np.ndarray, s: float, R0: float) -> np.ndarray:
    q = np.asarray(q)
    return 2.0 ** (q * (s + 1)) * np.minimum(R0, 2.0**q)


def hybrid_time_norm(series: BlockSeries, s: float, r: float, R0: float) -> float:
    """``|| 2^{q(s+1)} min(R0, 2^q) ||Delta_q v||_{L^1_T L^2} ||_{l^r}``."""
    _check_p(series, 2.0)
    per_block = time_norms(series, 1.0)
    return float(lp_sum(hybrid_weights(series.q, s, R0) * per_block, r))


# -- paraproducts -------------------------------------------------------------


def _support_kmax(f: SpectralField, rtol: float = 1e-14) -> int:
    c = np.abs(f.coeffs).reshape(-1, *f.grid.shape).max(axis=0) if f.coeffs.ndim > f.grid.dim else np.abs(f.coeffs)
    peak = c.max()
    if peak == 0:
        return 0
    live = c > rtol * peak
    return int(np.max(np.abs(f.grid.k_index[:, live])))


def embed(f: SpectralField, grid: Grid) -> SpectralField:
    """Zero-pad coefficients of ``f`` onto a finer grid with the same box."""
    g = f.grid
    if grid.L != g.L or grid.dim != g.dim or grid.M < g.M:
        raise ValueError("embedding target must share L and dim and have M >= source M")
    out = np.zeros(f.component_shape + grid.shape, dtype=complex)
    src_idx = [np.arange(g.M)] * g.dim
    k = np.fft.fftfreq(g.M, d=1.0 / g.M).astype(int)
    dst = np.mod(k, grid.M)
    # the unpaired source Nyquist mode has no consistent image; it must be absent
    nyq = np.any(g.k_index == -g.M // 2, axis=0)
    if np.any(np.abs(f.coeffs[..., nyq]) > 0):
        raise ValueError("cannot embed a field carrying its Nyquist mode")
    out[(...,) + np.ix_(*([dst] * g.dim))] = f.coeffs[(...,) + np.ix_(*src_idx)]
    return SpectralField(grid, out)


def paraproduct(
    u: SpectralField,
    v: SpectralField,
    part: DyadicPartition,
    pad: bool = True,
) -> Tuple[SpectralField, SpectralField, SpectralField]:
    """Bony decomposition ``uv = T_u v + T_v u + R(u, v)`` of two scalar fields.

    The mean of each factor is treated as the lowest block, so the identity is
    exact on the grid. When the product spectrum would alias, the factors are
    zero-padded to ``2M`` points (``pad=True``) or the call is rejected.
    """
    _check_grid(u, part)
    _check_grid(v, part)
    if u.rank != "scalar" or v.rank != "scalar":
        raise ValueError("paraproduct works on scalar fields")
    g = part.grid
    kmax = _support_kmax(u) + _support_kmax(v)
    if kmax >= g.M // 2:
        if not pad:
            raise ValueError(
                f"product spectrum reaches |k|={kmax} >= M/2={g.M // 2}; enable padding"
            )
        g = Grid(g.dim, 2 * g.M, g.L)
        u, v = embed(u, g), embed(v, g)
        part = DyadicPartition(g, part.q_min, part.q_max)

    nd = g.dim
    ub = block_samples(u, part)
    vb = block_samples(v, part)
    u0 = u.zero_mode().real
    v0 = v.zero_mode().real
    nq = len(part.q_values)

    # S_{q-1} u = mean + sum_{p <= q-2} Delta_p u
    u_low = np.cumsum(ub, axis=0)
    v_low = np.cumsum(vb, axis=0)
    Tuv = np.zeros(g.shape)
    Tvu = np.zeros(g.shape)
    Rsum = np.full(g.shape, u0 * v0)
    for n in range(nq):
        su = u0 + (u_low[n - 2] if n >= 2 else 0.0)
        sv = v0 + (v_low[n - 2] if n >= 2 else 0.0)
        Tuv += su * vb[n]
        Tvu += sv * ub[n]
        tilde = vb[max(n - 1, 0) : min(n + 2, nq)].sum(axis=0)
        Rsum += ub[n] * tilde
    return forward_transform(Tuv, g), forward_transform(Tvu, g), forward_transform(Rsum, g)


# -- Bernstein ----------------------------------------------------------------


def _multi_indices(nd: int, k: int):
    return list(itertools.combinations_with_replacement(range(nd), k))


def bernstein_ratio(
    f: SpectralField, q: int, k: int, a: float, b: float, rtol: float = 1e-12
) -> Tuple[float, float]:
    """Measured Bernstein constants for ``f`` supported in the ``q``-annulus.

    Returns ``(lower, upper)`` with
    ``upper = sup_|alpha|=k ||d^alpha f||_{L^b} / (2^{q(k + N(1/a - 1/b))} ||f||_{L^a})`` and
    ``lower = sup_|alpha|=k ||d^alpha f||_{L^a} / (2^{qk} ||f||_{L^a})``.
    """
    if not 1 <= a <= b:
        raise ValueError(f"need 1 <= a <= b, got a={a}, b={b}")
    g = f.grid
    amp = np.abs(f.coeffs).reshape(-1, *g.shape).max(axis=0)
    peak = amp.max()
    if peak == 0:
        raise ValueError("bernstein_ratio: zero field")
    live = amp > rtol * peak
    r = g.xi_norm[live]
    lam = 2.0**q
    if r.min() < INNER * lam * (1 - 1e-12) or r.max() > OUTER * lam * (1 + 1e-12):
        raise ValueError(
            f"support [{r.min():.4g}, {r.max():.4g}] leaves the annulus "
            f"[{INNER * lam:.4g}, {OUTER * lam:.4g}]"
        )
    nd = g.dim
    inv_a = 0.0 if math.isinf(a) else 1.0 / a
    inv_b = 0.0 if math.isinf(b) else 1.0 / b
    fa = lp_of_samples(f.physical(), g, a)
    upper = 0.0
    lower = 0.0
    for alpha in _multi_indices(nd, k):
        d = f
        for j in alpha:
            d = spectral_derivative(d, j)
        x = d.physical()
        upper = max(upper, lp_of_samples(x, g, b))
        lower = max(lower, lp_of_samples(x, g, a))
    upper /= lam ** (k + nd * (inv_a - inv_b)) * fa
    lower /= lam**k * fa
    return lower, upper
