"""Exact Fourier propagator of the linear coupled system

    c_t + |D| v = 0,    v_t - mu Lap v - |D| c = 0,

written per mode as ``d/dt (c, v) = A (c, v)`` with
``A = [[0, -|xi|], [|xi|, -mu |xi|^2]]``.  Each entry of the Green matrix
multiplies an identity block, so the divergence-free property of ``(c, v)``
is preserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .spectral import ContractViolation, SpectralField, divergence_ratio

#: relative gap below which the eigenvalues are treated as coincident
DEGENERATE_TOL = 1e-8
#: below this value of |delta t| the sinh/sin quotients use their Taylor series
_SERIES_CUT = 1e-3


@dataclass(frozen=True)
class EigenPair:
    plus: np.ndarray
    minus: np.ndarray


@dataclass(frozen=True)
class GreenEntries:
    """Scalar entries of the 2x2 block propagator acting on ``(c_hat, v_hat)``."""

    g_cc: np.ndarray
    g_cv: np.ndarray
    g_vc: np.ndarray
    g_vv: np.ndarray

    def matrix(self) -> np.ndarray:
        """Stack into ``(..., 2, 2)``."""
        return np.stack(
            [np.stack([self.g_cc, self.g_cv], -1), np.stack([self.g_vc, self.g_vv], -1)], -2
        )


@dataclass(frozen=True)
class HighFreqParts:
    g1: np.ndarray
    g2_top: np.ndarray
    g2_bot: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    theta: float
    residual: float
    intercept: float
    label: Optional[float] = None


def mode_matrix(mu: float, xi: float) -> np.ndarray:
    return np.array([[0.0, -xi], [xi, -mu * xi * xi]])


def default_R0(mu: float) -> float:
    """Dyadic number nearest (in log scale) to ``2/mu``, where the eigenvalues turn real."""
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return 2.0 ** round(math.log2(2.0 / mu))


def eigenvalues(mu: float, xi) -> EigenPair:
    """``lambda_pm = -mu xi^2 / 2 pm sqrt(mu^2 xi^4 - 4 xi^2) / 2``.

    On the real branch ``lambda_+`` is formed as ``xi^2 / lambda_-`` to avoid
    cancellation at large ``|xi|``.
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    xi = np.asarray(xi, dtype=float)
    m = -0.5 * mu * xi * xi
    disc = mu * mu * xi**4 - 4.0 * xi * xi
    root = np.sqrt(np.abs(disc)) / 2.0
    real = disc >= 0
    minus = np.where(real, m - root, m - 1j * root).astype(complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        plus_real = np.where(minus != 0, xi * xi / np.where(minus != 0, minus, 1.0), 0.0)
    plus = np.where(real, plus_real, m + 1j * root).astype(complex)
    return EigenPair(plus[()], minus[()])


def _sinhc(x):
    x2 = x * x
    return 1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0))


def _sinc(x):
    x2 = x * x
    return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))


def green_entries(mu: float, xi, t) -> GreenEntries:
    """Entries of ``exp(t A(xi))``; ``xi`` and ``t`` broadcast together.

    Off-diagonal entries are antisymmetric, ``g_vc = -g_cv``.
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    xi, t = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("green_entries needs t >= 0")
    shape = xi.shape
    xi = np.abs(xi).ravel()
    t = t.ravel()
    m = -0.5 * mu * xi * xi
    disc = mu * mu * xi**4 - 4.0 * xi * xi
    half = np.sqrt(np.abs(disc)) / 2.0  # |lambda_+ - lambda_-| / 2
    em = np.exp(m * t)

    C = np.empty_like(xi)  # (e^{l+ t} + e^{l- t}) / 2
    S = np.empty_like(xi)  # (e^{l+ t} - e^{l- t}) / (l+ - l-)

    degenerate = 2 * half < DEGENERATE_TOL * np.maximum(1.0, mu * xi * xi)
    dt_ = half * t
    small = ~degenerate & (dt_ < _SERIES_CUT)
    real = ~degenerate & ~small & (disc > 0)
    cplx = ~degenerate & ~small & (disc < 0)

    # confluent limit lambda_+ = lambda_- = m
    C[degenerate] = em[degenerate]
    S[degenerate] = t[degenerate] * em[degenerate]

    x = dt_[small]
    sgn = np.sign(disc[small])
    C[small] = em[small] * (1.0 + sgn * x * x / 2.0 * (1.0 + sgn * x * x / 12.0))
    S[small] = em[small] * t[small] * np.where(sgn >= 0, _sinhc(x), _sinc(x))

    if np.any(real):
        lm = m[real] - half[real]
        lp = xi[real] ** 2 / lm
        ep = np.exp(lp * t[real])
        en = np.exp(lm * t[real])
        C[real] = 0.5 * (ep + en)
        S[real] = (ep - en) / (2 * half[real])
        # eigenvalue-weighted diagonal entries avoid cancellation for mu |xi| >> 2
        gcc = (lp * en - lm * ep) / (2 * half[real])
        gvv = (lp * ep - lm * en) / (2 * half[real])
    if np.any(cplx):
        w = half[cplx]
        C[cplx] = em[cplx] * np.cos(w * t[cplx])
        S[cplx] = em[cplx] * np.sin(w * t[cplx]) / w

    g_cc = C - m * S
    g_vv = C + m * S
    if np.any(real):
        g_cc[real] = gcc
        g_vv[real] = gvv
    g_cv = -xi * S
    g_vc = xi * S
    return GreenEntries(*(g.reshape(shape)[()] for g in (g_cc, g_cv, g_vc, g_vv)))


def apply_green(G: GreenEntries, c_hat: np.ndarray, v_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return G.g_cc * c_hat + G.g_cv * v_hat, G.g_vc * c_hat + G.g_vv * v_hat


def evolve_linear(
    c0: SpectralField, v0: SpectralField, t: float, mu: float, check: bool = True
) -> Tuple[SpectralField, SpectralField]:
    """Advance divergence-free ``(c, v)`` by ``t`` with the exact propagator."""
    if c0.grid != v0.grid:
        raise ValueError("c0 and v0 live on different grids")
    if check:
        for name, f in (("c0", c0), ("v0", v0)):
            if f.rank != "vector":
                raise ValueError(f"{name} must be a vector field")
            if divergence_ratio(f) > 1e-10:
                raise ContractViolation(f"{name} is not divergence free")
    G = green_entries(mu, c0.grid.xi_norm, t)
    c, v = apply_green(G, c0.coeffs, v0.coeffs)
    return c0.with_coeffs(c), v0.with_coeffs(v)


def mode_oracle(mu: float, xi: float, t: float, n_steps: int, check: bool = True) -> np.ndarray:
    """Classical RK4 propagator of the mode ODE (``n_steps`` uniform steps).

    The ODE is linear and autonomous, so ``n`` RK4 steps equal the ``n``-th
    power of the one-step RK4 matrix; the power is taken by repeated squaring.
    """
    if check and n_steps < 100 * t * max(1.0, mu * xi * xi):
        raise ValueError(
            f"n_steps={n_steps} too small; need >= 100 t max(1, mu xi^2) = "
            f"{100 * t * max(1.0, mu * xi * xi):.6g}"
        )
    if t == 0:
        return np.eye(2)
    h = t / n_steps
    hA = h * mode_matrix(mu, xi)
    I = np.eye(2)
    step = I + hA @ (I + hA @ (I / 2 + hA @ (I / 6 + hA / 24)))
    return np.linalg.matrix_power(step, n_steps)


def oracle_steps(mu: float, xi: float, t: float, factor: float = 100.0) -> int:
    return max(1, int(math.ceil(factor * t * max(1.0, mu * xi * xi))))


def oracle_convergence_ratio(mu: float, xi: float, t: float, n_steps: int) -> float:
    """``|R_n - R_2n| / |R_2n - R_4n|`` for the RK4 oracle; about 16 for fourth order."""
    a = mode_oracle(mu, xi, t, n_steps, check=False)
    b = mode_oracle(mu, xi, t, 2 * n_steps, check=False)
    c = mode_oracle(mu, xi, t, 4 * n_steps, check=False)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b - c)))


def highfreq_decompose(mu: float, xi, t) -> HighFreqParts:
    """Remainders after removing ``e^{-t/mu}`` (c block) and ``e^{-mu xi^2 t}`` (v block)."""
    xi = np.asarray(xi, dtype=float)
    if np.any(mu * xi < 2):
        raise ValueError("highfreq_decompose needs mu |xi| >= 2 (real eigenvalues)")
    G = green_entries(mu, xi, t)
    t = np.asarray(t, dtype=float)
    return HighFreqParts(
        g1=G.g_cv,
        g2_top=G.g_cc - np.exp(-t / mu),
        g2_bot=G.g_vv - np.exp(-mu * xi * xi * t),
    )


def remainder_constants(mu: float, xis: Sequence[float], times: Sequence[float]) -> dict:
    """Measured constants ``sup_t |g1| |xi| / e^{-t/2mu}`` and the ``|xi|^2`` analogues.

    Only the ``e^{-t/(2mu)}`` part of the envelope is used; dropping the
    second envelope term can only enlarge the measured constant.
    """
    xis = np.asarray(xis, dtype=float)
    ts = np.asarray(times, dtype=float)
    X, T = np.meshgrid(xis, ts, indexing="ij")
    parts = highfreq_decompose(mu, X, T)
    env = np.exp(-T / (2 * mu))
    return {
        "xi": xis,
        "g1": np.max(np.abs(parts.g1) * X / env, axis=1),
        "g2_top": np.max(np.abs(parts.g2_top) * X**2 / env, axis=1),
        "g2_bot": np.max(np.abs(parts.g2_bot) * X**2 / env, axis=1),
    }


def decay_fit(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
    label: Optional[float] = None,
) -> DecayFit:
    """Least-squares exponent ``theta`` of ``values ~ A exp(-theta t)`` on ``window``.

    ``residual`` is the RMS log-space misfit divided by the total log drop of
    the fitted line over the window.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 2:
        raise ValueError("decay_fit needs at least two samples in the window")
    if np.any(y <= 0):
        raise ValueError("decay_fit needs strictly positive values in the window")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    misfit = np.sqrt(np.mean((ly - (slope * t + intercept)) ** 2))
    drop = abs(slope) * (t[-1] - t[0])
    residual = float(misfit / drop) if drop > 0 else (0.0 if misfit == 0 else math.inf)
    return DecayFit(theta=float(-slope), residual=residual, intercept=float(intercept), label=label)
