"""A priori functionals ``X_p = Y_s + Z_p`` assembled from sampled block norms.

Every finite-time constituent is a trapezoid integral over ``[0, t_i]`` and
every ``L^inf``-in-time constituent a running maximum, so the assembled
series are non-decreasing by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .littlewood_paley import BesovSpec, BlockSeries, HybridThreshold, lp_sum, running_time_norms

FIELDS = ("v", "E", "c")


class AdmissibilityWarning(UserWarning):
    """Regularity index outside the window where the estimates are stated."""


@dataclass
class NormSeries:
    """Sampled ``||Delta_q f(t_i)||_{L^p}`` for ``f`` in ``FIELDS``.

    ``norms[(field, p)]`` has shape ``(n_t, n_q)``.  ``grad_v_inf`` is
    ``||grad v(t_i)||_inf`` and ``U_tilde`` its running time integral.
    """

    times: np.ndarray
    q: np.ndarray
    norms: Dict[Tuple[str, float], np.ndarray]
    grad_v_inf: np.ndarray
    U_tilde: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.q = np.asarray(self.q, dtype=int)
        self.grad_v_inf = np.asarray(self.grad_v_inf, dtype=float)
        nt, nq = len(self.times), len(self.q)
        if nt > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        clean = {}
        for (name, p), arr in self.norms.items():
            if name not in FIELDS:
                raise ValueError(f"unknown field {name!r}; expected one of {FIELDS}")
            arr = np.asarray(arr, dtype=float).reshape(nt, nq)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"block norms of {name} (p={p}) must be finite and non-negative")
            clean[(name, float(p))] = arr
        self.norms = clean
        if self.grad_v_inf.shape != (nt,):
            raise ValueError("grad_v_inf must have one entry per sample time")
        if self.U_tilde is None:
            self.U_tilde = advection_budget(self.times, self.grad_v_inf)
        else:
            self.U_tilde = np.asarray(self.U_tilde, dtype=float).reshape(nt)

    @property
    def ps(self) -> Tuple[float, ...]:
        return tuple(sorted({p for _, p in self.norms}))

    def block(self, name: str, p: float) -> BlockSeries:
        key = (name, float(p))
        if key not in self.norms:
            raise KeyError(f"series has no {name} block norms at p={p}")
        return BlockSeries(self.times, self.q, self.norms[key], float(p))

    def scaled(self, a: float) -> "NormSeries":
        """Every norm multiplied by ``|a|`` (the field history scaled by ``a``)."""
        a = abs(a)
        return NormSeries(
            self.times,
            self.q,
            {k: a * v for k, v in self.norms.items()},
            a * self.grad_v_inf,
            a * self.U_tilde,
        )

    def truncated(self, n: int) -> "NormSeries":
        """The first ``n`` samples."""
        return NormSeries(
            self.times[:n],
            self.q,
            {k: v[:n] for k, v in self.norms.items()},
            self.grad_v_inf[:n],
            self.U_tilde[:n],
        )


def advection_budget(times: np.ndarray, grad_v_inf: np.ndarray) -> np.ndarray:
    """Running trapezoid integral of ``||grad v||_inf``; zero at the first sample."""
    times = np.asarray(times, dtype=float)
    g = np.asarray(grad_v_inf, dtype=float)
    if len(times) == 0:
        return np.zeros(0)
    inc = 0.5 * np.diff(times) * (g[1:] + g[:-1])
    return np.concatenate([[0.0], np.cumsum(inc)])


def _running(series: BlockSeries, q_time: float, s: float, r: float, qs: Sequence[int]) -> np.ndarray:
    """Running Chemin-Lerner norm restricted to blocks ``qs``."""
    nt = len(series.times)
    if len(qs) == 0:
        return np.zeros(nt)
    sub = series.select(qs)
    if math.isinf(q_time):
        per_block = running_time_norms(sub, q_time)
    elif nt < 2:
        per_block = np.zeros((nt, len(qs)))
    else:
        per_block = running_time_norms(sub, q_time)
    return np.asarray(lp_sum(2.0 ** (s * sub.q)[None, :] * per_block, r, axis=1))


def _split_blocks(q: np.ndarray, R0: float) -> Tuple[list, list]:
    thr = HybridThreshold(R0)
    low = [int(x) for x in q if thr.is_low(int(x))]
    high = [int(x) for x in q if not thr.is_low(int(x))]
    return low, high


def _check_s(s: float, r: float, dim: int) -> None:
    upper = dim / 2.0 - 1.0
    ok = (-1.0 < s <= upper) if r == 1 else (-1.0 < s < upper)
    if not ok:
        warnings.warn(
            f"s={s} lies outside the admissible window for r={r}, N={dim}; computed anyway",
            AdmissibilityWarning,
            stacklevel=3,
        )


def functional_Y(series: NormSeries, s: float, r: float, R0: float, dim: int = 2) -> np.ndarray:
    """``Y_s(t_i)`` from the L^2 block norms of ``v`` and ``E``."""
    _check_s(s, r, dim)
    E = series.block("E", 2.0)
    v = series.block("v", 2.0)
    low, high = _split_blocks(series.q, R0)
    allq = [int(x) for x in series.q]
    return (
        _running(E, 2.0, s + 1, r, low)
        + _running(E, 1.0, s + 2, r, low)
        + _running(E, math.inf, s + 1, r, allq)
        + _running(E, 1.0, s + 1, r, high)
        + _running(v, math.inf, s, r, allq)
        + _running(v, 1.0, s + 2, r, allq)
    )


def functional_Z(series: NormSeries, p: float, R0: float, dim: int = 2) -> np.ndarray:
    """``Z_p(t_i)`` from the L^p block norms above the threshold."""
    E = series.block("E", p)
    v = series.block("v", p)
    _, high = _split_blocks(series.q, R0)
    a = dim / p
    return (
        _running(E, math.inf, a, 1.0, high)
        + _running(E, 1.0, a, 1.0, high)
        + _running(v, math.inf, a - 1, 1.0, high)
        + _running(v, 1.0, a + 1, 1.0, high)
    )


def initial_Y(series: NormSeries, s: float, r: float, R0: float) -> float:
    E0 = series.norms[("E", 2.0)][0]
    v0 = series.norms[("v", 2.0)][0]
    q = series.q
    low = np.array([HybridThreshold(R0).is_low(int(x)) for x in q], dtype=bool)
    return float(
        lp_sum(2.0 ** (s * q[low]) * E0[low], r)
        + lp_sum(2.0 ** ((s + 1) * q[~low]) * E0[~low], r)
        + lp_sum(2.0 ** (s * q) * v0, r)
    )


def initial_Z(series: NormSeries, p: float, R0: float, dim: int = 2) -> float:
    E0 = series.norms[("E", float(p))][0]
    v0 = series.norms[("v", float(p))][0]
    q = series.q
    high = np.array([not HybridThreshold(R0).is_low(int(x)) for x in q], dtype=bool)
    a = dim / p
    return float(lp_sum(2.0 ** (a * q[high]) * E0[high], 1) + lp_sum(2.0 ** ((a - 1) * q[high]) * v0[high], 1))


@dataclass
class FunctionalReport:
    times: np.ndarray
    Y: np.ndarray
    Z: Dict[float, np.ndarray]
    X: Dict[float, np.ndarray]
    Y0: float
    Z0: Dict[float, float]
    X0: Dict[float, float]
    U_tilde: np.ndarray
    s: float
    r: float
    R0: float
    residuals: Dict[str, np.ndarray] = field(default_factory=dict)

    def ratio(self, p: float) -> float:
        """``sup_t X_p(t) / X_{p,0}``; NaN for the rest state."""
        x0 = self.X0[float(p)]
        if x0 == 0:
            return math.nan
        return float(np.max(self.X[float(p)]) / x0)


def assemble_report(
    series: NormSeries,
    s: float = 0.0,
    r: float = 1.0,
    R0: float = 2.0,
    ps: Sequence[float] = (2.0, 4.0),
    dim: int = 2,
    residuals: Optional[Dict[str, np.ndarray]] = None,
) -> FunctionalReport:
    """``X_p = Y_s + Z_p`` for every ``p`` in ``ps``, plus the initial values."""
    Y = functional_Y(series, s, r, R0, dim)
    Y0 = initial_Y(series, s, r, R0)
    Z, X, Z0, X0 = {}, {}, {}, {}
    for p in ps:
        p = float(p)
        Z[p] = functional_Z(series, p, R0, dim)
        X[p] = Y + Z[p]
        Z0[p] = initial_Z(series, p, R0, dim)
        X0[p] = Y0 + Z0[p]
    return FunctionalReport(
        times=series.times,
        Y=Y,
        Z=Z,
        X=X,
        Y0=Y0,
        Z0=Z0,
        X0=X0,
        U_tilde=series.U_tilde,
        s=s,
        r=r,
        R0=R0,
        residuals=dict(residuals or {}),
    )


@dataclass(frozen=True)
class Verdict:
    p: float
    ratio: float
    constant: float
    passed: Optional[bool]
    hypothesis_max: float
    lambda1: float
    hypothesis_held: bool
    rest_state: bool

    def describe(self) -> str:
        if self.rest_state:
            return f"p={self.p:g}: rest state (X_p0 = 0), ratio undefined"
        tag = "PASS" if self.passed else "FAIL"
        hyp = "held" if self.hypothesis_held else "VIOLATED"
        return (
            f"p={self.p:g}: sup X/X0 = {self.ratio:.4f} (<= {self.constant:g}: {tag}); "
            f"max X_p2 = {self.hypothesis_max:.4e} vs lambda1 = {self.lambda1:g} ({hyp})"
        )


def boundedness_report(
    report: FunctionalReport, lambda1: float, constant: float = 1.5, p2: Optional[float] = None
) -> Dict[float, Verdict]:
    """Ratio check for every ``p`` of the report, plus the smallness hypothesis on ``X_{p2}``."""
    if p2 is None:
        p2 = max(report.X)
    hyp_max = float(np.max(report.X[float(p2)]))
    held = hyp_max <= lambda1
    out = {}
    for p in report.X:
        ratio = report.ratio(p)
        rest = math.isnan(ratio)
        out[p] = Verdict(
            p=p,
            ratio=ratio,
            constant=constant,
            passed=None if rest else bool(ratio <= constant),
            hypothesis_max=hyp_max,
            lambda1=lambda1,
            hypothesis_held=held,
            rest_state=rest,
        )
    return out
