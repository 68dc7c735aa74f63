"""Pseudo-spectral evolution of the incompressible Hookean elastic system

    v_t + v.grad v + grad p = mu Lap v + E_jk d_j E_ik + d_j E_ij,
    E_t + v.grad E = grad v E + grad v,          div v = 0,

on the periodic box.  The strain ``E`` is the prognostic variable; the
quantity ``c = Lambda^{-1} div E`` only enters the exponential step, where
the part of ``E`` that generates ``c`` is advanced together with ``v`` by the
exact Green matrix and the complement by a plain predictor-corrector rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from .linear import default_R0, green_entries
from .littlewood_paley import build_partition, block_lp_norms, embed
from .monitor import NormSeries
from .spectral import (
    Grid,
    SpectralField,
    forward_array,
    inverse_array,
    leray_coeffs,
    leray_project,
    pointwise_magnitude,
    random_field,
)

STRESS_FORMS = ("divergence", "advective")
DATA_KINDS = ("flowmap", "oscillatory", "zero")


class SimulationAborted(RuntimeError):
    """Non-finite values appeared; ``state`` is the last finite state."""

    def __init__(self, message: str, state: "FlowState"):
        super().__init__(message)
        self.state = state


class CFLWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimConfig:
    dim: int = 2
    M: int = 128
    L: float = 32.0 * math.pi
    mu: float = 1.0
    dt: float = 1e-3
    T: float = 10.0
    output_every: int = 100
    dealias: float = 2.0 / 3.0
    seed: int = 0
    data: str = "flowmap"
    amplitude: float = 1e-2
    pseudo_time: float = 1.0
    band: int = 2
    eps: float = 0.5
    p_osc: float = 4.0
    envelope: Optional[float] = None
    R0: Optional[float] = None
    q_min: Optional[int] = None
    q_max: Optional[int] = None
    p1: float = 2.0
    p2: float = 4.0
    s: float = 0.0
    r: float = 1.0
    lambda1: float = 2.0
    nonlinear: bool = True
    stress_form: str = "divergence"

    def __post_init__(self):
        def bad(key, msg):
            raise ValueError(f"{key} {msg}")

        if self.dim not in (2, 3):
            bad("dim", f"must be 2 or 3, got {self.dim}")
        if self.M < 8 or self.M & (self.M - 1):
            bad("M", f"must be a power of two >= 8, got {self.M}")
        if not self.L > 0:
            bad("L", f"must be > 0, got {self.L}")
        if not self.mu > 0:
            bad("mu", f"must be > 0, got {self.mu}")
        if not self.dt > 0:
            bad("dt", f"must be > 0, got {self.dt}")
        if not self.T > 0:
            bad("T", f"must be > 0, got {self.T}")
        if self.output_every < 1:
            bad("output_every", f"must be >= 1, got {self.output_every}")
        if not 0.5 < self.dealias <= 1.0:
            bad("dealias", f"must lie in (1/2, 1], got {self.dealias}")
        if self.seed < 0:
            bad("seed", f"must be >= 0, got {self.seed}")
        if self.data not in DATA_KINDS:
            bad("data", f"must be one of {DATA_KINDS}, got {self.data!r}")
        if not self.amplitude >= 0:
            bad("amplitude", f"must be >= 0, got {self.amplitude}")
        if not self.pseudo_time > 0:
            bad("pseudo_time", f"must be > 0, got {self.pseudo_time}")
        if self.band < 1:
            bad("band", f"must be >= 1, got {self.band}")
        if not self.eps > 0:
            bad("eps", f"must be > 0, got {self.eps}")
        if not self.p_osc >= self.dim:
            bad("p_osc", f"must be >= dim, got {self.p_osc}")
        if self.envelope is not None and not self.envelope > 0:
            bad("envelope", f"must be > 0, got {self.envelope}")
        if self.R0 is not None and not self.R0 > 0:
            bad("R0", f"must be > 0, got {self.R0}")
        for key in ("p1", "p2"):
            if not getattr(self, key) >= 1:
                bad(key, f"must be >= 1, got {getattr(self, key)}")
        if not self.r >= 1:
            bad("r", f"must be >= 1, got {self.r}")
        if not self.lambda1 > 0:
            bad("lambda1", f"must be > 0, got {self.lambda1}")
        if self.stress_form not in STRESS_FORMS:
            bad("stress_form", f"must be one of {STRESS_FORMS}, got {self.stress_form!r}")

    def grid(self) -> Grid:
        return Grid(self.dim, self.M, self.L)

    @property
    def threshold(self) -> float:
        return self.R0 if self.R0 is not None else default_R0(self.mu)

    @property
    def ps(self) -> Tuple[float, ...]:
        return tuple(sorted({2.0, float(self.p1), float(self.p2)}))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class FlowState:
    v: SpectralField
    E: SpectralField
    t: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if self.v.rank != "vector":
            raise ValueError("v must be a vector field")
        if self.E.rank != "tensor":
            raise ValueError("E must be a rank-2 tensor field")
        if self.v.grid != self.E.grid:
            raise ValueError("v and E live on different grids")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.v.coeffs)) and np.all(np.isfinite(self.E.coeffs)))

    def energy(self) -> float:
        """``(||v||_2^2 + ||E||_2^2) / 2`` by Parseval."""
        vol = self.grid.volume
        return 0.5 * vol * float(np.sum(np.abs(self.v.coeffs) ** 2) + np.sum(np.abs(self.E.coeffs) ** 2))

    def c(self) -> SpectralField:
        return strain_to_c(self.E)


@dataclass(frozen=True)
class ConstraintResiduals:
    r_det: float
    r_divT: float
    r_compat: float

    def __post_init__(self):
        for name in ("r_det", "r_divT", "r_compat"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.r_det, self.r_divT, self.r_compat)


def zero_state(grid: Grid, mu: float = 1.0) -> FlowState:
    d = grid.dim
    return FlowState(
        SpectralField(grid, np.zeros((d,) + grid.shape, dtype=complex)),
        SpectralField(grid, np.zeros((d, d) + grid.shape, dtype=complex)),
        0.0,
        mu,
    )


# -- c and the strain splitting -----------------------------------------------


def _unit_xi(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """``xi / |xi|`` on the derivative wavevector (zero where it vanishes) and ``|xi|``."""
    xi = grid.xi_deriv
    mag = np.sqrt(np.sum(xi * xi, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.where(mag > 0, xi / np.where(mag > 0, mag, 1.0), 0.0)
    return n, mag


def _c_coeffs(E_hat: np.ndarray, n: np.ndarray) -> np.ndarray:
    return 1j * np.einsum("ij...,j...->i...", E_hat, n)


def _strain_from_c(c_hat: np.ndarray, n: np.ndarray) -> np.ndarray:
    return -1j * c_hat[:, None] * n[None, :]


def strain_to_c(E: SpectralField) -> SpectralField:
    """``c = Lambda^{-1} div E``, with ``(div E)_i = d_j E_ij``; the mean is dropped."""
    n, _ = _unit_xi(E.grid)
    return SpectralField(E.grid, _c_coeffs(E.coeffs, n))


# -- nonlinear terms ----------------------------------------------------------


@dataclass
class _Tendency:
    Nv: np.ndarray  # projected velocity tendency
    NE: np.ndarray  # strain tendency
    grad_v_inf: float
    v_inf: float


def _products(grid: Grid, v_hat, E_hat, mask, stress_form: str, nonlinear: bool = True) -> _Tendency:
    nd = grid.dim
    xi = grid.xi_deriv
    vm = v_hat * mask
    gv = inverse_array(1j * vm[:, None] * xi[None], nd)  # gv[i, j] = d_j v_i
    v = inverse_array(vm, nd)
    gmax = float(np.max(pointwise_magnitude(gv, nd)))
    vmax = float(np.max(pointwise_magnitude(v, nd)))
    if not nonlinear:
        z = np.zeros_like(v_hat)
        return _Tendency(z, np.zeros_like(E_hat), gmax, vmax)
    Em = E_hat * mask
    E = inverse_array(Em, nd)
    gE = inverse_array(1j * Em[:, :, None] * xi[None, None], nd)  # gE[i, j, k] = d_k E_ij

    rhs_v = -forward_array(np.einsum("k...,ik...->i...", v, gv), nd)
    if stress_form == "advective":
        rhs_v += forward_array(np.einsum("jk...,ikj...->i...", E, gE), nd)
    else:
        B = forward_array(np.einsum("ik...,jk...->ij...", E, E), nd)
        rhs_v += 1j * np.einsum("ij...,j...->i...", B, xi)
    rhs_E = -np.einsum("k...,ijk...->ij...", v, gE) + np.einsum("ik...,kj...->ij...", gv, E)
    return _Tendency(
        leray_coeffs(grid, rhs_v * mask),
        forward_array(rhs_E, nd) * mask,
        gmax,
        vmax,
    )


def nonlinear_rhs(
    state: FlowState, dealias: float = 2.0 / 3.0, stress_form: str = "divergence"
) -> Tuple[SpectralField, SpectralField]:
    """Full tendencies ``(dv/dt, dE/dt)``, linear terms included; products dealiased."""
    if stress_form not in STRESS_FORMS:
        raise ValueError(f"stress_form must be one of {STRESS_FORMS}")
    g = state.grid
    tend = _products(g, state.v.coeffs, state.E.coeffs, g.dealias_mask(dealias), stress_form)
    xi = g.xi_deriv
    div_E = 1j * np.einsum("ij...,j...->i...", state.E.coeffs, xi)
    lap = np.sum(xi * xi, axis=0)
    dv = tend.Nv + leray_coeffs(g, div_E) - state.mu * lap * state.v.coeffs
    dE = tend.NE + 1j * state.v.coeffs[:, None] * xi[None]
    if not (np.all(np.isfinite(dv)) and np.all(np.isfinite(dE))):
        raise SimulationAborted("non-finite tendency", state)
    return SpectralField(g, dv), SpectralField(g, dE)


def stress_form_gap(state: FlowState, dealias: float = 2.0 / 3.0) -> float:
    """Relative L^2 gap between the two stress forms (zero when ``div E^T = 0``)."""
    g = state.grid
    mask = g.dealias_mask(dealias)
    z = np.zeros_like(state.v.coeffs)
    a = _products(g, z, state.E.coeffs, mask, "advective").Nv
    b = _products(g, z, state.E.coeffs, mask, "divergence").Nv
    den = np.linalg.norm(b.ravel())
    return 0.0 if den == 0 else float(np.linalg.norm((a - b).ravel()) / den)


# -- exponential step ---------------------------------------------------------


@dataclass
class _StepOps:
    n: np.ndarray
    expA: np.ndarray  # (2, 2, *grid)
    phi1: np.ndarray
    phi2: np.ndarray
    mask: np.ndarray


def _phi_functions(mu: float, xi: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """``phi_1(hA)``, ``phi_2(hA)`` for every ``|xi|`` from one augmented exponential."""
    k = len(xi)
    big = np.zeros((k, 6, 6))
    big[:, 0, 1] = -h * xi
    big[:, 1, 0] = h * xi
    big[:, 1, 1] = -h * mu * xi * xi
    big[:, 0, 2] = big[:, 1, 3] = 1.0
    big[:, 2, 4] = big[:, 3, 5] = 1.0
    ex = expm(big)
    return ex[:, :2, 2:4], ex[:, :2, 4:6]


@lru_cache(maxsize=8)
def _step_ops(grid: Grid, mu: float, h: float, dealias: float) -> _StepOps:
    n, mag = _unit_xi(grid)
    uniq, inv = np.unique(mag.ravel(), return_inverse=True)
    G = green_entries(mu, uniq, h).matrix()
    p1, p2 = _phi_functions(mu, uniq, h)

    def spread(m):
        return np.moveaxis(m[inv.reshape(grid.shape)], (-2, -1), (0, 1))

    return _StepOps(n, spread(G), spread(p1), spread(p2), grid.dealias_mask(dealias))


def _apply(m: np.ndarray, c: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return m[0, 0] * c + m[0, 1] * v, m[1, 0] * c + m[1, 1] * v


class _Stepper:
    """ETD2RK (Cox-Matthews) on ``(P c, v)``; Heun on the rest of ``E``."""

    def __init__(self, grid: Grid, mu: float, h: float, dealias: float, stress_form: str, nonlinear: bool):
        self.grid, self.mu, self.h = grid, mu, h
        self.ops = _step_ops(grid, float(mu), float(h), float(dealias))
        self.stress_form = stress_form
        self.nonlinear = nonlinear

    def split(self, E_hat):
        n = self.ops.n
        c = leray_coeffs(self.grid, _c_coeffs(E_hat, n))
        return c, E_hat - _strain_from_c(c, n)

    def tendency(self, v_hat, E_hat):
        t = _products(self.grid, v_hat, E_hat, self.ops.mask, self.stress_form, self.nonlinear)
        Nc, NR = self.split(t.NE)
        return t, Nc, NR

    def step(self, v_hat, E_hat, pre=None):
        """Advance one step; ``pre`` is the tendency at the current state if already known."""
        ops, h, n = self.ops, self.h, self.ops.n
        c, R = self.split(E_hat)
        t0, Nc0, NR0 = pre if pre is not None else self.tendency(v_hat, E_hat)
        ac, av = _apply(ops.expA, c, v_hat)
        if self.nonlinear:
            dc, dv = _apply(ops.phi1, Nc0, t0.Nv)
            ac, av = ac + h * dc, av + h * dv
        av = leray_coeffs(self.grid, av)
        aR = R + h * NR0
        if not self.nonlinear:
            return av, _strain_from_c(ac, n) + aR, t0
        t1, Nc1, NR1 = self.tendency(av, _strain_from_c(ac, n) + aR)
        dc, dv = _apply(ops.phi2, Nc1 - Nc0, t1.Nv - t0.Nv)
        c_new = leray_coeffs(self.grid, ac + h * dc)
        v_new = leray_coeffs(self.grid, av + h * dv)
        R_new = aR + 0.5 * h * (NR1 - NR0)
        return v_new, _strain_from_c(c_new, n) + R_new, t0

    def cfl(self, v_inf: float) -> float:
        return v_inf * self.h / self.grid.dx


def etd_step(
    state: FlowState,
    dt: float,
    dealias: float = 2.0 / 3.0,
    stress_form: str = "divergence",
    nonlinear: bool = True,
) -> FlowState:
    """One second-order exponential step of size ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    st = _Stepper(state.grid, state.mu, dt, dealias, stress_form, nonlinear)
    v, E, t0 = st.step(state.v.coeffs, state.E.coeffs)
    if st.cfl(t0.v_inf) > 0.5:
        warnings.warn(f"CFL number {st.cfl(t0.v_inf):.3f} exceeds 0.5", CFLWarning, stacklevel=2)
    new = FlowState(SpectralField(state.grid, v), SpectralField(state.grid, E), state.t + dt, state.mu)
    if not new.is_finite():
        raise SimulationAborted(f"non-finite values at t={new.t:g}", state)
    return new


# -- constraints --------------------------------------------------------------


def _det_identity_plus(E: np.ndarray) -> np.ndarray:
    d = E.shape[0]
    F = np.moveaxis(E, (0, 1), (-2, -1)) + np.eye(d)
    return np.linalg.det(F)


def constraint_residuals(state: FlowState, pad: bool = True) -> ConstraintResiduals:
    """``max |det(I+E) - 1|``, relative ``||d_i E_ij||``, relative compatibility residual.

    The compatibility products are formed on the grid of twice the resolution
    so that they are free of aliasing for any state without a Nyquist mode.
    """
    g = state.grid
    Eh = state.E.coeffs
    if not np.any(Eh):
        return ConstraintResiduals(0.0, 0.0, 0.0)
    nd = g.dim
    E = inverse_array(Eh, nd)
    r_det = float(np.max(np.abs(_det_identity_plus(E) - 1.0)))

    xi = g.xi_deriv
    divT = 1j * np.einsum("ij...,i...->j...", Eh, xi)
    r_divT = float(np.linalg.norm(divT.ravel()) / np.linalg.norm(Eh.ravel()))

    if pad:
        try:
            fine = Grid(nd, 2 * g.M, g.L)
            Ef = embed(state.E, fine)
            g, Eh = fine, Ef.coeffs
        except ValueError:
            pass
    xi = g.xi_deriv
    E = inverse_array(Eh, nd)
    dE = 1j * Eh[None] * xi[:, None, None]  # dE[m, i, j] = d_m E_ij
    lhs = dE - np.swapaxes(dE, 0, 2)  # d_m E_ij - d_j E_im
    # K[l, m, i, j] = E_lj E_im - E_lm E_ij
    K = np.einsum("lj...,im...->lmij...", E, E) - np.einsum("lm...,ij...->lmij...", E, E)
    rhs = 1j * np.einsum("lmij...,l...->mij...", forward_array(K, nd), xi)
    den = np.linalg.norm(dE.ravel())
    r_compat = float(np.linalg.norm((lhs - rhs).ravel()) / den) if den > 0 else 0.0
    return ConstraintResiduals(r_det, r_divT, r_compat)


# -- initial data -------------------------------------------------------------


def _transport_rhs(grid, u_phys, gu, E_hat, mask):
    nd = grid.dim
    xi = grid.xi_deriv
    Em = E_hat * mask
    E = inverse_array(Em, nd)
    gE = inverse_array(1j * Em[:, :, None] * xi[None, None], nd)
    out = -np.einsum("k...,ijk...->ij...", u_phys, gE) + np.einsum("ik...,kj...->ij...", gu, E) + gu
    return forward_array(out, nd) * mask


def flowmap_initial_data(
    grid: Grid,
    seed: int,
    amplitude: float,
    pseudo_time: float = 1.0,
    band: int = 2,
    mu: float = 1.0,
    dealias: float = 2.0 / 3.0,
    n_steps: Optional[int] = None,
) -> FlowState:
    """Strain obtained by transporting ``E = 0`` along a frozen seeded velocity.

    ``u`` is divergence free, supported on ``1 <= |k|_inf <= band`` and scaled
    so that ``max |grad u| = amplitude``; the strain solves the deformation
    transport equation for ``pseudo_time`` with classical RK4.  The velocity
    ``v0`` is an independent field of the same band with ``max |v0| = amplitude``.
    """
    if not amplitude >= 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if not pseudo_time > 0:
        raise ValueError(f"pseudo_time must be > 0, got {pseudo_time}")
    if amplitude == 0:
        return zero_state(grid, mu)
    nd = grid.dim
    rng = np.random.default_rng(seed)
    u = leray_project(random_field(grid, rng, (nd,), kmax=band, kmin=1))
    v = leray_project(random_field(grid, rng, (nd,), kmax=band, kmin=1))
    mask = grid.dealias_mask(dealias)

    gu = inverse_array(1j * u.coeffs[:, None] * grid.xi_deriv[None], nd)
    scale = amplitude / np.max(pointwise_magnitude(gu, nd))
    gu *= scale
    u_phys = inverse_array(u.coeffs, nd) * scale
    v = v * (amplitude / np.max(pointwise_magnitude(inverse_array(v.coeffs, nd), nd)))

    if n_steps is None:
        n_steps = int(math.ceil(pseudo_time * max(20.0, 100.0 * amplitude)))
    h = pseudo_time / n_steps
    E = np.zeros((nd, nd) + grid.shape, dtype=complex)
    for _ in range(n_steps):
        k1 = _transport_rhs(grid, u_phys, gu, E, mask)
        k2 = _transport_rhs(grid, u_phys, gu, E + 0.5 * h * k1, mask)
        k3 = _transport_rhs(grid, u_phys, gu, E + 0.5 * h * k2, mask)
        k4 = _transport_rhs(grid, u_phys, gu, E + h * k3, mask)
        E = E + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(E)):
            raise ValueError(f"amplitude {amplitude} too large: strain construction diverged")

    det = _det_identity_plus(inverse_array(E, nd))
    if np.min(det) <= 0:
        raise ValueError(f"amplitude {amplitude} too large: det(I+E0) reaches {np.min(det):.3g}")
    state = FlowState(SpectralField(grid, v.coeffs * mask), SpectralField(grid, E), 0.0, mu)
    res = constraint_residuals(state)
    if res.r_det > 1e-2 or res.r_compat > 1e-2:
        raise ValueError(
            f"amplitude {amplitude} too large: construction residuals {res.as_tuple()} unresolved on this grid"
        )
    return state


@dataclass(frozen=True)
class OscillatoryData:
    velocity: SpectralField
    amplitude: float
    projection_defect: float


def oscillatory_velocity(
    grid: Grid, eps: float, p: float, envelope: Optional[float] = None
) -> OscillatoryData:
    """``eps^{N/p-1} sin(x_1/eps) g(x) e_2`` with a centred Gaussian ``g`` of width ``envelope``.

    The field is Leray projected and its mean removed; ``projection_defect``
    is the relative L^2 change caused by the projection.
    """
    nd = grid.dim
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if not p >= nd:
        raise ValueError(f"p must lie in [N, inf), got {p}")
    if 1.0 / eps >= grid.nyquist:
        raise ValueError(f"1/eps = {1 / eps:g} is not below the grid Nyquist wavenumber {grid.nyquist:g}")
    width = envelope if envelope is not None else grid.L / 16.0
    x = grid.coordinates
    r2 = sum((x[i] - grid.L / 2) ** 2 for i in range(nd))
    amp = eps ** (nd / p - 1.0)
    samples = np.zeros((nd,) + grid.shape)
    samples[1] = amp * np.sin(x[0] / eps) * np.exp(-r2 / (2 * width**2))
    raw = forward_array(samples, nd)
    raw[(slice(None),) + (0,) * nd] = 0.0
    proj = leray_coeffs(grid, raw)
    den = np.linalg.norm(raw.ravel())
    defect = float(np.linalg.norm((proj - raw).ravel()) / den) if den > 0 else 0.0
    return OscillatoryData(SpectralField(grid, proj), amp, defect)


def initial_state(config: SimConfig) -> FlowState:
    grid = config.grid()
    if config.data == "zero" or config.amplitude == 0:
        return zero_state(grid, config.mu)
    if config.data == "flowmap":
        return flowmap_initial_data(
            grid, config.seed, config.amplitude, config.pseudo_time, config.band, config.mu, config.dealias
        )
    osc = oscillatory_velocity(grid, config.eps, config.p_osc, config.envelope)
    v = osc.velocity * (config.amplitude / osc.amplitude) if osc.amplitude else osc.velocity
    v = v.with_coeffs(v.coeffs * grid.dealias_mask(config.dealias))
    z = zero_state(grid, config.mu)
    return FlowState(v, z.E, 0.0, config.mu)


# -- driver -------------------------------------------------------------------


@dataclass
class SimulationResult:
    config: SimConfig
    series: NormSeries
    final: FlowState
    residuals: Dict[str, np.ndarray]
    energy: np.ndarray
    stress_gap: np.ndarray
    snapshots: List[FlowState] = field(default_factory=list)
    aborted: bool = False
    message: str = ""
    cfl_max: float = 0.0


def sample_block_norms(state: FlowState, part, ps) -> Dict[Tuple[str, float], np.ndarray]:
    out = {}
    for name, f in (("v", state.v), ("E", state.E), ("c", state.c())):
        for p, vals in block_lp_norms(f, part, ps).items():
            out[(name, p)] = vals
    return out


def run_simulation(
    config: SimConfig,
    initial: Optional[FlowState] = None,
    keep_snapshots: bool = False,
    on_output: Optional[Callable[[FlowState], None]] = None,
) -> SimulationResult:
    """Advance to ``T`` and sample block norms, residuals and energy every ``output_every`` steps.

    ``dt`` is shrunk if necessary so that a whole number of steps ends at ``T``.
    On non-finite values the run stops and the last finite state is returned
    with ``aborted`` set.
    """
    grid = config.grid()
    state = initial if initial is not None else initial_state(config)
    part = build_partition(grid, config.q_min, config.q_max)
    n_steps = max(1, int(math.ceil(config.T / config.dt - 1e-9)))
    h = config.T / n_steps
    st = _Stepper(grid, config.mu, h, config.dealias, config.stress_form, config.nonlinear)
    ps = config.ps

    times, grads, energy, gap = [], [], [], []
    norms: Dict[Tuple[str, float], list] = {}
    res = {"r_det": [], "r_divT": [], "r_compat": []}
    snaps: List[FlowState] = []
    U = [0.0]
    g_prev = None
    aborted, message, cfl_max = False, "", 0.0

    def record(s: FlowState, gv: float):
        times.append(s.t)
        grads.append(gv)
        for k, v in sample_block_norms(s, part, ps).items():
            norms.setdefault(k, []).append(v)
        for k, v in zip(res, constraint_residuals(s).as_tuple()):
            res[k].append(v)
        energy.append(s.energy())
        gap.append(stress_form_gap(s, config.dealias))
        if keep_snapshots:
            snaps.append(s)
        if on_output is not None:
            on_output(s)

    U_hist = []
    for k in range(n_steps + 1):
        pre = st.tendency(state.v.coeffs, state.E.coeffs)
        gv = pre[0].grad_v_inf
        if g_prev is not None:
            U.append(U[-1] + 0.5 * h * (g_prev + gv))
        g_prev = gv
        if k % config.output_every == 0 or k == n_steps:
            record(state, gv)
            U_hist.append(U[-1])
        if k == n_steps:
            break
        cfl = st.cfl(pre[0].v_inf)
        if cfl > 0.5 and cfl > cfl_max:
            warnings.warn(f"CFL number {cfl:.3f} exceeds 0.5 at t={state.t:g}", CFLWarning, stacklevel=2)
        cfl_max = max(cfl_max, cfl)
        v, E, _ = st.step(state.v.coeffs, state.E.coeffs, pre)
        new = FlowState(SpectralField(grid, v), SpectralField(grid, E), (k + 1) * h, config.mu)
        if not new.is_finite():
            aborted, message = True, f"non-finite values at t={(k + 1) * h:g}; kept t={state.t:g}"
            warnings.warn(message, RuntimeWarning, stacklevel=2)
            break
        state = new

    series = NormSeries(
        np.array(times),
        part.q_values,
        {k: np.array(v) for k, v in norms.items()},
        np.array(grads),
        np.array(U_hist),
    )
    return SimulationResult(
        config=config,
        series=series,
        final=state,
        residuals={k: np.array(v) for k, v in res.items()},
        energy=np.array(energy),
        stress_gap=np.array(gap),
        snapshots=snaps,
        aborted=aborted,
        message=message,
        cfl_max=cfl_max,
    )
