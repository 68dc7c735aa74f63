"""Periodic-box Fourier infrastructure.

Fields live on a torus of side ``L`` sampled with ``M`` points per axis.
Coefficients use the normalisation ``f_hat[k] = mean(f * exp(-i xi_k . x))``
so that a constant field ``1`` has zero mode ``1`` and ``cos(xi x)`` splits
into two modes of value ``1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sfft

#: relative threshold for contract checks on conjugate symmetry / realness
SYMMETRY_TOL = 1e-12


class ContractViolation(ValueError):
    """An input broke a documented precondition of an operation."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on ``[0, L)^dim``."""

    dim: int = 2
    M: int = 128
    L: float = 2 * math.pi * 16

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not _is_power_of_two(int(self.M)) or self.M < 8:
            raise ValueError(f"M must be a power of two >= 8, got {self.M}")
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dim == other.dim
            and self.M == other.M
            and self.L == other.L
        )

    def __hash__(self):
        return hash((self.dim, self.M, self.L))

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.M,) * self.dim

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def volume(self) -> float:
        return self.L**self.dim

    @property
    def nyquist(self) -> float:
        """Largest representable wavenumber along an axis, ``pi M / L``."""
        return math.pi * self.M / self.L

    @cached_property
    def k_index(self) -> np.ndarray:
        """Integer lattice indices, shape ``(dim, M, ..., M)``, FFT ordering."""
        k = np.fft.fftfreq(self.M, d=1.0 / self.M).astype(int)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def xi(self) -> np.ndarray:
        """Full wavevectors ``2 pi k / L``."""
        return (2 * math.pi / self.L) * self.k_index

    @cached_property
    def xi_deriv(self) -> np.ndarray:
        """Wavevectors used by odd-order multipliers; Nyquist row zeroed."""
        xi = self.xi.copy()
        xi[self.k_index == -self.M // 2] = 0.0
        return xi

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi**2, axis=0))

    @cached_property
    def coordinates(self) -> np.ndarray:
        x = np.arange(self.M) * self.dx
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean mask keeping ``|k_j| <= fraction * M/2`` on every axis.

        The unpaired Nyquist mode is always excluded.
        """
        if not 0.5 < fraction <= 1.0:
            raise ValueError(f"dealias fraction must lie in (1/2, 1], got {fraction}")
        kmax = fraction * self.M / 2
        absk = np.abs(self.k_index)
        return np.all((absk <= kmax + 1e-12) & (self.k_index != -self.M // 2), axis=0)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar, vector or tensor field.

    ``coeffs`` has shape ``component_shape + grid.shape`` where the component
    shape is ``()``, ``(dim,)`` or ``(dim, dim)``.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        nd = self.grid.dim
        comp = self.coeffs.shape[: self.coeffs.ndim - nd]
        if self.coeffs.shape[self.coeffs.ndim - nd :] != self.grid.shape:
            raise ValueError(
                f"coefficient array shape {self.coeffs.shape} does not end with grid shape {self.grid.shape}"
            )
        if comp not in ((), (nd,), (nd, nd)):
            raise ValueError(f"unsupported component shape {comp}")

    @property
    def component_shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[: self.coeffs.ndim - self.grid.dim]

    @property
    def rank(self) -> str:
        return {0: "scalar", 1: "vector", 2: "tensor"}[len(self.component_shape)]

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def physical(self) -> np.ndarray:
        return inverse_transform(self)

    def zero_mode(self) -> np.ndarray:
        return self.coeffs[(...,) + (0,) * self.grid.dim]

    def conjugate_asymmetry(self) -> float:
        """Relative size of the part violating ``f_hat(-k) = conj(f_hat(k))``."""
        flipped = _reflect(self.coeffs, self.grid.dim)
        num = np.linalg.norm((self.coeffs - np.conj(flipped)).ravel())
        den = np.linalg.norm(self.coeffs.ravel())
        return 0.0 if den == 0 else float(num / den)

    def l2_coeff_norm(self) -> float:
        """``sqrt(L^dim * sum |f_hat|^2)``; equals the grid L2 norm by Parseval."""
        return float(math.sqrt(self.grid.volume) * np.linalg.norm(self.coeffs.ravel()))


def _check_same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def _reflect(coeffs: np.ndarray, nd: int) -> np.ndarray:
    """Index map ``k -> -k`` on the trailing ``nd`` FFT axes."""
    out = coeffs
    for ax in range(coeffs.ndim - nd, coeffs.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def zeros(grid: Grid, component_shape: Tuple[int, ...] = ()) -> SpectralField:
    return SpectralField(grid, np.zeros(component_shape + grid.shape, dtype=complex))


# -- transforms ---------------------------------------------------------------


def fft_axes(nd: int) -> Tuple[int, ...]:
    return tuple(range(-nd, 0))


def forward_array(samples: np.ndarray, nd: int) -> np.ndarray:
    M = samples.shape[-1]
    return sfft.fftn(samples, axes=fft_axes(nd)) / M**nd


def inverse_array(coeffs: np.ndarray, nd: int) -> np.ndarray:
    M = coeffs.shape[-1]
    return sfft.ifftn(coeffs, axes=fft_axes(nd)).real * M**nd


def forward_transform(samples: np.ndarray, grid: Grid) -> SpectralField:
    """Transform real samples (``component_shape + grid.shape``) to a field."""
    samples = np.asarray(samples)
    if samples.ndim < grid.dim or samples.shape[samples.ndim - grid.dim :] != grid.shape:
        raise ValueError(
            f"sample array shape {samples.shape} incompatible with grid of shape {grid.shape}"
        )
    if np.iscomplexobj(samples):
        raise ValueError("physical samples must be real")
    return SpectralField(grid, forward_array(samples.astype(float), grid.dim))


def inverse_transform(field: SpectralField) -> np.ndarray:
    """Return real samples; rejects coefficients that are not conjugate symmetric."""
    nd = field.grid.dim
    M = field.grid.M
    out = sfft.ifftn(field.coeffs, axes=fft_axes(nd)) * M**nd
    scale = np.max(np.abs(out)) if out.size else 0.0
    if scale > 0 and np.max(np.abs(out.imag)) > SYMMETRY_TOL * scale:
        raise ContractViolation(
            "inverse_transform: coefficients are not conjugate symmetric "
            f"(imaginary residue {np.max(np.abs(out.imag)) / scale:.3e} relative)"
        )
    return out.real


# -- multipliers --------------------------------------------------------------


def spectral_derivative(field: SpectralField, j: int) -> SpectralField:
    """``d/dx_j``; the unpaired Nyquist row is zeroed."""
    g = field.grid
    if not 0 <= j < g.dim:
        raise IndexError(f"direction {j} out of range for dim {g.dim}")
    return field.with_coeffs(1j * g.xi_deriv[j] * field.coeffs)


def gradient(field: SpectralField) -> SpectralField:
    """Append a trailing derivative index: ``(grad f)_{..., j} = d_j f``."""
    g = field.grid
    if field.rank == "tensor":
        raise ValueError("gradient of a tensor field is not a SpectralField")
    parts = [1j * g.xi_deriv[j] * field.coeffs for j in range(g.dim)]
    return field.with_coeffs(np.stack(parts, axis=len(field.component_shape)))


def divergence(field: SpectralField) -> SpectralField:
    """Contract the last component index with the derivative: ``d_j f_{..j}``."""
    if field.rank == "scalar":
        raise ValueError("divergence needs a vector or tensor field")
    g = field.grid
    c = np.sum(1j * g.xi_deriv * field.coeffs, axis=len(field.component_shape) - 1)
    return SpectralField(g, c)


def lambda_power(field: SpectralField, s: float) -> SpectralField:
    """Fractional multiplier ``|xi|^s``.

    The zero mode maps to 0. For ``s < 0`` a nonzero zero mode is a contract
    violation.
    """
    g = field.grid
    if s == 0:
        return field
    zm = field.zero_mode()
    if s < 0 and np.any(np.abs(zm) > SYMMETRY_TOL * max(1.0, np.max(np.abs(field.coeffs)))):
        raise ContractViolation(
            f"lambda_power with s={s} < 0 requires a zero-mean field (zero mode {np.max(np.abs(zm)):.3e})"
        )
    with np.errstate(divide="ignore"):
        mult = np.where(g.xi_norm > 0, g.xi_norm ** float(s), 0.0)
    return field.with_coeffs(mult * field.coeffs)


def leray_coeffs(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Project vector coefficients ``(dim, ...)`` onto divergence-free modes."""
    xi = grid.xi_deriv
    k2 = np.sum(xi**2, axis=0)
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    dot = np.sum(xi * coeffs, axis=0)
    return coeffs - xi * (dot * inv)


def leray_project(u: SpectralField) -> SpectralField:
    """L2-orthogonal projection onto divergence-free vector fields."""
    if u.rank != "vector":
        raise ValueError("leray_project needs a vector field")
    return u.with_coeffs(leray_coeffs(u.grid, u.coeffs))


def divergence_ratio(u: SpectralField) -> float:
    """``||xi . u_hat||_2 / ||u_hat||_2`` (0 for the zero field)."""
    num = np.linalg.norm(np.sum(u.grid.xi_deriv * u.coeffs, axis=0).ravel())
    den = np.linalg.norm(u.coeffs.ravel())
    return 0.0 if den == 0 else float(num / den)


# -- norms --------------------------------------------------------------------


def pointwise_magnitude(samples: np.ndarray, nd: int) -> np.ndarray:
    """Euclidean/Frobenius magnitude over the leading component axes."""
    ncomp = samples.ndim - nd
    if ncomp == 0:
        return np.abs(samples)
    return np.sqrt(np.sum(samples**2, axis=tuple(range(ncomp))))


def lp_of_samples(samples: np.ndarray, grid: Grid, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = pointwise_magnitude(samples, grid.dim)
    if math.isinf(p):
        return float(np.max(mag))
    w = grid.dx**grid.dim
    if p == 2:
        return float(math.sqrt(w * np.sum(mag * mag)))
    mmax = np.max(mag)
    if mmax == 0:
        return 0.0
    return float(mmax * (w * np.sum((mag / mmax) ** p)) ** (1.0 / p))


def grid_lp_norm(field: SpectralField, p: float) -> float:
    """Discrete L^p norm with Riemann weight ``(L/M)^dim``; ``p=inf`` is the max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return lp_of_samples(inverse_transform(field), field.grid, p)


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    component_shape: Tuple[int, ...] = (),
    kmax: Optional[float] = None,
    kmin: float = 0.0,
) -> SpectralField:
    """Real random field, optionally band-limited to ``kmin <= |k|_inf <= kmax``."""
    samples = rng.standard_normal(component_shape + grid.shape)
    f = forward_transform(samples, grid)
    if kmax is not None or kmin > 0:
        kinf = np.max(np.abs(grid.k_index), axis=0)
        keep = (kinf >= kmin) & (kinf <= (kmax if kmax is not None else grid.M))
        keep &= np.all(grid.k_index != -grid.M // 2, axis=0)
        f = f.with_coeffs(f.coeffs * keep)
    return f
