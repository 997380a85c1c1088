"""Dirichlet sine-basis machinery on (0, pi).

Fields are stored as coefficient vectors against the L2-orthonormal basis
``e_n(x) = sqrt(2/pi) sin(n x)``, n = 1..n_max.  With this normalisation

    ||u||_{L2}^2    = sum c_n^2
    ||u||_{H1_0}^2  = sum n^2 c_n^2      (eigenvalues lambda_n = n^2)

Physical samples live on the interior points ``x_j = j pi / (m + 1)``,
j = 1..m, where the type-I discrete sine transform is exactly orthogonal.
All routines accept stacked inputs: the last axis is the mode (or point)
axis, leading axes are batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


class SpectralError(ValueError):
    """Raised for inconsistent sizes or out-of-range projection orders."""


@dataclass(frozen=True)
class Grid:
    """Interior collocation grid with ``m`` points on (0, pi)."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise SpectralError(f"grid needs at least one point, got m={self.m}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.m + 1) * np.pi / (self.m + 1)

    @property
    def spacing(self) -> float:
        return np.pi / (self.m + 1)

    @classmethod
    def dealiasing(cls, n_max: int) -> "Grid":
        """Smallest grid on which quadratic products of n_max-mode fields are alias-free."""
        return cls(int(np.ceil(1.5 * n_max)))


@dataclass(frozen=True)
class SpectralField:
    """Sine coefficients ``c_1..c_{n_max}`` of a field in H1_0(0, pi)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise SpectralError("coefficients must be a non-empty 1-D vector")
        if not np.all(np.isfinite(c)):
            raise SpectralError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, n_max: int) -> "SpectralField":
        return cls(np.zeros(n_max))

    @classmethod
    def mode(cls, n: int, n_max: int, amplitude: float = 1.0) -> "SpectralField":
        c = np.zeros(n_max)
        c[n - 1] = amplitude
        return cls(c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, s: float) -> "SpectralField":
        return SpectralField(s * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(-self.coeffs)


@dataclass(frozen=True)
class PhysField:
    """Samples of a field on the interior points of a grid."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise SpectralError(f"expected {self.grid.m} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SpectralError("physical samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# array-level transforms (batched along leading axes)


def wavenumbers(n_max: int) -> np.ndarray:
    return np.arange(1, n_max + 1, dtype=float)


def eigenvalues(n_max: int) -> np.ndarray:
    return wavenumbers(n_max) ** 2


def sine_synthesis(c: np.ndarray, m: int) -> np.ndarray:
    """Evaluate ``sum_n c_n e_n(x_j)`` on the m interior points."""
    c = np.asarray(c, dtype=float)
    n = c.shape[-1]
    if n > m:
        c = c[..., :m]  # modes above m vanish or alias; callers guard sizes
        n = m
    pad = np.zeros(c.shape[:-1] + (m,))
    pad[..., :n] = c
    return 0.5 * SQRT_2_OVER_PI * scipy.fft.dst(pad, type=1, axis=-1)


def sine_analysis(f: np.ndarray, n_max: int) -> np.ndarray:
    """Discrete sine coefficients of interior samples, modes 1..n_max."""
    f = np.asarray(f, dtype=float)
    m = f.shape[-1]
    if n_max > m:
        raise SpectralError(f"grid of {m} points cannot resolve {n_max} modes")
    y = scipy.fft.dst(f, type=1, axis=-1)[..., :n_max]
    return y * (0.5 * np.sqrt(2.0 * np.pi) / (m + 1))


def cosine_synthesis(c: np.ndarray, m: int, constant=0.0) -> np.ndarray:
    """Evaluate ``constant + sum_n c_n sqrt(2/pi) cos(n x_j)`` on interior points."""
    c = np.asarray(c, dtype=float)
    n = c.shape[-1]
    pad = np.zeros(c.shape[:-1] + (m + 2,))
    pad[..., 1 : n + 1] = c[..., : m + 1]
    vals = 0.5 * SQRT_2_OVER_PI * scipy.fft.dct(pad, type=1, axis=-1)[..., 1 : m + 1]
    return vals + np.asarray(constant)[..., None]


def derivative_values(c: np.ndarray, m: int) -> np.ndarray:
    """Samples of d/dx of a sine series (a cosine series)."""
    n = wavenumbers(c.shape[-1])
    return cosine_synthesis(c * n, m)


def antiderivative_values(c: np.ndarray, m: int) -> np.ndarray:
    """Samples of ``int_0^x sum c_n e_n(s) ds`` using ``(1 - cos(n x))/n``."""
    n = wavenumbers(c.shape[-1])
    scaled = c / n
    const = SQRT_2_OVER_PI * scaled.sum(axis=-1)
    return cosine_synthesis(-scaled, m, constant=const)


def h1_norm(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    return np.sqrt(np.sum((wavenumbers(c.shape[-1]) * c) ** 2, axis=-1))


def l2_norm(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    return np.sqrt(np.sum(c**2, axis=-1))


# ---------------------------------------------------------------------------
# field-level operations


def to_modes(f: PhysField, g: Grid, n_max: int) -> SpectralField:
    if f.grid != g:
        raise SpectralError("field sampled on a different grid")
    if g.m < n_max:
        raise SpectralError(f"grid of {g.m} points is too small for n_max={n_max}")
    return SpectralField(sine_analysis(f.values, n_max))


def to_phys(u: SpectralField, g: Grid) -> PhysField:
    if u.n_max > g.m:
        raise SpectralError(f"grid of {g.m} points cannot represent {u.n_max} modes")
    return PhysField(sine_synthesis(u.coeffs, g.m), g)


def _check_order(N: int, n_max: int):
    if not 1 <= N <= n_max:
        raise SpectralError(f"projection order N={N} outside [1, {n_max}]")


def project_low(u: SpectralField, N: int) -> SpectralField:
    _check_order(N, u.n_max)
    c = u.coeffs.copy()
    c[N:] = 0.0
    return SpectralField(c)


def project_high(u: SpectralField, N: int) -> SpectralField:
    _check_order(N, u.n_max)
    c = u.coeffs.copy()
    c[:N] = 0.0
    return SpectralField(c)


def dx(u: SpectralField, g: Grid) -> PhysField:
    """First derivative sampled on the grid (it is even, not a sine series)."""
    return PhysField(derivative_values(u.coeffs, g.m), g)


def dxx(u: SpectralField) -> SpectralField:
    return SpectralField(-eigenvalues(u.n_max) * u.coeffs)


def dealiased_product_array(f_vals: np.ndarray, g_vals: np.ndarray, n_max: int) -> np.ndarray:
    return sine_analysis(f_vals * g_vals, n_max)


def dealiased_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Sine coefficients of the pointwise product ``u v`` truncated to n_max.

    Both factors are odd about x = 0, so their product is even and has no
    finite sine expansion; the padded grid (at least 3/2 n_max points)
    gives its discrete projection.  Use :func:`convective_product` for the
    band-limited ``u v_x`` case.
    """
    if u.n_max != v.n_max:
        raise SpectralError("factors must share n_max")
    g = Grid.dealiasing(u.n_max)
    m = max(g.m, u.n_max)
    return SpectralField(
        dealiased_product_array(sine_synthesis(u.coeffs, m), sine_synthesis(v.coeffs, m), u.n_max)
    )


def convective_product_array(u: np.ndarray, v: np.ndarray, m: int | None = None) -> np.ndarray:
    """Coefficients of ``u * d/dx v``; exact (alias-free) on the 3/2 grid."""
    n_max = u.shape[-1]
    if m is None:
        m = Grid.dealiasing(n_max).m
    return sine_analysis(sine_synthesis(u, m) * derivative_values(v, m), n_max)


def convective_product(u: SpectralField, v: SpectralField) -> SpectralField:
    if u.n_max != v.n_max:
        raise SpectralError("factors must share n_max")
    return SpectralField(convective_product_array(u.coeffs, v.coeffs))


def inner_l2(u: SpectralField, v: SpectralField) -> float:
    return float(u.coeffs @ v.coeffs)


def random_field(
    rng: np.random.Generator,
    n_max: int,
    h1_radius: float,
    n_active: int | None = None,
    decay: float = 0.0,
) -> SpectralField:
    """Gaussian coefficients on modes 1..n_active, scaled to the given H1_0 norm.

    ``decay`` multiplies mode n by ``exp(-decay n)`` before scaling.
    """
    n_active = n_max if n_active is None else n_active
    c = np.zeros(n_max)
    c[:n_active] = rng.standard_normal(n_active) * np.exp(-decay * wavenumbers(n_active))
    norm = h1_norm(c)
    if norm == 0:
        return SpectralField(c)
    return SpectralField(c * (h1_radius / norm))
