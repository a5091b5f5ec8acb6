"""Fourier grids, fields, and multiplier symbols on the periodic box.

Everything lives on [0, 2*pi)^2 (or [0, 2*pi) in 1D) sampled on a uniform
grid with an even number of points per side, so wavenumbers are integers and
trigonometric data is represented exactly.  Transform convention: forward FFT
unscaled, inverse divided by the point count (the numpy default).  Under this
convention Parseval reads

    mean(|f|^2) = sum_k |fhat_k|^2 / N^2

with N the total number of grid points.

Array layout for 2D fields: ``values[i, j]`` holds the sample at
``x1 = i*dx``, ``x2 = j*dx`` (axis 0 is x1, axis 1 is x2, meshgrid
``indexing='ij'``).

Odd-order spectral derivatives and the Hilbert transform zero the unpaired
Nyquist mode (k = -n/2 for even n) so real fields map to real fields; the
dealiased dynamics never populate that mode anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=None)
def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in FFT order for an n-point axis (read-only)."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    k.flags.writeable = False
    return k


@lru_cache(maxsize=None)
def _k_grids(n: int):
    """(k1, k2, |k|) broadcastable over an (n, n) spectral array."""
    k = wavenumbers(n)
    k1 = k[:, None]
    k2 = k[None, :]
    kmag = np.hypot(np.broadcast_to(k1, (n, n)), np.broadcast_to(k2, (n, n)))
    kmag.flags.writeable = False
    return k1, k2, kmag


@lru_cache(maxsize=None)
def dealias_mask(n: int, ndim: int = 2) -> np.ndarray:
    """Boolean keep-mask for the 2/3 rule: zero modes with |k_i| > n/3."""
    k = wavenumbers(n)
    cut = n / 3.0
    keep1 = np.abs(k) <= cut
    if ndim == 1:
        out = keep1.copy()
    else:
        out = keep1[:, None] & keep1[None, :]
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _deriv_factor(n: int) -> np.ndarray:
    """i*k along one axis with the unpaired Nyquist mode zeroed."""
    k = wavenumbers(n).copy()
    if n % 2 == 0:
        k[n // 2] = 0.0
    out = 1j * k
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid2D:
    """Uniform n x n grid on the doubly periodic box of side 2*pi."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got n={self.n}")

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @property
    def length(self) -> float:
        return TWO_PI

    def axis(self) -> np.ndarray:
        """Grid coordinates along one axis: 0, dx, ..., 2*pi - dx."""
        return np.arange(self.n) * self.dx

    def mesh(self):
        """(x1, x2) coordinate arrays, indexing='ij'."""
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")


class Field2D:
    """Real scalar field on a Grid2D with a lazily cached full FFT."""

    __slots__ = ("grid", "values", "_spec")

    def __init__(self, grid: Grid2D, values: np.ndarray, spectral: np.ndarray | None = None):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"values shape {values.shape} does not match grid n={grid.n}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values
        self._spec = spectral

    @classmethod
    def from_spectral(cls, grid: Grid2D, coeffs: np.ndarray) -> "Field2D":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (grid.n, grid.n):
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid n={grid.n}")
        values = np.fft.ifft2(coeffs).real
        return cls(grid, values, spectral=coeffs)

    def spectral(self) -> np.ndarray:
        if self._spec is None:
            self._spec = np.fft.fft2(self.values)
        return self._spec

    def copy(self) -> "Field2D":
        spec = None if self._spec is None else self._spec.copy()
        return Field2D(self.grid, self.values.copy(), spectral=spec)


class Field1D:
    """Real scalar field on a uniform n-point periodic interval of length 2*pi."""

    __slots__ = ("n", "values", "_spec")

    def __init__(self, n: int, values: np.ndarray, spectral: np.ndarray | None = None):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got n={n}")
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (n,):
            raise ValueError(f"values shape {values.shape} does not match n={n}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.n = n
        self.values = values
        self._spec = spectral

    @classmethod
    def from_spectral(cls, n: int, coeffs: np.ndarray) -> "Field1D":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        values = np.fft.ifft(coeffs).real
        return cls(n, values, spectral=coeffs)

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def spectral(self) -> np.ndarray:
        if self._spec is None:
            self._spec = np.fft.fft(self.values)
        return self._spec

    def copy(self) -> "Field1D":
        spec = None if self._spec is None else self._spec.copy()
        return Field1D(self.n, self.values.copy(), spectral=spec)


def transform(field, direction: str):
    """Move a field between representations.

    'to_spectral' returns the field with its coefficient cache populated;
    'to_physical' returns a field whose values are resynthesized from the
    coefficients.  Applying both directions reproduces the input values to
    roundoff.
    """
    if direction == "to_spectral":
        field.spectral()
        return field
    if direction == "to_physical":
        spec = field.spectral()
        if isinstance(field, Field2D):
            return Field2D.from_spectral(field.grid, spec)
        return Field1D.from_spectral(field.n, spec)
    raise ValueError(f"unknown transform direction {direction!r}")


# ---------------------------------------------------------------------------
# Multiplier symbols


@dataclass(frozen=True)
class Symbol:
    """A Fourier multiplier, identified by tag and optional exponent s."""

    tag: str
    s: float | None = None

    _TAGS = ("frac_laplacian", "ddx1", "ddx2", "inv_frac_laplacian",
             "dealias_two_thirds", "hilbert_1d")

    def __post_init__(self) -> None:
        if self.tag not in self._TAGS:
            raise ValueError(f"unknown symbol tag {self.tag!r}")
        needs_s = self.tag in ("frac_laplacian", "inv_frac_laplacian")
        if needs_s and self.s is None:
            raise ValueError(f"symbol {self.tag} requires an exponent s")


def frac_laplacian(s: float) -> Symbol:
    """(-Laplace)^{s/2}: multiplier |k|^s."""
    return Symbol("frac_laplacian", float(s))


def inv_frac_laplacian(s: float) -> Symbol:
    """(-Laplace)^{-s/2}: multiplier |k|^{-s}, zero wavenumber mapped to 0."""
    return Symbol("inv_frac_laplacian", float(s))


DDX1 = Symbol("ddx1")
DDX2 = Symbol("ddx2")
DEALIAS = Symbol("dealias_two_thirds")
HILBERT = Symbol("hilbert_1d")


def _multiplier_2d(sym: Symbol, n: int) -> np.ndarray:
    k1, k2, kmag = _k_grids(n)
    if sym.tag == "frac_laplacian":
        return kmag ** sym.s
    if sym.tag == "inv_frac_laplacian":
        with np.errstate(divide="ignore"):
            m = np.where(kmag > 0.0, kmag, 1.0) ** (-sym.s)
        m[0, 0] = 0.0
        return m
    if sym.tag == "ddx1":
        return np.broadcast_to(_deriv_factor(n)[:, None], (n, n))
    if sym.tag == "ddx2":
        return np.broadcast_to(_deriv_factor(n)[None, :], (n, n))
    if sym.tag == "dealias_two_thirds":
        return dealias_mask(n, 2).astype(np.float64)
    raise ValueError(f"symbol {sym.tag} is not defined for 2D fields")


def _multiplier_1d(sym: Symbol, n: int) -> np.ndarray:
    k = wavenumbers(n)
    if sym.tag == "frac_laplacian":
        return np.abs(k) ** sym.s
    if sym.tag == "inv_frac_laplacian":
        absk = np.abs(k)
        with np.errstate(divide="ignore"):
            m = np.where(absk > 0.0, absk, 1.0) ** (-sym.s)
        m[0] = 0.0
        return m
    if sym.tag == "ddx1":
        return _deriv_factor(n)
    if sym.tag == "dealias_two_thirds":
        return dealias_mask(n, 1).astype(np.float64)
    if sym.tag == "hilbert_1d":
        # -i*sign(k); k=0 and the unpaired Nyquist mode are annihilated.
        m = -1j * np.sign(k)
        if n % 2 == 0:
            m = m.copy()
            m[n // 2] = 0.0
        return m
    raise ValueError(f"symbol {sym.tag} is not defined for 1D fields")


def apply_symbol(field, sym: Symbol):
    """Apply a Fourier multiplier; returns a field of the same type."""
    if isinstance(field, Field2D):
        out = field.spectral() * _multiplier_2d(sym, field.grid.n)
        return Field2D.from_spectral(field.grid, out)
    if isinstance(field, Field1D):
        out = field.spectral() * _multiplier_1d(sym, field.n)
        return Field1D.from_spectral(field.n, out)
    raise TypeError(f"expected Field2D or Field1D, got {type(field).__name__}")


def perp_grad(theta: Field2D) -> tuple[Field2D, Field2D]:
    """Perpendicular gradient (-d/dx2 theta, d/dx1 theta); divergence free."""
    spec = theta.spectral()
    n = theta.grid.n
    d = _deriv_factor(n)
    g1 = Field2D.from_spectral(theta.grid, -(spec * d[None, :]))
    g2 = Field2D.from_spectral(theta.grid, spec * d[:, None])
    return g1, g2


# ---------------------------------------------------------------------------
# Spectral interpolation at off-grid points


def eval_derivs_at(theta: Field2D, x1, x2, orders) -> np.ndarray:
    """Evaluate trigonometric-interpolated derivatives at arbitrary points.

    Parameters
    ----------
    theta : Field2D
    x1, x2 : array_like, shape (m,)
        Evaluation coordinates (any reals; the series is 2*pi periodic).
    orders : sequence of (d1, d2)
        Derivative orders along x1 and x2.  Odd orders use the Nyquist-free
        derivative factor, matching the on-grid symbols.

    Returns
    -------
    ndarray, shape (len(orders), m)
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    n = theta.grid.n
    coeff = theta.spectral()
    k = wavenumbers(n)
    d = _deriv_factor(n)
    e1 = np.exp(1j * np.outer(x1, k))
    e2 = np.exp(1j * np.outer(x2, k))

    # Group by the x2 derivative order so each distinct right factor costs one
    # n^2*m product; the x1 factor is applied as a cheap row scaling.
    out = np.empty((len(orders), x1.size), dtype=np.float64)
    by_d2: dict[int, np.ndarray] = {}
    for d1, d2 in orders:
        if d2 not in by_d2:
            f2 = d ** d2 if d2 % 2 else (1j * k) ** d2
            by_d2[d2] = (coeff * f2[None, :]) @ e2.T  # (n, m)
    for idx, (d1, d2) in enumerate(orders):
        f1 = d ** d1 if d1 % 2 else (1j * k) ** d1
        w = by_d2[d2]
        out[idx] = np.einsum("mk,km->m", e1 * f1[None, :], w).real / (n * n)
    return out


def eval_at(theta: Field2D, x1, x2) -> np.ndarray:
    """Trigonometric interpolation of theta at arbitrary points."""
    return eval_derivs_at(theta, x1, x2, [(0, 0)])[0]
