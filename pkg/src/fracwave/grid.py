"""
Periodic computational grid, sampled fields and the real <-> spectral transform.

The box ``[-L, L]^d`` is sampled at ``x_j = -L + j h`` with ``h = 2L/N``, so
the origin is always a grid point (index ``N/2``). The discrete frequency
lattice is ``xi_j = pi j / L`` for ``j = -N/2, ..., N/2 - 1``.

Normalization
-------------
The forward transform carries the quadrature weight,

.. math:: \\hat f(\\xi_k) = h^d \\sum_j f(x_j) e^{-i (j h) \\cdot \\xi_k},

which is the trapezoid approximation of the continuum Fourier transform up
to the unimodular phase ``e^{i L xi}``. Discrete Plancherel then mirrors the
continuum identity ``||f||^2 = (2 pi)^{-d} ||f_hat||^2``:

.. math:: h^d \\sum |f|^2 = (2L)^{-d} \\sum |\\hat f|^2
                          = (2L)^d \\sum |\\hat f / (2L)^d|^2 .

Coefficients are stored in FFT order (``scipy.fft.fftfreq`` layout), the same
shape as the real-space samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import GridMismatch, InvalidGrid, NonFinite

__all__ = [
    "Grid",
    "Field",
    "SpectralField",
    "make_grid",
    "forward",
    "inverse",
    "l2_inner",
    "psum",
    "boundary_mass_fraction",
]


def psum(values) -> float:
    """Pairwise (tree) sum of all entries, independent of thread count."""
    arr = np.ascontiguousarray(values).ravel()
    return float(np.add.reduce(arr))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L]^d`` with ``N`` points per axis."""

    d: int
    N: int
    L: float

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= 3:
            raise InvalidGrid(f"dimension must be 1, 2 or 3, got {self.d!r}")
        n = self.N
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise InvalidGrid(f"N must be a power of two >= 4, got {n!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise InvalidGrid(f"L must be positive, got {self.L!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.d

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates ``-L + j h``."""
        x = -self.L + self.h * np.arange(self.N)
        x.setflags(write=False)
        return x

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, ``indexing='ij'``, each of shape ``self.shape``."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        for m in mesh:
            m.setflags(write=False)
        return tuple(mesh)

    @cached_property
    def r2(self) -> np.ndarray:
        """Squared distance to the origin at each node."""
        out = sum(xi * xi for xi in self.x)
        out.setflags(write=False)
        return out

    @cached_property
    def lattice(self) -> np.ndarray:
        """Sorted 1-D frequency lattice ``pi j / L``, ``j = -N/2 .. N/2-1``."""
        j = np.arange(-self.N // 2, self.N // 2)
        out = np.pi * j / self.L
        out.setflags(write=False)
        return out

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis angular wavenumbers in FFT order, broadcast to ``shape``."""
        k1 = np.pi * (scipy.fft.fftfreq(self.N) * self.N) / self.L
        mesh = np.meshgrid(*([k1] * self.d), indexing="ij")
        for m in mesh:
            m.setflags(write=False)
        return tuple(mesh)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        """``|xi|`` on the FFT-ordered lattice."""
        out = np.sqrt(sum(k * k for k in self.wavenumbers))
        out.setflags(write=False)
        return out

    @property
    def xi_max(self) -> float:
        return float(self.xi_abs.max())

    def field(self, values) -> "Field":
        return Field(self, values)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.shape, float(c)))

    def sample(self, func) -> "Field":
        """Evaluate ``func(*coords)`` at the grid nodes."""
        return Field(self, np.broadcast_to(func(*self.x), self.shape))


def make_grid(d: int, N: int, L: float) -> Grid:
    return Grid(d, N, L)


def _check_finite(arr, what="field"):
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{what} contains NaN or Inf")


class Field:
    """Real samples of a function on a :class:`Grid`.

    ``values`` has shape ``grid.shape``; its C-order ravel is the row-major
    layout used by the FWF1 format. Fields are immutable.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.size != grid.size:
            raise GridMismatch(f"expected {grid.size} values, got {arr.size}")
        arr = arr.reshape(grid.shape)
        _check_finite(arr)
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    def __repr__(self):
        return f"Field(grid={self.grid!r}, max={np.abs(self.values).max():.3g})"

    def _same(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._same(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._same(other))

    def __rsub__(self, other):
        return Field(self.grid, self._same(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._same(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


class SpectralField:
    """Fourier coefficients of a field, FFT order, quadrature-weighted."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs):
        arr = np.array(coeffs, dtype=np.complex128, copy=True).reshape(grid.shape)
        arr.setflags(write=False)
        self.grid = grid
        self.coeffs = arr

    def __repr__(self):
        return f"SpectralField(grid={self.grid!r})"

    @property
    def normalized(self) -> np.ndarray:
        """Fourier-series coefficients ``f_hat / (2L)^d``."""
        return self.coeffs / self.grid.volume


def forward(f: Field, workers: int | None = None) -> SpectralField:
    _check_finite(f.values)
    g = f.grid
    return SpectralField(g, g.cell_volume * scipy.fft.fftn(f.values, workers=workers))


def inverse(F: SpectralField, workers: int | None = None) -> Field:
    g = F.grid
    vals = scipy.fft.ifftn(F.coeffs, workers=workers).real / g.cell_volume
    return Field(g, vals)


def spectral_apply(f: Field, multiplier: np.ndarray, workers: int | None = None) -> Field:
    """Multiply the spectrum of ``f`` bin-wise by ``multiplier``."""
    _check_finite(f.values)
    coeffs = scipy.fft.fftn(f.values, workers=workers) * multiplier
    return Field(f.grid, scipy.fft.ifftn(coeffs, workers=workers).real)


def l2_inner(f: Field, g: Field) -> float:
    """Quadrature ``<f, g> = h^d sum f g`` with pairwise summation."""
    if f.grid != g.grid:
        raise GridMismatch("fields live on different grids")
    return f.grid.cell_volume * psum(f.values * g.values)


def boundary_mass_fraction(f: Field, layer: float = 1.0 / 16) -> float:
    """Share of the L2 mass of ``f`` in the outer ``layer`` fraction of the box.

    A node belongs to the boundary layer when any coordinate satisfies
    ``|x_i| >= L (1 - 2 layer)``. Returns 0 for the zero field.
    """
    g = f.grid
    cut = g.L * (1.0 - 2.0 * layer)
    mask = np.zeros(g.shape, dtype=bool)
    for xi in g.x:
        mask |= np.abs(xi) >= cut
    sq = f.values**2
    total = psum(sq)
    if total == 0.0:
        return 0.0
    return psum(np.where(mask, sq, 0.0)) / total
