"""
Fractional Laplacian powers and the norms used in the energy estimates.

``(-Delta)^sigma`` is the Fourier multiplier ``|xi|^{2 sigma}`` applied on the
discrete lattice. All norms are grid quadratures with pairwise summation.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import GridMismatch, InvalidP, NonFinite, OrderTooLarge
from .grid import Field, Grid, forward, psum, spectral_apply

__all__ = [
    "symbol",
    "frac_laplacian",
    "lp_norm",
    "l2_norm",
    "hs_norm",
    "hs_norm_integral",
    "frac_seminorm_sq_spectral",
    "norm1",
    "norm2",
    "sobolev_exponent",
    "sobolev_check",
    "SobolevRatio",
]


@lru_cache(maxsize=128)
def symbol(grid: Grid, sigma: float) -> np.ndarray:
    """Read-only multiplier ``|xi|^{2 sigma}`` in FFT order (``0^0 = 1``)."""
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        out = np.ones(grid.shape)
    else:
        out = grid.xi_abs ** (2.0 * sigma)
    out.setflags(write=False)
    return out


def frac_laplacian(f: Field, sigma: float, workers: int | None = None) -> Field:
    """Apply ``(-Delta)^sigma`` to ``f``."""
    if not np.all(np.isfinite(f.values)):
        raise NonFinite("field contains NaN or Inf")
    return spectral_apply(f, symbol(f.grid, sigma), workers=workers)


def lp_norm(f: Field, p: float) -> float:
    """Discrete ``L^p`` norm, ``(h^d sum |f|^p)^{1/p}``; grid max for ``p = inf``."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidP(f"invalid exponent {p!r}") from None
    if np.isnan(p) or p < 1:
        raise InvalidP(f"p must lie in [1, inf], got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    m = a.max()
    if m == 0.0:
        return 0.0
    # scale by the max to keep |f|^p representable for large p
    return float(m * (f.grid.cell_volume * psum((a / m) ** p)) ** (1.0 / p))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(f.grid.cell_volume * psum(f.values**2)))


def frac_seminorm_sq_spectral(f: Field, s: float) -> float:
    """``sum |xi|^{2s} |f_hat|^2 / (2L)^d``, the Plancherel route to ``||(-Delta)^{s/2} f||^2``."""
    F = forward(f)
    w = symbol(f.grid, s)
    return psum(w * np.abs(F.coeffs) ** 2) / f.grid.volume


def hs_norm(f: Field, s: float, form: str = "sum") -> float:
    """``H^s`` norm.

    ``form="sum"`` (default) gives ``||f|| + ||(-Delta)^{s/2} f||``;
    ``form="integral"`` gives ``(int (1 + |xi|^{2s}) |f_hat|^2)^{1/2}``.
    """
    if form == "integral":
        return hs_norm_integral(f, s)
    if form != "sum":
        raise ValueError(f"unknown H^s form {form!r}")
    return l2_norm(f) + l2_norm(frac_laplacian(f, s / 2.0))


def hs_norm_integral(f: Field, s: float) -> float:
    F = forward(f)
    w = 1.0 + symbol(f.grid, s)
    return float(np.sqrt(psum(w * np.abs(F.coeffs) ** 2) / f.grid.volume))


def _check_pair(u: Field, ut: Field):
    if u.grid != ut.grid:
        raise GridMismatch("u and u_t live on different grids")


def norm1(u: Field, ut: Field, s: float) -> float:
    """``||u|| + ||(-Delta)^{s/2} u|| + ||u_t||`` (all L2)."""
    _check_pair(u, ut)
    return l2_norm(u) + l2_norm(frac_laplacian(u, s / 2.0)) + l2_norm(ut)


def norm2(u: Field, ut: Field, s: float) -> float:
    """``norm1`` plus ``||(-Delta)^s u||``."""
    _check_pair(u, ut)
    return norm1(u, ut, s) + l2_norm(frac_laplacian(u, s))


def sobolev_exponent(d: int, s: float) -> float:
    if d <= 2 * s:
        raise OrderTooLarge(f"Sobolev embedding needs d > 2s (d={d}, s={s})")
    return 2.0 * d / (d - 2.0 * s)


class SobolevRatio(NamedTuple):
    lhs: float
    rhs: float
    ratio: float
    q: float
    defined: bool


def sobolev_check(f: Field, s: float, d: int | None = None) -> SobolevRatio:
    """Measure ``||f||_{L^q}`` against ``||(-Delta)^{s/2} f||_{L^2}``.

    Never asserts. ``defined`` is False (and ``ratio`` NaN) when the right-hand
    side vanishes.
    """
    d = f.grid.d if d is None else d
    q = sobolev_exponent(d, s)
    lhs = lp_norm(f, q)
    rhs = l2_norm(frac_laplacian(f, s / 2.0))
    if rhs == 0.0:
        return SobolevRatio(lhs, rhs, float("nan"), q, False)
    return SobolevRatio(lhs, rhs, lhs / rhs, q, True)
