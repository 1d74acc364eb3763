"""
Friedrichs mollifiers, mollifying nets and regularized coefficient families.

The reference bump is ``alpha * exp(-1 / (1 - |x|^2))`` on the unit ball. The
net is ``psi_eps(x) = eps^{-d} psi(x / eps)`` (``omega(eps) = eps``); every
sampled net is renormalized so its discrete integral is exactly one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.fft

from .errors import (
    DegenerateFit,
    EpsilonUnderResolved,
    GridMismatch,
    NegativeBase,
    UnderResolved,
)
from .grid import Field, Grid, psum

log = logging.getLogger(__name__)

__all__ = [
    "Mollifier",
    "bump",
    "make_mollifier",
    "mollifying_net",
    "regularize",
    "Perturbation",
    "CoefficientNet",
    "coefficient_net",
    "merge_nets",
    "negligible_perturbation",
    "exp_negligible",
    "MIN_CELLS_PER_EPS",
    "fit_moderateness",
    "ModeratenessFit",
]

#: A net narrower than this many grid cells is rejected as aliased.
MIN_CELLS_PER_EPS = 4


def bump(r2):
    """Unnormalized profile ``exp(-1/(1-r^2))`` for ``r^2 < 1``, else 0."""
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def _shifted_r2(grid: Grid, center) -> np.ndarray:
    if center is None:
        return grid.r2
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    return sum((xi - ci) ** 2 for xi, ci in zip(grid.x, c))


@dataclass(frozen=True)
class Mollifier:
    """Sampled Friedrichs mollifier on a reference grid."""

    profile: Field
    alpha: float

    @property
    def grid(self) -> Grid:
        return self.profile.grid


def make_mollifier(grid: Grid) -> Mollifier:
    """Sample the reference bump on ``grid`` and normalize its discrete mass to 1."""
    if 2.0 / grid.h < 8:
        raise UnderResolved(
            f"unit ball needs >= 8 points per axis (h={grid.h:g} > 0.25)"
        )
    if grid.L < 1.0:
        raise UnderResolved(f"box half-width L={grid.L:g} does not contain the unit ball")
    raw = bump(grid.r2)
    alpha = 1.0 / (grid.cell_volume * psum(raw))
    return Mollifier(Field(grid, alpha * raw), alpha)


def mollifying_net(psi: Mollifier | None, eps: float, grid: Grid, center=None) -> Field:
    """``eps^{-d} psi(x / eps)`` sampled on ``grid`` with unit discrete mass.

    ``psi`` only fixes the profile family; the net is resampled analytically
    so any grid can be used. Requires ``eps >= 4 h``.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if eps < MIN_CELLS_PER_EPS * grid.h * (1 - 1e-12):
        raise EpsilonUnderResolved(
            f"eps={eps:g} < {MIN_CELLS_PER_EPS} h = {MIN_CELLS_PER_EPS * grid.h:g}"
        )
    if psi is not None and psi.grid == grid and eps == 1.0 and center is None:
        return psi.profile
    raw = bump(_shifted_r2(grid, center) / eps**2)
    mass = grid.cell_volume * psum(raw)
    return Field(grid, raw / mass)


def regularize(f: Field, psi_eps: Field, workers: int | None = None) -> Field:
    """Circular convolution ``f * psi_eps`` on the torus.

    ``psi_eps`` is centred at the origin node. Negative round-off produced from
    a nonnegative ``f`` is clamped to zero.
    """
    if f.grid != psi_eps.grid:
        raise GridMismatch("field and kernel live on different grids")
    g = f.grid
    # move the origin node (index N/2 on every axis) to index 0
    kernel = np.fft.ifftshift(psi_eps.values)
    F = scipy.fft.fftn(f.values, workers=workers)
    K = scipy.fft.fftn(kernel, workers=workers)
    out = scipy.fft.ifftn(F * K, workers=workers).real * g.cell_volume
    if np.all(f.values >= 0):
        neg = out < 0
        if neg.any():
            log.debug("clamped %d negative round-off entries (min %.3g)", neg.sum(), out.min())
            out = np.where(neg, 0.0, out)
    return Field(g, out)


def exp_negligible(eps: float) -> float:
    """The prototypical negligible net ``exp(-1/eps)``."""
    return float(np.exp(-1.0 / eps))


class Perturbation(NamedTuple):
    """Additive constant ``size(eps)`` applied to the listed coefficients."""

    size: Callable[[float], float]
    targets: tuple[str, ...]
    label: str


@dataclass(frozen=True)
class CoefficientNet:
    """A family ``eps -> (a_eps, b_eps)`` of nonnegative coefficient fields.

    ``evaluator`` returns the unperturbed pair; an attached
    :class:`Perturbation` is added by :meth:`__call__` and can be queried
    separately through :meth:`perturbation_sizes`.
    """

    kind: str
    grid: Grid
    evaluator: Callable[[float], tuple[Field, Field]]
    base: Field | None = None
    perturbation: Perturbation | None = None
    meta: dict = field(default_factory=dict)

    def unperturbed(self, eps: float) -> tuple[Field, Field]:
        a, b = self.evaluator(float(eps))
        for name, c in (("a", a), ("b", b)):
            if c.values.min() < 0:
                raise NegativeBase(f"{self.kind} net produced negative {name}_eps")
        return a, b

    def perturbation_sizes(self, eps: float) -> tuple[float, float]:
        if self.perturbation is None:
            return 0.0, 0.0
        c = self.perturbation.size(float(eps))
        return (
            c if "a" in self.perturbation.targets else 0.0,
            c if "b" in self.perturbation.targets else 0.0,
        )

    def __call__(self, eps: float) -> tuple[Field, Field]:
        a, b = self.unperturbed(eps)
        da, db = self.perturbation_sizes(eps)
        if da:
            a = a + da
        if db:
            b = b + db
        return a, b


def coefficient_net(
    kind: str,
    grid: Grid,
    psi: Mollifier | None = None,
    *,
    target: str = "a",
    scale: float = 1.0,
    base: Field | None = None,
    other: Field | None = None,
    center=None,
    evaluator: Callable[[float], Field] | None = None,
) -> CoefficientNet:
    """Build a coefficient net.

    Parameters
    ----------
    kind : {"delta", "delta_squared", "smooth", "custom"}
        ``delta``: ``scale * eps^{-d} psi(x/eps)``;
        ``delta_squared``: ``scale * eps^{-2d} psi(x/eps)^2`` with ``psi`` the
        continuum-normalized bump; ``smooth``: ``base * psi_eps``;
        ``custom``: ``evaluator(eps)``.
    target : {"a", "b"}
        Which coefficient the net populates. The other one is ``other``
        (zero by default) for every ``eps``.
    """
    if target not in ("a", "b"):
        raise ValueError("target must be 'a' or 'b'")
    if scale < 0:
        raise NegativeBase("scale must be nonnegative")
    fixed = grid.zeros() if other is None else other
    if fixed.values.min() < 0:
        raise NegativeBase("fixed coefficient is negative")

    if kind == "delta":
        def single(eps):
            return scale * mollifying_net(psi, eps, grid, center)
    elif kind == "delta_squared":
        alpha = _continuum_alpha(grid.d)

        def single(eps):
            mollifying_net(psi, eps, grid, center)  # resolution check
            prof = alpha * bump(_shifted_r2(grid, center) / eps**2) / eps**grid.d
            return Field(grid, scale * prof**2)
    elif kind == "smooth":
        if base is None:
            raise ValueError("smooth kind needs a base field")
        if base.values.min() < 0:
            raise NegativeBase("base coefficient must be nonnegative")

        def single(eps):
            return scale * regularize(base, mollifying_net(psi, eps, grid))
    elif kind == "custom":
        if evaluator is None:
            raise ValueError("custom kind needs an evaluator")
        single = evaluator
    else:
        raise ValueError(f"unknown coefficient kind {kind!r}")

    def pair(eps):
        c = single(eps)
        return (c, fixed) if target == "a" else (fixed, c)

    return CoefficientNet(kind, grid, pair, base=base, meta={"target": target, "scale": scale})


def merge_nets(a_net: CoefficientNet, b_net: CoefficientNet) -> CoefficientNet:
    """Take ``a_eps`` from ``a_net`` and ``b_eps`` from ``b_net``."""
    if a_net.grid != b_net.grid:
        raise GridMismatch("nets live on different grids")

    def pair(eps):
        return a_net(eps)[0], b_net(eps)[1]

    kind = a_net.kind if a_net.kind == b_net.kind else "custom"
    return CoefficientNet(kind, a_net.grid, pair, meta={"a": a_net.kind, "b": b_net.kind})


def negligible_perturbation(
    net: CoefficientNet,
    targets=("a",),
    size: Callable[[float], float] = exp_negligible,
    label: str = "exp(-1/eps)",
) -> CoefficientNet:
    """Return ``net`` with the constant ``size(eps)`` added to the targeted coefficients."""
    targets = tuple(targets)
    if not targets or not set(targets) <= {"a", "b"}:
        raise ValueError("targets must be drawn from ('a', 'b')")
    return CoefficientNet(
        net.kind,
        net.grid,
        net.evaluator,
        base=net.base,
        perturbation=Perturbation(size, targets, label),
        meta=dict(net.meta),
    )


_ALPHA_CACHE: dict[int, float] = {}


def _continuum_alpha(d: int) -> float:
    """``1 / int_{|x|<1} exp(-1/(1-|x|^2)) dx`` by radial quadrature."""
    if d not in _ALPHA_CACHE:
        from scipy.integrate import quad
        from scipy.special import gamma

        area = 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)
        val, _ = quad(lambda r: np.exp(-1.0 / (1.0 - r * r)) * r ** (d - 1), 0.0, 1.0, epsabs=0, epsrel=1e-13)
        _ALPHA_CACHE[d] = 1.0 / (area * val)
    return _ALPHA_CACHE[d]


class ModeratenessFit(NamedTuple):
    N_hat: float
    r2: float
    intercept: float


def fit_moderateness(eps_list, norm_list) -> ModeratenessFit:
    """Least-squares slope of ``log ||f_eps||`` against ``log(1/eps)``."""
    eps = np.asarray(eps_list, dtype=float)
    norms = np.asarray(norm_list, dtype=float)
    if eps.size != norms.size:
        raise ValueError("eps_list and norm_list differ in length")
    if eps.size < 4:
        raise DegenerateFit(f"need at least 4 samples, got {eps.size}")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be strictly decreasing")
    if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
        raise ValueError("norms must be positive and finite")
    x = np.log(1.0 / eps)
    y = np.log(norms)
    if np.ptp(y) == 0.0:
        return ModeratenessFit(0.0, 1.0, float(y[0]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - psum(resid**2) / psum((y - y.mean()) ** 2)
    return ModeratenessFit(float(slope), float(r2), float(intercept))
