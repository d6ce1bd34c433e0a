"""Grids, complex fields, finite differences and weighted norms.

Every field lives on a uniform square-cell grid.  Sample ``(i, j)`` sits at
``(x0 + i*h, y0 + j*h)`` and the row-major flat index is ``j*nx + i``, so the
2-D value array has shape ``(ny, nx)`` with ``values[j, i]``.

Derivative conventions::

    d/dz    = (d/dx - i d/dy) / 2
    d/dzbar = (d/dx + i d/dy) / 2

The Laplace-Beltrami operator of the conformal metric ``e^{2 sigma}|dz|^2``
is taken with the positive (geometer) sign, ``-e^{-2 sigma}(f_xx + f_yy)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .errors import (GridMismatch, InvalidDomain, InvalidExponent, InvalidGrid,
                     InvalidPotential, NonFiniteField)

REGIONS = ("M0", "M0prime", "all")


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    x0: float
    y0: float
    h: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise InvalidGrid("grid counts must be integers")
        if self.nx < 8 or self.ny < 8:
            raise InvalidGrid(f"grid {self.nx}x{self.ny} is smaller than 8x8")
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvalidGrid(f"spacing must be positive, got {self.h}")
        if not (np.isfinite(self.x0) and np.isfinite(self.y0)):
            raise InvalidGrid("origin must be finite")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "y0", float(self.y0))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def square(cls, n, half_width, center=0j):
        """n x n grid whose cells tile [c - L, c + L]^2 (samples at cell centres)."""
        h = 2.0 * half_width / n
        c = complex(center)
        return cls(n, n, c.real - half_width + 0.5 * h, c.imag - half_width + 0.5 * h, h)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def size(self):
        return self.nx * self.ny

    @cached_property
    def x(self):
        return _readonly(self.x0 + self.h * np.arange(self.nx))

    @cached_property
    def y(self):
        return _readonly(self.y0 + self.h * np.arange(self.ny))

    @cached_property
    def z(self):
        """Complex coordinate of every sample, shape (ny, nx)."""
        return _readonly(self.x[None, :] + 1j * self.y[:, None])

    def contains(self, z0, margin=0):
        z0 = complex(z0)
        return (self.x[0] + margin <= z0.real <= self.x[-1] - margin
                and self.y[0] + margin <= z0.imag <= self.y[-1] - margin)

    def nearest_index(self, z0):
        """(j, i) of the sample closest to the point z0."""
        z0 = complex(z0)
        i = int(np.clip(np.rint((z0.real - self.x0) / self.h), 0, self.nx - 1))
        j = int(np.clip(np.rint((z0.imag - self.y0) / self.h), 0, self.ny - 1))
        return j, i

    def to_dict(self):
        return {"nx": self.nx, "ny": self.ny, "x0": self.x0, "y0": self.y0, "h": self.h}


class ComplexField:
    """Immutable complex samples on a Grid2D."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid2D, values):
        v = np.array(values, dtype=np.complex128)
        if v.ndim == 1:
            if v.size != grid.size:
                raise InvalidGrid(f"expected {grid.size} samples, got {v.size}")
            v = v.reshape(grid.shape)
        if v.shape != grid.shape:
            raise InvalidGrid(f"value shape {v.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteField("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("ComplexField is immutable")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn(z) on the grid (fn receives the complex coordinate array)."""
        return cls(grid, np.broadcast_to(fn(grid.z), grid.shape))

    @property
    def flat(self):
        return self.values.ravel()

    @property
    def real(self):
        return ComplexField(self.grid, self.values.real)

    @property
    def imag(self):
        return ComplexField(self.grid, self.values.imag)

    def conj(self):
        return ComplexField(self.grid, np.conj(self.values))

    def abs(self):
        return ComplexField(self.grid, np.abs(self.values))

    def _other(self, other):
        if isinstance(other, ComplexField):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.values
        if np.isscalar(other):
            return other
        raise TypeError(f"cannot combine ComplexField with {type(other).__name__}")

    def __add__(self, other):
        return ComplexField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ComplexField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ComplexField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ComplexField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def __eq__(self, other):
        return (isinstance(other, ComplexField) and other.grid == self.grid
                and np.array_equal(other.values, self.values))

    __hash__ = None

    def __repr__(self):
        return f"ComplexField({self.grid.nx}x{self.grid.ny}, h={self.grid.h:g})"


def as_values(f, grid=None):
    """Raw array behind a ComplexField (or an array of the right shape)."""
    if isinstance(f, ComplexField):
        if grid is not None and f.grid != grid:
            raise GridMismatch("fields live on different grids")
        return f.values
    a = np.asarray(f, dtype=np.complex128)
    if grid is not None:
        a = a.reshape(grid.shape)
    return a


# -- smooth cutoffs -------------------------------------------------------

def bump(t):
    """Standard C-infinity bump exp(-1/(1-t^2)) for |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    a = np.zeros_like(t)
    b = np.zeros_like(t)
    m = t > 0
    a[m] = np.exp(-1.0 / t[m])
    m = t < 1
    b[m] = np.exp(-1.0 / (1.0 - t[m]))
    return a / (a + b)


def radial_cutoff(r, inner, outer):
    """1 for r <= inner, 0 for r >= outer, smooth in between."""
    if outer <= inner:
        raise ValueError("outer radius must exceed inner radius")
    return 1.0 - smooth_step((np.asarray(r, dtype=float) - inner) / (outer - inner))


# -- domains --------------------------------------------------------------

class DomainSpec:
    """Nested masks M0 in M0', conformal exponent sigma and the cutoff rho~."""

    def __init__(self, grid: Grid2D, mask_M0, mask_M0prime, sigma=None, rho_tilde=None):
        m0 = np.asarray(mask_M0, dtype=bool).reshape(grid.shape).copy()
        m1 = np.asarray(mask_M0prime, dtype=bool).reshape(grid.shape).copy()
        if np.any(m0 & ~m1):
            raise InvalidDomain("mask_M0 is not contained in mask_M0prime")
        if sigma is None:
            sigma = ComplexField.zeros(grid)
        if not isinstance(sigma, ComplexField):
            sigma = ComplexField(grid, sigma)
        if sigma.grid != grid:
            raise GridMismatch("sigma lives on a different grid")
        if np.any(sigma.values.imag != 0):
            raise InvalidDomain("sigma must be real")
        if rho_tilde is None:
            rho_tilde = ComplexField(grid, m1.astype(float))
        if not isinstance(rho_tilde, ComplexField):
            rho_tilde = ComplexField(grid, rho_tilde)
        rho = rho_tilde.values
        if np.any(rho.imag != 0) or rho.real.min() < 0 or rho.real.max() > 1:
            raise InvalidDomain("rho_tilde must be real with values in [0, 1]")
        if np.any(rho.real[m0] != 1):
            raise InvalidDomain("rho_tilde must equal 1 on M0")
        if np.any(rho.real[~m1] != 0):
            raise InvalidDomain("rho_tilde must vanish outside M0'")
        m0.setflags(write=False)
        m1.setflags(write=False)
        self.grid = grid
        self.mask_M0 = m0
        self.mask_M0prime = m1
        self.sigma = sigma
        self.rho_tilde = rho_tilde
        self.params = {}

    @cached_property
    def weight(self):
        """Volume weight |g|^{1/2} = e^{2 sigma}."""
        return _readonly(np.exp(2.0 * self.sigma.values.real))

    @cached_property
    def inv_weight(self):
        return _readonly(np.exp(-2.0 * self.sigma.values.real))

    def region_mask(self, region):
        if region == "M0":
            return self.mask_M0
        if region == "M0prime":
            return self.mask_M0prime
        if region == "all":
            return np.ones(self.grid.shape, dtype=bool)
        raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")

    def to_dict(self):
        d = {"grid": self.grid.to_dict()}
        d.update(self.params)
        return d


def disk_domain(grid, r0, r1, center=0j, sigma=None, margin=None):
    """Concentric disks M0 = {|z-c| < r0} inside M0' = {|z-c| < r1}.

    rho~ drops smoothly from 1 to 0 between ``r0 + margin`` and
    ``r1 - margin`` (default margin 2h), so it is identically 1 on the
    finite-difference stencil of every M0 sample.
    """
    if not 0 < r0 < r1:
        raise InvalidDomain("need 0 < r0 < r1")
    h = grid.h
    if margin is None:
        margin = 2.0 * h
    if r0 + margin >= r1 - margin:
        raise InvalidDomain("r1 - r0 too small for the cutoff transition at this resolution")
    r = np.abs(grid.z - complex(center))
    m0 = r < r0
    m1 = r < r1
    rho = radial_cutoff(r, r0 + margin, r1 - margin)
    rho[m0] = 1.0
    rho[~m1] = 0.0
    if callable(sigma):
        sigma = ComplexField(grid, np.real(sigma(grid.z)))
    dom = DomainSpec(grid, m0, m1, sigma=sigma, rho_tilde=rho)
    dom.params = {"shape": "disk", "r0": r0, "r1": r1, "center": [complex(center).real, complex(center).imag]}
    return dom


# -- potentials -----------------------------------------------------------

POTENTIAL_KINDS = ("gaussian_bump", "smooth_bump", "radial_step", "lp_singular", "zero", "sum")


class PotentialSpec:
    """A named potential family together with its realization on a grid."""

    def __init__(self, kind, parameters, realized: ComplexField):
        self.kind = kind
        self.parameters = dict(parameters)
        self.realized = realized

    @property
    def values(self):
        return self.realized.values

    def function(self, cap_h=None):
        """The family as a callable z -> V(z), for sampling on other meshes."""
        h = self.realized.grid.h if cap_h is None else cap_h
        return lambda z: potential_values(self.kind, np.asarray(z, dtype=complex), h, **self.parameters)

    def to_dict(self):
        return {"kind": self.kind, "parameters": self.parameters}


def _center(params):
    c = params.get("center", 0.0)
    if isinstance(c, (list, tuple)):
        return complex(c[0], c[1])
    return complex(c)


def potential_values(kind, z, h, **params):
    """Values of a potential family at the points z (h caps lp_singular)."""
    if kind not in POTENTIAL_KINDS:
        raise InvalidPotential(f"unknown potential kind {kind!r}")
    A = complex(params.get("amplitude", 1.0))
    if kind == "zero":
        return np.zeros(z.shape, dtype=complex)
    if kind == "sum":
        v = np.zeros(z.shape, dtype=complex)
        for term in params.get("terms", []):
            term = dict(term)
            sub = term.pop("kind")
            if sub == "sum":
                raise InvalidPotential("nested sums are not supported")
            v = v + potential_values(sub, z, h, **term)
        return v
    r = np.abs(z - _center(params))
    width = float(params.get("width", 0.25))
    if width <= 0:
        raise InvalidPotential("width must be positive")
    if kind == "gaussian_bump":
        v = A * np.exp(-(r / width) ** 2)
        support = params.get("support")
        if support is not None:
            v = v * radial_cutoff(r, 0.5 * float(support), float(support))
    elif kind == "smooth_bump":
        v = A * bump(r / width) * np.e
    elif kind == "radial_step":
        v = np.where(r < width, A, 0.0)
    else:
        alpha = float(params.get("alpha", 1.0))
        if not 0 < alpha < 1.5:
            raise InvalidPotential("lp_singular needs 0 < alpha < 3/2")
        cap = h ** (-alpha)
        with np.errstate(divide="ignore"):
            s = np.where(r > 0, r ** (-alpha), np.inf)
        v = A * np.minimum(s, cap) * (r < width)
    return np.asarray(v, dtype=complex)


def make_potential(kind, grid, mask_M0=None, **params) -> PotentialSpec:
    """Realize a potential on ``grid``; values outside ``mask_M0`` are zeroed.

    gaussian_bump: A exp(-|z-c|^2/width^2), optionally times a smooth cutoff
        that vanishes at radius ``support``.
    smooth_bump:   A e bump(|z-c|/width), so sup |V| = |A| and support radius width.
    radial_step:   A on |z-c| < width.
    lp_singular:   A min(|z-c|^-alpha, h^-alpha) on |z-c| < width, 0 < alpha < 3/2.
    zero:          identically 0.
    sum:           sum of ``terms`` (a list of parameter dicts each with a kind).
    """
    v = potential_values(kind, grid.z, grid.h, **params)
    if mask_M0 is not None:
        v = np.where(np.asarray(mask_M0, dtype=bool).reshape(grid.shape), v, 0.0)
    return PotentialSpec(kind, params, ComplexField(grid, v))


# -- finite differences ---------------------------------------------------

def _check_fd(f):
    g = f.grid
    if g.nx < 3 or g.ny < 3:
        raise InvalidGrid("finite differences need at least 3x3 samples")


def _gradient(v, h, axis):
    # centred in the interior, first-order one-sided at the edges
    return np.gradient(v, h, axis=axis, edge_order=1)


def fd_dx(f: ComplexField) -> ComplexField:
    _check_fd(f)
    return ComplexField(f.grid, _gradient(f.values, f.grid.h, 1))


def fd_dy(f: ComplexField) -> ComplexField:
    _check_fd(f)
    return ComplexField(f.grid, _gradient(f.values, f.grid.h, 0))


def dbar_values(v, h):
    return 0.5 * (_gradient(v, h, 1) + 1j * _gradient(v, h, 0))


def d_values(v, h):
    return 0.5 * (_gradient(v, h, 1) - 1j * _gradient(v, h, 0))


def fd_dbar(f: ComplexField) -> ComplexField:
    """d/dzbar by centred differences (one-sided at the grid edge)."""
    _check_fd(f)
    return ComplexField(f.grid, dbar_values(f.values, f.grid.h))


def fd_d(f: ComplexField) -> ComplexField:
    """d/dz by centred differences (one-sided at the grid edge)."""
    _check_fd(f)
    return ComplexField(f.grid, d_values(f.values, f.grid.h))


def _diff1d(n, h):
    main = np.zeros(n)
    up = np.full(n - 1, 0.5 / h)
    lo = np.full(n - 1, -0.5 / h)
    D = sp.diags([lo, main, up], [-1, 0, 1], format="lil")
    D[0, 0], D[0, 1] = -1.0 / h, 1.0 / h
    D[n - 1, n - 2], D[n - 1, n - 1] = -1.0 / h, 1.0 / h
    return D.tocsr()


def derivative_matrices(grid: Grid2D):
    """Sparse (Dx, Dy) acting on row-major flattened fields.

    They reproduce ``fd_dx``/``fd_dy`` exactly, including the one-sided
    edge rows, and commute with each other.
    """
    Dx = sp.kron(sp.identity(grid.ny, format="csr"), _diff1d(grid.nx, grid.h), format="csr")
    Dy = sp.kron(_diff1d(grid.ny, grid.h), sp.identity(grid.nx, format="csr"), format="csr")
    return Dx, Dy


def laplace_5pt_values(v, h):
    """Standard 5-point (f_xx + f_yy); edge samples are left at 0."""
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[1:-1, 2:] + v[1:-1, :-2] + v[2:, 1:-1] + v[:-2, 1:-1]
                       - 4.0 * v[1:-1, 1:-1]) / (h * h)
    return out


# -- norms ----------------------------------------------------------------

def _check_p(p):
    if p == np.inf or p == "inf":
        return np.inf
    p = float(p)
    if not p >= 1:
        raise InvalidExponent(f"L^p norms need p >= 1, got {p}")
    return p


def lp_norm_values(v, p, weight, mask, h):
    p = _check_p(p)
    a = np.abs(v[mask])
    if a.size == 0:
        return 0.0
    if p == np.inf:
        return float(a.max())
    w = weight[mask] if weight is not None else 1.0
    return float((np.sum(a ** p * w) * h * h) ** (1.0 / p))


def lp_norm(f: ComplexField, p, dom: DomainSpec, region="M0") -> float:
    """(sum |f|^p e^{2 sigma} h^2)^{1/p} over the region mask; max for p = inf."""
    if f.grid != dom.grid:
        raise GridMismatch("field and domain live on different grids")
    return lp_norm_values(f.values, p, dom.weight, dom.region_mask(region), f.grid.h)


def w1p_norm(f: ComplexField, p, dom: DomainSpec, region="M0") -> float:
    """||f||_p + ||df/dz||_p + ||df/dzbar||_p."""
    _check_p(p)
    return (lp_norm(f, p, dom, region) + lp_norm(fd_d(f), p, dom, region)
            + lp_norm(fd_dbar(f), p, dom, region))


def sample_points(f, points):
    """Bilinear interpolation of a field at arbitrary complex points.

    Points outside the grid are clamped to the nearest edge sample.
    """
    g = f.grid
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    ci = (pts.real - g.x0) / g.h
    cj = (pts.imag - g.y0) / g.h
    coords = np.vstack([cj.ravel(), ci.ravel()])
    v = f.values if isinstance(f, ComplexField) else f
    re = ndimage.map_coordinates(v.real, coords, order=1, mode="nearest")
    im = ndimage.map_coordinates(v.imag, coords, order=1, mode="nearest")
    return (re + 1j * im).reshape(pts.shape)


def annulus_domain(grid, inner0, r0, inner1, r1, sigma=None, margin=None):
    """Annuli M0 = {inner0 < |z| < r0} inside M0' = {inner1 < |z| < r1}, inner1 < inner0."""
    if not 0 <= inner1 < inner0 < r0 < r1:
        raise InvalidDomain("need 0 <= inner1 < inner0 < r0 < r1")
    h = grid.h
    if margin is None:
        margin = 2.0 * h
    r = np.abs(grid.z)
    m0 = (r > inner0) & (r < r0)
    m1 = (r > inner1) & (r < r1)
    outer = radial_cutoff(r, r0 + margin, r1 - margin)
    inner = 1.0 - radial_cutoff(r, inner1 + margin, inner0 - margin)
    rho = outer * inner
    rho[m0] = 1.0
    rho[~m1] = 0.0
    if callable(sigma):
        sigma = ComplexField(grid, np.real(sigma(grid.z)))
    dom = DomainSpec(grid, m0, m1, sigma=sigma, rho_tilde=rho)
    dom.params = {"shape": "annulus", "inner0": inner0, "r0": r0, "inner1": inner1, "r1": r1}
    return dom


def rel_l2(a, b, mask=None):
    """Relative L2 discrepancy ||a - b|| / ||b|| on an optional mask."""
    a = as_values(a)
    b = as_values(b)
    if mask is not None:
        a = a[mask]
        b = b[mask]
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))
