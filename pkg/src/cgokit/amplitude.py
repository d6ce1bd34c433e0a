"""Holomorphic amplitudes a(p; p0) and (1,0)-forms b_j on multi-sheet maps.

Given a holomorphic map Phi and a base point p~_0 with w0 = Phi(p~_0), the
preimages p~_0, ..., p~_N of w0 each get a pair of cutoffs built in the
image coordinate: chi~_j is 1 on |Phi - w0| <= r and chi~'_j is 1 on the
support of chi~_j, each restricted to its own sheet.  For p0 near p~_0::

    q      = dbar(chi~'_0) / (Phi - Phi(p0))     (set to 0 where dbar chi~'_0 vanishes)
    a~     = Rbar q
    a      = chi~'_0 - (Phi - Phi(p0)) a~

so dbar a = 0, a = 1 at p0 and a = 0 at the other preimages of Phi(p0).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .cauchy_ops import cauchy_dbar_values
from .errors import AliasRisk, InvalidBasePoint, SheetOverlap
from .field_core import (ComplexField, DomainSpec, dbar_values, lp_norm_values,
                         radial_cutoff, sample_points)

QUOTIENT_FLOOR = 1e-14
PHI_VARIANTS = ("identity", "square")


class PhiConfig:
    """A holomorphic map Phi sampled on the domain grid with its derivative."""

    def __init__(self, variant, dom: DomainSpec, crit_tol=None):
        if variant not in PHI_VARIANTS:
            raise ValueError(f"unknown Phi variant {variant!r}")
        self.variant = variant
        self.dom = dom
        grid = dom.grid
        z = grid.z
        if variant == "identity":
            self.n_sheets = 1
            phi, dphi = z, np.ones_like(z)
        else:
            self.n_sheets = 2
            phi, dphi = z * z, 2.0 * z
        self.phi = ComplexField(grid, phi)
        self.dphi = ComplexField(grid, dphi)
        if crit_tol is None:
            crit_tol = 2.0 * grid.h
        m = dom.mask_M0prime
        if m.any() and np.min(np.abs(dphi[m])) <= crit_tol * (1 if variant == "identity" else 2):
            raise SheetOverlap("Phi' vanishes (critical point) inside M0'")

    @property
    def grid(self):
        return self.dom.grid

    def value(self, p):
        p = np.asarray(p, dtype=complex)
        return p if self.variant == "identity" else p * p

    def derivative(self, p):
        p = np.asarray(p, dtype=complex)
        return np.ones_like(p) if self.variant == "identity" else 2.0 * p

    def preimages(self, w, near):
        """Points with Phi(p) = w; the one closest to ``near`` comes first."""
        w = complex(w)
        if self.variant == "identity":
            return [w]
        s = np.sqrt(w)
        pts = [s, -s]
        pts.sort(key=lambda p: abs(p - near))
        return pts

    def max_dphi(self, mask=None):
        m = self.dom.mask_M0prime if mask is None else mask
        return float(np.max(np.abs(self.dphi.values[m])))

    def to_dict(self):
        return {"variant": self.variant}


@dataclass
class Sheet:
    index: int
    center: complex
    chi: ComplexField
    chi_prime: ComplexField


@dataclass
class SheetSet:
    phi: PhiConfig
    r: float
    w0: complex
    sheets: list
    plateau: float = 1.1
    outer: float = 2.4
    labels: np.ndarray = dc_field(default=None, repr=False)

    @property
    def N(self):
        return len(self.sheets) - 1

    @property
    def grid(self):
        return self.phi.grid

    def chart_coordinate(self, p0):
        """z0 = Phi(p0) - Phi(p~_0), the base-chart coordinate of p0."""
        return complex(self.phi.value(p0)) - self.w0

    def sheet_of(self, p):
        centers = np.array([s.center for s in self.sheets])
        return int(np.argmin(np.abs(centers - complex(p))))

    def base_point(self, z0):
        """The point of sheet 0 with chart coordinate z0."""
        return self.phi.preimages(self.w0 + complex(z0), self.sheets[0].center)[0]

    def matching_points(self, p0):
        """Preimages of Phi(p0), one per sheet, ordered by sheet index."""
        w = complex(self.phi.value(p0))
        return [self.phi.preimages(w, s.center)[0] for s in self.sheets]


def build_sheet_set(phi: PhiConfig, p_tilde0, r, plateau=1.1, outer=2.4) -> SheetSet:
    """Sheets around every preimage of Phi(p~_0), with cutoff pairs per sheet.

    chi~_j  : 1 on |Phi - w0| <= r,           0 beyond plateau * r
    chi~'_j : 1 on |Phi - w0| <= plateau * r, 0 beyond outer * r

    Base points p0 are admissible while |Phi(p0) - w0| < plateau * r.
    """
    if not 1 < plateau < outer:
        raise ValueError("need 1 < plateau < outer")
    grid = phi.grid
    p_tilde0 = complex(p_tilde0)
    if r <= 0:
        raise ValueError("r must be positive")
    if not grid.contains(p_tilde0):
        raise InvalidBasePoint("p~_0 lies outside the grid")
    w0 = complex(phi.value(p_tilde0))
    centers = phi.preimages(w0, p_tilde0)
    z = grid.z
    dist = np.abs(phi.phi.values - w0)
    gp = radial_cutoff(dist, plateau * r, outer * r)
    gc = radial_cutoff(dist, r, plateau * r)
    labels = np.argmin(np.abs(z[..., None] - np.array(centers)[None, None, :]), axis=-1)

    comp, ncomp = ndimage.label(gp > 0)
    sheets = []
    for j, c in enumerate(centers):
        jc, ic = grid.nearest_index(c)
        if not grid.contains(c, margin=grid.h) or comp[jc, ic] == 0:
            raise SheetOverlap(f"sheet {j} centre {c} has no cutoff support on the grid")
        blob = comp == comp[jc, ic]
        if np.any(labels[blob] != j):
            raise SheetOverlap(f"cutoff support of sheet {j} reaches another sheet")
        if np.any(blob[0, :]) or np.any(blob[-1, :]) or np.any(blob[:, 0]) or np.any(blob[:, -1]):
            raise SheetOverlap(f"cutoff support of sheet {j} touches the grid edge")
        _check_injective(phi.phi.values[blob], z[blob], grid.h, phi.max_dphi(blob))
        chi_p = np.where(blob, gp, 0.0)
        chi = np.where(blob, gc, 0.0)
        sheets.append(Sheet(j, c, ComplexField(grid, chi), ComplexField(grid, chi_p)))
    covered = sum(np.count_nonzero(s.chi_prime.values) for s in sheets)
    if covered != np.count_nonzero(gp):
        raise SheetOverlap("cutoff support has components that belong to no sheet")
    return SheetSet(phi, float(r), w0, sheets, plateau, outer, labels)


def _check_injective(wvals, zvals, h, dmax):
    """Sampling check that Phi is one-to-one on a sheet neighbourhood."""
    if wvals.size < 2:
        return
    pts = np.column_stack([wvals.real, wvals.imag])
    tree = cKDTree(pts)
    eps = 0.25 * h * max(dmax, 1e-12)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    if pairs.size and np.any(np.abs(zvals[pairs[:, 0]] - zvals[pairs[:, 1]]) > 4 * h):
        raise SheetOverlap("Phi is not injective on a sheet neighbourhood")


@dataclass
class Amplitude:
    p0: complex
    a: ComplexField
    a_tilde: ComplexField
    sheets: SheetSet = dc_field(repr=False, default=None)

    def at(self, points):
        return sample_points(self.a, points)

    def delta_report(self, tol=0.05):
        """|a - delta| at every preimage of Phi(p0)."""
        rows = []
        for j, p in enumerate(self.sheets.matching_points(self.p0)):
            val = complex(self.at(p).ravel()[0])
            target = 1.0 if j == 0 else 0.0
            err = abs(val - target)
            rows.append({"sheet": j, "point": [p.real, p.imag], "abs_a": abs(val),
                         "error": err, "tolerance": tol, "pass": bool(err <= tol)})
        return rows

    def dbar_residual(self, dom=None, region="M0"):
        return relative_dbar_residual(self.a, dom or self.sheets.phi.dom, region)


@dataclass
class HoloForm:
    j: int
    p0: complex
    b: ComplexField
    b_tilde: ComplexField
    sheets: SheetSet = dc_field(repr=False, default=None)

    def sheet_coefficient(self, points):
        """Coefficient of b with respect to the sheet coordinate dz_k = Phi' dz."""
        pts = np.asarray(points, dtype=complex)
        return sample_points(self.b, pts) / self.sheets.phi.derivative(pts)

    def delta_report(self, tol=0.05):
        rows = []
        for k, p in enumerate(self.sheets.matching_points(self.p0)):
            val = complex(self.sheet_coefficient(p).ravel()[0])
            target = 1.0 if k == self.j else 0.0
            err = abs(val - target)
            rows.append({"sheet": k, "point": [p.real, p.imag], "abs_b": abs(val),
                         "error": err, "tolerance": tol, "pass": bool(err <= tol)})
        return rows

    def dbar_residual(self, dom=None, region="M0"):
        return relative_dbar_residual(self.b, dom or self.sheets.phi.dom, region)


def relative_dbar_residual(f: ComplexField, dom: DomainSpec, region="M0"):
    """||fd_dbar f||_{L2} / ||f||_{L2} over a domain region."""
    mask = dom.region_mask(region)
    v = f.values
    num = lp_norm_values(dbar_values(v, f.grid.h), 2, dom.weight, mask, f.grid.h)
    den = lp_norm_values(v, 2, dom.weight, mask, f.grid.h)
    return num / den if den > 0 else num


def _check_base_point(sheets: SheetSet, p0):
    p0 = complex(p0)
    grid = sheets.grid
    if not grid.contains(p0):
        raise InvalidBasePoint(f"p0 = {p0} lies outside the grid")
    z0 = sheets.chart_coordinate(p0)
    if abs(z0) >= sheets.plateau * sheets.r or sheets.sheet_of(p0) != 0:
        raise InvalidBasePoint(f"p0 = {p0} lies outside the base chart (|z0| = {abs(z0):.3g})")
    return p0


def _corrector(sheets: SheetSet, chi_prime, p0, numerator_factor=None):
    grid = sheets.grid
    dchi = dbar_values(chi_prime.values, grid.h)
    if numerator_factor is not None:
        dchi = dchi * numerator_factor
    shift = sheets.phi.phi.values - complex(sheets.phi.value(p0))
    keep = np.abs(dchi) >= QUOTIENT_FLOOR
    q = np.zeros(grid.shape, dtype=complex)
    q[keep] = dchi[keep] / shift[keep]
    return shift, cauchy_dbar_values(q, grid)


def build_amplitude(sheets: SheetSet, p0) -> Amplitude:
    """a(.; p0) holomorphic with a = 1 at p0 and a = 0 at the other preimages."""
    p0 = _check_base_point(sheets, p0)
    chi_p = sheets.sheets[0].chi_prime
    shift, at = _corrector(sheets, chi_p, p0)
    a = chi_p.values - shift * at
    return Amplitude(p0, ComplexField(sheets.grid, a), ComplexField(sheets.grid, at), sheets)


def build_bform(sheets: SheetSet, j, p0) -> HoloForm:
    """Holomorphic (1,0)-form b_j, stored as its coefficient in the base coordinate."""
    p0 = _check_base_point(sheets, p0)
    if not 0 <= j < len(sheets.sheets):
        raise IndexError(f"sheet index {j} out of range")
    chi_p = sheets.sheets[j].chi_prime
    dphi = sheets.phi.dphi.values
    shift, bt = _corrector(sheets, chi_p, p0, numerator_factor=dphi)
    b = chi_p.values * dphi - shift * bt
    return HoloForm(j, p0, ComplexField(sheets.grid, b), ComplexField(sheets.grid, bt), sheets)


def circle_family(sheets: SheetSet, n_samples, radius=None):
    """Amplitudes for p0 on the uniform circle |z0| = r/2 of the base chart."""
    rad = 0.5 * sheets.r if radius is None else radius
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    return [build_amplitude(sheets, sheets.base_point(rad * np.exp(1j * t))) for t in theta]


def taylor_coeffs(sheets: SheetSet, family=None, mu_max=8, n_samples=None):
    """Coefficients a_mu(p) with a(p; p0) = sum_mu a_mu(p) z0^mu.

    Trapezoid rule for the Cauchy integral over the circle |z0| = r/2.
    ``family`` is a list of Amplitudes ordered by angle on that circle; it
    is built here when omitted.
    """
    if family is None:
        n = n_samples if n_samples is not None else 4 * mu_max
        if n < 4 * mu_max:
            raise AliasRisk(f"{n} circle samples for mu_max = {mu_max}; need >= {4 * mu_max}")
        family = circle_family(sheets, n)
    n = len(family)
    if n < 4 * mu_max:
        raise AliasRisk(f"{n} circle samples for mu_max = {mu_max}; need >= {4 * mu_max}")
    z0 = np.array([sheets.chart_coordinate(am.p0) for am in family])
    rad = 0.5 * sheets.r
    expected = rad * np.exp(2j * np.pi * np.arange(n) / n)
    if np.max(np.abs(z0 - expected)) > 1e-9 * max(rad, 1.0):
        raise ValueError("family is not on the uniform circle |z0| = r/2 in angle order")
    stack = np.stack([am.a.values for am in family])
    # a_mu = (1/n) sum_k a_k (r/2)^-mu e^{-i mu theta_k}: a DFT over the circle index
    spec = np.fft.fft(stack, axis=0) / n
    out = []
    for mu in range(mu_max):
        out.append(ComplexField(sheets.grid, spec[mu] * rad ** (-mu)))
    return out


def taylor_eval(coeffs, z0):
    """sum_mu a_mu z0^mu."""
    acc = np.zeros(coeffs[0].grid.shape, dtype=complex)
    for mu, c in enumerate(coeffs):
        acc = acc + c.values * complex(z0) ** mu
    return ComplexField(coeffs[0].grid, acc)
