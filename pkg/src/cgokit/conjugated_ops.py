"""Phase-conjugated Cauchy-Riemann inverses and Laplacians.

Two phase families act on a PhiConfig:

* PhasePsi:      Psi = (Phi - Phi(p0))^2, psi = Re Psi, modulation M = e^{2 i psi lam}
* PhasePhiOmega: Phi.omega = Re(Phi conj(omega)), modulation M = e^{-i Phi.omega}

With R / Rbar the inverses of d/dz and d/dzbar::

    T_x s    = 1/2 conj(M) R(M s)         Tbar_x s = 1/2 conj(M) Rbar(M s)

The default forms never sample e^{i Psi lam} itself.  For Psi,
e^{i Psi lam} = e^{2 i psi lam} e^{-i conj(Psi) lam} and the second factor is
antiholomorphic, so it commutes with d/dz::

    e^{-i Psi lam} Delta_g e^{i Psi lam} g = -4 e^{-2 sigma} dbar[conj(M) d(M g)]
                                          = -4 e^{-2 sigma} (dbar d g + c dbar g),  c = d log M

and likewise for the other three.  ``form="analytic"`` (default) uses the
last line, so only the slowly varying g is differenced.  ``"modulated"``
differences M g and ``"literal"`` the holomorphic sandwich; both lose
accuracy as the phase frequency grows and ``"literal"`` can overflow.
"""
from __future__ import annotations

import numpy as np

from .amplitude import PhiConfig
from .cauchy_ops import cauchy_dbar_values, t_star_values, tbar_star_values
from .errors import GridMismatch, InvalidExponent, PhaseUnderResolved
from .field_core import ComplexField, DomainSpec, as_values, d_values, dbar_values

MIN_SAMPLES_PER_WAVE = 10.0
FORMS = ("analytic", "modulated", "literal")


class _Phase:
    phi: PhiConfig

    @property
    def dom(self) -> DomainSpec:
        return self.phi.dom

    @property
    def grid(self):
        return self.phi.grid

    def samples_per_wave(self, mask=None):
        """2 pi / (k h) with k the largest modulation gradient over ``mask`` (M0')."""
        k = self.max_gradient(mask)
        return np.inf if k == 0 else 2.0 * np.pi / (k * self.grid.h)

    def check_resolved(self, mask=None):
        spw = self.samples_per_wave(mask)
        if spw < MIN_SAMPLES_PER_WAVE:
            raise PhaseUnderResolved(
                f"{spw:.2f} samples per oscillation across M0' (need >= {MIN_SAMPLES_PER_WAVE:g}); "
                "refine the grid or lower the frequency")
        return spw


class PhasePsi(_Phase):
    """Psi(p; p0) = (Phi(p) - Phi(p0))^2 at frequency lam."""

    kind = "psi"

    def __init__(self, phi: PhiConfig, p0, lam):
        lam = float(lam)
        if not np.isfinite(lam) or lam < 0:
            raise InvalidExponent(f"lambda must be finite and >= 0, got {lam}")
        self.phi = phi
        self.p0 = complex(p0)
        self.lam = lam
        self.phi0 = complex(phi.value(self.p0))
        shift = phi.phi.values - self.phi0
        self.Psi = ComplexField(phi.grid, shift * shift)
        self.psi = ComplexField(phi.grid, self.Psi.values.real)
        self._dpsi_abs = 2.0 * np.abs(shift) * np.abs(phi.dphi.values)

    @property
    def frequency(self):
        return self.lam

    @property
    def modulation(self):
        """e^{2 i psi lam}."""
        return np.exp(2j * self.lam * self.psi.values.real)

    def holo_exponent(self, bar=False):
        """i Psi lam (or i conj(Psi) lam)."""
        P = self.Psi.values
        return 1j * self.lam * (np.conj(P) if bar else P)

    def holo_factor(self, bar=False):
        """e^{i Psi lam} (or e^{i conj(Psi) lam})."""
        return np.exp(self.holo_exponent(bar))

    def exponent_at(self, points, bar=False):
        """i Psi lam (or its conjugate-Phi twin) at arbitrary points, from Phi in closed form."""
        s = self.phi.value(points) - self.phi0
        return 1j * self.lam * (np.conj(s * s) if bar else s * s)

    def exponent_gradient_at(self, points, bar=False):
        """d/dz of the exponent (d/dzbar for bar) at arbitrary points."""
        pts = np.asarray(points, dtype=complex)
        dP = 2.0 * (self.phi.value(pts) - self.phi0) * self.phi.derivative(pts)
        return 1j * self.lam * (np.conj(dP) if bar else dP)

    def log_derivative(self, bar=False):
        """d log M (or dbar log M): i lam Psi' (or i lam conj(Psi'))."""
        dP = 2.0 * (self.phi.phi.values - self.phi0) * self.phi.dphi.values
        return 1j * self.lam * (np.conj(dP) if bar else dP)

    def max_gradient(self, mask=None):
        m = self.dom.mask_M0prime if mask is None else mask
        # |grad(2 psi lam)| = 2 lam |Psi'| = 4 lam |Phi - Phi0| |Phi'|
        return float(2.0 * self.lam * np.max(self._dpsi_abs[m])) if m.any() else 0.0

    def to_dict(self):
        return {"kind": self.kind, "p0": [self.p0.real, self.p0.imag], "lambda": self.lam,
                "phi": self.phi.to_dict()}


class PhasePhiOmega(_Phase):
    """Linear phase Phi.omega = Re(Phi conj(omega))."""

    kind = "phi_omega"

    def __init__(self, phi: PhiConfig, omega):
        omega = complex(omega)
        if not np.isfinite(omega) or abs(omega) == 0:
            raise InvalidExponent("omega must be finite and nonzero")
        self.phi = phi
        self.omega = omega
        self.pairing = ComplexField(phi.grid, (phi.phi.values * np.conj(omega)).real)

    @property
    def frequency(self):
        return abs(self.omega)

    @property
    def modulation(self):
        """e^{-i Phi.omega}."""
        return np.exp(-1j * self.pairing.values.real)

    def holo_exponent(self, bar=False):
        """-(i/2) Phi conj(omega) (or -(i/2) conj(Phi) omega)."""
        P = self.phi.phi.values
        return -0.5j * (np.conj(P) * self.omega if bar else P * np.conj(self.omega))

    def holo_factor(self, bar=False):
        """e^{-(i/2) Phi conj(omega)} (or e^{-(i/2) conj(Phi) omega})."""
        return np.exp(self.holo_exponent(bar))

    def exponent_at(self, points, bar=False):
        P = self.phi.value(points)
        return -0.5j * (np.conj(P) * self.omega if bar else P * np.conj(self.omega))

    def exponent_gradient_at(self, points, bar=False):
        dP = self.phi.derivative(points)
        return -0.5j * (self.omega * np.conj(dP) if bar else np.conj(self.omega) * dP)

    def log_derivative(self, bar=False):
        """d log M (or dbar log M): -(i/2) conj(omega) Phi' (or -(i/2) omega conj(Phi'))."""
        dP = self.phi.dphi.values
        return -0.5j * (self.omega * np.conj(dP) if bar else np.conj(self.omega) * dP)

    def pairing_consistency(self):
        """Max relative gap between the product of the two half-phases and e^{-i Phi.omega}."""
        prod = self.holo_factor(False) * self.holo_factor(True)
        return float(np.max(np.abs(prod - self.modulation)))

    def max_gradient(self, mask=None):
        m = self.dom.mask_M0prime if mask is None else mask
        return float(abs(self.omega) * np.max(np.abs(self.phi.dphi.values[m]))) if m.any() else 0.0

    def to_dict(self):
        return {"kind": self.kind, "omega": [self.omega.real, self.omega.imag],
                "phi": self.phi.to_dict()}


def _values(s, phase):
    if isinstance(s, ComplexField) and s.grid != phase.grid:
        raise GridMismatch("field and phase live on different grids")
    return as_values(s, phase.grid)


def _sandwich(v, phase, bar):
    M = phase.modulation
    w = cauchy_dbar_values(M * v if bar else np.conj(M * v), phase.grid)
    if not bar:
        w = np.conj(w)
    return 0.5 * np.conj(M) * w


def conj_t_values(s, phase, bar=False):
    phase.check_resolved()
    return _sandwich(_values(s, phase), phase, bar)


def conj_t_psi(s: ComplexField, phase: PhasePsi) -> ComplexField:
    """T_Psi s = 1/2 e^{-2 i psi lam} R(e^{2 i psi lam} s)."""
    return ComplexField(phase.grid, conj_t_values(s, phase, bar=False))


def conj_tbar_psi(s: ComplexField, phase: PhasePsi) -> ComplexField:
    """Tbar_Psi s = 1/2 e^{-2 i psi lam} Rbar(e^{2 i psi lam} s)."""
    return ComplexField(phase.grid, conj_t_values(s, phase, bar=True))


def conj_t_phi(s: ComplexField, phase: PhasePhiOmega) -> ComplexField:
    """T_Phi s = 1/2 e^{i Phi.omega} R(e^{-i Phi.omega} s)."""
    return ComplexField(phase.grid, conj_t_values(s, phase, bar=False))


def conj_tbar_phi(s: ComplexField, phase: PhasePhiOmega) -> ComplexField:
    """Tbar_Phi s = 1/2 e^{i Phi.omega} Rbar(e^{-i Phi.omega} s)."""
    return ComplexField(phase.grid, conj_t_values(s, phase, bar=True))


def _check_dom(phase, dom):
    dom = phase.dom if dom is None else dom
    if dom.grid != phase.grid:
        raise GridMismatch("domain and phase live on different grids")
    return dom


def cutoff_sandwich_values(s, phase, dom=None, bar=False):
    """T_x(rho~ s) for a form coefficient s: the last two stages of a composite."""
    dom = _check_dom(phase, dom)
    phase.check_resolved(dom.mask_M0prime)
    s = dom.rho_tilde.values.real * _values(s, phase)
    return _sandwich(s, phase, bar)


def composite_values(f, phase, dom=None, bar=False):
    """T_x rho~ T* f (bar=False) or Tbar_x rho~ Tbar* f (bar=True), step by step."""
    dom = _check_dom(phase, dom)
    v = _values(f, phase)
    s = tbar_star_values(v, dom) if bar else t_star_values(v, dom)
    return cutoff_sandwich_values(s, phase, dom, bar)


def composite_green_psi(f: ComplexField, phase: PhasePsi, dom=None) -> ComplexField:
    """T_Psi rho~ T* f, a right inverse of P_Psi on M0."""
    return ComplexField(phase.grid, composite_values(f, phase, dom, bar=False))


def composite_green_psibar(f: ComplexField, phase: PhasePsi, dom=None) -> ComplexField:
    """Tbar_Psi rho~ Tbar* f, a right inverse of P_Psibar on M0."""
    return ComplexField(phase.grid, composite_values(f, phase, dom, bar=True))


def composite_green_phi(f: ComplexField, phase: PhasePhiOmega, dom=None) -> ComplexField:
    """T_Phi rho~ T* f, a right inverse of P_Phi on M0."""
    return ComplexField(phase.grid, composite_values(f, phase, dom, bar=False))


def composite_green_phibar(f: ComplexField, phase: PhasePhiOmega, dom=None) -> ComplexField:
    """Tbar_Phi rho~ Tbar* f, a right inverse of P_Phibar on M0."""
    return ComplexField(phase.grid, composite_values(f, phase, dom, bar=True))


def conj_laplace_values(u, phase, bar=False, form="analytic", dom=None):
    dom = _check_dom(phase, dom)
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    v = _values(u, phase)
    h = phase.grid.h
    if form == "analytic":
        c = phase.log_derivative(bar)
        if bar:
            return -4.0 * dom.inv_weight * (dbar_values(d_values(v, h), h) + c * d_values(v, h))
        return -4.0 * dom.inv_weight * (d_values(dbar_values(v, h), h) + c * dbar_values(v, h))
    if form == "literal":
        E = phase.holo_factor(bar)
        w = E * v
        return -4.0 * dom.inv_weight * d_values(dbar_values(w, h), h) / E
    M = phase.modulation
    if bar:
        inner = np.conj(M) * dbar_values(M * v, h)
        return -4.0 * dom.inv_weight * d_values(inner, h)
    inner = np.conj(M) * d_values(M * v, h)
    return -4.0 * dom.inv_weight * dbar_values(inner, h)


def conj_laplace_apply(u: ComplexField, phase, bar=False, form="analytic", dom=None) -> ComplexField:
    """P_Psi u = e^{-i Psi lam} Delta_g(e^{i Psi lam} u) and its twins.

    ``phase`` picks Psi or Phi.omega, ``bar`` the conjugate twin
    (P_Psibar, P_Phibar).  Delta_g = -4 e^{-2 sigma} d dbar as in cauchy_ops.
    """
    return ComplexField(phase.grid, conj_laplace_values(u, phase, bar, form, dom))
