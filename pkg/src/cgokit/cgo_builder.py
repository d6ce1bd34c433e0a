"""Complex geometric optics solutions by Neumann series.

For the Psi family (the other three kinds are the obvious twins)::

    u   = e^{i Psi lam} (u_0 - u_1 + u_2 - ...)
    u_0 = a
    u_1 = T_Psi rho~ (T* (V a) - sum_j Q+_j b_j)
    u_j = T_Psi rho~ T* (V u_{j-1})

Since P_Psi u_j = V u_{j-1} on M0, the series w = sum (-1)^j u_j solves
(P_Psi + V) w = 0 there, i.e. (Delta_g + V) u = 0.  Everything is stored
and checked in phase-normalized form (w and P_Psi), because the phase
factor itself can reach e^{+-lam |Psi|}.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .amplitude import Amplitude, HoloForm, PhiConfig
from .cauchy_ops import t_star_values, tbar_star_values
from .conjugated_ops import (PhasePhiOmega, PhasePsi, conj_laplace_values,
                             cutoff_sandwich_values)
from .errors import GridMismatch, NoContraction, ResolutionMismatch
from .field_core import ComplexField, PotentialSpec, as_values, lp_norm_values, sample_points

KINDS = ("Psi", "PsiBar", "PhiOmega", "PhiBarOmega")
DEFAULT_TOL = 1e-6
DEFAULT_J_MAX = 12


@dataclass
class CorrectionSet:
    """Values Q+_j, Q-_j at p0 and the holomorphic forms b_j they multiply (j = 1..N)."""

    q_plus: list = field(default_factory=list)
    q_minus: list = field(default_factory=list)
    forms: list = field(default_factory=list)

    def __post_init__(self):
        self.q_plus = [complex(q) for q in self.q_plus]
        self.q_minus = [complex(q) for q in self.q_minus]
        n = len(self.forms)
        if len(self.q_plus) != n or len(self.q_minus) != n:
            raise ValueError("CorrectionSet needs one Q+ and one Q- per form")
        if not all(np.isfinite(q) for q in self.q_plus + self.q_minus):
            raise ValueError("CorrectionSet values must be finite")

    @property
    def size(self):
        return len(self.forms)

    def form_values(self, bar):
        """sum_j Q+_j b_j, or sum_j Q-_j conj(b_j) for the barred kinds."""
        acc = None
        qs = self.q_minus if bar else self.q_plus
        for q, b in zip(qs, self.forms):
            bv = b.b.values if isinstance(b, HoloForm) else as_values(b)
            term = q * (np.conj(bv) if bar else bv)
            acc = term if acc is None else acc + term
        return acc

    def to_dict(self):
        return {"q_plus": [[q.real, q.imag] for q in self.q_plus],
                "q_minus": [[q.real, q.imag] for q in self.q_minus], "size": self.size}


@dataclass
class CGOSolution:
    kind: str
    parameter: complex
    p0: complex | None
    amplitude: object
    terms: list
    term_norms: list
    residual: float
    residual_history: list
    contraction_ratio: float
    threshold: float
    phase: object = field(repr=False, default=None)
    V: ComplexField = field(repr=False, default=None)

    @property
    def J(self):
        return len(self.terms) - 1

    @property
    def bar(self):
        return self.kind in ("PsiBar", "PhiBarOmega")

    @property
    def grid(self):
        return self.terms[0].grid

    def series_values(self, J=None):
        """sum_{j <= J} (-1)^j u_j, the phase-normalized solution."""
        J = self.J if J is None else J
        acc = np.zeros(self.grid.shape, dtype=complex)
        for j, t in enumerate(self.terms[:J + 1]):
            acc = acc + t.values if j % 2 == 0 else acc - t.values
        return acc

    @property
    def series(self):
        return ComplexField(self.grid, self.series_values())

    def phase_exponent(self):
        return self.phase.holo_exponent(self.bar)

    def phase_factor(self):
        return self.phase.holo_factor(self.bar)

    def assembled_values(self):
        return self.phase_factor() * self.series_values()

    @property
    def assembled(self):
        """e^{phase} sum_j (-1)^j u_j."""
        return ComplexField(self.grid, self.assembled_values())

    @property
    def passed(self):
        return bool(self.contraction_ratio < 1.0 and self.residual <= self.threshold)

    def certificate(self):
        par = complex(self.parameter)
        return {
            "phase": self.kind,
            "parameter": par.real if par.imag == 0 and self.kind in ("Psi", "PsiBar") else [par.real, par.imag],
            "J": self.J,
            "term_norms": list(self.term_norms),
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "contraction_ratio": self.contraction_ratio,
            "threshold": self.threshold,
            "pass": self.passed,
        }

    def certificate_json(self):
        return json.dumps(self.certificate(), indent=2, sort_keys=True) + "\n"


def make_phase(kind, parameter, phi: PhiConfig, p0=None):
    if kind not in KINDS:
        raise ValueError(f"phase kind must be one of {KINDS}")
    if kind in ("Psi", "PsiBar"):
        if p0 is None:
            raise ValueError("Psi phases need p0")
        return PhasePsi(phi, p0, float(np.real(parameter)))
    return PhasePhiOmega(phi, complex(parameter))


def _amplitude_values(amplitude, grid):
    if amplitude is None:
        return np.ones(grid.shape, dtype=complex)
    if isinstance(amplitude, Amplitude):
        amplitude = amplitude.a
    if isinstance(amplitude, ComplexField) and amplitude.grid != grid:
        raise GridMismatch("amplitude and phase live on different grids")
    return as_values(amplitude, grid)


def _potential_values(V, grid):
    if isinstance(V, PotentialSpec):
        V = V.realized
    if isinstance(V, ComplexField) and V.grid != grid:
        raise GridMismatch("potential and phase live on different grids")
    if np.ndim(V) == 0 and not isinstance(V, ComplexField):
        return np.full(grid.shape, complex(V))
    return as_values(V, grid)


def relative_residual(w, V, phase, bar, dom=None):
    """||(P + V) w||_{L2(M0)} / ||w||_{L2(M0)} with P the conjugated Laplacian."""
    dom = phase.dom if dom is None else dom
    r = conj_laplace_values(w, phase, bar=bar, dom=dom) + V * w
    m = dom.mask_M0
    h = dom.grid.h
    den = lp_norm_values(w, 2, dom.weight, m, h)
    num = lp_norm_values(r, 2, dom.weight, m, h)
    return num / den if den > 0 else num


def build_cgo(V, kind, parameter, phi: PhiConfig, p0=None, amplitude=None, corrections=None,
              J_max=DEFAULT_J_MAX, tol=DEFAULT_TOL, threshold=1e-2) -> CGOSolution:
    """Neumann-series CGO solution of (Delta_g + V) u = 0 on M0.

    ``amplitude`` is an Amplitude, a holomorphic field, or None for a = 1
    (the exact amplitude of the identity map).  The barred kinds use
    conj(a).  Iteration stops once the sup norm of a term falls below
    ``tol`` times that of a, or at ``J_max``.
    """
    phase = make_phase(kind, parameter, phi, p0)
    bar = kind in ("PsiBar", "PhiBarOmega")
    dom = phi.dom
    grid = phi.grid
    phase.check_resolved(dom.mask_M0prime)
    Vv = _potential_values(V, grid)
    a = _amplitude_values(amplitude, grid)
    u0 = np.conj(a) if bar else a
    star = tbar_star_values if bar else t_star_values
    m0 = dom.mask_M0
    h = grid.h

    def sup(v):
        return lp_norm_values(v, np.inf, None, m0, h)

    a_sup = sup(u0)
    terms = [u0]
    norms = [a_sup]
    corr = None
    if corrections is not None and corrections.size:
        corr = corrections.form_values(bar)
    lap_terms = [conj_laplace_values(u0, phase, bar=bar, dom=dom)]
    history = []

    def residual_upto(j):
        w = np.zeros(grid.shape, dtype=complex)
        pw = np.zeros(grid.shape, dtype=complex)
        for i in range(j + 1):
            sgn = 1.0 if i % 2 == 0 else -1.0
            w = w + sgn * terms[i]
            pw = pw + sgn * lap_terms[i]
        r = pw + Vv * w
        den = lp_norm_values(w, 2, dom.weight, m0, h)
        num = lp_norm_values(r, 2, dom.weight, m0, h)
        return num / den if den > 0 else num

    history.append(residual_upto(0))
    # V = 0: the series stops at u_0
    for j in range(1, J_max + 1 if np.any(Vv) else 1):
        s = star(Vv * terms[-1], dom)
        if j == 1 and corr is not None:
            s = s - corr
        uj = cutoff_sandwich_values(s, phase, dom, bar)
        terms.append(uj)
        norms.append(sup(uj))
        lap_terms.append(conj_laplace_values(uj, phase, bar=bar, dom=dom))
        history.append(residual_upto(j))
        if norms[-1] < tol * a_sup:
            break
    ratios = [norms[i] / norms[i - 1] for i in range(1, len(norms)) if norms[i - 1] > 0]
    ratio = float(max(ratios[-3:])) if ratios else 0.0
    fields = [ComplexField(grid, t) for t in terms]
    sol = CGOSolution(kind, complex(parameter), None if p0 is None else complex(p0), amplitude,
                      fields, [float(n) for n in norms], float(history[-1]),
                      [float(x) for x in history], ratio, float(threshold), phase,
                      ComplexField(grid, Vv))
    if ratio >= 1.0:
        raise NoContraction(
            f"term norms do not contract (ratio {ratio:.3g} over the last terms); "
            f"raise the frequency above {abs(complex(parameter)):g}")
    return sol


# -- boundary traces ------------------------------------------------------

def boundary_trace(sol, boundary, center=0j, n_max=None):
    """Dirichlet and Neumann data of a Cartesian solution on a circle.

    ``sol`` is a CGOSolution or a ComplexField.  ``boundary`` is a
    PolarGrid (radius, ntheta).  For a CGOSolution only the slowly varying
    series is interpolated (bilinear) and the phase factor is evaluated in
    closed form at the boundary nodes; a plain field is interpolated as is.
    The radial derivative of the interpolated part is the second-order
    one-sided difference with step h.
    Returns (dirichlet, neumann) as BoundaryTrace objects.
    """
    from .forward_dn import BoundaryTrace

    is_cgo = isinstance(sol, CGOSolution)
    f = sol.series if is_cgo else sol
    if not isinstance(f, ComplexField):
        raise TypeError("boundary_trace needs a CGOSolution or ComplexField")
    grid = f.grid
    R = float(boundary.radius)
    theta = boundary.theta
    h = grid.h
    arc = 2.0 * np.pi * R / boundary.ntheta
    if h > 2.0 * arc:
        raise ResolutionMismatch(
            f"Cartesian spacing {h:.3g} is coarser than twice the boundary node spacing {arc:.3g}")
    if not grid.contains(center, margin=R + 2.0 * h):
        raise ResolutionMismatch("the boundary circle is not inside the grid with a two-cell margin")
    if 2.0 * h >= R:
        raise ResolutionMismatch("radius too small for the one-sided radial difference")
    e = np.exp(1j * theta)
    pts = center + R * e
    u0 = sample_points(f, pts)
    u1 = sample_points(f, center + (R - h) * e)
    u2 = sample_points(f, center + (R - 2.0 * h) * e)
    dn = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)
    if is_cgo:
        E = sol.phase.exponent_at(pts, sol.bar)
        dE = sol.phase.exponent_gradient_at(pts, sol.bar)
        dEr = dE * (np.conj(e) if sol.bar else e)
        fac = np.exp(E)
        dn = fac * (dn + dEr * u0)
        u0 = fac * u0
    return BoundaryTrace.from_nodal(u0, n_max), BoundaryTrace.from_nodal(dn, n_max)
