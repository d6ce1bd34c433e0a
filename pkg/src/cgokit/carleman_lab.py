"""Measured decay of conjugated operators in lambda and |omega|.

Each sweep evaluates a norm at a geometric list of frequencies, drops
points the phase guard rejects, and fits log(norm) = c + slope log(param)
on the upper half of the admissible points.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amplitude import PhiConfig
from .conjugated_ops import (PhasePhiOmega, PhasePsi, composite_values, conj_t_values)
from .errors import InvalidExponentPair, NoDecaySignal, PhaseUnderResolved
from .field_core import as_values, lp_norm_values

MIN_POINTS = 5
DEFAULT_SLOPE_TOL = 0.15
MONOTONE_MAX_SLOPE = -0.05


@dataclass
class DecayReport:
    parameter: str
    params: list
    norms: list
    admissible: list
    included: list
    slope: float
    intercept: float
    r2: float
    theory: float | None
    slope_tol: float = DEFAULT_SLOPE_TOL
    norm: str = "q"
    meta: dict = field(default_factory=dict)

    @property
    def fit_params(self):
        return [p for p, k in zip(self.params, self.included) if k]

    @property
    def excluded(self):
        """Parameters rejected by the phase-resolution guard."""
        return [p for p, k in zip(self.params, self.admissible) if not k]

    @property
    def monotone(self):
        """Strict decrease over every point that passed the phase guard."""
        vals = [n for n in self.norms if np.isfinite(n)]
        return bool(np.all(np.diff(vals) < 0))

    @property
    def passed(self):
        """Two-sided slope check, or monotone decay when the exponent is only '0+'."""
        if self.theory is None:
            return bool(self.monotone and self.slope <= MONOTONE_MAX_SLOPE)
        return bool(abs(self.slope + self.theory) <= self.slope_tol)

    @property
    def bound_satisfied(self):
        """One-sided check: decay at least as fast as the exponent (up to slope_tol)."""
        if self.theory is None:
            return self.passed
        return bool(self.slope <= -self.theory + self.slope_tol)

    def summary(self):
        return {
            "parameter": self.parameter,
            "norm": self.norm,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "theory": self.theory,
            "slope_tol": self.slope_tol,
            "pass": self.passed,
            "bound_satisfied": self.bound_satisfied,
            "fit_params": self.fit_params,
            "excluded_params": self.excluded,
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "norm", "included_in_fit"])
        for p, n, k in zip(self.params, self.norms, self.included):
            w.writerow([repr(float(p)), repr(float(n)), int(k)])
        return buf.getvalue()

    def write(self, stem):
        """Write ``stem.csv`` and ``stem.json``."""
        stem = Path(stem)
        stem.with_suffix(".csv").write_text(self.to_csv())
        stem.with_suffix(".json").write_text(self.to_json())


def lambda_exponent(p, q):
    """1 - (1/p - 1/q)."""
    return 1.0 - (1.0 / p - 1.0 / q)


def check_psi_pair(p, q):
    p, q = float(p), float(q)
    ok = 4.0 / 3.0 < p < 2.0 and q > 4.0 and 0.5 + 1.0 / q >= 1.0 / p - 1e-12 and 1.0 / p > 0.5
    if not ok:
        raise InvalidExponentPair(f"(p, q) = ({p}, {q}) outside ]4/3,2[ x ]4,inf[ with 1/2 + 1/q >= 1/p > 1/2")
    return p, q


def check_phi_pair(p, q):
    p, q = float(p), float(q)
    if not (4.0 / 3.0 < p < 2.0 and 2.0 < q < 4.0 and abs(1.0 / p + 1.0 / q - 1.0) < 1e-9):
        raise InvalidExponentPair(f"(p, q) = ({p}, {q}) must be conjugate with p in ]4/3,2[")
    return p, q


def check_params(params):
    a = np.asarray(params, dtype=float)
    if a.ndim != 1 or a.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} parameter values")
    if not np.all(np.isfinite(a)) or np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise ValueError("parameters must be positive and strictly increasing")
    ratio = a[1:] / a[:-1]
    if np.max(np.abs(ratio / ratio[0] - 1.0)) > 1e-9:
        raise ValueError("parameters must form a geometric sequence")
    return a


def fit_loglog(params, norms):
    """Least squares line through (log param, log norm); returns slope, intercept, R^2."""
    x = np.log(np.asarray(params, dtype=float))
    y = np.log(np.asarray(norms, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _sweep(parameter, params, evaluate, theory, slope_tol, norm, meta):
    params = check_params(params)
    norms = []
    admissible = []
    for prm in params:
        try:
            val = evaluate(float(prm))
        except PhaseUnderResolved:
            norms.append(float("nan"))
            admissible.append(False)
            continue
        norms.append(float(val))
        admissible.append(True)
    good = [i for i, k in enumerate(admissible) if k]
    if len(good) < MIN_POINTS:
        raise PhaseUnderResolved(
            f"only {len(good)} of {len(params)} {parameter} values pass the phase guard")
    gn = np.array([norms[i] for i in good])
    if not np.all(gn > 0):
        raise NoDecaySignal("measured norms vanish; nothing to fit")
    window = good[len(good) // 2:] if len(good) >= 6 else good[-3:]
    included = [i in window for i in range(len(params))]
    slope, intercept, r2 = fit_loglog([params[i] for i in window], [norms[i] for i in window])
    rep = DecayReport(parameter, [float(p) for p in params], norms, admissible, included, slope, intercept, r2,
                      theory, slope_tol, norm, meta)
    return rep


def _norm(v, q, dom):
    return lp_norm_values(v, q, dom.weight, dom.mask_M0, dom.grid.h)


def measure_decay_psi(s, p, q, lambdas, p0, phi: PhiConfig, slope_tol=DEFAULT_SLOPE_TOL) -> DecayReport:
    """||Tbar_Psi s||_{L^q(M0)} over lambda; exponent 1 - (1/p - 1/q)."""
    p, q = check_psi_pair(p, q)
    v = as_values(s, phi.grid)
    dom = phi.dom

    def ev(lam):
        return _norm(conj_t_values(v, PhasePsi(phi, p0, lam), bar=True), q, dom)

    return _sweep("lambda", lambdas, ev, lambda_exponent(p, q), slope_tol, f"L^{q:g}",
                  {"p": p, "q": q, "p0": [complex(p0).real, complex(p0).imag], "operator": "Tbar_Psi"})


def measure_decay_psi_inf(s, r, lambdas, p0, phi: PhiConfig, slope_tol=DEFAULT_SLOPE_TOL) -> DecayReport:
    """sup_{M0} |Tbar_Psi s| over lambda; bound exponent 1/r for s in W^{1,r}."""
    r = float(r)
    if not 2.0 < r < np.inf:
        raise InvalidExponentPair(f"r must lie in ]2, inf[, got {r}")
    v = as_values(s, phi.grid)
    dom = phi.dom

    def ev(lam):
        return _norm(conj_t_values(v, PhasePsi(phi, p0, lam), bar=True), np.inf, dom)

    return _sweep("lambda", lambdas, ev, 1.0 / r, slope_tol, "L^inf",
                  {"r": r, "p0": [complex(p0).real, complex(p0).imag], "operator": "Tbar_Psi"})


def measure_decay_phi(s, p, q, omegas, direction, phi: PhiConfig, slope_tol=0.2, norm="q") -> DecayReport:
    """||Tbar_Phi s|| over |omega| with omega = |omega| * direction; exponent 1."""
    p, q = check_phi_pair(p, q)
    direction = complex(direction)
    if abs(direction) == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / abs(direction)
    v = as_values(s, phi.grid)
    dom = phi.dom
    qq = np.inf if norm == "inf" else q

    def ev(w):
        return _norm(conj_t_values(v, PhasePhiOmega(phi, w * direction), bar=True), qq, dom)

    return _sweep("omega", omegas, ev, 1.0, slope_tol, "L^inf" if norm == "inf" else f"L^{q:g}",
                  {"p": p, "q": q, "direction": [direction.real, direction.imag], "operator": "Tbar_Phi"})


def measure_composite_decay(f, p, q, params, phi: PhiConfig, p0=None, direction=None,
                            norm="q", slope_tol=None) -> DecayReport:
    """Norms of Tbar_x rho~ Tbar* f over lambda (p0 given) or |omega| (direction given).

    With ``norm="inf"`` in the lambda case the exponent is only '0+', so
    the report checks monotone decay with slope <= -0.05 instead.
    """
    if (p0 is None) == (direction is None):
        raise ValueError("give exactly one of p0 (lambda sweep) or direction (omega sweep)")
    v = as_values(f, phi.grid)
    dom = phi.dom
    qq = np.inf if norm == "inf" else float(q)
    label = "L^inf" if norm == "inf" else f"L^{float(q):g}"
    if p0 is not None:
        p, q = check_psi_pair(p, q)

        def ev(lam):
            return _norm(composite_values(v, PhasePsi(phi, p0, lam), bar=True), qq, dom)

        theory = None if norm == "inf" else lambda_exponent(p, q)
        return _sweep("lambda", params, ev, theory, DEFAULT_SLOPE_TOL if slope_tol is None else slope_tol,
                      label, {"p": p, "q": q, "p0": [complex(p0).real, complex(p0).imag],
                              "operator": "Tbar_Psi rho Tbar*"})
    p, q = check_phi_pair(p, q)
    d = complex(direction) / abs(complex(direction))

    def ev(w):
        return _norm(composite_values(v, PhasePhiOmega(phi, w * d), bar=True), qq, dom)

    return _sweep("omega", params, ev, 1.0, 0.2 if slope_tol is None else slope_tol, label,
                  {"p": p, "q": q, "direction": [d.real, d.imag], "operator": "Tbar_Phi rho Tbar*"})
