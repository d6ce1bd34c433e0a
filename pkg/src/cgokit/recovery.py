"""Potential recovery: stationary-phase filter, Gaussian-regularized inversion
and the DN-map-to-potential pipeline.

Fourier convention (used throughout)::

    F f(zeta) = int f(z) e^{-i Re(z conj(zeta))} dA(z)

Under it the filter (2 lam/pi) e^{+-2i lam Re z^2} * V has multiplier
e^{-+i Re(zeta^2)/(8 lam)}; the separable Fresnel integrals
int e^{2i lam x^2} dx = sqrt(pi/(2 lam)) e^{i pi/4} (and the conjugate in y)
give both the constant 1 and the phase.

The filter kernel is cell-averaged in closed form (Fresnel integrals) rather
than point-sampled.  A point-sampled chirp aliases once 4 lam |d| h > pi and
puts ghost copies of V at offsets pi/(2 lam h); the cell average has zeros
at exactly those aliased frequencies.  The box average it applies to the
output is divided out on the padded lattice (sinc factors, >= 2/pi each).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import special

from .amplitude import SheetSet, build_amplitude
from .carleman_lab import DecayReport, check_params, fit_loglog
from .cauchy_ops import _check_support
from .cgo_builder import build_cgo, boundary_trace
from .errors import (BasisMismatch, NoContraction, NoDecaySignal, PhaseUnderResolved,
                     ReconstructionUnstable, ResolutionMismatch)
from .field_core import ComplexField, Grid2D, as_values, radial_cutoff

MIN_ZONE_CELLS = 2.0
MIN_SAMPLES_PER_PERIOD = 4.0
SMOOTH_BOUND = -0.5


# -- stationary-phase filter ----------------------------------------------

def _fresnel_cell(d, h, lam, sgn):
    """(1/h) int_{d-h/2}^{d+h/2} e^{sgn 2i lam x^2} dx, in closed form."""
    a = np.sqrt(4.0 * lam / np.pi)
    s_hi, c_hi = special.fresnel(a * (d + 0.5 * h))
    s_lo, c_lo = special.fresnel(a * (d - 0.5 * h))
    val = ((c_hi - c_lo) + 1j * (s_hi - s_lo)) / (a * h)
    return val if sgn > 0 else np.conj(val)


@lru_cache(maxsize=8)
def _filter_spectrum(nx, ny, h, lam, sgn):
    mx = sfft.next_fast_len(2 * nx - 1)
    my = sfft.next_fast_len(2 * ny - 1)
    kx = np.arange(mx)
    ky = np.arange(my)
    ox = np.where(kx <= mx // 2, kx, kx - mx) * h
    oy = np.where(ky <= my // 2, ky, ky - my) * h
    # Re (x + iy)^2 = x^2 - y^2: the y factor carries the opposite sign
    cx = _fresnel_cell(ox, h, lam, sgn)
    cy = _fresnel_cell(oy, h, lam, -sgn)
    k = (2.0 * lam / np.pi) * h * h * (cy[:, None] * cx[None, :])
    spec = sfft.fft2(k)
    # undo the box average that the cell integration applies to the output
    sx = np.sinc(np.fft.fftfreq(mx))
    sy = np.sinc(np.fft.fftfreq(my))
    spec = spec / (sy[:, None] * sx[None, :])
    spec.setflags(write=False)
    return mx, my, spec


def zone_cells(lam, h):
    """Width of the kernel's first Fresnel zone sqrt(pi/(2 lam)) in grid cells."""
    return np.inf if lam == 0 else np.sqrt(np.pi / (2.0 * lam)) / h


def _check_sign(sign):
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError("sign must be +1 or -1")


def stationary_phase_filter(V: ComplexField, lam, sign=1) -> ComplexField:
    """(2 lam/pi) int e^{+-2i Re((z - z0)^2) lam} V(z) dA(z) at every grid point z0."""
    sgn = _check_sign(sign)
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lambda must be positive")
    grid = V.grid
    if zone_cells(lam, grid.h) < MIN_ZONE_CELLS:
        raise PhaseUnderResolved(
            f"first Fresnel zone spans {zone_cells(lam, grid.h):.2f} cells (need >= {MIN_ZONE_CELLS:g}); "
            "refine the grid or lower lambda")
    v = V.values
    _check_support(v)
    mx, my, spec = _filter_spectrum(grid.nx, grid.ny, grid.h, lam, sgn)
    pad = np.zeros((my, mx), dtype=complex)
    pad[:grid.ny, :grid.nx] = v
    out = sfft.ifft2(sfft.fft2(pad) * spec)[:grid.ny, :grid.nx]
    return ComplexField(grid, out)


def filter_multiplier(zeta, lam, sign=1):
    """e^{-+i Re(zeta^2)/(8 lam)}, the symbol of the filter with sign +-."""
    sgn = _check_sign(sign)
    zeta = np.asarray(zeta, dtype=complex)
    return np.exp(-sgn * 1j * (zeta * zeta).real / (8.0 * lam))


def grid_transform(f: ComplexField):
    """F f on the DFT frequency lattice of the grid (ordered as np.fft.fftfreq).

    Returns (zeta, values); the phase of the grid origin is included so the
    values approximate the continuous transform.
    """
    g = f.grid
    xi = 2.0 * np.pi * np.fft.fftfreq(g.nx, d=g.h)
    eta = 2.0 * np.pi * np.fft.fftfreq(g.ny, d=g.h)
    shift = np.exp(-1j * (g.x0 * xi[None, :] + g.y0 * eta[:, None]))
    vals = sfft.fft2(f.values) * shift * g.h * g.h
    return xi[None, :] + 1j * eta[:, None], vals


@dataclass
class FilterReport(DecayReport):
    """Decay report with a regularity tag.

    smooth: pass when slope <= -1/2 (the s = 1 bound; smooth V decays faster)
    cone:   pass when the slope lies within slope_tol of -1/2
    trend:  epsilon reports; pass when a monotone-improvement window exists
    """

    regularity: str = "smooth"

    @property
    def passed(self):
        if self.regularity == "smooth":
            return bool(self.slope <= SMOOTH_BOUND)
        if self.regularity == "cone":
            return bool(abs(self.slope - SMOOTH_BOUND) <= self.slope_tol)
        win = self.meta.get("window")
        return bool(win is not None and win[1] - win[0] >= 1)

    @property
    def bound_satisfied(self):
        return bool(self.slope <= SMOOTH_BOUND + self.slope_tol)

    def summary(self):
        out = super().summary()
        out["regularity"] = self.regularity
        return out


REGULARITIES = ("smooth", "cone")


def filter_error_report(V: ComplexField, lambdas, s="smooth", sign=1, slope_tol=0.15) -> FilterReport:
    """||V - filter(V, lam)||_{L2} over a geometric lambda sweep."""
    if s not in REGULARITIES:
        raise ValueError(f"regularity tag must be one of {REGULARITIES}")
    lambdas = check_params(lambdas)
    v = V.values
    if not np.any(v != 0):
        raise NoDecaySignal("V = 0: the filter error vanishes identically")
    h = V.grid.h
    errs = []
    for lam in lambdas:
        d = v - stationary_phase_filter(V, lam, sign).values
        errs.append(float(np.sqrt(np.sum(np.abs(d) ** 2)) * h))
    if not all(e > 0 for e in errs):
        raise NoDecaySignal("filter errors vanish; nothing to fit")
    slope, icpt, r2 = fit_loglog(lambdas, errs)
    n = len(errs)
    return FilterReport("lambda", [float(x) for x in lambdas], errs, [True] * n, [True] * n,
                        slope, icpt, r2, 0.5, slope_tol, "L^2", {"sign": _check_sign(sign)}, s)


# -- Gaussian-regularized Fourier inversion ---------------------------------

def default_ramp(omega0):
    """rho(|w|): 0 on |w| <= |omega0|, 1 beyond 2|omega0|, smooth in between."""
    w0 = abs(complex(omega0))
    if w0 == 0:
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    return lambda r: 1.0 - radial_cutoff(r, w0, 2.0 * w0)


def forward_transform(f: ComplexField, omega_grid: Grid2D, weight=None) -> ComplexField:
    """F[weight f] sampled on a Cartesian omega grid (separable direct sums)."""
    g = f.grid
    v = f.values if weight is None else f.values * weight
    ex = np.exp(-1j * np.outer(omega_grid.x, g.x))       # (n_xi, nx)
    ey = np.exp(-1j * np.outer(omega_grid.y, g.y))       # (n_eta, ny)
    return ComplexField(omega_grid, ey @ v @ ex.T * g.h * g.h)


def _output_grid(omega_grid, pad, window):
    dw = omega_grid.h
    M = sfft.next_fast_len(int(np.ceil(pad * max(omega_grid.nx, omega_grid.ny))))
    dz = 2.0 * np.pi / (M * dw)
    K = int(np.floor(window / dz))
    if 2 * K + 1 > M:
        K = (M - 1) // 2
    return M, dz, K


def _l1(a, mask, h):
    return float(np.sum(np.abs(a[mask])) * h * h)


def gaussian_fourier_recover(data: ComplexField, epsilons, omega0=0.0, rho=None, window=1.0,
                             region=None, truth=None, pad=2.0):
    """(1/4 pi^2) int rho(w) e^{-eps |w|^2} e^{i z0.w} data(w) dA(w) for each eps.

    ``data`` lives on a Cartesian omega grid (its Grid2D coordinates are
    Re w, Im w).  Outputs are sampled on the z0 square |Re z0|, |Im z0| <=
    ``window``.  ``region`` = (center, radius) is the disk Omega0 on which
    successive outputs (and the optional ``truth`` callable) are compared
    in L1.  Returns (fields, report) with one field per epsilon.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or any(e <= 0 for e in eps) or any(np.diff(eps) >= 0):
        raise ValueError("epsilons must be positive, strictly decreasing, at least two")
    wg = data.grid
    dw = wg.h
    rmax = float(window) * np.sqrt(2.0)
    spp = 2.0 * np.pi / (rmax * dw)
    if spp < MIN_SAMPLES_PER_PERIOD:
        raise PhaseUnderResolved(
            f"omega spacing {dw:.3g} gives {spp:.2f} samples per period of e^(i z0.w) on the window "
            f"(need >= {MIN_SAMPLES_PER_PERIOD:g})")
    rho = default_ramp(omega0) if rho is None else rho
    W = wg.z
    base = rho(np.abs(W)) * as_values(data)
    M, dz, K = _output_grid(wg, pad, float(window))
    zg = Grid2D(2 * K + 1, 2 * K + 1, -K * dz, -K * dz, dz)
    m = np.arange(-K, K + 1)
    # exp(i (x_m xi_k + y_l eta_j)) with xi_k = xi_0 + k dw and x_m = m dz
    px = np.exp(1j * np.outer(m * dz, np.full(1, wg.x0)))[:, 0]
    py = np.exp(1j * np.outer(m * dz, np.full(1, wg.y0)))[:, 0]
    if region is None:
        region = (0j, float(window))
    c, rad = complex(region[0]), float(region[1])
    mask = np.abs(zg.z - c) < rad
    fields = []
    for e in eps:
        pad_arr = np.zeros((M, M), dtype=complex)
        pad_arr[:wg.ny, :wg.nx] = base * np.exp(-e * np.abs(W) ** 2)
        full = sfft.ifft2(pad_arr) * (M * M)
        sub = full[np.ix_(m % M, m % M)]
        vals = sub * py[:, None] * px[None, :] * dw * dw / (4.0 * np.pi ** 2)
        fields.append(ComplexField(zg, vals))
    dists = [float("nan")] + [_l1(fields[i].values - fields[i - 1].values, mask, dz)
                              for i in range(1, len(fields))]
    meta = {"omega_max": float(min(abs(wg.x[0]), wg.x[-1], abs(wg.y[0]), wg.y[-1])),
            "omega0": abs(complex(omega0)), "region": [c.real, c.imag, rad]}
    errors = None
    if truth is not None:
        tv = np.asarray(truth(zg.z), dtype=complex)
        tn = _l1(tv, mask, dz)
        errors = [_l1(f.values - tv, mask, dz) / tn if tn > 0 else _l1(f.values - tv, mask, dz)
                  for f in fields]
        meta["errors"] = errors
        meta["best_epsilon"] = eps[int(np.argmin(errors))]
    track = errors if errors is not None else dists[1:]
    off = 0 if errors is not None else 1
    meta["window"] = _improvement_window(track, off)
    good = [i for i in range(1, len(eps)) if np.isfinite(dists[i]) and dists[i] > 0]
    if len(good) >= 2:
        slope, icpt, r2 = fit_loglog([eps[i] for i in good], [dists[i] for i in good])
    else:
        slope = icpt = r2 = float("nan")
    n = len(eps)
    rep = FilterReport("epsilon", eps, dists, [True] * n, [i in good for i in range(n)],
                       slope, icpt, r2, None, 0.15, "L^1", meta, "trend")
    return fields, rep


def _improvement_window(vals, offset=0):
    """[first, last] index range of the longest strictly decreasing run."""
    best = None
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or not vals[i] < vals[i - 1]:
            if best is None or i - 1 - start > best[1] - best[0]:
                best = [start, i - 1]
            start = i
    if best is None or best[1] == best[0]:
        return None
    return [best[0] + offset, best[1] + offset]


# -- reconstruction from DN maps --------------------------------------------

class BornTraces:
    """Blind traces: CGOs of V = 0, i.e. the bare phases times the amplitude."""

    mode = "blind"

    def __init__(self, sheets: SheetSet, boundary, n_max, cgo_tol=1e-6):
        self.sheets = sheets
        self.boundary = boundary
        self.n_max = int(n_max)
        self.cgo_tol = float(cgo_tol)

    def amplitude(self, p0):
        return None if self.sheets.N == 0 else build_amplitude(self.sheets, p0)

    def _potentials(self):
        return 0.0, 0.0

    def traces(self, p0, lam, corrections=None):
        """(f, g, info): Dirichlet traces of u (phase i Psi lam) and v (phase i conj(Psi) lam)."""
        phi = self.sheets.phi
        V1, V2 = self._potentials()
        amp = self.amplitude(p0)
        u = build_cgo(V1, "Psi", lam, phi, p0=p0, amplitude=amp, corrections=corrections, tol=self.cgo_tol)
        v = build_cgo(V2, "PsiBar", lam, phi, p0=p0, amplitude=amp, corrections=corrections, tol=self.cgo_tol)
        f, _ = boundary_trace(u, self.boundary, n_max=self.n_max)
        g, _ = boundary_trace(v, self.boundary, n_max=self.n_max)
        info = {"contraction_ratio": max(u.contraction_ratio, v.contraction_ratio),
                "residual": max(u.residual, v.residual), "J": max(u.J, v.J)}
        return f, g, info


class CGOTraces(BornTraces):
    """Traces of CGO solutions built from the candidate potentials V1 (u) and V2 (v)."""

    mode = "informed"

    def __init__(self, sheets: SheetSet, boundary, n_max, V1, V2=None, cgo_tol=1e-6):
        super().__init__(sheets, boundary, n_max, cgo_tol)
        self._V1 = V1
        self._V2 = 0.0 if V2 is None else V2

    def _potentials(self):
        return self._V1, self._V2


@dataclass
class RecoveryResult:
    """V-hat on the p0 grid; zero outside the Omega0 disk of the sheet chart."""

    grid: Grid2D
    values: np.ndarray
    mask: np.ndarray
    lam_used: np.ndarray
    lambdas: list
    pairings: np.ndarray          # (n_lambda, ny, nx), nan where inadmissible
    ratios: np.ndarray
    status: np.ndarray            # per lambda: "ok", "no_contraction", "under_resolved", "truncation"
    unstable: list
    mode: str
    meta: dict = field(default_factory=dict)

    @property
    def field(self):
        return ComplexField(self.grid, self.values)

    def error_vs(self, truth_values):
        """Relative L2(Omega0) error of V-hat against ground truth on the p0 grid."""
        t = np.asarray(truth_values, dtype=complex)
        d = np.linalg.norm((self.values - t)[self.mask])
        n = np.linalg.norm(t[self.mask])
        return float(d / n) if n > 0 else float(d)

    def estimate_upto(self, k):
        """V-hat using only lambdas[:k+1]: the largest admissible one at each p0."""
        out = np.zeros(self.grid.shape, dtype=complex)
        for i in range(k + 1):
            ok = np.isfinite(self.pairings[i].real) & self.mask
            out[ok] = self.pairings[i][ok]
        return out

    def error_curve(self, truth_values):
        """Relative L2(Omega0) error of estimate_upto(k) for each lambda budget k."""
        t = np.asarray(truth_values, dtype=complex)
        n = np.linalg.norm(t[self.mask])
        out = []
        for k in range(len(self.lambdas)):
            d = np.linalg.norm((self.estimate_upto(k) - t)[self.mask])
            out.append(float(d / n) if n > 0 else float(d))
        return out

    def diagnostics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p0_re", "p0_im", "lambda", "pairing_re", "pairing_im", "contraction_ratio", "status"])
        z = self.grid.z
        for j, i in zip(*np.nonzero(self.mask)):
            for k, lam in enumerate(self.lambdas):
                p = self.pairings[k, j, i]
                w.writerow([repr(float(z[j, i].real)), repr(float(z[j, i].imag)), repr(float(lam)),
                            repr(float(p.real)), repr(float(p.imag)), repr(float(self.ratios[k, j, i])),
                            self.status[k, j, i]])
        return buf.getvalue()

    def summary(self, truth_values=None):
        out = {"mode": self.mode, "lambdas": list(self.lambdas), "grid": self.grid.to_dict(),
               "n_points": int(self.mask.sum()), "n_unstable": len(self.unstable),
               "lambda_used_counts": {repr(float(l)): int(np.sum(self.lam_used[self.mask] == l))
                                      for l in self.lambdas},
               "meta": self.meta}
        if truth_values is not None:
            out["error"] = self.error_vs(truth_values)
            out["error_curve"] = self.error_curve(truth_values)
            out["plateau"] = plateau_certificate(out["error_curve"])
        return out

    def summary_json(self, truth_values=None):
        return json.dumps(self.summary(truth_values), indent=2, sort_keys=True) + "\n"


def plateau_certificate(curve, rel_tol=0.25):
    """Decrease-then-plateau check on an error-vs-lambda curve.

    The curve must drop by at least a factor 2 from its first to its best
    admissible value, and the last step must change the error by at most
    ``rel_tol`` relative (or improve it).
    """
    c = [x for x in curve if np.isfinite(x)]
    if len(c) < 3:
        return {"decreasing": False, "plateau": False, "pass": False}
    best = min(c)
    decreasing = bool(best <= 0.5 * c[0])
    last = abs(c[-1] - c[-2]) / c[-2] if c[-2] > 0 else 0.0
    plateau = bool(last <= rel_tol or c[-1] <= c[-2])
    return {"decreasing": decreasing, "plateau": plateau, "last_step": float(last),
            "pass": bool(decreasing and plateau)}


def window_grid(sheets: SheetSet, n=40):
    """n x n grid covering the Omega0 disk |Phi(p0) - Phi(p~_0)| < r of the base chart."""
    if sheets.phi.variant != "identity":
        raise ValueError("window_grid lays out base points in the identity chart only")
    return Grid2D.square(n, sheets.r, center=sheets.sheets[0].center)


def _pairing(dn_diff, f, g, lam):
    return dn_diff.pair(f, g) * 2.0 * lam / np.pi


def reconstruct_from_dn(dn1, dn2, sheets: SheetSet, lambdas, p0_grid: Grid2D, corrections="none",
                        traces=None, trunc_tol=0.05, trunc_drop=4, scale_floor=1e-2,
                        stop_on_truncation=True, workers=1) -> RecoveryResult:
    """V-hat(p0) = (2 lam/pi) <(Lambda_1 - Lambda_2) u|, v|> at the largest admissible lambda.

    Only the DN maps and boundary traces enter.  ``traces`` supplies the
    traces (CGOTraces for the informed mode, BornTraces for the blind one;
    default blind).  A lambda is admissible at p0 when both CGOs contract
    and pass the phase guard, and when the pairing is converged in the
    mode cut-off: dropping the top ``trunc_drop`` modes moves it by at
    most ``trunc_tol`` relative to max(|pairing|, scale_floor).
    The cut-off error only grows with lambda, so by default the sweep at
    a p0 stops at the first truncation failure (later entries "skipped").
    ``corrections`` is "none" or a callable (p0, lam) -> CorrectionSet.
    Base points are independent; ``workers`` > 1 spreads them over a
    thread pool and results are assembled in grid order.
    """
    if dn1.n_max != dn2.n_max:
        raise BasisMismatch("DN maps have different basis sizes")
    lambdas = sorted(float(l) for l in lambdas)
    if not lambdas or lambdas[0] <= 0:
        raise ValueError("lambdas must be positive")
    if traces is None:
        from .forward_dn import PolarGrid
        boundary = PolarGrid(nr=32, ntheta=max(64, 4 * (2 * dn1.n_max + 1)))
        traces = BornTraces(sheets, boundary, dn1.n_max)
    if traces.n_max != dn1.n_max:
        raise BasisMismatch("trace basis does not match the DN maps")
    if corrections not in (None, "none") and not callable(corrections):
        raise ValueError("corrections must be 'none' or a callable (p0, lam) -> CorrectionSet")
    dd = dn1 - dn2
    low = max(dd.n_max - int(trunc_drop), 0)
    dd_low = type(dd)(dd.matrix[dd.n_max - low:dd.n_max + low + 1, dd.n_max - low:dd.n_max + low + 1],
                      low, dd.tag, dd.grid)
    c0 = complex(sheets.sheets[0].center)
    z = p0_grid.z
    mask = np.abs(sheets.phi.value(z) - sheets.w0) < sheets.r
    nl = len(lambdas)
    pair = np.full((nl,) + p0_grid.shape, np.nan + 0j)
    ratios = np.full((nl,) + p0_grid.shape, np.nan)
    status = np.full((nl,) + p0_grid.shape, "", dtype=object)
    vhat = np.zeros(p0_grid.shape, dtype=complex)
    lam_used = np.zeros(p0_grid.shape)
    unstable = []

    def sweep(p0):
        rows = []
        for lam in lambdas:
            corr = corrections(p0, lam) if callable(corrections) else None
            try:
                f, g, info = traces.traces(p0, lam, corr)
            except NoContraction:
                rows.append(("no_contraction", np.nan, np.nan))
                continue
            except (PhaseUnderResolved, ResolutionMismatch):
                rows.append(("under_resolved", np.nan, np.nan))
                continue
            val = _pairing(dd, f, g, lam)
            lowval = _pairing(dd_low, f.truncate(low), g.truncate(low), lam)
            if abs(val - lowval) > trunc_tol * max(abs(val), scale_floor):
                rows.append(("truncation", val, info["contraction_ratio"]))
                if stop_on_truncation:
                    break
                continue
            rows.append(("ok", val, info["contraction_ratio"]))
        return rows + [("skipped", np.nan, np.nan)] * (nl - len(rows))

    idx = list(zip(*np.nonzero(mask)))
    pts = [complex(z[j, i]) for j, i in idx]
    if workers > 1 and len(pts) > 1:
        from concurrent.futures import ThreadPoolExecutor
        first = [sweep(pts[0])]  # warm the shared caches before fanning out
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            results = first + list(ex.map(sweep, pts[1:]))
    else:
        results = [sweep(p) for p in pts]
    for (j, i), p0, rows in zip(idx, pts, results):
        chosen = None
        for k, (st, val, ratio) in enumerate(rows):
            status[k, j, i] = st
            pair[k, j, i] = val
            ratios[k, j, i] = ratio
            if st == "ok":
                chosen = k
        if chosen is None:
            unstable.append([p0.real, p0.imag])
            continue
        vhat[j, i] = pair[chosen, j, i]
        lam_used[j, i] = lambdas[chosen]
    for k in range(nl):
        bad = status[k] != "ok"
        pair[k][bad] = np.nan
    meta = {"n_max": dn1.n_max, "trunc_tol": trunc_tol, "trunc_drop": int(trunc_drop),
            "scale_floor": scale_floor, "chart_center": [c0.real, c0.imag], "r": sheets.r}
    res = RecoveryResult(p0_grid, vhat, mask, lam_used, lambdas, pair, ratios, status, unstable,
                         traces.mode, meta)
    return res


def check_stable(result: RecoveryResult):
    """Raise ReconstructionUnstable when no p0 admitted any lambda."""
    if result.mask.any() and len(result.unstable) == int(result.mask.sum()):
        raise ReconstructionUnstable("no base point admitted any lambda")
    return result


# -- test-side diagnostics (these read ground truth) --------------------------

def principal_values(V: ComplexField, points, lam, dom=None, chunk=64):
    """(2 lam/pi) int e^{2i lam Re((z - p0)^2)} V e^{2 sigma} dA at each p0 (identity chart, a = 1)."""
    g = V.grid
    w = V.values * (np.exp(2.0 * dom.sigma.values.real) if dom is not None else 1.0)
    nz = np.nonzero(w)
    zs = g.z[nz]
    ws = w[nz] * g.h * g.h
    pts = np.asarray(points, dtype=complex).ravel()
    out = np.empty(pts.size, dtype=complex)
    for a in range(0, pts.size, chunk):
        d = zs[None, :] - pts[a:a + chunk, None]
        out[a:a + chunk] = np.exp(2j * lam * (d * d).real) @ ws
    return out * (2.0 * lam / np.pi)


def remainder_proxy(result: RecoveryResult, V: ComplexField, dom=None):
    """RMS over Omega0 of |pairing - principal integral| per lambda, with a log-log slope.

    The principal integral is the filtered V at p0; the difference is the
    part of the boundary pairing carried by the CGO remainders.
    """
    rows = []
    for k, lam in enumerate(result.lambdas):
        ok = result.mask & np.isfinite(result.pairings[k].real)
        if not ok.any():
            rows.append(float("nan"))
            continue
        pv = principal_values(V, result.grid.z[ok], lam, dom)
        rows.append(float(np.sqrt(np.mean(np.abs(result.pairings[k][ok] - pv) ** 2))))
    good = [i for i, r in enumerate(rows) if np.isfinite(r) and r > 0]
    slope = float("nan")
    if len(good) >= 2:
        slope = fit_loglog([result.lambdas[i] for i in good], [rows[i] for i in good])[0]
    return {"lambdas": list(result.lambdas), "rms": rows, "slope": slope}
