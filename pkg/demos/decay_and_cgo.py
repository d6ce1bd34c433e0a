"""Measured Carleman decay and one CGO solution, printed as plain tables.

    python demos/decay_and_cgo.py
"""
import numpy as np

from cgokit.amplitude import PhiConfig
from cgokit.carleman_lab import measure_decay_phi, measure_decay_psi
from cgokit.cgo_builder import build_cgo
from cgokit.field_core import ComplexField, Grid2D, bump, disk_domain, make_potential


def decay():
    g = Grid2D.square(512, 0.3125)
    phi = PhiConfig("identity", disk_domain(g, 0.2, 0.25))
    r = np.abs(g.z)
    s = ComplexField(g, bump(r / 0.175))
    lams = [16.0 * 2 ** k for k in range(6)]
    rep = measure_decay_psi(s, 1.5, 6.0, lams, 0j, phi)
    print("lambda sweep, (p, q) = (3/2, 6), exponent", rep.theory)
    for p, nrm, used in zip(rep.params, rep.norms, rep.included):
        print(f"  {p:7.1f}  {nrm:.4e}  {'fit' if used else ''}")
    print(f"  slope {rep.slope:.3f}  R^2 {rep.r2:.4f}  pass {rep.passed}")
    gs = ComplexField(g, np.exp(-(r / 0.075) ** 2) * bump(r / 0.175))
    rep = measure_decay_phi(gs, 1.5, 3.0, lams, 1.0, phi)
    print(f"omega sweep: slope {rep.slope:.3f} (exponent 1), pass {rep.passed}")


def cgo():
    g = Grid2D.square(512, 0.625)
    phi = PhiConfig("identity", disk_domain(g, 0.4, 0.5))
    V = make_potential("gaussian_bump", g, amplitude=10.0, width=0.1, center=[0.05, 0.03], support=0.38)
    for w in (32.0, 64.0, 128.0):
        sol = build_cgo(V, "PhiOmega", w * np.exp(0.3j), phi)
        print(f"|omega| = {w:5.0f}: J = {sol.J}, ratio {sol.contraction_ratio:.2e}, residual {sol.residual:.2e}")


if __name__ == "__main__":
    decay()
    cgo()
