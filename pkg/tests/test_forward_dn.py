import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgokit.amplitude import PhiConfig
from cgokit.carleman_lab import fit_loglog
from cgokit.cgo_builder import build_cgo
from cgokit.errors import BasisMismatch, DirichletEigenvalueSuspected, InvalidGrid
from cgokit.field_core import Grid2D, disk_domain, make_potential
from cgokit.forward_dn import (BoundaryTrace, DNMap, PolarGrid, alessandrini_pair, dirichlet_eigenvalues,
                               dn_assemble, solve_dirichlet)

J01_SQ = 2.404825557695773 ** 2


@pytest.fixture(scope="module")
def pg():
    return PolarGrid(128, 256)


@pytest.fixture(scope="module")
def L0(pg):
    return dn_assemble(0.0, 8, pg)


@pytest.fixture(scope="module")
def gauss():
    g = Grid2D.square(256, 1.2)
    return make_potential("gaussian_bump", g, amplitude=3.0, width=0.3, center=[0.1, 0.2])


def test_grid_invariants():
    for bad in [(16, 128), (64, 63), (64, 32)]:
        with pytest.raises(InvalidGrid):
            PolarGrid(*bad)


@given(st.lists(st.builds(complex, st.floats(-5, 5), st.floats(-5, 5)), min_size=9, max_size=9))
def test_trace_roundtrip(c):
    t = BoundaryTrace(c)
    back = BoundaryTrace.from_nodal(t.nodal(64), 4)
    assert np.abs(back.coeffs - t.coeffs).max() <= 1e-12 * (1 + np.abs(t.coeffs).max())


@pytest.mark.parametrize("n", [0, 1, -3, 8])
def test_harmonic_modes(n):
    errs = []
    for nr in (64, 128):
        pgr = PolarGrid(nr, 2 * nr)
        u = solve_dirichlet(0.0, BoundaryTrace.mode(n, 8), pgr)
        exact = np.abs(pgr.z) ** abs(n) * np.exp(1j * n * np.angle(pgr.z))
        errs.append(np.abs(u.values - exact).max())
        assert u.residual <= 1e-10
    # second order under joint radial/angular refinement; n = 0 is exact up to round-off
    if n:
        assert errs[1] <= 0.3 * errs[0]
    assert errs[1] <= 5.0 * (1 + n * n) / 128 ** 2


def test_zero_data(pg):
    u = solve_dirichlet(make_potential("gaussian_bump", Grid2D.square(128, 1.2)), np.zeros(pg.ntheta), pg)
    assert not np.any(u.values)


def test_dirichlet_eigenvalue_suspected():
    pgr = PolarGrid(64, 128)
    mu = dirichlet_eigenvalues(pgr, 1)[0]
    assert mu == pytest.approx(J01_SQ, rel=2e-3)
    with pytest.raises(DirichletEigenvalueSuspected):
        solve_dirichlet(-mu, BoundaryTrace.mode(0, 4), pgr)


def test_dn_laplacian_diag(L0):
    M = L0.matrix
    for n in L0.modes:
        assert abs(L0.entry(n, n) - abs(n)) <= 0.05 * max(abs(n), 1)
    off = M - np.diag(np.diag(M))
    assert np.abs(off).max() <= 0.02


def test_radial_potential_decouples(pg):
    V = make_potential("gaussian_bump", Grid2D.square(256, 1.2), amplitude=4.0, width=0.4)
    L = dn_assemble(V, 8, pg)
    off = L.matrix - np.diag(np.diag(L.matrix))
    assert np.abs(off).max() <= 0.02
    # radial ODE oracle for the n = 0 column: shooting with scipy on u'' + u'/r = V u
    from scipy.integrate import solve_ivp
    Vr = V.function()

    def rhs(r, y):
        return [y[1], Vr(np.array(r + 0j)).real * y[0] - y[1] / r]
    r0 = 1e-6
    sol = solve_ivp(rhs, (r0, 1.0), [1.0, 0.5 * r0 * Vr(np.array(0j)).real], rtol=1e-10, atol=1e-12)
    exact = sol.y[1, -1] / sol.y[0, -1]
    assert L.entry(0, 0).real == pytest.approx(exact, abs=5e-3)


def test_reciprocity(pg, gauss):
    L = dn_assemble(gauss, 8, pg)
    assert L.reciprocity_defect() <= 1e-3
    rng = np.random.default_rng(3)
    f = BoundaryTrace(rng.normal(size=17) + 1j * rng.normal(size=17))
    g = BoundaryTrace(rng.normal(size=17) + 1j * rng.normal(size=17))
    D = L - dn_assemble(0.0, 8, pg)
    assert abs(D.pair(f, g) - D.pair(g, f)) <= 1e-3 * abs(D.pair(f, g))


def test_same_potential_boundary_zero(pg, gauss):
    L = dn_assemble(gauss, 8, pg)
    f = BoundaryTrace.mode(1, 8)
    assert alessandrini_pair(L, L, f, f, mode="boundary") == 0


def test_interior_vs_boundary(gauss):
    pgr = PolarGrid(256, 256)
    L1 = dn_assemble(gauss, 8, pgr)
    L0 = dn_assemble(0.0, 8, pgr)
    f = BoundaryTrace.mode(0, 8)
    b = alessandrini_pair(L1, L0, f, f, mode="boundary")
    u = solve_dirichlet(gauss, f, pgr)
    v = solve_dirichlet(0.0, f, pgr)
    i = alessandrini_pair(gauss, None, u, v, mode="interior")
    assert abs(b - i) <= 0.01 * abs(i)


def test_cgo_remainder_decay():
    g = Grid2D.square(512, 0.625)
    phi = PhiConfig("identity", disk_domain(g, 0.4, 0.5))
    V = make_potential("gaussian_bump", g, amplitude=10.0, width=0.1, center=[0.05, 0.03], support=0.38)
    Z = make_potential("zero", g)
    ws = [32.0, 64.0, 128.0, 256.0]
    gaps = []
    for w in ws:
        om = w * np.exp(0.3j)
        u = build_cgo(V, "PhiOmega", om, phi)
        v = build_cgo(Z, "PhiBarOmega", om, phi)
        full = alessandrini_pair(V, None, u, v)
        lead = np.sum(np.exp(u.phase_exponent() + v.phase_exponent()) * V.values) * g.h ** 2
        gaps.append(abs(full - lead))
    slope, _, _ = fit_loglog(ws, gaps)
    assert slope <= -0.8


def test_basis_mismatch(L0):
    with pytest.raises(BasisMismatch):
        L0.apply(BoundaryTrace.mode(0, 4))
    with pytest.raises(BasisMismatch):
        alessandrini_pair(L0, L0, BoundaryTrace.mode(0, 4), BoundaryTrace.mode(0, 8), mode="boundary")
    with pytest.raises(BasisMismatch):
        BoundaryTrace(np.ones(4))


def test_dn_bytes_roundtrip(L0, tmp_path):
    p = tmp_path / "l.cgodn"
    L0.save(p)
    back = DNMap.load(p)
    assert np.array_equal(back.matrix, L0.matrix)
    assert back.tag == L0.tag and back.n_max == L0.n_max
    assert back.to_bytes() == L0.to_bytes()


def test_dn_deterministic(pg):
    a = dn_assemble(0.5, 4, pg)
    b = dn_assemble(0.5, 4, pg)
    assert a.to_bytes() == b.to_bytes()
