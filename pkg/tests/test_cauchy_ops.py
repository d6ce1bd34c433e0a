import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgokit.cauchy_ops import (cauchy_d_inverse, cauchy_dbar_inverse, cauchy_dbar_values, d_star,
                               dbar_star, engine_for, green_dirichlet, green_solver, t_star, tbar_star)
from cgokit.errors import SupportTouchesBoundary
from cgokit.field_core import ComplexField, DomainSpec, Grid2D, bump, disk_domain, fd_dbar, rel_l2

finite = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def bump_field(g, c=0.1, rad=0.5):
    return ComplexField(g, bump(np.abs(g.z - c) / rad))


def test_engine_is_linear_not_circular():
    g = Grid2D.square(40, 1.0)
    e = engine_for(g)
    assert e.mx >= 2 * g.nx - 1 and e.my >= 2 * g.ny - 1
    assert e.kernel_origin == 0


def test_zero_in_zero_out():
    g = Grid2D.square(32, 1.0)
    assert not np.any(cauchy_dbar_inverse(ComplexField.zeros(g)).values)


def test_support_touching_edge_raises():
    g = Grid2D.square(32, 1.0)
    with pytest.raises(SupportTouchesBoundary):
        cauchy_dbar_inverse(ComplexField(g, np.ones(g.shape)))


def test_matches_direct_quadrature_64():
    # O(n^4) oracle of the punctured sum -(1/pi) sum f(zeta)/(zeta - z) h^2
    g = Grid2D.square(64, 1.0)
    f = bump_field(g, 0.05 + 0.1j, 0.6).values * np.exp(2j * g.z.real)
    zs = g.z.ravel()
    d = zs[None, :] - zs[:, None]
    K = np.zeros_like(d)
    nz = d != 0
    K[nz] = -1.0 / (np.pi * d[nz])
    oracle = (K @ f.ravel() * g.h ** 2).reshape(g.shape)
    fast = cauchy_dbar_values(f, g, quadrature="punctured")
    assert np.abs(fast - oracle).max() <= 1e-12 * np.abs(oracle).max()


def test_disk_indicator_closed_form():
    a = 0.5
    errs = []
    for n in (128, 256):
        g = Grid2D.square(n, 1.0)
        z = g.z
        f = ComplexField(g, (np.abs(z) <= a).astype(float))
        u = cauchy_dbar_inverse(f).values
        inside = np.abs(z) < a - 2 * g.h
        outside = (np.abs(z) > a + 2 * g.h) & (np.abs(z) < 0.9)
        exact = np.where(inside, np.conj(z), a * a / np.where(z == 0, 1, z))
        m = inside | outside
        errs.append(np.abs(u - exact)[m].max() / a)
        assert errs[-1] <= 2.0 * g.h
    assert errs[1] < errs[0]


def test_dbar_of_result_minus_bump_is_small():
    g = Grid2D.square(256, 1.0)
    b = ComplexField(g, bump(np.abs(g.z) / 0.6) * np.exp(-np.abs(g.z) ** 2))
    r = cauchy_dbar_inverse(fd_dbar(b)) - b
    res = fd_dbar(r).values
    assert np.sqrt(np.sum(np.abs(res) ** 2) * g.h ** 2) <= 2.0 * g.h


def test_right_inverse_order():
    errs, hs = [], []
    for n in (128, 256, 512):
        g = Grid2D.square(n, 1.0)
        f = bump_field(g)
        errs.append(rel_l2(fd_dbar(cauchy_dbar_inverse(f)).values, f.values))
        hs.append(g.h)
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert order >= 0.9


def test_conjugate_twin():
    g = Grid2D.square(64, 1.0)
    f = ComplexField(g, bump(np.abs(g.z) / 0.5) * (1 + 2j * g.z))
    lhs = cauchy_d_inverse(f).values
    rhs = np.conj(cauchy_dbar_inverse(f.conj()).values)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


@given(cplx, cplx)
def test_cauchy_linearity(a, b):
    g = Grid2D.square(32, 1.0)
    f = bump_field(g, 0, 0.6)
    h = ComplexField(g, bump(np.abs(g.z - 0.1j) / 0.4) * g.z)
    lhs = cauchy_dbar_inverse(f * a + h * b).values
    rhs = a * cauchy_dbar_inverse(f).values + b * cauchy_dbar_inverse(h).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * (abs(a) + abs(b) + 1)


def test_deterministic_bytes():
    g = Grid2D.square(64, 1.0)
    f = bump_field(g)
    assert cauchy_dbar_inverse(f).values.tobytes() == cauchy_dbar_inverse(f).values.tobytes()


def test_explicit_correction_hook():
    g = Grid2D.square(16, 1.0)
    f = bump_field(g, 0, 0.5)
    shift = cauchy_dbar_inverse(f, correction=lambda v: np.full(v.shape, 2.0)).values
    assert np.allclose(shift - cauchy_dbar_inverse(f).values, 2.0)


def _unit_dom(n, L=1.25, r0=0.5, r1=1.0):
    g = Grid2D.square(n, L)
    return disk_domain(g, r0, r1)


def test_green_constant_source_radial_oracle():
    errs = []
    for n in (128, 256):
        g = Grid2D.square(n, 1.25)
        m = np.abs(g.z) < 1.0
        dom = DomainSpec(g, m, m)
        u = green_dirichlet(ComplexField(g, m.astype(float)), dom).values
        exact = (1 - np.abs(g.z) ** 2) / 4
        errs.append(np.abs(u - exact)[m].max())
    # cell-centre masks put the boundary O(h) off the circle
    assert errs[1] <= 0.5 * errs[0] * 1.2
    assert errs[1] <= 2 * Grid2D.square(256, 1.25).h


def test_green_manufactured_and_residual():
    dom = _unit_dom(128)
    g = dom.grid
    solver = green_solver(dom)
    prof = (1 - np.abs(g.z) ** 2) ** 2 * bump(np.abs(g.z) / 0.9)
    prof = np.where(dom.mask_M0prime, prof, 0)
    f = solver.apply_values(prof)
    f = np.where(dom.mask_M0prime, f, 0)
    u = green_dirichlet(ComplexField(g, f), dom).values
    assert np.abs(u - prof).max() <= 1e-8 * np.abs(prof).max()
    assert solver.last_residual <= 1e-10
    assert not np.any(green_dirichlet(ComplexField.zeros(g), dom).values)


def test_green_identity_256():
    dom = _unit_dom(256)
    g = dom.grid
    m = dom.mask_M0prime
    f = ComplexField(g, np.where(m, np.exp(-np.abs(g.z - 0.1) ** 2 / 0.1), 0))
    assert rel_l2(dbar_star(tbar_star(f, dom), dom).values, f.values, m) <= 1e-4


def test_tbar_star_conjugation_twin():
    dom = _unit_dom(64)
    g = dom.grid
    f = ComplexField(g, np.where(dom.mask_M0prime, np.exp(-np.abs(g.z) ** 2 / 0.1), 0))
    assert np.abs(np.conj(tbar_star(f, dom).values) - t_star(f, dom).values).max() <= 1e-12


def test_dbar_star_half_laplacian():
    errs = []
    for n in (64, 128):
        g = Grid2D.square(n, 3.0)
        m = np.ones(g.shape, bool)
        dom = DomainSpec(g, m, m)
        z = g.z
        f = ComplexField(g, np.exp(-np.abs(z) ** 2))
        # -(1/2)(f_xx + f_yy) = -(1/2)(4|z|^2 - 4) e^{-|z|^2}
        exact = -(0.5) * (4 * np.abs(z) ** 2 - 4) * np.exp(-np.abs(z) ** 2)
        got = dbar_star(fd_dbar(f), dom).values
        errs.append(np.abs(got - exact)[3:-3, 3:-3].max())
    assert errs[1] <= errs[0] / 3.0


def test_dbar_star_constant_and_twin():
    g = Grid2D.square(32, 1.0)
    m = np.ones(g.shape, bool)
    dom = DomainSpec(g, m, m)
    c = ComplexField(g, np.full(g.shape, 3 - 1j))
    assert np.abs(dbar_star(c, dom).values[1:-1, 1:-1]).max() <= 1e-12
    s = ComplexField(g, g.z ** 2 * np.exp(-np.abs(g.z) ** 2))
    assert np.allclose(d_star(s, dom).values, np.conj(dbar_star(s.conj(), dom).values), atol=1e-12)
