import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgokit.cgof import decode_cgof, encode_cgof, read_cgof, read_sidecar, write_cgof
from cgokit.errors import (GridMismatch, InvalidDomain, InvalidExponent, InvalidGrid,
                           InvalidPotential, NonFiniteField)
from cgokit.field_core import (ComplexField, DomainSpec, Grid2D, disk_domain, fd_d, fd_dbar,
                               lp_norm, make_potential, w1p_norm)

finite = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, finite, finite)
# magnitude/angle form keeps |c|^p clear of underflow
scalar = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(1e-6, 1e3), st.floats(0, 2 * np.pi))


def interior(a, k=1):
    return a[k:-k, k:-k]


def test_grid_layout():
    g = Grid2D(10, 12, -1.0, 2.0, 0.1)
    assert g.shape == (12, 10)
    # sample (i, j) sits at (x0 + i h, y0 + j h); row-major index j nx + i
    i, j = 3, 7
    assert g.z.ravel()[j * g.nx + i] == pytest.approx(complex(-1.0 + 0.3, 2.0 + 0.7))


@pytest.mark.parametrize("args", [(7, 10, 0, 0, 0.1), (10, 10, 0, 0, 0.0), (10, 10, 0, 0, -1.0)])
def test_grid_rejects_bad_shapes(args):
    with pytest.raises(InvalidGrid):
        Grid2D(*args)


def test_field_guards():
    g = Grid2D.square(16, 1.0)
    with pytest.raises(NonFiniteField):
        ComplexField(g, np.full(g.shape, np.nan))
    with pytest.raises(GridMismatch):
        ComplexField.zeros(g) + ComplexField.zeros(Grid2D.square(16, 2.0))


def test_dbar_exact_on_low_degree_polynomials():
    g = Grid2D.square(32, 1.0)
    z = g.z
    assert np.allclose(interior(fd_dbar(ComplexField(g, np.conj(z))).values), 1.0, atol=1e-12)
    assert np.allclose(interior(fd_dbar(ComplexField(g, z ** 2)).values), 0.0, atol=1e-12)
    assert np.allclose(interior(fd_d(ComplexField(g, z ** 2)).values), interior(2 * z), atol=1e-12)


def test_dbar_gaussian_oracle_second_order():
    errs = []
    for n in (64, 128, 256):
        g = Grid2D.square(n, 2.0)
        z = g.z
        f = ComplexField(g, np.exp(-np.abs(z) ** 2))
        exact = -z * np.exp(-np.abs(z) ** 2)
        errs.append(np.abs(interior(fd_dbar(f).values - exact)).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] < 1e-3
    assert np.all(orders >= 1.8)


@given(cplx, cplx)
def test_dbar_linearity(a, b):
    g = Grid2D.square(24, 1.0)
    z = g.z
    f = ComplexField(g, np.exp(-np.abs(z) ** 2) * z)
    h = ComplexField(g, np.sin(z.real) + 1j * z.imag ** 2)
    lhs = fd_dbar(f * a + h * b).values
    rhs = a * fd_dbar(f).values + b * fd_dbar(h).values
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1e-300) + 1e-13


def test_conjugation_symmetry():
    g = Grid2D.square(24, 1.0)
    f = ComplexField(g, np.exp(1j * g.z.real) * (1 + g.z ** 2))
    assert np.array_equal(fd_dbar(f.conj()).values, np.conj(fd_d(f).values))


def _unit_disk(n, sigma=None):
    g = Grid2D.square(n, 1.25)
    m = np.abs(g.z) < 1.0
    return DomainSpec(g, m, m, sigma=sigma)


def test_lp_norm_disk_area():
    errs = []
    for n in (128, 256):
        dom = _unit_disk(n)
        one = ComplexField(dom.grid, np.ones(dom.grid.shape))
        errs.append(abs(lp_norm(one, 2, dom) - np.sqrt(np.pi)))
        assert errs[-1] <= 2.0 * dom.grid.h
    dom = _unit_disk(256, sigma=np.full((256, 256), np.log(2.0) / 2))
    one = ComplexField(dom.grid, np.ones(dom.grid.shape))
    assert abs(lp_norm(one, 1, dom) - 2 * np.pi) <= 10 * dom.grid.h
    assert lp_norm(ComplexField.zeros(dom.grid), 3, dom) == 0.0
    assert lp_norm(ComplexField.zeros(dom.grid), np.inf, dom) == 0.0


def test_lp_norm_rejects_small_exponent():
    dom = _unit_disk(32)
    with pytest.raises(InvalidExponent):
        lp_norm(ComplexField.zeros(dom.grid), 0.5, dom)


@given(scalar, st.sampled_from([1.0, 1.5, 2.0, 6.0, np.inf]))
def test_lp_norm_homogeneity(c, p):
    dom = _unit_disk(32)
    f = ComplexField(dom.grid, np.exp(-np.abs(dom.grid.z) ** 2) + 0.2j)
    assert lp_norm(f * c, p, dom) == pytest.approx(abs(c) * lp_norm(f, p, dom), rel=1e-12)


def test_w1p_constant_and_zero():
    g = Grid2D.square(32, 1.0)
    dom = DomainSpec(g, np.ones(g.shape, bool), np.ones(g.shape, bool))
    c = 2.0 - 1.0j
    f = ComplexField(g, np.full(g.shape, c))
    assert w1p_norm(f, 2, dom, "all") == pytest.approx(abs(c) * np.sqrt(4.0), rel=1e-12)
    assert w1p_norm(ComplexField.zeros(g), 2, dom, "all") == 0.0


def test_w1p_gaussian_refinement_oracle():
    # independent oracle: analytic derivatives on a 4x finer grid
    w = 0.3
    p = 1.5

    def parts(n):
        g = Grid2D.square(n, 1.25)
        z = g.z
        f = np.exp(-np.abs(z) ** 2 / w ** 2)
        m = np.abs(z) < 1.0
        norm = lambda v: (np.sum(np.abs(v[m]) ** p) * g.h ** 2) ** (1 / p)
        return g, m, f, norm(f) + norm(-np.conj(z) / w ** 2 * f) + norm(-z / w ** 2 * f)

    _, _, _, oracle = parts(1024)
    g, m, f, _ = parts(256)
    dom = DomainSpec(g, m, m)
    assert w1p_norm(ComplexField(g, f), p, dom) == pytest.approx(oracle, rel=0.01)


def test_lp_singular_cap_and_support():
    g = Grid2D.square(64, 1.0)
    dom = disk_domain(g, 0.5, 0.8)
    V = make_potential("lp_singular", g, dom.mask_M0, alpha=1.2, width=0.4)
    assert np.abs(V.values).max() <= g.h ** -1.2 * (1 + 1e-12)
    assert not np.any(V.values[~dom.mask_M0])
    with pytest.raises(InvalidPotential):
        make_potential("lp_singular", g, alpha=1.6)
    with pytest.raises(InvalidPotential):
        make_potential("banana", g)


@pytest.mark.parametrize("kind,params", [
    ("gaussian_bump", dict(amplitude=2.0, width=0.2, center=[0.1, 0.0], support=0.5)),
    ("smooth_bump", dict(amplitude=1.0, width=0.6, center=[0.05, 0.03])),
    ("radial_step", dict(amplitude=-1.0, width=0.3)),
])
def test_potential_function_matches_realization(kind, params):
    g = Grid2D.square(64, 1.0)
    V = make_potential(kind, g, **params)
    assert np.array_equal(V.function()(g.z), V.values)


def test_smooth_bump_sup_is_amplitude():
    g = Grid2D.square(129, 1.0)
    V = make_potential("smooth_bump", g, amplitude=1.0, width=0.8)
    assert np.abs(V.values).max() == pytest.approx(1.0, abs=1e-12)


def test_disk_domain_cutoff_invariants():
    g = Grid2D.square(128, 1.25)
    dom = disk_domain(g, 0.5, 1.0)
    rho = dom.rho_tilde.values.real
    assert np.all(rho[dom.mask_M0] == 1) and np.all(rho[~dom.mask_M0prime] == 0)
    assert rho.min() >= 0 and rho.max() <= 1
    assert not np.any(dom.mask_M0 & ~dom.mask_M0prime)
    with pytest.raises(InvalidDomain):
        disk_domain(g, 1.0, 0.5)


def test_cgof_roundtrip(tmp_path):
    g = Grid2D(9, 11, -0.5, 0.25, 0.125)
    f = ComplexField(g, np.arange(g.size).reshape(g.shape) * (1 - 0.5j))
    data = encode_cgof(f)
    assert data[:4] == b"CGOF"
    assert int.from_bytes(data[4:8], "little") == 1
    assert len(data) == 4 + 3 * 4 + 3 * 8 + 16 * g.size
    assert decode_cgof(data) == f
    write_cgof(tmp_path / "f.cgof", f, name="f", parameters={"a": 1})
    assert read_cgof(tmp_path / "f.cgof") == f
    assert read_sidecar(tmp_path / "f.cgof")["parameters"] == {"a": 1}
    with pytest.raises(ValueError):
        decode_cgof(b"XXXX" + data[4:])
