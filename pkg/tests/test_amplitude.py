import numpy as np
import pytest

from cgokit.amplitude import (PhiConfig, build_amplitude, build_bform, build_sheet_set, circle_family,
                              taylor_coeffs, taylor_eval)
from cgokit.errors import AliasRisk, InvalidBasePoint, InvalidDomain, SheetOverlap
from cgokit.field_core import Grid2D, annulus_domain, disk_domain, sample_points


def square_sheets(n=256):
    g = Grid2D.square(n, 1.0)
    dom = annulus_domain(g, 0.2, 0.85, 0.1, 0.95)
    return build_sheet_set(PhiConfig("square", dom), 0.5, 0.1)


@pytest.fixture(scope="module")
def sq256():
    return square_sheets(256)


@pytest.fixture(scope="module")
def ident():
    g = Grid2D.square(256, 1.0)
    return build_sheet_set(PhiConfig("identity", disk_domain(g, 0.85, 0.95)), 0.2 + 0.1j, 0.15)


def test_identity_single_sheet(ident):
    assert ident.N == 0
    assert complex(sample_points(ident.sheets[0].chi_prime, 0.2 + 0.1j).ravel()[0]) == pytest.approx(1.0)


def test_square_two_sheets(sq256):
    assert sq256.N == 1
    centers = sorted(s.center.real for s in sq256.sheets)
    assert centers == pytest.approx([-0.5, 0.5])
    w = [complex(sq256.phi.value(s.center)) for s in sq256.sheets]
    assert w[0] == pytest.approx(w[1])


def test_cutoff_pair_nesting(sq256):
    for s in sq256.sheets:
        chi, chp = s.chi.values.real, s.chi_prime.values.real
        assert np.all(chp[chi > 0] == pytest.approx(1.0))
        assert chi.min() >= 0 and chp.max() <= 1
    a, b = (s.chi_prime.values.real > 0 for s in sq256.sheets)
    assert not np.any(a & b)


def test_square_with_critical_point_rejected():
    g = Grid2D.square(128, 1.0)
    with pytest.raises((SheetOverlap, InvalidDomain, ValueError)):
        build_sheet_set(PhiConfig("square", disk_domain(g, 0.5, 0.9)), 0.3, 0.1)


def test_oversized_radius_overlaps():
    g = Grid2D.square(128, 1.0)
    dom = annulus_domain(g, 0.2, 0.85, 0.1, 0.95)
    with pytest.raises(SheetOverlap):
        build_sheet_set(PhiConfig("square", dom), 0.5, 0.2)


def test_identity_amplitude_is_one_at_p0(ident):
    p0 = 0.2 + 0.1j
    am = build_amplitude(ident, p0)
    j, i = ident.grid.nearest_index(p0)
    assert am.a.values[j, i] == pytest.approx(1.0, abs=1e-12)


def test_base_point_outside_chart(ident):
    with pytest.raises(InvalidBasePoint):
        build_amplitude(ident, -0.6)


def test_square_delta_property_512():
    sh = square_sheets(512)
    am = build_amplitude(sh, 0.5)
    rows = am.delta_report(0.05)
    assert rows[0]["error"] <= 0.05 and rows[1]["abs_a"] <= 0.05
    assert am.dbar_residual() <= 5 * sh.grid.h


def test_delta_property_off_centre(sq256):
    am = build_amplitude(sq256, 0.52 + 0.03j)
    assert all(r["pass"] for r in am.delta_report(0.05))
    assert am.dbar_residual() <= 5 * sq256.grid.h


def test_bforms(sq256, ident):
    b0 = build_bform(ident, 0, 0.2 + 0.1j)
    j, i = ident.grid.nearest_index(0.2 + 0.1j)
    assert b0.b.values[j, i] == pytest.approx(1.0, abs=1e-12)
    for jj in (0, 1):
        hf = build_bform(sq256, jj, 0.5)
        assert all(r["pass"] for r in hf.delta_report(0.05))
        assert hf.dbar_residual() <= 5 * sq256.grid.h


def test_taylor_identity_constant(ident):
    co = taylor_coeffs(ident, mu_max=4)
    win = np.abs(ident.grid.z - (0.2 + 0.1j)) < 0.1
    assert np.abs(co[0].values[win] - 1).max() <= 1e-10
    for c in co[1:]:
        # the cut-off quotient leaves a ~1e-10 holomorphic remainder
        assert np.abs(c.values[win]).max() <= 1e-8


@pytest.fixture(scope="module")
def sq_taylor(sq256):
    fam = circle_family(sq256, 48)
    return taylor_coeffs(sq256, fam, mu_max=12)


def test_taylor_reconstruction(sq256, sq_taylor):
    m = sq256.phi.dom.mask_M0
    for z0 in (0.25 * 0.1 * np.exp(0.7j), 0.02 - 0.01j):
        p0 = sq256.base_point(z0)
        a = build_amplitude(sq256, p0).a.values
        s = taylor_eval(sq_taylor, z0).values
        assert np.linalg.norm((s - a)[m]) <= 1e-3 * np.linalg.norm(a[m])


def test_taylor_geometric_decay(sq256, sq_taylor):
    m = sq256.phi.dom.mask_M0
    rad = 0.05
    t = [np.abs(c.values[m]).max() * rad ** mu for mu, c in enumerate(sq_taylor)]
    tail = t[3:]
    assert all(b < a for a, b in zip(tail, tail[1:]))


def test_holomorphic_dependence_on_p0(sq256, sq_taylor):
    m = sq256.phi.dom.mask_M0
    d = 1e-3
    ap = build_amplitude(sq256, sq256.base_point(d)).a.values
    am = build_amplitude(sq256, sq256.base_point(-d)).a.values
    fd = (ap - am) / (2 * d)
    a1 = sq_taylor[1].values
    assert np.linalg.norm((fd - a1)[m]) <= 0.05 * np.linalg.norm(a1[m])


def test_alias_guard(sq256):
    with pytest.raises(AliasRisk):
        taylor_coeffs(sq256, mu_max=8, n_samples=16)
