import inspect

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgokit.amplitude import PhiConfig, build_sheet_set
from cgokit.errors import NoDecaySignal, PhaseUnderResolved, ReconstructionUnstable
from cgokit.field_core import ComplexField, Grid2D, bump, disk_domain, make_potential, radial_cutoff
from cgokit.forward_dn import PolarGrid, dn_assemble
from cgokit.recovery import (BornTraces, CGOTraces, check_stable, filter_error_report, filter_multiplier,
                             forward_transform, gaussian_fourier_recover, grid_transform, plateau_certificate,
                             reconstruct_from_dn, remainder_proxy, stationary_phase_filter, window_grid)

LAMS = [32.0, 64.0, 128.0, 256.0, 512.0]


@pytest.fixture(scope="module")
def g512():
    return Grid2D.square(512, 1.0)


@pytest.fixture(scope="module")
def gauss512(g512):
    return make_potential("gaussian_bump", g512, amplitude=1.0, width=0.1, center=[0.05, 0.02], support=0.9).realized


def test_zero_in_zero_out(g512):
    assert not np.any(stationary_phase_filter(ComplexField.zeros(g512), 64).values)


@pytest.mark.parametrize("sgn", [1, -1])
def test_multiplier_identity(gauss512, sgn):
    F = stationary_phase_filter(gauss512, 64, sgn)
    zeta, vf = grid_transform(gauss512)
    _, ff = grid_transform(F)
    assert np.linalg.norm(ff - filter_multiplier(zeta, 64, sgn) * vf) <= 1e-3 * np.linalg.norm(vf)


def test_quadrature_oracle(gauss512):
    lam = 64.0
    F = stationary_phase_filter(gauss512, lam)
    fine = Grid2D.square(1024, 1.0)
    vf = make_potential("gaussian_bump", fine, amplitude=1.0, width=0.1, center=[0.05, 0.02], support=0.9).values
    nz = np.nonzero(vf)
    zs, ws = fine.z[nz], vf[nz] * fine.h ** 2
    rng = np.random.default_rng(11)
    g = gauss512.grid
    for p in 0.3 * np.sqrt(rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16)):
        j, i = g.nearest_index(p)
        d = zs - g.z[j, i]
        ref = (2 * lam / np.pi) * np.sum(np.exp(2j * lam * (d * d).real) * ws)
        assert abs(F.values[j, i] - ref) <= 1e-3 * abs(ref)


def test_sign_twin(gauss512):
    rng = np.random.default_rng(5)
    v = ComplexField(gauss512.grid, gauss512.values * (1 + 0.5j) + 0.01 * rng.normal(size=gauss512.grid.shape)
                     * bump(np.abs(gauss512.grid.z) / 0.8))
    a = stationary_phase_filter(v, 128, -1).values
    b = np.conj(stationary_phase_filter(v.conj(), 128, 1).values)
    assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()


@pytest.mark.parametrize("lam", [64.0, 128.0, 256.0])
def test_normalization(g512, lam):
    W = ComplexField(g512, radial_cutoff(np.abs(g512.z), 0.5, 0.9).astype(complex))
    j, i = g512.nearest_index(0j)
    assert abs(stationary_phase_filter(W, lam).values[j, i] - 1.0) <= 0.02


def test_filter_guard():
    g = Grid2D.square(64, 1.0)
    with pytest.raises(PhaseUnderResolved):
        stationary_phase_filter(ComplexField(g, bump(np.abs(g.z) / 0.5).astype(complex)), 4096)


def test_smooth_slope(gauss512):
    rep = filter_error_report(gauss512, LAMS, "smooth")
    assert rep.slope <= -0.9
    assert rep.passed


def _radial(g, prof):
    r = np.abs(g.z - (0.05 + 0.02j))
    return ComplexField(g, (prof(np.maximum(r, g.h)) * bump(r / 0.5)).astype(complex))


def test_cone_slope(g512):
    # |z - c| is in H^s for every s < 2, so its error decays close to 1/lambda; see the decision log
    rep = filter_error_report(_radial(g512, lambda r: r), LAMS, "cone")
    assert -0.65 <= rep.slope <= -0.35


def test_cone_bound_one_sided(g512):
    rep = filter_error_report(_radial(g512, lambda r: r), LAMS, "cone")
    assert rep.bound_satisfied


def test_log_profile_saturates_bound(g512):
    # -log|z - c| sits just below H^1, where the s = 1 rate is sharp
    rep = filter_error_report(_radial(g512, lambda r: -np.log(r)), LAMS, "cone")
    assert -0.65 <= rep.slope <= -0.35
    assert rep.passed


def test_zero_filter_report(g512):
    with pytest.raises(NoDecaySignal):
        filter_error_report(ComplexField.zeros(g512), LAMS)


# -- Gaussian-regularized inversion -------------------------------------------

@pytest.fixture(scope="module")
def gdata():
    g = Grid2D.square(256, 1.0)
    P = make_potential("smooth_bump", g, amplitude=1.0, width=0.9, center=[0.1, -0.05])
    W = ComplexField(g, np.where(np.abs(g.z) < 0.95, P.values, 0))
    Om, n = 64.0, 129
    wg = Grid2D(n, n, -Om, -Om, 2 * Om / (n - 1))
    return P, forward_transform(W, wg), Om


@given(st.builds(complex, st.floats(-3, 3), st.floats(-3, 3)))
def test_recover_linear(gdata, a):
    _, data, Om = gdata
    d2 = ComplexField(data.grid, np.roll(data.values, 3, axis=0))
    eps = [(Om / 8) ** -2, (Om / 4) ** -2]
    f1, _ = gaussian_fourier_recover(data, eps, 0.5)
    f2, _ = gaussian_fourier_recover(d2, eps, 0.5)
    f3, _ = gaussian_fourier_recover(ComplexField(data.grid, a * data.values + d2.values), eps, 0.5)
    for x, y, z in zip(f1, f2, f3):
        ref = a * x.values + y.values
        assert np.abs(z.values - ref).max() <= 1e-12 * (1 + np.abs(ref).max())


def test_recover_zero(gdata):
    _, data, Om = gdata
    fs, _ = gaussian_fourier_recover(ComplexField.zeros(data.grid), [(Om / 8) ** -2, (Om / 4) ** -2])
    assert all(not np.any(f.values) for f in fs)


def test_recover_reference_eps(gdata):
    # with |omega0| = 0 nothing is cut out at low frequency
    P, data, Om = gdata
    eps = [(Om / k) ** -2 for k in (8.0, 6.0, 4.0)]
    _, rep = gaussian_fourier_recover(data, eps, 0.0, region=(0j, 0.5), truth=P.function())
    assert rep.meta["errors"][-1] <= 0.05
    assert rep.meta["errors"][-1] < rep.meta["errors"][0]


def test_recover_improves_until_floor(gdata):
    P, data, Om = gdata
    eps = [(Om / k) ** -2 for k in (8.0, 6.0, 4.0, 3.0, 2.0, 1.5, 1.0)]
    _, rep = gaussian_fourier_recover(data, eps, 0.5, region=(0j, 0.5), truth=P.function())
    errs = rep.meta["errors"]
    assert min(errs) <= 0.05
    assert rep.passed
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_recover_weighted_interior_data():
    # data from the interior integrals int e^{-i Re(z conj w)} |a|^2 V e^{2 sigma} with a = 1
    g = Grid2D.square(256, 1.0)
    dom = disk_domain(g, 0.6, 0.9, sigma=lambda z: 0.1 * np.real(z))
    V = make_potential("smooth_bump", g, amplitude=1.0, width=0.5, center=[0.05, 0.0])
    w2 = np.exp(2 * dom.sigma.values.real)
    Om, n = 64.0, 129
    wg = Grid2D(n, n, -Om, -Om, 2 * Om / (n - 1))
    data = forward_transform(V.realized, wg, weight=w2)
    fs, rep = gaussian_fourier_recover(data, [(Om / 4) ** -2, (Om / 2) ** -2], 0.5, region=(0j, 0.5))
    zg = fs[-1].grid
    est = fs[-1].values / np.exp(0.2 * zg.z.real)
    truth = V.function()(zg.z)
    m = np.abs(zg.z) < 0.5
    assert np.sum(np.abs(est - truth)[m]) <= 0.10 * np.sum(np.abs(truth)[m])


def test_recover_under_resolved(gdata):
    _, data, Om = gdata
    with pytest.raises(PhaseUnderResolved):
        gaussian_fourier_recover(data, [(Om / 8) ** -2, (Om / 4) ** -2], window=10.0)


def test_recover_eps_validation(gdata):
    _, data, _ = gdata
    with pytest.raises(ValueError):
        gaussian_fourier_recover(data, [1e-3, 1e-2])


# -- reconstruction ---------------------------------------------------------------

def test_plateau_certificate():
    assert plateau_certificate([1.0, 0.6, 0.4, 0.38])["pass"]
    assert not plateau_certificate([1.0, 0.9, 0.8])["pass"]          # never halves
    assert not plateau_certificate([1.0, 0.3, 0.8])["pass"]          # blows up at the end
    assert not plateau_certificate([1.0, 0.4])["pass"]               # too short
    assert plateau_certificate([1.0, float("nan"), 0.4, 0.35])["pass"]


def test_interface_separation():
    params = inspect.signature(reconstruct_from_dn).parameters
    assert list(params)[:5] == ["dn1", "dn2", "sheets", "lambdas", "p0_grid"]
    assert not any("truth" in p or p in ("V", "V1", "V2") for p in params)
    # blind traces never see a potential
    assert BornTraces(None, None, 4)._potentials() == (0.0, 0.0)


@pytest.fixture(scope="module")
def setup():
    g = Grid2D.square(160, 1.25)
    V1 = make_potential("smooth_bump", g, amplitude=1.0, width=0.8, center=[0.05, 0.03])
    pg = PolarGrid(128, 256, 1.0)
    dn1 = dn_assemble(V1.function(), 16, pg)
    dn0 = dn_assemble(0.0, 16, pg)
    phi = PhiConfig("identity", disk_domain(g, 1.05, 1.2))
    sheets = build_sheet_set(phi, 0j, 0.45)
    return g, V1, pg, dn1, dn0, sheets


def test_same_maps_give_zero(setup):
    g, V1, pg, dn1, _, sheets = setup
    res = reconstruct_from_dn(dn1, dn1, sheets, [1.0, 2.0], window_grid(sheets, 8),
                              traces=CGOTraces(sheets, pg, 16, V1))
    assert np.abs(res.values).max() <= 1e-8


def test_reduced_reconstruction(setup):
    g, V1, pg, dn1, dn0, sheets = setup
    lams = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0]
    grid = window_grid(sheets, 8)
    res = check_stable(reconstruct_from_dn(dn1, dn0, sheets, lams, grid, traces=CGOTraces(sheets, pg, 16, V1)))
    truth = V1.function()(grid.z) * res.mask
    assert res.error_vs(truth) <= 0.30
    assert plateau_certificate(res.error_curve(truth))["pass"]
    assert np.all(np.isfinite(res.values))
    assert not np.any(res.values[~res.mask])
    rp = remainder_proxy(res, ComplexField(g, np.where(np.abs(g.z) < 1.0, V1.values, 0)))
    assert rp["slope"] <= -0.05


def test_blind_mode_runs(setup):
    g, V1, pg, dn1, dn0, sheets = setup
    grid = window_grid(sheets, 8)
    res = reconstruct_from_dn(dn1, dn0, sheets, [1.0, 2.0], grid, traces=BornTraces(sheets, pg, 16))
    assert res.mode == "blind"
    assert np.all(np.isfinite(res.values))


def test_unstable_reported(setup):
    _, V1, pg, dn1, dn0, sheets = setup
    # a lambda the CGO grid cannot resolve anywhere
    res = reconstruct_from_dn(dn1, dn0, sheets, [5000.0], window_grid(sheets, 8), traces=BornTraces(sheets, pg, 16))
    assert len(res.unstable) == int(res.mask.sum())
    with pytest.raises(ReconstructionUnstable):
        check_stable(res)
