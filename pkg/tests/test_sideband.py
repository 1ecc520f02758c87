import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from quench.errors import NoCoolingError
from quench.sideband import (
    CoolingParams, cooling_limits, gamma_opt, golden_rule_rates, n_m_langevin, n_min_markovian,
    n_min_nonmarkovian, n_steady, nf, optimal_detuning, optomech_response, sbb, snn,
)
from quench.spectral import Drude, OhmicExp, OhmicFlat

mpmath.mp.dps = 50


def test_snn_resonant_and_tail():
    p = CoolingParams(kappa=0.02, n_cav=3.0)
    assert snn(p, -1.0) == pytest.approx(4 * 3.0 / 0.02, rel=1e-15)
    assert snn(p, 1e12) < 1e-20


def test_snn_vs_mpmath():
    p = CoolingParams(detuning=1.0, kappa=0.1)
    k, d, w = mpmath.mpf("0.1"), mpmath.mpf(1), mpmath.mpf("0.5")
    assert snn(p, 0.5) == pytest.approx(float(k / (k**2 / 4 + (d + w) ** 2)), rel=1e-15)


def test_rate_ratio_resolved_sideband():
    a_plus, a_minus = golden_rule_rates(CoolingParams(kappa=0.01, g0=0.01))
    assert a_minus / a_plus == pytest.approx((0.01**2 / 4 + 4) / (0.01**2 / 4), rel=1e-12)


def test_zero_detuning_no_cooling():
    p = CoolingParams(detuning=0.0, kappa=0.1, g0=0.01)
    a_plus, a_minus = golden_rule_rates(p)
    assert a_plus == a_minus and gamma_opt(p) == 0
    with pytest.raises(NoCoolingError):
        n_min_markovian(p)


def test_blue_detuning_heats():
    p = CoolingParams(detuning=-1.0, kappa=0.1, g0=0.01)
    assert gamma_opt(p) < 0
    with pytest.raises(NoCoolingError):
        n_min_markovian(p)


@given(d=st.floats(-3, 3), k=st.floats(1e-3, 2))
def test_gamma_opt_antisymmetric(d, k):
    a = gamma_opt(CoolingParams(detuning=d, kappa=k, g0=0.1))
    b = gamma_opt(CoolingParams(detuning=-d, kappa=k, g0=0.1))
    assert a == -b


def test_n_min_resolved_sideband():
    assert n_min_markovian(CoolingParams(kappa=0.01)) == pytest.approx(6.25e-6, rel=1e-3)
    assert n_min_markovian(CoolingParams(kappa=4.0)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("k", [1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
def test_n_min_asymptote(k):
    assert abs(n_min_markovian(CoolingParams(kappa=k)) / (k / 4) ** 2 - 1) <= k**2


def test_optimal_detuning_vs_grid():
    p = CoolingParams(kappa=0.1)
    grid = np.linspace(1e-4, 2.0, 200001)
    vals = [n_min_markovian(CoolingParams(detuning=d, kappa=0.1)) for d in grid]
    d_grid = grid[int(np.argmin(vals))]
    d_opt = optimal_detuning(p)
    assert abs(d_opt - d_grid) < 1e-3
    assert d_opt == pytest.approx(math.sqrt(1 + 0.1**2 / 4), abs=1e-6)


def test_n_steady_limits():
    assert n_steady(CoolingParams(g0=0.0, gamma_m=1e-3, n_th=37.0)) == pytest.approx(37.0, rel=1e-15)
    p = CoolingParams(kappa=0.05, g0=0.02, gamma_m=1e-14, n_th=10.0)
    assert n_steady(p) == pytest.approx(n_min_markovian(p), rel=1e-6)
    with pytest.raises(NoCoolingError):
        n_steady(CoolingParams(g0=0.0, gamma_m=0.0))


def test_n_steady_vs_mpmath():
    p = CoolingParams(kappa=0.01, g0=0.01, gamma_m=1e-5, n_th=100.0)
    k, g0, gm, nth = mpmath.mpf("0.01"), mpmath.mpf("0.01"), mpmath.mpf("1e-5"), mpmath.mpf(100)
    ap = g0**2 * k / (k**2 / 4 + 4)
    am = g0**2 * k / (k**2 / 4)
    ref = (ap + nth * gm) / (am - ap + gm)
    assert n_steady(p) == pytest.approx(float(ref), rel=1e-13)


def test_gamma_om_resonant_identity():
    for kern in (OhmicFlat(0.03), OhmicExp(0.05, 1.0), Drude(0.05, 2.0)):
        p = CoolingParams(detuning=1.3, g=0.02, cav_kernel=kern)
        w = 1.3
        k = kern_val = p.kappa_tilde(w)
        ref = 8 * 0.02**2 * w**2 / (k * (k * k + 4 * w * w))
        assert optomech_response(p, w)[1] == pytest.approx(ref, rel=1e-12)
        assert kern_val > 0


def test_gamma_om_zero_at_origin():
    assert optomech_response(CoolingParams(detuning=0.0, g=0.1), 0.0)[1] == 0.0


def test_flat_kernel_matches_golden_rule():
    # kappa~ = kappa/2 (amplitude rate) and g^2 = g0^2 n_cav
    rng = np.random.default_rng(5)
    for _ in range(10):
        k, d, g0, nc = rng.uniform(1e-3, 0.5), rng.uniform(-2, 2), rng.uniform(1e-3, 0.1), rng.uniform(0.5, 5)
        p = CoolingParams(detuning=d, kappa=k, g0=g0, n_cav=nc)
        q = CoolingParams(detuning=d, kappa=k, g=g0 * math.sqrt(nc), cav_kernel=OhmicFlat(k / 2))
        assert optomech_response(q, 1.0)[1] == pytest.approx(gamma_opt(p), rel=1e-10)


def test_nf_zero_coupling():
    p = CoolingParams(g=0.0, gamma_m=0.01, n_th=5.0, mech_kernel=Drude(0.01, 3.0))
    w = 0.7
    assert nf(p, w) == pytest.approx(0.01 * 5.0 / (0.01 * 9 / (w * w + 9)), rel=1e-14)


@pytest.mark.parametrize("kern", [OhmicFlat(0.02), OhmicExp(0.02, 1.0), Drude(0.02, 1.0)])
def test_nf_limit_point(kern):
    p = CoolingParams(detuning=1.0, g=0.003, cav_kernel=kern)
    assert nf(p, -1.0) == pytest.approx(n_min_nonmarkovian(kern, 1.0), rel=1e-12)


def test_nf_vs_mpmath():
    p = CoolingParams(detuning=0.9, g=0.02, gamma_m=1e-3, n_th=20.0,
                      mech_kernel=Drude(1e-3, 2.0), cav_kernel=OhmicExp(0.05, 1.5))
    w = mpmath.mpf("-0.8")
    kap = lambda x: mpmath.mpf("0.05") * mpmath.exp(-abs(x) / mpmath.mpf("1.5"))
    gi = mpmath.mpf("1e-3") * 4 / (w**2 + 4)
    d, g = mpmath.mpf("0.9"), mpmath.mpf("0.02")
    aw = abs(w)
    br = 1 / mpmath.mpc(kap(aw), d - aw) - 1 / mpmath.mpc(kap(aw), -(d + aw))
    gt = gi + 2 * g**2 * br.real
    ref = mpmath.mpf("1e-3") * 20 / gt + g**2 * kap(w) / (gt * (kap(w) ** 2 + (d - w) ** 2))
    assert nf(p, -0.8) == pytest.approx(float(ref), rel=1e-12)


def test_nf_nonpositive_damping():
    with pytest.raises(NoCoolingError):
        nf(CoolingParams(detuning=-1.0, g=0.01), 1.0)


def test_sbb_peak_and_positivity():
    p = CoolingParams(detuning=1.0, g=0.01, gamma_m=1e-3, n_th=10.0, mech_kernel=Drude(1e-3, 5.0),
                      cav_kernel=OhmicExp(0.05, 2.0))
    grid = np.linspace(-3, 3, 10**4)
    vals = np.array([sbb(p, w) for w in grid])
    assert np.all(vals >= 0)
    assert abs(grid[np.argmax(vals)] + 1.0) < 0.01


def test_sbb_integrable():
    p = CoolingParams(detuning=1.0, g=0.01, gamma_m=1e-3, n_th=10.0, mech_kernel=Drude(1e-3, 5.0))
    f = lambda w: sbb(p, w)
    total = sum(integrate.quad(f, a, b, limit=400, points=[-1.0] if a < -1 < b else None)[0]
                for a, b in [(-np.inf, -2), (-2, 0), (0, np.inf)])
    assert math.isfinite(total) and total > 0


@settings(max_examples=20, deadline=None)
@given(d=st.floats(0.5, 1.5), g=st.floats(1e-3, 0.05), nth=st.floats(0, 100), wc=st.floats(0.5, 10))
def test_sbb_nonnegative_random(d, g, nth, wc):
    p = CoolingParams(detuning=d, g=g, gamma_m=1e-3, n_th=nth, mech_kernel=Drude(1e-3, 3.0),
                      cav_kernel=OhmicExp(0.05, wc))
    for w in np.linspace(-4, 4, 101):
        assert sbb(p, w) >= 0


def test_nonmarkovian_ratios():
    k, w = 0.1, 1.0
    nm = n_m_langevin(k, w)
    assert nm == pytest.approx(k**2 / 8, rel=1e-15)
    assert n_min_nonmarkovian(Drude(k, w), w) / nm == pytest.approx(0.25, abs=1e-12)
    assert n_min_nonmarkovian(OhmicExp(k, w), w) / nm == pytest.approx(math.exp(-2), abs=1e-12)


def test_experimental_numbers():
    # kappa chosen so that n_M = 6.4e-3
    k = math.sqrt(8 * 6.4e-3)
    assert n_min_nonmarkovian(Drude(k, 1.0), 1.0) == pytest.approx(1.6e-3, rel=0.01)
    assert n_min_nonmarkovian(OhmicExp(k, 1.0), 1.0) == pytest.approx(8.7e-4, rel=0.01)


def test_markovian_approach():
    k = 0.1
    nm = n_m_langevin(k, 1.0)
    assert n_min_nonmarkovian(Drude(k, 100.0), 1.0) == pytest.approx(nm, rel=2e-4)
    assert n_min_nonmarkovian(OhmicExp(k, 100.0), 1.0) == pytest.approx(nm, rel=0.02)
    assert n_min_nonmarkovian(OhmicExp(k, 500.0), 1.0) == pytest.approx(nm, rel=0.01)


def test_nonmarkovian_monotone_in_cutoff():
    nm = n_m_langevin(0.1, 1.0)
    for cls in (Drude, OhmicExp):
        vals = [n_min_nonmarkovian(cls(0.1, wc), 1.0) for wc in np.geomspace(0.1, 1e4, 50)]
        assert np.all(np.diff(vals) > 0) and max(vals) <= nm


def test_cooling_limits_aggregate():
    lim = cooling_limits(CoolingParams(kappa=0.01, g0=0.01, g=0.01, gamma_m=1e-5, n_th=100.0))
    assert lim.a_minus > lim.a_plus >= 0
    assert lim.gamma_opt == lim.a_minus - lim.a_plus
    assert lim.n_min == pytest.approx(6.25e-6, rel=1e-3)
    assert lim.gamma_om > 0
