import math

import numpy as np
import pytest
from scipy import integrate

from xray_matter.photoabs import PhotonMode
from xray_matter.radial import hydrogenic_orbital
from xray_matter.rixs import (
    Broadening,
    CIIntermediate,
    LevelOrderingError,
    RIXSLevelModel,
    ci_emission_elements,
    excitation_profile,
    lorentzian_fwhm,
    peak_ridge,
    ridge_slope,
    rixs_amplitude,
    rixs_amplitude_ci,
    rixs_ddcs,
    rixs_map,
)
from xray_matter.spectra import SpectralMap
from xray_matter.units import ALPHA

GAMMA = 0.05


def model(**kw):
    base = dict(
        core_energy=-10.0,
        unoccupied={"a": -1.0},
        valence={"b": -3.0, "b2": -3.4},
        m_abs={"a": 0.3 + 0.1j},
        m_em={"b": 0.2 - 0.05j, "b2": 0.2 - 0.05j},
        gamma=GAMMA,
    )
    base.update(kw)
    return RIXSLevelModel(**base)


def test_on_resonance_and_half_width():
    m = model()
    peak = abs(rixs_amplitude(m, 9.0, ("a", "b"))) ** 2
    ref = abs(m.m_em["b"] * m.m_abs["a"]) ** 2 / GAMMA**2
    assert peak == pytest.approx(ref, rel=1e-14)
    assert abs(rixs_amplitude(m, 9.0 - GAMMA, ("a", "b"))) ** 2 == pytest.approx(peak / 2, rel=1e-12)
    assert abs(rixs_amplitude(m, 9.0 + GAMMA, ("a", "b"))) ** 2 == pytest.approx(peak / 2, rel=1e-12)


def test_exact_lorentzian():
    m = model()
    vals = []
    for d in np.linspace(-1, 1, 41):
        amp = rixs_amplitude(m, 9.0 - d, ("a", "b"))
        vals.append(abs(amp) ** 2 * (d * d + GAMMA**2))
    vals = np.array(vals)
    assert np.max(np.abs(vals / vals[0] - 1)) < 1e-12


def test_zero_absorption():
    m = model(m_abs={"a": 0.0})
    assert rixs_amplitude(m, 9.0, ("a", "b")) == 0


def test_validation():
    with pytest.raises(ValueError):
        model(gamma=0.0)
    with pytest.raises(LevelOrderingError):
        model(valence={"b": -0.5}, m_em={"b": 1.0})
    model(valence={"b": -0.5}, m_em={"b": 1.0}, check_ordering=False)
    with pytest.raises(KeyError):
        model(m_em={"x": 1.0})
    with pytest.raises(ValueError):
        rixs_amplitude(model(), -1.0, ("a", "b"))
    with pytest.raises(ValueError):
        Broadening(0.0)
    with pytest.raises(ValueError):
        Broadening(0.1, "voigt")


def test_emission_peak_positions():
    m = model()
    br = Broadening(0.02, "gaussian")
    wf = np.linspace(6.0, 8.5, 2501)
    for w_in, center in [(9.0, 7.0), (9.5, 7.5)]:
        y = rixs_ddcs(m, w_in, wf, ("a", "b"), br)
        assert wf[np.argmax(y)] == pytest.approx(center, abs=1e-3)


@pytest.mark.parametrize("shape", ["gaussian", "lorentzian"])
def test_integrated_ddcs(shape):
    # integrate over the physical range 0 < w_F < 2 w_F*, symmetric about the
    # centre; the Lorentzian tails beyond it hold 2 hwhm / (pi w_F*) ~ 5e-4
    m = model()
    br = Broadening(0.01, shape)
    w_in = 9.02
    center = m.emission_center(w_in, ("a", "b"))
    f = lambda x: float(rixs_ddcs(m, w_in, x, ("a", "b"), br))
    edges = [0.0, center - 0.5, center - 0.05, center, center + 0.05, center + 0.5, 2 * center]
    val = sum(
        integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-11, limit=500)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    )
    ref = ALPHA**4 * (center / w_in) * abs(rixs_amplitude(m, w_in, ("a", "b"))) ** 2
    assert val == pytest.approx(ref, rel=1e-3)


def dispersion_scan(m, br, finals=(("a", "b"),), n_in=101, n_f=1201):
    w_in = np.linspace(9.0 - 5 * GAMMA, 9.0 + 5 * GAMMA, n_in)
    wf = np.linspace(6.0, 8.0, n_f)
    return rixs_map(m, w_in, wf, list(finals), br)


def test_ridge_slope_and_profile():
    m = model()
    smap = dispersion_scan(m, Broadening(0.02, "gaussian"))
    assert smap.normalization["pathway"] == "regular-only"
    assert smap.axis_names == ["omega_in_hartree", "omega_f_hartree"]
    ridge = peak_ridge(smap)
    assert len(ridge) == 101
    assert abs(ridge_slope(ridge) - 1.0) < 1e-3
    prof = excitation_profile(smap)
    c, fwhm = lorentzian_fwhm(smap.axes[0][1], prof)
    assert c == pytest.approx(9.0, abs=0.01 * GAMMA)
    assert fwhm == pytest.approx(2 * GAMMA, rel=0.02)


def test_two_finals_parallel_ridges():
    m = model()
    smap = dispersion_scan(m, Broadening(0.02, "gaussian"), finals=[("a", "b"), ("a", "b2")])
    wf = smap.axes[1][1]
    col = smap.values[50]
    # two local maxima separated by e_b - e_b2
    k = [i for i in range(1, wf.size - 1) if col[i] > col[i - 1] and col[i] >= col[i + 1]]
    assert len(k) == 2
    assert wf[k[1]] - wf[k[0]] == pytest.approx(0.4, abs=2 * (wf[1] - wf[0]))


def test_duplicate_finals_counted_once():
    m = model()
    br = Broadening(0.02)
    a = rixs_map(m, [9.0], np.linspace(6, 8, 11), [("a", "b")], br)
    b = rixs_map(m, [9.0], np.linspace(6, 8, 11), [("a", "b"), ("a", "b")], br)
    assert np.array_equal(a.values, b.values)


def test_peak_invariant_under_widths():
    # the lifetime width only scales the column; the broadening width moves
    # the maximum by ~sigma^2 / w_F through the w_F prefactor, well below a bin
    wf = np.linspace(6.0, 8.0, 801)
    bin_ = wf[1] - wf[0]

    def peak(g, w):
        m = model(gamma=g)
        return peak_ridge(rixs_map(m, [9.13], wf, [("a", "b")], Broadening(w, "gaussian")))[0][1]

    ref = peak(0.05, 0.02)
    assert peak(0.2, 0.02) == pytest.approx(ref, abs=1e-12)
    assert peak(0.01, 0.02) == pytest.approx(ref, abs=1e-12)
    for w in (0.01, 0.05, 0.08):
        assert abs(peak(0.05, w) - 7.13) < 0.1 * bin_


def test_translation_covariance():
    m = model()
    br = Broadening(0.03, "lorentzian")
    w_in = np.linspace(8.8, 9.2, 21)
    wf = np.linspace(6.5, 7.5, 51)
    base = rixs_map(m, w_in, wf, [("a", "b")], br)
    delta = 0.37
    # common orbital shift: all differences unchanged
    shifted = rixs_map(m.shifted(delta), w_in, wf, [("a", "b")], br)
    assert np.max(np.abs(shifted.values - base.values)) <= 1e-10 * base.values.max()
    # photon grids up by delta, core down by delta: resonance and emission
    # centre move with the grids; only the w_F/w_in prefactor changes
    moved = rixs_map(m.with_core_energy(m.core_energy - delta), w_in + delta, wf + delta, [("a", "b")], br)
    pref0 = wf[None, :] / w_in[:, None]
    pref1 = (wf + delta)[None, :] / (w_in + delta)[:, None]
    a = base.values / pref0
    b = moved.values / pref1
    assert np.max(np.abs(a - b)) <= 1e-10 * a.max()


def test_map_threads_deterministic():
    m = model()
    br = Broadening(0.02)
    a = dispersion_scan(m, br, n_in=17, n_f=101)
    w_in = np.linspace(9.0 - 5 * GAMMA, 9.0 + 5 * GAMMA, 17)
    b = rixs_map(m, w_in, np.linspace(6.0, 8.0, 101), [("a", "b")], br, threads=4)
    assert np.array_equal(a.values, b.values)


# -- peak_ridge ---------------------------------------------------------------


def test_peak_ridge_gaussian_centres():
    rng = np.random.default_rng(3)
    wf = np.linspace(0.0, 10.0, 201)
    bin_ = wf[1] - wf[0]
    centres = rng.uniform(2.0, 8.0, 30)
    vals = np.exp(-0.5 * ((wf[None, :] - centres[:, None]) / 0.3) ** 2)
    smap = SpectralMap((("omega_in_hartree", np.arange(30.0)), ("omega_f_hartree", wf)), vals)
    found = np.array([p for _, p in peak_ridge(smap)])
    assert np.max(np.abs(found - centres)) < 0.01 * bin_


def test_peak_ridge_flat_and_zero():
    wf = np.linspace(0, 1, 11)
    zero = SpectralMap((("omega_in_hartree", [1.0, 2.0]), ("omega_f_hartree", wf)), np.zeros((2, 11)))
    assert peak_ridge(zero) == []
    vals = np.ones((2, 11))
    vals[1] = np.exp(-((wf - 0.5) ** 2) / 0.02)
    mixed = SpectralMap((("omega_in_hartree", [1.0, 2.0]), ("omega_f_hartree", wf)), vals)
    r = peak_ridge(mixed)
    assert len(r) == 1 and r[0][0] == 2.0
    assert r[0][1] == pytest.approx(0.5, abs=1e-12)


def test_linear_dispersion_slope():
    w_in = np.linspace(5, 6, 41)
    wf = np.linspace(0, 4, 801)
    vals = np.exp(-0.5 * ((wf[None, :] - (w_in[:, None] - 3.0)) / 0.05) ** 2)
    smap = SpectralMap((("omega_in_hartree", w_in), ("omega_f_hartree", wf)), vals)
    assert ridge_slope(peak_ridge(smap)) == pytest.approx(1.0, abs=1e-3)


# -- CI -----------------------------------------------------------------------


def test_ci_single_intermediate_reduces():
    m = model()
    pair = ("i", "a")
    inter = [CIIntermediate("M1", 9.0, {pair: 1.0})]
    em = ci_emission_elements(inter, {("i", "b"): m.m_em["b"]}, "a")
    for w in (8.7, 9.0, 9.31):
        ci = rixs_amplitude_ci(inter, 0.0, em, pair, w, GAMMA, "b", m_abs=m.m_abs["a"])
        ref = rixs_amplitude(m, w, ("a", "b"))
        assert abs(ci - ref) <= 1e-12 * abs(ref)


def test_ci_cancellation_and_zero_coefficient():
    c = (0.6 + 0.2j) / math.sqrt(2 * abs(0.6 + 0.2j) ** 2)
    rest = math.sqrt(1 - abs(c) ** 2)
    inters = [
        CIIntermediate("M1", 9.0, {("i", "a"): c, ("j", "a"): rest}),
        CIIntermediate("M2", 9.0, {("i", "a"): -c, ("j", "a"): rest}),
    ]
    em = {("i", "b", "M1"): 0.3 - 0.2j, ("i", "b", "M2"): 0.3 - 0.2j}
    amp = rixs_amplitude_ci(inters, 0.0, em, ("i", "a"), 9.0, GAMMA, "b")
    assert abs(amp) < 1e-12
    only_j = [CIIntermediate("M3", 9.0, {("j", "a"): 1.0})]
    em3 = {("i", "b", "M3"): 1.0}
    assert rixs_amplitude_ci(only_j, 0.0, em3, ("i", "a"), 9.0, GAMMA, "b") == 0


def test_ci_resolution_of_identity():
    # complete orthonormal set of intermediates over three particle-hole
    # pairs, degenerate in energy
    rng = np.random.default_rng(11)
    pairs = [("i", "a"), ("j", "a"), ("i", "c")]
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u, _ = np.linalg.qr(z)
    inters = [
        CIIntermediate(f"M{k}", 9.0, {p: u[k, n] for n, p in enumerate(pairs)}) for k in range(3)
    ]
    em_sp = {("i", "b"): 0.2 - 0.05j, ("j", "b"): 0.7}
    em = ci_emission_elements(inters, em_sp, "a")
    m = model()
    for w in (8.9, 9.0, 9.2):
        ci = rixs_amplitude_ci(inters, 0.0, em, ("i", "a"), w, GAMMA, "b", m_abs=m.m_abs["a"])
        ref = rixs_amplitude(m, w, ("a", "b"))
        assert abs(ci - ref) <= 1e-10 * abs(ref)


def test_ci_general_hole():
    inters = [CIIntermediate("M1", 9.0, {("i", "a"): 1.0})]
    em = {("i", "b", "M1"): 1.0, ("j", "b", "M1"): 2.0}
    a = rixs_amplitude_ci(inters, 0.0, em, ("i", "a"), 9.0, GAMMA, "b")
    b = rixs_amplitude_ci(inters, 0.0, em, ("i", "a"), 9.0, GAMMA, "b", hole="j")
    assert b == pytest.approx(2 * a, rel=1e-15)


def test_ci_validation_and_warnings():
    with pytest.raises(ValueError):
        CIIntermediate("M", 1.0, {("i", "a"): 0.9})
    CIIntermediate("M", 1.0, {("i", "a"): 0.8}, m0=0.6)
    with pytest.warns(UserWarning, match="two-particle"):
        CIIntermediate("M", 1.0, {("i", "a"): 0.8}, doubles={("i", "j", "a", "c"): 0.6})
    with pytest.warns(UserWarning, match="no intermediate"):
        assert rixs_amplitude_ci([], 0.0, {}, ("i", "a"), 9.0, GAMMA, "b") == 0
    with pytest.raises(ValueError):
        rixs_amplitude_ci(
            [CIIntermediate("M", 1.0, {("i", "a"): 1.0})] * 2, 0.0, {}, ("i", "a"), 9.0, GAMMA, "b"
        )


def test_from_orbitals(grid):
    core = hydrogenic_orbital(3.0, 1, 0, grid)
    val = hydrogenic_orbital(3.0, 2, 1, grid)
    unocc = hydrogenic_orbital(3.0, 3, 1, grid)
    mode_in = PhotonMode.linear(core.ionization_potential * 0.9, (0, 0, 1), (1, 0, 0))
    mode_out = PhotonMode.linear(0.5, (1, 0, 0), (0, 0, 1))
    m = RIXSLevelModel.from_orbitals(
        (core, 0), {"3p": (unocc, 1)}, {"2p": (val, 0)}, mode_in, mode_out, GAMMA
    )
    assert m.core_energy == core.energy
    assert abs(m.m_abs["3p"]) > 0
    assert abs(m.m_em["2p"]) > 0
    # z-polarized emission couples 2p(m=0) to 1s; x-polarized would not
    mode_out_x = PhotonMode.linear(0.5, (0, 0, 1), (1, 0, 0))
    mx = RIXSLevelModel.from_orbitals(
        (core, 0), {"3p": (unocc, 1)}, {"2p": (val, 0)}, mode_in, mode_out_x, GAMMA, retardation=False
    )
    assert abs(mx.m_em["2p"]) < 1e-12 * abs(m.m_em["2p"])


def test_map_with_ci_intermediates():
    m = model()
    br = Broadening(0.02)
    w_in = np.linspace(8.8, 9.2, 9)
    wf = np.linspace(6.5, 7.5, 51)
    plain = rixs_map(m, w_in, wf, [("a", "b")], br)
    inter = [CIIntermediate("M1", 9.0, {("i", "a"): 1.0})]
    ci = rixs_map(m, w_in, wf, [("a", "b")], br, intermediates=inter)
    np.testing.assert_allclose(ci.values, plain.values, rtol=1e-12)
    assert ci.normalization["intermediates"] == "ci"
