import numpy as np
import pytest
from hypothesis import given, strategies as st

from oamp import EnsembleSpec, Prior, sample_matrix
from oamp.denoisers import MMSE, DFDenoiser, SoftThreshold, mmse_b, posterior_mean, se_mse
from oamp.linest import LMMSE, MF, PINV, spectral_gains
from oamp.sevo import (OPTIMAL, SEState, SpectralModel, fixed_point, mmse_a, phi_closed_form,
                       phi_empirical, phi_for_kind, phi_star, psi_star, r_transform,
                       r_transform_residual, run_se_oamp, se_accuracy, se_amp)

BG = Prior.bernoulli_gaussian(0.1)
BPSK = Prior.bpsk()
IDENTITY = SpectralModel.empirical(np.ones(50))


def test_phi_closed_form_examples():
    assert phi_closed_form(MF, 2.0, 1.0, 0.1) == pytest.approx(2.1)
    assert phi_closed_form(PINV, 2.0, 1.0, 0.1) == pytest.approx(1.2)
    assert phi_closed_form(PINV, 0.5, 1.0, 0.1) == pytest.approx(0.2)
    # LMMSE: positive root of tau^2 - (sigma2 + (delta-1) v2) tau - sigma2 v2 = 0
    t = phi_closed_form(LMMSE, 2.0, 1.0, 0.1)
    assert t * t - 1.1 * t - 0.1 == pytest.approx(0.0, abs=1e-14)
    assert phi_closed_form(LMMSE, 2.0, 1.0, 0.0) == pytest.approx(1.0)
    assert phi_closed_form("PartialOrtho", 2.0, 1.0, 0.1) == pytest.approx(1.1)
    with pytest.raises(ZeroDivisionError):
        phi_closed_form(PINV, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        phi_closed_form("ZF", 2.0, 1.0, 0.1)


@pytest.mark.parametrize("kind", [MF, PINV, LMMSE])
def test_closed_form_matches_large_iid_spectrum(kind):
    A = sample_matrix(EnsembleSpec.iid_gaussian(), 2000, 4000, np.random.default_rng(0))
    emp = SpectralModel.from_matrix(A)
    for v2, s2 in [(1.0, 0.01), (0.1, 0.1)]:
        assert phi_for_kind(emp, kind, v2, s2) == pytest.approx(
            phi_closed_form(kind, 2.0, v2, s2), rel=0.02)


def test_partial_orthogonal_spectrum_is_exact():
    A = sample_matrix(EnsembleSpec.partial_orthogonal("DCT"), 256, 512, np.random.default_rng(0))
    emp = SpectralModel.from_matrix(A)
    tag = SpectralModel.partial_orthogonal(2.0)
    for kind in (MF, PINV, LMMSE, OPTIMAL):
        assert phi_for_kind(emp, kind, 0.3, 0.01) == pytest.approx(
            phi_for_kind(tag, kind, 0.3, 0.01), rel=1e-12)
    assert mmse_a(emp, 0.3, 0.01) == pytest.approx(mmse_a(tag, 0.3, 0.01), rel=1e-12)


def test_mmse_a_and_phi_star_examples():
    assert mmse_a(IDENTITY, 1.0, 0.25) == pytest.approx(0.2)
    assert phi_star(IDENTITY, 1.0, 0.25) == pytest.approx(0.25)
    zero = SpectralModel.empirical(np.array([0.0, 0.0, 2.0, 2.0]))
    assert mmse_a(zero, 1.0, 1.0) == pytest.approx(0.5 * 1.0 + 0.5 / 3.0)
    assert phi_star(IDENTITY, 1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        mmse_a(IDENTITY, 0.0, 1.0)


def test_phi_empirical_examples():
    lam2 = np.array([4.0, 1.0, 0.0])
    spec = SpectralModel.empirical(lam2)
    # matched filter gains g = lambda
    g = np.sqrt(lam2[:2])
    m11, m22, m20 = 5 / 3, 17 / 3, 5 / 3
    expect = (m22 / m11 ** 2 - 1) * 0.5 + m20 / m11 ** 2 * 0.1
    assert phi_empirical(spec, g, 0.5, 0.1) == pytest.approx(expect)
    with pytest.raises(ValueError):
        phi_empirical(spec, np.zeros(2), 0.5, 0.1)
    assert spec.ratio == pytest.approx(1.5)


@pytest.mark.parametrize("spec", [
    SpectralModel.from_matrix(sample_matrix(EnsembleSpec.geometric(10.0), 100, 200,
                                            np.random.default_rng(1))),
    SpectralModel.from_matrix(sample_matrix(EnsembleSpec.iid_gaussian(), 150, 200,
                                            np.random.default_rng(2))),
    SpectralModel.iid_gaussian(1 / 0.65),
])
def test_phi_star_is_a_lower_bound(spec):
    for v2 in np.logspace(-4, 0, 9):
        for s2 in (1e-5, 1e-2, 1.0):
            star = phi_star(spec, v2, s2)
            for kind in (MF, PINV, LMMSE):
                assert star <= phi_for_kind(spec, kind, v2, s2) * (1 + 1e-10)
    # monotone in v2 and sigma2
    v = np.logspace(-4, 0, 20)
    vals = [phi_star(spec, x, 0.01) for x in v]
    assert np.all(np.diff(vals) > 0)
    vals = [phi_star(spec, 0.1, s) for s in v]
    assert np.all(np.diff(vals) > 0)


def test_phi_star_beats_random_gains():
    A = sample_matrix(EnsembleSpec.geometric(5.0), 80, 200, np.random.default_rng(3))
    spec = SpectralModel.from_matrix(A)
    rng = np.random.default_rng(4)
    g0 = spectral_gains(LMMSE, A.singulars, 0.2, 0.01)
    star = phi_star(spec, 0.2, 0.01)
    assert phi_empirical(spec, g0, 0.2, 0.01) == pytest.approx(star, rel=1e-10)
    for _ in range(10):
        g = g0 * np.exp(0.3 * rng.standard_normal(len(g0)))
        assert phi_empirical(spec, g, 0.2, 0.01) >= star


def test_mmse_a_jensen():
    A = sample_matrix(EnsembleSpec.geometric(50.0), 100, 300, np.random.default_rng(5))
    spec = SpectralModel.from_matrix(A)
    for v2, s2 in [(1.0, 0.01), (0.01, 0.1)]:
        m = spec.mean_lambda2
        assert mmse_a(spec, v2, s2) >= s2 * v2 / (v2 * m + s2)


@pytest.mark.parametrize("prior", [BG, BPSK])
def test_psi_star_beats_other_divergence_free_denoisers(prior):
    rng = np.random.default_rng(6)
    for tau2 in (0.05, 0.3, 1.0):
        star = psi_star(prior, tau2)
        Cs = (tau2 / (tau2 - mmse_b(prior, tau2))) * np.exp(0.4 * rng.standard_normal(10))
        for C in Cs:
            assert se_mse(DFDenoiser(MMSE(prior), C=C), prior, tau2) >= star * (1 - 1e-9)
        for scale in np.exp(rng.uniform(-1, 1, 10)):
            base = SoftThreshold(scale)
            for C in (0.5, 1.0, 2.0):
                assert se_mse(DFDenoiser(base, C=C), prior, tau2) >= star * (1 - 1e-9)


@pytest.mark.parametrize("prior", [BG, BPSK])
@pytest.mark.parametrize("tau2", [0.01, 0.1, 1.0, 10.0])
def test_psi_star_monte_carlo(prior, tau2):
    rng = np.random.default_rng(7)
    mb = mmse_b(prior, tau2)
    C, dbar = tau2 / (tau2 - mb), mb / tau2
    errs = []
    for _ in range(10):
        from oamp.model import sample_signal
        x = sample_signal(prior, 10 ** 6, rng)
        r = x + np.sqrt(tau2) * rng.standard_normal(x.size)
        e = C * (posterior_mean(prior, r, tau2) - dbar * r) - x
        errs.append(e * e)
    errs = np.concatenate(errs)
    se = errs.std() / np.sqrt(errs.size)
    # BPSK at tau2=0.01 is below 1e-20 and the sample error is exactly zero
    assert abs(errs.mean() - psi_star(prior, tau2)) < 3 * se + 1e-15


def test_se_amp_examples():
    delta = 1 / 0.65
    st_ = se_amp(BPSK, MMSE(BPSK), delta, 0.01, T=3)
    assert st_.tau2[0] == pytest.approx(delta + 0.01)
    assert st_.v2[1] == pytest.approx(mmse_b(BPSK, delta + 0.01))
    assert st_.tau2[1] == pytest.approx(delta * st_.v2[1] + 0.01)
    p = se_amp(BPSK, MMSE(BPSK), 2.0, 0.01, T=1, variant="partial")
    assert p.tau2[0] == pytest.approx(1.01)
    with pytest.raises(ValueError):
        se_amp(BPSK, MMSE(BPSK), 0.5, 0.01)
    with pytest.raises(ValueError):
        se_amp(BPSK, MMSE(BPSK), 2.0, 0.01, variant="other")


@pytest.mark.parametrize("prior,delta,s2", [(BPSK, 1 / 0.65, 10 ** -1.4), (BG, 1 / 0.7, 1e-4)])
def test_amp_and_oamp_agree_on_iid(prior, delta, s2):
    amp = se_amp(prior, MMSE(prior), delta, s2, T=200)
    oamp = run_se_oamp(SpectralModel.iid_gaussian(delta), prior, le=LMMSE, sigma2=s2, T=200)
    assert amp.mse_out[-1] == pytest.approx(oamp.mse_out[-1], rel=0.01)


def test_fixed_point_examples():
    # identity spectrum: Phi* is sigma2 whatever v2 is
    st_ = fixed_point(IDENTITY, BPSK, 0.1)
    v2, tau2 = st_.fixed_point
    assert tau2 == pytest.approx(0.1)
    assert v2 == pytest.approx(psi_star(BPSK, 0.1), rel=1e-10)
    # noiseless and square: exact recovery in one step
    st_ = fixed_point(IDENTITY, BG, 0.0)
    assert st_.v2[-1] == 0.0 and st_.converged


def test_run_se_oamp_optimal_equals_lmmse_on_iid():
    spec = SpectralModel.iid_gaussian(2.0)
    a = run_se_oamp(spec, BG, le=OPTIMAL, sigma2=1e-3, T=20)
    b = run_se_oamp(spec, BG, le=LMMSE, sigma2=1e-3, T=20)
    np.testing.assert_allclose(a.mse_out, b.mse_out, rtol=1e-10)
    with pytest.raises(ValueError):
        run_se_oamp(spec, BG, le="ZF")


def test_run_se_oamp_fixed_c_soft_threshold():
    spec = SpectralModel.iid_gaussian(1.5)
    st_ = run_se_oamp(spec, BG, le=MF, df=DFDenoiser(SoftThreshold(), C=2.0),
                      out=SoftThreshold(), sigma2=1e-3, T=10)
    assert st_.status == "ok"
    assert len(st_.mse_out) == 10


def test_se_accuracy_and_padding():
    assert se_accuracy(2.0, 1.5) == pytest.approx(0.25)
    np.testing.assert_allclose(se_accuracy([1.0, 4.0], [1.0, 2.0]), [0.0, 0.5])
    s = SEState(v2=[1.0, 0.5])
    assert s.padded("v2", 4).tolist() == [1.0, 0.5, 0.5, 0.5]


@pytest.mark.parametrize("z", [-0.05, -0.3, -0.8])
def test_r_transform_point_mass_and_marchenko_pastur(z):
    assert r_transform(IDENTITY, z) == pytest.approx(1.0, rel=1e-10)
    for delta in (1.0, 2.0, 1 / 0.65):
        assert r_transform(SpectralModel.iid_gaussian(delta), z) == pytest.approx(
            1.0 / (1.0 - delta * z), rel=1e-10)
    with pytest.raises(ValueError):
        r_transform(IDENTITY, 0.1)


@pytest.mark.parametrize("spec", [
    SpectralModel.iid_gaussian(2.0),
    SpectralModel.partial_orthogonal(1 / 0.35),
    SpectralModel.from_matrix(sample_matrix(EnsembleSpec.geometric(5.0), 250, 500,
                                            np.random.default_rng(8))),
])
def test_fixed_point_satisfies_r_transform_identity(spec):
    s2 = 1e-2
    fp = fixed_point(spec, BG, s2).fixed_point
    assert r_transform_residual(spec, fp, BG, s2) < 1e-6
    assert r_transform_residual(spec, (fp[0], 2 * fp[1]), BG, s2) > 1e-3
    with pytest.raises(ValueError):
        r_transform_residual(spec, fp, BG, 0.0)


def test_spectral_model_validation():
    with pytest.raises(ValueError):
        SpectralModel()
    with pytest.raises(ValueError):
        SpectralModel.empirical(np.array([-1.0]))
    assert SpectralModel.iid_gaussian(2.0).mean_lambda2 == 1.0


@given(st.floats(1e-4, 10), st.floats(1e-6, 1), st.floats(1.01, 5))
def test_phi_star_bounds_property(v2, s2, delta):
    spec = SpectralModel.iid_gaussian(delta)
    star = phi_star(spec, v2, s2)
    assert 0 < star <= phi_closed_form(MF, delta, v2, s2) * (1 + 1e-10)
    assert mmse_a(spec, v2, s2) <= v2


@pytest.mark.parametrize("spec", [
    IDENTITY,
    SpectralModel.iid_gaussian(2.0),
    SpectralModel.partial_orthogonal(1 / 0.35),
    SpectralModel.from_matrix(sample_matrix(EnsembleSpec.geometric(10.0), 100, 300,
                                            np.random.default_rng(9))),
])
def test_mmse_a_jensen_derivative(spec):
    # d mmse_A / d v2 >= (mmse_A / v2)^2
    for s2 in (1e-4, 1e-2, 1.0):
        for v2 in np.logspace(-4, 1, 25):
            h = 1e-4 * v2
            d = (mmse_a(spec, v2 + h, s2) - mmse_a(spec, v2 - h, s2)) / (2 * h)
            assert d >= (mmse_a(spec, v2, s2) / v2) ** 2 * (1 - 1e-4)


def test_se_oamp_noiseless_identity():
    st_ = run_se_oamp(IDENTITY, BG, sigma2=0.0, T=5)
    assert st_.tau2[0] == 0.0 and st_.v2[1] == 0.0 and st_.converged
