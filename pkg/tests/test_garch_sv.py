import math

from pytest import fixture, raises


@fixture(scope="module")
def np():
    import numpy

    return numpy


@fixture(scope="module")
def torch():
    import torch

    return torch


@fixture(scope="module")
def amlest():
    import amlest

    return amlest


@fixture(scope="module")
def gsv():
    from amlest import garch_sv

    return garch_sv


@fixture(scope="module")
def RngStream():
    from amlest.numerics import RngStream

    return RngStream


@fixture(scope="module")
def returns(gsv, RngStream):
    params = gsv.GsvParams(0.01, 0.1, 0.2, 0.02)
    r, _ = gsv.gsv_simulate(params, 2000, RngStream(41, 0))
    return r


def _arch_loglik(np, r, mu, omega, alpha):
    from scipy.stats import norm

    e = r - mu
    var = omega + alpha * e[:-1] ** 2
    return float(norm.logpdf(e[1:], scale=np.sqrt(var)).mean())


def test_params_validation(gsv):
    for args in (
        (0.0, 0.0, 0.2, 0.1),
        (0.0, 0.1, 1.0, 0.1),
        (0.0, 0.1, 0.2, -0.1),
        (0.0, 0.1, 0.2, 0.1, 1.0),
    ):
        try:
            gsv.GsvParams(*args)
            assert False, f"GsvParams{args} should be rejected"
        except ValueError:
            assert True


def test_small_varpi_is_arch(np, amlest, gsv, returns):
    from amlest.numerics import QuadratureRule

    r = returns.numpy()[:200]
    rule = QuadratureRule(kind=amlest.QuadratureKind.GaussHermite)
    value = gsv.gsv_loglik_constrained([0.01, 0.1, 0.2, 1e-6], r, rule)
    assert abs(value - _arch_loglik(np, r, 0.01, 0.1, 0.2)) < 1e-6


def test_adaptive_matches_gauss_hermite(amlest, gsv, returns):
    from amlest.numerics import QuadratureRule

    r = returns[:30]
    zeta = [0.01, 0.1, 0.2, 0.02]
    adaptive = gsv.gsv_loglik_constrained(zeta, r)
    hermite = gsv.gsv_loglik_constrained(
        zeta, r, QuadratureRule(kind=amlest.QuadratureKind.GaussHermite)
    )
    assert abs(adaptive - hermite) < 1e-6


def test_loglik_short_series(gsv):
    with raises(ValueError):
        gsv.gsv_loglik_constrained([0.0, 0.1, 0.2, 0.02], [0.1])


def test_simulate_arch_regression(np, gsv, RngStream):
    import statsmodels.api as sm

    params = gsv.GsvParams(0.0, 0.1, 0.2, 0.0)
    r, hits = gsv.gsv_simulate(params, 20_000, RngStream(42, 0))
    e2 = r.numpy() ** 2
    fit = sm.OLS(e2[1:], sm.add_constant(e2[:-1])).fit()
    assert hits == 0
    assert abs(fit.params[1] - 0.2) < 0.07
    assert abs(float(r.mean())) < 4.0 * math.sqrt(0.125 / 20_000)


def test_simulate_floor_rarely_hit(gsv, RngStream):
    params = gsv.GsvParams(0.0, 0.1, 0.2, 0.02)
    r, hits = gsv.gsv_simulate(params, 5000, RngStream(43, 0))
    assert hits < 50
    assert r.shape == (5000,)


def test_fit_arch1(np, torch, gsv, RngStream):
    params = gsv.GsvParams(0.0, 0.1, 0.2, 0.0)
    r, _ = gsv.gsv_simulate(params, 5000, RngStream(44, 0))
    start = torch.tensor([[0.05, 0.2, 0.05]], dtype=torch.float64)
    fitted = gsv.fit_arch1(r[None, :], start)[0].numpy()
    x = r.numpy()
    assert _arch_loglik(np, x, *fitted) >= _arch_loglik(np, x, 0.05, 0.2, 0.05)
    assert abs(fitted[2] - 0.2) < 0.06
    assert abs(fitted[1] - 0.1) < 0.02


def test_filter_plugin(torch, gsv, returns):
    filtered = gsv.gsv_filter_plugin([0.01, 0.1, 0.2, 0.02], returns)
    assert filtered.var.shape == (returns.numel() - 1,)
    assert bool((filtered.var > 0).all())
    assert torch.allclose(filtered.inv_var * filtered.var, torch.ones_like(filtered.var))
    assert torch.allclose(filtered.inv_var2, filtered.inv_var**2)
    assert filtered.arch.shape == (3,)


def test_pseudo_score_mean_entry(np, gsv, returns):
    zeta = np.array([0.01, 0.1, 0.2, 0.02])
    filtered = gsv.gsv_filter_plugin(zeta, returns)
    score = gsv.gsv_pseudo_score(zeta, returns, filtered)
    e = returns[1:] - 0.01
    assert score.shape == (5,)
    assert abs(score[0] - float((filtered.inv_var * e).mean())) < 1e-12


def test_pseudo_score_without_correction(np, torch, gsv, returns):
    zeta = np.array([0.01, 0.1, 0.2, 0.02])
    e_lag = returns[:-1] - 0.01
    var = 0.1 + 0.2 * e_lag**2
    exact = gsv.FilteredVol(var, 1.0 / var, var**-2, zeta[:3])
    score = gsv.gsv_pseudo_score(zeta, returns, exact)
    assert abs(score[3] + 1.0 / 0.02) < 1e-8
    assert abs(score[4]) < 1e-12


def test_pseudo_score_varpi_is_quadratic(np, gsv, returns):
    zeta = np.array([0.01, 0.1, 0.2, 0.02])
    e_lag = returns[:-1] - 0.01
    var = 0.1 + 0.2 * e_lag**2 + 0.01
    shifted = gsv.FilteredVol(var, 1.0 / var, var**-2, zeta[:3])
    score = gsv.gsv_pseudo_score(zeta, returns, shifted)
    assert abs(score[3] - (-1.0 / 0.02 + 0.01**2 / 0.02**3)) < 1e-8
    n = returns.numel() - 1
    assert abs(score[4] - 0.01**2 / 0.02**2 * (n - 1) / n) < 1e-10


def test_increment_matches_monte_carlo(np, gsv, RngStream):
    from scipy.stats import norm

    mu, omega, alpha, varpi = 0.0, 0.1, 0.2, 0.05
    r = np.array([0.5, -0.4])
    increment = math.exp(gsv.gsv_loglik_constrained([mu, omega, alpha, varpi], r))
    k = omega + alpha * (r[0] - mu) ** 2
    eta = varpi * RngStream(45, 0).generator().standard_normal(1_000_000)
    values = norm.pdf(r[1], loc=mu, scale=np.sqrt(np.maximum(k + eta, 1e-8)))
    se = values.std(ddof=1) / math.sqrt(values.size)
    assert abs(increment - values.mean()) < 3.0 * se


def test_pseudo_score_rho_sign(np, gsv, RngStream):
    from amlest.core import Dataset, constrained_fit
    from amlest.numerics import OptimConfig

    model = gsv.GarchSvModel()
    params = gsv.GsvParams(0.0, 0.1, 0.2, 0.02, 0.5)
    rho_entries = []
    for rep in range(12):
        r, _ = gsv.gsv_simulate(params, 1000, RngStream(46, rep))
        data = Dataset(r)
        beta = constrained_fit(model, data, OptimConfig())
        assert beta.values[4] == 0.0
        rho_entries.append(gsv.gsv_pseudo_score(beta.values, r)[4])
    assert np.mean(rho_entries) > 0.0


def test_model_defaults(amlest, gsv):
    model = gsv.GarchSvModel()
    assert model.rule.kind is amlest.QuadratureKind.GaussHermite
    assert model.fixed_values == (0.0,)
    with raises(ValueError):
        gsv.GarchSvModel(floor=0.0)


def test_model_batch_loglik(np, gsv, returns):
    from amlest.core import Dataset

    model = gsv.GarchSvModel()
    data = Dataset(returns[:300])
    betas = np.array([[0.01, 0.1, 0.2, 0.02, 0.0], [0.0, 0.12, 0.15, 0.03, 0.0]])
    batch = model.loglik_constrained_batch(betas, data)
    single = [model.loglik_constrained(beta, data) for beta in betas]
    assert np.allclose(batch, single, rtol=0, atol=1e-12)


def test_initial_beta(np, gsv, returns):
    from amlest.core import Dataset

    start = gsv.GarchSvModel().initial_beta(Dataset(returns))
    assert start.shape == (5,) and start[4] == 0.0
    assert start[1] > 0 and 0.0 <= start[2] < 1.0 and start[3] > 0
