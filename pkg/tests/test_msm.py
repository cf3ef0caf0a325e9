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
def msm():
    from amlest import msm

    return msm


@fixture(scope="module")
def RngStream():
    from amlest.numerics import RngStream

    return RngStream


@fixture(scope="module")
def returns(msm, RngStream):
    params = msm.MsmParams(1.4, 0.5, 3.0, 0.01, 3)
    return msm.msm_simulate(params, 300, RngStream(17, 0))


def test_params_validation(msm):
    for args in (
        (2.0, 0.5, 2.0, 0.01, 2),
        (1.5, 0.0, 2.0, 0.01, 2),
        (1.5, 0.5, 0.5, 0.01, 2),
        (1.5, 0.5, 2.0, 0.0, 2),
        (1.5, 0.5, 2.0, 0.01, 0),
        (1.5, 0.5, 2.0, 0.01, 2.5),
    ):
        try:
            msm.MsmParams(*args)
            assert False, f"MsmParams{args} should be rejected"
        except ValueError:
            assert True


def test_params_vector(np, msm):
    params = msm.MsmParams.from_vector([1.5, 0.4, 2.0, 0.01, 3.0], mu=0.1)
    assert params.k_bar == 3 and params.mu == 0.1
    assert np.allclose(params.gammas(), [0.1, 0.2, 0.4])
    assert params.to_vector().tolist() == [1.5, 0.4, 2.0, 0.01, 3.0]


def test_state_space(torch, msm):
    space = msm.MsmStateSpace(3, 1.5)
    assert space.d == 8
    assert tuple(space.states.shape) == (8, 3)
    assert abs(float(space.g_values.mean()) - 1.0) < 1e-12
    assert abs(float(space.stationary.sum()) - 1.0) < 1e-12
    assert float(space.g_values[0]) == 1.5**3


def test_transition_rows(torch, msm):
    for k_bar in (1, 3, 6):
        A = msm.msm_transition(k_bar, 0.7, 2.5)
        assert tuple(A.shape) == (1 << k_bar, 1 << k_bar)
        assert torch.allclose(A.sum(dim=1), torch.ones(1 << k_bar, dtype=A.dtype))
        assert torch.allclose(A, A.T)


def test_transition_one_component(msm):
    A = msm.msm_transition(1, 0.6, 4.0).tolist()
    assert abs(A[0][0] - 0.7) < 1e-15 and abs(A[0][1] - 0.3) < 1e-15


def test_transition_two_components(msm):
    gamma_bar, b = 0.5, 3.0
    gammas = (gamma_bar / b, gamma_bar)
    A = msm.msm_transition(2, gamma_bar, b)
    for i in range(4):
        for j in range(4):
            expected = 1.0
            for k, gamma in enumerate(gammas):
                same = ((i >> (1 - k)) & 1) == ((j >> (1 - k)) & 1)
                expected *= (1.0 - gamma) * same + gamma / 2.0
            assert abs(float(A[i, j]) - expected) < 1e-14


def test_dense_guard(amlest, msm):
    with raises(amlest.DenseGuardError) as info:
        msm.msm_transition(15, 0.5, 2.0)
    assert info.value.k_bar == 15
    with raises(amlest.DenseGuardError):
        msm.msm_loglik(msm.MsmParams(1.5, 0.5, 2.0, 1.0, 15), [0.1, -0.2])


def test_loglik_constant_volatility(np, msm, returns):
    from scipy.stats import norm

    params = msm.MsmParams(1.0, 0.5, 3.0, 0.012, 4)
    expected = float(norm.logpdf(returns.numpy(), scale=0.012).mean())
    assert abs(msm.msm_loglik(params, returns) - expected) < 1e-10


def test_loglik_one_component(np, msm, returns):
    from scipy.stats import norm

    m0, gamma, sigma = 1.6, 0.3, 0.01
    A = np.array([[1 - gamma / 2, gamma / 2], [gamma / 2, 1 - gamma / 2]])
    scales = sigma * np.sqrt([m0, 2.0 - m0])
    pi = np.array([0.5, 0.5])
    total = 0.0
    for r in returns.numpy():
        joint = (pi @ A) * norm.pdf(r, scale=scales)
        total += math.log(joint.sum())
        pi = joint / joint.sum()
    params = msm.MsmParams(m0, gamma, 2.0, sigma, 1)
    assert abs(msm.msm_loglik(params, returns) - total / returns.numel()) < 1e-10


def test_dense_matches_factored(msm, returns):
    params = msm.MsmParams(1.5, 0.6, 2.5, 0.01, 4)
    dense = msm.msm_loglik(params, returns, dense=True)
    factored = msm.msm_loglik(params, returns, dense=False)
    assert abs(dense - factored) < 1e-10


def test_loglik_bad_returns(msm):
    params = msm.MsmParams(1.5, 0.6, 2.5, 0.01, 2)
    with raises(ValueError):
        msm.msm_loglik(params, [])
    with raises(ValueError):
        msm.msm_loglik(params, [0.1, math.nan])


def test_pseudo_score_increment(msm, returns):
    zeta = [1.5, 0.6, 2.5, 0.01]
    score = msm.msm_pseudo_score(zeta, returns)
    two = msm.msm_loglik(msm.MsmParams(*zeta, 2), returns)
    three = msm.msm_loglik(msm.MsmParams(*zeta, 3), returns)
    assert score.shape == (5,)
    assert abs(score[4] - (three - two)) < 1e-12


def test_pseudo_score_gradient(np, msm, returns):
    from amlest.numerics import central_diff_gradient

    zeta = np.array([1.5, 0.6, 2.5, 0.01])

    def loglik(v):
        return msm.msm_loglik(msm.MsmParams(*v, 2), returns)

    gradient = central_diff_gradient(loglik, zeta, step=1e-4)
    score = msm.msm_pseudo_score(zeta, returns)
    assert np.allclose(score[:4], gradient, rtol=1e-6, atol=1e-8)


def test_simulate_states(np, msm, RngStream):
    params = msm.MsmParams(1.5, 0.5, 2.0, 0.01, 2)
    T = 20_000
    r, states = msm.msm_simulate(params, T, RngStream(3, 0), return_states=True)
    states = states.numpy()
    assert r.shape == (T,) and states.shape == (T, 2)
    assert set(np.unique(states)) <= {0.5, 1.5}
    assert abs((states == 1.5).mean() - 0.5) < 0.03
    for k, gamma in enumerate(params.gammas()):
        switches = (states[1:, k] != states[:-1, k]).mean()
        assert abs(switches - gamma / 2.0) < 0.01


def test_switch_draws_resolve_slow_components(np, torch, msm, RngStream):
    draws = msm.MsmModel(k_bar_max=18).draw_innovations(RngStream(5, 0), 4000)
    switch = draws["switch"]
    assert switch.shape == (4000, 18) and switch.dtype == torch.float64
    # slowest switch probability at k_bar = 18, b = 3 sits below the float32 grid
    gamma_1 = 0.5 * 3.0**-17
    assert gamma_1 < 2.0**-24
    assert bool(((switch * 2**24) % 1.0 != 0.0).any())


def test_simulate_variance(msm, RngStream):
    params = msm.MsmParams(1.3, 0.5, 2.0, 0.02, 3, mu=0.001)
    r = msm.msm_simulate(params, 20_000, RngStream(4, 0))
    e = r - 0.001
    assert abs(float((e * e).mean()) / 0.02**2 - 1.0) < 0.15
    assert abs(float(r.mean()) - 0.001) < 4.0 * 0.02 / math.sqrt(20_000)


def test_simulate_reproducible(torch, msm, RngStream):
    params = msm.MsmParams(1.3, 0.5, 2.0, 0.02, 3)
    a = msm.msm_simulate(params, 50, RngStream(4, 7))
    b = msm.msm_simulate(params, 50, RngStream(4, 7))
    assert torch.equal(a, b)


def test_model_layout(msm):
    model = msm.MsmModel(k_bar_max=6)
    assert model.names == ("m0", "gamma_bar", "b", "sigma", "k_bar")
    assert model.fixed_values == (2.0,)
    assert model.upper[-1] == 6.0
    with raises(ValueError):
        msm.MsmModel(k_bar_max=2)


def test_batched_scores_match_paths(np, msm, returns):
    from amlest.core import Dataset, ModelContract, SimBank

    model = msm.MsmModel(k_bar_max=5)
    data = Dataset(returns[:200])
    bank = SimBank.create(2, 0, 3, 200)
    theta = np.array([1.4, 0.5, 3.0, 0.01, 3.0])
    beta = np.array([1.5, 0.6, 2.5, 0.012, 2.0])
    batched = model.simulated_scores(theta, beta, bank, data)
    per_path = ModelContract.simulated_scores(model, theta, beta, bank, data)
    assert batched.shape == (3, 5)
    assert np.allclose(batched, per_path, rtol=1e-8, atol=1e-8)


def test_aml_fit_short_series(msm):
    from amlest.numerics import OptimConfig

    with raises(ValueError):
        msm.msm_aml_fit([0.01] * 50, 2, OptimConfig())


def test_particle_filter_constant_volatility(torch, msm, RngStream):
    sigma = 0.01
    params = msm.MsmParams(1.0, 0.5, 2.0, sigma, 3)
    r = sigma * RngStream(8, 1).standard_normal(20)
    out = msm.msm_particle_filter(params, r, 2000, RngStream(8, 2), alphas=(0.05,))
    assert tuple(out.var.shape) == (20, 1)
    var = out.var[:, 0] / sigma
    assert abs(float(var.mean()) - 1.6449) < 0.1
    assert float((var - 1.6449).abs().max()) < 0.25
    assert bool((out.es[:, 0] <= -out.var[:, 0]).all())
    # equal weights when the volatility is constant
    assert torch.allclose(out.ess, torch.full_like(out.ess, 2000.0))


def test_particle_filter_checks(msm, RngStream):
    params = msm.MsmParams(1.5, 0.5, 2.0, 0.01, 3)
    with raises(ValueError):
        msm.msm_particle_filter(params, [0.0] * 5, 999, RngStream(1, 1))
    with raises(ValueError):
        msm.msm_particle_filter(
            params, [0.0] * 5, 1000, RngStream(1, 1), alphas=(1.0,)
        )


def test_es_backtest_fit(np, msm, RngStream):
    gen = RngStream(9, 9).generator()
    x = -0.02 - 0.03 * gen.random(500)
    y = 0.001 + 0.9 * x + 0.002 * gen.standard_normal(500)
    fit = msm.es_backtest(y, x)
    assert fit.n == 500
    assert abs(fit.slope - 0.9) < 4.0 * fit.se_slope
    assert abs(fit.intercept - 0.001) < 4.0 * fit.se_intercept
    assert 0.0 < fit.r_squared < 1.0
    assert fit.wald > 0.0 and 0.0 <= fit.p_value < 0.05
    assert set(fit.to_dict()) >= {"slope", "intercept", "p_value"}


def test_es_backtest_checks(amlest, np, msm):
    x = -np.linspace(0.02, 0.05, 12)
    with raises(ValueError):
        msm.es_backtest(x[:9], x[:9])
    with raises(ValueError):
        msm.es_backtest(x, x[:11])
    with raises(amlest.DegenerateRegressorError):
        msm.es_backtest(x, np.full(12, -0.03))
