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
def core():
    from amlest import core

    return core


@fixture(scope="module")
def cfg():
    from amlest.numerics import OptimConfig

    return OptimConfig()


@fixture(scope="module")
def location():
    from amlest.reference import GaussianLocationModel

    return GaussianLocationModel()


@fixture(scope="module")
def stepped(core, np):
    class Stepped(core.ModelContract):
        """Simulated score ``k^2`` for an integer ``k``."""

        names = ("k",)
        constraint_mask = (False,)
        fixed_values = ()
        integer_mask = (True,)
        lower = (1.0,)
        upper = (5.0,)

        def loglik_constrained(self, beta, data):
            return 0.0

        def score_contributions(self, beta, data):
            return data.y[:, None]

        def draw_innovations(self, stream, T, data=None):
            return {"nu": stream.standard_normal(T)}

        def simulate_from(self, theta, innovations, data=None):
            return core.Dataset(innovations["nu"])

        def simulated_scores(self, theta, beta, bank, data):
            return np.full((bank.H, 1), float(theta[0]) ** 2)

    return Stepped()


def _vec(values):
    import numpy

    return numpy.atleast_1d(numpy.asarray(values, dtype=float))


def test_param_vector(np, core):
    pv = core.ParamVector(
        ("a", "b", "c"), [1.0, 0.0, 2.0], [False, True, False], [0.0], [False] * 3
    )
    assert (pv.p, pv.p1, pv.p2) == (3, 2, 1)
    assert pv.in_constrained_set()
    assert pv.free_values().tolist() == [1.0, 2.0]
    moved = pv.with_values([1.0, 0.5, 2.0])
    assert not moved.in_constrained_set()
    assert moved.with_free(np.array([3.0, 4.0])).values.tolist() == [3.0, 0.0, 4.0]
    assert pv.as_dict() == {"a": 1.0, "b": 0.0, "c": 2.0}


def test_param_vector_lengths(core):
    try:
        core.ParamVector(("a", "b"), [1.0], [False, False], [], [False, False])
        assert False, "ParamVector should reject mismatched lengths"
    except ValueError:
        assert True
    with raises(ValueError):
        core.ParamVector(("a",), [1.0], [True], [], [False])


def test_param_from_dict(location):
    assert location.param_from_dict({"theta": 1.5}).values.tolist() == [1.5]
    with raises(KeyError):
        location.param_from_dict({"mu": 1.5})


def test_check_bounds(np):
    from amlest.stable import StableModel

    model = StableModel()
    model.check_bounds(np.array([1.5, 0.0, 1.0, 0.0]))
    with raises(ValueError):
        model.check_bounds(np.array([2.5, 0.0, 1.0, 0.0]))
    with raises(ValueError):
        model.check_bounds(np.array([1.5, 0.0, math.nan, 0.0]))


def test_simbank_streams(core):
    bank = core.SimBank.create(seed=4, replication=2, H=3, T=10)
    ids = [stream.stream_id for stream in bank.streams]
    assert ids == [(2 << 16) | 1, (2 << 16) | 2, (2 << 16) | 3]
    with raises(ValueError):
        core.SimBank(2, 10, (bank.streams[0], bank.streams[0]))
    with raises(ValueError):
        core.SimBank(0, 10, ())


def test_simbank_reuses_draws(core, location):
    bank = core.SimBank.create(seed=4, replication=0, H=2, T=10)
    first = bank.innovations(location)
    assert bank.innovations(location) is first
    assert tuple(bank.stacked(location)["nu"].shape) == (2, 10)


def test_synthetic_dataset_reproducible(torch, location):
    a = location.synthetic_dataset(_vec(0.3), 50, 9, 1)
    b = location.synthetic_dataset(_vec(0.3), 50, 9, 1)
    c = location.synthetic_dataset(_vec(0.3), 50, 9, 2)
    assert torch.equal(a.y, b.y)
    assert not torch.equal(a.y, c.y)


def test_integer_blending(np, core, stepped):
    bank = core.SimBank.create(seed=1, replication=0, H=3, T=5)
    data = core.Dataset(core.as_tensor(np.zeros(5)))
    scores = core.simulated_score_paths(stepped, np.array([2.25]), None, bank, data)
    assert scores.shape == (3, 1)
    assert np.allclose(scores, 0.75 * 4.0 + 0.25 * 9.0)
    exact = core.simulated_score_paths(stepped, np.array([3.0]), None, bank, data)
    assert np.allclose(exact, 9.0)


def test_score_weights(torch, core):
    contributions = torch.tensor([[1.0, 2.0], [3.0, 2.0]], dtype=torch.float64)
    weights = core.score_weights(contributions)
    assert weights.tolist() == [0.5, 1.0]


def test_constrained_fit_is_mean(np, core, location, cfg):
    y = core.as_tensor([1.2, 1.9, 1.7, 2.0, 1.7])
    beta = core.constrained_fit(location, core.Dataset(y), cfg)
    assert abs(beta.values[0] - 1.7) < 1e-5
    assert beta.in_constrained_set()


def test_constrained_fit_empty(core, location, cfg):
    with raises(ValueError):
        core.constrained_fit(location, core.Dataset(core.as_tensor([])), cfg)


def test_criterion_nonnegative(np, core, location):
    data = location.synthetic_dataset(_vec(0.0), 200, 3, 0)
    bank = core.SimBank.create(3, 0, 5, 200)
    beta = location.param_vector([float(data.y.mean())])
    for theta in (-1.0, 0.0, 0.4):
        value = core.aml_criterion(
            location, data, beta, location.param_vector([theta]), bank
        )
        assert value >= 0.0


def test_criterion_zero_on_own_path(np, core, location):
    bank = core.SimBank.create(5, 0, 1, 100)
    data = location.simulate(_vec(0.7), 100, bank.streams[0])
    beta = location.param_vector([float(data.y.mean())])
    value = core.aml_criterion(
        location, data, beta, location.param_vector([0.7]), bank
    )
    assert value < 1e-20


def test_criterion_rejects_unconstrained_beta(np, core):
    from amlest.tobit import TobitModel

    model = TobitModel(1, 1)
    data = model.synthetic_dataset(np.array([0.0, 0.0, 0.0, 1.0]), 30, 1, 0)
    bank = core.SimBank.create(1, 0, 2, 30)
    beta = model.param_vector([0.0, 0.0, 0.3, 1.0])
    try:
        core.aml_criterion(model, data, beta, beta, bank)
        assert False, "beta_hat outside the constrained set should fail"
    except ValueError:
        assert True


def test_solve_aml_location(np, core, location, cfg):
    T, H = 10_000, 10
    data = location.synthetic_dataset(_vec(0.5), T, 11, 0)
    bank = core.SimBank.create(11, 0, H, T)
    result = core.solve_aml(location, data, bank, cfg)
    nu_mean = float(bank.stacked(location)["nu"].mean())
    assert abs(result.theta_hat.values[0] - (float(data.y.mean()) - nu_mean)) < 1e-5
    assert abs(result.theta_hat.values[0] - 0.5) < 0.05
    assert result.converged
    assert (result.n_obs, result.H) == (T, H)
    assert result.criterion < 1e-10
    omega = result.omega_H
    assert abs(omega[0, 0] / (1.0 + 1.0 / H) - 1.0) < 0.05
    assert np.allclose(result.std_errors, np.sqrt(np.diag(omega) / T))


def test_variance_scales_with_H(np, core, location, cfg):
    T = 2000
    data = location.synthetic_dataset(_vec(0.0), T, 2, 0)
    omegas = []
    for H in (1, 1000):
        bank = core.SimBank.create(2, 0, H, T)
        omegas.append(core.solve_aml(location, data, bank, cfg).omega_H[0, 0])
    assert abs(omegas[0] / omegas[1] - 2.0 / 1.001) < 0.02


def test_variance_symmetric_psd(np, core, cfg):
    from amlest.tobit import TobitModel

    model = TobitModel(2, 2)
    theta = np.array([0.5, 1.0, 0.0, 0.5, 0.0, 1.0])
    data = model.synthetic_dataset(theta, 500, 8, 0)
    bank = core.SimBank.create(8, 0, 5, 500)
    beta = core.constrained_fit(model, data, cfg)
    omega = core.asymptotic_variance(
        model, data, model.param_vector(theta), beta, bank, cfg
    )
    assert omega.shape == (6, 6)
    assert np.allclose(omega, omega.T)
    assert np.linalg.eigvalsh(omega).min() >= -1e-10


def test_result_to_dict(core, location, cfg):
    data = location.synthetic_dataset(_vec(0.0), 100, 1, 0)
    bank = core.SimBank.create(1, 0, 2, 100)
    out = core.solve_aml(location, data, bank, cfg).to_dict()
    assert set(out["theta_hat"]) == {"theta"}
    assert set(out["std_errors"]) == {"theta"}
    assert out["H"] == 2


def test_bootstrap_needs_two(core, location, cfg):
    bank = core.SimBank.create(1, 0, 2, 10)
    with raises(ValueError):
        core.parametric_bootstrap(
            location, location.param_vector([0.0]), 10, 1, bank, cfg
        )


def test_bootstrap_location(np, core, location, cfg):
    T, H = 1000, 10
    bank = core.SimBank.create(6, 0, H, T)
    se = core.parametric_bootstrap(
        location, location.param_vector([0.0]), T, 30, bank, cfg
    )
    expected = math.sqrt((1.0 + 1.0 / H) / T)
    assert se.shape == (1,)
    assert abs(se[0] / expected - 1.0) < 0.35


def test_read_table_bad_value(amlest, core, tmp_path):
    path = tmp_path / "returns.csv"
    path.write_text("r\n0.1\nabc\n")
    with raises(amlest.DataParseError) as info:
        core.read_table(str(path))
    assert info.value.line == 3
    assert info.value.path == str(path)


def test_read_table_empty(amlest, core, tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with raises(amlest.DataParseError):
        core.read_table(str(path))
    path.write_text("r\n")
    with raises(amlest.DataParseError):
        core.read_table(str(path))


def test_read_table_missing_column(amlest, core, tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("a,b\n1,2\n")
    with raises(amlest.DataParseError):
        core.read_table(str(path), ["a", "c"])


def test_read_returns_demean(core, tmp_path):
    path = tmp_path / "returns.csv"
    path.write_text("r\n0.1\n0.3\n-0.1\n")
    data = core.read_returns(str(path), demean=True)
    assert data.n == 3
    assert abs(float(data.y.mean())) < 1e-15
