import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surge.landscape import (
    MLP, Dataset, ObjectiveFunction, analytic_potential, check_gradient, constant_objective,
    critical_points, critical_values, cross_entropy_objective, gaussian_objective, load_params,
    mse_objective, save_params, synthetic_1d_dataset, target_function,
)
from surge.series_core import InvalidInputError

KINDS = ["quadratic", "quartic", "double_well", "tilted_double_well"]


# dataset

def test_target_function_values():
    assert target_function(0.0) == pytest.approx(0.5)
    assert target_function(np.pi) == pytest.approx(-0.5 + 0.1 * np.pi**2, abs=1e-12)
    assert target_function(np.pi) == pytest.approx(0.4870, abs=1e-4)


def test_synthetic_dataset_is_seeded():
    a = synthetic_1d_dataset(32, seed=5)
    b = synthetic_1d_dataset(32, seed=5)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.size == 32 and a.x.min() >= -2 and a.x.max() <= 2
    np.testing.assert_allclose(a.y[:, 0], target_function(a.x[:, 0]))


def test_dataset_csv_round_trip(tmp_path):
    d = synthetic_1d_dataset(10, seed=1)
    d.to_csv(tmp_path / "d.csv")
    e = Dataset.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(d.x, e.x)
    np.testing.assert_array_equal(d.y, e.y)


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        Dataset([0.0, 1.0], [1.0])
    with pytest.raises(InvalidInputError):
        Dataset([0.0, np.nan], [1.0, 2.0])


# MLP

def test_regression_topology_parameter_count():
    assert MLP((1, 12, 10, 8, 1)).n_params == 24 + 130 + 88 + 9


def test_flatten_round_trip():
    m = MLP((2, 4, 3))
    p = m.init(3)
    np.testing.assert_array_equal(m.flatten(m.unflatten(p)), p)


def test_forward_deterministic_and_batched():
    m = MLP((1, 5, 1))
    x = np.linspace(-1, 1, 7)[:, None]
    ps = np.stack([m.init(s) for s in range(3)])
    out = m.forward_batch(ps, x)
    for i, p in enumerate(ps):
        np.testing.assert_allclose(out[i], m.forward(p, x)[0], rtol=1e-14)
        np.testing.assert_array_equal(m.forward(p, x)[0], m.forward(p, x)[0])


def test_wrong_parameter_count():
    with pytest.raises(InvalidInputError):
        MLP((1, 2, 1)).unflatten(np.zeros(3))


def test_params_file_round_trip(tmp_path):
    m = MLP((1, 3, 1))
    p = m.init(0)
    save_params(tmp_path / "p.bin", p, m.layer_sizes)
    q, sizes = load_params(tmp_path / "p.bin")
    np.testing.assert_array_equal(p, q)
    assert sizes == m.layer_sizes


# losses

def test_mse_scalar_model():
    # f(x) = W x + b evaluated at x = 0 is the bias alone
    obj = mse_objective(MLP((1, 1)), Dataset([0.0], [1.0]))
    assert obj.value([0.0, 0.0]) == pytest.approx(0.5)
    np.testing.assert_allclose(obj.grad([0.0, 0.0]), [0.0, -1.0])


def test_mse_perfect_fit():
    x = np.linspace(-1, 1, 5)
    obj = mse_objective(MLP((1, 1)), Dataset(x, 2 * x + 1))
    assert obj.value([2.0, 1.0]) == 0.0


def test_mse_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        mse_objective(MLP((1, 2)), Dataset([0.0], [1.0]))


def test_cross_entropy_uniform_logits():
    m = MLP((1, 3))
    obj = cross_entropy_objective(m, Dataset([0.1, 0.2, 0.3, 0.4], np.array([0, 1, 2, 1])))
    assert obj.value(np.zeros(m.n_params)) == pytest.approx(4 * np.log(3))


def test_cross_entropy_large_margin():
    m = MLP((1, 2))
    obj = cross_entropy_objective(m, Dataset([0.0], np.array([1])))
    p = np.zeros(m.n_params)
    p[-1] = 50.0  # bias of class 1
    assert obj.value(p) < 1e-20


def test_cross_entropy_label_out_of_range():
    with pytest.raises(InvalidInputError):
        cross_entropy_objective(MLP((1, 2)), Dataset([0.0], np.array([2])))


def test_mlp_gradient_checks():
    rng = np.random.default_rng(0)
    m = MLP((1, 12, 10, 8, 1))
    reg = mse_objective(m, synthetic_1d_dataset(16))
    c = MLP((2, 6, 3))
    x = rng.normal(size=(12, 2))
    cls = cross_entropy_objective(c, Dataset(x, rng.integers(0, 3, 12)))
    for obj, model in ((reg, m), (cls, c)):
        for _ in range(10):
            theta = model.init(int(rng.integers(1 << 30))) + 0.3 * rng.normal(size=model.n_params)
            assert check_gradient(obj, theta) < 1e-4


def test_batch_grad_matches_single():
    m = MLP((1, 4, 3, 1))
    obj = mse_objective(m, synthetic_1d_dataset(8))
    ps = np.stack([m.init(s) for s in range(4)])
    np.testing.assert_allclose(obj.batch_grad(ps), np.stack([obj.grad(p) for p in ps]), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(obj.batch(ps), [obj.value(p) for p in ps], rtol=1e-13)


# analytic potentials

def test_quartic_values():
    q = analytic_potential("quartic")
    assert q.value([1.0]) == 2.0
    assert q.grad([1.0])[0] == 6.0


@pytest.mark.parametrize("x", [-1.0, 1.0])
def test_double_well_minima(x):
    d = analytic_potential("double_well")
    assert d.value([x]) == 0.0 and d.grad([x])[0] == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_potential_gradient_checks(kind, rng):
    obj = analytic_potential(kind)
    for x in rng.uniform(-2, 2, size=10):
        assert check_gradient(obj, [x]) < 1e-4


def test_unknown_potential():
    with pytest.raises(InvalidInputError):
        analytic_potential("sextic")


def test_critical_values():
    np.testing.assert_allclose(critical_values(analytic_potential("quadratic")), [0.0], atol=1e-15)
    np.testing.assert_allclose(critical_values(analytic_potential("double_well")), [0.0, 0.0, 1.0], atol=1e-15)


def test_tilted_critical_values_golden():
    # roots of 4x^3 - 4x + 0.3 fed back through (x^2-1)^2 + 0.3x + 1
    np.testing.assert_allclose(critical_values(analytic_potential("tilted_double_well")),
                               [0.694571516256084, 1.2941464810282628, 2.011282002715653], rtol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_critical_points_are_stationary(kind):
    obj = analytic_potential(kind)
    for x in critical_points(obj):
        assert abs(obj.grad([x])[0]) < 1e-10


def test_gaussian_and_constant_objectives(rng):
    g = gaussian_objective(3)
    th = rng.normal(size=3)
    assert g.value(th) == pytest.approx(0.5 * th @ th)
    assert check_gradient(g, th) < 1e-6
    c = constant_objective(2.0, 2, bounds=([-1, -1], [1, 1]))
    assert c.value([0.5, 0.5]) == 2.0
    assert c.value([2.0, 0.0]) == np.inf
    np.testing.assert_array_equal(c.batch(np.array([[0, 0], [3, 0]])), [2.0, np.inf])


def test_objective_needs_positive_dim():
    with pytest.raises(InvalidInputError):
        ObjectiveFunction(0, lambda t: 0.0, lambda t: t)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_batch_matches_value(xs):
    obj = analytic_potential("tilted_double_well")
    np.testing.assert_allclose(obj.batch(np.array(xs)[:, None]), [obj.value([x]) for x in xs], rtol=1e-14)
