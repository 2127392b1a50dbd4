import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surge import landscape as ls
from surge.optimizer import (
    AbortStep, GuidanceState, base_update, clip, guidance_factor, make_base, select_target, surge_step, train,
)
from surge.series_core import InvalidInputError, TargetSet

KINDS = ["sgd", "adam", "adamw"]


def regression(seed=0):
    model = ls.MLP((1, 6, 1))
    return ls.mse_objective(model, ls.synthetic_1d_dataset(16)), model.init(seed)


# target selection and the guidance factor

def test_select_target_examples():
    t = TargetSet((0.1, 0.5, 0.9), 2.0)
    assert select_target(t, 0.7) == 0.5
    assert select_target(t, 0.05) is None
    assert select_target(TargetSet(), 1.0) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 5), max_size=6, unique=True), st.floats(0.01, 5))
def test_selected_target_is_below_loss(zs, loss):
    z = select_target(TargetSet(tuple(sorted(zs)), 10.0), loss)
    assert z is None or z < loss


def test_guidance_examples():
    assert guidance_factor(1.0, 0.5, 2.0) == pytest.approx(2.0)
    assert guidance_factor(1.0, 0.999, 2.0) == pytest.approx(1.002)
    assert guidance_factor(1.0, 0.0, 0.5) == pytest.approx(1.5)
    assert guidance_factor(1.0, None, 3.0) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 10), st.floats(0, 20), st.floats(0, 5))
def test_alpha_in_bounds(loss, target, lam):
    a = guidance_factor(loss, target, lam)
    assert 1.0 <= a <= 1.0 + lam + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(0, 1), st.floats(0, 1), st.floats(0, 5))
def test_alpha_monotone_in_gap(loss, f1, f2, lam):
    near, far = sorted([f1, f2])
    assert guidance_factor(loss, loss * (1 - near), lam) <= guidance_factor(loss, loss * (1 - far), lam)


# base optimizers

def test_sgd_direction():
    np.testing.assert_array_equal(base_update(make_base("sgd"), [1.0, -2.0]), [-1.0, 2.0])


@pytest.mark.parametrize("g", [3.0, -0.2])
def test_adam_first_step(g):
    step = base_update(make_base("adam"), [g])
    assert step[0] == pytest.approx(-np.sign(g), rel=1e-6)


def test_adamw_decay_is_decoupled():
    a = base_update(make_base("adam"), [1.0], [2.0])
    w = base_update(make_base("adamw", weight_decay=0.1), [1.0], [2.0])
    assert w[0] - a[0] == pytest.approx(-0.2)


def test_nonfinite_gradient_rejected():
    with pytest.raises(InvalidInputError):
        base_update(make_base("sgd"), [np.nan])


def test_unknown_kind():
    with pytest.raises(InvalidInputError):
        make_base("lion")


# surge_step

def test_surge_step_scaled_sgd():
    guide = GuidanceState(TargetSet((0.5,), 2.0), lam=1.0, max_norm=np.inf)
    new, alpha = surge_step(np.zeros(1), np.ones(1), make_base("sgd", 0.1), guide, 1.0)
    assert alpha == pytest.approx(1.5)
    assert new[0] == pytest.approx(-0.15)


def test_clip_preserves_direction():
    d = np.array([6.0, 8.0])
    c = clip(d, 1.0)
    assert np.linalg.norm(c) == pytest.approx(1.0)
    np.testing.assert_allclose(c / np.linalg.norm(c), d / 10.0)
    assert clip(d, 100.0) is d


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=5), st.floats(1e-3, 1e3))
def test_clip_never_grows(v, m):
    d = np.array(v)
    c = clip(d, m)
    assert np.linalg.norm(c) <= max(np.linalg.norm(d), 0) * (1 + 1e-12)
    assert np.linalg.norm(c) <= m * (1 + 1e-12) or np.linalg.norm(d) <= m
    assert float(c @ d) >= 0


def test_nonfinite_loss_aborts():
    p = np.array([1.0])
    with pytest.raises(AbortStep):
        surge_step(p, np.ones(1), make_base(), GuidanceState(), np.nan)
    assert p[0] == 1.0


def test_guidance_exhausts_permanently():
    guide = GuidanceState(TargetSet((0.5,), 2.0), lam=1.0)
    surge_step(np.zeros(1), np.ones(1), make_base(), guide, 0.4)
    assert guide.exhausted
    _, alpha = surge_step(np.zeros(1), np.ones(1), make_base(), guide, 0.9)
    assert alpha == 1.0


# training loop

def hand_loop(obj, theta0, kind, eta, steps, wd=0.0):
    """Reference implementation written out from the textbook update rules."""
    th = np.array(theta0, dtype=float)
    m = np.zeros_like(th)
    v = np.zeros_like(th)
    losses = []
    for t in range(1, steps + 1):
        losses.append(obj.value(th))
        g = obj.grad(th)
        if kind == "sgd":
            th = th - eta * g
            continue
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        step = -(m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        if kind == "adamw":
            step = step - wd * th
        th = th + eta * step
    return np.array(losses), th


@pytest.mark.parametrize("kind", KINDS)
def test_lambda_zero_is_bitwise_bare(kind):
    obj, th0 = regression()
    wd = 0.01 if kind == "adamw" else 0.0
    targets = TargetSet((0.05, 0.1), 10.0)
    guided = train(obj, th0, 100, make_base(kind, 0.01, wd), lam=0.0, max_norm=np.inf, targets=targets)
    bare = train(obj, th0, 100, make_base(kind, 0.01, wd), max_norm=np.inf, guided=False)
    np.testing.assert_array_equal(guided.losses, bare.losses)
    np.testing.assert_array_equal(guided.params, bare.params)
    assert set(guided.alphas) == {1.0}
    ref_losses, ref_params = hand_loop(obj, th0, kind, 0.01, 100, wd)
    np.testing.assert_allclose(guided.losses, ref_losses, rtol=1e-12)
    np.testing.assert_allclose(guided.params, ref_params, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_empty_targets_match_lambda_zero(lam):
    obj, th0 = regression(1)
    a = train(obj, th0, 60, make_base("adam", 0.01), lam=lam, targets=TargetSet())
    b = train(obj, th0, 60, make_base("adam", 0.01), lam=0.0, targets=TargetSet())
    np.testing.assert_array_equal(a.losses, b.losses)
    np.testing.assert_array_equal(a.params, b.params)


def test_recorded_alphas_in_bounds():
    obj, th0 = regression(2)
    L0 = obj.value(th0)
    tr = train(obj, th0, 100, make_base("sgd", 0.05), lam=2.0, targets=TargetSet((0.3 * L0, 0.6 * L0), L0))
    assert all(1.0 <= a <= 3.0 for a in tr.alphas)
    assert max(tr.alphas) > 1.0


def test_quadratic_closed_form_decay():
    eta = 0.1
    tr = train(ls.gaussian_objective(2), [1.0, -2.0], 50, make_base("sgd", eta), lam=0.0, targets=TargetSet())
    expected = tr.losses[0] * (1 - eta) ** (2 * np.arange(50))
    np.testing.assert_allclose(tr.losses, expected, rtol=1e-12)


def test_tilted_double_well_golden():
    # from the high basin the guided run jumps the barrier; the bare run
    # settles in the high basin at the same step size
    pot = ls.analytic_potential("tilted_double_well")
    x0 = [1.3]
    cv = ls.critical_values(pot)
    L0 = pot.value(x0)
    targets = TargetSet(tuple(v for v in cv if v < L0), L0)
    goal = cv[0] + 0.05

    def first_hit(tr):
        losses = tr.losses + [tr.final_loss]
        return next((i for i, L in enumerate(losses) if L < goal), np.inf)

    bare = train(pot, x0, 300, make_base("sgd", 0.25), guided=False)
    guided = train(pot, x0, 300, make_base("sgd", 0.25), lam=1.0, targets=targets)
    assert first_hit(guided) == 5
    assert first_hit(guided) < first_hit(bare)


@pytest.mark.filterwarnings("ignore:overflow")
def test_train_stops_on_nonfinite():
    blow = ls.ObjectiveFunction(1, lambda t: float(np.exp(t[0])), lambda t: np.array([np.exp(t[0])]))
    tr = train(blow, [800.0], 5, make_base("sgd", 0.1), guided=False)
    assert tr.diagnostics and "aborted" in tr.diagnostics[-1]


def test_trajectory_csv(tmp_path):
    pot = ls.analytic_potential("quartic")
    tr = train(pot, [1.0], 3, make_base("sgd", 0.01), targets=TargetSet((1.0,), 2.0))
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,loss,alpha,target,grad_norm"
    assert len(lines) == 4
    assert lines[1].split(",")[1] == "2"
