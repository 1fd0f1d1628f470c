import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import huber_grid_root
from qrboot.errors import CapabilityError, DomainError
from qrboot.estimators import (
    available_estimators,
    evaluate,
    get_estimator,
    huber_psi,
    modulus_probe,
    register_estimator,
)
from qrboot.measures import DiscreteMeasure, empirical_measure, interval, unit_box
from qrboot.prob_metrics import bl_value

ALL = ["mean", "median", "trimmed_mean", "huber"]


def test_basic_examples():
    assert evaluate(get_estimator("mean"), DiscreteMeasure.dirac(0.3)) == 0.3
    assert evaluate(get_estimator("median"), DiscreteMeasure([0, 1], [0.5, 0.5])) == 0.5
    assert evaluate(get_estimator("median"), DiscreteMeasure([0, 1], [0.6, 0.4])) == 0.0


def test_huber_example_matches_grid_root():
    m = DiscreteMeasure([0.0, 0.9], [2 / 3, 1 / 3])
    theta = evaluate(get_estimator("huber", k=0.5), m)
    assert theta == pytest.approx(0.25, abs=1e-9)
    assert theta == pytest.approx(huber_grid_root(m.points, m.weights, 0.5, 0.2, 0.3), abs=1e-7)


def test_huber_residual_and_grid_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        k = float(rng.uniform(0.05, 1.5))
        m = DiscreteMeasure(rng.random(6), rng.dirichlet(np.ones(6)))
        theta = evaluate(get_estimator("huber", k=k), m)
        assert abs(m.weights @ huber_psi(m.points - theta, k)) <= 1e-9
    m = DiscreteMeasure([0.1, 0.2, 0.8], [0.3, 0.3, 0.4])
    theta = evaluate(get_estimator("huber", k=0.2), m)
    assert theta == pytest.approx(huber_grid_root(m.points, m.weights, 0.2, 0.0, 1.0, step=1e-6), abs=2e-6)


def test_huber_flat_root_uses_midpoint():
    # with small k the score vanishes on the whole gap between two distant atoms
    m = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    assert evaluate(get_estimator("huber", k=0.1), m) == pytest.approx(0.5, abs=1e-9)


def test_sample_statistics_agree_with_operator():
    rng = np.random.default_rng(2)
    for _ in range(100):
        path = rng.integers(0, 30, size=100) / 29 if rng.random() < 0.5 else rng.random(100)
        m = empirical_measure(path)
        assert evaluate(get_estimator("mean"), m) == pytest.approx(path.mean(), abs=1e-12)
        assert evaluate(get_estimator("median"), m) == pytest.approx(np.median(path), abs=1e-12)
        assert evaluate(get_estimator("trimmed_mean", beta=0.1), m) == pytest.approx(stats.trim_mean(path, 0.1), abs=1e-12)


def test_fractional_trimming_splits_boundary_atoms():
    # beta = 0.25 on four equal atoms with one of them split by the 0.3 cut
    m = DiscreteMeasure([0.0, 1.0, 2.0, 3.0], [0.25] * 4)
    assert evaluate(get_estimator("trimmed_mean", beta=0.25), m) == pytest.approx(1.5)
    m = DiscreteMeasure([0.0, 1.0], [0.3, 0.7])
    # trimming 0.2 from each side leaves 0.1 at 0 and 0.5 at 1
    assert evaluate(get_estimator("trimmed_mean", beta=0.2), m) == pytest.approx(0.5 / 0.6)


@pytest.mark.parametrize("name", ALL)
def test_samples_path_matches_measure_path(name):
    rng = np.random.default_rng(3)
    op = get_estimator(name)
    rows = np.where(rng.random((40, 25)) < 0.3, rng.integers(0, 4, (40, 25)) / 3, rng.random((40, 25)))
    fast = op.evaluate_samples(rows)
    slow = np.array([op.evaluate(empirical_measure(r)) for r in rows])
    assert fast == pytest.approx(slow, abs=1e-9)


@pytest.mark.parametrize("name", ALL)
def test_permutation_invariance_is_exact(name):
    rng = np.random.default_rng(4)
    op = get_estimator(name)
    x = rng.random(57)
    a = op.evaluate_samples(x)[0]
    for _ in range(5):
        assert op.evaluate_samples(rng.permutation(x))[0] == a


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8),
    st.sampled_from(ALL),
)
def test_values_lie_in_convex_hull(xs, name):
    m = empirical_measure(np.asarray(xs))
    v = evaluate(get_estimator(name), m)
    assert min(xs) - 1e-9 <= v <= max(xs) + 1e-9


def test_mean_is_lipschitz_in_bl():
    rng = np.random.default_rng(5)
    mean = get_estimator("mean")
    for _ in range(50):
        p = DiscreteMeasure(rng.random(4), rng.dirichlet(np.ones(4)))
        q = DiscreteMeasure(rng.random(3), rng.dirichlet(np.ones(3)))
        assert abs(evaluate(mean, p) - evaluate(mean, q)) <= 2 * bl_value(p, q, interval()) + 1e-7


def test_modulus_probe_mean_is_linear():
    center = DiscreteMeasure([0.2, 0.5, 0.7], [0.3, 0.3, 0.4])
    table = modulus_probe(get_estimator("mean"), center, [0.0, 0.01, 0.05, 0.1], probes=60, seed=6)
    assert table[0] == (0.0, 0.0, 0)
    for r, mod, accepted in table[1:]:
        assert accepted > 0
        assert mod <= 2 * r + 1e-9


def test_modulus_probe_median_jumps_at_a_gap():
    center = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    table = modulus_probe(get_estimator("median"), center, [0.01, 0.02], probes=80, seed=7)
    assert all(mod >= 0.45 for _, mod, _ in table)
    with pytest.raises(DomainError):
        modulus_probe(get_estimator("median"), center, [-0.1], probes=5, seed=7)


def test_multidimensional_requests_rejected():
    op = get_estimator("median")
    with pytest.raises(CapabilityError):
        op.evaluate(DiscreteMeasure(np.array([[0.1, 0.2], [0.3, 0.4]]), [0.5, 0.5]))
    with pytest.raises(CapabilityError):
        op.evaluate_samples(np.zeros((2, 3, 2)))
    with pytest.raises(CapabilityError):
        modulus_probe(op, DiscreteMeasure.dirac(0.1), [0.1], 3, 1, ground=unit_box(2))


def test_registry():
    assert set(ALL) <= set(available_estimators())
    with pytest.raises(DomainError) as err:
        get_estimator("mode")
    assert "median" in str(err.value)
    with pytest.raises(DomainError):
        get_estimator("trimmed_mean", beta=0.5)
    with pytest.raises(DomainError):
        get_estimator("huber", k=0)
    with pytest.raises(DomainError):
        get_estimator("mean", bogus=1)

    register_estimator("midrange", lambda m: 0.5 * (m.points.min() + m.points.max()), replace=True)
    op = get_estimator("midrange")
    assert evaluate(op, DiscreteMeasure([0.2, 0.6, 1.0], [0.8, 0.1, 0.1])) == pytest.approx(0.6)
    assert op.evaluate_samples(np.array([[0.0, 0.4], [0.2, 0.2]])) == pytest.approx([0.2, 0.2])
    with pytest.raises(DomainError):
        register_estimator("midrange", lambda m: 0.0)
    assert op == get_estimator("midrange") and op.to_dict() == {"name": "midrange", "params": {}}
