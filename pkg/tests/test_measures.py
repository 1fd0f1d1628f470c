import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dn_scan
from qrboot.errors import CapacityError, DomainError
from qrboot.measures import (
    Box,
    DiscreteMeasure,
    ProductSpace,
    SamplePath,
    dn_distance,
    dn_from_distances,
    empirical_measure,
    interval,
    mixture,
    product_measure,
    product_space_dn,
    unit_box,
)
from qrboot.prob_metrics import bl_distance


def test_empirical_single_point():
    m = empirical_measure(SamplePath([0.5]))
    assert m.support == (0.5,)
    assert m.weights.tolist() == [1.0]


def test_empirical_counts():
    m = empirical_measure(SamplePath([0, 1, 0, 1]))
    assert m.as_dict() == {0.0: 0.5, 1.0: 0.5}


def test_empirical_weights_are_multiples_of_one_over_n():
    rng = np.random.default_rng(3)
    values = rng.integers(0, 7, size=100) / 7
    m = empirical_measure(values)
    for x, w in m:
        assert w == pytest.approx(np.count_nonzero(values == x) / 100, abs=1e-15)
        assert abs(w * 100 - round(w * 100)) < 1e-9


def test_empirical_empty_path_rejected():
    with pytest.raises(DomainError):
        SamplePath([])
    with pytest.raises(DomainError):
        empirical_measure(np.array([]))


def test_permuted_path_gives_identical_measure():
    rng = np.random.default_rng(0)
    values = rng.integers(0, 5, 40) / 4
    a = empirical_measure(values)
    b = empirical_measure(rng.permutation(values))
    assert a == b and a.key == b.key
    assert bl_distance(a, b, interval())[0] == 0.0


def test_canonical_form_merges_near_duplicates():
    m = DiscreteMeasure([0.3, 0.1, 0.3 + 1e-14], [0.25, 0.5, 0.25])
    assert m.support == (0.1, 0.3)
    assert m.weights.tolist() == [0.5, 0.5]


def test_weights_must_sum_to_one():
    with pytest.raises(DomainError):
        DiscreteMeasure([0, 1], [0.5, 0.6])
    with pytest.raises(DomainError):
        DiscreteMeasure([0, 1], [1.5, -0.5])


def test_mixture_examples():
    d0, d1 = DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(1.0)
    assert mixture([d0], [1.0]) == d0
    assert mixture([d0, d1], [0.5, 0.5]).as_dict() == {0.0: 0.5, 1.0: 0.5}
    with pytest.raises(DomainError):
        mixture([d0, d1], [0.5, 0.4])


def test_mixture_matches_direct_accumulation():
    rng = np.random.default_rng(1)
    parts = [DiscreteMeasure(rng.integers(0, 4, 2) / 4 + [0, 0.01], rng.dirichlet([1, 1])) for _ in range(3)]
    c = rng.dirichlet([1, 1, 1])
    expected = {}
    for m, ci in zip(parts, c):
        for x, w in m:
            expected[x] = expected.get(x, 0.0) + ci * w
    got = mixture(parts, c).as_dict()
    assert set(got) == set(expected)
    for x in got:
        assert got[x] == pytest.approx(expected[x], abs=1e-12)


def test_product_examples():
    d0, d1 = DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(1.0)
    prod = product_measure([d0, d1])
    assert prod.support == ((0.0, 1.0),)
    u = DiscreteMeasure.uniform([0.0, 1.0])
    prod = product_measure([u, u])
    assert len(prod) == 4
    assert np.allclose(prod.weights, 0.25)


def test_product_total_mass_and_guards():
    rng = np.random.default_rng(2)
    ms = [DiscreteMeasure(rng.random(3), rng.dirichlet(np.ones(3))) for _ in range(3)]
    prod = product_measure(ms)
    assert prod.weights.sum() == pytest.approx(1.0, abs=1e-12)
    brute = sum(np.prod(ws) for ws in itertools.product(*(m.weights for m in ms)))
    assert brute == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(CapacityError):
        product_measure([DiscreteMeasure.uniform(np.arange(7) / 7)])
    with pytest.raises(CapacityError):
        product_measure([DiscreteMeasure.dirac(0.0)] * 5)


@pytest.mark.parametrize(
    "d, expected",
    [([1, 0, 0, 0], 0.25), ([0.1, 0.1], 0.1), ([0.3], 0.3), ([0, 0, 0], 0.0), ([5, 5], 1.0)],
)
def test_dn_examples(d, expected):
    assert dn_from_distances(d) == pytest.approx(expected, abs=1e-15)
    assert dn_scan(d) == pytest.approx(expected, abs=1e-15)


def test_dn_distance_on_tuples():
    a = (0.0, 0.2, 0.4, 0.6)
    assert dn_distance(a, a, interval()) == 0.0
    b = (1.0, 0.2, 0.4, 0.6)
    assert dn_distance(a, b, interval()) == 0.25
    assert dn_distance(b, a, interval()) == 0.25
    with pytest.raises(DomainError):
        dn_distance(a, a[:3], interval())


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 2, allow_nan=False), min_size=1, max_size=12))
def test_dn_matches_scan_oracle(d):
    assert dn_from_distances(d) == dn_scan(d)


def test_product_space_dn_properties():
    space = product_space_dn(interval(), 1)
    assert space.dist((0.0,), (0.3,)) == pytest.approx(0.3)
    assert space.diameter_bound == 1.0
    rng = np.random.default_rng(5)
    n = 6
    space = product_space_dn(interval(), n)
    for _ in range(200):
        x, y, z = rng.random((3, n))
        tie = rng.random(n) < 0.4
        x[tie] = y[tie]
        dxy, dyz, dxz = space.dist(x, y), space.dist(y, z), space.dist(x, z)
        assert dxy == space.dist(y, x)
        assert dxz <= dxy + dyz + 1e-12
        assert 0 <= dxy <= 1.0
        assert dxy <= np.max(np.abs(x - y)) + 1e-15
    assert space.dist(x, x) == 0.0


def test_product_space_pairwise_matches_dist():
    rng = np.random.default_rng(6)
    for metric in ("dn", "sup", "sum"):
        space = ProductSpace(unit_box(2), 3, metric)
        xs = rng.random((4, 3, 2))
        ys = rng.random((5, 3, 2))
        D = space.pairwise(xs, ys)
        for i, j in itertools.product(range(4), range(5)):
            assert D[i, j] == pytest.approx(space.dist(xs[i], ys[j]), abs=1e-15)


def test_box_metric_axioms_and_diameter():
    box = unit_box(3)
    rng = np.random.default_rng(7)
    pts = rng.random((60, 3))
    D = box.pairwise(pts, pts)
    assert np.allclose(np.diag(D), 0.0)
    assert np.array_equal(D, D.T)
    assert np.all(D <= box.diameter_bound + 1e-12)
    for i, j, k in rng.integers(0, 60, (200, 3)):
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-12
    with pytest.raises(DomainError):
        unit_box(4)
    with pytest.raises(DomainError):
        Box([1.0], [0.0])


def test_sample_path_is_read_only():
    p = SamplePath([0.1, 0.2], origin="iid", seed=3)
    with pytest.raises(ValueError):
        p.values[0] = 1.0
    assert p.n == 2 and p.seed == 3
