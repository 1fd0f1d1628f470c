import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrboot.errors import CapabilityError, CapacityError, DomainError
from qrboot.files import ParseError, read_measure_csv, read_path_csv, write_measure_csv, write_path_csv
from qrboot.measures import DiscreteMeasure, SamplePath, empirical_measure, interval, mixture, real_line, unit_box
from qrboot.prob_metrics import bl_value
from qrboot.processes import (
    ContaminationSpec,
    ProcessSpec,
    contaminate,
    exact_alpha_markov,
    generate,
    mixing_diagnostics,
    stationary_distribution,
    varadarajan_diagnostic,
    weak_bi_mixing_average,
)
from qrboot.rng import derive_seed, substream


def two_state(p, q):
    return ProcessSpec("markov_chain", {"transition": [[1 - p, p], [q, 1 - q]]})


ALL_KINDS = [
    ProcessSpec("iid"),
    ProcessSpec("normal_drift"),
    ProcessSpec("shrinking_contamination", {"contaminant": {"type": "dirac", "value": 1.0}}),
    two_state(0.3, 0.2),
    ProcessSpec("ar1_transformed", {"phi": 0.7}),
]


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s.kind)
def test_generation_is_deterministic_and_in_range(spec):
    a, b = generate(spec, 300, 42), generate(spec, 300, 42)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate(spec, 300, 43).values)
    assert a.n == 300 and a.seed == 42
    assert np.all((a.values >= 0) & (a.values <= 1))


def test_substreams_are_independent_of_call_order():
    x = substream(5, "process").random(3)
    substream(5, "contamination").random(10)
    assert np.array_equal(x, substream(5, "process").random(3))
    assert not np.array_equal(x, substream(5, "inner").random(3))
    assert derive_seed(5, 10, 1) == derive_seed(5, 10, 1) != derive_seed(5, 10, 2)


def test_normal_drift_on_real_line_has_mean_near_limit():
    spec = ProcessSpec("normal_drift", {"limit": 0.0, "amplitude": 1.0, "rate": "1/i"}, ground=real_line())
    z = generate(spec, 10_000, 1).values
    assert abs(z.mean()) < 0.05
    assert 0.95 < z.std() < 1.05


def test_normal_drift_bounded_map():
    spec = ProcessSpec("normal_drift", {"limit": 0.0, "amplitude": 0.0})
    z = generate(spec, 20_000, 2).values
    assert abs(np.median(z) - 0.5) < 0.01


def test_markov_frequencies_match_stationary_law():
    spec = ProcessSpec("markov_chain", {"transition": [[0.9, 0.1, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]]})
    z = generate(spec, 60_000, 3).values
    freq = np.array([np.mean(z == s) for s in (0.0, 0.5, 1.0)])
    assert freq == pytest.approx(stationary_distribution(spec.params["transition"]), abs=0.02)


def test_ar1_output_is_uniform():
    z = generate(ProcessSpec("ar1_transformed", {"phi": 0.3}), 40_000, 4).values
    assert np.quantile(z, [0.25, 0.5, 0.75]) == pytest.approx([0.25, 0.5, 0.75], abs=0.02)


def test_shrinking_contamination_marginals_form_mixture():
    spec = ProcessSpec(
        "shrinking_contamination",
        {"base": {"type": "discrete", "atoms": [0.2, 0.4], "weights": [0.5, 0.5]}, "contaminant": {"type": "dirac", "value": 1.0}, "eps0": 0.5, "rate": "1/sqrt(i)"},
    )
    n = 12
    eps = spec.epsilons(n)
    assert eps == pytest.approx(0.5 / np.sqrt(np.arange(1, n + 1)))
    avg = mixture([spec.marginal(i) for i in range(1, n + 1)], np.full(n, 1 / n))
    e = eps.mean()
    expected = mixture([DiscreteMeasure([0.2, 0.4], [0.5, 0.5]), DiscreteMeasure.dirac(1.0)], [1 - e, e])
    assert avg.support == expected.support
    assert avg.weights == pytest.approx(expected.weights, abs=1e-12)


@pytest.mark.parametrize("fraction, n, count", [(0.05, 200, 10), (0.1, 30, 3), (0.07, 100, 7), (0.0, 50, 0), (1.0, 9, 9)])
def test_gross_error_count_is_exact(fraction, n, count):
    path = SamplePath(np.full(n, 0.5))
    out = contaminate(path, ContaminationSpec("gross_error", fraction), seed=8)
    changed = out.values != 0.5
    assert changed.sum() == count
    assert set(out.values[changed].tolist()) <= {0.0, 1.0}


def test_gross_error_to_named_target_and_determinism():
    target = DiscreteMeasure.dirac(1.0)
    spec = ProcessSpec("iid", contamination=ContaminationSpec("gross_error", 0.05, shift_target=target))
    a = generate(spec, 200, 9)
    assert np.sum(a.values == 1.0) == 10
    assert np.array_equal(a.values, generate(spec, 200, 9).values)
    clean = generate(ProcessSpec("iid"), 200, 9)
    assert np.sum(a.values != clean.values) == 10


def test_rounding_stays_within_magnitude_and_ground():
    path = generate(ProcessSpec("iid"), 500, 10)
    out = contaminate(path, ContaminationSpec("rounding", magnitude=0.05), seed=10)
    assert np.max(np.abs(out.values - path.values)) <= 0.05 + 1e-15
    assert np.all((out.values >= 0) & (out.values <= 1))


def test_distribution_shift_requires_target():
    path = SamplePath(np.full(100, 0.5))
    with pytest.raises(DomainError):
        contaminate(path, ContaminationSpec("distribution_shift", 0.5), seed=1)
    out = contaminate(path, ContaminationSpec("distribution_shift", 0.5, shift_target=DiscreteMeasure.dirac(0.1)), seed=1)
    assert 20 < np.sum(out.values == 0.1) < 80


def test_two_dimensional_gross_errors_hit_corners():
    spec = ProcessSpec("iid", ground=unit_box(2), contamination=ContaminationSpec("gross_error", 0.5))
    z = generate(spec, 40, 11).values
    corners = {tuple(c) for c in unit_box(2).corners().tolist()}
    assert sum(tuple(r) in corners for r in z.tolist()) == 20


@pytest.mark.parametrize(
    "bad",
    [
        lambda: ProcessSpec("garch"),
        lambda: ProcessSpec("markov_chain", {"transition": [[0.5, 0.6], [0.5, 0.5]]}),
        lambda: ProcessSpec("markov_chain", {"transition": [[1.0]], "states": [2.0]}),
        lambda: ProcessSpec("ar1_transformed", {"phi": 1.0}),
        lambda: ProcessSpec("shrinking_contamination", {}),
        lambda: ProcessSpec("iid", {"marginal": {"type": "uniform", "low": 0.5, "high": 2.0}}),
        lambda: ContaminationSpec("gross_error", 1.5),
        lambda: ContaminationSpec("smudge", 0.1),
    ],
)
def test_invalid_specs_rejected(bad):
    with pytest.raises(DomainError):
        bad()


def test_spec_round_trip_and_flat_params():
    spec = ProcessSpec(
        "markov_chain",
        {"transition": [[0.7, 0.3], [0.4, 0.6]], "states": [0.1, 0.9]},
        contamination=ContaminationSpec("gross_error", 0.1, shift_target=DiscreteMeasure.dirac(1.0)),
    )
    assert ProcessSpec.from_dict(spec.to_dict()) == spec
    flat = ProcessSpec.from_dict({"kind": "ar1_transformed", "phi": 0.2})
    assert flat.params == {"phi": 0.2}
    assert hash(flat) == hash(ProcessSpec("ar1_transformed", {"phi": 0.2}))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(1, 10))
def test_two_state_alpha_closed_form(p, q, lag):
    P = [[1 - p, p], [q, 1 - q]]
    pi0, pi1 = q / (p + q), p / (p + q)
    assert exact_alpha_markov(P, lag) == pytest.approx(pi0 * pi1 * abs(1 - p - q) ** lag, abs=1e-12)


def test_alpha_brute_force_three_states():
    P = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]])
    pi = stationary_distribution(P)
    for lag in (0, 1, 3):
        J = pi[:, None] * np.linalg.matrix_power(P, lag)
        best = 0.0
        for A in itertools.product([0, 1], repeat=3):
            for B in itertools.product([0, 1], repeat=3):
                a, b = np.array(A, bool), np.array(B, bool)
                best = max(best, abs(J[np.ix_(a, b)].sum() - pi[a].sum() * pi[b].sum()))
        assert exact_alpha_markov(P, lag) == pytest.approx(best, abs=1e-14)
        assert exact_alpha_markov(P, lag) <= 0.25
    with pytest.raises(CapacityError):
        exact_alpha_markov(np.full((4, 4), 0.25), 1)


def test_alpha_respects_merged_states():
    P = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
    assert exact_alpha_markov(P, 2, states=[0.0, 0.0, 0.0]) == 0.0


def test_weak_average_of_independent_process_is_alpha0_over_n():
    spec = ProcessSpec("iid", {"marginal": {"type": "discrete", "atoms": [0.0, 1.0], "weights": [0.5, 0.5]}})
    for n in (1, 10, 100):
        assert weak_bi_mixing_average(spec, n) == pytest.approx(0.25 / n, abs=1e-15)
    assert weak_bi_mixing_average(ProcessSpec("iid"), 4) == pytest.approx(0.0625)


def test_weak_average_decreases_for_mixing_chain():
    spec = two_state(0.2, 0.3)
    vals = [weak_bi_mixing_average(spec, n) for n in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2] > 0
    # geometric coefficients give an O(1/n) average
    assert vals[2] * 1000 == pytest.approx(vals[1] * 100, rel=0.05)


def test_weak_average_of_periodic_chain_does_not_vanish():
    flip = ProcessSpec("markov_chain", {"transition": [[0.0, 1.0], [1.0, 0.0]]})
    assert weak_bi_mixing_average(flip, 100) == pytest.approx(0.25)


def test_mixing_diagnostics():
    d = mixing_diagnostics(two_state(0.2, 0.3), max_lag=30)
    assert len(d.alpha_coeffs) == 31
    assert d.alpha_coeffs[1] == pytest.approx(0.24 * 0.5)
    assert d.gamma_hat > 3  # geometric tails look like a very steep power law
    assert not d.bound_only
    ar = mixing_diagnostics(ProcessSpec("ar1_transformed", {"phi": 0.5}), max_lag=10)
    assert ar.bound_only and ar.alpha_coeffs[2] == pytest.approx(0.0625)
    with pytest.raises(CapabilityError):
        mixing_diagnostics(ProcessSpec("normal_drift"))


def test_varadarajan_diagnostic_decays():
    target = DiscreteMeasure.uniform((np.arange(10) + 0.5) / 10)
    table = varadarajan_diagnostic(ProcessSpec("iid", {"marginal": {"type": "grid", "points": 10}}), target, [50, 800], reps=15, seed=1)
    assert table[0][0] == 50 and table[1][0] == 800
    assert table[1][1] < 0.5 * table[0][1]


def test_path_csv_round_trip(tmp_path):
    path = generate(ProcessSpec("ar1_transformed"), 50, 12)
    write_path_csv(tmp_path / "p.csv", path)
    back = read_path_csv(tmp_path / "p.csv")
    assert np.array_equal(back.values, path.values)
    assert (tmp_path / "p.csv").read_text().splitlines()[:2][0] == "index,value"
    two = generate(ProcessSpec("iid", ground=unit_box(2)), 5, 1)
    write_path_csv(tmp_path / "q.csv", two)
    assert np.array_equal(read_path_csv(tmp_path / "q.csv").values, two.values)


def test_measure_csv_round_trip_and_errors(tmp_path):
    m = DiscreteMeasure([0.1, 0.35, 0.9], [0.2, 0.3, 0.5])
    write_measure_csv(tmp_path / "m.csv", m)
    assert read_measure_csv(tmp_path / "m.csv") == m
    (tmp_path / "bad.csv").write_text("0.1,0.5\n0.2,abc\n")
    with pytest.raises(ParseError) as err:
        read_measure_csv(tmp_path / "bad.csv")
    assert err.value.line == 2
    (tmp_path / "sum.csv").write_text("0.1,0.5\n0.2,0.4\n")
    with pytest.raises(ParseError):
        read_measure_csv(tmp_path / "sum.csv")
    (tmp_path / "hdr.csv").write_text("x,weight\n0,1\n")
    assert read_measure_csv(tmp_path / "hdr.csv") == DiscreteMeasure.dirac(0.0)


def test_interval_ground_for_iid_grid():
    spec = ProcessSpec("iid", {"marginal": {"type": "grid", "points": 4}})
    assert spec.marginal(1).support == (0.125, 0.375, 0.625, 0.875)
    assert spec.ground == interval()


def test_contamination_extremes():
    path = generate(ProcessSpec("iid"), 40, 13)
    assert np.array_equal(contaminate(path, ContaminationSpec("gross_error", 0.0), seed=1).values, path.values)
    out = contaminate(path, ContaminationSpec("gross_error", 1.0, shift_target=DiscreteMeasure.dirac(1.0)), seed=1)
    assert np.all(out.values == 1.0)


def test_symmetric_chain_frequencies():
    z = generate(ProcessSpec("markov_chain", {"transition": [[0.9, 0.1], [0.1, 0.9]]}), 10_000, 14).values
    assert np.mean(z == 0.0) == pytest.approx(0.5, abs=0.05)


def test_alpha_examples():
    same_rows = [[0.3, 0.7], [0.3, 0.7]]
    assert all(exact_alpha_markov(same_rows, lag) == pytest.approx(0.0, abs=1e-15) for lag in range(1, 6))
    assert exact_alpha_markov([[0.7, 0.3], [0.3, 0.7]], 1) == pytest.approx(0.1, abs=1e-15)
    rng = np.random.default_rng(15)
    for _ in range(20):
        p, q = rng.uniform(0.01, 0.99, 2)
        seq = [exact_alpha_markov([[1 - p, p], [q, 1 - q]], lag) for lag in range(1, 11)]
        assert all(b <= a + 1e-15 for a, b in zip(seq, seq[1:]))


def test_weak_average_of_chain_with_identical_rows_keeps_the_diagonal():
    spec = ProcessSpec("markov_chain", {"transition": [[0.5, 0.5], [0.5, 0.5]]})
    assert weak_bi_mixing_average(spec, 50) == pytest.approx(0.25 / 50, abs=1e-15)
    assert weak_bi_mixing_average(spec, 50) >= 0


def test_chain_is_stationary_across_indices():
    spec = ProcessSpec("markov_chain", {"transition": [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]]})
    reps, n = 2000, 20
    paths = np.array([generate(spec, n, derive_seed(16, r)).values for r in range(reps)])
    first, middle = empirical_measure(paths[:, 0]), empirical_measure(paths[:, n // 2])
    assert bl_value(first, middle, interval()) <= 3 / np.sqrt(reps)


def test_shrinking_contamination_draws_follow_the_mixture():
    spec = ProcessSpec(
        "shrinking_contamination",
        {"base": {"type": "discrete", "atoms": [0.2, 0.5], "weights": [0.5, 0.5]}, "contaminant": {"type": "dirac", "value": 1.0}, "eps0": 0.8},
    )
    reps, i = 3000, 2
    draws = np.array([generate(spec, i, derive_seed(17, r)).values[i - 1] for r in range(reps)])
    assert bl_value(empirical_measure(draws), spec.marginal(i), interval()) <= 3 / np.sqrt(reps)


def test_varadarajan_degenerate_and_shrinking_contamination():
    dirac = ProcessSpec("iid", {"marginal": {"type": "dirac", "value": 0.3}})
    table = varadarajan_diagnostic(dirac, DiscreteMeasure.dirac(0.3), [10, 100], reps=3, seed=1)
    assert [d for _, d in table] == [0.0, 0.0]
    spec = ProcessSpec(
        "shrinking_contamination",
        {"base": {"type": "grid", "points": 10}, "contaminant": {"type": "dirac", "value": 1.0}, "eps0": 1.0, "rate": "1/i"},
    )
    target = DiscreteMeasure.uniform((np.arange(10) + 0.5) / 10)
    table = varadarajan_diagnostic(spec, target, [50, 400, 3200], reps=15, seed=2)
    dists = [d for _, d in table]
    assert dists[0] > dists[1] > dists[2]
