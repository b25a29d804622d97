import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import J02, J11, J21
from plapeig import harness
from plapeig.harness import (
    Crossing,
    NoSignChange,
    ResultCache,
    SweepRow,
    cache_key,
    classify_multiplicity,
    find_crossing,
    strict_verdict,
)


def synthetic_rows(values):
    return [SweepRow(p=p, h=0.1, tau2=v, mu2=0.0, converged=True) for p, v in values]


# -- cache -------------------------------------------------------------------


def test_cache_key_is_canonical():
    a = {"kind": "sector", "R": 1.0, "angle": math.pi, "p": 2.0, "h": 0.05, "tol": 1e-10}
    b = dict(reversed(list(a.items())))
    assert cache_key(a) == cache_key(b)
    assert len(cache_key(a)) == 64
    assert cache_key(a) != cache_key({**a, "p": 2.0000000001})


def test_result_cache_round_trip(tmp_path):
    c = ResultCache(tmp_path)
    params = {"kind": "sector", "p": 2.0}
    assert c.get(params) is None
    c.put(params, {"lambda": 1.5})
    assert c.get(params) == {"lambda": 1.5}
    c.put(params, {"lambda": 2.5})  # last writer wins
    assert c.get(params) == {"lambda": 2.5}
    files = list(tmp_path.iterdir())
    assert [f.name for f in files] == [cache_key(params) + ".json"]
    assert json.loads(files[0].read_text())["params"] == params


def test_result_cache_ignores_corrupt_entries(tmp_path):
    c = ResultCache(tmp_path)
    params = {"p": 3.0}
    (tmp_path / f"{cache_key(params)}.json").write_text("{not json")
    assert c.get(params) is None


def test_disabled_cache_is_noop():
    c = ResultCache(None)
    c.put({"p": 1.0}, {"x": 1})
    assert c.get({"p": 1.0}) is None


def test_sector_eigenvalue_uses_cache(tmp_path):
    c = ResultCache(tmp_path)
    first = harness.sector_eigenvalue(math.pi, 2.0, 0.2, cache=c)
    params = {"kind": "sector", "R": 1.0, "angle": math.pi, "p": 2.0, "h": 0.2, "tol": 1e-10}
    c.put(params, {**first, "lambda": -1.0})
    assert harness.sector_eigenvalue(math.pi, 2.0, 0.2, cache=c)["lambda"] == -1.0


# -- verdicts and crossing ----------------------------------------------------


def test_strict_verdict():
    assert strict_verdict(1.0, 0.5) is True
    assert strict_verdict(-1.0, 0.5) is False
    assert strict_verdict(0.4, 0.5) is None
    assert strict_verdict(float("nan"), 0.1) is None


def test_crossing_constant_sign():
    rows = synthetic_rows([(1.0, 1.0), (2.0, 0.5), (3.0, 0.1)])
    with pytest.raises(NoSignChange):
        find_crossing(rows)


def test_crossing_needs_two_rows():
    with pytest.raises(ValueError, match="two"):
        find_crossing(synthetic_rows([(1.0, 1.0)]))


def test_crossing_refinement_width():
    f = lambda p: math.tanh(1.7 - p)  # noqa: E731
    rows = synthetic_rows([(p, f(p)) for p in (1.2, 1.5, 2.0, 3.0)])
    c = find_crossing(rows, evaluate=f, width=0.01)
    assert isinstance(c, Crossing)
    assert c.width <= 0.01
    assert c.p_a <= 1.7 <= c.p_b
    assert c.value_a > 0 > c.value_b


def test_crossing_without_refinement_returns_grid_bracket():
    rows = synthetic_rows([(1.0, 1.0), (2.0, -1.0)])
    c = find_crossing(rows)
    assert (c.p_a, c.p_b, c.refinements) == (1.0, 2.0, 0)


def test_crossing_skips_failed_rows():
    rows = synthetic_rows([(1.0, 1.0), (1.5, -1.0), (2.0, -2.0)])
    rows[1].errors.append("fem: failed")
    c = find_crossing(rows)
    assert (c.p_a, c.p_b) == (1.0, 2.0)


# -- multiplicity ---------------------------------------------------------------


def test_multiplicity_examples():
    r = classify_multiplicity([5.78, 14.68, 14.69, 26.37, 26.38, 30.47], 0.02)
    assert r.pattern == [[1], [2, 3], [4, 5], [6]]
    assert classify_multiplicity([3.0]).clusters == [(1, 1)]
    assert len(classify_multiplicity([1.0, 2.0, 3.0, 4.0], 0.02).clusters) == 4
    with pytest.raises(ValueError, match="sorted"):
        classify_multiplicity([2.0, 1.0])
    with pytest.raises(ValueError, match="tol"):
        classify_multiplicity([1.0], 0.0)


sorted_values = st.lists(st.floats(0.1, 1e3), min_size=1, max_size=15).map(sorted)


@settings(max_examples=200, deadline=None)
@given(sorted_values, st.floats(1e-4, 0.5))
def test_multiplicity_idempotent(vals, tol):
    r = classify_multiplicity(vals, tol)
    again = classify_multiplicity(r.values, tol)
    assert again.clusters == r.clusters
    # clusters tile the index range
    assert sum(m for _, m in r.clusters) == len(vals)
    assert [l for l, _ in r.clusters] == [1] + [l + m for l, m in r.clusters[:-1]]


@settings(max_examples=200, deadline=None)
@given(sorted_values, st.floats(1e-4, 0.5), st.randoms())
def test_multiplicity_invariant_under_tie_permutation(vals, tol, rnd):
    # permuting equal entries leaves a sorted list unchanged in value
    idx = list(range(len(vals)))
    groups = {}
    for i, v in enumerate(vals):
        groups.setdefault(v, []).append(i)
    for members in groups.values():
        shuffled = members[:]
        rnd.shuffle(shuffled)
        for a, b in zip(members, shuffled):
            idx[a] = b
    permuted = [vals[i] for i in idx]
    assert classify_multiplicity(permuted, tol).clusters == classify_multiplicity(vals, tol).clusters


# -- sweep rows ---------------------------------------------------------------


def test_p2_row(cache):
    row = harness.sweep_row(2.0, 0.05, cache=cache)
    assert row.ok
    assert row.tau1 == pytest.approx(J11**2, rel=0.01)
    assert row.tau2 == pytest.approx(J21**2, rel=0.015)
    assert row.mu2 == pytest.approx(J02**2, rel=1e-9)
    assert row.tau1_lt_mu2 is True
    assert row.tau2_lt_mu2 is True
    assert row.gap_holds is True


def test_p5_row_ordering(cache):
    assert harness.sweep_row(5.0, 0.05, cache=cache).tau2_minus_mu2 < 0


def test_ordering_reversal_near_one(cache):
    # tau_2 - mu_2 is positive for p close to 1 and has already turned
    # negative at p = 1.3
    assert harness.sweep_row(1.2, 0.05, cache=cache).tau2_minus_mu2 > 0
    assert harness.sweep_row(1.3, 0.05, cache=cache).tau2_minus_mu2 < 0
    with pytest.raises(NoSignChange):
        find_crossing(harness.sweep([1.3, 1.5, 2.0, 3.0], 0.05, cache=cache))


def test_row_outside_fem_range_reports_error():
    row = harness.sweep_row(50.0, 0.1)
    assert not row.ok
    assert any("fem" in e for e in row.errors)
    assert row.gap_holds is True
    assert row.csv_row()[1] == "nan"


def test_sweep_csv_format(cache):
    rows = harness.sweep([2.0, 3.0], 0.1, cache=cache)
    text = harness.sweep_csv(rows, Crossing(1.27, 1.28, 0.1, -0.1, 3), ["h=0.1"])
    lines = text.splitlines()
    assert lines[0] == "p,tau1,tau2,mu2,nu1,nu2,gap_holds,tau1_lt_mu2,tau2_minus_mu2,h,converged"
    assert lines[1].startswith("2,") and lines[1].endswith(",0.1,true")
    assert lines[3] == "# crossing tau2_minus_mu2 in [1.270000, 1.280000]"
    assert lines[4] == "# h=0.1"
    assert harness.sweep_csv(rows) == harness.sweep_csv(harness.sweep([2.0, 3.0], 0.1, cache=cache))


def test_parallel_sweep_matches_serial(tmp_path):
    grid = [2.0, 4.0]
    serial = harness.sweep(grid, 0.2, cache=ResultCache(tmp_path / "a"))
    parallel = harness.sweep(grid, 0.2, cache=ResultCache(tmp_path / "b"), workers=2)
    assert harness.sweep_csv(serial) == harness.sweep_csv(parallel)


# -- ground truth and trends ----------------------------------------------------


def test_linear_ground_truth(cache):
    gt = harness.verify_linear_ground_truth(0.05, cache=cache)
    assert gt.passed, gt.failures
    assert gt.report.pattern == [[1], [2, 3], [4, 5], [6]]
    assert gt.table[1]["rel_dev"] <= 0.015
    assert gt.table[3]["rel_dev"] <= 0.015


def test_infinity_trend(cache):
    t = harness.infinity_trend([2.0, 4.0, 8.0], 1.0, 0.05, cache=cache)
    assert t.nu1_decreasing
    assert t.tau_distance_decreasing
    roots = [r["tau1_root"] for r in t.rows]
    # tau_1(2)^(1/2) is j_{1,1} = 3.83, so the values approach 2 from above
    assert all(r > 2.0 for r in roots)
    assert roots[0] == pytest.approx(J11, rel=0.01)


def test_infinity_trend_half_radius_doubles_targets():
    t = harness.infinity_trend([2.0, 4.0], 0.5, 0.1)
    assert [r["mu1_target"] for r in t.rows] == [2.0, 2.0]
    assert [r["tau_target"] for r in t.rows] == [4.0, 4.0]
    full = harness.infinity_trend([2.0, 4.0], 1.0, 0.1)
    for a, b in zip(t.rows, full.rows):
        assert a["mu1_root"] == pytest.approx(2 * b["mu1_root"], rel=1e-12)
        assert a["tau1_root"] == pytest.approx(2 * b["tau1_root"], rel=1e-8)


def test_trend_skips_tau_beyond_fem_range():
    t = harness.infinity_trend([16.0, 32.0], 1.0, 0.1)
    assert all(math.isnan(r["tau1_root"]) for r in t.rows)
    assert t.nu1_decreasing
