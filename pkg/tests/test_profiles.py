import math

import numpy as np
import pytest

from stormopt.profiles import (DegenerateProblemError, ProfileTable, build_profiles,
                               profile_fraction, solve_threshold, tau_solved)


# ----------------------------------------------------------------- tau_solved

def test_tau_solved_threshold_algebra():
    # f(x0)=10, f*=0, tau=1e-3: solved iff f' < 0.01
    assert tau_solved(10.0, 0.009, 0.0, 1e-3)
    assert not tau_solved(10.0, 0.011, 0.0, 1e-3)
    assert solve_threshold(10.0, 0.0, 1e-3) == pytest.approx(0.01)


def test_tau_solved_extremes():
    for tau in (1e-6, 0.1, 0.9):
        assert tau_solved(5.0, 1.0, 1.0, tau)       # f' = f*
        assert not tau_solved(5.0, 5.0, 1.0, tau)   # f' = f(x0)


def test_tau_solved_degenerate():
    with pytest.raises(DegenerateProblemError):
        tau_solved(1.0, 0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        tau_solved(2.0, 0.5, 1.0, 1.5)


# -------------------------------------------------------------------- tables

def two_by_two_table():
    t = ProfileTable()
    # solver A: 100 on p1, 200 on p2; solver B: 200 on p1, 100 on p2
    t.add("A", "p1", 0, 100, 1e-3, 1000)
    t.add("A", "p2", 0, 200, 1e-3, 1000)
    t.add("B", "p1", 0, 200, 1e-3, 1000)
    t.add("B", "p2", 0, 100, 1e-3, 1000)
    return t


def test_hand_computed_profile():
    t = two_by_two_table()
    for s in ("A", "B"):
        assert profile_fraction(t, s, 1.0) == 0.5
        assert profile_fraction(t, s, 2.0) == 1.0


def test_one_solver_dominates():
    t = ProfileTable()
    for p in ("p1", "p2", "p3"):
        t.add("good", p, 0, 50, 1e-3, 1000)
        t.add("bad", p, 0, None, 1e-3, 1000)
    curves = build_profiles(t)
    assert np.all(curves.fractions["good"] == 1.0)
    assert np.all(curves.fractions["bad"] == 0.0)


def test_identical_solvers_identical_curves():
    t = ProfileTable()
    for p, v in (("p1", 120), ("p2", 340)):
        t.add("s1", p, 0, v, 1e-3, 1000)
        t.add("s2", p, 0, v, 1e-3, 1000)
    curves = build_profiles(t)
    np.testing.assert_array_equal(curves.fractions["s1"], curves.fractions["s2"])
    assert curves.value_at("s1", 1.0) == 1.0


def test_curves_monotone_and_bounded():
    rng = np.random.default_rng(0)
    t = ProfileTable()
    for s in ("a", "b", "c"):
        for p in range(6):
            ev = int(rng.integers(10, 900)) if rng.uniform() > 0.2 else None
            t.add(s, f"p{p}", 0, ev, 1e-3, 1000)
    curves = build_profiles(t)
    for s in curves.solvers:
        f = curves.fractions[s]
        assert np.all(np.diff(f) >= 0)
        assert np.all((0 <= f) & (f <= 1))


def test_seed_averaging_and_unsolved_inf():
    t = ProfileTable()
    t.add("s", "p", 0, 100, 1e-3, 1000)
    t.add("s", "p", 1, 200, 1e-3, 1000)
    assert t.scores()[("s", "p")] == 150.0
    t.add("s", "p", 2, None, 1e-3, 1000)
    assert math.isinf(t.scores()[("s", "p")])


def test_solved_cell_cannot_exceed_budget():
    t = ProfileTable()
    with pytest.raises(ValueError):
        t.add("s", "p", 0, 2000, 1e-3, 1000)


def test_csv_round_trip():
    t = two_by_two_table()
    t.add("A", "p3", 4, None, 0.005, 777)
    again = ProfileTable.from_csv(t.to_csv())
    assert again == t
    assert ProfileTable.from_csv(again.to_csv()) == again


def test_empty_and_single_solver_errors():
    with pytest.raises(ValueError):
        build_profiles(ProfileTable())
    t = ProfileTable()
    t.add("only", "p", 0, 10, 1e-3, 100)
    with pytest.raises(ValueError):
        build_profiles(t)


def test_curves_csv_includes_plot_columns():
    curves = build_profiles(two_by_two_table())
    text = curves.to_csv(plot_columns=True)
    header = text.splitlines()[0].split(",")
    assert header == ["solver", "ratio", "fraction_solved", "log10_ratio"]
