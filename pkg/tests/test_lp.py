"""Tests for the LP container and the deterministic tie-broken solver."""

import numpy as np
import pytest

from vess.errors import NumericalFailureError, ValidationError
from vess.lp import (
    INFEASIBLE,
    OPTIMAL,
    SAMPLE,
    STRUCTURAL,
    UNBOUNDED,
    LinearProgram,
    diagnose_infeasible,
    solve,
    solve_unique,
)


def _lp(n, c, lo=None, hi=None):
    lo = np.zeros(n) if lo is None else np.asarray(lo, float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, float)
    return LinearProgram(n, c, lo, hi)


def test_hand_optimum_two_vars():
    # min -x - 2y  s.t.  x + y <= 3, x <= 2, y <= 2; optimum (1, 2), J = -5.
    lp = _lp(2, [-1.0, -2.0], hi=[2.0, 2.0])
    lp.add_row([0, 1], [1.0, 1.0], "<=", 3.0)
    rep = solve(lp)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(-5.0, abs=1e-9)
    assert rep.x == pytest.approx([1.0, 2.0], abs=1e-9)
    assert rep.primal_residual <= 1e-8
    assert rep.duality_gap <= 1e-8 * 6


def test_ge_row():
    lp = _lp(1, [1.0])
    lp.add_row([0], [1.0], ">=", 2.0)
    rep = solve(lp)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(2.0, abs=1e-9)


def test_eq_row():
    lp = _lp(2, [1.0, 1.0], hi=[3.0, 10.0])
    lp.add_row([0, 1], [1.0, 1.0], "==", 5.0)
    rep = solve(lp)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(5.0, abs=1e-9)
    assert rep.slack[0] == pytest.approx(0.0, abs=1e-9)


def test_infeasible_status():
    lp = _lp(1, [1.0], hi=[1.0])
    lp.add_row([0], [1.0], ">=", 2.0)
    rep = solve(lp)
    assert rep.status == INFEASIBLE
    assert rep.x is None


def test_unbounded_status():
    lp = _lp(1, [-1.0])
    lp.add_row([0], [1.0], ">=", 0.0)
    rep = solve(lp)
    assert rep.status == UNBOUNDED


def test_row_order_invariance_bitwise():
    # The same row content added in shuffled order must give the same bits.
    rng = np.random.default_rng(7)
    n = 6
    c = rng.normal(size=n)
    rows = [(rng.choice(n, size=2, replace=False), rng.normal(size=2), rng.uniform(1, 3))
            for _ in range(12)]

    def build(order):
        lp = _lp(n, c, hi=np.full(n, 4.0))
        for t in order:
            cols, vals, rhs = rows[t]
            lp.add_row(cols, vals, "<=", rhs)
        return lp

    rep_a = solve(build(range(12)))
    rep_b = solve(build(rng.permutation(12)))
    assert rep_a.status == rep_b.status == OPTIMAL
    assert np.array_equal(rep_a.x, rep_b.x)
    assert rep_a.objective == rep_b.objective


def test_tie_break_minimal_representative():
    # Zero objective: every feasible point is stage-1 optimal.  Stage 2 picks
    # the minimal-sum vertex of {x + 2y >= 2, 0 <= x,y <= 2}, which is (0, 1).
    lp = _lp(2, [0.0, 0.0], hi=[2.0, 2.0])
    lp.add_row([0, 1], [1.0, 2.0], ">=", 2.0)
    rep = solve_unique(lp)
    assert rep.status == OPTIMAL
    assert rep.tie_broken
    assert rep.x == pytest.approx([0.0, 1.0], abs=1e-9)
    assert rep.objective == pytest.approx(0.0, abs=1e-12)


def test_tie_break_keeps_objective():
    # Degenerate face x + y = 1 with c = (1, 1): stage 2 must not leave it.
    lp = _lp(2, [1.0, 1.0], hi=[1.0, 1.0])
    lp.add_row([0, 1], [1.0, 1.0], ">=", 1.0)
    rep = solve_unique(lp)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(1.0, abs=1e-6)
    assert rep.x[0] + rep.x[1] == pytest.approx(1.0, abs=1e-7)


def test_chunked_rows_with_padding():
    # Interior -1 padding slots must be ignored by assembly and geometry.
    lp = _lp(3, [-1.0, -1.0, -1.0], hi=[5.0, 5.0, 5.0])
    cols = np.array([[0, -1, 1], [2, -1, -1]])
    vals = np.array([[1.0, 9.9, 1.0], [1.0, 9.9, 9.9]])
    lp.add_rows(cols, vals, "<=", np.array([2.0, 1.0]), SAMPLE, "caps",
                sample=np.array([0, 1]), step=np.array([0, 1]))
    rep = solve(lp)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(-3.0, abs=1e-9)
    assert rep.activity == pytest.approx([2.0, 1.0], abs=1e-9)
    assert rep.slack == pytest.approx([0.0, 0.0], abs=1e-9)


def test_row_tags_roundtrip():
    lp = _lp(2, [0.0, 0.0])
    lp.add_row([0], [1.0], "<=", 1.0, STRUCTURAL, "cap", step=3)
    lp.add_rows(np.array([[1], [1]]), np.ones((2, 1)), ">=", np.zeros(2), SAMPLE,
                "provision", sample=np.array([4, 5]), step=np.array([0, 1]))
    tags = lp.row_tags()
    assert tags[0].kind == STRUCTURAL and tags[0].step == 3 and tags[0].sample is None
    assert tags[1].kind == SAMPLE and tags[1].sample == 4
    assert tags[2].label() == "provision[i=5,k=1]"


def test_to_text_smoke():
    lp = _lp(2, [1.0, -1.0], hi=[2.0, 2.0])
    lp.add_row([0, 1], [1.0, 1.0], "<=", 3.0, family="budget")
    text = lp.to_text()
    assert "Minimize" in text and "budget" in text and "<=" in text
    assert "x0" in text and "Bounds" in text


def test_validation_errors():
    lp = _lp(2, [0.0, 0.0])
    with pytest.raises(ValidationError):
        lp.add_row([0], [1.0], "=<", 1.0)
    with pytest.raises(ValidationError):
        lp.add_row([0], [1.0], "<=", 1.0, kind="mystery")
    with pytest.raises(ValidationError):
        lp.add_row([5], [1.0], "<=", 1.0)
    with pytest.raises(ValidationError):
        LinearProgram(2, [0.0], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        LinearProgram(1, [0.0], [2.0], [1.0])


def test_random_solves_meet_residuals():
    rng = np.random.default_rng(123)
    for _ in range(20):
        n = int(rng.integers(3, 8))
        lp = _lp(n, rng.normal(size=n), hi=rng.uniform(1.0, 3.0, size=n))
        for _ in range(int(rng.integers(2, 10))):
            w = int(rng.integers(1, min(4, n) + 1))
            cols = rng.choice(n, size=w, replace=False)
            lp.add_row(cols, rng.normal(size=w), "<=", rng.uniform(0.5, 4.0))
        rep = solve(lp)
        assert rep.status == OPTIMAL
        assert rep.primal_residual <= 1e-8
        assert rep.duality_gap <= 1e-8 * (1.0 + abs(rep.objective))


def test_stage_two_failure_is_reported():
    # Forcing an absurd negative tie tolerance must surface as a clear error.
    lp = _lp(1, [1.0], hi=[1.0])
    lp.add_row([0], [1.0], ">=", 0.5)
    with pytest.raises(NumericalFailureError):
        solve_unique(lp, tie_tol=-10.0)


# ------------------------------------------------------------- diagnosis


def test_diagnose_infeasible_names_the_blocking_row():
    lp = LinearProgram(1, np.zeros(1), np.zeros(1), np.ones(1))
    lp.add_row([0], [1.0], ">=", 4.0, family="demand")
    lp.add_row([0], [1.0], "<=", 1.0, family="supply")
    assert solve(lp).status == INFEASIBLE
    hits = diagnose_infeasible(lp)
    assert len(hits) == 1
    tag, deficit = hits[0]
    assert tag.family == "demand"
    assert deficit == pytest.approx(3.0, abs=1e-6)


def test_diagnose_infeasible_handles_equality_rows():
    lp = LinearProgram(1, np.zeros(1), np.zeros(1), np.ones(1))
    lp.add_row([0], [1.0], "==", 5.0, family="pin")
    hits = diagnose_infeasible(lp)
    assert len(hits) == 1
    assert hits[0][0].family == "pin"
    assert hits[0][1] == pytest.approx(4.0, abs=1e-6)


def test_diagnose_infeasible_orders_by_deficit():
    lp = LinearProgram(2, np.zeros(2), np.zeros(2), np.ones(2))
    lp.add_rows(np.array([[0], [1]]), np.array([[1.0], [1.0]]), ">=",
                np.array([3.0, 1.5]), family="floor", step=np.array([1, 2]))
    hits = diagnose_infeasible(lp)
    assert [h[0].step for h in hits] == [1, 2]
    assert hits[0][1] == pytest.approx(2.0, abs=1e-6)
    assert hits[1][1] == pytest.approx(0.5, abs=1e-6)


def test_diagnose_feasible_system_returns_nothing():
    lp = LinearProgram(2, np.array([1.0, 1.0]), np.zeros(2), np.full(2, 10.0))
    lp.add_row([0, 1], [1.0, 1.0], ">=", 3.0, family="floor")
    lp.add_row([0, 1], [1.0, -1.0], "==", 1.0, family="link")
    assert solve(lp).status == OPTIMAL
    assert diagnose_infeasible(lp) == []
