from __future__ import annotations

import io

import numpy as np
import pytest

from spaceuser.errors import DimensionMismatch
from spaceuser.scheduler import (
    PLAN_HEADER,
    SessionProblem,
    brute_force,
    build_session,
    schedule_horizon,
    solve_session,
    write_plan_rows,
)


def problem(value, capacity=None, previous=None, b=0.0, feasible=None, penalize_all=False):
    value = np.asarray(value, dtype=float)
    n, m = value.shape
    feasible = value > 0 if feasible is None else np.asarray(feasible)
    capacity = np.ones(n, dtype=int) if capacity is None else np.asarray(capacity)
    return SessionProblem(0, list(range(n)), list(range(m)), np.where(feasible, value, 0.0), feasible,
                          capacity, previous, b, penalize_all)


def random_problem(rng, with_previous=True):
    while True:
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        if n * m <= 12:
            break
    feasible = rng.random((n, m)) < 0.75
    value = np.where(feasible, rng.uniform(0, 100, (n, m)), 0.0)
    prev = None
    if with_previous and rng.random() < 0.7:
        prev = np.zeros((n, m), dtype=bool)
        for j in range(m):
            i = int(rng.integers(-1, n))
            if i >= 0:
                prev[i, j] = True
    b = float(rng.choice([0.0, 0.2, 0.5]))
    return SessionProblem(0, list(range(n)), list(range(m)), value, feasible,
                          rng.integers(0, 3, n), prev, b)


def check_plan(p: SessionProblem, plan):
    assert plan.assignment.sum(axis=0).max(initial=0) <= 1
    assert np.all(plan.per_relay_load <= p.capacity)
    assert not np.any(plan.assignment & ~p.feasible)
    np.testing.assert_array_equal(plan.per_relay_load, plan.assignment.sum(axis=1))


def test_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1200):
        p = random_problem(rng)
        plan = solve_session(p)
        check_plan(p, plan)
        best, _ = brute_force(p)
        if not np.isclose(plan.objective, best, rtol=0, atol=1e-9):
            mismatches += 1
    assert mismatches == 0


def test_single_resource_argmax():
    plan = solve_session(problem([[10.0, 7.0]], b=0.2))
    assert plan.assignment.tolist() == [[True, False]]
    assert plan.objective == pytest.approx(8.0)
    assert plan.switches == 1


def test_two_by_two_matches_exhaustive():
    p = problem([[10.0, 9.0], [9.0, 1.0]])
    plan = solve_session(p)
    best, assignment = brute_force(p)
    assert plan.objective == best == 18.0
    np.testing.assert_array_equal(plan.assignment, assignment)


def test_penalty_keeps_existing_link():
    prev = np.array([[True], [False]])
    plan = solve_session(problem([[10.0], [11.0]], previous=prev, b=0.2))
    assert plan.assignment[:, 0].tolist() == [True, False]
    assert plan.objective == 10.0 and plan.switches == 0
    # the literal rule charges every link, so the larger value wins
    plan = solve_session(problem([[10.0], [11.0]], previous=prev, b=0.2, penalize_all=True))
    assert plan.assignment[:, 0].tolist() == [False, True]


def test_without_penalty_previous_plan_is_irrelevant():
    rng = np.random.default_rng(5)
    for _ in range(200):
        p = random_problem(rng, with_previous=False)
        p0 = SessionProblem(0, p.relays, p.users, p.value, p.feasible, p.capacity, None, 0.0)
        prev = rng.random(p.value.shape) < 0.3
        p1 = SessionProblem(0, p.relays, p.users, p.value, p.feasible, p.capacity, prev, 0.0)
        a, b = solve_session(p0), solve_session(p1)
        assert a.objective == pytest.approx(b.objective)
        np.testing.assert_array_equal(a.assignment, b.assignment)


def test_adding_a_feasible_pair_never_hurts():
    rng = np.random.default_rng(11)
    for _ in range(300):
        p = random_problem(rng)
        off = np.argwhere(~p.feasible)
        if off.size == 0:
            continue
        i, j = off[int(rng.integers(len(off)))]
        feasible = p.feasible.copy()
        feasible[i, j] = True
        value = p.value.copy()
        value[i, j] = rng.uniform(0, 100)
        q = SessionProblem(0, p.relays, p.users, value, feasible, p.capacity, p.previous, p.penalty_fraction)
        assert solve_session(q).objective >= solve_session(p).objective - 1e-9


def test_scale_invariance():
    rng = np.random.default_rng(13)
    for _ in range(200):
        p = random_problem(rng)
        q = SessionProblem(0, p.relays, p.users, p.value * 7.25, p.feasible, p.capacity, p.previous,
                           p.penalty_fraction)
        a, b = solve_session(p), solve_session(q)
        assert b.objective == pytest.approx(7.25 * a.objective)
        np.testing.assert_array_equal(a.assignment, b.assignment)


def test_capacity_expansion():
    p = problem(np.full((2, 5), 10.0), capacity=[2, 3])
    plan = solve_session(p)
    assert plan.per_relay_load.tolist() == [2, 3] and plan.objective == 50.0
    assert solve_session(problem(np.full((2, 5), 10.0), capacity=[0, 0])).objective == 0.0


def test_zero_value_pairs_are_not_assigned():
    plan = solve_session(problem([[0.0, 5.0]], feasible=[[True, True]], capacity=[2]))
    assert plan.assignment.tolist() == [[False, True]]


# -- building sessions

def test_build_session_min_semantics():
    backlog = np.array([10e9, 0.0, 80e9])
    deliverable = np.array([[56.25e9, 56.25e9, 56.25e9],
                            [30.00e9, 5.00e9, 70.00e9],
                            [1.00e9, 2.00e9, 90.00e9]])
    feasible = np.array([[True, True, False], [True, False, True], [True, True, True]])
    p = build_session(backlog, deliverable, feasible, np.array([1, 1, 1]))
    expected = np.array([[10e9, 0.0, 0.0],
                         [10e9, 0.0, 70e9],
                         [1e9, 0.0, 80e9]])
    np.testing.assert_array_equal(p.value, expected)


def test_build_session_zero_backlog_and_dimensions():
    p = build_session(np.zeros(4), np.ones((3, 4)), np.ones((3, 4), bool), np.ones(3, int))
    assert not p.value.any()
    with pytest.raises(DimensionMismatch):
        build_session(np.zeros(3), np.ones((3, 4)), np.ones((3, 4), bool), np.ones(3, int))
    with pytest.raises(DimensionMismatch):
        build_session(np.zeros(4), np.ones((3, 4)), np.ones((3, 4), bool), np.ones(2, int))
    with pytest.raises(DimensionMismatch):
        problem([[1.0]], previous=np.zeros((2, 1), bool))


def test_problem_validation():
    with pytest.raises(ValueError):
        problem([[1.0]], b=1.0)
    with pytest.raises(ValueError):
        SessionProblem(0, [0], [0], np.array([[5.0]]), np.array([[False]]), np.array([1]))


# -- horizon

def test_horizon_single_session_is_solve_session():
    p = problem([[3.0, 4.0], [5.0, 1.0]])
    [plan] = schedule_horizon([lambda prev: p])
    assert plan.objective == solve_session(p).objective


def test_horizon_without_penalty_is_independent():
    value = np.array([[5.0, 4.0], [4.0, 5.0]])
    builders = [lambda prev, v=v: problem(v, previous=None if prev is None else prev.assignment)
                for v in (value, value[::-1], value)]
    plans = schedule_horizon(builders)
    for plan, v in zip(plans, (value, value[::-1], value)):
        assert plan.objective == solve_session(problem(v)).objective


def ten_user_fixture(seed=17, sessions=20, relays=6, users=10):
    """Slowly drifting random values over a small relay set."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(20, 100, (relays, users))
    out = []
    for _ in range(sessions):
        base = np.clip(base + rng.normal(0, 12, base.shape), 1, None)
        feasible = rng.random(base.shape) < 0.8
        out.append((np.where(feasible, base, 0.0), feasible))
    return out


def total_switches(b):
    fixture = ten_user_fixture()
    builders = [lambda prev, v=v, f=f: SessionProblem(0, list(range(6)), list(range(10)), v, f,
                                                       np.full(6, 2), None if prev is None else prev.assignment, b)
                for v, f in fixture]
    return sum(p.switches for p in schedule_horizon(builders))


def test_penalty_reduces_switching_on_ten_user_fixture():
    assert total_switches(0.5) <= total_switches(0.0)


def test_plan_rows():
    buf = io.StringIO()
    write_plan_rows(buf, [(0, "u", "r", "p", 10, 1)])
    assert buf.getvalue().splitlines()[0] == ",".join(PLAN_HEADER)
