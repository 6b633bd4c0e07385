"""Per-session capacity-constrained assignment of space users to relays."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch

DEFAULT_CAPACITY = 32
DEFAULT_PENALTY = 0.1


def identity_value(value: np.ndarray, session_index: int) -> np.ndarray:
    """Default time-weighting hook: the backlog-capped volume itself."""
    return value


@dataclass
class SessionProblem:
    session_index: int
    relays: Sequence
    users: Sequence
    value: np.ndarray  # N x M, bits
    feasible: np.ndarray  # N x M bool
    capacity: np.ndarray  # N
    previous: Optional[np.ndarray] = None  # N x M bool
    penalty_fraction: float = DEFAULT_PENALTY
    penalize_all: bool = False  # literal variant: every active link pays b

    def __post_init__(self):
        n, m = len(self.relays), len(self.users)
        self.value = np.asarray(self.value, dtype=float)
        self.feasible = np.asarray(self.feasible, dtype=bool)
        self.capacity = np.asarray(self.capacity, dtype=np.int64)
        if self.value.shape != (n, m) or self.feasible.shape != (n, m) or self.capacity.shape != (n,):
            raise DimensionMismatch(f"expected value/feasible {n}x{m} and capacity {n}")
        if self.previous is not None:
            self.previous = np.asarray(self.previous, dtype=bool)
            if self.previous.shape != (n, m):
                raise DimensionMismatch(f"previous plan is {self.previous.shape}, expected {(n, m)}")
        if not 0.0 <= self.penalty_fraction < 1.0:
            raise ValueError("penalty_fraction must lie in [0, 1)")
        if np.any(self.value < 0) or np.any(self.value[~self.feasible] != 0):
            raise ValueError("value must be >= 0 and zero on infeasible pairs")
        if np.any(self.capacity < 0):
            raise ValueError("capacity must be >= 0")

    def is_new(self) -> np.ndarray:
        """Pairs that would be a new link relative to the previous plan."""
        if self.previous is None:
            return np.ones(self.value.shape, dtype=bool)
        return ~self.previous

    def weights(self) -> np.ndarray:
        """Net value of each pair, Phi - B, with B = b * Phi on charged links."""
        charged = np.ones_like(self.feasible) if self.penalize_all else self.is_new()
        w = np.where(charged, self.value * (1.0 - self.penalty_fraction), self.value)
        return np.where(self.feasible, w, 0.0)


@dataclass
class AssignmentPlan:
    assignment: np.ndarray  # N x M bool
    per_relay_load: np.ndarray  # N
    objective: float
    switches: int

    def user_relay(self) -> np.ndarray:
        """Relay row per user, -1 when unassigned."""
        out = np.full(self.assignment.shape[1], -1, dtype=np.int64)
        rows, cols = np.nonzero(self.assignment)
        out[cols] = rows
        return out


def build_session(backlog: np.ndarray, deliverable: np.ndarray, feasible: np.ndarray, capacity: np.ndarray,
                  previous: Optional[np.ndarray] = None, penalty_fraction: float = DEFAULT_PENALTY,
                  session_index: int = 0, relays: Optional[Sequence] = None, users: Optional[Sequence] = None,
                  phi: Callable[[np.ndarray, int], np.ndarray] = identity_value,
                  penalize_all: bool = False) -> SessionProblem:
    """Value matrix phi(min(X_i, D_ij)) on feasible pairs, zero elsewhere."""
    backlog = np.asarray(backlog, dtype=float)
    deliverable = np.asarray(deliverable, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    if backlog.ndim != 1 or deliverable.ndim != 2:
        raise DimensionMismatch("backlog must be 1-D and deliverable 2-D")
    n, m = deliverable.shape
    if backlog.shape[0] != m or feasible.shape != (n, m) or np.shape(capacity) != (n,):
        raise DimensionMismatch(f"deliverable {deliverable.shape}, backlog {backlog.shape}, "
                                f"feasible {feasible.shape}, capacity {np.shape(capacity)}")
    value = np.where(feasible, phi(np.minimum(backlog[None, :], deliverable), session_index), 0.0)
    return SessionProblem(session_index, relays if relays is not None else list(range(n)),
                          users if users is not None else list(range(m)), value, feasible, capacity,
                          previous, penalty_fraction, penalize_all)


def solve_session(problem: SessionProblem) -> AssignmentPlan:
    """Optimal assignment maximizing the summed net value under capacities.

    Each relay is expanded into unit slots (no more than it could ever fill)
    and users are matched to slots with a rectangular Hungarian solve.  Pairs
    matched at zero net value are dropped, so only links that carry data are
    kept.
    """
    w = problem.weights()
    n, m = w.shape
    assignment = np.zeros((n, m), dtype=bool)
    useful = w > 0.0
    slots = np.minimum(problem.capacity, useful.sum(axis=1))
    if slots.sum() > 0 and m > 0:
        slot_relay = np.repeat(np.arange(n), slots)
        cost = w[slot_relay].T  # users x slots
        rows, cols = linear_sum_assignment(cost, maximize=True)
        keep = cost[rows, cols] > 0.0
        assignment[slot_relay[cols[keep]], rows[keep]] = True
    objective = float(w[assignment].sum())
    new = assignment & problem.is_new()
    return AssignmentPlan(assignment, assignment.sum(axis=1), objective, int(new.sum()))


def schedule_horizon(builders: Sequence[Callable[[Optional[AssignmentPlan]], SessionProblem]]) -> list[AssignmentPlan]:
    """Myopic sequence of session solves; each builder sees the realized previous plan."""
    plans: list[AssignmentPlan] = []
    prev = None
    for build in builders:
        prev = solve_session(build(prev))
        plans.append(prev)
    return plans


def brute_force(problem: SessionProblem) -> tuple[float, np.ndarray]:
    """Exhaustive optimum for small instances (test oracle)."""
    w = problem.weights()
    n, m = w.shape
    best = (0.0, np.zeros((n, m), dtype=bool))
    load = np.zeros(n, dtype=np.int64)
    choice = [-1] * m

    def rec(j: int, total: float):
        nonlocal best
        if j == m:
            if total > best[0]:
                a = np.zeros((n, m), dtype=bool)
                for u, r in enumerate(choice):
                    if r >= 0:
                        a[r, u] = True
                best = (total, a)
            return
        choice[j] = -1
        rec(j + 1, total)
        for i in range(n):
            if problem.feasible[i, j] and load[i] < problem.capacity[i]:
                load[i] += 1
                choice[j] = i
                rec(j + 1, total + w[i, j])
                load[i] -= 1
        choice[j] = -1

    rec(0, 0.0)
    return best


PLAN_HEADER = ["session_index", "user_id", "relay_id", "pop_id", "value_bits", "was_switch"]


def write_plan_rows(fh: IO[str], rows, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(PLAN_HEADER)
    w.writerows(rows)
