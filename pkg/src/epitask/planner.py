"""Greedy best-first search over a compiled classical problem.

States are bitmasks over the declared fluents. The heuristic counts unmet goal
conjuncts; ties break by insertion order so search is deterministic.
"""

from __future__ import annotations

import heapq
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

from .compiler import CompiledProblem, check_problem
from .errors import UnknownAction

DEFAULT_NODE_BUDGET = 1_000_000
BUDGET_ENV = "EPITASK_NODE_BUDGET"


@dataclass(frozen=True)
class PlanResult:
    verdict: str  # solvable | unsolvable | budget_exhausted
    plan: tuple[str, ...] = ()
    nodes_expanded: int = 0
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "plan": list(self.plan),
            "length": len(self.plan),
            "nodes_expanded": self.nodes_expanded,
            "elapsed_s": round(self.elapsed, 6),
        }


@dataclass(frozen=True)
class ReplayResult:
    valid: bool
    failed_step: int | None = None
    missing: tuple[str, ...] = ()
    unmet_goal: tuple[str, ...] = ()
    trace: tuple[frozenset[str], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class _Op:
    name: str
    pre: int
    add: int
    delete: int


class Encoding:
    """Bit-level view of a problem shared by the planner and plan replay."""

    def __init__(self, problem: CompiledProblem) -> None:
        check_problem(problem)
        self.problem = problem
        self.index = {f: i for i, f in enumerate(problem.fluents)}
        self.ops = [_Op(a.name, self.mask(a.pre), self.mask(a.add), self.mask(a.delete)) for a in problem.actions]
        self.by_name = {op.name: op for op in self.ops}
        self.init = self.mask(problem.init)
        self.goal_bits = [1 << self.index[g] for g in problem.goal]
        self.goal = self.mask(problem.goal)

    def mask(self, fluents) -> int:
        m = 0
        for f in fluents:
            m |= 1 << self.index[f]
        return m

    def decode(self, state: int) -> frozenset[str]:
        return frozenset(f for f, i in self.index.items() if state >> i & 1)

    def h(self, state: int) -> int:
        return sum(1 for b in self.goal_bits if not state & b)

    @staticmethod
    def apply(op: _Op, state: int) -> int:
        return (state & ~op.delete) | op.add


def resolve_budget(node_budget: int | None) -> int:
    if node_budget is not None:
        return node_budget
    raw = os.environ.get(BUDGET_ENV)
    return int(raw) if raw else DEFAULT_NODE_BUDGET


def solve(problem: CompiledProblem, node_budget: int | None = None) -> PlanResult:
    """Find a plan or prove that none exists within ``node_budget`` expansions."""
    start = time.perf_counter()
    enc = Encoding(problem)
    budget = resolve_budget(node_budget)
    goal, ops = enc.goal, enc.ops

    def done(verdict: str, plan: tuple[str, ...] = (), expanded: int = 0) -> PlanResult:
        return PlanResult(verdict, plan, expanded, time.perf_counter() - start)

    if enc.init & goal == goal:
        return done("solvable")
    parent: dict[int, tuple[int, int] | None] = {enc.init: None}
    heap = [(enc.h(enc.init), 0, enc.init)]
    counter = 1
    expanded = 0
    while heap:
        if expanded >= budget:
            return done("budget_exhausted", expanded=expanded)
        _, _, state = heapq.heappop(heap)
        expanded += 1
        for i, op in enumerate(ops):
            if state & op.pre != op.pre:
                continue
            nxt = (state & ~op.delete) | op.add
            if nxt in parent:
                continue
            parent[nxt] = (state, i)
            if nxt & goal == goal:
                plan = _extract(parent, nxt, ops)
                replay = validate_plan(problem, plan)
                if not replay.valid:
                    raise AssertionError(f"planner produced an invalid plan at step {replay.failed_step}")
                return done("solvable", plan, expanded)
            heapq.heappush(heap, (enc.h(nxt), counter, nxt))
            counter += 1
    return done("unsolvable", expanded=expanded)


def _extract(parent: dict[int, tuple[int, int] | None], state: int, ops: list[_Op]) -> tuple[str, ...]:
    names: list[str] = []
    link = parent[state]
    while link is not None:
        prev, i = link
        names.append(ops[i].name)
        link = parent[prev]
    return tuple(reversed(names))


def validate_plan(problem: CompiledProblem, plan: Sequence[str]) -> ReplayResult:
    """Replay ``plan`` from the initial state; report the first failing step (0-based)."""
    actions = {a.name: a for a in problem.actions}
    state = set(problem.init)
    trace = [frozenset(state)]
    for step, name in enumerate(plan):
        if name not in actions:
            raise UnknownAction(name)
        act = actions[name]
        missing = act.pre - state
        if missing:
            return ReplayResult(False, step, tuple(sorted(missing)), (), tuple(trace))
        state = (state - act.delete) | act.add
        trace.append(frozenset(state))
    unmet = tuple(g for g in problem.goal if g not in state)
    if unmet:
        return ReplayResult(False, len(plan), (), unmet, tuple(trace))
    return ReplayResult(True, None, (), (), tuple(trace))


def action_classes(problem: CompiledProblem, plan: Sequence[str]) -> list[str]:
    """Class of each plan step; physical steps are reported by their verb."""
    actions = {a.name: a for a in problem.actions}
    out = []
    for name in plan:
        act = actions[name]
        out.append(name.split("_", 1)[0] if act.cls == "physical" else act.cls)
    return out
