from __future__ import annotations

import pytest
from hypothesis import given, settings

from conftest import fixture_doc
from epitask.compiler import CompiledProblem, GroundAction, compile_task
from epitask.errors import UnknownAction
from epitask.planner import action_classes, resolve_budget, solve, validate_plan
from epitask.tasks import task_from_dict
from generators import small_tasks
from oracles import bfs_shortest_plan, bfs_verdict


def bandwidth_variant(budget: int):
    doc = fixture_doc("task_compile_two_agent.json")
    for m in doc["mechanics"]:
        if m["type"] == "limited_bandwidth":
            m["budget"] = budget
    return task_from_dict(doc)


def test_two_agent_plan(two_agent):
    p = compile_task(two_agent)
    result = solve(p)
    assert result.verdict == "solvable"
    assert validate_plan(p, result.plan).valid
    classes = [c for c in action_classes(p, result.plan) if c != "navigate"]
    assert classes == ["place", "observe", "inform", "inform_nested", "open"]
    assert result.plan[2].endswith("_tok1") and result.plan[3].endswith("_tok2")


def test_two_agent_plan_is_near_shortest(two_agent):
    p = compile_task(two_agent)
    assert len(bfs_shortest_plan(p)) == len(solve(p).plan) == 6


def test_single_token_is_unsolvable():
    p = compile_task(bandwidth_variant(1))
    assert solve(p).verdict == "unsolvable"
    assert bfs_verdict(p)[0] == "unsolvable"


def test_goal_true_in_init():
    p = CompiledProblem(("(a)",), (), frozenset({"(a)"}), ("(a)",), {})
    result = solve(p)
    assert (result.verdict, result.plan) == ("solvable", ())
    assert validate_plan(p, []).valid


def test_swapped_informs_fail_at_first_inform(two_agent):
    p = compile_task(two_agent)
    plan = list(solve(p).plan)
    swapped = [plan[0], plan[3], plan[2], plan[1], *plan[4:]]
    replay = validate_plan(p, swapped)
    assert not replay.valid and replay.failed_step == 1
    assert "(knows_agent_1_690d7b4b)" in replay.missing


def test_unmet_goal_reported(two_agent):
    p = compile_task(two_agent)
    replay = validate_plan(p, solve(p).plan[:-1])
    assert not replay.valid and replay.unmet_goal == ("(is_open cabinet_34)",)


def test_unknown_action(two_agent):
    with pytest.raises(UnknownAction):
        validate_plan(compile_task(two_agent), ["teleport_agent_0"])


def test_budget_exhausted_and_env(monkeypatch, chain4):
    p = compile_task(chain4)
    result = solve(p, node_budget=10)
    assert result.verdict == "budget_exhausted" and result.nodes_expanded == 10
    monkeypatch.setenv("EPITASK_NODE_BUDGET", "77")
    assert resolve_budget(None) == 77 and resolve_budget(5) == 5
    monkeypatch.delenv("EPITASK_NODE_BUDGET")
    assert resolve_budget(None) == 1_000_000


def test_determinism(two_agent):
    p = compile_task(two_agent)
    a, b = solve(p), solve(p)
    assert (a.plan, a.nodes_expanded) == (b.plan, b.nodes_expanded)


def test_relay_chain_with_larger_budgets():
    doc = fixture_doc("task_depth4_chain.json")
    budgets = {"agent_0": 0, "agent_1": 3, "agent_2": 2, "agent_3": 1}
    for m in doc["mechanics"]:
        if m["type"] == "limited_bandwidth":
            m["budget"] = budgets[m["agent"]]
    p = compile_task(task_from_dict(doc))
    result = solve(p)
    assert result.verdict == "solvable"
    relays = [n for n in result.plan if n.startswith("inform_knows_agent_2_") and n.split("_from_")[1].startswith("agent_1")]
    relays += [n for n in result.plan if n.startswith("inform_knows_agent_3_") and n.split("_from_")[1].startswith("agent_2")]
    assert len(relays) >= 2


def test_tiny_custom_problem():
    acts = (
        GroundAction("a", None, frozenset({"(p)"}), frozenset({"(q)"}), frozenset({"(p)"}), "physical"),
        GroundAction("b", None, frozenset({"(q)"}), frozenset({"(r)"}), frozenset(), "physical"),
    )
    p = CompiledProblem(("(p)", "(q)", "(r)"), acts, frozenset({"(p)"}), ("(r)",), {})
    assert solve(p).plan == ("a", "b")
    unsolvable = CompiledProblem(p.fluents, acts[1:], p.init, p.goal, {})
    assert solve(unsolvable).verdict == "unsolvable"


@settings(max_examples=200, deadline=None)
@given(small_tasks())
def test_verdict_agrees_with_oracle(task):
    p = compile_task(task)
    verdict, _ = bfs_verdict(p)
    result = solve(p)
    assert result.verdict == verdict
    if verdict == "solvable":
        assert validate_plan(p, result.plan).valid
