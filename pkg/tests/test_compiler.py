from __future__ import annotations

import json

import pytest
from hypothesis import given, settings

from conftest import fixture_doc
from epitask.compiler import (
    CompiledProblem,
    KnowledgeFluent,
    check_problem,
    compile_task,
    explain_compilation,
    fact_digest,
    fnv1a64,
    problem_from_dict,
    problem_to_dict,
    serialize_problem,
    to_pddl,
)
from epitask.errors import DepthGateFailed, MalformedProblem, NonGroundFact, UnlocatableFact, ValidationFailed
from epitask.goals import Know, Predicate, parse_goal, print_goal
from epitask.tasks import task_from_dict
from generators import small_tasks
from oracles import fnv1a64_reference

BOWL = Predicate("is_on_top", ("bowl_1", "table_22"))

# digests committed once from the reference FNV-1a over the canonical text
GOLDEN = {
    "(is_on_top bowl_1 table_22)": "690d7b4b",
    "(K agent_1 (is_on_top bowl_1 table_22))": "d549435c",
    "(is_on_top box_1 cabinet_12)": "8daae04c",
}


def test_digest_golden_and_reference():
    for text, digest in GOLDEN.items():
        assert fact_digest(parse_goal(text)).digest == digest
        assert fnv1a64_reference(text)[:8] == digest
    assert format(fnv1a64(b""), "016x") == "cbf29ce484222325"


def test_digest_determinism_and_order():
    assert fact_digest(BOWL) == fact_digest(Predicate("is_on_top", ("bowl_1", "table_22")))
    swapped = Predicate("is_on_top", ("table_22", "bowl_1"))
    assert fact_digest(swapped).digest != fact_digest(BOWL).digest
    assert fact_digest(BOWL).text == "(is_on_top bowl_1 table_22)"


def test_digest_rejects_variables():
    with pytest.raises(NonGroundFact):
        fact_digest(Predicate("is_on_top", ("?x", "table_22")))


def test_knowledge_fluent_symbols():
    inner = KnowledgeFluent("agent_1", BOWL)
    outer = KnowledgeFluent("agent_0", Know("agent_1", BOWL))
    assert (inner.layer, inner.symbol) == (1, "knows_agent_1_690d7b4b")
    assert (outer.layer, outer.symbol) == (2, "knows_agent_0_d549435c")
    assert outer.leaf() == BOWL


def test_two_agent_inventory(two_agent):
    p = compile_task(two_agent)
    for sym in ("knows_agent_0_690d7b4b", "knows_agent_1_690d7b4b", "knows_agent_0_d549435c"):
        assert f"({sym})" in p.fluents
    by_cls = {}
    for a in p.actions:
        by_cls.setdefault(a.cls, []).append(a)
    (obs,) = by_cls["observe"]
    assert obs.actor == "agent_1" and "(is_on_top bowl_1 table_22)" in obs.pre and not obs.delete
    informs = by_cls["inform"]
    assert sorted(next(iter(a.delete)) for a in informs) == ["(msg_tok_agent_1_1)", "(msg_tok_agent_1_2)"]
    nested = by_cls["inform_nested"]
    assert len(nested) == 2 and all("(knows_agent_1_690d7b4b)" in a.pre for a in nested)
    assert set(p.goal) == {
        "(is_on_top bowl_1 table_22)",
        "(knows_agent_1_690d7b4b)",
        "(knows_agent_0_d549435c)",
        "(is_open cabinet_34)",
    }
    assert {"(msg_tok_agent_1_1)", "(msg_tok_agent_1_2)"} <= p.init
    # navigation 2 + 6, pick/place 4 (agent_0 never reaches table_22) + 6, open/close 4
    assert len(by_cls["physical"]) == 22


def test_physical_only_goal_is_vacuous():
    doc = fixture_doc("task_compile_two_agent.json")
    doc.update(pddl_goal="(and (is_on_top bowl_1 table_22) (is_open cabinet_34))", target_depth=0)
    p = compile_task(task_from_dict(doc))
    assert {a.cls for a in p.actions} == {"physical"}
    assert not any("knows_" in f for f in p.fluents)
    assert set(p.goal) == {"(is_on_top bowl_1 table_22)", "(is_open cabinet_34)"}
    report = explain_compilation(p)
    for step in range(1, 5):
        line = next(l for l in report.splitlines() if l.startswith(f"Step {step}:"))
        assert line.endswith("(vacuous)")


def test_chain_has_one_token_per_agent(chain4):
    p = compile_task(chain4)
    assert p.meta["tokens"] == [f"(msg_tok_agent_{i}_1)" for i in range(4)]
    report = explain_compilation(p)
    assert "Step 6: Add budget tokens to the initial state (4)" in report
    assert "agent_2->agent_3" in report


def test_explain_headers(two_agent):
    report = explain_compilation(compile_task(two_agent))
    headers = [l for l in report.splitlines() if l.startswith("Step ")]
    assert [h.split(":")[0] for h in headers] == [f"Step {i}" for i in range(1, 7)]
    assert "Create observe operators (1)" in headers[1]
    assert "Create inform operators (2)" in headers[2]
    assert "Replace the goal (4 conjuncts)" in headers[4]


def test_compile_errors(two_agent):
    doc = fixture_doc("task_compile_two_agent.json")
    doc["target_depth"] = 3
    with pytest.raises(DepthGateFailed):
        compile_task(task_from_dict(doc))
    doc = fixture_doc("task_compile_two_agent.json")
    doc["pddl_goal"] = "(is_open table_22)"
    doc["target_depth"] = 0
    with pytest.raises(ValidationFailed):
        compile_task(task_from_dict(doc))
    doc = {
        "task": "t", "agents": ["agent_0", "agent_1"], "pddl_goal": "(K agent_0 (is_on_top bowl_4 chair_10))",
        "category": "cooperative", "target_depth": 1, "turn_budget": 5,
        "scene": fixture_doc("scene_reference.json"),
    }
    with pytest.raises(UnlocatableFact):
        compile_task(task_from_dict(doc))


def test_serialization_round_trip_and_determinism(two_agent, chain4):
    for task in (two_agent, chain4):
        p = compile_task(task)
        assert serialize_problem(p) == serialize_problem(compile_task(task))
        back = problem_from_dict(json.loads(serialize_problem(p)))
        assert back.actions == p.actions and back.init == p.init and back.goal == p.goal


def test_check_problem_rejects_undeclared(two_agent):
    p = compile_task(two_agent)
    broken = CompiledProblem(p.fluents, p.actions, p.init, p.goal + ("(ghost)",), p.meta)
    with pytest.raises(MalformedProblem):
        check_problem(broken)
    doc = problem_to_dict(p)
    doc["goal"].append("(K agent_0 (ghost))")
    with pytest.raises(MalformedProblem):
        problem_from_dict(doc)


def test_pddl_surface(two_agent):
    domain, prob = to_pddl(compile_task(two_agent), "appd")
    assert domain.startswith("(define (domain appd)")
    assert "(:action inform_knows_agent_0_690d7b4b_from_agent_1_tok1" in domain
    assert "(not (msg_tok_agent_1_1))" in domain
    assert "(msg_tok_agent_1_2)" in prob and "(:goal (and" in prob
    assert domain.count("(") == domain.count(")") and prob.count("(") == prob.count(")")
    assert " K " not in prob


def _expected_inform_counts(task, problem):
    declared = {(k["holder"], k["about"]) for k in problem.meta["knowledge"]}
    flat = nested = 0
    for holder, about in declared:
        fact = parse_goal(about)
        for s, r in task.comm_edges():
            if isinstance(fact, Predicate):
                if s == holder and (r, about) in declared:
                    flat += task.bandwidth(s) if task.bandwidth(s) is not None else 1
            elif r == holder and s == fact.agent:
                if (s, print_goal(fact.body)) in declared:
                    nested += task.bandwidth(s) if task.bandwidth(s) is not None else 1
    return flat, nested


@settings(max_examples=1000, deadline=None)
@given(small_tasks(max_depth=3))
def test_structural_laws(task):
    p = compile_task(task)
    check_problem(p)
    assert not any(f.startswith("(K ") for f in p.goal)
    for a in p.actions:
        assert not any(f.startswith("(knows_") for f in a.delete)
        if a.cls == "observe":
            assert not a.delete
        if a.cls in ("inform", "inform_nested"):
            toks = [f for f in a.delete if f.startswith("(msg_tok_")]
            assert len(toks) == (0 if task.bandwidth(a.actor) is None else 1)
            assert toks == [f for f in a.pre if f.startswith("(msg_tok_")]
    counts = {"inform": 0, "inform_nested": 0}
    for a in p.actions:
        if a.cls in counts:
            counts[a.cls] += 1
    assert (counts["inform"], counts["inform_nested"]) == _expected_inform_counts(task, p)
    tokens = [f for f in p.init if f.startswith("(msg_tok_")]
    assert len(tokens) == sum(task.bandwidth(a) or 0 for a in task.agents)
