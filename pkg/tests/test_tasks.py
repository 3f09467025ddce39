from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_doc, load_task
from epitask.errors import EmptyPool, MalformedDocument, SchemaViolation
from epitask.goals import k_depth, parse_goal, print_goal
from epitask.tasks import (
    LimitedBandwidth,
    audit_depth_validity,
    check_depth_gate,
    parse_task,
    round_half_up,
    sample_seed_tasks,
    serialize_task,
    task_from_dict,
    validate_task,
)
from generators import audit_case, small_tasks


def scene_f_task(goal: str, mechanics=(), **extra):
    doc = {
        "task": "t",
        "agents": ["agent_0", "agent_1"],
        "pddl_goal": goal,
        "agent_secrets": {},
        "mechanics": list(mechanics),
        "category": "cooperative",
        "target_depth": 0,
        "turn_budget": 10,
        "scene": fixture_doc("scene_reference.json"),
    }
    doc.update(extra)
    return task_from_dict(doc)


def test_two_agent_fixture(two_agent):
    bw = two_agent.of_kind("limited_bandwidth")
    assert bw == [LimitedBandwidth("agent_1", 2)]
    assert k_depth(two_agent.goal) == 2
    assert two_agent.bandwidth("agent_1") == 2 and two_agent.bandwidth("agent_0") is None


def test_chain_fixture(chain4):
    assert len(chain4.of_kind("room_restriction")) == 4
    assert len(chain4.comm_edges()) == 6
    assert all(chain4.bandwidth(a) == 1 for a in chain4.agents)
    assert not chain4.can_communicate("agent_0", "agent_3")


def test_minimal_task_has_no_mechanics():
    task = scene_f_task("(is_on_top cushion_2 table_25)")
    assert task.mechanics == ()
    assert validate_task(task) == []
    assert len(task.comm_edges()) == 2


def test_parse_errors():
    with pytest.raises(MalformedDocument):
        parse_task("{oops")
    doc = fixture_doc("task_compile_two_agent.json")
    del doc["pddl_goal"]
    with pytest.raises(SchemaViolation):
        task_from_dict(doc)
    doc = fixture_doc("task_compile_two_agent.json")
    doc["mechanics"].append({"type": "teleport"})
    with pytest.raises(SchemaViolation):
        task_from_dict(doc)
    doc = fixture_doc("task_compile_two_agent.json")
    del doc["scene"]
    with pytest.raises(SchemaViolation):
        task_from_dict(doc)


def test_round_trip(two_agent, chain4):
    for task in (two_agent, chain4):
        assert parse_task(serialize_task(task)) == task


def test_validate_examples(two_agent, chain4):
    assert validate_task(two_agent) == []
    assert validate_task(chain4) == []
    report = validate_task(scene_f_task("(is_open table_25)"))
    assert [(v.check, v.entity) for v in report] == [("articulated_only", "table_25")]
    remote = {"type": "remote_control", "trigger": "cabinet_33", "target": "cabinet_33"}
    report = validate_task(scene_f_task("(is_open cabinet_33)", [remote]))
    assert [v.check for v in report] == ["mechanic_binding"]


def test_validate_more_violations():
    report = validate_task(scene_f_task("(is_on_top spoon_9 table_25)", agent_secrets={"agent_0": ["Look in drawer_77."]}))
    assert {(v.check, v.entity) for v in report} == {("goal_entity", "spoon_9"), ("secret_reference", "drawer_77")}
    report = validate_task(scene_f_task("(is_open cabinet_33)", category="mixed"))
    assert [v.check for v in report] == ["category"]
    bad = [{"type": "limited_bandwidth", "agent": "agent_7", "budget": -1}]
    assert len(validate_task(scene_f_task("(is_open cabinet_33)", bad))) == 2


def test_depth_gate(two_agent):
    gate = check_depth_gate(two_agent)
    assert gate.passed and gate.measured == 2
    doc = fixture_doc("task_compile_two_agent.json")
    doc["target_depth"] = 3
    gate = check_depth_gate(task_from_dict(doc))
    assert not gate.passed and gate.measured == 2
    assert check_depth_gate(scene_f_task("(is_open cabinet_33)")).passed


def test_audit_examples(inflated_k2, chain4, two_agent):
    assert audit_depth_validity(inflated_k2).verdict == "inflated"
    assert audit_depth_validity(two_agent).verdict == "valid"
    report = audit_depth_validity(chain4)
    assert report.verdict == "valid"
    flagged = [f for f in report.findings if f.multi_hop]
    assert [(f.knower, f.sources) for f in flagged] == [("agent_3", ("agent_1",))]
    assert audit_depth_validity(scene_f_task("(is_open cabinet_33)")).findings == ()


def test_audit_unlocatable():
    task = scene_f_task("(K agent_0 (is_on_top bowl_4 chair_10))", target_depth=1)
    report = audit_depth_validity(task)
    assert report.verdict == "valid" and report.unlocatable == ("(is_on_top bowl_4 chair_10)",)


def test_audit_fixed_labels():
    rng = random.Random(7)
    for i in range(100):
        inflated = i % 2 == 1
        assert audit_depth_validity(audit_case(rng, inflated, i)).verdict == ("inflated" if inflated else "valid")


def _pool(n_failed, n_passed):
    return [(f"f{i}", False) for i in range(n_failed)] + [(f"p{i}", True) for i in range(n_passed)]


def test_sampling_examples():
    s = sample_seed_tasks(_pool(10, 10), 0.8, 5, seed=1)
    assert (s.failed_drawn, s.passed_drawn, s.notes) == (4, 1, ())
    s = sample_seed_tasks(_pool(10, 10), 0.9, 10, seed=1)
    assert (s.failed_drawn, s.passed_drawn) == (9, 1)
    s = sample_seed_tasks(_pool(0, 10), 1.0, 5, seed=1)
    assert (s.failed_drawn, s.passed_drawn) == (0, 5) and s.notes
    with pytest.raises(EmptyPool):
        sample_seed_tasks([], 0.5, 3)
    with pytest.raises(ValueError):
        sample_seed_tasks(_pool(1, 1), 1.5, 1)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 4.49)] == [1, 2, 3, 4]


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12), st.floats(0, 1), st.integers(0, 30), st.integers(0, 99))
def test_sampling_laws(nf, np_, ratio, n, seed):
    pool = _pool(nf, np_)
    if not pool:
        return
    a = sample_seed_tasks(pool, ratio, n, seed)
    assert a == sample_seed_tasks(pool, ratio, n, seed)
    assert len(set(a.task_ids)) == len(a.task_ids) == a.failed_drawn + a.passed_drawn
    assert len(a.task_ids) == min(n, len(pool))
    if a.failed_drawn == round_half_up(ratio * n) and len(a.task_ids) == n:
        assert a.notes == ()


@settings(max_examples=300, deadline=None)
@given(small_tasks(), st.sampled_from(["ghost_1", "cup_99", "table_99"]))
def test_validation_is_monotone(task, ghost):
    base = validate_task(task)
    goal = parse_goal(f"(and {print_goal(task.goal)} (is_on_top {ghost} cabinet_10))")
    grown = validate_task(task.__class__(**{**task.__dict__, "goal": goal}))
    assert len(grown) > len(base)
    assert all(v in grown for v in base)


@settings(max_examples=300, deadline=None)
@given(small_tasks(max_depth=3))
def test_gate_agrees_with_depth(task):
    assert check_depth_gate(task).passed == (k_depth(task.goal) == task.target_depth)
