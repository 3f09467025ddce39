"""Randomized invariants over compiled problems, planner outputs and episodes."""

from __future__ import annotations

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from epitask.compiler import compile_task, fact_digest
from epitask.goals import parse_goal
from epitask.planner import solve, validate_plan
from epitask.simulator import (
    AgentAction,
    Assertion,
    init_episode,
    parse_transcript,
    step,
    transcript_to_jsonl,
)
from epitask.tasks import StateMirroring, parse_task, serialize_task
from epitask.world import world_facts
from generators import small_tasks
from oracles import bfs_verdict

CASES = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
choices = st.lists(st.integers(0, 2**16), min_size=1, max_size=25)


def _walk(problem, picks):
    """Random applicable-action walk; yields (action, state before, state after)."""
    state = set(problem.init)
    for pick in picks:
        ready = [a for a in problem.actions if a.pre <= state]
        if not ready:
            return
        act = ready[pick % len(ready)]
        nxt = (state - act.delete) | act.add
        yield act, state, nxt
        state = nxt


@CASES
@given(small_tasks(), choices)
def test_token_conservation(task, picks):
    problem = compile_task(task)
    sent = {a: 0 for a in task.agents}
    state = set(problem.init)
    for act, _, state in _walk(problem, picks):
        if act.cls in ("inform", "inform_nested") and act.delete:
            sent[act.actor] += 1
    for agent in task.agents:
        budget = task.bandwidth(agent)
        if budget is None:
            continue
        left = sum(1 for f in state if f.startswith(f"(msg_tok_{agent}_"))
        assert left + sent[agent] == budget


@CASES
@given(small_tasks(max_depth=3))
def test_planner_layering_and_tokens(task):
    problem = compile_task(task)
    result = solve(problem)
    if result.verdict != "solvable":
        return
    replay = validate_plan(problem, result.plan)
    assert replay.valid
    inner_of = {}
    for k in problem.meta["knowledge"]:
        if k["layer"] >= 2:
            about = parse_goal(k["about"])
            inner_of[f"({k['symbol']})"] = f"(knows_{about.agent}_{fact_digest(about.body).digest})"
    for before, after in zip(replay.trace, replay.trace[1:]):
        assert {f for f in before if f.startswith("(knows_")} <= after
        for fluent in after - before:
            if fluent in inner_of:
                assert inner_of[fluent] in before
    informs = {}
    for name in result.plan:
        act = problem.action(name)
        if act.cls in ("inform", "inform_nested"):
            informs[act.actor] = informs.get(act.actor, 0) + 1
    for agent, n in informs.items():
        assert task.bandwidth(agent) is None or n <= task.bandwidth(agent)


@CASES
@given(small_tasks())
def test_planner_matches_oracle(task):
    problem = compile_task(task)
    verdict, states = bfs_verdict(problem, limit=50_000)
    if verdict == "too_big":
        return
    assert solve(problem).verdict == verdict


def _random_action(task, actor, pick, data_pick):
    scene = task.scene
    kinds = ["Navigate", "Open", "Close", "Pick", "Place", "SendMessage", "FindObject", "Wait", "Done"]
    kind = kinds[pick % len(kinds)]
    furniture = list(scene.support_furniture)
    objects = list(scene.objects)
    rooms = list(scene.rooms)
    if kind == "Navigate":
        targets = rooms + furniture
        return AgentAction(actor, kind, {"target": targets[data_pick % len(targets)]})
    if kind in ("Open", "Close"):
        return AgentAction(actor, kind, {"furniture": furniture[data_pick % len(furniture)]})
    if kind in ("Pick", "FindObject"):
        return AgentAction(actor, kind, {"object": objects[data_pick % len(objects)]})
    if kind == "Place":
        return AgentAction(
            actor, kind,
            {"object": objects[0], "relation": "on" if data_pick % 2 else "in", "furniture": furniture[data_pick % len(furniture)]},
        )
    if kind == "SendMessage":
        targets = [a for a in task.agents if a != actor] + ["all"]
        fact = parse_goal(f"(is_on_top {objects[0]} {furniture[data_pick % len(furniture)]})")
        about = () if data_pick % 3 else (actor,)
        return AgentAction(
            actor, kind, {"to": targets[data_pick % len(targets)], "facts": (Assertion(fact, bool(data_pick % 2), about),)}
        )
    if kind == "Done" and data_pick % 4:
        return AgentAction(actor, "Wait")
    return AgentAction(actor, kind)


def _play(task, picks):
    ep = init_episode(task, check=False)
    snapshots = [(dict(ep.ledger.entries), ep.world)]
    for i, pick in enumerate(picks):
        if ep.finished:
            break
        actor = ep.expected_actor()
        rec = step(ep, _random_action(task, actor, pick, pick // 9 + i))
        snapshots.append(({a: list(es) for a, es in ep.ledger.entries.items()}, ep.world))
        yield ep, rec, snapshots


episode_picks = st.lists(st.integers(0, 2**16), min_size=1, max_size=30)


@CASES
@given(small_tasks(), episode_picks)
def test_episode_invariants(task, picks):
    """Budget conservation, ledger monotonicity, restriction safety, mirroring and observation soundness."""
    ep = None
    for ep, rec, snaps in _play(task, picks):
        (prev_ledger, _), (ledger, world) = snaps[-2], snaps[-1]
        for agent in task.agents:
            assert ledger[agent][: len(prev_ledger[agent])] == list(prev_ledger[agent])
            room = world.agent_rooms.get(agent)
            assert room not in task.barred_rooms(agent)
        for m in task.of_kind("state_mirroring"):
            a, b = world.furniture_open[m.first], world.furniture_open[m.second]
            assert (a == b) if m.mode == "same" else (a != b)
        facts = world_facts(task.scene, world)
        for entries in rec.ledger_delta.values():
            for e in entries:
                if e["source"] == "observation":
                    assert (parse_goal(e["fact"]) in facts) == e["polarity"]
    if ep is None:
        return
    for agent, use in ep.budget_usage().items():
        if use["initial"] is not None:
            assert use["initial"] == use["remaining"] + use["used"]
            assert use["remaining"] >= 0


@CASES
@given(small_tasks(), episode_picks)
def test_task_and_transcript_round_trips(task, picks):
    assert parse_task(serialize_task(task)) == task
    ep = None
    for ep, _, _ in _play(task, picks):
        pass
    if ep is not None:
        text = transcript_to_jsonl(ep.transcript)
        back = parse_transcript(text)
        assert transcript_to_jsonl(back) == text
        assert [r.action for r in back] == [r.action for r in ep.transcript]
