"""Turn-based symbolic episodes driven by scripted agent actions.

Each agent keeps a knowledge ledger. Entries come from observation (facts
that change or are visible in the agent's room), from structured message
assertions, or from the agent's secrets at spawn. Ledgers only grow; a later
entry about the same fact supersedes earlier ones when beliefs are queried.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .errors import MalformedAction, MalformedAnswer, NotYourTurn, ValidationFailed
from .goals import PREDICATES, Predicate, extract_probes, leaves, parse_fact, physical_projection
from .scene import validate_scene
from .tasks import Task, validate_task
from .world import (
    WorldState,
    actuation,
    fact_location,
    initial_world,
    object_room,
    visible_facts,
    world_facts,
)

ACTION_KINDS = ("Navigate", "Open", "Close", "Pick", "Place", "SendMessage", "FindObject", "Wait", "Done")
BROADCAST = "all"

_REQUIRED = {
    "Navigate": ("target",),
    "Open": ("furniture",),
    "Close": ("furniture",),
    "Pick": ("object",),
    "Place": ("object", "relation", "furniture"),
    "SendMessage": ("to",),
    "FindObject": ("object",),
    "Wait": (),
    "Done": (),
}


# -- actions ---------------------------------------------------------------------


@dataclass(frozen=True)
class Assertion:
    """One structured claim in a message: ``about`` agents know (or not) ``fact``.

    An empty ``about`` asserts the fact itself.
    """

    fact: Predicate
    holds: bool = True
    about: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "predicate": self.fact.name,
            "args": list(self.fact.args),
            "holds": self.holds,
            "about": list(self.about),
        }

    @classmethod
    def from_dict(cls, raw: Any) -> Assertion:
        if not isinstance(raw, Mapping):
            raise MalformedAction("message facts must be objects")
        name, args = raw.get("predicate"), raw.get("args", [])
        sig = PREDICATES.get(name) if isinstance(name, str) else None
        if sig is None:
            raise MalformedAction(f"unknown predicate {name!r} in message")
        if not isinstance(args, list) or not all(isinstance(a, str) for a in args) or len(args) != sig.arity:
            raise MalformedAction(f"{name} needs {sig.arity} string argument(s)")
        holds = raw.get("holds", True)
        if not isinstance(holds, bool):
            raise MalformedAction("message assertion 'holds' must be true or false")
        about = raw.get("about", [])
        if not isinstance(about, list) or not all(isinstance(a, str) for a in about):
            raise MalformedAction("'about' must be a list of agent IDs")
        return cls(Predicate(name, tuple(args)), holds, tuple(about))


@dataclass(frozen=True)
class AgentAction:
    actor: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ACTION_KINDS:
            raise MalformedAction(f"unknown action kind {self.kind!r}")
        if not isinstance(self.actor, str) or not self.actor:
            raise MalformedAction("action needs an actor")
        for key in _REQUIRED[self.kind]:
            if not isinstance(self.params.get(key), str):
                raise MalformedAction(f"{self.kind} needs a string {key!r}")
        if self.kind == "Place" and self.params["relation"] not in ("on", "in"):
            raise MalformedAction("Place relation must be 'on' or 'in'")
        if self.kind == "SendMessage":
            facts = self.params.get("facts", [])
            if not isinstance(facts, (list, tuple)):
                raise MalformedAction("SendMessage facts must be a list")
            for f in facts:
                if not isinstance(f, Assertion):
                    raise MalformedAction("SendMessage facts must be Assertions")
            if not isinstance(self.params.get("text", ""), str):
                raise MalformedAction("SendMessage text must be a string")
            # canonical form so serialization round-trips
            object.__setattr__(self, "params", {**self.params, "facts": tuple(facts), "text": self.params.get("text", "")})

    @property
    def assertions(self) -> tuple[Assertion, ...]:
        return tuple(self.params.get("facts", ()))

    def to_dict(self) -> dict[str, Any]:
        params = dict(self.params)
        if self.kind == "SendMessage":
            params["facts"] = [a.to_dict() for a in self.assertions]
        return {"actor": self.actor, "kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, raw: Any) -> AgentAction:
        if not isinstance(raw, Mapping):
            raise MalformedAction("action must be a JSON object")
        params = raw.get("params", {})
        if not isinstance(params, Mapping):
            raise MalformedAction("action params must be an object")
        params = dict(params)
        if raw.get("kind") == "SendMessage":
            params["facts"] = tuple(Assertion.from_dict(f) for f in params.get("facts", []))
        return cls(raw.get("actor"), raw.get("kind"), params)

    def __str__(self) -> str:
        p = self.params
        if self.kind == "Place":
            return f"Place[{p['object']}, {p['relation']}, {p['furniture']}]"
        if self.kind == "SendMessage":
            return f"SendMessage[{p['to']}]"
        key = _REQUIRED[self.kind]
        return f"{self.kind}[{p[key[0]] if key else 'None'}]"


def parse_script(text: str) -> list[AgentAction]:
    """Read a JSON-lines script; blank lines are skipped, ``turn_hint`` is ignored."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedAction(f"script line {lineno}: {exc}") from exc
        out.append(AgentAction.from_dict(raw))
    return out


def scripts_by_actor(actions: Iterable[AgentAction]) -> dict[str, list[AgentAction]]:
    out: dict[str, list[AgentAction]] = {}
    for a in actions:
        out.setdefault(a.actor, []).append(a)
    return out


# -- ledgers ---------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    """``holder`` believes ``chain[0]`` knows ... ``chain[-1]`` knows ``fact`` (is ``polarity``)."""

    fact: Predicate
    polarity: bool
    chain: tuple[str, ...]
    turn: int
    source: str  # observation | message | spawn | secret
    ref: str = ""

    @property
    def layer(self) -> int:
        return len(self.chain) + 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "fact": str(self.fact),
            "polarity": self.polarity,
            "chain": list(self.chain),
            "turn": self.turn,
            "source": self.source,
            "ref": self.ref,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> LedgerEntry:
        return cls(parse_fact(raw["fact"]), raw["polarity"], tuple(raw["chain"]), raw["turn"], raw["source"], raw.get("ref", ""))


class KnowledgeLedger:
    """Append-only per-agent belief store plus last-known entity locations."""

    def __init__(self, agents: Iterable[str]) -> None:
        self.entries: dict[str, list[LedgerEntry]] = {a: [] for a in agents}
        self.locations: dict[str, dict[str, str]] = {a: {} for a in self.entries}

    def belief(self, agent: str, fact: Predicate, chain: tuple[str, ...] = ()) -> bool | None:
        """Latest stance on ``fact``: True, False, or None when nothing was recorded."""
        other = fact.complement()
        for e in reversed(self.entries[agent]):
            if e.chain != chain:
                continue
            if e.fact == fact:
                return e.polarity
            if other is not None and e.fact == other:
                return not e.polarity
        return None

    def record(self, agent: str, entry: LedgerEntry) -> bool:
        """Append ``entry`` unless it restates the agent's current belief."""
        if self.belief(agent, entry.fact, entry.chain) == entry.polarity and any(
            e.fact == entry.fact and e.chain == entry.chain for e in self.entries[agent]
        ):
            return False
        self.entries[agent].append(entry)
        return True

    def sight(self, agent: str, entity: str, room: str) -> None:
        self.locations[agent][entity] = room

    def size(self, agent: str) -> int:
        return len(self.entries[agent])

    def to_dict(self) -> dict[str, Any]:
        return {
            a: {"entries": [e.to_dict() for e in es], "locations": dict(self.locations[a])}
            for a, es in self.entries.items()
        }


# -- episodes --------------------------------------------------------------------


@dataclass
class TranscriptRecord:
    turn: int
    actor: str
    action: AgentAction
    outcome: str  # ok | rejected:<rule>
    world_delta: dict[str, list[str]] = field(default_factory=lambda: {"added": [], "removed": []})
    ledger_delta: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    notice: str = ""
    result: Any = None

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    def to_dict(self) -> dict[str, Any]:
        out = {
            "turn": self.turn,
            "actor": self.actor,
            "action": self.action.to_dict(),
            "outcome": self.outcome,
            "world_delta": self.world_delta,
            "ledger_delta": self.ledger_delta,
        }
        if self.notice:
            out["notice"] = self.notice
        if self.result is not None:
            out["result"] = self.result
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> TranscriptRecord:
        return cls(
            raw["turn"],
            raw["actor"],
            AgentAction.from_dict(raw["action"]),
            raw["outcome"],
            {k: list(v) for k, v in raw.get("world_delta", {}).items()},
            {k: list(v) for k, v in raw.get("ledger_delta", {}).items()},
            raw.get("notice", ""),
            raw.get("result"),
        )


def transcript_to_jsonl(records: Sequence[TranscriptRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)


def parse_transcript(text: str) -> list[TranscriptRecord]:
    return [TranscriptRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


class Episode:
    """Mutable episode state: world, ledgers, turn cursor and transcript."""

    def __init__(self, task: Task, world: WorldState, ledger: KnowledgeLedger) -> None:
        self.task = task
        self.world = world
        self.ledger = ledger
        self.initial_budgets = dict(world.budgets)
        self.cursor = 0
        self.transcript: list[TranscriptRecord] = []

    @property
    def finished(self) -> bool:
        return self.all_done or self.world.turn >= self.task.turn_budget

    @property
    def all_done(self) -> bool:
        return all(a in self.world.done for a in self.task.agents)

    def expected_actor(self) -> str | None:
        agents = self.task.agents
        for k in range(len(agents)):
            a = agents[(self.cursor + k) % len(agents)]
            if a not in self.world.done:
                return a
        return None

    def budget_usage(self) -> dict[str, dict[str, int | None]]:
        out = {}
        for a in self.task.agents:
            init, left = self.initial_budgets.get(a), self.world.budgets.get(a)
            sent = sum(
                1 for r in self.transcript if r.actor == a and r.action.kind == "SendMessage" and r.ok
            )
            out[a] = {"initial": init, "used": sent, "remaining": left}
        return out


_ID = re.compile(r"\b[A-Za-z][A-Za-z]*(?:_[A-Za-z0-9]+)*_\d+\b")


def init_episode(task: Task, check: bool = True) -> Episode:
    """Spawn the world; seed each ledger with its spawn-room view and secret-named facts.

    A secret seeds every current fact about the objects and furniture it names.
    """
    if check:
        violations = validate_scene(task.scene) + validate_task(task)
        if violations:
            raise ValidationFailed(violations)
    world = initial_world(task)
    ledger = KnowledgeLedger(task.agents)
    ep = Episode(task, world, ledger)
    for a in task.agents:
        _look_around(ep, a, "spawn", 0)
    facts = world_facts(task.scene, world)
    for a in task.agents:
        named = {
            m
            for line in task.secrets.get(a, ())
            for m in _ID.findall(line)
            if task.scene.kind_of(m) in ("object", "furniture")
        }
        for f in sorted(facts, key=str):
            if named & set(f.args):
                ledger.record(a, LedgerEntry(f, True, (), 0, "secret", a))
                loc = fact_location(task.scene, world, f)
                if loc is not None:
                    for arg in f.args:
                        if task.scene.kind_of(arg) in ("object", "furniture"):
                            ledger.sight(a, arg, loc)
    return ep


def _look_around(ep: Episode, agent: str, source: str, turn: int) -> list[LedgerEntry]:
    """Record everything visible from ``agent``'s current room."""
    scene, world = ep.task.scene, ep.world
    room = world.agent_rooms.get(agent)
    if room is None:
        return []
    added = []
    for f in sorted(visible_facts(scene, world, room), key=str):
        e = LedgerEntry(f, True, (), turn, source, room)
        if ep.ledger.record(agent, e):
            added.append(e)
    for furn in scene.furniture_in_rooms.get(room, ()):
        ep.ledger.sight(agent, furn, room)
    for obj in scene.objects:
        if object_room(scene, world, obj) == room:
            ep.ledger.sight(agent, obj, room)
    return added


class _Reject(Exception):
    def __init__(self, rule: str, notice: str) -> None:
        super().__init__(notice)
        self.rule, self.notice = rule, notice


def _need(cond: bool, rule: str, notice: str) -> None:
    if not cond:
        raise _Reject(rule, notice)


def step(ep: Episode, action: AgentAction) -> TranscriptRecord:
    """Apply one action for the agent whose turn it is and log the outcome."""
    if ep.finished:
        raise NotYourTurn("episode is over")
    expected = ep.expected_actor()
    if action.actor != expected:
        raise NotYourTurn(f"it is {expected}'s turn, not {action.actor}'s")

    task, scene = ep.task, ep.task.scene
    before = world_facts(scene, ep.world)
    world_before = ep.world
    record = TranscriptRecord(ep.world.turn, action.actor, action, "ok")
    delta: dict[str, list[LedgerEntry]] = {}

    try:
        new_world, result = _apply(ep, action, delta)
        record.result = result
    except _Reject as r:
        new_world = ep.world
        record.outcome = f"rejected:{r.rule}"
        record.notice = r.notice

    turn = ep.world.turn
    ep.world = new_world.evolve(turn=turn + 1)
    after = world_facts(scene, ep.world)
    added, removed = after - before, before - after
    record.world_delta = {"added": sorted(map(str, added)), "removed": sorted(map(str, removed))}

    # observation of changed facts by everyone in the affected room
    for fact, polarity, state in [(f, True, ep.world) for f in added] + [(f, False, world_before) for f in removed]:
        loc = fact_location(scene, state, fact)
        if loc is None:
            continue
        for a in task.agents:
            if ep.world.agent_rooms.get(a) == loc:
                e = LedgerEntry(fact, polarity, (), turn, "observation", loc)
                if ep.ledger.record(a, e):
                    delta.setdefault(a, []).append(e)
    if action.kind == "Navigate" and record.ok:
        for e in _look_around(ep, action.actor, "observation", turn):
            delta.setdefault(action.actor, []).append(e)

    record.ledger_delta = {a: [e.to_dict() for e in es] for a, es in delta.items()}
    idx = task.agents.index(action.actor)
    ep.cursor = (idx + 1) % len(task.agents)
    ep.transcript.append(record)
    return record


def _apply(ep: Episode, action: AgentAction, delta: dict[str, list[LedgerEntry]]) -> tuple[WorldState, Any]:
    task, scene, world = ep.task, ep.task.scene, ep.world
    actor, p = action.actor, action.params
    here = world.agent_rooms.get(actor)
    kind = action.kind

    if kind == "Wait":
        return world, None
    if kind == "Done":
        return world.evolve(done=world.done | {actor}), None

    if kind == "Navigate":
        target = p["target"]
        room = target if target in scene.rooms else scene.furniture_room(target)
        _need(room is not None, "unknown_entity", f"{target} is not a room or placed furniture")
        _need(
            room not in task.barred_rooms(actor),
            "room_restriction",
            f"You are not allowed to enter {room}.",
        )
        rooms = dict(world.agent_rooms)
        rooms[actor] = room
        return world.evolve(agent_rooms=rooms), room

    if kind in ("Open", "Close"):
        furn = p["furniture"]
        _need(scene.kind_of(furn) == "furniture", "unknown_entity", f"{furn} is not furniture")
        _need(furn in scene.articulated_furniture, "not_articulated", f"{furn} cannot be opened or closed")
        _need(scene.furniture_room(furn) == here, "not_colocated", f"{furn} is not in {here}")
        _need(furn not in world.locked, "locked", f"{furn} is locked")
        states, locks = actuation(task, furn, kind.lower())
        opened = dict(world.furniture_open)
        opened.update({f: s for f, s in states.items() if f in opened})
        locked = set(world.locked)
        for f, now in locks.items():
            (locked.add if now else locked.discard)(f)
        return world.evolve(furniture_open=opened, locked=frozenset(locked)), None

    if kind == "Pick":
        obj = p["object"]
        _need(obj in scene.objects, "unknown_entity", f"{obj} is not an object")
        _need(world.holding(actor) is None, "hand_full", f"{actor} is already holding {world.holding(actor)}")
        rel, anchor = world.placements[obj]
        _need(rel != "held", "held_by_other", f"{obj} is held by {anchor}")
        _need(rel != "unplaced", "not_found", f"{obj} is nowhere to be picked up")
        _need(object_room(scene, world, obj) == here, "not_colocated", f"{obj} is not in {here}")
        if rel == "in":
            _need(world.furniture_open.get(anchor, False), "closed_container", f"{anchor} is closed")
        placements = dict(world.placements)
        placements[obj] = ("held", actor)
        return world.evolve(placements=placements), None

    if kind == "Place":
        obj, rel, furn = p["object"], p["relation"], p["furniture"]
        _need(scene.kind_of(furn) == "furniture", "unknown_entity", f"{furn} is not furniture")
        _need(world.holding(actor) == obj, "not_holding", f"{actor} is not holding {obj}")
        _need(scene.furniture_room(furn) == here, "not_colocated", f"{furn} is not in {here}")
        if rel == "in":
            _need(furn in scene.articulated_furniture, "not_container", f"{furn} has no inside")
            _need(world.furniture_open.get(furn, False), "closed_container", f"{furn} is closed")
        placements = dict(world.placements)
        placements[obj] = (rel, furn)
        return world.evolve(placements=placements), None

    if kind == "FindObject":
        obj = p["object"]
        known = ep.ledger.locations[actor].get(obj)
        if known is None and here is not None:
            if obj in scene.objects and object_room(scene, world, obj) == here:
                known = here
            elif scene.furniture_room(obj) == here:
                known = here
        return world, known if known is not None else "unknown"

    # SendMessage
    to = p["to"]
    budget = world.budgets.get(actor)
    reachable = [r for r in task.agents if r != actor and task.can_communicate(actor, r)]
    if to == BROADCAST:
        recipients = reachable
    else:
        _need(to in task.agents and to != actor, "unknown_recipient", f"{to} is not another agent")
        recipients = [to] if to in reachable else []
    _need(
        bool(recipients),
        "blocked",
        "You can only send messages to: " + (", ".join(reachable) if reachable else "nobody") + ".",
    )
    _need(budget is None or budget > 0, "bandwidth", "You have no messages left.")
    for r in recipients:
        for claim in action.assertions:
            e = LedgerEntry(claim.fact, claim.holds, claim.about, world.turn, "message", actor)
            if ep.ledger.record(r, e):
                delta.setdefault(r, []).append(e)
    budgets = dict(world.budgets)
    if budget is not None:
        budgets[actor] = budget - 1
    return world.evolve(budgets=budgets), list(recipients)


# -- judging ---------------------------------------------------------------------


@dataclass(frozen=True)
class Judgement:
    success: bool
    vacuous: bool = False
    unmet: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.success


def judge_functional(task: Task, world: WorldState) -> Judgement:
    """Functional success: every leaf of the goal's physical projection holds."""
    projection = physical_projection(task.goal)
    if projection is None:
        return Judgement(True, vacuous=True)
    facts = world_facts(task.scene, world)
    unmet = tuple(str(f) for f in leaves(projection) if f not in facts)
    return Judgement(not unmet, unmet=unmet)


def _answers_list(answers: Any) -> list[Any]:
    if answers is None:
        return []
    if isinstance(answers, Mapping):
        answers = answers.get("answers", [])
    if not isinstance(answers, list):
        raise MalformedAnswer("answers must be a list or {\"answers\": [...]}")
    return answers


def _check_answer(raw: Any) -> tuple[str, str, bool | None, tuple[str, ...]]:
    if not isinstance(raw, Mapping):
        raise MalformedAnswer("answer must be an object")
    pid, pred, holds, args = raw.get("probe_id"), raw.get("predicate"), raw.get("holds", "missing"), raw.get("args")
    if not isinstance(pid, str):
        raise MalformedAnswer("answer needs a probe_id")
    if not isinstance(pred, str):
        raise MalformedAnswer(f"{pid}: predicate must be a string")
    if holds is not None and not isinstance(holds, bool):
        raise MalformedAnswer(f"{pid}: holds must be true, false or null")
    if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
        raise MalformedAnswer(f"{pid}: args must be a list of strings")
    return pid, pred, holds, tuple(args)


def probe_truth(ledger: KnowledgeLedger, subject: str, fact: Predicate) -> bool | None:
    if subject not in ledger.entries:
        return None
    return ledger.belief(subject, fact)


def score_probes(task: Task, ledger: KnowledgeLedger, answers: Any) -> dict[str, str]:
    """Score structured answers against each probe subject's ledger.

    Malformed answers score ``unanswered``; so do probes with no answer.
    """
    probes = extract_probes(task.goal)
    given: dict[str, tuple[str, bool | None, tuple[str, ...]]] = {}
    for raw in _answers_list(answers):
        try:
            pid, pred, holds, args = _check_answer(raw)
        except MalformedAnswer:
            continue
        given.setdefault(pid, (pred, holds, args))
    out = {}
    for probe in probes:
        if probe.probe_id not in given:
            out[probe.probe_id] = "unanswered"
            continue
        pred, holds, args = given[probe.probe_id]
        truth = probe_truth(ledger, probe.subject, probe.fact)
        if pred == "unknown":
            ok = holds is None and truth is None
        else:
            ok = (
                pred == probe.fact.name
                and args == probe.fact.args
                and holds is not None
                and holds == truth
            )
        out[probe.probe_id] = "correct" if ok else "incorrect"
    return out


@dataclass
class EpisodeResult:
    functional_success: bool
    vacuous: bool
    probe_scores: dict[str, str]
    transcript: list[TranscriptRecord]
    budget_usage: dict[str, dict[str, int | None]]
    termination: str  # all_done | turn_budget | error
    turns: int
    error: str = ""
    ledger: KnowledgeLedger | None = field(default=None, repr=False)
    world: WorldState | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "functional_success": self.functional_success,
            "vacuous_projection": self.vacuous,
            "probe_scores": self.probe_scores,
            "budget_usage": self.budget_usage,
            "termination": self.termination,
            "turns": self.turns,
            "rejections": sum(1 for r in self.transcript if not r.ok),
        }
        if self.error:
            out["error"] = self.error
        return out

    def transcript_jsonl(self) -> str:
        return transcript_to_jsonl(self.transcript)


def run_episode(
    task: Task,
    scripts: Mapping[str, Sequence[AgentAction]],
    answers: Mapping[str, Any] | None = None,
) -> EpisodeResult:
    """Play scripts round-robin until everyone is Done or the turn budget runs out.

    ``answers`` maps each agent to its probe answer document; a probe is
    scored from its observer's answers. Exhausted scripts imply Wait.
    """
    ep = init_episode(task)
    queues = {a: list(scripts.get(a, ())) for a in task.agents}
    termination, error = "", ""
    while not ep.finished:
        actor = ep.expected_actor()
        assert actor is not None
        queue = queues[actor]
        action = queue.pop(0) if queue else AgentAction(actor, "Wait")
        try:
            step(ep, action)
        except (NotYourTurn, MalformedAction) as exc:
            termination, error = "error", str(exc)
            break
    if not termination:
        termination = "all_done" if ep.all_done else "turn_budget"

    judgement = judge_functional(task, ep.world)
    answers = answers or {}
    scores: dict[str, str] = {}
    for probe in extract_probes(task.goal):
        scores.update(
            {k: v for k, v in score_probes(task, ep.ledger, answers.get(probe.observer)).items() if k == probe.probe_id}
        )
    return EpisodeResult(
        functional_success=judgement.success,
        vacuous=judgement.vacuous,
        probe_scores=scores,
        transcript=ep.transcript,
        budget_usage=ep.budget_usage(),
        termination=termination,
        turns=ep.world.turn,
        error=error,
        ledger=ep.ledger,
        world=ep.world,
    )
