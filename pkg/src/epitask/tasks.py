"""Task tuple, mechanic bindings, structural validation and seed sampling.

A task JSON document looks like::

    {
      "task_id": "appd",
      "task": "Set the table and confirm it.",
      "agents": ["agent_0", "agent_1"],
      "pddl_goal": "(and (is_on_top bowl_1 table_22) ...)",
      "agent_secrets": {"agent_0": ["You cannot enter dining_room_1."]},
      "mechanics": [{"type": "limited_bandwidth", "agent": "agent_1", "budget": 2}],
      "category": "cooperative",
      "target_depth": 2,
      "turn_budget": 20,
      "private_goals": {},
      "init": ["(is_held_by bowl_1 agent_1)"],
      "items": [],
      "scene": { ... optional embedded scene ... }
    }
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

from .errors import EmptyPool, MalformedDocument, SchemaViolation, UnknownEntity
from .goals import (
    PREDICATES,
    Formula,
    Predicate,
    entity_args,
    k_depth,
    know_paths,
    parse_fact,
    parse_goal,
    print_goal,
)
from .scene import EntityRef, Scene, Violation, room_of, scene_from_dict, scene_to_dict

CATEGORIES = ("cooperative", "mixed")
REMOTE_EFFECTS = ("state", "unlocked", "closed", "locks")
MIRROR_MODES = ("same", "toggled")


@dataclass(frozen=True)
class RoomRestriction:
    agent: str
    rooms: tuple[str, ...]
    kind = "room_restriction"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "agent": self.agent, "rooms": list(self.rooms)}


@dataclass(frozen=True)
class LimitedBandwidth:
    agent: str
    budget: int
    kind = "limited_bandwidth"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "agent": self.agent, "budget": self.budget}


@dataclass(frozen=True)
class RestrictedCommunication:
    """Complete directed communication graph; missing edges are forbidden channels."""

    edges: tuple[tuple[str, str], ...]
    kind = "restricted_communication"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class RemoteControl:
    trigger: str
    target: str
    effect: str = "state"
    kind = "remote_control"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "trigger": self.trigger, "target": self.target, "effect": self.effect}


@dataclass(frozen=True)
class StateMirroring:
    first: str
    second: str
    mode: str = "same"
    kind = "state_mirroring"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "furniture": [self.first, self.second], "mode": self.mode}


@dataclass(frozen=True)
class InverseState:
    furniture: str
    kind = "inverse_state"

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "furniture": self.furniture}


Mechanic = Union[RoomRestriction, LimitedBandwidth, RestrictedCommunication, RemoteControl, StateMirroring, InverseState]


def _field(raw: Mapping[str, Any], key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if key not in raw:
        raise SchemaViolation(f"{where}: missing {key!r}")
    value = raw[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise SchemaViolation(f"{where}: {key!r} has the wrong type")
    return value


def _str_list(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaViolation(f"{where}: expected a list of strings")
    return tuple(value)


def mechanic_from_dict(raw: Mapping[str, Any]) -> Mechanic:
    if not isinstance(raw, Mapping) or "type" not in raw:
        raise SchemaViolation("mechanic entries need a 'type'")
    kind = raw["type"]
    where = f"mechanic {kind!r}"
    if kind == "room_restriction":
        return RoomRestriction(_field(raw, "agent", str, where), _str_list(raw.get("rooms"), where))
    if kind == "limited_bandwidth":
        return LimitedBandwidth(_field(raw, "agent", str, where), _field(raw, "budget", int, where))
    if kind == "restricted_communication":
        edges = _field(raw, "edges", list, where)
        pairs = []
        for edge in edges:
            pair = _str_list(edge, where)
            if len(pair) != 2:
                raise SchemaViolation(f"{where}: edges are [from, to] pairs")
            pairs.append((pair[0], pair[1]))
        return RestrictedCommunication(tuple(pairs))
    if kind == "remote_control":
        return RemoteControl(
            _field(raw, "trigger", str, where),
            _field(raw, "target", str, where),
            raw.get("effect", "state"),
        )
    if kind == "state_mirroring":
        pair = _str_list(raw.get("furniture"), where)
        if len(pair) != 2:
            raise SchemaViolation(f"{where}: 'furniture' must name exactly two pieces")
        return StateMirroring(pair[0], pair[1], raw.get("mode", "same"))
    if kind == "inverse_state":
        return InverseState(_field(raw, "furniture", str, where))
    raise SchemaViolation(f"unknown mechanic type {kind!r}")


@dataclass(frozen=True)
class Task:
    scene: Scene
    agents: tuple[str, ...]
    goal: Formula
    description: str
    mechanics: tuple[Mechanic, ...] = ()
    secrets: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    category: str = "cooperative"
    target_depth: int = 0
    turn_budget: int = 20
    private_goals: Mapping[str, Formula] = field(default_factory=dict)
    init: tuple[Predicate, ...] = ()
    items: tuple[str, ...] = ()
    task_id: str = ""
    extras: Mapping[str, Any] = field(default_factory=dict)

    def of_kind(self, kind: str) -> list[Any]:
        return [m for m in self.mechanics if m.kind == kind]

    def barred_rooms(self, agent: str) -> frozenset[str]:
        return frozenset(r for m in self.of_kind("room_restriction") if m.agent == agent for r in m.rooms)

    def bandwidth(self, agent: str) -> int | None:
        """Message budget, or ``None`` when the agent is unlimited."""
        budgets = [m.budget for m in self.of_kind("limited_bandwidth") if m.agent == agent]
        return min(budgets) if budgets else None

    def comm_edges(self) -> tuple[tuple[str, str], ...]:
        bindings = self.of_kind("restricted_communication")
        if not bindings:
            return tuple((s, r) for s in self.agents for r in self.agents if s != r)
        seen: dict[tuple[str, str], None] = {}
        for m in bindings:
            for edge in m.edges:
                seen.setdefault(edge, None)
        return tuple(seen)

    def can_communicate(self, sender: str, receiver: str) -> bool:
        return (sender, receiver) in set(self.comm_edges())


def task_from_dict(doc: Mapping[str, Any], scene: Scene | None = None) -> Task:
    if not isinstance(doc, Mapping):
        raise SchemaViolation("task: top level must be a JSON object")
    if "scene" in doc:
        scene = scene_from_dict(doc["scene"])
    if scene is None:
        raise SchemaViolation("task: no scene embedded and none supplied")

    description = _field(doc, "task", str, "task")
    agents = _str_list(doc.get("agents"), "task.agents")
    goal = parse_goal(_field(doc, "pddl_goal", str, "task"))
    category = _field(doc, "category", str, "task")
    target_depth = _field(doc, "target_depth", int, "task")
    turn_budget = _field(doc, "turn_budget", int, "task")
    if turn_budget <= 0:
        raise SchemaViolation("task: turn_budget must be positive")

    secrets_raw = doc.get("agent_secrets", {})
    if not isinstance(secrets_raw, Mapping):
        raise SchemaViolation("task: agent_secrets must be an object")
    secrets = {a: _str_list(v, f"agent_secrets[{a!r}]") for a, v in secrets_raw.items()}

    mech_raw = doc.get("mechanics", [])
    if not isinstance(mech_raw, list):
        raise SchemaViolation("task: mechanics must be a list")
    mechanics = tuple(mechanic_from_dict(m) for m in mech_raw)

    private_raw = doc.get("private_goals", {}) or {}
    if not isinstance(private_raw, Mapping):
        raise SchemaViolation("task: private_goals must be an object")
    private = {}
    for agent, text in private_raw.items():
        if not isinstance(text, str):
            raise SchemaViolation(f"task: private_goals[{agent!r}] must be a goal string")
        private[agent] = parse_goal(text)

    init = tuple(parse_fact(t) for t in _str_list(doc.get("init", []), "task.init"))
    items = _str_list(doc.get("items", []), "task.items")
    known = {
        "task_id", "task", "agents", "pddl_goal", "agent_secrets", "mechanics", "category",
        "target_depth", "turn_budget", "private_goals", "init", "items", "scene",
    }
    return Task(
        scene=scene,
        agents=agents,
        goal=goal,
        description=description,
        mechanics=mechanics,
        secrets=secrets,
        category=category,
        target_depth=target_depth,
        turn_budget=turn_budget,
        private_goals=private,
        init=init,
        items=items,
        task_id=str(doc.get("task_id", "")),
        extras={k: v for k, v in doc.items() if k not in known},
    )


def parse_task(text: str, scene: Scene | None = None) -> Task:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"task: {exc}") from exc
    return task_from_dict(doc, scene)


def task_to_dict(task: Task, embed_scene: bool = True) -> dict[str, Any]:
    out: dict[str, Any] = {
        "task_id": task.task_id,
        "task": task.description,
        "agents": list(task.agents),
        "pddl_goal": print_goal(task.goal),
        "agent_secrets": {a: list(s) for a, s in task.secrets.items()},
        "mechanics": [m.to_dict() for m in task.mechanics],
        "category": task.category,
        "target_depth": task.target_depth,
        "turn_budget": task.turn_budget,
        "private_goals": {a: print_goal(g) for a, g in task.private_goals.items()},
        "init": [str(p) for p in task.init],
        "items": list(task.items),
    }
    out.update(task.extras)
    if embed_scene:
        out["scene"] = scene_to_dict(task.scene)
    return out


def serialize_task(task: Task, embed_scene: bool = True) -> str:
    return json.dumps(task_to_dict(task, embed_scene), indent=2, ensure_ascii=False) + "\n"


# -- validation --------------------------------------------------------------

_ID_TOKEN = re.compile(r"`[^`]*`|\b[a-z][a-z0-9]*(?:_[a-z0-9]+)*_\d+\b")


def _resolves(task: Task, kind: str, ident: str) -> bool:
    scene = task.scene
    if kind == "agent":
        return ident in task.agents
    if kind == "item":
        return ident in task.items
    if kind == "room":
        return ident in scene.rooms
    if kind == "furniture":
        return ident in scene.support_furniture
    if kind == "object":
        return ident in scene.objects
    return False


def _check_formula(task: Task, goal: Formula, where: str) -> list[Violation]:
    out = []
    for pred, kind, ident in entity_args(goal):
        if pred != "K" and PREDICATES[pred].cls == "mechanic_init_only":
            out.append(Violation("init_only_in_goal", pred, f"{where}: {pred} is init-only"))
        if not _resolves(task, kind, ident):
            out.append(Violation("goal_entity", ident, f"{where}: {kind} {ident} in {pred} does not resolve"))
        elif pred in ("is_open", "is_closed") and ident not in task.scene.articulated_furniture:
            out.append(
                Violation("articulated_only", ident, f"{where}: {ident} is not articulated and cannot be {pred[3:]}")
            )
    return out


def _check_mechanic(task: Task, m: Mechanic) -> list[Violation]:
    out = []
    scene = task.scene

    def need(kind: str, ident: str) -> None:
        if not _resolves(task, kind, ident):
            out.append(Violation("mechanic_binding", ident, f"{m.kind}: {kind} {ident} does not resolve"))

    if isinstance(m, RoomRestriction):
        need("agent", m.agent)
        for r in m.rooms:
            need("room", r)
    elif isinstance(m, LimitedBandwidth):
        need("agent", m.agent)
        if m.budget < 0:
            out.append(Violation("mechanic_binding", m.agent, "limited_bandwidth: budget must be >= 0"))
    elif isinstance(m, RestrictedCommunication):
        for s, r in m.edges:
            need("agent", s)
            need("agent", r)
            if s == r:
                out.append(Violation("mechanic_binding", s, "restricted_communication: self-loop edge"))
    elif isinstance(m, RemoteControl):
        need("furniture", m.trigger)
        need("furniture", m.target)
        if m.trigger == m.target:
            out.append(Violation("mechanic_binding", m.trigger, "remote_control: trigger equals target"))
        if m.effect not in REMOTE_EFFECTS:
            out.append(Violation("mechanic_binding", m.trigger, f"remote_control: unknown effect {m.effect!r}"))
        for f in (m.trigger, m.target):
            if f in scene.support_furniture and f not in scene.articulated_furniture:
                out.append(Violation("mechanic_binding", f, "remote_control: furniture must be articulated"))
    elif isinstance(m, StateMirroring):
        need("furniture", m.first)
        need("furniture", m.second)
        if m.first == m.second:
            out.append(Violation("mechanic_binding", m.first, "state_mirroring: pair must be distinct"))
        if m.mode not in MIRROR_MODES:
            out.append(Violation("mechanic_binding", m.first, f"state_mirroring: unknown mode {m.mode!r}"))
        for f in (m.first, m.second):
            if f in scene.support_furniture and f not in scene.articulated_furniture:
                out.append(Violation("mechanic_binding", f, "state_mirroring: furniture must be articulated"))
    elif isinstance(m, InverseState):
        need("furniture", m.furniture)
        if m.furniture in scene.support_furniture and m.furniture not in scene.articulated_furniture:
            out.append(Violation("mechanic_binding", m.furniture, "inverse_state: furniture must be articulated"))
    return out


def validate_task(task: Task) -> list[Violation]:
    """Structural checks that gate everything else; an empty list means the task is sound."""
    out: list[Violation] = []
    if not task.agents:
        out.append(Violation("agents_nonempty", "", "task has no agents"))
    for agent in task.agents:
        if agent not in task.scene.agent_spawns:
            out.append(Violation("agent_spawn", agent, f"{agent} has no spawn in the scene"))
        elif task.scene.agent_spawns[agent].room in task.barred_rooms(agent):
            out.append(Violation("spawn_restricted", agent, f"{agent} spawns in a room barred to it"))
    for agent in task.secrets:
        if agent not in task.agents:
            out.append(Violation("secret_owner", agent, f"secrets given to unknown agent {agent}"))

    out.extend(_check_formula(task, task.goal, "goal"))
    for fact in task.init:
        sig = PREDICATES[fact.name]
        for kind, ident in zip(sig.kinds, fact.args):
            if not _resolves(task, kind, ident):
                out.append(Violation("init_entity", ident, f"init {fact}: {kind} {ident} does not resolve"))
    for m in task.mechanics:
        out.extend(_check_mechanic(task, m))

    if task.category not in CATEGORIES:
        out.append(Violation("category", task.category, f"unknown category {task.category!r}"))
    elif task.category == "cooperative" and task.private_goals:
        out.append(Violation("category", "private_goals", "cooperative tasks carry no private goals"))
    elif task.category == "mixed" and not task.private_goals:
        out.append(Violation("category", "private_goals", "mixed tasks need at least one private goal"))
    for agent, goal in task.private_goals.items():
        if agent not in task.agents:
            out.append(Violation("private_goal_owner", agent, f"private goal for unknown agent {agent}"))
        out.extend(_check_formula(task, goal, f"private goal of {agent}"))

    for agent, lines in task.secrets.items():
        for line in lines:
            for tok in _ID_TOKEN.findall(line):
                if tok.startswith("`"):
                    continue
                if task.scene.kind_of(tok) is None and tok not in task.items and tok not in task.agents:
                    out.append(Violation("secret_reference", tok, f"secret of {agent} mentions unknown {tok}"))
    return out


@dataclass(frozen=True)
class DepthGate:
    passed: bool
    measured: int
    target: int


def check_depth_gate(task: Task) -> DepthGate:
    measured = k_depth(task.goal)
    return DepthGate(measured == task.target_depth, measured, task.target_depth)


# -- depth validity audit ----------------------------------------------------


def fact_room(scene: Scene, fact: Predicate) -> str | None:
    """Room where ``fact`` can be seen: furniture first, then rooms, then objects."""
    sig = PREDICATES[fact.name]
    typed = list(zip(sig.kinds, fact.args))
    for wanted in ("furniture", "room", "object"):
        for kind, ident in typed:
            if kind != wanted:
                continue
            try:
                room = room_of(scene, EntityRef(kind, ident))
            except UnknownEntity:
                room = None
            if room is not None:
                return room
    return None


@dataclass(frozen=True)
class KnowFinding:
    chain: tuple[str, ...]
    position: int
    knower: str
    inner: str | None
    fact: Predicate
    fact_room: str
    barred: bool
    direct_edge: bool
    multi_hop: bool
    sources: tuple[str, ...]

    @property
    def outermost(self) -> bool:
        return self.position == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "chain": list(self.chain),
            "knower": self.knower,
            "inner": self.inner,
            "fact": str(self.fact),
            "fact_room": self.fact_room,
            "barred": self.barred,
            "direct_edge": self.direct_edge,
            "multi_hop": self.multi_hop,
            "sources": list(self.sources),
        }


@dataclass(frozen=True)
class AuditReport:
    verdict: str  # valid | inflated
    findings: tuple[KnowFinding, ...]
    unlocatable: tuple[str, ...] = ()

    @property
    def inflated_nodes(self) -> list[KnowFinding]:
        return [f for f in self.findings if f.outermost and not f.barred]

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "findings": [f.to_dict() for f in self.findings],
            "inflated": [f"K {f.knower} over {f.fact}" for f in self.inflated_nodes],
            "unlocatable": list(self.unlocatable),
        }


def audit_depth_validity(task: Task) -> AuditReport:
    """Per-K-node audit: is the outermost knower barred from the fact room, and
    can knowledge reach each knower over a single communication edge?"""
    findings: list[KnowFinding] = []
    unlocatable: list[str] = []
    for chain, fact in know_paths(task.goal):
        room = fact_room(task.scene, fact)
        if room is None:
            unlocatable.append(str(fact))
            continue
        for i, knower in enumerate(chain):
            barred = room in task.barred_rooms(knower)
            inner = chain[i + 1] if i + 1 < len(chain) else None
            if inner is not None:
                sources = (inner,)
            elif not barred:
                sources = (knower,)
            else:
                sources = tuple(a for a in task.agents if a != knower and room not in task.barred_rooms(a))
            if inner is None and not barred:
                direct = True
            else:
                direct = any(task.can_communicate(s, knower) for s in sources)
            findings.append(
                KnowFinding(chain, i, knower, inner, fact, room, barred, direct, not direct, sources)
            )
    inflated = any(f.outermost and not f.barred for f in findings)
    return AuditReport("inflated" if inflated else "valid", tuple(findings), tuple(unlocatable))


# -- seed sampling -------------------------------------------------------------


@dataclass(frozen=True)
class SeedSample:
    task_ids: tuple[str, ...]
    failed_drawn: int
    passed_drawn: int
    notes: tuple[str, ...] = ()


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-12))


def sample_seed_tasks(
    pool: Sequence[tuple[str, bool]] | Iterable[tuple[str, bool]],
    ratio: float,
    count: int,
    seed: int | None = 0,
) -> SeedSample:
    """Draw ``count`` seed tasks, ``round(ratio * count)`` of them from failures.

    A short stratum is topped up from the other one and the shortfall is noted.
    """
    pool = list(pool)
    if not pool:
        raise EmptyPool("seed pool is empty")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = random.Random(seed)
    failed = sorted({tid for tid, passed in pool if not passed})
    passed = sorted({tid for tid, ok in pool if ok} - set(failed))
    notes: list[str] = []

    want_failed = round_half_up(ratio * count)
    want_passed = count - want_failed
    take_failed = min(want_failed, len(failed))
    take_passed = min(want_passed, len(passed))
    if take_failed < want_failed:
        notes.append(f"failed stratum short by {want_failed - take_failed}")
        take_passed = min(len(passed), take_passed + want_failed - take_failed)
    if take_passed < want_passed:
        notes.append(f"passed stratum short by {want_passed - take_passed}")
        take_failed = min(len(failed), take_failed + want_passed - take_passed)
    if take_failed + take_passed < count:
        notes.append(f"pool holds only {len(failed) + len(passed)} tasks; returning fewer than {count}")

    drawn = rng.sample(failed, take_failed) + rng.sample(passed, take_passed)
    return SeedSample(tuple(drawn), take_failed, take_passed, tuple(notes))
