"""Compile an epistemic task into a purely classical STRIPS problem.

Every K node becomes a boolean ``knows_<agent>_<digest>`` fluent. Observe
actions make first-layer knowledge true for agents standing in the fact's
room; inform actions copy knowledge along communication edges, each burning
one ``msg_tok_<agent>_<i>`` token of the sender. The rewritten goal contains
no K operators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import DepthGateFailed, MalformedProblem, NonGroundFact, UnlocatableFact, ValidationFailed
from .goals import Formula, Know, Predicate, know_paths, physical_projection, leaves, print_goal
from .scene import validate_scene
from .tasks import RemoteControl, StateMirroring, InverseState, Task, check_depth_gate, fact_room, validate_task
from .world import actuation, initial_world, lockable, world_facts

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

ACTION_CLASSES = ("physical", "observe", "inform", "inform_nested")


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class FactId:
    text: str
    digest: str


def fact_digest(fact: Formula) -> FactId:
    """Stable 8-hex digest: leading half of the FNV-1a/64 hash of the canonical text."""
    if isinstance(fact, Predicate) and any(a.startswith("?") for a in fact.args):
        raise NonGroundFact(str(fact))
    text = print_goal(fact)
    return FactId(text, f"{fnv1a64(text.encode('utf-8')):016x}"[:8])


@dataclass(frozen=True)
class KnowledgeFluent:
    holder: str
    about: Formula

    @property
    def layer(self) -> int:
        depth, node = 1, self.about
        while isinstance(node, Know):
            depth, node = depth + 1, node.body
        return depth

    @property
    def digest(self) -> str:
        return fact_digest(self.about).digest

    @property
    def symbol(self) -> str:
        return f"knows_{self.holder}_{self.digest}"

    @property
    def fluent(self) -> str:
        return f"({self.symbol})"

    def leaf(self) -> Predicate:
        return next(leaves(self.about))


@dataclass(frozen=True)
class GroundAction:
    name: str
    actor: str | None
    pre: frozenset[str]
    add: frozenset[str]
    delete: frozenset[str]
    cls: str = "physical"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "actor": self.actor,
            "class": self.cls,
            "pre": sorted(self.pre),
            "add": sorted(self.add),
            "del": sorted(self.delete),
        }


@dataclass(frozen=True)
class CompiledProblem:
    fluents: tuple[str, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset[str]
    goal: tuple[str, ...]
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def action(self, name: str) -> GroundAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)


def _fluent(fact: Predicate) -> str:
    return str(fact)


def _tok(agent: str, i: int) -> str:
    return f"(msg_tok_{agent}_{i})"


def _can_comm(s: str, r: str) -> str:
    return f"(can_communicate {s} {r})"


def _chain_fluents(chain: tuple[str, ...], leaf: Predicate) -> tuple[list[KnowledgeFluent], list[KnowledgeFluent]]:
    """``(goal fluents, all fluents)`` for one K path, outermost knower first."""
    inner: Formula = leaf
    goal: list[KnowledgeFluent] = []
    for agent in reversed(chain):
        goal.append(KnowledgeFluent(agent, inner))
        inner = Know(agent, inner)
    goal.reverse()
    declared = list(goal) + [KnowledgeFluent(a, leaf) for a in chain]
    return goal, declared


class _Builder:
    def __init__(self) -> None:
        self.actions: dict[str, GroundAction] = {}

    def add(self, name: str, actor: str | None, pre: Iterable[str], add: Iterable[str], delete: Iterable[str], cls: str) -> None:
        if name not in self.actions:
            self.actions[name] = GroundAction(name, actor, frozenset(pre), frozenset(add), frozenset(delete), cls)


def _physical_actions(task: Task, b: _Builder) -> None:
    scene = task.scene
    locks = lockable(task)
    allowed = {a: [r for r in scene.rooms if r not in task.barred_rooms(a)] for a in task.agents}

    for a in task.agents:
        for src in allowed[a]:
            for dst in allowed[a]:
                if src != dst:
                    b.add(
                        f"navigate_{a}_{src}_{dst}", a,
                        [f"(agent_in_room {a} {src})"],
                        [f"(agent_in_room {a} {dst})"],
                        [f"(agent_in_room {a} {src})"],
                        "physical",
                    )

    placed_furniture = [f for f in scene.support_furniture if scene.furniture_room(f) is not None]
    for a in task.agents:
        hand = f"(hand_empty {a})"
        for obj in scene.objects:
            held = f"(is_held_by {obj} {a})"
            for furn in placed_furniture:
                room = scene.furniture_room(furn)
                if room not in allowed[a]:
                    continue
                here = f"(agent_in_room {a} {room})"
                in_room = f"(is_in_room {obj} {room})"
                rels = [("on", "is_on_top")]
                if furn in scene.articulated_furniture:
                    rels.append(("in", "is_inside"))
                for rel, pred in rels:
                    spot = f"({pred} {obj} {furn})"
                    access = [f"(is_open {furn})"] if rel == "in" else []
                    b.add(
                        f"pick_{a}_{obj}_{rel}_{furn}", a,
                        [here, spot, hand, *access], [held], [spot, hand, in_room], "physical",
                    )
                    b.add(
                        f"place_{a}_{obj}_{rel}_{furn}", a,
                        [here, held, *access], [spot, hand, in_room], [held], "physical",
                    )

    for a in task.agents:
        for furn in scene.articulated_furniture:
            room = scene.furniture_room(furn)
            if room is None or room not in allowed[a]:
                continue
            for verb in ("open", "close"):
                states, lock_changes = actuation(task, furn, verb)
                result = states[furn]
                pre = [f"(agent_in_room {a} {room})", f"(is_closed {furn})" if result else f"(is_open {furn})"]
                if furn in locks:
                    pre.append(f"(is_unlocked {furn})")
                add, delete = [], []
                for g, is_open in states.items():
                    add.append(f"(is_open {g})" if is_open else f"(is_closed {g})")
                    delete.append(f"(is_closed {g})" if is_open else f"(is_open {g})")
                for g, now_locked in lock_changes.items():
                    add.append(f"(is_locked {g})" if now_locked else f"(is_unlocked {g})")
                    delete.append(f"(is_unlocked {g})" if now_locked else f"(is_locked {g})")
                b.add(f"{verb}_{a}_{furn}", a, pre, add, delete, "physical")


def _mechanic_facts(task: Task) -> list[str]:
    out = []
    for a in task.agents:
        for r in sorted(task.barred_rooms(a)):
            out.append(f"(is_restricted {a} {r})")
    for m in task.mechanics:
        if isinstance(m, InverseState):
            out.append(f"(is_inverse {m.furniture})")
        elif isinstance(m, StateMirroring):
            pred = "mirrors" if m.mode == "same" else "mirrors_closed"
            out.append(f"({pred} {m.first} {m.second})")
        elif isinstance(m, RemoteControl):
            pred = {"state": "controls", "unlocked": "controls_unlocked", "closed": "controls_closed", "locks": "controls_locks"}[m.effect]
            out.append(f"({pred} {m.trigger} {m.target})")
    return out


def compile_task(task: Task, check: bool = True) -> CompiledProblem:
    """Lower ``task`` to a classical problem following the six compilation steps."""
    if check:
        violations = validate_scene(task.scene) + validate_task(task)
        if violations:
            raise ValidationFailed(violations)
        gate = check_depth_gate(task)
        if not gate.passed:
            raise DepthGateFailed(f"goal depth {gate.measured} != target {gate.target}")

    scene = task.scene
    paths = list(know_paths(task.goal))

    # step 1: knowledge fluents
    goal_kf: list[KnowledgeFluent] = []
    declared: dict[KnowledgeFluent, None] = {}
    for chain, leaf in paths:
        goals, every = _chain_fluents(chain, leaf)
        goal_kf.extend(goals)
        for kf in every:
            declared.setdefault(kf, None)
    known = set(declared)

    b = _Builder()
    tokens = {a: task.bandwidth(a) for a in task.agents}

    # step 2: observe
    for kf in declared:
        if kf.layer != 1:
            continue
        leaf = kf.leaf()
        room = fact_room(scene, leaf)
        if room is None:
            raise UnlocatableFact(f"{leaf} has no room; cannot build observe actions")
        if room in task.barred_rooms(kf.holder):
            continue
        b.add(
            f"observe_{kf.symbol}", kf.holder,
            [_fluent(leaf), f"(agent_in_room {kf.holder} {room})"], [kf.fluent], [], "observe",
        )

    edges = task.comm_edges()

    def informs(sender_kf: KnowledgeFluent, receiver_kf: KnowledgeFluent, extra_pre: list[str], cls: str) -> None:
        s, r = sender_kf.holder, receiver_kf.holder
        base = [sender_kf.fluent, _can_comm(s, r), *extra_pre]
        stem = f"inform_{receiver_kf.symbol}_from_{s}"
        if tokens.get(s) is None:
            b.add(stem, s, base, [receiver_kf.fluent], [], cls)
            return
        for i in range(1, tokens[s] + 1):
            b.add(f"{stem}_tok{i}", s, base + [_tok(s, i)], [receiver_kf.fluent], [_tok(s, i)], cls)

    # step 3: first-layer informs
    for skf in declared:
        if skf.layer != 1:
            continue
        for s, r in edges:
            if s != skf.holder:
                continue
            rkf = KnowledgeFluent(r, skf.about)
            if rkf in known:
                informs(skf, rkf, [], "inform")

    # step 4: nested informs; the receiver must already know the leaf itself
    for rkf in declared:
        if rkf.layer < 2:
            continue
        told = rkf.about
        assert isinstance(told, Know)
        skf = KnowledgeFluent(told.agent, told.body)
        if skf not in known or (skf.holder, rkf.holder) not in edges:
            continue
        base = KnowledgeFluent(rkf.holder, rkf.leaf())
        informs(skf, rkf, [base.fluent] if base in known else [], "inform_nested")

    _physical_actions(task, b)

    # step 5: goal rewrite
    goal: list[str] = []
    projection = physical_projection(task.goal)
    if projection is not None:
        goal.extend(_fluent(p) for p in leaves(projection))
    goal.extend(kf.fluent for kf in goal_kf)
    goal = list(dict.fromkeys(goal))

    # step 6: initial state
    world = initial_world(task)
    init: list[str] = sorted(_fluent(f) for f in world_facts(scene, world))
    for a in task.agents:
        if world.holding(a) is None:
            init.append(f"(hand_empty {a})")
    for f in sorted(lockable(task)):
        if f not in world.locked:
            init.append(f"(is_unlocked {f})")
    init.extend(_can_comm(s, r) for s, r in edges)
    init.extend(_mechanic_facts(task))
    token_fluents = [_tok(a, i) for a in task.agents if tokens[a] for i in range(1, tokens[a] + 1)]
    init.extend(token_fluents)

    actions = tuple(
        sorted(b.actions.values(), key=lambda a: ACTION_CLASSES.index(a.cls) if a.cls != "physical" else 99)
    )
    fluents: dict[str, None] = {}
    for f in init:
        fluents.setdefault(f, None)
    for kf in declared:
        fluents.setdefault(kf.fluent, None)
    for a in actions:
        for f in sorted(a.pre | a.add | a.delete):
            fluents.setdefault(f, None)
    for f in goal:
        fluents.setdefault(f, None)

    meta = {
        "task_id": task.task_id,
        "knowledge": [
            {"symbol": kf.symbol, "holder": kf.holder, "layer": kf.layer, "about": print_goal(kf.about)}
            for kf in declared
        ],
        "tokens": token_fluents,
        "bandwidth": {a: tokens[a] for a in task.agents},
        "edges": [list(e) for e in edges],
    }
    return CompiledProblem(tuple(fluents), actions, frozenset(init), tuple(goal), meta)


# -- serialization -------------------------------------------------------------


def problem_to_dict(problem: CompiledProblem) -> dict[str, Any]:
    return {
        "fluents": list(problem.fluents),
        "init": sorted(problem.init),
        "goal": list(problem.goal),
        "actions": [a.to_dict() for a in problem.actions],
        "meta": problem.meta,
    }


def problem_from_dict(doc: dict[str, Any]) -> CompiledProblem:
    try:
        actions = tuple(
            GroundAction(
                a["name"], a.get("actor"), frozenset(a["pre"]), frozenset(a["add"]), frozenset(a["del"]), a.get("class", "physical")
            )
            for a in doc["actions"]
        )
        problem = CompiledProblem(
            tuple(doc["fluents"]), actions, frozenset(doc["init"]), tuple(doc["goal"]), dict(doc.get("meta", {}))
        )
    except (KeyError, TypeError) as exc:
        raise MalformedProblem(f"compiled problem is missing {exc}") from exc
    check_problem(problem)
    return problem


def check_problem(problem: CompiledProblem) -> None:
    declared = set(problem.fluents)
    for f in problem.init | set(problem.goal):
        if f not in declared:
            raise MalformedProblem(f"undeclared fluent {f}")
    names = set()
    for a in problem.actions:
        if a.name in names:
            raise MalformedProblem(f"duplicate action {a.name}")
        names.add(a.name)
        for f in a.pre | a.add | a.delete:
            if f not in declared:
                raise MalformedProblem(f"action {a.name} uses undeclared fluent {f}")


def serialize_problem(problem: CompiledProblem) -> str:
    return json.dumps(problem_to_dict(problem), indent=2, sort_keys=False) + "\n"


def _atom(fluent: str) -> tuple[str, tuple[str, ...]]:
    parts = fluent.strip("()").split()
    return parts[0], tuple(parts[1:])


def to_pddl(problem: CompiledProblem, name: str = "epitask") -> tuple[str, str]:
    """Grounded STRIPS ``(domain, problem)`` text for external planners."""
    arity: dict[str, int] = {}
    constants: dict[str, None] = {}
    for f in problem.fluents:
        pred, args = _atom(f)
        arity.setdefault(pred, len(args))
        for arg in args:
            constants.setdefault(arg, None)

    def conj(items: Iterable[str], indent: str) -> str:
        items = sorted(items)
        if not items:
            return "(and)"
        return "(and\n" + "".join(f"{indent}  {i}\n" for i in items) + f"{indent})"

    lines = [f"(define (domain {name})", "  (:requirements :strips)"]
    if constants:
        lines.append("  (:constants " + " ".join(constants) + ")")
    lines.append("  (:predicates")
    for pred, n in arity.items():
        params = "".join(f" ?x{i}" for i in range(n))
        lines.append(f"    ({pred}{params})")
    lines.append("  )")
    for a in problem.actions:
        effects = sorted(a.add) + [f"(not {d})" for d in sorted(a.delete)]
        lines.append(f"  (:action {a.name}")
        lines.append("    :parameters ()")
        lines.append("    :precondition " + conj(a.pre, "    "))
        lines.append("    :effect " + (conj(effects, "    ") if effects else "(and)") + ")")
    lines.append(")")
    domain = "\n".join(lines) + "\n"

    prob = [f"(define (problem {name}-problem)", f"  (:domain {name})", "  (:init"]
    prob.extend(f"    {f}" for f in sorted(problem.init))
    prob.append("  )")
    prob.append("  (:goal " + conj(problem.goal, "  ") + ")")
    prob.append(")")
    return domain, "\n".join(prob) + "\n"


def explain_compilation(problem: CompiledProblem) -> str:
    """Walk-through of what each compilation step produced, in declaration order."""
    meta = problem.meta
    knowledge = meta.get("knowledge", [])
    by_cls: dict[str, list[GroundAction]] = {c: [] for c in ACTION_CLASSES}
    for a in problem.actions:
        by_cls[a.cls].append(a)
    out: list[str] = []

    def section(title: str, rows: list[str], vacuous: bool) -> None:
        out.append(f"Step {len(out_sections) + 1}: {title}" + (" (vacuous)" if vacuous else ""))
        out_sections.append(title)
        out.extend(f"  {r}" for r in rows)

    out_sections: list[str] = []
    section(
        f"Create knowledge predicates ({len(knowledge)})",
        [f"{k['symbol']} ; layer {k['layer']}, {k['holder']} knows {k['about']}" for k in knowledge],
        not knowledge,
    )
    section(f"Create observe operators ({len(by_cls['observe'])})", [a.name for a in by_cls["observe"]], not by_cls["observe"])
    section(f"Create inform operators ({len(by_cls['inform'])})", [a.name for a in by_cls["inform"]], not by_cls["inform"])
    section(
        f"Create nested-knowledge inform operators ({len(by_cls['inform_nested'])})",
        [a.name for a in by_cls["inform_nested"]],
        not by_cls["inform_nested"],
    )
    section(f"Replace the goal ({len(problem.goal)} conjuncts)", list(problem.goal), False)
    tokens = meta.get("tokens", [])
    edges = ", ".join(f"{s}->{r}" for s, r in meta.get("edges", []))
    section(
        f"Add budget tokens to the initial state ({len(tokens)})",
        list(tokens) + ([f"communication edges: {edges}"] if edges else []),
        not tokens,
    )
    out.append(f"Physical operators: {len(by_cls['physical'])}")
    return "\n".join(out) + "\n"
