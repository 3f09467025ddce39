"""Physical world state and the mechanic rules shared by the simulator and compiler."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .goals import Predicate
from .scene import Scene
from .tasks import InverseState, RemoteControl, StateMirroring, Task

# a placement is (relation, anchor): on/in furniture, held by agent, floor of room
Placement = tuple[str, str]


@dataclass(frozen=True)
class WorldState:
    placements: Mapping[str, Placement]
    furniture_open: Mapping[str, bool]  # articulated furniture only
    locked: frozenset[str]
    agent_rooms: Mapping[str, str]
    budgets: Mapping[str, int | None]
    turn: int = 0
    done: frozenset[str] = frozenset()
    statics: frozenset[Predicate] = frozenset()

    def holding(self, agent: str) -> str | None:
        for obj, (rel, anchor) in self.placements.items():
            if rel == "held" and anchor == agent:
                return obj
        return None

    def evolve(self, **changes) -> WorldState:
        return replace(self, **changes)


def object_room(scene: Scene, state: WorldState, obj: str) -> str | None:
    rel, anchor = state.placements.get(obj, ("unplaced", ""))
    if rel in ("on", "in"):
        return scene.furniture_room(anchor)
    if rel == "held":
        return state.agent_rooms.get(anchor)
    if rel == "floor":
        return anchor
    return None


def object_facts(scene: Scene, obj: str, placement: Placement) -> set[Predicate]:
    rel, anchor = placement
    out: set[Predicate] = set()
    if rel == "on":
        out.add(Predicate("is_on_top", (obj, anchor)))
    elif rel == "in":
        out.add(Predicate("is_inside", (obj, anchor)))
    elif rel == "held":
        out.add(Predicate("is_held_by", (obj, anchor)))
        return out
    elif rel == "floor":
        out.add(Predicate("is_on_floor", (obj,)))
        out.add(Predicate("is_in_room", (obj, anchor)))
        return out
    else:
        return out
    room = scene.furniture_room(anchor)
    if room is not None:
        out.add(Predicate("is_in_room", (obj, room)))
    return out


def furniture_facts(furn: str, is_open: bool | None, locked: bool) -> set[Predicate]:
    out: set[Predicate] = set()
    if is_open is not None:
        out.add(Predicate("is_open" if is_open else "is_closed", (furn,)))
    if locked:
        out.add(Predicate("is_locked", (furn,)))
    return out


def world_facts(scene: Scene, state: WorldState) -> set[Predicate]:
    out: set[Predicate] = set(state.statics)
    for obj, placement in state.placements.items():
        out |= object_facts(scene, obj, placement)
    for furn, is_open in state.furniture_open.items():
        out |= furniture_facts(furn, is_open, furn in state.locked)
    for furn in state.locked - set(state.furniture_open):
        out.add(Predicate("is_locked", (furn,)))
    for agent, room in state.agent_rooms.items():
        out.add(Predicate("agent_in_room", (agent, room)))
    return out


def fact_location(scene: Scene, state: WorldState, fact: Predicate) -> str | None:
    """Room in which ``fact`` (true or false) is currently visible."""
    name, args = fact.name, fact.args
    if name in ("is_on_top", "is_inside"):
        return scene.furniture_room(args[1])
    if name in ("is_open", "is_closed", "is_locked"):
        return scene.furniture_room(args[0])
    if name == "agent_in_room":
        return args[1]
    if name == "is_in_room":
        return args[1]
    if name == "is_held_by":
        return state.agent_rooms.get(args[1])
    if args and args[0] in state.placements:
        return object_room(scene, state, args[0])
    return None


def visible_facts(scene: Scene, state: WorldState, room: str) -> set[Predicate]:
    return {f for f in world_facts(scene, state) if fact_location(scene, state, f) == room}


def _mirror_target(state_open: bool, mode: str) -> bool:
    return state_open if mode == "same" else not state_open


def propagate(task: Task, changed: Mapping[str, bool]) -> tuple[dict[str, bool], dict[str, bool]]:
    """Follow mirroring and remote-control links out of the furniture in ``changed``.

    Returns ``(new open states, new lock states)``; the first assignment to a
    piece of furniture wins so cyclic bindings terminate.
    """
    states: dict[str, bool] = dict(changed)
    locks: dict[str, bool] = {}
    queue = list(changed.items())
    mirrors = [m for m in task.mechanics if isinstance(m, StateMirroring)]
    remotes = [m for m in task.mechanics if isinstance(m, RemoteControl)]
    while queue:
        furn, is_open = queue.pop(0)
        for m in mirrors:
            if furn in (m.first, m.second):
                other = m.second if furn == m.first else m.first
                if other not in states:
                    states[other] = _mirror_target(is_open, m.mode)
                    queue.append((other, states[other]))
        for m in remotes:
            if m.trigger != furn:
                continue
            if m.effect == "state":
                if m.target not in states:
                    states[m.target] = is_open
                    queue.append((m.target, is_open))
            elif not is_open:
                continue
            elif m.effect == "closed":
                if m.target not in states:
                    states[m.target] = False
                    queue.append((m.target, False))
            elif m.effect == "unlocked":
                locks.setdefault(m.target, False)
            elif m.effect == "locks":
                locks.setdefault(m.target, True)
    return states, locks


def is_inverse(task: Task, furn: str) -> bool:
    return any(isinstance(m, InverseState) and m.furniture == furn for m in task.mechanics)


def actuation(task: Task, furn: str, verb: str) -> tuple[dict[str, bool], dict[str, bool]]:
    """Resulting open states and lock changes when ``verb`` is applied to ``furn``.

    Inverse furniture reverses the verb: Open leaves it closed, Close leaves it open.
    """
    want_open = verb == "open"
    if is_inverse(task, furn):
        want_open = not want_open
    return propagate(task, {furn: want_open})


def lockable(task: Task) -> frozenset[str]:
    out = {f.args[0] for f in task.init if f.name == "is_locked"}
    out |= {m.target for m in task.mechanics if isinstance(m, RemoteControl) and m.effect in ("unlocked", "locks")}
    return frozenset(out)


def initial_world(task: Task) -> WorldState:
    """Spawn agents, place objects, then apply the task's init overrides.

    Articulated furniture starts closed and unlocked unless the task says
    otherwise; mirrored partners are then brought into their mode relation.
    """
    scene = task.scene
    placements: dict[str, Placement] = {o: ("unplaced", "") for o in scene.objects}
    for furn, objs in scene.objects_on_furniture.items():
        for obj in objs:
            placements[obj] = ("on", furn)
    furniture_open = {f: False for f in scene.articulated_furniture}
    locked: set[str] = set()
    agent_rooms = {a: scene.agent_spawns[a].room for a in task.agents if a in scene.agent_spawns}
    statics: set[Predicate] = set()

    for fact in task.init:
        name, args = fact.name, fact.args
        if name == "is_open":
            furniture_open[args[0]] = True
        elif name == "is_closed":
            furniture_open[args[0]] = False
        elif name == "is_locked":
            locked.add(args[0])
        elif name == "is_on_top":
            placements[args[0]] = ("on", args[1])
        elif name == "is_inside":
            placements[args[0]] = ("in", args[1])
        elif name == "is_held_by":
            placements[args[0]] = ("held", args[1])
        elif name == "is_on_floor":
            rel, anchor = placements.get(args[0], ("unplaced", ""))
            room = scene.furniture_room(anchor) if rel in ("on", "in") else None
            placements[args[0]] = ("floor", room or "")
        elif name == "is_in_room":
            placements[args[0]] = ("floor", args[1])
        elif name == "agent_in_room":
            agent_rooms[args[0]] = args[1]
        else:
            statics.add(fact)

    for m in task.mechanics:
        if isinstance(m, StateMirroring) and m.first in furniture_open:
            furniture_open[m.second] = _mirror_target(furniture_open[m.first], m.mode)

    budgets = {a: task.bandwidth(a) for a in task.agents}
    return WorldState(
        placements=placements,
        furniture_open=furniture_open,
        locked=frozenset(locked),
        agent_rooms=agent_rooms,
        budgets=budgets,
        statics=frozenset(statics),
    )


def holds(scene: Scene, state: WorldState, fact: Predicate) -> bool:
    return fact in world_facts(scene, state)


__all__ = [
    "WorldState",
    "actuation",
    "fact_location",
    "holds",
    "initial_world",
    "lockable",
    "object_room",
    "propagate",
    "visible_facts",
    "world_facts",
]
