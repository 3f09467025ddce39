"""Symbolic scene graph: rooms, furniture, movable objects and agent spawns.

The JSON layout is the workspace ``current_scene.json`` format. Positions are
kept for round-tripping but nothing downstream reads them; adjacency is
room-level only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import MalformedDocument, MissingField, TypeMismatch, UnknownEntity

SCENE_KEYS = (
    "scene_id",
    "episode_id",
    "rooms",
    "furniture",
    "objects",
    "articulated_furniture",
    "furniture_in_rooms",
    "objects_on_furniture",
    "agent_spawns",
)

ENTITY_KINDS = ("room", "furniture", "object", "agent", "item")


@dataclass(frozen=True)
class Spawn:
    position: tuple[float, float, float]
    room: str


@dataclass(frozen=True)
class EntityRef:
    kind: str
    id: str

    def __post_init__(self) -> None:
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")


@dataclass(frozen=True)
class Violation:
    """One failed invariant. ``entity`` names the offending ID."""

    check: str
    entity: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"check": self.check, "entity": self.entity, "message": self.message}


@dataclass(frozen=True)
class Scene:
    scene_id: str
    episode_id: str
    rooms: tuple[str, ...]
    furniture: tuple[str, ...]
    objects: tuple[str, ...]
    articulated_furniture: tuple[str, ...]
    furniture_in_rooms: Mapping[str, tuple[str, ...]]
    objects_on_furniture: Mapping[str, tuple[str, ...]]
    agent_spawns: Mapping[str, Spawn]
    extras: Mapping[str, Any] = field(default_factory=dict)

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(self.agent_spawns)

    @property
    def support_furniture(self) -> tuple[str, ...]:
        """Declared furniture plus any furniture that only appears as a placement key."""
        extra = [f for f in self.objects_on_furniture if f not in self.furniture]
        return self.furniture + tuple(extra)

    def furniture_room(self, furniture: str) -> str | None:
        for room, items in self.furniture_in_rooms.items():
            if furniture in items:
                return room
        return None

    def support_of(self, obj: str) -> str | None:
        for furn, items in self.objects_on_furniture.items():
            if obj in items:
                return furn
        return None

    def kind_of(self, entity_id: str) -> str | None:
        if entity_id in self.rooms:
            return "room"
        if entity_id in self.support_furniture:
            return "furniture"
        if entity_id in self.objects:
            return "object"
        if entity_id in self.agent_spawns:
            return "agent"
        return None


def _expect(doc: Mapping[str, Any], key: str, kind: type, what: str) -> Any:
    if key not in doc:
        raise MissingField(f"scene: missing required key {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise TypeMismatch(f"scene: {key!r} must be {what}, got {type(value).__name__}")
    return value


def _string_list(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise TypeMismatch(f"scene: {where} must be a list of strings")
    return tuple(value)


def scene_from_dict(doc: Mapping[str, Any]) -> Scene:
    if not isinstance(doc, Mapping):
        raise TypeMismatch("scene: top level must be a JSON object")
    scene_id = _expect(doc, "scene_id", str, "a string")
    episode_id = _expect(doc, "episode_id", str, "a string")
    lists = {}
    for key in ("rooms", "furniture", "objects", "articulated_furniture"):
        lists[key] = _string_list(_expect(doc, key, list, "a list"), key)
    maps = {}
    for key in ("furniture_in_rooms", "objects_on_furniture"):
        raw = _expect(doc, key, dict, "an object")
        maps[key] = {k: _string_list(v, f"{key}[{k!r}]") for k, v in raw.items()}

    spawns = {}
    for agent, raw in _expect(doc, "agent_spawns", dict, "an object").items():
        if not isinstance(raw, dict):
            raise TypeMismatch(f"scene: agent_spawns[{agent!r}] must be an object")
        if "room" not in raw or "position" not in raw:
            raise MissingField(f"scene: agent_spawns[{agent!r}] needs position and room")
        pos = raw["position"]
        if (
            not isinstance(pos, list)
            or len(pos) != 3
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in pos)
        ):
            raise TypeMismatch(f"scene: agent_spawns[{agent!r}].position must be 3 numbers")
        if not isinstance(raw["room"], str):
            raise TypeMismatch(f"scene: agent_spawns[{agent!r}].room must be a string")
        spawns[agent] = Spawn(tuple(float(c) for c in pos), raw["room"])

    extras = {k: v for k, v in doc.items() if k not in SCENE_KEYS}
    return Scene(
        scene_id=scene_id,
        episode_id=episode_id,
        furniture_in_rooms=maps["furniture_in_rooms"],
        objects_on_furniture=maps["objects_on_furniture"],
        agent_spawns=spawns,
        extras=extras,
        **lists,
    )


def parse_scene(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"scene: {exc}") from exc
    return scene_from_dict(doc)


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    out: dict[str, Any] = {
        "scene_id": scene.scene_id,
        "episode_id": scene.episode_id,
        "rooms": list(scene.rooms),
        "furniture": list(scene.furniture),
        "objects": list(scene.objects),
        "articulated_furniture": list(scene.articulated_furniture),
        "furniture_in_rooms": {k: list(v) for k, v in scene.furniture_in_rooms.items()},
        "objects_on_furniture": {k: list(v) for k, v in scene.objects_on_furniture.items()},
        "agent_spawns": {
            a: {"position": list(s.position), "room": s.room} for a, s in scene.agent_spawns.items()
        },
    }
    out.update(scene.extras)
    return out


def serialize_scene(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=2, ensure_ascii=False) + "\n"


def _duplicates(values: tuple[str, ...]) -> list[str]:
    seen, dups = set(), []
    for v in values:
        if v in seen and v not in dups:
            dups.append(v)
        seen.add(v)
    return dups


def validate_scene(scene: Scene) -> list[Violation]:
    """Check every structural invariant; an empty list means the scene is sound.

    Placement keys that are not declared furniture (the room-less ``chair_10``
    case) are legal and reported separately by :func:`roomless_supports`.
    """
    out: list[Violation] = []
    for key in ("rooms", "furniture", "objects", "articulated_furniture"):
        for dup in _duplicates(getattr(scene, key)):
            out.append(Violation("duplicate_id", dup, f"{dup} listed twice in {key}"))

    rooms, furniture, objects = set(scene.rooms), set(scene.furniture), set(scene.objects)
    seen_in_room: dict[str, str] = {}
    for room, items in scene.furniture_in_rooms.items():
        if room not in rooms:
            out.append(Violation("room_declared", room, f"furniture_in_rooms key {room} is not a room"))
        for f in items:
            if f not in furniture:
                out.append(
                    Violation("furniture_declared", f, f"{f} in furniture_in_rooms[{room}] is not declared furniture")
                )
            if f in seen_in_room and seen_in_room[f] != room:
                out.append(Violation("furniture_single_room", f, f"{f} is in both {seen_in_room[f]} and {room}"))
            seen_in_room.setdefault(f, room)

    for f in scene.articulated_furniture:
        if f not in furniture:
            out.append(Violation("articulated_subset", f, f"articulated {f} is not declared furniture"))

    placed: dict[str, str] = {}
    for furn, items in scene.objects_on_furniture.items():
        if furn in rooms or furn in objects or furn in scene.agent_spawns:
            out.append(Violation("placement_key_kind", furn, f"placement key {furn} is not furniture"))
        for obj in items:
            if obj not in objects:
                out.append(Violation("object_declared", obj, f"{obj} on {furn} is not a declared object"))
            if obj in placed:
                out.append(
                    Violation("single_placement", obj, f"{obj} placed on both {placed[obj]} and {furn}")
                )
            else:
                placed[obj] = furn

    for agent, spawn in scene.agent_spawns.items():
        if spawn.room not in rooms:
            out.append(Violation("spawn_room_declared", agent, f"{agent} spawns in unknown room {spawn.room}"))
    return out


def roomless_supports(scene: Scene) -> list[str]:
    """Placement keys with no room: objects on them are unlocatable."""
    return [f for f in scene.objects_on_furniture if scene.furniture_room(f) is None]


def room_of(scene: Scene, entity: EntityRef) -> str | None:
    """Static room of ``entity``; ``None`` for unplaced objects or room-less furniture."""
    if entity.kind == "room":
        if entity.id not in scene.rooms:
            raise UnknownEntity(entity.id)
        return entity.id
    if entity.kind == "furniture":
        if entity.id not in scene.support_furniture:
            raise UnknownEntity(entity.id)
        return scene.furniture_room(entity.id)
    if entity.kind == "object":
        if entity.id not in scene.objects:
            raise UnknownEntity(entity.id)
        support = scene.support_of(entity.id)
        return None if support is None else scene.furniture_room(support)
    if entity.kind == "agent":
        if entity.id not in scene.agent_spawns:
            raise UnknownEntity(entity.id)
        return scene.agent_spawns[entity.id].room
    raise UnknownEntity(f"{entity.kind}:{entity.id} has no room")
