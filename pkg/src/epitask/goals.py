"""Epistemic goal language: ground predicates, conjunction and the K operator.

Goals are written as s-expressions::

    (and (is_on_top bowl_1 table_22)
         (K agent_0 (K agent_1 (is_on_top bowl_1 table_22)))
         (is_open cabinet_34))

``;`` starts a comment that runs to end of line. There is no negation or
disjunction; complementary predicates (``is_open``/``is_closed``) cover the
cases a goal needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .errors import (
    ArityError,
    GoalSyntaxError,
    InitOnlyPredicateInGoal,
    UnknownPredicate,
    UnsupportedConnective,
)


@dataclass(frozen=True)
class PredicateSig:
    name: str
    kinds: tuple[str, ...]
    cls: str  # spatial | unary_state | agent | mechanic_init_only

    @property
    def arity(self) -> int:
        return len(self.kinds)


def _sigs(cls: str, rows: list[tuple[str, tuple[str, ...]]]) -> dict[str, PredicateSig]:
    return {name: PredicateSig(name, kinds, cls) for name, kinds in rows}


PREDICATES: dict[str, PredicateSig] = {
    **_sigs(
        "spatial",
        [
            ("is_on_top", ("object", "furniture")),
            ("is_inside", ("object", "furniture")),
            ("is_in_room", ("object", "room")),
            ("is_on_floor", ("object",)),
            ("is_next_to", ("object", "object")),
        ],
    ),
    **_sigs(
        "unary_state",
        [
            ("is_open", ("furniture",)),
            ("is_closed", ("furniture",)),
            ("is_clean", ("object",)),
            ("is_dirty", ("object",)),
            ("is_filled", ("object",)),
            ("is_empty", ("object",)),
            ("is_powered_on", ("object",)),
            ("is_locked", ("furniture",)),
        ],
    ),
    **_sigs(
        "agent",
        [
            ("is_held_by", ("object", "agent")),
            ("agent_in_room", ("agent", "room")),
            ("has_item", ("agent", "item")),
            ("has_at_least", ("agent", "item")),
            ("has_most", ("agent", "item")),
            ("item_in_container", ("item", "furniture")),
        ],
    ),
    **_sigs(
        "mechanic_init_only",
        [
            ("is_inverse", ("furniture",)),
            ("mirrors", ("furniture", "furniture")),
            ("mirrors_closed", ("furniture", "furniture")),
            ("controls", ("furniture", "furniture")),
            ("controls_unlocked", ("furniture", "furniture")),
            ("controls_closed", ("furniture", "furniture")),
            ("controls_locks", ("furniture", "furniture")),
            ("is_restricted", ("agent", "room")),
            ("is_locked_permanent", ("furniture",)),
            ("requires_item", ("furniture", "item")),
            ("unlocks", ("object", "furniture")),
            ("irreversible_enabled", ("object",)),
            ("interaction_locked", ("object",)),
            ("can_communicate", ("agent", "agent")),
        ],
    ),
}

COMPLEMENTS = {
    "is_open": "is_closed",
    "is_closed": "is_open",
    "is_clean": "is_dirty",
    "is_dirty": "is_clean",
    "is_filled": "is_empty",
    "is_empty": "is_filled",
}

_CONNECTIVES = {"or", "not", "imply", "forall", "exists", "when"}


@dataclass(frozen=True)
class Predicate:
    name: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"

    def complement(self) -> Predicate | None:
        other = COMPLEMENTS.get(self.name)
        return None if other is None else Predicate(other, self.args)


@dataclass(frozen=True)
class And:
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Know:
    agent: str
    body: Formula


Formula = Union[Predicate, And, Know]


def conj(*children: Formula) -> Formula:
    """Canonical conjunction: nested ``And`` flattened, singletons unwrapped."""
    flat: list[Formula] = []
    for child in children:
        if isinstance(child, And):
            flat.extend(child.children)
        else:
            flat.append(child)
    if not flat:
        raise ValueError("empty conjunction")
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def canonical(goal: Formula) -> Formula:
    if isinstance(goal, Predicate):
        return goal
    if isinstance(goal, Know):
        return Know(goal.agent, canonical(goal.body))
    return conj(*(canonical(c) for c in goal.children))


# -- reading -----------------------------------------------------------------


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _read(tokens: list[str], pos: int) -> tuple[object, int]:
    if pos >= len(tokens):
        raise GoalSyntaxError("unexpected end of input")
    tok = tokens[pos]
    if tok == ")":
        raise GoalSyntaxError("unexpected ')'")
    if tok != "(":
        return tok, pos + 1
    items: list[object] = []
    pos += 1
    while True:
        if pos >= len(tokens):
            raise GoalSyntaxError("unbalanced parentheses: missing ')'")
        if tokens[pos] == ")":
            return items, pos + 1
        item, pos = _read(tokens, pos)
        items.append(item)


def read_sexpr(text: str) -> object:
    tokens = _tokenize(text)
    if not tokens:
        raise GoalSyntaxError("empty goal")
    tree, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise GoalSyntaxError(f"trailing input after goal: {' '.join(tokens[pos:pos + 3])}")
    return tree


def _build(tree: object, allow_init_only: bool) -> Formula:
    if not isinstance(tree, list):
        raise GoalSyntaxError(f"expected a parenthesized form, got atom {tree!r}")
    if not tree:
        raise GoalSyntaxError("empty form ()")
    head = tree[0]
    if not isinstance(head, str):
        raise GoalSyntaxError("form head must be a symbol")
    rest = tree[1:]
    if head == "and":
        if not rest:
            raise GoalSyntaxError("(and) needs at least one conjunct")
        return conj(*(_build(c, allow_init_only) for c in rest))
    if head == "K":
        if len(rest) != 2 or not isinstance(rest[0], str):
            raise GoalSyntaxError("K takes an agent symbol and one formula")
        return Know(rest[0], _build(rest[1], allow_init_only))
    if head.lower() in _CONNECTIVES:
        raise UnsupportedConnective(f"connective {head!r} is not part of the goal language")
    sig = PREDICATES.get(head)
    if sig is None:
        raise UnknownPredicate(head)
    if sig.cls == "mechanic_init_only" and not allow_init_only:
        raise InitOnlyPredicateInGoal(head)
    for arg in rest:
        if not isinstance(arg, str):
            raise GoalSyntaxError(f"argument of {head} must be an entity ID")
        if arg.startswith("?"):
            raise GoalSyntaxError(f"goals are ground; variable {arg} in {head}")
    if len(rest) != sig.arity:
        raise ArityError(f"{head} takes {sig.arity} argument(s), got {len(rest)}")
    return Predicate(head, tuple(rest))


def parse_goal(text: str) -> Formula:
    return _build(read_sexpr(text), allow_init_only=False)


def parse_fact(text: str) -> Predicate:
    """Parse one ground predicate; mechanic predicates are allowed here."""
    formula = _build(read_sexpr(text), allow_init_only=True)
    if not isinstance(formula, Predicate):
        raise GoalSyntaxError(f"expected a single predicate, got {text!r}")
    return formula


# -- writing -----------------------------------------------------------------


def print_goal(goal: Formula, indent: int | None = None) -> str:
    """Render ``goal`` as an s-expression; ``indent`` switches on multi-line layout."""
    if indent is None:
        return _flat(goal)
    return "\n".join(_pretty(goal, 0, indent))


def _flat(goal: Formula) -> str:
    if isinstance(goal, Predicate):
        return str(goal)
    if isinstance(goal, Know):
        return f"(K {goal.agent} {_flat(goal.body)})"
    return "(and " + " ".join(_flat(c) for c in goal.children) + ")"


def _pretty(goal: Formula, level: int, step: int) -> list[str]:
    pad = " " * (level * step)
    if not isinstance(goal, And):
        return [pad + _flat(goal)]
    lines = [pad + "(and"]
    for child in goal.children:
        lines.extend(_pretty(child, level + 1, step))
    lines.append(pad + ")")
    return lines


# -- analysis ----------------------------------------------------------------


def k_depth(goal: Formula) -> int:
    if isinstance(goal, Predicate):
        return 0
    if isinstance(goal, Know):
        return 1 + k_depth(goal.body)
    return max(k_depth(c) for c in goal.children)


def leaves(goal: Formula) -> Iterator[Predicate]:
    if isinstance(goal, Predicate):
        yield goal
    elif isinstance(goal, Know):
        yield from leaves(goal.body)
    else:
        for child in goal.children:
            yield from leaves(child)


def know_paths(goal: Formula, chain: tuple[str, ...] = ()) -> Iterator[tuple[tuple[str, ...], Predicate]]:
    """Yield ``(agents outermost-first, leaf)`` for every leaf under at least one K."""
    if isinstance(goal, Predicate):
        if chain:
            yield chain, goal
    elif isinstance(goal, Know):
        yield from know_paths(goal.body, chain + (goal.agent,))
    else:
        for child in goal.children:
            yield from know_paths(child, chain)


def physical_projection(goal: Formula) -> Formula | None:
    """Leaves reachable without crossing a K node, or ``None`` if there are none."""
    kept: list[Formula] = []

    def walk(node: Formula) -> None:
        if isinstance(node, Predicate):
            kept.append(node)
        elif isinstance(node, And):
            for child in node.children:
                walk(child)

    walk(goal)
    return conj(*kept) if kept else None


def entity_args(goal: Formula) -> Iterator[tuple[str, str, str]]:
    """Yield ``(predicate, kind, id)`` for every argument and ``("K", "agent", id)`` for knowers."""
    if isinstance(goal, Predicate):
        sig = PREDICATES[goal.name]
        for kind, arg in zip(sig.kinds, goal.args):
            yield goal.name, kind, arg
    elif isinstance(goal, Know):
        yield "K", "agent", goal.agent
        yield from entity_args(goal.body)
    else:
        for child in goal.children:
            yield from entity_args(child)


@dataclass(frozen=True)
class ProbeSpec:
    probe_id: str
    observer: str
    subject: str
    fact: Predicate
    nesting_level: int

    def prompt_line(self) -> str:
        text = " ".join(a.replace("_", " ") for a in self.fact.args)
        state = self.fact.name.removeprefix("is_").replace("_", " ")
        args = ", ".join(self.fact.args)
        return (
            f"{self.probe_id}: Predict what {self.subject} would report about "
            f'"{text} is {state}". Use ordered entities [{args}] and the benchmark '
            "predicate vocabulary above."
        )


def extract_probes(goal: Formula) -> list[ProbeSpec]:
    """One probe per K node that reaches a leaf, numbered depth-first.

    The subject is the node's own agent; the observer is the agent of the
    enclosing K node, or the subject itself at the outermost level. When a K
    node covers several leaves the first one (depth-first) is probed.
    """
    probes: list[ProbeSpec] = []

    def walk(node: Formula, outer: str | None, level: int) -> None:
        if isinstance(node, Know):
            fact = next(leaves(node.body), None)
            if fact is not None:
                probes.append(
                    ProbeSpec(
                        probe_id=f"k_probe_{len(probes) + 1}",
                        observer=outer if outer is not None else node.agent,
                        subject=node.agent,
                        fact=fact,
                        nesting_level=level + 1,
                    )
                )
            walk(node.body, node.agent, level + 1)
        elif isinstance(node, And):
            for child in node.children:
                walk(child, outer, level)

    walk(goal, None, 0)
    return probes
