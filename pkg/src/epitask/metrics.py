"""Benchmark metrics over repeated runs and the evolving task pool.

Every cell is scored over fixed ``n`` attempt slots per task; an attempt that
never produced a record counts as a failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .errors import EmptyCell, SchemaViolation

PROBE_OUTCOMES = ("correct", "incorrect", "unanswered")
SCOPES = ("cooperative", "mixed", "overall")
SCOPE_LABELS = {"cooperative": "Coop", "mixed": "Mixed", "overall": "Overall"}


@dataclass(frozen=True)
class RunRecord:
    task_id: str
    model: str
    attempt: int
    functional: bool
    probes: Mapping[str, str] = field(default_factory=dict)
    turns: int = 0
    messages: int = 0
    category: str | None = None
    split: str | None = None

    @property
    def literal(self) -> bool:
        """A run passes the literal measure only when it has probes and all are correct."""
        return bool(self.probes) and all(v == "correct" for v in self.probes.values())

    def passed(self, measure: str) -> bool:
        return self.functional if measure == "functional" else self.literal

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "task_id": self.task_id,
            "model": self.model,
            "attempt": self.attempt,
            "functional": self.functional,
            "probes": dict(self.probes),
            "turns": self.turns,
            "messages": self.messages,
        }
        if self.category is not None:
            out["category"] = self.category
        if self.split is not None:
            out["split"] = self.split
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> RunRecord:
        try:
            probes = dict(raw.get("probes", {}))
            for pid, outcome in probes.items():
                if outcome not in PROBE_OUTCOMES:
                    raise SchemaViolation(f"probe {pid}: outcome must be one of {PROBE_OUTCOMES}")
            attempt = raw["attempt"]
            if not isinstance(attempt, int) or attempt < 1:
                raise SchemaViolation("attempt must be a positive integer")
            return cls(
                str(raw["task_id"]),
                str(raw["model"]),
                attempt,
                bool(raw["functional"]),
                probes,
                int(raw.get("turns", 0)),
                int(raw.get("messages", 0)),
                raw.get("category"),
                raw.get("split"),
            )
        except KeyError as exc:
            raise SchemaViolation(f"run record missing {exc}") from exc


def parse_records(text: str) -> list[RunRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip():
            try:
                out.append(RunRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"records line {lineno}: {exc}") from exc
    return out


def records_to_jsonl(records: Iterable[RunRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)


def _slots(records: Iterable[RunRecord], k: int) -> dict[int, RunRecord]:
    """Attempt slots 1..k; a duplicate attempt index keeps the first record seen."""
    out: dict[int, RunRecord] = {}
    for r in records:
        if 1 <= r.attempt <= k:
            out.setdefault(r.attempt, r)
    return out


def _by_task(records: Iterable[RunRecord]) -> dict[str, list[RunRecord]]:
    out: dict[str, list[RunRecord]] = {}
    for r in records:
        out.setdefault(r.task_id, []).append(r)
    return out


def pass_at_k(records: Sequence[RunRecord], k: int = 3, measure: str = "functional") -> bool:
    """True iff at least one of the ``k`` attempt slots passed."""
    return any(r.passed(measure) for r in _slots(records, k).values())


def pass_all_k(records: Sequence[RunRecord], k: int = 3, measure: str = "functional") -> bool:
    """True iff every one of the ``k`` attempt slots holds a passing record."""
    slots = _slots(records, k)
    return len(slots) == k and all(r.passed(measure) for r in slots.values())


def _tasks(records: Sequence[RunRecord], tasks: Iterable[str] | None) -> list[str]:
    ids = sorted(set(tasks)) if tasks is not None else sorted({r.task_id for r in records})
    if not ids:
        raise EmptyCell("no tasks in cell")
    return ids


def avg_with_se(
    records: Sequence[RunRecord],
    n: int = 3,
    tasks: Iterable[str] | None = None,
    measure: str = "functional",
) -> tuple[float, float]:
    """Mean per-run pass rate over ``n`` slots per task and its binomial standard error."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ids = _tasks(records, tasks)
    grouped = _by_task(records)
    passes = sum(
        1 for t in ids for r in _slots(grouped.get(t, []), n).values() if r.passed(measure)
    )
    total = n * len(ids)
    p = passes / total
    return p, math.sqrt(p * (1 - p) / total)


def literal_avg(records: Sequence[RunRecord], n: int = 3, tasks: Iterable[str] | None = None) -> tuple[float, float]:
    return avg_with_se(records, n, tasks, measure="literal")


def probe_rate(records: Sequence[RunRecord]) -> float | None:
    """Fraction of individual probes answered correctly, pooled over runs."""
    outcomes = [v for r in records for v in r.probes.values()]
    if not outcomes:
        return None
    return sum(1 for v in outcomes if v == "correct") / len(outcomes)


def rate_at_k(
    records: Sequence[RunRecord],
    k: int = 3,
    tasks: Iterable[str] | None = None,
    measure: str = "functional",
    every: bool = False,
) -> float:
    """Share of tasks passing Pass@k (or pass^k with ``every``)."""
    ids = _tasks(records, tasks)
    grouped = _by_task(records)
    fn = pass_all_k if every else pass_at_k
    return sum(1 for t in ids if fn(grouped.get(t, []), k, measure)) / len(ids)


@dataclass(frozen=True)
class CellScores:
    avg: float
    se: float
    pass_at_k: float
    pass_all_k: float

    def to_dict(self, scale: float = 1.0) -> dict[str, float]:
        return {
            "avg": self.avg * scale,
            "se": self.se * scale,
            "pass_at_k": self.pass_at_k * scale,
            "pass_all_k": self.pass_all_k * scale,
        }


def cell_scores(
    records: Sequence[RunRecord], k: int = 3, tasks: Iterable[str] | None = None, measure: str = "functional"
) -> CellScores:
    ids = _tasks(records, tasks)
    avg, se = avg_with_se(records, k, ids, measure)
    return CellScores(
        avg,
        se,
        rate_at_k(records, k, ids, measure),
        rate_at_k(records, k, ids, measure, every=True),
    )


@dataclass(frozen=True)
class ScoreRow:
    model: str
    split: str
    scope: str
    tasks: int
    functional: CellScores
    literal: CellScores
    probe_rate: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "split": self.split,
            "scope": self.scope,
            "tasks": self.tasks,
            "functional": self.functional.to_dict(),
            "literal": self.literal.to_dict(),
            "literal_probe_rate": self.probe_rate,
        }


@dataclass(frozen=True)
class ScoreTable:
    k: int
    rows: tuple[ScoreRow, ...]

    def splits(self) -> list[str]:
        return list(dict.fromkeys(r.split for r in self.rows))

    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.rows))

    def row(self, model: str, split: str, scope: str) -> ScoreRow | None:
        for r in self.rows:
            if (r.model, r.split, r.scope) == (model, split, scope):
                return r
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"k": self.k, "rows": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """One line per (model, scope); per split: Avg, SE, Pass@k, pass^k for both measures, in percent."""
        k = self.k
        splits = self.splits()
        header = ["model", "scope"]
        for split in splits:
            for measure in ("functional", "literal"):
                header += [
                    f"{split}_{measure}_avg",
                    f"{split}_{measure}_se",
                    f"{split}_{measure}_pass@{k}",
                    f"{split}_{measure}_pass^{k}",
                ]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for model in self.models():
            for scope in SCOPES:
                cells: list[str] = []
                present = False
                for split in splits:
                    row = self.row(model, split, scope)
                    for measure in ("functional", "literal"):
                        if row is None:
                            cells += [""] * 4
                            continue
                        present = True
                        s: CellScores = getattr(row, measure)
                        cells += [f"{100 * v:.1f}" for v in (s.avg, s.se, s.pass_at_k, s.pass_all_k)]
                if present:
                    writer.writerow([model, SCOPE_LABELS[scope], *cells])
        return buf.getvalue()


def score_table(records: Sequence[RunRecord], k: int = 3, tasks: Mapping[str, str] | None = None) -> ScoreTable:
    """Aggregate records into per (model, split, scope) cells.

    ``tasks`` optionally maps every benchmark task to its category so that
    tasks a model never attempted still count as failures in its cells.
    Without it a record's own ``category`` is used.
    """
    categories: dict[str, str] = dict(tasks or {})
    splits_of: dict[str, str] = {}
    for r in records:
        if r.category is not None:
            categories.setdefault(r.task_id, r.category)
        splits_of.setdefault(r.task_id, r.split or "all")
    for t in categories:
        splits_of.setdefault(t, "all")

    rows: list[ScoreRow] = []
    models = list(dict.fromkeys(r.model for r in records))
    splits = list(dict.fromkeys(splits_of.values()))
    for model in models:
        mine = [r for r in records if r.model == model]
        for split in splits:
            for scope in SCOPES:
                ids = [
                    t
                    for t, s in splits_of.items()
                    if s == split and (scope == "overall" or categories.get(t) == scope)
                ]
                if not ids:
                    continue
                cell = [r for r in mine if r.task_id in set(ids)]
                rows.append(
                    ScoreRow(
                        model,
                        split,
                        scope,
                        len(ids),
                        cell_scores(cell, k, ids, "functional"),
                        cell_scores(cell, k, ids, "literal"),
                        probe_rate(cell),
                    )
                )
    return ScoreTable(k, tuple(rows))


# -- pool ------------------------------------------------------------------------


@dataclass
class PoolEntry:
    task_id: str
    meta: dict[str, Any] = field(default_factory=dict)
    history: list[RunRecord] = field(default_factory=list)
    label: str = "unlabeled"  # failed | passed | unlabeled


@dataclass
class Pool:
    entries: dict[str, PoolEntry] = field(default_factory=dict)
    target_models: tuple[str, ...] = ()
    k: int = 3

    def labeled(self) -> list[tuple[str, bool]]:
        """``(task_id, passed)`` pairs for every labeled task, the seed sampler's input."""
        return [(t, e.label == "passed") for t, e in sorted(self.entries.items()) if e.label != "unlabeled"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "target_models": list(self.target_models),
            "tasks": {
                t: {"meta": e.meta, "label": e.label, "history": [r.to_dict() for r in e.history]}
                for t, e in sorted(self.entries.items())
            },
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> Pool:
        if not isinstance(raw, Mapping) or not isinstance(raw.get("tasks", {}), Mapping):
            raise SchemaViolation("pool must be an object with a 'tasks' map")
        entries = {}
        for t, e in raw.get("tasks", {}).items():
            entries[t] = PoolEntry(
                t,
                dict(e.get("meta", {})),
                [RunRecord.from_dict(r) for r in e.get("history", [])],
                e.get("label", "unlabeled"),
            )
        return cls(entries, tuple(raw.get("target_models", ())), int(raw.get("k", 3)))


def parse_pool(text: str) -> Pool:
    try:
        return Pool.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"pool: {exc}") from exc


def serialize_pool(pool: Pool) -> str:
    return json.dumps(pool.to_dict(), indent=2) + "\n"


def update_pool(pool: Pool, records: Iterable[RunRecord]) -> Pool:
    """Merge new records into the history and relabel every touched task.

    A task is labeled failed iff no target model passes it at k; with no
    target models declared every model counts. Re-merging the same records
    changes nothing.
    """
    entries = {t: PoolEntry(e.task_id, dict(e.meta), list(e.history), e.label) for t, e in pool.entries.items()}
    touched = set()
    for r in records:
        entry = entries.setdefault(r.task_id, PoolEntry(r.task_id))
        key = (r.model, r.attempt)
        if any((h.model, h.attempt) == key for h in entry.history):
            continue
        entry.history.append(r)
        touched.add(r.task_id)
    targets = set(pool.target_models)
    for t in touched:
        entry = entries[t]
        relevant = [h for h in entry.history if not targets or h.model in targets]
        if not relevant:
            continue
        by_model: dict[str, list[RunRecord]] = {}
        for h in relevant:
            by_model.setdefault(h.model, []).append(h)
        solved = any(pass_at_k(g, pool.k) for g in by_model.values())
        entry.label = "passed" if solved else "failed"
    return Pool(entries, pool.target_models, pool.k)
