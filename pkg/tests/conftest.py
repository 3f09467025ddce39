from __future__ import annotations

import json
from pathlib import Path

import pytest

from epitask.scene import parse_scene
from epitask.tasks import parse_task, task_from_dict

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_doc(name: str) -> dict:
    return json.loads(fixture_text(name))


def load_task(name: str, **overrides):
    doc = fixture_doc(name)
    doc.update(overrides)
    return task_from_dict(doc)


@pytest.fixture
def scene_f():
    return parse_scene(fixture_text("scene_reference.json"))


@pytest.fixture
def two_agent():
    return parse_task(fixture_text("task_compile_two_agent.json"))


@pytest.fixture
def chain4():
    return parse_task(fixture_text("task_depth4_chain.json"))


@pytest.fixture
def inflated_k2():
    return parse_task(fixture_text("task_inflated_k2.json"))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
