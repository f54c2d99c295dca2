from __future__ import annotations

from pathlib import Path

import pytest

from flowmc.flowgraph import FlowGraph, translate
from flowmc.ir import AnnotatedProgram
from flowmc.ir_text import parse_program

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def fixture_text(name: str) -> str:
    return (FIXTURES / f"{name}.apg").read_text(encoding="utf-8")


def load_program(name: str) -> AnnotatedProgram:
    result = parse_program(fixture_text(name))
    assert result.program is not None, result.diagnostics
    assert result.diagnostics == [], result.diagnostics
    return result.program


def load_flow_graph(name: str) -> FlowGraph:
    return translate(load_program(name))


@pytest.fixture
def stee():
    return load_flow_graph("stee")
