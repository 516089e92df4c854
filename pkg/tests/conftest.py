import json
from pathlib import Path

import pytest

from mbdiag.model import Observation, parse_model

MODELS = Path(__file__).resolve().parent.parent / "models"


def load_model(name: str):
    return parse_model((MODELS / f"{name}.json").read_text())


def obs(*triples) -> list[Observation]:
    return [Observation(c, t, v) for c, t, v in triples]


@pytest.fixture
def fulladder():
    return load_model("fulladder")


@pytest.fixture
def generators():
    return load_model("generators")


@pytest.fixture
def flipflop():
    return load_model("flipflop")


@pytest.fixture
def bulbs():
    return load_model("bulbs")


@pytest.fixture
def delay():
    return load_model("delay")


FULLADDER_INPUTS = [("a", 0, True), ("b", 0, False), ("cin", 0, True)]
FULLADDER_EVIDENCE = FULLADDER_INPUTS + [("or1", 0, False), ("xor2", 0, False)]
FLIPFLOP_INPUTS = [("D", 0, False), ("S", 0, False), ("E", 0, True)]
FLIPFLOP_EVIDENCE = FLIPFLOP_INPUTS + [("and6", 0, False), ("and7", 0, False)]


def components(members) -> set:
    return {tc.component for tc in members}


def model_from(doc: dict):
    return parse_model(json.dumps(doc))


def gate(gid, kind, feeders, **extra):
    """Shorthand gate entry + connections for hand-built model documents."""
    branches = {
        "and": [
            {"guard": "x == false", "expr": "false"},
            {"guard": "y == false", "expr": "false"},
            {"guard": "true", "expr": "x and y"},
        ],
        "or": [
            {"guard": "x == true", "expr": "true"},
            {"guard": "y == true", "expr": "true"},
            {"guard": "true", "expr": "x or y"},
        ],
        "nand": [
            {"guard": "x == false", "expr": "true"},
            {"guard": "y == false", "expr": "true"},
            {"guard": "true", "expr": "not (x and y)"},
        ],
        "xor": [{"guard": "true", "expr": "x != y"}],
        "buf": [{"guard": "true", "expr": "x"}],
        "not": [{"guard": "true", "expr": "not x"}],
    }[kind]
    ports = ["x", "y"][: len(feeders)]
    comp = {
        "id": gid,
        "type": "function",
        "inputs": ports,
        "function": {"branches": branches, **extra},
    }
    conns = [
        {"from": f"{feeder}.out", "to": f"{gid}.{port}"}
        for feeder, port in zip(feeders, ports)
    ]
    return comp, conns
