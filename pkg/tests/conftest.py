from __future__ import annotations

import itertools
import random

import pytest

from ccagen import load_fixture
from ccagen.model import ParameterSpec, SutModel


def grid_model(cards, constraints=(), name="grid", prefix="P"):
    """Parameters named P1..Pk with integer-string values 0..n-1."""
    params = [ParameterSpec(f"{prefix}{i + 1}", tuple(str(v) for v in range(n)))
              for i, n in enumerate(cards)]
    return SutModel(params, tuple(frozenset(c) for c in constraints), name)


def random_small_model(seed: int, max_k: int = 5, max_card: int = 3, max_tuples: int = 5) -> SutModel:
    """Random model with <= max_k parameters, <= max_card values, <= max_tuples forbidden tuples."""
    rng = random.Random(seed)
    k = rng.randint(2, max_k)
    cards = [rng.randint(2, max_card) for _ in range(k)]
    cons = set()
    for _ in range(rng.randint(0, max_tuples)):
        size = rng.randint(1, min(3, k))
        ps = rng.sample(range(k), size)
        cons.add(frozenset((p, rng.randrange(cards[p])) for p in ps))
    return grid_model(cards, sorted(cons, key=sorted), name=f"rand{seed}")


def all_rows(model: SutModel):
    return itertools.product(*(range(n) for n in model.cardinalities))


def violates(row, constraints) -> bool:
    return any(all(row[p] == v for p, v in ft) for ft in constraints)


# paper's worked examples (P1 is parameter index 0)
FIVE_TUPLE_EXAMPLE = [
    {(0, 0), (1, 0)},
    {(0, 0), (1, 2)},
    {(0, 1), (3, 0)},
    {(0, 2), (3, 0)},
    {(1, 1), (3, 0)},
]
BINARY_EXAMPLE = [{(0, 1), (1, 0)}, {(1, 1), (2, 1)}]

# Drupal suite of 10 tests, in value indices
DRUPAL_SUITE_LABELS = [
    ("Windows", "Chrome", "MySQL", "Apache"),
    ("Linux", "Firefox", "PostgreSQL", "Apache"),
    ("Linux", "Chrome", "MS SQL", "Nginx"),
    ("macOS", "Firefox", "MySQL", "Nginx"),
    ("Windows", "MS Edge", "PostgreSQL", "Nginx"),
    ("Windows", "MS Edge", "MS SQL", "Apache"),
    ("macOS", "Chrome", "PostgreSQL", "Apache"),
    ("Linux", "Chrome", "MySQL", "Nginx"),
    ("Windows", "Firefox", "MS SQL", "Nginx"),
    ("Windows", "MS Edge", "MySQL", "Apache"),
]


def encode(model: SutModel, labels):
    return [model.value_index(p, lab) for p, lab in enumerate(labels)]


@pytest.fixture(scope="session")
def drupal() -> SutModel:
    return load_fixture("drupal.json")


@pytest.fixture(scope="session")
def case_study() -> SutModel:
    return load_fixture("case_study.json")


@pytest.fixture
def five_tuple_model() -> SutModel:
    return grid_model([3, 3, 3, 3], FIVE_TUPLE_EXAMPLE, name="five")


@pytest.fixture
def binary_model() -> SutModel:
    return grid_model([2, 2, 2], BINARY_EXAMPLE, name="binary")


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
