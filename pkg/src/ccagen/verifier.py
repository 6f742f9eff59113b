"""Independent coverage and validity check for any covering array.

Everything is recomputed from the model with plain Python sets: no tuple
space, no compiled kernels, no engine bookkeeping.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .constraints import DEFAULT_ORACLE_CAP, generate_bft
from .errors import ResourceLimit
from .model import SutModel, tuple_to_native

Combo = tuple[int, ...]


@dataclass
class VerificationReport:
    t: int
    mode: str
    rows: int
    valid_tuples: int
    covered: int
    missing: list[tuple[Combo, tuple[int, ...]]] = field(default_factory=list)
    violations: list[tuple[int, frozenset]] = field(default_factory=list)
    redundant_rows: list[int] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if not self.missing and not self.violations else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self, model: SutModel | None = None) -> dict:
        def pairs(combo, values):
            if model is None:
                return [[p, v] for p, v in zip(combo, values)]
            return tuple_to_native(model, zip(combo, values))

        return {
            "verdict": self.verdict,
            "t": self.t,
            "mode": self.mode,
            "rows": self.rows,
            "valid_tuples": self.valid_tuples,
            "covered": self.covered,
            "missing": [pairs(c, v) for c, v in self.missing],
            "violations": [{"row": i, "forbidden": pairs(*zip(*sorted(ft)))}
                           for i, ft in self.violations],
            "redundant_rows": self.redundant_rows,
        }


def enumerate_valid_rows(model: SutModel, cap: int = DEFAULT_ORACLE_CAP) -> list[tuple[int, ...]]:
    """All full assignments violating no initial constraint, in lexicographic order."""
    total = math.prod(model.cardinalities)
    if total > cap:
        raise ResourceLimit(f"{total} assignments exceed the oracle cap ({cap})")
    constraints = [tuple(ft) for ft in model.constraints]
    return [row for row in itertools.product(*(range(n) for n in model.cardinalities))
            if not any(all(row[p] == v for p, v in ft) for ft in constraints)]


def _first_match(row: Sequence[int], forbidden: Iterable[frozenset]) -> frozenset | None:
    for ft in forbidden:
        if all(row[p] == v for p, v in ft):
            return ft
    return None


def _valid_tuples_bft(model: SutModel, t: int, bfts: list[frozenset]) -> dict[Combo, set]:
    out = {}
    for combo in itertools.combinations(range(model.k), t):
        members = set(combo)
        local = [ft for ft in bfts if {p for p, _ in ft} <= members]
        tables = (range(model.parameters[p].cardinality) for p in combo)
        good = set()
        for values in itertools.product(*tables):
            d = dict(zip(combo, values))
            if not any(all(d[p] == v for p, v in ft) for ft in local):
                good.add(values)
        out[combo] = good
    return out


def _valid_tuples_oracle(model: SutModel, t: int, cap: int) -> dict[Combo, set]:
    rows = enumerate_valid_rows(model, cap)
    return {combo: {tuple(r[p] for p in combo) for r in rows}
            for combo in itertools.combinations(range(model.k), t)}


def verify(rows: Sequence[Sequence[int]], model: SutModel, t: int, constraint_mode: str = "bft",
           cap: int = DEFAULT_ORACLE_CAP) -> VerificationReport:
    """Check that every valid t-tuple occurs in some row and no row is forbidden.

    ``constraint_mode="bft"`` derives the valid tuples from a freshly closed
    BFT set; ``"initial"`` derives them from an exhaustive enumeration of
    valid rows under the user constraints (small models only).
    """
    rows = [tuple(int(v) for v in r) for r in rows]
    cards = model.cardinalities
    for i, r in enumerate(rows):
        if len(r) != model.k:
            raise ValueError(f"dimension mismatch: row {i} has {len(r)} columns, model has {model.k}")
        for p, v in enumerate(r):
            if not 0 <= v < cards[p]:
                raise ValueError(f"dimension mismatch: row {i} column {p} value {v} out of range")
    if not 2 <= t <= model.k:
        raise ValueError(f"strength must satisfy 2 <= t <= k ({model.k}), got {t}")

    if constraint_mode == "bft":
        forbidden = list(generate_bft(model).tuples)
        valid = _valid_tuples_bft(model, t, forbidden)
    elif constraint_mode == "initial":
        forbidden = list(model.constraints)
        valid = _valid_tuples_oracle(model, t, cap)
    else:
        raise ValueError(f"constraint_mode must be 'bft' or 'initial', got {constraint_mode!r}")

    violations = []
    for i, r in enumerate(rows):
        hit = _first_match(r, forbidden)
        if hit is not None:
            violations.append((i, hit))

    counts: Counter = Counter()
    for r in rows:
        for combo, good in valid.items():
            key = tuple(r[p] for p in combo)
            if key in good:
                counts[combo, key] += 1

    missing = [(combo, values) for combo, good in valid.items() for values in sorted(good)
               if counts[combo, values] == 0]
    n_valid = sum(len(g) for g in valid.values())

    redundant = []
    for i, r in enumerate(rows):
        keys = [(combo, tuple(r[p] for p in combo)) for combo in valid]
        keys = [key for key in keys if key[1] in valid[key[0]]]
        if all(counts[key] >= 2 for key in keys):
            redundant.append(i)
            for key in keys:
                counts[key] -= 1

    return VerificationReport(t=t, mode=constraint_mode, rows=len(rows), valid_tuples=n_valid,
                              covered=n_valid - len(missing), missing=missing,
                              violations=violations, redundant_rows=redundant)
