"""System-under-test models: parameters, value domains and forbidden tuples.

Two input formats are supported.

Native JSON::

    {"name": "drupal",
     "parameters": [{"name": "OS", "values": ["Windows", "Linux", "macOS"]}, ...],
     "constraints": [[{"parameter": "OS", "value": "macOS"},
                      {"parameter": "Browser", "value": "MS Edge"}], ...]}

CASA (two whitespace-separated text files)::

    model file          constraints file
    ----------          ----------------
    2                   1          <- number of clauses
    3                   2          <- number of terms in clause 1
    2 2 2               - 1 - 4    <- sign / global value index pairs

The model file holds the strength, the parameter count and one cardinality
per parameter.  Global value indices number all values consecutively in
parameter order starting at 0, so parameter 0 owns ``0..n0-1``, parameter 1
owns ``n0..n0+n1-1`` and so on.  A ``-`` term means "the value is not
selected", a ``+`` term "the value is selected".
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ModelError

Pair = tuple[int, int]
ForbiddenTuple = frozenset  # frozenset[Pair]; at most one pair per parameter


def make_tuple(pairs: Iterable[Pair]) -> ForbiddenTuple:
    """Build a forbidden tuple, rejecting two pairs on one parameter."""
    ft = frozenset((int(p), int(v)) for p, v in pairs)
    params = [p for p, _ in ft]
    if len(params) != len(set(params)):
        raise ModelError(f"tuple {sorted(ft)} has two values for one parameter")
    return ft


def tuple_key(ft: ForbiddenTuple) -> tuple[Pair, ...]:
    """Canonical sort key: sorted pairs."""
    return tuple(sorted(ft))


def sorted_tuples(tuples: Iterable[ForbiddenTuple]) -> list[ForbiddenTuple]:
    return sorted(tuples, key=lambda ft: (len(ft), tuple_key(ft)))


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def cardinality(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SutModel:
    """An immutable, validated SUT model.  Values are integer indices internally."""

    parameters: tuple[ParameterSpec, ...]
    constraints: tuple[ForbiddenTuple, ...] = ()
    name: str = "model"
    _offsets: tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "constraints", tuple(frozenset(c) for c in self.constraints))
        if len(self.parameters) < 2:
            raise ModelError("a model needs at least 2 parameters")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ModelError("duplicate parameter names")
        for p in self.parameters:
            if p.cardinality < 2:
                raise ModelError(f"parameter {p.name!r} needs at least 2 values")
            if len(set(p.values)) != p.cardinality:
                raise ModelError(f"duplicate value names in parameter {p.name!r}")
        for c in self.constraints:
            if not c:
                raise ModelError("empty forbidden tuple")
            seen = set()
            for p, v in c:
                if not 0 <= p < len(self.parameters):
                    raise ModelError(f"constraint references unknown parameter index {p}")
                if not 0 <= v < self.parameters[p].cardinality:
                    raise ModelError(f"constraint references unknown value index {v} of {names[p]!r}")
                if p in seen:
                    raise ModelError(f"constraint has two pairs for parameter {names[p]!r}")
                seen.add(p)
        offsets = [0]
        for p in self.parameters:
            offsets.append(offsets[-1] + p.cardinality)
        object.__setattr__(self, "_offsets", tuple(offsets))

    @property
    def k(self) -> int:
        return len(self.parameters)

    @property
    def cardinalities(self) -> list[int]:
        return [p.cardinality for p in self.parameters]

    @property
    def total_values(self) -> int:
        return self._offsets[-1]

    def parameter_index(self, name: str) -> int:
        for i, p in enumerate(self.parameters):
            if p.name == name:
                return i
        raise ModelError(f"unknown parameter {name!r}")

    def value_index(self, param: int, label: str) -> int:
        try:
            return self.parameters[param].values.index(label)
        except ValueError:
            raise ModelError(
                f"unknown value {label!r} for parameter {self.parameters[param].name!r}"
            ) from None

    def global_index(self, param: int, value: int) -> int:
        return self._offsets[param] + value

    def from_global(self, index: int) -> Pair:
        if not 0 <= index < self.total_values:
            raise ModelError(f"global value index {index} out of range (0..{self.total_values - 1})")
        for p in range(self.k):
            if index < self._offsets[p + 1]:
                return p, index - self._offsets[p]
        raise AssertionError("unreachable")

    def labels(self, row: Sequence[int]) -> list[str]:
        return [self.parameters[p].values[v] for p, v in enumerate(row)]

    def with_constraints(self, constraints: Iterable[ForbiddenTuple]) -> "SutModel":
        return SutModel(self.parameters, tuple(constraints), self.name)


# --------------------------------------------------------------------------- native


def parse_native(text: str) -> SutModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    try:
        params = [ParameterSpec(str(p["name"]), tuple(str(v) for v in p["values"]))
                  for p in doc["parameters"]]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed parameter list: {exc}") from None

    skeleton = SutModel(params, (), str(doc.get("name", "model")))
    constraints = []
    for i, raw in enumerate(doc.get("constraints", [])):
        if not isinstance(raw, list) or not raw:
            raise ModelError(f"constraint {i} must be a non-empty list of pairs")
        pairs = []
        for item in raw:
            try:
                p = skeleton.parameter_index(item["parameter"])
                v = skeleton.value_index(p, item["value"])
            except (KeyError, TypeError):
                raise ModelError(f"constraint {i}: each pair needs 'parameter' and 'value'") from None
            pairs.append((p, v))
        if len({p for p, _ in pairs}) != len(pairs):
            raise ModelError(f"constraint {i}: duplicate pair for one parameter")
        constraints.append(frozenset(pairs))
    return SutModel(params, tuple(constraints), skeleton.name)


def tuple_to_native(model: SutModel, ft: ForbiddenTuple) -> list[dict]:
    return [{"parameter": model.parameters[p].name, "value": model.parameters[p].values[v]}
            for p, v in sorted(ft)]


def to_native_dict(model: SutModel) -> dict:
    return {
        "name": model.name,
        "parameters": [{"name": p.name, "values": list(p.values)} for p in model.parameters],
        "constraints": [tuple_to_native(model, c) for c in model.constraints],
    }


def serialize_native(model: SutModel) -> str:
    return json.dumps(to_native_dict(model), indent=2) + "\n"


# --------------------------------------------------------------------------- CASA


class _Tokens:
    """Whitespace tokenizer that remembers line numbers for error reports."""

    def __init__(self, text: str, what: str):
        self.what = what
        self.items = [(tok, n) for n, line in enumerate(text.splitlines(), 1) for tok in line.split()]
        self.pos = 0

    def line(self) -> int | None:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else None

    def next(self) -> tuple[str, int]:
        if self.pos >= len(self.items):
            raise ModelError(f"{self.what}: unexpected end of file", self.line())
        tok = self.items[self.pos]
        self.pos += 1
        return tok

    def next_int(self, label: str, minimum: int = 0) -> int:
        tok, line = self.next()
        try:
            value = int(tok)
        except ValueError:
            raise ModelError(f"{self.what}: expected integer {label}, got {tok!r}", line) from None
        if value < minimum:
            raise ModelError(f"{self.what}: {label} must be >= {minimum}, got {value}", line)
        return value

    def expect_end(self):
        if self.pos < len(self.items):
            tok, line = self.items[self.pos]
            raise ModelError(f"{self.what}: unexpected trailing token {tok!r}", line)


def parse_casa_model(model_text: str) -> tuple[int, list[int]]:
    """Return (strength, cardinalities) from a CASA model file."""
    toks = _Tokens(model_text, "model file")
    strength = toks.next_int("strength", 1)
    k = toks.next_int("factor count", 1)
    cards = [toks.next_int("cardinality", 1) for _ in range(k)]
    toks.expect_end()
    return strength, cards


def parse_casa_clauses(constraints_text: str, total_values: int) -> list[list[tuple[bool, int]]]:
    """Return clauses as lists of ``(positive, global_index)`` literals."""
    toks = _Tokens(constraints_text, "constraints file")
    if not toks.items:
        return []
    n = toks.next_int("clause count")
    clauses = []
    for _ in range(n):
        terms = toks.next_int("term count", 1)
        clause = []
        for _ in range(terms):
            sign, line = toks.next()
            if sign not in ("+", "-"):
                raise ModelError(f"constraints file: expected '+' or '-', got {sign!r}", line)
            line = toks.line()
            idx = toks.next_int("value index")
            if idx >= total_values:
                raise ModelError(f"constraints file: index out of range: {idx} >= {total_values}", line)
            clause.append((sign == "+", idx))
        clauses.append(clause)
    toks.expect_end()
    return clauses


def clause_to_forbidden_tuples(clause: Sequence[tuple[bool, int]], model: SutModel) -> set[ForbiddenTuple]:
    """Expand the negation of a CNF clause into forbidden tuples.

    The clause is violated exactly when every literal is false: ``-v`` false
    pins its parameter to ``v``, ``+v`` false leaves every other value of the
    parameter.  Literals on the same parameter intersect their value sets; an
    empty intersection means the clause can never be violated.
    """
    allowed: dict[int, set[int]] = {}
    for positive, g in clause:
        p, v = model.from_global(g)
        dom = set(range(model.parameters[p].cardinality))
        falsifying = dom - {v} if positive else {v}
        allowed[p] = allowed.get(p, dom) & falsifying
    if any(not vals for vals in allowed.values()):
        return set()
    params = sorted(allowed)
    return {frozenset(zip(params, combo))
            for combo in itertools.product(*(sorted(allowed[p]) for p in params))}


def parse_casa(model_text: str, constraints_text: str = "", name: str = "casa") -> tuple[SutModel, int]:
    """Parse a CASA model/constraints pair.  Returns the model and the file's strength."""
    strength, cards = parse_casa_model(model_text)
    params = [ParameterSpec(f"p{i}", tuple(f"v{j}" for j in range(n))) for i, n in enumerate(cards)]
    skeleton = SutModel(params, (), name)
    constraints: list[ForbiddenTuple] = []
    seen = set()
    for clause in parse_casa_clauses(constraints_text, skeleton.total_values):
        for ft in sorted_tuples(clause_to_forbidden_tuples(clause, skeleton)):
            if ft not in seen:
                seen.add(ft)
                constraints.append(ft)
    return SutModel(params, tuple(constraints), name), strength


def to_casa(model: SutModel, strength: int = 2) -> tuple[str, str]:
    """Render a model as CASA files; each forbidden tuple becomes one all-negative clause."""
    model_text = f"{strength}\n{model.k}\n{' '.join(str(c) for c in model.cardinalities)}\n"
    lines = [str(len(model.constraints))]
    for ft in model.constraints:
        lines.append(str(len(ft)))
        lines.append(" ".join(f"- {model.global_index(p, v)}" for p, v in sorted(ft)))
    return model_text, "\n".join(lines) + "\n"
