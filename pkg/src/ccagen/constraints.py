"""Closing a forbidden-tuple set into base forbidden tuples (BFTs).

A BFT set is the fixpoint of two operations applied to the user constraints:

* derivation w.r.t. a parameter ``p``: when every value of ``p`` occurs in
  some forbidden tuple, any choice of one tuple per value, with the ``p``
  pairs dropped and the rest unioned, is itself forbidden;
* simplification: a tuple that contains another forbidden tuple is dropped.

Row validity then reduces to "contains no BFT".
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ResourceLimit, UnsatisfiableModel
from .model import ForbiddenTuple, SutModel, sorted_tuples

DEFAULT_TUPLE_CAP = 10**6
DEFAULT_ORACLE_CAP = 10**6

EMPTY: ForbiddenTuple = frozenset()


def _conflicts(pairs: Iterable[tuple[int, int]]) -> bool:
    seen: dict[int, int] = {}
    for p, v in pairs:
        if seen.setdefault(p, v) != v:
            return True
    return False


def derive_wrt_parameter(constraints: Iterable[ForbiddenTuple], p: int, model: SutModel,
                         cap: int = DEFAULT_TUPLE_CAP) -> set[ForbiddenTuple]:
    groups: dict[int, set[ForbiddenTuple]] = defaultdict(set)
    for ft in constraints:
        for q, v in ft:
            if q == p:
                groups[v].add(ft - {(q, v)})
                break
    card = model.parameters[p].cardinality
    if len(groups) < card:
        return set()

    remainders = [sorted_tuples(groups[v]) for v in range(card)]
    if math.prod(len(r) for r in remainders) > cap:
        raise ResourceLimit(f"derivation on parameter {p} exceeds the tuple cap ({cap})")
    derived = set()
    for choice in itertools.product(*remainders):
        merged = frozenset().union(*choice)
        if not _conflicts(merged):
            derived.add(merged)
    return derived


def simplify(constraints: Iterable[ForbiddenTuple]) -> set[ForbiddenTuple]:
    """Drop duplicates and every tuple that strictly contains another."""
    kept: list[ForbiddenTuple] = []
    for ft in sorted_tuples(set(constraints)):
        # shorter tuples come first, so only already-kept ones can be subsets
        if not any(other <= ft for other in kept):
            kept.append(ft)
    return set(kept)


@dataclass(frozen=True)
class BftSet:
    """Closed, minimal forbidden-tuple set with a per-pair lookup index.

    The ``*_ptr`` / ``*_ids`` arrays are a CSR layout of the same index for
    the compiled search kernels.
    """

    model: SutModel
    tuples: tuple[ForbiddenTuple, ...]
    index: Mapping[tuple[int, int], tuple[int, ...]] = field(init=False, repr=False, compare=False)
    arrays: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tuples = tuple(sorted_tuples(set(self.tuples)))
        object.__setattr__(self, "tuples", tuples)
        index: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, ft in enumerate(tuples):
            for pair in ft:
                index[pair].append(i)
        object.__setattr__(self, "index", {k: tuple(v) for k, v in index.items()})

        m = self.model
        bft_ptr = np.zeros(len(tuples) + 1, dtype=np.int64)
        bft_par, bft_val = [], []
        for i, ft in enumerate(tuples):
            for p, v in sorted(ft):
                bft_par.append(p)
                bft_val.append(v)
            bft_ptr[i + 1] = len(bft_par)
        pv_base = np.array([m.global_index(p, 0) for p in range(m.k)], dtype=np.int64)
        pv_ptr = np.zeros(m.total_values + 1, dtype=np.int64)
        pv_ids = []
        for g in range(m.total_values):
            pv_ids.extend(index.get(m.from_global(g), ()))
            pv_ptr[g + 1] = len(pv_ids)
        arrays = (bft_ptr, np.array(bft_par, dtype=np.int64), np.array(bft_val, dtype=np.int64),
                  pv_base, pv_ptr, np.array(pv_ids, dtype=np.int64))
        object.__setattr__(self, "arrays", arrays)

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __contains__(self, ft) -> bool:
        return frozenset(ft) in set(self.tuples)

    def as_set(self) -> set[ForbiddenTuple]:
        return set(self.tuples)


def generate_bft(model: SutModel, cap: int = DEFAULT_TUPLE_CAP) -> BftSet:
    """Iterate derive-all-parameters / simplify until the set stops changing.

    Raises :class:`UnsatisfiableModel` as soon as the empty tuple is derived.
    """
    current = simplify(model.constraints)
    while True:
        hidden: set[ForbiddenTuple] = set()
        for p in range(model.k):
            derived = derive_wrt_parameter(current, p, model, cap)
            if EMPTY in derived:
                name = model.parameters[p].name
                raise UnsatisfiableModel(
                    f"derived the empty tuple w.r.t. parameter {name!r}: "
                    f"every value of {name!r} is forbidden, no valid test exists", p)
            hidden |= derived
            if len(hidden) + len(current) > cap:
                raise ResourceLimit(f"forbidden-tuple set exceeds the cap ({cap})")
        updated = simplify(current | hidden)
        if updated == current:
            return BftSet(model, tuple(current))
        current = updated


def _assigned_pairs(assignment) -> dict[int, int]:
    if isinstance(assignment, Mapping):
        return {int(p): int(v) for p, v in assignment.items()}
    return {p: int(v) for p, v in enumerate(assignment) if v is not None and v >= 0}


def contains_bft(assignment: Mapping[int, int] | Sequence[int], bft: BftSet) -> bool:
    """True iff all pairs of some BFT occur in ``assignment``.

    ``assignment`` is a ``{parameter: value}`` mapping or a row where ``-1``
    (or ``None``) marks an unassigned parameter.
    """
    pairs = _assigned_pairs(assignment)
    checked = set()
    for pair in pairs.items():
        for i in bft.index.get(pair, ()):
            if i in checked:
                continue
            checked.add(i)
            if all(pairs.get(p) == v for p, v in bft.tuples[i]):
                return True
    return False


def matching_bft(assignment, bft: BftSet) -> ForbiddenTuple | None:
    pairs = _assigned_pairs(assignment)
    for pair in pairs.items():
        for i in bft.index.get(pair, ()):
            if all(pairs.get(p) == v for p, v in bft.tuples[i]):
                return bft.tuples[i]
    return None


def oracle_is_extendable(assignment: Mapping[int, int] | Sequence[int], model: SutModel,
                         cap: int = DEFAULT_ORACLE_CAP) -> bool:
    """Exhaustively look for a full row extending ``assignment`` that violates no initial constraint.

    Works on the raw user constraints, not on BFTs, so it can serve as an
    independent check of the closure.
    """
    fixed = _assigned_pairs(assignment)
    free = [p for p in range(model.k) if p not in fixed]
    if math.prod(model.parameters[p].cardinality for p in free) > cap:
        raise ResourceLimit(f"oracle search space exceeds cap ({cap})")
    # constraints already violated by the fixed part make every extension invalid
    relevant = []
    for ft in model.constraints:
        if any(p in fixed and fixed[p] != v for p, v in ft):
            continue
        rest = [(p, v) for p, v in ft if p not in fixed]
        if not rest:
            return False
        relevant.append(rest)
    if not relevant:
        return True
    row = dict(fixed)
    for values in itertools.product(*(range(model.parameters[p].cardinality) for p in free)):
        row.update(zip(free, values))
        if not any(all(row[p] == v for p, v in rest) for rest in relevant):
            return True
    return False
