"""The t-way search space: every parameter combination with a dense table of
value tuples, a validity flag and a cover count per tuple.

Value tuples are ranked mixed-radix over the combination's cardinalities
(first member most significant), so a combination's table is a contiguous
slice of the flat ``counts``/``valid`` arrays.  Uncovered valid tuples are
additionally kept in an indexable set so that a uniformly random one can be
drawn in O(1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _kernels as K
from .constraints import BftSet
from .errors import ResourceLimit
from .model import SutModel

DEFAULT_SPACE_CAP = 10**8

Combo = tuple[int, ...]


@dataclass(frozen=True)
class Totals:
    valid_total: int
    covered_valid_total: int

    @property
    def uncovered(self) -> int:
        return self.valid_total - self.covered_valid_total


class TupleSpace:
    def __init__(self, model: SutModel, t: int, combos: list[Combo], layout: tuple,
                 valid: np.ndarray):
        self.model = model
        self.t = t
        self.combos = combos
        self.layout = layout
        self.valid = valid
        self.counts = np.zeros(valid.shape[0], dtype=np.int32)
        self.unc_list = np.flatnonzero(valid).astype(np.int64)
        self.unc_list.resize(valid.shape[0], refcheck=False)
        self.unc_pos = np.full(valid.shape[0], -1, dtype=np.int64)
        nvalid = int(valid.sum())
        self.unc_pos[self.unc_list[:nvalid]] = np.arange(nvalid)
        self.state = np.array([nvalid], dtype=np.int64)
        self.valid_total = nvalid
        self._combo_index = {c: i for i, c in enumerate(combos)}

    # kernels take these bundles
    @property
    def cov(self) -> tuple:
        return (self.counts, self.valid, self.unc_list, self.unc_pos, self.state)

    @property
    def combo_off(self) -> np.ndarray:
        return self.layout[2]

    @property
    def total(self) -> int:
        return int(self.valid.shape[0])

    @property
    def invalid_total(self) -> int:
        return self.total - self.valid_total

    @property
    def uncovered_total(self) -> int:
        return int(self.state[0])

    @property
    def covered_valid_total(self) -> int:
        return self.valid_total - self.uncovered_total

    def totals(self) -> Totals:
        return Totals(self.valid_total, self.covered_valid_total)

    def combo_slice(self, combo: Combo) -> slice:
        ci = self._combo_index[tuple(combo)]
        return slice(int(self.combo_off[ci]), int(self.combo_off[ci + 1]))

    def _flat(self, combo: Combo, values: Sequence[int]) -> int:
        ci = self._combo_index[tuple(combo)]
        mult = self.layout[1][ci]
        return int(self.combo_off[ci] + sum(int(v) * int(m) for v, m in zip(values, mult)))

    def decode(self, idx: int) -> tuple[Combo, tuple[int, ...]]:
        ci = int(K.combo_of(idx, self.combo_off))
        local = idx - int(self.combo_off[ci])
        combo = self.combos[ci]
        mult = self.layout[1][ci]
        cards = self.model.cardinalities
        return combo, tuple((local // int(m)) % cards[p] for p, m in zip(combo, mult))

    def cover_count(self, combo: Combo, values: Sequence[int]) -> int:
        return int(self.counts[self._flat(combo, values)])

    def is_valid(self, combo: Combo, values: Sequence[int]) -> bool:
        return bool(self.valid[self._flat(combo, values)])

    def combo_valid_counts(self) -> np.ndarray:
        return np.add.reduceat(self.valid.astype(np.int64), self.combo_off[:-1])

    def max_combo_valid(self) -> int:
        return int(self.combo_valid_counts().max())

    def memory_bytes(self) -> int:
        arrays = [self.counts, self.valid, self.unc_list, self.unc_pos, *self.layout]
        return int(sum(a.nbytes for a in arrays))

    def recount(self, rows: np.ndarray) -> np.ndarray:
        """Cover counts recomputed from scratch for ``rows``."""
        out = np.zeros_like(self.counts)
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        K.recount(rows, rows.shape[0], self.layout, out)
        return out

    def audit(self, rows: np.ndarray) -> bool:
        fresh = self.recount(rows)
        if not np.array_equal(fresh, self.counts):
            return False
        uncovered = int(np.count_nonzero(self.valid & (fresh == 0)))
        return uncovered == self.uncovered_total

    def copy(self) -> "TupleSpace":
        clone = object.__new__(TupleSpace)
        clone.__dict__.update(self.__dict__)
        for name in ("counts", "unc_list", "unc_pos", "state"):
            setattr(clone, name, getattr(self, name).copy())
        return clone


def _combo_layout(cards: Sequence[int], combos: list[Combo], k: int, t: int) -> tuple:
    nc = len(combos)
    combo_par = np.array(combos, dtype=np.int64).reshape(nc, t)
    combo_mult = np.ones((nc, t), dtype=np.int64)
    sizes = np.ones(nc, dtype=np.int64)
    card_arr = np.asarray(cards, dtype=np.int64)
    for j in range(t - 1, -1, -1):
        combo_mult[:, j] = sizes
        sizes = sizes * card_arr[combo_par[:, j]]
    combo_off = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(sizes, out=combo_off[1:])

    per_col = math.comb(k - 1, t - 1)
    col_combos = np.empty((k, per_col), dtype=np.int64)
    col_mult = np.empty((k, per_col), dtype=np.int64)
    fill = np.zeros(k, dtype=np.int64)
    for j in range(t):
        for ci in range(nc):
            c = combo_par[ci, j]
            col_combos[c, fill[c]] = ci
            col_mult[c, fill[c]] = combo_mult[ci, j]
            fill[c] += 1
    return combo_par, combo_mult, combo_off, col_combos, col_mult, card_arr


def build_space(model: SutModel, t: int, bft: BftSet, cap: int = DEFAULT_SPACE_CAP) -> TupleSpace:
    k = model.k
    if not 2 <= t <= k:
        raise ValueError(f"strength must satisfy 2 <= t <= k ({k}), got {t}")
    cards = model.cardinalities
    combos = list(itertools.combinations(range(k), t))
    total = sum(math.prod(cards[p] for p in c) for c in combos)
    if total > cap:
        raise ResourceLimit(f"{total} t-tuples exceed the search-space cap ({cap})")
    layout = _combo_layout(cards, combos, k, t)
    combo_off = layout[2]
    if int(combo_off[-1]) != total:
        raise AssertionError("tuple count mismatch")

    valid = np.ones(total, dtype=np.bool_)
    index = {c: i for i, c in enumerate(combos)}
    for ft in bft:
        if len(ft) > t:
            continue
        fixed = dict(ft)
        others = [p for p in range(k) if p not in fixed]
        for extra in itertools.combinations(others, t - len(ft)):
            combo = tuple(sorted((*fixed, *extra)))
            ci = index[combo]
            table = valid[combo_off[ci]:combo_off[ci + 1]].reshape([cards[p] for p in combo])
            table[tuple(fixed.get(p, slice(None)) for p in combo)] = False
    return TupleSpace(model, t, combos, layout, valid)


def row_tuples(row: Sequence[int], t: int) -> Iterator[tuple[Combo, tuple[int, ...]]]:
    for combo in itertools.combinations(range(len(row)), t):
        yield combo, tuple(int(row[p]) for p in combo)


def apply_row(space: TupleSpace, row: Sequence[int], direction: str = "add") -> Totals:
    """Add or remove one row's tuples from the cover counts."""
    row = np.asarray(row, dtype=np.int64)
    if direction == "add":
        K.apply_row(row, 1, space.layout, space.cov)
    elif direction == "remove":
        if K.row_min_count(row, space.layout, space.cov) < 1:
            raise RuntimeError("cover count underflow: row was never added to this space")
        K.apply_row(row, -1, space.layout, space.cov)
    else:
        raise ValueError(f"direction must be 'add' or 'remove', got {direction!r}")
    return space.totals()


def delta_validity(row: Sequence[int], changed_column: int, bft: BftSet) -> bool:
    """Validity of a row that differs from a valid row only at ``changed_column``.

    Only BFTs containing the new pair are checked; any fresh violation must
    involve it.
    """
    row = np.asarray(row, dtype=np.int64)
    return not K.pair_violates(row, int(changed_column), bft.arrays)


def select_uncovered(space: TupleSpace, combo: Combo | None, rng: np.random.Generator
                     ) -> tuple[Combo, tuple[int, ...]] | None:
    """Uniformly random uncovered valid tuple, from ``combo`` or (``None``) from anywhere."""
    if combo is None:
        n = space.uncovered_total
        if n == 0:
            return None
        return space.decode(int(space.unc_list[rng.integers(0, n)]))
    sl = space.combo_slice(combo)
    free = np.flatnonzero(space.valid[sl] & (space.counts[sl] == 0))
    if free.size == 0:
        return None
    return space.decode(sl.start + int(free[rng.integers(0, free.size)]))
