"""Constrained mixed covering array construction by mixed-neighborhood tabu search.

The run is: close the constraints into BFTs, build the t-tuple space, seed
an initial array (random rows picked by Hamming distance, or rows assembled
from uncovered tuples), then alternate two neighborhoods until every valid
tuple is covered.  When the search stalls a diversified row is appended.

Random numbers come from numpy's PCG64 (``np.random.default_rng(seed)``),
whose streams are bit-identical across platforms; the compiled kernels draw
from the same generator object.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .constraints import BftSet, generate_bft
from .errors import RetryExhausted, RowBudgetExceeded
from .model import SutModel
from .tuplespace import TupleSpace, apply_row, build_space

REPORT_SCHEMA_VERSION = 1


@dataclass
class SearchConfig:
    t: int = 2
    initial_n: int | None = None        # None: largest valid-tuple count of any combination
    iterations: int = 100               # tabu steps per outer round
    i_rows: int | None = None           # None: current row count
    n1_probability: float = 0.5
    stagnation_limit: int = 50
    max_rows: int = 100_000
    retry_cap: int = 1000
    seed: int = 0
    prune: bool = False

    def __post_init__(self):
        if self.t < 2:
            raise ValueError("strength t must be >= 2")
        if self.initial_n is not None and self.initial_n < 1:
            raise ValueError("initial_n must be positive")
        if self.i_rows is not None and self.i_rows < 1:
            raise ValueError("i_rows must be positive")
        for name in ("iterations", "stagnation_limit", "max_rows", "retry_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.n1_probability <= 1.0:
            raise ValueError("n1_probability must lie in [0, 1]")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


class TabuList:
    """Bounded FIFO of row indices without duplicates."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._queue: deque[int] = deque()
        self._members: set[int] = set()

    def add(self, item: int) -> None:
        if item in self._members:
            return
        if len(self._queue) == self.capacity:
            self._members.discard(self._queue.popleft())
        self._queue.append(item)
        self._members.add(item)

    def __contains__(self, item: int) -> bool:
        return item in self._members

    def __len__(self) -> int:
        return len(self._queue)

    def __iter__(self):
        return iter(self._queue)


@dataclass
class RunReport:
    final_size: int
    iterations_used: int
    wall_time: float
    seed: int
    t: int
    model: str
    timings: dict[str, float]
    config: dict
    initial_size: int = 0
    rows_appended: int = 0
    n1_calls: int = 0
    n2_calls: int = 0
    duplicate_rows: int = 0
    pruned_size: int | None = None
    bft_count: int = 0
    tuples_total: int = 0
    tuples_valid: int = 0
    tuples_invalid: int = 0
    space_bytes: int = 0
    best_fitness_history: list[int] = field(default_factory=list)
    verification: dict | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"schema_version": REPORT_SCHEMA_VERSION}
        d.update(asdict(self))
        return d


class CoveringArray:
    """Rows of the array under construction, kept in sync with a tuple space.

    Alongside each row the flat index of its tuple in every combination is
    cached (``index``), which makes single-cell fitness deltas cheap.
    """

    def __init__(self, model: SutModel, space: TupleSpace, bft: BftSet, capacity: int = 16):
        self.model = model
        self.space = space
        self.bft = bft
        self.t = space.t
        capacity = max(capacity, 1)
        self._buf = np.zeros((capacity, model.k), dtype=np.int64)
        self._idx = np.zeros((capacity, len(space.combos)), dtype=np.int32)
        self.n = 0

    @property
    def rows(self) -> np.ndarray:
        return self._buf[: self.n]

    @property
    def index(self) -> np.ndarray:
        return self._idx[: self.n]

    def __len__(self) -> int:
        return self.n

    @property
    def fitness(self) -> int:
        return self.space.uncovered_total

    def append(self, row: Sequence[int]) -> None:
        if self.n == self._buf.shape[0]:
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
            self._idx = np.concatenate([self._idx, np.zeros_like(self._idx)])
        self._buf[self.n] = row
        apply_row(self.space, self._buf[self.n], "add")
        K.fill_row_index(self._buf[self.n], self.space.layout, self._idx[self.n])
        self.n += 1

    def remove(self, index: int) -> None:
        apply_row(self.space, self._buf[index], "remove")
        self._buf[index : self.n - 1] = self._buf[index + 1 : self.n]
        self._idx[index : self.n - 1] = self._idx[index + 1 : self.n]
        self.n -= 1

    def index_consistent(self) -> bool:
        fresh = np.empty_like(self._idx[0])
        for r in range(self.n):
            K.fill_row_index(self._buf[r], self.space.layout, fresh)
            if not np.array_equal(fresh, self._idx[r]):
                return False
        return True

    def duplicate_count(self) -> int:
        return self.n - len({tuple(r) for r in self.rows.tolist()})


def hamming_distance(candidate: Sequence[int], array) -> int:
    """Number of (row, column) positions where ``candidate`` differs from the array's rows."""
    rows = array.rows if isinstance(array, CoveringArray) else np.asarray(array)
    if len(rows) == 0:
        return 0
    return int(np.count_nonzero(rows != np.asarray(candidate)))


def random_valid_row(model: SutModel, bft: BftSet, rng: np.random.Generator,
                     retry_cap: int = 1000) -> np.ndarray:
    out = np.empty(model.k, dtype=np.int64)
    cards = np.asarray(model.cardinalities, dtype=np.int64)
    if not K.random_row(out, rng, retry_cap, cards, bft.arrays):
        raise RetryExhausted(f"no valid random row after {retry_cap} draws")
    return out


def constructive_row(space: TupleSpace, bft: BftSet, rng: np.random.Generator) -> np.ndarray | None:
    out = np.empty(space.model.k, dtype=np.int64)
    cand = np.empty(int(np.diff(space.combo_off).max()), dtype=np.int64)
    if K.constructive_row(out, rng, space.layout, space.cov, bft.arrays, cand):
        return out
    return None


def _pick_by_distance(array: CoveringArray, rng, retry_cap: int) -> np.ndarray:
    c1 = random_valid_row(array.model, array.bft, rng, retry_cap)
    c2 = random_valid_row(array.model, array.bft, rng, retry_cap)
    return c1 if hamming_distance(c1, array) > hamming_distance(c2, array) else c2


def diversified_row(array: CoveringArray, rng, retry_cap: int) -> np.ndarray:
    """Better of two random valid rows by Hamming distance; constructive fallback."""
    try:
        return _pick_by_distance(array, rng, retry_cap)
    except RetryExhausted:
        row = constructive_row(array.space, array.bft, rng)
        if row is None:
            raise
        return row


def initialize(model: SutModel, bft: BftSet, space: TupleSpace, config: SearchConfig,
               rng: np.random.Generator, n: int | None = None) -> CoveringArray:
    n = n if n is not None else (config.initial_n or space.max_combo_valid())
    array = CoveringArray(model, space, bft, capacity=2 * n)
    try:
        first = random_valid_row(model, bft, rng, config.retry_cap)
    except RetryExhausted:
        first = constructive_row(space, bft, rng)
        if first is None:
            raise
    array.append(first)
    while array.n < n:
        if space.uncovered_total < space.covered_valid_total:
            try:
                row = _pick_by_distance(array, rng, config.retry_cap)
            except RetryExhausted:
                row = constructive_row(space, bft, rng)
                if row is None:
                    raise
        else:
            row = constructive_row(space, bft, rng)
            if row is None:
                row = random_valid_row(model, bft, rng, config.retry_cap)
        array.append(row)
    return array


def neighborhood_n1(array: CoveringArray, space: TupleSpace, bft: BftSet, i_rows: int,
                    rng: np.random.Generator) -> int:
    return int(K.neighborhood_n1(array.rows, array.index, array.n, i_rows, rng, space.layout, space.cov,
                                 bft.arrays))


def neighborhood_n2(array: CoveringArray, space: TupleSpace, bft: BftSet, i_rows: int,
                    rng: np.random.Generator, tabu: TabuList | None = None) -> int:
    visited = np.empty(max(array.n, 1), dtype=np.int64)
    accepted, nvisited = K.neighborhood_n2(array.rows, array.index, array.n, i_rows, rng, space.layout,
                                           space.cov, bft.arrays, visited)
    if tabu is not None:
        for r in visited[:nvisited]:
            tabu.add(int(r))
    return int(accepted)


def prune_rows(array: CoveringArray) -> int:
    """Greedily drop rows whose tuples are all covered elsewhere.  Returns rows removed."""
    removed = 0
    i = 0
    while i < array.n:
        row = array.rows[i]
        if K.row_min_count(row, array.space.layout, array.space.cov) >= 2:
            array.remove(i)
            removed += 1
        else:
            i += 1
    return removed


def generate(model: SutModel, config: SearchConfig, bft: BftSet | None = None
             ) -> tuple[CoveringArray, RunReport]:
    start = time.perf_counter()
    timings: dict[str, float] = {}
    rng = np.random.default_rng(config.seed)

    tic = time.perf_counter()
    if bft is None:
        bft = generate_bft(model)
    timings["bft"] = time.perf_counter() - tic

    tic = time.perf_counter()
    space = build_space(model, config.t, bft)
    timings["build"] = time.perf_counter() - tic

    tic = time.perf_counter()
    n0 = min(config.initial_n or space.max_combo_valid(), config.max_rows)
    array = initialize(model, bft, space, config, rng, n0)
    timings["init"] = time.perf_counter() - tic

    tic = time.perf_counter()
    progress = np.array([space.uncovered_total, 0, 0, 0], dtype=np.int64)
    history = [int(progress[0])]
    steps = 0
    appended = 0
    while space.uncovered_total > 0:
        i_rows = config.i_rows or array.n
        steps += K.tabu_steps(array.rows, array.index, array.n, config.iterations, config.n1_probability,
                              i_rows, config.stagnation_limit, progress, rng,
                              space.layout, space.cov, bft.arrays)
        if int(progress[0]) < history[-1]:
            history.append(int(progress[0]))
        if space.uncovered_total == 0:
            break
        if progress[1] >= config.stagnation_limit:
            if array.n >= config.max_rows:
                raise RowBudgetExceeded(
                    f"{space.uncovered_total} valid tuples still uncovered at max_rows={config.max_rows}")
            array.append(diversified_row(array, rng, config.retry_cap))
            appended += 1
            progress[0] = min(int(progress[0]), space.uncovered_total)
            progress[1] = 0
            if int(progress[0]) < history[-1]:
                history.append(int(progress[0]))
    timings["search"] = time.perf_counter() - tic

    final_size = array.n
    pruned = None
    if config.prune:
        prune_rows(array)
        pruned = array.n

    report = RunReport(
        final_size=final_size,
        iterations_used=steps,
        wall_time=time.perf_counter() - start,
        seed=config.seed,
        t=config.t,
        model=model.name,
        timings=timings,
        config=asdict(config),
        initial_size=n0,
        rows_appended=appended,
        n1_calls=int(progress[2]),
        n2_calls=int(progress[3]),
        duplicate_rows=array.duplicate_count(),
        pruned_size=pruned,
        bft_count=len(bft),
        tuples_total=space.total,
        tuples_valid=space.valid_total,
        tuples_invalid=space.invalid_total,
        space_bytes=space.memory_bytes(),
        best_fitness_history=history,
    )
    return array, report
