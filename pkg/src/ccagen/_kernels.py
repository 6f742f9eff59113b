"""Compiled inner loops shared by the tuple space and the search engine.

Argument bundles (plain tuples so numba can type them):

``bft``   -- (bft_ptr, bft_par, bft_val, pv_base, pv_ptr, pv_ids), CSR layout of
             the BFT list and of the (parameter, value) -> BFT-id index.
``space`` -- (combo_par, combo_mult, combo_off, col_combos, col_mult, cards),
             the static layout of the t-tuple tables.
``cov``   -- (counts, valid, unc_list, unc_pos, state); ``state[0]`` is the
             number of uncovered valid tuples (the fitness).

Rows use ``-1`` for unassigned positions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ------------------------------------------------------------------ validity


@njit(cache=True)
def pair_violates(row, p, bft):
    """True iff some BFT containing (p, row[p]) is fully present in ``row``."""
    bft_ptr, bft_par, bft_val, pv_base, pv_ptr, pv_ids = bft
    v = row[p]
    if v < 0:
        return False
    g = pv_base[p] + v
    for j in range(pv_ptr[g], pv_ptr[g + 1]):
        b = pv_ids[j]
        hit = True
        for q in range(bft_ptr[b], bft_ptr[b + 1]):
            if row[bft_par[q]] != bft_val[q]:
                hit = False
                break
        if hit:
            return True
    return False


@njit(cache=True)
def row_violates(row, bft):
    for p in range(row.shape[0]):
        if pair_violates(row, p, bft):
            return True
    return False


# ------------------------------------------------------------------ coverage bookkeeping


@njit(cache=True)
def tuple_index(row, ci, space):
    combo_par, combo_mult, combo_off = space[0], space[1], space[2]
    s = combo_off[ci]
    for j in range(combo_par.shape[1]):
        s += row[combo_par[ci, j]] * combo_mult[ci, j]
    return s


@njit(cache=True)
def combo_of(idx, combo_off):
    return np.searchsorted(combo_off, idx, side="right") - 1


@njit(cache=True)
def _inc(idx, cov):
    counts, valid, unc_list, unc_pos, state = cov
    counts[idx] += 1
    if counts[idx] == 1 and valid[idx]:
        pos = unc_pos[idx]
        last = unc_list[state[0] - 1]
        unc_list[pos] = last
        unc_pos[last] = pos
        unc_pos[idx] = -1
        state[0] -= 1


@njit(cache=True)
def _dec(idx, cov):
    counts, valid, unc_list, unc_pos, state = cov
    if counts[idx] <= 0:
        raise RuntimeError("cover count underflow: removing a tuple that is not covered")
    counts[idx] -= 1
    if counts[idx] == 0 and valid[idx]:
        unc_list[state[0]] = idx
        unc_pos[idx] = state[0]
        state[0] += 1


@njit(cache=True)
def row_min_count(row, space, cov):
    counts = cov[0]
    lo = np.iinfo(np.int64).max
    for ci in range(space[0].shape[0]):
        c = counts[tuple_index(row, ci, space)]
        if c < lo:
            lo = c
    return lo


@njit(cache=True)
def apply_row(row, sign, space, cov):
    for ci in range(space[0].shape[0]):
        idx = tuple_index(row, ci, space)
        if sign > 0:
            _inc(idx, cov)
        else:
            _dec(idx, cov)


@njit(cache=True)
def recount(rows, n, space, counts_out):
    counts_out[:] = 0
    for r in range(n):
        for ci in range(space[0].shape[0]):
            counts_out[tuple_index(rows[r], ci, space)] += 1


@njit(cache=True)
def fill_row_index(row, space, out):
    for ci in range(space[0].shape[0]):
        out[ci] = tuple_index(row, ci, space)


@njit(cache=True)
def cell_delta(row, ridx, c, new_value, space, cov):
    """Fitness change if ``row[c]`` became ``new_value`` (row left untouched).

    ``ridx`` holds the row's flat tuple index per combination.  Both the
    current and the changed row must be valid, so every tuple touched is
    valid and the validity flags need not be read.
    """
    col_combos, col_mult = space[3], space[4]
    counts = cov[0]
    shift = new_value - row[c]
    d = 0
    for j in range(col_combos.shape[1]):
        idx = ridx[col_combos[c, j]]
        if counts[idx] == 1:
            d += 1
        if counts[idx + shift * col_mult[c, j]] == 0:
            d -= 1
    return d


@njit(cache=True)
def set_cell(row, ridx, c, new_value, space, cov):
    col_combos, col_mult = space[3], space[4]
    shift = new_value - row[c]
    for j in range(col_combos.shape[1]):
        ci = col_combos[c, j]
        idx = ridx[ci]
        nidx = idx + shift * col_mult[c, j]
        _dec(idx, cov)
        _inc(nidx, cov)
        ridx[ci] = nidx
    row[c] = new_value


@njit(cache=True)
def _combo_shift(ci, c, row, new_row, mark, space):
    """Index shift of combo ``ci`` when ``row`` becomes ``new_row``.

    Each affected combo is handled once, under its smallest changed column;
    returns ``(False, 0)`` for the other visits.
    """
    combo_par, combo_mult = space[0], space[1]
    shift = 0
    for j in range(combo_par.shape[1]):
        m = combo_par[ci, j]
        if mark[m]:
            if m < c:
                return False, 0
            shift += (new_row[m] - row[m]) * combo_mult[ci, j]
    return True, shift


@njit(cache=True)
def change_delta(row, ridx, new_row, cols, ncols, mark, space, cov):
    # same validity precondition as cell_delta
    col_combos = space[3]
    counts = cov[0]
    d = 0
    for a in range(ncols):
        c = cols[a]
        for j in range(col_combos.shape[1]):
            ci = col_combos[c, j]
            first, shift = _combo_shift(ci, c, row, new_row, mark, space)
            if not first:
                continue
            idx = ridx[ci]
            if counts[idx] == 1:
                d += 1
            if counts[idx + shift] == 0:
                d -= 1
    return d


@njit(cache=True)
def apply_change(row, ridx, new_row, cols, ncols, mark, space, cov):
    col_combos = space[3]
    for a in range(ncols):
        c = cols[a]
        for j in range(col_combos.shape[1]):
            ci = col_combos[c, j]
            first, shift = _combo_shift(ci, c, row, new_row, mark, space)
            if not first:
                continue
            idx = ridx[ci]
            _dec(idx, cov)
            _inc(idx + shift, cov)
            ridx[ci] = idx + shift
    for a in range(ncols):
        row[cols[a]] = new_row[cols[a]]


@njit(cache=True)
def decode_into(idx, ci, out, space):
    """Write the values of flat tuple ``idx`` (in combo ``ci``) into ``out``."""
    combo_par, combo_mult, combo_off, cards = space[0], space[1], space[2], space[5]
    local = idx - combo_off[ci]
    for j in range(combo_par.shape[1]):
        p = combo_par[ci, j]
        out[p] = (local // combo_mult[ci, j]) % cards[p]


# ------------------------------------------------------------------ row construction


@njit(cache=True)
def random_row(out, rng, retry_cap, cards, bft):
    for _ in range(retry_cap):
        for p in range(cards.shape[0]):
            out[p] = rng.integers(0, cards[p])
        if not row_violates(out, bft):
            return True
    return False


@njit(cache=True)
def constructive_row(out, rng, space, cov, bft, cand):
    """Fill a row from uncovered valid tuples, one parameter combination at a time.

    For each combination with a free position, a tuple is drawn uniformly from
    the uncovered valid tuples that agree with the positions fixed so far and
    do not complete a BFT.  Leftover positions get random non-violating values.
    Returns False on a dead end (no admissible value for some position).
    """
    combo_par, combo_mult, combo_off, cards = space[0], space[1], space[2], space[5]
    counts, valid = cov[0], cov[1]
    t = combo_par.shape[1]
    out[:] = -1
    placed = np.empty(t, dtype=np.int64)
    for ci in range(combo_par.shape[0]):
        free = False
        for j in range(t):
            if out[combo_par[ci, j]] < 0:
                free = True
                break
        if not free:
            continue
        ncand = 0
        for idx in range(combo_off[ci], combo_off[ci + 1]):
            if counts[idx] != 0 or not valid[idx]:
                continue
            local = idx - combo_off[ci]
            ok = True
            for j in range(t):
                p = combo_par[ci, j]
                v = (local // combo_mult[ci, j]) % cards[p]
                if out[p] >= 0 and out[p] != v:
                    ok = False
                    break
            if ok:
                cand[ncand] = idx
                ncand += 1
        while ncand > 0:
            pick = rng.integers(0, ncand)
            idx = cand[pick]
            local = idx - combo_off[ci]
            nplaced = 0
            for j in range(t):
                p = combo_par[ci, j]
                if out[p] < 0:
                    out[p] = (local // combo_mult[ci, j]) % cards[p]
                    placed[nplaced] = p
                    nplaced += 1
            bad = False
            for a in range(nplaced):
                if pair_violates(out, placed[a], bft):
                    bad = True
                    break
            if not bad:
                break
            for a in range(nplaced):
                out[placed[a]] = -1
            cand[pick] = cand[ncand - 1]
            ncand -= 1

    options = np.empty(cards.max(), dtype=np.int64)
    for p in range(cards.shape[0]):
        if out[p] >= 0:
            continue
        nopt = 0
        for v in range(cards[p]):
            out[p] = v
            if not pair_violates(out, p, bft):
                options[nopt] = v
                nopt += 1
        if nopt == 0:
            out[p] = -1
            return False
        out[p] = options[rng.integers(0, nopt)]
    return not row_violates(out, bft)


# ------------------------------------------------------------------ neighborhoods


@njit(cache=True)
def neighborhood_n1(rows, ridx, n, i_rows, rng, space, cov, bft):
    """Single-cell moves down one random column; keep a move iff fitness does not get worse."""
    state = cov[4]
    cards = space[5]
    if state[0] == 0 or n == 0:
        return 0
    k = rows.shape[1]
    c = rng.integers(0, k)
    r = rng.integers(0, n)
    card = cards[c]
    best = state[0]
    accepted = 0
    attempts = 0
    invalid_here = 0
    max_attempts = 10 * i_rows
    while accepted < i_rows and attempts < max_attempts:
        attempts += 1
        row = rows[r]
        old = row[c]
        nv = rng.integers(0, card - 1)
        if nv >= old:
            nv += 1
        row[c] = nv
        bad = pair_violates(row, c, bft)
        row[c] = old
        if bad:
            invalid_here += 1
            if invalid_here >= card - 1:
                invalid_here = 0
                r = (r + 1) % n
            continue
        invalid_here = 0
        d = cell_delta(row, ridx[r], c, nv, space, cov)
        if state[0] + d <= best:
            set_cell(row, ridx[r], c, nv, space, cov)
            best = state[0]
            accepted += 1
            if best == 0:
                break
        r = (r + 1) % n
    return accepted


@njit(cache=True)
def neighborhood_n2(rows, ridx, n, i_rows, rng, space, cov, bft, visited):
    """Overwrite random non-tabu rows with random uncovered tuples.

    The acceptance threshold is local to the call and starts at +infinity, so
    the first evaluated move is always kept.  Rows become tabu, in visiting
    order, in ``visited``.  Returns ``(accepted, number_visited)``.
    """
    state = cov[4]
    unc_list = cov[2]
    combo_par, combo_off = space[0], space[2]
    accepted = 0
    if n == 0:
        return 0, 0
    k = rows.shape[1]
    t = combo_par.shape[1]
    free = np.arange(n)
    nfree = n
    new_row = np.empty(k, dtype=rows.dtype)
    cols = np.empty(t, dtype=np.int64)
    mark = np.zeros(k, dtype=np.bool_)
    local_best = np.iinfo(np.int64).max
    attempts = 0
    max_attempts = 10 * i_rows
    while accepted < i_rows and state[0] > 0 and nfree > 0 and attempts < max_attempts:
        attempts += 1
        slot = rng.integers(0, nfree)
        r = free[slot]
        u = unc_list[rng.integers(0, state[0])]
        ci = combo_of(u, combo_off)
        new_row[:] = rows[r]
        decode_into(u, ci, new_row, space)
        ncols = 0
        for j in range(t):
            p = combo_par[ci, j]
            if new_row[p] != rows[r, p]:
                cols[ncols] = p
                mark[p] = True
                ncols += 1
        bad = False
        for a in range(ncols):
            if pair_violates(new_row, cols[a], bft):
                bad = True
                break
        if not bad:
            d = change_delta(rows[r], ridx[r], new_row, cols, ncols, mark, space, cov)
            if state[0] + d <= local_best:
                apply_change(rows[r], ridx[r], new_row, cols, ncols, mark, space, cov)
                local_best = state[0]
                accepted += 1
            visited[n - nfree] = r
            free[slot] = free[nfree - 1]
            nfree -= 1
        for a in range(ncols):
            mark[cols[a]] = False
    return accepted, n - nfree


@njit(cache=True)
def tabu_steps(rows, ridx, n, n_steps, p_n1, i_rows, stagnation_limit, progress, rng, space, cov, bft):
    """Run up to ``n_steps`` neighborhood calls.

    ``progress`` is ``[best_fitness, stagnation, n1_calls, n2_calls]`` and is
    updated in place.  Stops early on full coverage or when stagnation hits
    the limit.  Returns the number of calls made.
    """
    state = cov[4]
    visited = np.empty(n, dtype=np.int64)
    done = 0
    for _ in range(n_steps):
        if rng.random() < p_n1:
            neighborhood_n1(rows, ridx, n, i_rows, rng, space, cov, bft)
            progress[2] += 1
        else:
            neighborhood_n2(rows, ridx, n, i_rows, rng, space, cov, bft, visited)
            progress[3] += 1
        done += 1
        f = state[0]
        if f < progress[0]:
            progress[0] = f
            progress[1] = 0
        else:
            progress[1] += 1
        if f == 0 or progress[1] >= stagnation_limit:
            break
    return done
