"""Compiled decoder cores.

The list decoder runs a precomputed op plan over a copy-on-write buffer
pool, so cloning a path costs index bookkeeping instead of copying the
whole tree state.  All LLRs are fixed-point int64 (scaled by 2**20 and
clamped), which keeps every f/g/metric operation exact: path-metric ties
are true integer ties and the documented tie-break (lower metric, then
continue before fork, then lower parent rank) is reproducible bit for bit
across the generic and the fast plans.

Plan opcodes:
  F / G        recompute a child node's LLRs from its parent
  COMBINE      fold a finished pair of children into the parent's slot
  LEAF_*       width-1 decisions (frozen value or a two-way fork)
  RATE0        all-frozen subtree, collapsed to one metric update
  REP          frozen run ending in one information bit, one fork

RATE0 and REP are the only collapsed subtrees because they are the only
ones whose collapsed update is provably identical to the bit-by-bit
schedule for every input, metric ties included: the penalty identity
relu(-f(a,b)) + relu(-(a+b)) = relu(-a) + relu(-b) holds exactly over
integers and neither node type prunes mid-subtree.  All-information and
single-parity subtrees fork at every leaf with path-dependent penalties
whose tie outcomes depend on the leaf order, so they run bit by bit.

The path metric adds |llr| whenever a decision disagrees with the sign of
its LLR; zero LLR counts as agreeing with bit 0.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OP_F = 0
OP_G = 1
OP_COMBINE = 2
OP_LEAF_FROZEN = 3
OP_LEAF_INFO = 4
OP_RATE0 = 5
OP_REP = 6

LLR_SCALE_BITS = 20
METRIC_CAP = np.int64(1) << 50
_RANK_BITS = 11  # list sizes up to 2048
_FORK_BIT = np.int64(1) << _RANK_BITS


@njit(cache=True, nogil=True, inline="always")
def _hard(x: np.int64) -> np.int64:
    return np.int64(1) if x < 0 else np.int64(0)


@njit(cache=True, nogil=True, inline="always")
def _sat_add(m: np.int64, pen: np.int64) -> np.int64:
    s = m + pen
    return s if s < METRIC_CAP else METRIC_CAP


@njit(cache=True, nogil=True)
def _fresh_llr(d, p, width, p2b_llr, ref_llr, free_llr, free_sp_llr):
    """Writable LLR buffer id for (depth, path); content is overwritten."""
    b = p2b_llr[d, p]
    if ref_llr[d, b] > 1:
        ref_llr[d, b] -= 1
        sp = free_sp_llr[d] - 1
        nb = free_llr[d, sp]
        free_sp_llr[d] = sp
        p2b_llr[d, p] = nb
        ref_llr[d, nb] = 1
        return nb
    return b


@njit(cache=True, nogil=True)
def _cow_bits(d, p, width2, bits_pool, bits_off, p2b_bits, ref_bits, free_bits, free_sp_bits):
    """Writable bits buffer id for (depth, path); content is preserved."""
    b = p2b_bits[d, p]
    if ref_bits[d, b] > 1:
        ref_bits[d, b] -= 1
        sp = free_sp_bits[d] - 1
        nb = free_bits[d, sp]
        free_sp_bits[d] = sp
        src = bits_off[d] + b * width2
        dst = bits_off[d] + nb * width2
        for i in range(width2):
            bits_pool[dst + i] = bits_pool[src + i]
        p2b_bits[d, p] = nb
        ref_bits[d, nb] = 1
        return nb
    return b


@njit(cache=True, nogil=True)
def _select(
    n_active,
    list_size,
    m_stages,
    cont_metric,
    fork_metric,
    cand_key,
    metrics,
    p2b_llr,
    ref_llr,
    free_llr,
    free_sp_llr,
    p2b_bits,
    ref_bits,
    free_bits,
    free_sp_bits,
    new_p2b_llr,
    new_p2b_bits,
    sel_parent,
    sel_fork,
):
    """Keep the best list_size of the 2*n_active fork candidates.

    Candidate key packs (metric, fork flag, parent rank) into one int64 so
    a single ascending sort realizes the documented tie-break.  Returns the
    new path count; survivors are re-ranked in key order.
    """
    total = 2 * n_active
    for p in range(n_active):
        cand_key[p] = (cont_metric[p] << _RANK_BITS + 1) | np.int64(p)
        cand_key[n_active + p] = (fork_metric[p] << _RANK_BITS + 1) | _FORK_BIT | np.int64(p)
    order = np.argsort(cand_key[:total])
    new_p = total if total < list_size else list_size
    for r in range(new_p):
        idx = order[r]
        if idx >= n_active:
            parent = idx - n_active
            sel_fork[r] = 1
        else:
            parent = idx
            sel_fork[r] = 0
        sel_parent[r] = parent
        for d in range(1, m_stages + 1):
            bl = p2b_llr[d, parent]
            new_p2b_llr[d, r] = bl
            ref_llr[d, bl] += 1
            bb = p2b_bits[d, parent]
            new_p2b_bits[d, r] = bb
            ref_bits[d, bb] += 1
    for p in range(n_active):
        for d in range(1, m_stages + 1):
            bl = p2b_llr[d, p]
            ref_llr[d, bl] -= 1
            if ref_llr[d, bl] == 0:
                free_llr[d, free_sp_llr[d]] = bl
                free_sp_llr[d] += 1
            bb = p2b_bits[d, p]
            ref_bits[d, bb] -= 1
            if ref_bits[d, bb] == 0:
                free_bits[d, free_sp_bits[d]] = bb
                free_sp_bits[d] += 1
    for r in range(new_p):
        idx = order[r]
        key = cand_key[idx]
        metrics[r] = key >> (_RANK_BITS + 1)
        for d in range(1, m_stages + 1):
            p2b_llr[d, r] = new_p2b_llr[d, r]
            p2b_bits[d, r] = new_p2b_bits[d, r]
    return new_p


@njit(cache=True, nogil=True)
def run_plan(
    op_code,
    op_depth,
    op_node,
    op_aux,
    llr_root,
    frozen_vals,
    list_size,
    m_stages,
    block_len,
    llr_pool,
    llr_off,
    bits_pool,
    bits_off,
    p2b_llr,
    ref_llr,
    free_llr,
    free_sp_llr,
    p2b_bits,
    ref_bits,
    free_bits,
    free_sp_bits,
    metrics,
    cont_metric,
    fork_metric,
    cand_key,
    sel_parent,
    sel_fork,
    new_p2b_llr,
    new_p2b_bits,
    out_cw,
    out_metrics,
):
    n = block_len
    m = m_stages
    # Reset pools: path 0 owns buffer 0 at every depth.
    for d in range(1, m + 1):
        for b in range(list_size):
            ref_llr[d, b] = 0
            ref_bits[d, b] = 0
        p2b_llr[d, 0] = 0
        ref_llr[d, 0] = 1
        p2b_bits[d, 0] = 0
        ref_bits[d, 0] = 1
        sp = 0
        for b in range(list_size - 1, 0, -1):
            free_llr[d, sp] = b
            free_bits[d, sp] = b
            sp += 1
        free_sp_llr[d] = sp
        free_sp_bits[d] = sp
    metrics[0] = 0
    n_active = 1

    for t in range(op_code.shape[0]):
        code = op_code[t]
        d = op_depth[t]
        node = op_node[t]
        width = n >> d

        if code == OP_F:
            pw = width * 2
            for p in range(n_active):
                if d == 1:
                    pbase = np.int64(0)
                    parent_is_root = True
                else:
                    pbase = llr_off[d - 1] + np.int64(p2b_llr[d - 1, p]) * pw
                    parent_is_root = False
                nb = _fresh_llr(d, p, width, p2b_llr, ref_llr, free_llr, free_sp_llr)
                dbase = llr_off[d] + np.int64(nb) * width
                for i in range(width):
                    if parent_is_root:
                        a = llr_root[i]
                        b = llr_root[i + width]
                    else:
                        a = llr_pool[pbase + i]
                        b = llr_pool[pbase + i + width]
                    aa = a if a >= 0 else -a
                    ab = b if b >= 0 else -b
                    mag = aa if aa <= ab else ab
                    if (a < 0) != (b < 0):
                        llr_pool[dbase + i] = -mag
                    else:
                        llr_pool[dbase + i] = mag

        elif code == OP_G:
            pw = width * 2
            for p in range(n_active):
                if d == 1:
                    pbase = np.int64(0)
                    parent_is_root = True
                else:
                    pbase = llr_off[d - 1] + np.int64(p2b_llr[d - 1, p]) * pw
                    parent_is_root = False
                lbase = bits_off[d] + np.int64(p2b_bits[d, p]) * (2 * width)  # slot 0
                nb = _fresh_llr(d, p, width, p2b_llr, ref_llr, free_llr, free_sp_llr)
                dbase = llr_off[d] + np.int64(nb) * width
                for i in range(width):
                    if parent_is_root:
                        a = llr_root[i]
                        b = llr_root[i + width]
                    else:
                        a = llr_pool[pbase + i]
                        b = llr_pool[pbase + i + width]
                    if bits_pool[lbase + i]:
                        llr_pool[dbase + i] = b - a
                    else:
                        llr_pool[dbase + i] = b + a

        elif code == OP_COMBINE:
            # Children of node (node>>1) at depth d-1 are complete.
            parent = node >> 1
            slot = parent & 1
            pwidth = width * 2
            for p in range(n_active):
                cbase = bits_off[d] + np.int64(p2b_bits[d, p]) * (2 * width)
                nb = _cow_bits(
                    d - 1, p, 2 * pwidth, bits_pool, bits_off,
                    p2b_bits, ref_bits, free_bits, free_sp_bits,
                )
                dbase = bits_off[d - 1] + np.int64(nb) * (2 * pwidth) + slot * pwidth
                for i in range(width):
                    r = bits_pool[cbase + width + i]
                    bits_pool[dbase + i] = bits_pool[cbase + i] ^ r
                    bits_pool[dbase + width + i] = r

        elif code == OP_LEAF_FROZEN:
            slot = node & 1
            v = frozen_vals[op_aux[t]]
            for p in range(n_active):
                lb = llr_off[m] + np.int64(p2b_llr[m, p])
                llr = llr_pool[lb]
                if v == 0:
                    pen = -llr if llr < 0 else np.int64(0)
                else:
                    pen = llr if llr > 0 else np.int64(0)
                metrics[p] = _sat_add(metrics[p], pen)
                nb = _cow_bits(m, p, 2, bits_pool, bits_off, p2b_bits, ref_bits, free_bits, free_sp_bits)
                bits_pool[bits_off[m] + np.int64(nb) * 2 + slot] = v

        elif code == OP_LEAF_INFO:
            slot = node & 1
            for p in range(n_active):
                lb = llr_off[m] + np.int64(p2b_llr[m, p])
                llr = llr_pool[lb]
                pen = llr if llr >= 0 else -llr
                cont_metric[p] = metrics[p]
                fork_metric[p] = _sat_add(metrics[p], pen)
            n_active = _select(
                n_active, list_size, m, cont_metric, fork_metric, cand_key, metrics,
                p2b_llr, ref_llr, free_llr, free_sp_llr,
                p2b_bits, ref_bits, free_bits, free_sp_bits,
                new_p2b_llr, new_p2b_bits, sel_parent, sel_fork,
            )
            for r in range(n_active):
                lb = llr_off[m] + np.int64(p2b_llr[m, r])
                bit = _hard(llr_pool[lb]) ^ np.int64(sel_fork[r])
                nb = _cow_bits(m, r, 2, bits_pool, bits_off, p2b_bits, ref_bits, free_bits, free_sp_bits)
                bits_pool[bits_off[m] + np.int64(nb) * 2 + slot] = np.int8(bit)

        elif code == OP_RATE0:
            slot = node & 1
            for p in range(n_active):
                base = llr_off[d] + np.int64(p2b_llr[d, p]) * width
                pen = np.int64(0)
                for i in range(width):
                    v = llr_pool[base + i]
                    if v < 0:
                        pen -= v
                metrics[p] = _sat_add(metrics[p], pen)
                nb = _cow_bits(d, p, 2 * width, bits_pool, bits_off, p2b_bits, ref_bits, free_bits, free_sp_bits)
                dbase = bits_off[d] + np.int64(nb) * (2 * width) + slot * width
                for i in range(width):
                    bits_pool[dbase + i] = 0

        elif code == OP_REP:
            slot = node & 1
            for p in range(n_active):
                base = llr_off[d] + np.int64(p2b_llr[d, p]) * width
                pen_zero = np.int64(0)
                total = np.int64(0)
                for i in range(width):
                    v = llr_pool[base + i]
                    total += v
                    if v < 0:
                        pen_zero -= v
                pen_one = pen_zero + total
                if total < 0:
                    cont_metric[p] = _sat_add(metrics[p], pen_one)
                    fork_metric[p] = _sat_add(metrics[p], pen_zero)
                else:
                    cont_metric[p] = _sat_add(metrics[p], pen_zero)
                    fork_metric[p] = _sat_add(metrics[p], pen_one)
            n_active = _select(
                n_active, list_size, m, cont_metric, fork_metric, cand_key, metrics,
                p2b_llr, ref_llr, free_llr, free_sp_llr,
                p2b_bits, ref_bits, free_bits, free_sp_bits,
                new_p2b_llr, new_p2b_bits, sel_parent, sel_fork,
            )
            for r in range(n_active):
                base = llr_off[d] + np.int64(p2b_llr[d, r]) * width
                total = np.int64(0)
                for i in range(width):
                    total += llr_pool[base + i]
                bit = _hard(total) ^ np.int64(sel_fork[r])
                nb = _cow_bits(d, r, 2 * width, bits_pool, bits_off, p2b_bits, ref_bits, free_bits, free_sp_bits)
                dbase = bits_off[d] + np.int64(nb) * (2 * width) + slot * width
                for i in range(width):
                    bits_pool[dbase + i] = np.int8(bit)

    # Final ranking: stable sort by metric so earlier rank wins ties.
    for r in range(n_active):
        sel_parent[r] = r
    for r in range(1, n_active):
        key = metrics[r]
        idx = sel_parent[r]
        j = r - 1
        while j >= 0 and metrics[sel_parent[j]] > key:
            sel_parent[j + 1] = sel_parent[j]
            j -= 1
        sel_parent[j + 1] = idx
    half = n >> 1
    for r in range(n_active):
        p = sel_parent[r]
        out_metrics[r] = metrics[p]
        bbase = bits_off[1] + np.int64(p2b_bits[1, p]) * n
        for i in range(half):
            rt = bits_pool[bbase + half + i]
            out_cw[r, i] = bits_pool[bbase + i] ^ rt
            out_cw[r, half + i] = rt
    return n_active


@njit(cache=True, nogil=True)
def sc_decode_core(llr_root, frozen_mask, frozen_vals, m_stages):
    """Plain successive cancellation over an (m+1, n) triangle.

    Independent of the list engine on purpose: the two are cross-checked
    in the tests.  Returns (decisions, metric).
    """
    m = m_stages
    n = llr_root.shape[0]
    llr = np.empty((m + 1, n), dtype=np.int64)
    bits = np.empty((m + 1, n), dtype=np.int8)
    for i in range(n):
        llr[0, i] = llr_root[i]
    metric = np.int64(0)
    for leaf in range(n):
        if leaf == 0:
            start = 1
        else:
            tz = 0
            x = leaf
            while x & 1 == 0:
                tz += 1
                x >>= 1
            start = m - tz
        for d in range(start, m + 1):
            width = n >> d
            node = leaf >> (m - d)
            base = node * width
            pbase = (node >> 1) * (width * 2)
            if node & 1 == 0:
                for i in range(width):
                    a = llr[d - 1, pbase + i]
                    b = llr[d - 1, pbase + width + i]
                    aa = a if a >= 0 else -a
                    ab = b if b >= 0 else -b
                    mag = aa if aa <= ab else ab
                    if (a < 0) != (b < 0):
                        llr[d, base + i] = -mag
                    else:
                        llr[d, base + i] = mag
            else:
                lbase = (node - 1) * width
                for i in range(width):
                    a = llr[d - 1, pbase + i]
                    b = llr[d - 1, pbase + width + i]
                    if bits[d, lbase + i]:
                        llr[d, base + i] = b - a
                    else:
                        llr[d, base + i] = b + a
        lv = llr[m, leaf]
        if frozen_mask[leaf]:
            u = frozen_vals[leaf]
            if u == 0:
                if lv < 0:
                    metric = _sat_add(metric, -lv)
            else:
                if lv > 0:
                    metric = _sat_add(metric, lv)
        else:
            u = np.int8(1) if lv < 0 else np.int8(0)
        bits[m, leaf] = u
        j = leaf
        d = m
        while (j & 1) == 1 and d > 1:
            width = n >> d
            parent = j >> 1
            pb = parent * (2 * width)
            lb = (j - 1) * width
            rb = j * width
            for i in range(width):
                rbit = bits[d, rb + i]
                bits[d - 1, pb + i] = bits[d, lb + i] ^ rbit
                bits[d - 1, pb + width + i] = rbit
            j = parent
            d -= 1
    u_hat = np.empty(n, dtype=np.int8)
    for i in range(n):
        u_hat[i] = bits[m, i]
    return u_hat, metric
