"""Hot kernels shared by every module.

Everything in here is written in a numba-compatible subset of Python over
numpy arrays; ``ballvault._jit.jit`` either compiles a function or leaves
it interpreted (see ``BALLVAULT_BACKEND``).  Conventions:

* storage cells live in ``uint64`` arrays; a cell holds ``w`` meaningful
  low bits (``w_log`` is 5 or 6, i.e. 32- or 64-bit cells),
* indices, addresses and counts are int64,
* uint64 values are masked down to <= 48 bits before ``int()`` conversion,
* probe traces are int64 arrays of cell addresses filled left to right.

Layout facts baked into the tree kernels (see balltree.py for the builder):
direction bits are stored level-major / ball-minor, one payload word per
``w`` balls, with a packed rank directory (two half-cell node-relative
counts per cell) only on levels whose node lists are longer than one word.
Node lists of at most ``w`` balls sit inside a single word, so one probe
serves both the direction bit and the within-node rank.
"""

import numpy as np

from ._jit import jit

ONE = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)

# MASKS[k] has the k low bits set; avoids shift-by-64 edge cases.
MASKS = np.zeros(65, dtype=np.uint64)
for _k in range(64):
    MASKS[_k] = np.uint64((1 << _k) - 1)
MASKS[64] = np.uint64(0xFFFFFFFFFFFFFFFF)
MASKS.setflags(write=False)

STRAT_EAGER = 0
STRAT_BITWALK = 1
STRAT_MARKED = 2
STRAT_CHUNKED = 3


@jit
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    x = x + (x >> np.uint64(8))
    x = x + (x >> np.uint64(16))
    x = x + (x >> np.uint64(32))
    return int(x & np.uint64(0x7F))


@jit
def _popcnt_range(word, lo, length):
    """Number of set bits among word bits [lo, lo+length)."""
    if length <= 0:
        return 0
    return _popcount64((word >> np.uint64(lo)) & MASKS[length])


@jit
def _field_read(mem, base_cell, w_log, bitpos, width):
    """Read a width-bit little-endian field (width <= 32) from packed cells."""
    wm = (1 << w_log) - 1
    c = base_cell + (bitpos >> w_log)
    sh = bitpos & wm
    avail = (wm + 1) - sh
    if width <= avail:
        return int((mem[c] >> np.uint64(sh)) & MASKS[width])
    lo = int((mem[c] >> np.uint64(sh)) & MASKS[avail])
    hi = int(mem[c + 1] & MASKS[width - avail])
    return lo | (hi << avail)


@jit
def _half_count(mem, cell, which, w_log):
    """One packed rank-directory count: cells hold two w/2-bit counts."""
    half = (1 << w_log) >> 1
    if which:
        return int((mem[cell] >> np.uint64(half)) & MASKS[half])
    return int(mem[cell] & MASKS[half])


# ---------------------------------------------------------------------------
# stand-alone bit vector (payload cells, then packed directory cells)
# ---------------------------------------------------------------------------


@jit
def _bv_rank1(cells, dir_off, w_log, i):
    """Set bits in positions [0, i).  Two probes: one directory, one payload."""
    if i <= 0:
        return 0
    wm = (1 << w_log) - 1
    p = i - 1
    wd = p >> w_log
    base = _half_count(cells, dir_off + (wd >> 1), wd & 1, w_log)
    return base + _popcnt_range(cells[wd], 0, (p & wm) + 1)


@jit
def _bv_access(cells, w_log, i):
    wm = (1 << w_log) - 1
    return int((cells[i >> w_log] >> np.uint64(i & wm)) & ONE)


# ---------------------------------------------------------------------------
# ball tree: direction bits and strategy queries
# ---------------------------------------------------------------------------


@jit
def _dir_step(mem, pay_d, dir_d, w_log, m, o, i):
    """Direction bit and within-child rank for ball i of a node at offset o.

    Returns (bit, child_rank, payload_cell, directory_cell); the directory
    cell is -1 on levels where a node fits inside one word.
    """
    W = 1 << w_log
    wm = W - 1
    p = o * m + i
    wd = p >> w_log
    word = mem[pay_d + wd]
    bp = p & wm
    bit = int((word >> np.uint64(bp)) & ONE)
    if m > W:
        e = dir_d + (wd >> 1)
        ones_incl = _half_count(mem, e, wd & 1, w_log) + _popcnt_range(word, 0, bp + 1)
        dcell = e
    else:
        ones_incl = _popcnt_range(word, (o * m) & wm, i + 1)
        dcell = -1
    if bit == 1:
        j = ones_incl - 1
    else:
        j = i - ones_incl
    return bit, j, pay_d + wd, dcell


@jit
def _node_rank1(mem, pay_d, dir_d, w_log, m, o, j):
    """Set direction bits among the first j balls of the node (0 <= j <= m)."""
    if j <= 0:
        return 0
    W = 1 << w_log
    wm = W - 1
    p = o * m + j - 1
    wd = p >> w_log
    word = mem[pay_d + wd]
    if m > W:
        base = _half_count(mem, dir_d + (wd >> 1), wd & 1, w_log)
        return base + _popcnt_range(word, 0, (p & wm) + 1)
    return _popcnt_range(word, (o * m) & wm, j)


@jit
def _ball_query(mem, n, L, w_log, strat, p1, p2, pay, dr, ans, sym, cdr, hb,
                d, o, i, trace, record):
    """Leaf reached by ball i of node (d, o), plus the probe count.

    Cell addresses are appended to ``trace`` when ``record`` is set; the
    probe count is returned either way.
    """
    tc = 0
    while d < L:
        m = n >> d
        if ans[d] >= 0 and (strat == STRAT_EAGER or strat == STRAT_MARKED):
            c = ans[d] + o * m + i
            if record:
                trace[tc] = c
            tc += 1
            return int(mem[c]), tc
        if strat == STRAT_CHUNKED and sym[d] >= 0:
            h = hb[d]
            blk = p2
            base_cell = sym[d]
            s = o * m
            t0 = (i // blk) * blk
            bit_lo = (s + t0) * h
            bit_hi = (s + i + 1) * h
            c0 = bit_lo >> w_log
            c1 = (bit_hi - 1) >> w_log
            if record:
                for c in range(c0, c1 + 1):
                    trace[tc + (c - c0)] = base_cell + c
            tc += c1 - c0 + 1
            sigma = _field_read(mem, base_cell, w_log, (s + i) * h, h)
            cnt = 0
            for t in range(t0, i):
                if _field_read(mem, base_cell, w_log, (s + t) * h, h) == sigma:
                    cnt += 1
            nblocks = (m + blk - 1) // blk
            entry = (o * nblocks + i // blk) * (1 << h) + sigma
            e = cdr[d] + (entry >> 1)
            if record:
                trace[tc] = e
            tc += 1
            i = _half_count(mem, e, entry & 1, w_log) + cnt
            o = (o << h) | sigma
            d += h
            continue
        bit, j, ca, cb = _dir_step(mem, pay[d], dr[d], w_log, m, o, i)
        if record:
            trace[tc] = ca
            if cb >= 0:
                trace[tc + 1] = cb
        tc += 1
        if cb >= 0:
            tc += 1
        o = (o << 1) | bit
        i = j
        d += 1
    return o, tc


@jit
def _query_all(mem, n, L, w_log, strat, p1, p2, pay, dr, ans, sym, cdr, hb, out):
    """Answers for every query (level-major, ball-minor query ids)."""
    trace = np.empty(1, np.int64)
    for d in range(L):
        m = n >> d
        for pos in range(n):
            o = pos // m
            leaf, _ = _ball_query(mem, n, L, w_log, strat, p1, p2, pay, dr,
                                  ans, sym, cdr, hb, d, o, pos - o * m, trace, False)
            out[d * n + pos] = leaf


@jit
def _contains_sorted(arr, v):
    lo = 0
    hi = arr.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < arr.shape[0] and arr[lo] == v


@jit
def _trace_all(mem, n, L, w_log, strat, p1, p2, pay, dr, ans, sym, cdr, hb,
               published, first_probe, probe_count, trace):
    """First effective probe and effective probe count for every query.

    Probes hitting a published cell are free and are skipped; a query whose
    whole trace is published ends up with first_probe -1 and count 0.
    """
    for d in range(L):
        m = n >> d
        for pos in range(n):
            o = pos // m
            leaf, tc = _ball_query(mem, n, L, w_log, strat, p1, p2, pay, dr,
                                   ans, sym, cdr, hb, d, o, pos - o * m, trace, True)
            fp = -1
            ne = 0
            for t in range(tc):
                a = trace[t]
                if published.shape[0] > 0 and _contains_sorted(published, a):
                    continue
                if ne == 0:
                    fp = a
                ne += 1
            first_probe[d * n + pos] = fp
            probe_count[d * n + pos] = ne


@jit
def _pack_fields(vals, width, w_log, out):
    """Pack vals[t] (each < 2**width, width <= 32) at bit offsets t*width."""
    W = 1 << w_log
    wm = W - 1
    for t in range(vals.shape[0]):
        v = vals[t]
        bit = t * width
        c = bit >> w_log
        sh = bit & wm
        avail = W - sh
        if width <= avail:
            out[c] = out[c] | (np.uint64(v) << np.uint64(sh))
        else:
            out[c] = out[c] | ((np.uint64(v) & MASKS[avail]) << np.uint64(sh))
            out[c + 1] = out[c + 1] | np.uint64(v >> avail)


# ---------------------------------------------------------------------------
# range-extremum index over Cartesian-tree parentheses (64-bit words always)
# ---------------------------------------------------------------------------


@jit
def _rmq_fill_level(vals, vbase, n, m, want_max, u, ubit_level):
    """Write the parentheses bits for every length-m node of one level.

    Scanning a node's values with a monotone stack emits, per element, one
    closing bit (0) per popped stale entry and then an opening bit (1);
    trailing closers stay zero-initialised.  The opening bits appear in
    element order, which is what the query side relies on.
    """
    stack = np.empty(m + 1, np.int64)
    for o in range(n // m):
        nb = vbase + o * m
        ub = ubit_level + o * 2 * m
        sp = 0
        pos = 0
        for t in range(m):
            v = vals[nb + t]
            if want_max:
                while sp > 0 and stack[sp - 1] < v:
                    sp -= 1
                    pos += 1
            else:
                while sp > 0 and stack[sp - 1] > v:
                    sp -= 1
                    pos += 1
            bi = ub + pos
            u[bi >> 6] = u[bi >> 6] | (ONE << np.uint64(bi & 63))
            pos += 1
            stack[sp] = v
            sp += 1


@jit
def _rmq_fill_udir(u, udir, ubit_level, n, m):
    """Node-relative cumulative opener counts at word starts (m >= 32 only)."""
    if m < 32:
        return
    wpn = (2 * m) >> 6
    base_w = ubit_level >> 6
    for o in range(n // m):
        w0 = base_w + o * wpn
        cum = 0
        for t in range(wpn):
            udir[w0 + t] = cum
            cum += _popcount64(u[w0 + t])


@jit
def _rmq_fill_wsum(u, wtot, wmin, nwords):
    """Per-word total excess and minimum prefix excess (relative values)."""
    for w in range(nwords):
        word = u[w]
        exc = 0
        mn = 127
        for b in range(64):
            if int((word >> np.uint64(b)) & ONE) == 1:
                exc += 1
            else:
                exc -= 1
            if exc < mn:
                mn = exc
        wtot[w] = exc
        wmin[w] = mn


@jit
def _u_rank1(u, udir, ub, m, q):
    """Openers among the first q parentheses of the node starting at bit ub."""
    if q <= 0:
        return 0
    p = ub + q - 1
    wd = p >> 6
    word = u[wd]
    if m >= 32:
        return int(udir[wd]) + _popcnt_range(word, 0, (p & 63) + 1)
    return _popcnt_range(word, ub & 63, q)


@jit
def _u_select1(u, udir, ub, m, t):
    """Position (0-based, node-relative) of the t-th opener, t in [1, m]."""
    lo = 1
    hi = 2 * m
    while lo < hi:
        mid = (lo + hi) >> 1
        if _u_rank1(u, udir, ub, m, mid) >= t:
            hi = mid
        else:
            lo = mid + 1
    return lo - 1


@jit
def _u_bit(u, ub, j):
    p = ub + j
    return int((u[p >> 6] >> np.uint64(p & 63)) & ONE)


@jit
def _rmq_argext(u, udir, wtot, wmin, ub, m, l, r):
    """Leftmost extremum position in [l, r) for the node starting at bit ub.

    The extremum of the underlying values is the shallowest Cartesian-tree
    node of the span, i.e. the leftmost minimum of the parentheses excess
    between the openers of elements l and r-1.
    """
    if r - l <= 1:
        return l
    x = _u_select1(u, udir, ub, m, l + 1)
    y = _u_select1(u, udir, ub, m, r)
    cur = 2 * _u_rank1(u, udir, ub, m, x) - x  # excess just before position x
    best = 1 << 60
    bestpos = -1
    bestword = -1
    bestwcur = 0
    wx = (ub + x) >> 6
    wy = (ub + y) >> 6
    if wx == wy:
        for j in range(x, y + 1):
            cur += 2 * _u_bit(u, ub, j) - 1
            if cur < best:
                best = cur
                bestpos = j
    else:
        headend = ((wx + 1) << 6) - 1 - ub
        for j in range(x, headend + 1):
            cur += 2 * _u_bit(u, ub, j) - 1
            if cur < best:
                best = cur
                bestpos = j
        for w in range(wx + 1, wy):
            cand = cur + int(wmin[w])
            if cand < best:
                best = cand
                bestpos = -1
                bestword = w
                bestwcur = cur
            cur += int(wtot[w])
        tailstart = (wy << 6) - ub
        for j in range(tailstart, y + 1):
            cur += 2 * _u_bit(u, ub, j) - 1
            if cur < best:
                best = cur
                bestpos = j
        if bestpos == -1:
            cur = bestwcur
            wstart = (bestword << 6) - ub
            for j in range(wstart, wstart + 64):
                cur += 2 * _u_bit(u, ub, j) - 1
                if cur == best:
                    bestpos = j
                    break
    if _u_bit(u, ub, bestpos) == 1:
        return _u_rank1(u, udir, ub, m, bestpos + 1) - 1
    return _u_rank1(u, udir, ub, m, bestpos + 1)


@jit
def _debug_argext(vals, base, l, r, want_max):
    """Leftmost argmax/argmin by linear scan over stored values."""
    best = vals[base + l]
    bp = l
    for j in range(l + 1, r):
        v = vals[base + j]
        if want_max:
            if v > best:
                best = v
                bp = j
        else:
            if v < best:
                best = v
                bp = j
    return bp


# ---------------------------------------------------------------------------
# 3-sided reporting and full rectangle queries
# ---------------------------------------------------------------------------


@jit
def _three_sided(mem, n, L, w_log, strat, p1, p2, pay, dr, ans, sym, cdr, hb,
                 rmq_mode, u, udir, wtot, wmin, vals,
                 d, o, left_open, bound, ylo, yhi, outj, outleaf, stk, scratch):
    """Report balls of node (d, o) in [ylo, yhi] whose leaf passes the bound.

    left_open compares leaf >= bound (use the max index), otherwise
    leaf <= bound (use the min index).  Every extremum candidate costs one
    extremum lookup plus one ball-inheritance query; a failing candidate
    kills its whole subrange.  Returns (reported, extremum_calls).
    """
    if ylo > yhi:
        return 0, 0
    m = n >> d
    ub = d * (2 * n) + o * 2 * m
    vbase = d * n + o * m
    k = 0
    calls = 0
    stk[0] = ylo
    stk[1] = yhi
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stk[2 * sp]
        hi = stk[2 * sp + 1]
        calls += 1
        if rmq_mode == 0:
            j = _debug_argext(vals, vbase, lo, hi + 1, left_open)
        else:
            j = _rmq_argext(u, udir, wtot, wmin, ub, m, lo, hi + 1)
        leaf, _ = _ball_query(mem, n, L, w_log, strat, p1, p2, pay, dr, ans,
                              sym, cdr, hb, d, o, j, scratch, False)
        if (left_open and leaf >= bound) or ((not left_open) and leaf <= bound):
            outj[k] = j
            outleaf[k] = leaf
            k += 1
            if j + 1 <= hi:
                stk[2 * sp] = j + 1
                stk[2 * sp + 1] = hi
                sp += 1
            if lo <= j - 1:
                stk[2 * sp] = lo
                stk[2 * sp + 1] = j - 1
                sp += 1
    return k, calls


@jit
def _bs_left(a, v):
    lo = 0
    hi = a.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@jit
def _bs_right(a, v):
    lo = 0
    hi = a.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@jit
def _report_rect(mem, n, L, w_log, strat, p1, p2, pay, dr, ans, sym, cdr, hb,
                 rmq_mode,
                 umax, umaxdir, umaxtot, umaxmin,
                 umin, umindir, umintot, uminmin, vals,
                 xs, ys, ybx,
                 qx0, qx1, qy0, qy1,
                 outx, outy, stats, stk, outj, outleaf, scratch):
    """Report points inside [qx0,qx1] x [qy0,qy1]; coordinates into outx/outy.

    stats: [max-side extremum calls, max-side reported, min-side calls,
    min-side reported, single-leaf flag].
    """
    for t in range(5):
        stats[t] = 0
    rx0 = _bs_left(xs, qx0)
    rx1 = _bs_right(xs, qx1) - 1
    ry0 = _bs_left(ys, qy0)
    ry1 = _bs_right(ys, qy1) - 1
    if rx0 > rx1 or ry0 > ry1:
        return 0
    if rx0 == rx1:
        # one candidate leaf: test the stored point against the rectangle
        stats[4] = 1
        px = xs[rx0]
        py = ybx[rx0]
        if qx0 <= px and px <= qx1 and qy0 <= py and py <= qy1:
            outx[0] = px
            outy[0] = py
            return 1
        return 0
    xr = rx0 ^ rx1
    h = 0
    while (xr >> h) != 0:
        h += 1
    wd = L - h
    wo = rx0 >> h
    lo = ry0
    hi = ry1
    for dd in range(wd):
        oo = rx0 >> (L - dd)
        mm = n >> dd
        r1lo = _node_rank1(mem, pay[dd], dr[dd], w_log, mm, oo, lo)
        r1hi = _node_rank1(mem, pay[dd], dr[dd], w_log, mm, oo, hi + 1)
        if (rx0 >> (L - 1 - dd)) & 1:
            lo = r1lo
            hi = r1hi - 1
        else:
            lo = lo - r1lo
            hi = (hi + 1 - r1hi) - 1
        if lo > hi:
            return 0
    mw = n >> wd
    r1lo = _node_rank1(mem, pay[wd], dr[wd], w_log, mw, wo, lo)
    r1hi = _node_rank1(mem, pay[wd], dr[wd], w_log, mw, wo, hi + 1)
    llo = lo - r1lo
    lhi = (hi + 1 - r1hi) - 1
    rlo = r1lo
    rhi = r1hi - 1
    k = 0
    if llo <= lhi:
        kk, calls = _three_sided(mem, n, L, w_log, strat, p1, p2, pay, dr, ans,
                                 sym, cdr, hb, rmq_mode,
                                 umax, umaxdir, umaxtot, umaxmin, vals,
                                 wd + 1, 2 * wo, True, rx0, llo, lhi,
                                 outj, outleaf, stk, scratch)
        stats[0] = calls
        stats[1] = kk
        for t in range(kk):
            leaf = outleaf[t]
            outx[k] = xs[leaf]
            outy[k] = ybx[leaf]
            k += 1
    if rlo <= rhi:
        kk, calls = _three_sided(mem, n, L, w_log, strat, p1, p2, pay, dr, ans,
                                 sym, cdr, hb, rmq_mode,
                                 umin, umindir, umintot, uminmin, vals,
                                 wd + 1, 2 * wo + 1, False, rx1, rlo, rhi,
                                 outj, outleaf, stk, scratch)
        stats[2] = calls
        stats[3] = kk
        for t in range(kk):
            leaf = outleaf[t]
            outx[k] = xs[leaf]
            outy[k] = ybx[leaf]
            k += 1
    return k
