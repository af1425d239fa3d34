"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public functions here dispatch on :func:`spreadlab._accel.use_numba`.
Randomness is always drawn by the caller and passed in as arrays so the two
backends walk through identical random choices.
"""
from itertools import combinations, islice

import numpy as np

from ._accel import njit, use_numba

# ---------------------------------------------------------------------------
# double-edge swaps on a left-regular edge list
#
# Edge e belongs to left vertex e // t, so a swap only ever exchanges right
# endpoints and the left "slots" never move.
# ---------------------------------------------------------------------------


@njit
def _slot_has(right, t, u, r):
    for j in range(u * t, u * t + t):
        if right[j] == r:
            return True
    return False


@njit
def _mix_swaps_nb(right, t, pairs):
    accepted = 0
    for i in range(pairs.shape[0]):
        e1 = pairs[i, 0]
        e2 = pairs[i, 1]
        u1 = e1 // t
        u2 = e2 // t
        r1 = right[e1]
        r2 = right[e2]
        if u1 == u2 or r1 == r2:
            continue
        if _slot_has(right, t, u1, r2) or _slot_has(right, t, u2, r1):
            continue
        right[e1] = r2
        right[e2] = r1
        accepted += 1
    return accepted


def _mix_swaps_np(right, t, pairs):
    accepted = 0
    for e1, e2 in pairs.tolist():
        u1, u2 = e1 // t, e2 // t
        r1, r2 = right[e1], right[e2]
        if u1 == u2 or r1 == r2:
            continue
        if (right[u1 * t:u1 * t + t] == r2).any() or (right[u2 * t:u2 * t + t] == r1).any():
            continue
        right[e1] = r2
        right[e2] = r1
        accepted += 1
    return accepted


def mix_swaps(right, t, pairs):
    """Apply the proposed swaps in ``pairs`` (shape ``(k, 2)``) in place; return #accepted."""
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    if use_numba():
        return int(_mix_swaps_nb(right, t, pairs))
    return _mix_swaps_np(right, t, pairs)


@njit
def _next_duplicate_nb(right, t, start):
    E = right.shape[0]
    for e in range(start, E):
        u0 = (e // t) * t
        for j in range(u0, e):
            if right[j] == right[e]:
                return e
    return -1


@njit
def _repair_swaps_nb(right, t, partners, pos, failures, max_failures):
    # status: 0 simple, 1 out of random partners, 2 gave up
    i = 0
    e1 = _next_duplicate_nb(right, t, pos)
    while e1 >= 0:
        if i >= partners.shape[0]:
            return 1, e1, i, failures
        e2 = partners[i]
        i += 1
        u1 = e1 // t
        u2 = e2 // t
        r1 = right[e1]
        r2 = right[e2]
        if u1 == u2 or r1 == r2 or _slot_has(right, t, u1, r2) or _slot_has(right, t, u2, r1):
            failures += 1
            if failures >= max_failures:
                return 2, e1, i, failures
            continue
        right[e1] = r2
        right[e2] = r1
        e1 = _next_duplicate_nb(right, t, e1)
    return 0, -1, i, failures


def _next_duplicate_np(right, t, start):
    E = right.shape[0]
    for e in range(start, E):
        u0 = (e // t) * t
        if (right[u0:e] == right[e]).any():
            return e
    return -1


def _repair_swaps_np(right, t, partners, pos, failures, max_failures):
    i = 0
    e1 = _next_duplicate_np(right, t, pos)
    while e1 >= 0:
        if i >= partners.shape[0]:
            return 1, e1, i, failures
        e2 = int(partners[i])
        i += 1
        u1, u2 = e1 // t, e2 // t
        r1, r2 = right[e1], right[e2]
        if (u1 == u2 or r1 == r2 or (right[u1 * t:u1 * t + t] == r2).any()
                or (right[u2 * t:u2 * t + t] == r1).any()):
            failures += 1
            if failures >= max_failures:
                return 2, e1, i, failures
            continue
        right[e1] = r2
        right[e2] = r1
        e1 = _next_duplicate_np(right, t, e1)
    return 0, -1, i, failures


def repair_swaps(right, t, partners, pos, failures, max_failures):
    """Swap duplicated edges away using the random partner edges given.

    Returns ``(status, pos, consumed, failures)`` where status is 0 when the
    edge list is simple, 1 when ``partners`` ran out and 2 when
    ``max_failures`` rejected swaps have accumulated.
    """
    partners = np.ascontiguousarray(partners, dtype=np.int64)
    if use_numba():
        out = _repair_swaps_nb(right, t, partners, pos, failures, max_failures)
    else:
        out = _repair_swaps_np(right, t, partners, pos, failures, max_failures)
    return tuple(int(v) for v in out)


# ---------------------------------------------------------------------------
# largest radius around each left vertex whose ball is a full biregular tree
# ---------------------------------------------------------------------------


@njit
def _tree_depths_nb(lptr, lnb, rptr, rnb, t, s, max_depth):
    n = lptr.shape[0] - 1
    m = rptr.shape[0] - 1
    out = np.empty(n, np.int64)
    stamp_l = np.zeros(n, np.int64)
    stamp_r = np.zeros(m, np.int64)
    par_l = np.full(n, -1, np.int64)
    par_r = np.full(m, -1, np.int64)
    frontier = np.empty(n + m, np.int64)
    nxt = np.empty(n + m, np.int64)
    for v in range(n):
        stamp = v + 1
        stamp_l[v] = stamp
        par_l[v] = -1
        frontier[0] = v
        size = 1
        d = 0
        ok = True
        while d < max_depth and ok:
            cnt = 0
            for i in range(size):
                x = frontier[i]
                if d % 2 == 0:
                    if lptr[x + 1] - lptr[x] != t:
                        ok = False
                        break
                    for j in range(lptr[x], lptr[x + 1]):
                        w = lnb[j]
                        if w == par_l[x]:
                            continue
                        if stamp_r[w] == stamp:
                            ok = False
                            break
                        stamp_r[w] = stamp
                        par_r[w] = x
                        nxt[cnt] = w
                        cnt += 1
                else:
                    if rptr[x + 1] - rptr[x] != s:
                        ok = False
                        break
                    for j in range(rptr[x], rptr[x + 1]):
                        w = rnb[j]
                        if w == par_r[x]:
                            continue
                        if stamp_l[w] == stamp:
                            ok = False
                            break
                        stamp_l[w] = stamp
                        par_l[w] = x
                        nxt[cnt] = w
                        cnt += 1
                if not ok:
                    break
            if not ok:
                break
            for i in range(cnt):
                frontier[i] = nxt[i]
            size = cnt
            d += 1
        out[v] = d
    return out


def csr_gather(ptr, nbr, nodes):
    """Neighbors of ``nodes`` concatenated, with the position of the owner."""
    starts = ptr[nodes]
    counts = ptr[nodes + 1] - starts
    owner = np.repeat(np.arange(nodes.size), counts)
    offs = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    return nbr[starts[owner] + offs], owner


def _tree_depths_np(lptr, lnb, rptr, rnb, t, s, max_depth):
    n = lptr.size - 1
    m = rptr.size - 1
    ldeg = np.diff(lptr)
    rdeg = np.diff(rptr)
    out = np.empty(n, np.int64)
    seen_l = np.zeros(n, bool)
    seen_r = np.zeros(m, bool)
    for v in range(n):
        nodes = np.array([v])
        parents = np.array([-1])
        touched_l, touched_r = [nodes], []
        seen_l[v] = True
        d = 0
        while d < max_depth:
            left_side = d % 2 == 0
            deg, need = (ldeg, t) if left_side else (rdeg, s)
            if (deg[nodes] != need).any():
                break
            ptr, nbr = (lptr, lnb) if left_side else (rptr, rnb)
            kids, owner = csr_gather(ptr, nbr, nodes)
            keep = kids != parents[owner]
            kids, owner = kids[keep], owner[keep]
            seen = seen_r if left_side else seen_l
            if seen[kids].any() or np.unique(kids).size != kids.size:
                break
            seen[kids] = True
            (touched_r if left_side else touched_l).append(kids)
            parents = nodes[owner]
            nodes = kids
            d += 1
        out[v] = d
        for a in touched_l:
            seen_l[a] = False
        for a in touched_r:
            seen_r[a] = False
    return out


def tree_depths(lptr, lnb, rptr, rnb, t, s, max_depth):
    """For each left vertex, the largest radius ``R <= max_depth`` whose ball is a biregular tree.

    A ball of radius R qualifies when BFS can expand depths ``0..R-1`` without
    revisiting a vertex, with every expanded left vertex of degree ``t`` and
    every expanded right vertex of degree ``s``.
    """
    args = [np.ascontiguousarray(a, dtype=np.int64) for a in (lptr, lnb, rptr, rnb)]
    if use_numba():
        return _tree_depths_nb(*args, t, s, max_depth)
    return _tree_depths_np(*args, t, s, max_depth)


# ---------------------------------------------------------------------------
# exhaustive scan of |U(S)| and |N(S)| over all left sets of size <= kmax
# ---------------------------------------------------------------------------


@njit
def _subset_scan_nb(nbrs, n_right, kmax):
    n, t = nbrs.shape
    cnt = np.zeros(n_right, np.int64)
    min_u = np.full(kmax + 1, np.iinfo(np.int64).max, np.int64)
    min_n = np.full(kmax + 1, np.iinfo(np.int64).max, np.int64)
    arg_u = np.full((kmax + 1, kmax), -1, np.int64)
    arg_n = np.full((kmax + 1, kmax), -1, np.int64)
    cur = np.zeros(kmax, np.int64)
    uniq = 0
    nb = 0
    level = 0
    cur[0] = 0
    while level >= 0:
        if cur[level] < n:
            v = cur[level]
            for j in range(t):
                r = nbrs[v, j]
                c = cnt[r]
                if c == 0:
                    uniq += 1
                    nb += 1
                elif c == 1:
                    uniq -= 1
                cnt[r] = c + 1
            size = level + 1
            if uniq < min_u[size]:
                min_u[size] = uniq
                for i in range(size):
                    arg_u[size, i] = cur[i]
            if nb < min_n[size]:
                min_n[size] = nb
                for i in range(size):
                    arg_n[size, i] = cur[i]
            if size < kmax and v + 1 < n:
                level += 1
                cur[level] = v + 1
                continue
            for j in range(t):
                r = nbrs[v, j]
                c = cnt[r]
                if c == 1:
                    uniq -= 1
                    nb -= 1
                elif c == 2:
                    uniq += 1
                cnt[r] = c - 1
            cur[level] += 1
        else:
            level -= 1
            if level >= 0:
                v = cur[level]
                for j in range(t):
                    r = nbrs[v, j]
                    c = cnt[r]
                    if c == 1:
                        uniq -= 1
                        nb -= 1
                    elif c == 2:
                        uniq += 1
                    cnt[r] = c - 1
                cur[level] += 1
    return min_u, arg_u, min_n, arg_n


def subset_counts(nbrs, subsets):
    """|U(S)| and |N(S)| for each row of ``subsets`` (shape ``(B, k)``)."""
    B, k = subsets.shape
    rows = np.sort(nbrs[subsets].reshape(B, -1), axis=1)
    new = np.ones(rows.shape, bool)
    new[:, 1:] = rows[:, 1:] != rows[:, :-1]
    last = np.ones(rows.shape, bool)
    last[:, :-1] = rows[:, 1:] != rows[:, :-1]
    return (new & last).sum(axis=1), new.sum(axis=1)


def _subset_scan_np(nbrs, n_right, kmax, chunk=1 << 15):
    n = nbrs.shape[0]
    big = np.iinfo(np.int64).max
    min_u = np.full(kmax + 1, big, np.int64)
    min_n = np.full(kmax + 1, big, np.int64)
    arg_u = np.full((kmax + 1, kmax), -1, np.int64)
    arg_n = np.full((kmax + 1, kmax), -1, np.int64)
    for k in range(1, min(kmax, n) + 1):
        it = combinations(range(n), k)
        while True:
            block = np.array(list(islice(it, chunk)), dtype=np.int64).reshape(-1, k)
            if block.size == 0:
                break
            u, nn = subset_counts(nbrs, block)
            iu, inn = int(np.argmin(u)), int(np.argmin(nn))
            if u[iu] < min_u[k]:
                min_u[k] = u[iu]
                arg_u[k, :k] = block[iu]
            if nn[inn] < min_n[k]:
                min_n[k] = nn[inn]
                arg_n[k, :k] = block[inn]
    return min_u, arg_u, min_n, arg_n


def subset_scan(nbrs, n_right, kmax):
    """Minimum |U(S)| and |N(S)| for each set size 1..kmax, with a minimizing set.

    ``nbrs`` is the ``(n, t)`` neighbor table of a t-left-regular graph.  Sets
    are visited in lexicographic order and the first minimizer is kept.
    """
    nbrs = np.ascontiguousarray(nbrs, dtype=np.int64)
    if use_numba():
        return _subset_scan_nb(nbrs, n_right, kmax)
    return _subset_scan_np(nbrs, n_right, kmax)


# ---------------------------------------------------------------------------
# signed sparse products over an edge list
# ---------------------------------------------------------------------------


@njit
def _edge_matvec_nb(src, dst, sign, x, n_out):
    y = np.zeros(n_out, x.dtype)
    for e in range(src.shape[0]):
        y[dst[e]] += sign[e] * x[src[e]]
    return y


def _edge_matvec_np(src, dst, sign, x, n_out):
    if np.issubdtype(x.dtype, np.integer):
        y = np.zeros(n_out, x.dtype)
        np.add.at(y, dst, sign.astype(x.dtype) * x[src])
        return y
    return np.bincount(dst, weights=sign * x[src], minlength=n_out)


def edge_matvec(src, dst, sign, x, n_out):
    """``y[dst[e]] += sign[e] * x[src[e]]`` summed in edge order."""
    if use_numba():
        return _edge_matvec_nb(src, dst, sign, x, n_out)
    return _edge_matvec_np(src, dst, sign, x, n_out)


@njit
def _edge_lookup_nb(lptr, lnb, us, rs):
    out = np.full(us.shape[0], -1, np.int64)
    for i in range(us.shape[0]):
        u = us[i]
        for j in range(lptr[u], lptr[u + 1]):
            if lnb[j] == rs[i]:
                out[i] = j
                break
    return out


def _edge_lookup_np(lptr, lnb, us, rs):
    # the packing base must exceed every right id, queried ones included, or keys collide
    m = max(int(lnb.max()) if lnb.size else 0, int(rs.max()) if rs.size else 0) + 1
    keys = np.repeat(np.arange(lptr.size - 1), np.diff(lptr)) * m + lnb
    q = us * m + rs
    pos = np.searchsorted(keys, q)
    pos = np.minimum(pos, keys.size - 1)
    return np.where((keys.size > 0) & (keys[pos] == q), pos, -1)


def edge_lookup(lptr, lnb, us, rs):
    """Edge index of each ``(us[i], rs[i])`` in the left-sorted edge list, ``-1`` if absent."""
    if use_numba():
        # narrower integer ids are read in place; numba specializes on dtype
        us = np.ascontiguousarray(us)
        rs = np.ascontiguousarray(rs)
        if not (np.issubdtype(us.dtype, np.integer) and np.issubdtype(rs.dtype, np.integer)):
            us, rs = us.astype(np.int64), rs.astype(np.int64)
        return _edge_lookup_nb(lptr, lnb, us, rs)
    us = np.ascontiguousarray(us, dtype=np.int64)
    rs = np.ascontiguousarray(rs, dtype=np.int64)
    return _edge_lookup_np(lptr, lnb, us, rs)


# ---------------------------------------------------------------------------
# extremes of ||Ax||_p / ||x||_p on one support by multi-start descent
# ---------------------------------------------------------------------------


@njit
def _phi(v, p):
    if v == 0.0:
        return 0.0
    a = abs(v) ** (p - 1.0)
    return a if v > 0 else -a


@njit
def _ratio_pp(A, x, p):
    num = 0.0
    for r in range(A.shape[0]):
        acc = 0.0
        for j in range(A.shape[1]):
            acc += A[r, j] * x[j]
        num += abs(acc) ** p
    den = 0.0
    for j in range(x.shape[0]):
        den += abs(x[j]) ** p
    return num / den


@njit
def _descend_nb(A, p, x0, iters, sense):
    k = A.shape[1]
    x = x0.copy()
    nrm = np.sqrt(np.sum(x * x))
    x /= nrm
    f = sense * _ratio_pp(A, x, p)
    step = 0.5
    g = np.empty(k)
    y = np.empty(A.shape[0])
    xn = np.empty(k)
    for _ in range(iters):
        for r in range(A.shape[0]):
            acc = 0.0
            for j in range(k):
                acc += A[r, j] * x[j]
            y[r] = _phi(acc, p)
        den = 0.0
        for j in range(k):
            den += abs(x[j]) ** p
        for j in range(k):
            acc = 0.0
            for r in range(A.shape[0]):
                acc += A[r, j] * y[r]
            g[j] = sense * (acc - sense * f * _phi(x[j], p)) / den
        gn = np.sqrt(np.sum(g * g))
        if gn == 0.0:
            break
        while step > 1e-12:
            for j in range(k):
                xn[j] = x[j] - step * g[j] / gn
            nn = np.sqrt(np.sum(xn * xn))
            for j in range(k):
                xn[j] /= nn
            fn = sense * _ratio_pp(A, xn, p)
            if fn < f:
                x[:] = xn
                f = fn
                step = min(2.0 * step, 1.0)
                break
            step *= 0.5
        if step <= 1e-12:
            break
    return sense * f, x


@njit
def _lp_extremes_nb(A, p, x0s, iters):
    best_lo = np.inf
    best_hi = -np.inf
    arg_lo = x0s[0].copy()
    arg_hi = x0s[0].copy()
    for i in range(x0s.shape[0]):
        f, x = _descend_nb(A, p, x0s[i], iters, 1.0)
        if f < best_lo:
            best_lo = f
            arg_lo = x
        f, x = _descend_nb(A, p, x0s[i], iters, -1.0)
        if f > best_hi:
            best_hi = f
            arg_hi = x
    return best_lo, best_hi, arg_lo, arg_hi


def _phi_np(v, p):
    return np.sign(v) * np.abs(v) ** (p - 1.0)


def _ratio_pp_np(A, X, p):
    return (np.abs(X @ A.T) ** p).sum(axis=1) / (np.abs(X) ** p).sum(axis=1)


def _descend_np(A, p, X0, iters, sense):
    X = X0 / np.linalg.norm(X0, axis=1, keepdims=True)
    f = sense * _ratio_pp_np(A, X, p)
    step = np.full(X.shape[0], 0.5)
    active = np.ones(X.shape[0], bool)
    for _ in range(iters):
        if not active.any():
            break
        Y = _phi_np(X @ A.T, p)
        den = (np.abs(X) ** p).sum(axis=1)
        G = sense * (Y @ A - sense * f[:, None] * _phi_np(X, p)) / den[:, None]
        gn = np.linalg.norm(G, axis=1)
        active &= gn > 0
        moving = active.copy()
        while moving.any():
            idx = np.flatnonzero(moving)
            Xn = X[idx] - step[idx, None] * G[idx] / gn[idx, None]
            Xn /= np.linalg.norm(Xn, axis=1, keepdims=True)
            fn = sense * _ratio_pp_np(A, Xn, p)
            ok = fn < f[idx]
            acc = idx[ok]
            X[acc] = Xn[ok]
            f[acc] = fn[ok]
            step[acc] = np.minimum(2.0 * step[acc], 1.0)
            moving[acc] = False
            rej = idx[~ok]
            step[rej] *= 0.5
            dead = rej[step[rej] <= 1e-12]
            moving[dead] = False
            active[dead] = False
    return sense * f, X


def _lp_extremes_np(A, p, x0s, iters):
    lo, Xlo = _descend_np(A, p, x0s.copy(), iters, 1.0)
    hi, Xhi = _descend_np(A, p, x0s.copy(), iters, -1.0)
    i, j = int(np.argmin(lo)), int(np.argmax(hi))
    return lo[i], hi[j], Xlo[i], Xhi[j]


def lp_extremes(A, p, x0s, iters=300):
    """Descent estimates of min and max of ``||Ax||_p^p / ||x||_p^p`` from each start in ``x0s``.

    Returns ``(min_value, max_value, argmin, argmax)`` where the values are
    ratios of p-th powers.  The result is a probe: it brackets the true
    extremes from the inside.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    x0s = np.ascontiguousarray(x0s, dtype=np.float64)
    if use_numba():
        lo, hi, xl, xh = _lp_extremes_nb(A, float(p), x0s, iters)
    else:
        lo, hi, xl, xh = _lp_extremes_np(A, float(p), x0s, iters)
    return float(lo), float(hi), xl, xh
