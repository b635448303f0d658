"""Transportation simplex used for the Earth Mover's Distance.

The basis is stored as ``m + n - 1`` cells that form a spanning tree of the
bipartite row/column graph. Vogel's approximation builds the starting
basis; MODI potentials price the non-basic cells and pivots walk the cycle
closed by the entering cell.
"""
import numpy as np
from numba import njit

_INF = np.inf


@njit(cache=True)
def _advance(order, ptr, is_open):
    """Move ``ptr`` forward to the next open entry of ``order`` (or its end)."""
    while ptr < order.size and not is_open[order[ptr]]:
        ptr += 1
    return ptr


@njit(cache=True)
def _vogel(supply, demand, cost, br, bc, bx):
    m, n = cost.shape
    s = supply.copy()
    d = demand.copy()
    row_open = np.ones(m, dtype=np.bool_)
    col_open = np.ones(n, dtype=np.bool_)
    # Each line keeps its cells sorted by cost plus pointers to the cheapest
    # and second cheapest open cell; pointers only ever move forward.
    row_order = np.empty((m, n), dtype=np.int64)
    for i in range(m):
        row_order[i] = np.argsort(cost[i], kind="mergesort")
    col_order = np.empty((n, m), dtype=np.int64)
    for j in range(n):
        col_order[j] = np.argsort(cost[:, j], kind="mergesort")
    r1 = np.zeros(m, dtype=np.int64)
    r2 = np.ones(m, dtype=np.int64)
    c1 = np.zeros(n, dtype=np.int64)
    c2 = np.ones(n, dtype=np.int64)
    rows_left = m
    cols_left = n
    k = 0
    while rows_left > 0 and cols_left > 0:
        best_pen = -1.0
        line_is_row = True
        line = -1
        for i in range(m):
            if not row_open[i]:
                continue
            r1[i] = _advance(row_order[i], r1[i], col_open)
            if r2[i] <= r1[i]:
                r2[i] = r1[i] + 1
            r2[i] = _advance(row_order[i], r2[i], col_open)
            a = cost[i, row_order[i, r1[i]]]
            pen = cost[i, row_order[i, r2[i]]] - a if r2[i] < n else a
            if pen > best_pen:
                best_pen = pen
                line_is_row = True
                line = i
        for j in range(n):
            if not col_open[j]:
                continue
            c1[j] = _advance(col_order[j], c1[j], row_open)
            if c2[j] <= c1[j]:
                c2[j] = c1[j] + 1
            c2[j] = _advance(col_order[j], c2[j], row_open)
            a = cost[col_order[j, c1[j]], j]
            pen = cost[col_order[j, c2[j]], j] - a if c2[j] < m else a
            if pen > best_pen:
                best_pen = pen
                line_is_row = False
                line = j
        if line_is_row:
            bi = line
            bj = row_order[line, r1[line]]
        else:
            bj = line
            bi = col_order[line, c1[line]]
        x = min(s[bi], d[bj])
        br[k] = bi
        bc[k] = bj
        bx[k] = x
        k += 1
        row_exhausted = s[bi] <= d[bj]
        s[bi] -= x
        d[bj] -= x
        # Cross out exactly one line per allocation (two on the last one) so
        # the basis always has m + n - 1 cells.
        if rows_left == 1 and cols_left == 1:
            row_open[bi] = False
            col_open[bj] = False
            rows_left = 0
            cols_left = 0
        elif rows_left == 1:
            col_open[bj] = False
            cols_left -= 1
        elif cols_left == 1 or row_exhausted:
            s[bi] = 0.0
            row_open[bi] = False
            rows_left -= 1
        else:
            d[bj] = 0.0
            col_open[bj] = False
            cols_left -= 1
    return k


@njit(cache=True)
def _tree_adjacency(br, bc, m, n):
    nn = m + n
    deg = np.zeros(nn + 1, dtype=np.int64)
    nb = br.size
    for k in range(nb):
        deg[br[k] + 1] += 1
        deg[m + bc[k] + 1] += 1
    for v in range(nn):
        deg[v + 1] += deg[v]
    fill = deg[:-1].copy()
    adj = np.empty(2 * nb, dtype=np.int64)
    for k in range(nb):
        u = br[k]
        w = m + bc[k]
        adj[fill[u]] = k
        fill[u] += 1
        adj[fill[w]] = k
        fill[w] += 1
    return deg, adj


@njit(cache=True)
def _bfs(root, br, bc, m, n, deg, adj, par_node, par_edge, order):
    nn = m + n
    for v in range(nn):
        par_node[v] = -2
    par_node[root] = -1
    par_edge[root] = -1
    head = 0
    tail = 1
    order[0] = root
    while head < tail:
        v = order[head]
        head += 1
        for p in range(deg[v], deg[v + 1]):
            k = adj[p]
            w = m + bc[k] if v < m else br[k]
            if par_node[w] == -2:
                par_node[w] = v
                par_edge[w] = k
                order[tail] = w
                tail += 1
    return tail


@njit(cache=True)
def transport_solve(supply, demand, cost, max_iter=0):
    """Minimum-cost flow between ``supply`` (rows) and ``demand`` (columns).

    Both vectors must be non-negative with equal totals. Returns
    ``(total_cost, flow_matrix, iterations)``.
    """
    m, n = cost.shape
    nb = m + n - 1
    br = np.empty(nb, dtype=np.int64)
    bc = np.empty(nb, dtype=np.int64)
    bx = np.empty(nb, dtype=np.float64)
    _vogel(supply, demand, cost, br, bc, bx)
    if max_iter <= 0:
        max_iter = 20 * (m + n) * (m + n) + 100
    scale = 0.0
    for i in range(m):
        for j in range(n):
            if cost[i, j] > scale:
                scale = cost[i, j]
    tol = 1e-12 * max(scale, 1.0)
    u = np.empty(m)
    v = np.empty(n)
    nn = m + n
    par_node = np.empty(nn, dtype=np.int64)
    par_edge = np.empty(nn, dtype=np.int64)
    order = np.empty(nn, dtype=np.int64)
    path = np.empty(nn, dtype=np.int64)
    it = 0
    while it < max_iter:
        it += 1
        deg, adj = _tree_adjacency(br, bc, m, n)
        # Potentials: u_i + v_j = c_ij on every basic cell, u_0 = 0.
        cnt = _bfs(0, br, bc, m, n, deg, adj, par_node, par_edge, order)
        u[0] = 0.0
        for t in range(1, cnt):
            w = order[t]
            k = par_edge[w]
            if w < m:
                u[w] = cost[w, bc[k]] - v[bc[k]]
            else:
                v[w - m] = cost[br[k], w - m] - u[br[k]]
        best = -tol
        ei = -1
        ej = -1
        for i in range(m):
            for j in range(n):
                r = cost[i, j] - u[i] - v[j]
                if r < best:
                    best = r
                    ei = i
                    ej = j
        if ei < 0:
            break
        # Cycle: tree path from column ej back to row ei.
        _bfs(ei, br, bc, m, n, deg, adj, par_node, par_edge, order)
        plen = 0
        w = m + ej
        while w != ei:
            path[plen] = par_edge[w]
            plen += 1
            w = par_node[w]
        theta = _INF
        leave = -1
        for t in range(0, plen, 2):
            k = path[t]
            if bx[k] < theta:
                theta = bx[k]
                leave = t
        for t in range(plen):
            k = path[t]
            if t % 2 == 0:
                bx[k] -= theta
            else:
                bx[k] += theta
        k = path[leave]
        br[k] = ei
        bc[k] = ej
        bx[k] = theta
    flow = np.zeros((m, n))
    total = 0.0
    for k in range(nb):
        flow[br[k], bc[k]] += bx[k]
        total += bx[k] * cost[br[k], bc[k]]
    return total, flow, it


@njit(cache=True)
def ground_distance(ca, cb):
    m = ca.shape[0]
    n = cb.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for c in range(ca.shape[1]):
                diff = ca[i, c] - cb[j, c]
                s += diff * diff
            out[i, j] = np.sqrt(s)
    return out


@njit(cache=True)
def emd_kernel(ca, wa, cb, wb):
    m = ca.shape[0]
    n = cb.shape[0]
    cost = ground_distance(ca, cb)
    if m == 1 or n == 1:
        total = 0.0
        for i in range(m):
            for j in range(n):
                total += (wa[i] if n == 1 else wb[j]) * cost[i, j]
        return total
    total, _, _ = transport_solve(wa, wb, cost, 0)
    return total


@njit(cache=True)
def emd_one_to_many(ca, wa, colors, weights, offsets, targets):
    """EMD from one signature set to each packed set listed in ``targets``.

    Set ``t`` occupies ``colors[offsets[t]:offsets[t + 1]]``.
    """
    out = np.empty(targets.size)
    for q in range(targets.size):
        t = targets[q]
        lo = offsets[t]
        hi = offsets[t + 1]
        out[q] = emd_kernel(ca, wa, colors[lo:hi], weights[lo:hi])
    return out


@njit(cache=True)
def emd_pairwise(colors, weights, offsets):
    nset = offsets.size - 1
    out = np.zeros((nset, nset))
    for a in range(nset):
        for b in range(a + 1, nset):
            d = emd_kernel(
                colors[offsets[a]:offsets[a + 1]],
                weights[offsets[a]:offsets[a + 1]],
                colors[offsets[b]:offsets[b + 1]],
                weights[offsets[b]:offsets[b + 1]],
            )
            out[a, b] = d
            out[b, a] = d
    return out
