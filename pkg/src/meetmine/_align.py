"""Compiled sequence-to-template alignment kernels.

Both kernels score a meeting (an int-encoded label sequence) against a
template given as node labels plus backward edges.  A template walk starts at
any node, ends at any node, follows forward edges i -> i+1 or backward edges,
and must visit at least one node.  The score is the Levenshtein distance
between the walk's label string and the meeting, minimized over walks.

The exact kernel minimizes over walks of every length; the windowed kernel
restricts walk length to a band.  Encoding of labels to ints happens in
``templates``; unequal ints cost a substitution, equal ints cost nothing.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF = np.int64(1 << 60)


@njit(cache=True)
def loss_exact_kernel(labels, back_from, back_to, meeting):  # pragma: no cover
    """Minimum edit distance between the meeting and any template walk.

    Dynamic program over layers i = 0..len(meeting).  ``cur[v]`` is the
    cheapest alignment of the first i meeting symbols against some walk
    ending at node v.  Within a layer, walk nodes may be appended without
    consuming a meeting symbol (cost 1 each); that relaxation is iterated
    to a fixed point because backward edges can cycle.
    """
    n = labels.shape[0]
    m = meeting.shape[0]
    n_back = back_from.shape[0]

    # layer 0: the cheapest walk ending at v with nothing consumed is the
    # single-node walk [v], one unmatched node.
    prev = np.ones(n, dtype=np.int64)
    if m == 0:
        return np.int64(1)

    cur = np.empty(n, dtype=np.int64)
    for i in range(1, m + 1):
        x = meeting[i - 1]
        for v in range(n):
            sub = np.int64(0) if labels[v] == x else np.int64(1)
            best = prev[v] + 1  # leave x_i unmatched
            if v >= 1:
                c = prev[v - 1] + sub  # extend walk along the chain, align v with x_i
                if c < best:
                    best = c
            for e in range(n_back):
                if back_to[e] == v:
                    c = prev[back_from[e]] + sub
                    if c < best:
                        best = c
            c = np.int64(i - 1) + sub  # start the walk at v, skipping x_1..x_{i-1}
            if c < best:
                best = c
            cur[v] = best
        # append walk nodes that match nothing (cost 1 per node)
        changed = True
        while changed:
            changed = False
            for v in range(n):
                if v >= 1 and cur[v - 1] + 1 < cur[v]:
                    cur[v] = cur[v - 1] + 1
                    changed = True
                for e in range(n_back):
                    if back_to[e] == v and cur[back_from[e]] + 1 < cur[v]:
                        cur[v] = cur[back_from[e]] + 1
                        changed = True
        for v in range(n):
            prev[v] = cur[v]

    best = prev[0]
    for v in range(1, n):
        if prev[v] < best:
            best = prev[v]
    return best


@njit(cache=True)
def loss_windowed_kernel(labels, back_from, back_to, meeting, lo, hi):  # pragma: no cover
    """Minimum edit distance over template walks of length lo..hi inclusive.

    ``E[i, v]`` is the cheapest alignment of the first i meeting symbols
    against a walk of length exactly ell ending at v; ell is the outer
    loop.  Appending a node always advances ell, so layers only look back
    at the previous ell, never sideways through the graph.
    """
    n = labels.shape[0]
    m = meeting.shape[0]
    n_back = back_from.shape[0]

    E = np.empty((m + 1, n), dtype=np.int64)
    # ell = 1: single-node walks.
    for v in range(n):
        E[0, v] = 1
    for i in range(1, m + 1):
        for v in range(n):
            sub = np.int64(0) if labels[v] == meeting[i - 1] else np.int64(1)
            c = np.int64(i - 1) + sub
            if E[i - 1, v] + 1 < c:
                c = E[i - 1, v] + 1
            E[i, v] = c

    best = _INF
    if lo <= 1:
        for v in range(n):
            if E[m, v] < best:
                best = E[m, v]

    nxt = np.empty((m + 1, n), dtype=np.int64)
    for ell in range(2, hi + 1):
        for i in range(0, m + 1):
            for v in range(n):
                val = _INF
                if i >= 1:
                    val = nxt[i - 1, v] + 1  # leave x_i unmatched
                    x = meeting[i - 1]
                    sub = np.int64(0) if labels[v] == x else np.int64(1)
                else:
                    sub = np.int64(0)  # unused when i == 0
                if v >= 1:
                    if i >= 1 and E[i - 1, v - 1] + sub < val:
                        val = E[i - 1, v - 1] + sub
                    if E[i, v - 1] + 1 < val:
                        val = E[i, v - 1] + 1
                for e in range(n_back):
                    if back_to[e] == v:
                        u = back_from[e]
                        if i >= 1 and E[i - 1, u] + sub < val:
                            val = E[i - 1, u] + sub
                        if E[i, u] + 1 < val:
                            val = E[i, u] + 1
                nxt[i, v] = val
        for i in range(m + 1):
            for v in range(n):
                E[i, v] = nxt[i, v]
        if ell >= lo:
            for v in range(n):
                if E[m, v] < best:
                    best = E[m, v]
    return best
