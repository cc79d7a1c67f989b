"""Pure-Python search kernel. Reference semantics for the compiled twin.

Every function here must stay behaviourally identical to ``_kernel.pyx``:
same candidate ordering, same depth-first traversal, same first result.
"""

from __future__ import annotations

BACKEND = "python"


def pick_leaf(free_hosts: list[int], need: int) -> int:
    """Most-used leaf with at least ``need`` free hosts, or -1.

    Most-used-first: smallest free count wins, ties broken by index.
    """
    best = -1
    best_free = -1
    for i, free in enumerate(free_hosts):
        if free >= need and (best < 0 or free < best_free):
            best, best_free = i, free
    return best


def find_plan(free_hosts, masks, d, q, r, s, s_r):
    """Depth-first search for Q leaves of D hosts sharing >= S free up-ports,
    plus (when R > 0) one distinct leaf with >= R hosts and >= S_R ports
    inside the common set.

    ``free_hosts``/``masks`` cover the searched range; returned positions are
    relative to it.  Leaves are tried most-used-first (fewest free hosts,
    then fewest free ports, then lowest index).  Returns
    ``(chosen, common_mask, unique_pos, unique_mask)`` or None.
    """
    n = len(free_hosts)
    if q < 1 or n == 0:
        return None
    order = sorted(range(n), key=lambda i: (free_hosts[i], masks[i].bit_count(), i))
    cand = [i for i in order if free_hosts[i] >= d and masks[i].bit_count() >= s]
    if len(cand) < q:
        return None
    chosen: list[int] = []
    chosen_set: set[int] = set()

    def unique_scan(common):
        for u in order:
            if u in chosen_set or free_hosts[u] < r:
                continue
            um = masks[u] & common
            if um.bit_count() >= s_r:
                return u, um
        return None

    def dfs(pos, common):
        if len(chosen) == q:
            if r == 0:
                return list(chosen), common, -1, 0
            found = unique_scan(common)
            if found is None:
                return None
            return list(chosen), common, found[0], found[1]
        for at in range(pos, len(cand)):
            if len(cand) - at < q - len(chosen):
                break
            i = cand[at]
            nc = common & masks[i]
            if nc.bit_count() < s:
                continue
            chosen.append(i)
            chosen_set.add(i)
            res = dfs(at + 1, nc)
            if res is not None:
                return res
            chosen.pop()
            chosen_set.discard(i)
        return None

    return dfs(0, (1 << 64) - 1)


def _d_order(d_max: int, step: int) -> list[int]:
    first = [d for d in range(d_max, 0, -1) if d % step == 0]
    rest = [d for d in range(d_max, 0, -1) if d % step != 0]
    return first + rest


def search_level2(free_hosts, masks, free_per_subtree, n, m1, m2, m3, w2, ceil_o):
    """Try every (D, Q, R) plan for ``n`` hosts inside one 2-level sub-tree.

    D descends, with values divisible by the rounded oversubscription ratio
    tried first; sub-trees are visited most-used-first.  Returns
    ``(d, q, r, s, s_r, subtree, plan)`` for the first hit, else None.
    """
    sub_order = sorted(range(m3), key=lambda k: (free_per_subtree[k], k))
    for d in _d_order(min(n, m1), ceil_o):
        q, r = divmod(n, d)
        if q + (1 if r else 0) > m2:
            continue
        s = -(-d // ceil_o)
        s_r = -(-r // ceil_o)
        if s > w2:
            continue
        for k in sub_order:
            lo = k * m2
            plan = find_plan(free_hosts[lo:lo + m2], masks[lo:lo + m2], d, q, r, s, s_r)
            if plan is not None:
                return d, q, r, s, s_r, k, plan
    return None


def search_level3(whole_free, rep_masks, units, m2, m3, w3, ceil_o):
    """Same search at sub-tree granularity for ``units`` whole leaves."""
    for d in _d_order(min(units, m2), ceil_o):
        q, r = divmod(units, d)
        if q + (1 if r else 0) > m3:
            continue
        s = -(-d // ceil_o)
        s_r = -(-r // ceil_o)
        if s > w3:
            continue
        plan = find_plan(whole_free, rep_masks, d, q, r, s, s_r)
        if plan is not None:
            return d, q, r, s, s_r, 0, plan
    return None
