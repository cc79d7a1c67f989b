"""Online tenant placement and link allocation.

Four selectable algorithms over a shared :class:`~isoltree.linkstate.LinkTable`:

* ``laas_allocate``  -- joint host/link search in Q*D+R form: containment is
  tried at level 1 (one leaf, no links), then level 2 (leaves inside one
  sub-tree), then level 3 (whole leaves across sub-trees, sizes rounded up
  to full leaves so all upper bipartite planes stay identical).
* ``simple_allocate`` -- whole empty sub-trees only.
* ``extended_simple_allocate`` -- like simple, but the leftover may share a
  sub-tree with others as long as it is the only tenant expanding out of it
  (it then owns all of that sub-tree's up-links).
* ``unconstrained_allocate`` -- bare-metal hosts, no link isolation.

Searches scan most-used-first (fewest free hosts, then fewest free ports,
then lowest index) and return the first hit, which packs tenants and keeps
results deterministic.  Divisors descend, so the accepted plan spreads the
tenant across as few leaves as possible; on oversubscribed trees divisors
that round evenly against the oversubscription ratio are preferred and only
``S = ceil(D / ceil(O))`` common spines are taken per crossing.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import kernel
from .linkstate import LinkTable, TenantAllocation
from .topology import Topology, min_level


@dataclass(frozen=True)
class AllocRequest:
    tenant_id: str
    n: int


@dataclass(frozen=True)
class SearchPlan:
    """One (level, D, Q, R) division with its required common-spine count."""

    level: int
    d: int
    q: int
    r: int
    s: int
    s_r: int


@dataclass
class LinkAssignment:
    """Result of one FLAP search: the chosen repeated units and spine sets."""

    repeated: list[int]          # leaf indices (or sub-tree indices for level 3)
    common_spines: list[int]     # exactly S up-port indices
    unique: int | None           # remainder leaf/sub-tree, if R > 0
    unique_spines: list[int]     # exactly S_R ports, subset of common_spines


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _lowest_bits(mask: int, count: int) -> int:
    picked = 0
    while count > 0 and mask:
        low = mask & -mask
        picked |= low
        mask ^= low
        count -= 1
    if count:
        raise AssertionError("mask narrower than requested bit count")
    return picked


def _select_spines(common: int, umask: int, s: int, s_r: int) -> tuple[int, int]:
    """Pick the final spine sets from candidate masks.

    The remainder leaf takes the lexicographically-first S_R of the common
    spines it can reach; the repeated set is padded around it to exactly S.
    """
    sr_bits = _lowest_bits(umask, s_r) if s_r else 0
    sd_bits = sr_bits | _lowest_bits(common & ~sr_bits, s - s_r)
    return sd_bits, sr_bits


def _ceil_o(topo: Topology, level: int) -> int:
    # integer ceil of the oversubscription ratio; 1 on full-bisection trees
    return max(1, -(-topo.m[level - 1] // topo.w[level]))


def flap(table: LinkTable, d: int, q: int, r: int,
         leaf_range: tuple[int, int] | None = None,
         s: int | None = None, s_r: int | None = None) -> LinkAssignment | None:
    """Search ``leaf_range`` (inclusive, default whole tree) for a Q*D+R
    assignment; returns None when no combination exists."""
    topo = table.topo
    lo, hi = leaf_range if leaf_range else (0, topo.n_leaves - 1)
    co = _ceil_o(topo, 1)
    if s is None:
        s = -(-d // co)
    if s_r is None:
        s_r = -(-r // co)
    hosts = table.free_hosts[lo:hi + 1]
    masks = table.m1_free[lo:hi + 1]
    plan = kernel.find_plan(hosts, masks, d, q, r, s, s_r)
    if plan is None:
        return None
    chosen, common, upos, umask = plan
    sd, sr = _select_spines(common, umask if upos >= 0 else 0, s, s_r if upos >= 0 else 0)
    return LinkAssignment(
        repeated=[lo + p for p in chosen],
        common_spines=_bits(sd),
        unique=(lo + upos) if upos >= 0 else None,
        unique_spines=_bits(sr),
    )


def flap2(table: LinkTable, d: int, q: int, r: int,
          s: int | None = None, s_r: int | None = None) -> LinkAssignment | None:
    """The level-3 variant of :func:`flap`, at whole-sub-tree granularity.

    Units are completely-free leaves; spines are level-3 groups of the
    representative upper bipartite plane.
    """
    topo = table.topo
    co = _ceil_o(topo, 2)
    if s is None:
        s = -(-d // co)
    if s_r is None:
        s_r = -(-r // co)
    plan = kernel.find_plan(table.whole_free_leaves, table.m2_rep, d, q, r, s, s_r)
    if plan is None:
        return None
    chosen, common, upos, umask = plan
    sd, sr = _select_spines(common, umask if upos >= 0 else 0, s, s_r if upos >= 0 else 0)
    return LinkAssignment(
        repeated=chosen,
        common_spines=_bits(sd),
        unique=upos if upos >= 0 else None,
        unique_spines=_bits(sr),
    )


def _whole_free_leaves_of(table: LinkTable, subtree: int, count: int) -> list[int]:
    out = []
    for leaf in table.topo.leaves_of_subtree(subtree):
        if table.leaf_whole_free(leaf):
            out.append(leaf)
            if len(out) == count:
                return out
    raise AssertionError(f"subtree {subtree} lost whole-free leaves mid-allocation")


def laas_allocate(table: LinkTable, request: AllocRequest,
                  time: int = 0) -> TenantAllocation | None:
    topo = table.topo
    n = request.n
    if n < 1:
        raise ValueError("host count must be >= 1")

    # Level 1: a single leaf, no up-links involved.
    if n <= topo.m1:
        leaf = kernel.pick_leaf(table.free_hosts, n)
        if leaf >= 0:
            alloc = TenantAllocation(
                request.tenant_id, n, table.free_host_indices(leaf, n),
                [], [], level=1, shape=(1, n, 0))
            table.commit(alloc, time)
            return alloc

    # Level 2: Q leaves of D plus a remainder leaf, inside one sub-tree.
    if n <= topo.m1 * topo.m2:
        hit = kernel.search_level2(
            table.free_hosts, table.m1_free, table.free_per_subtree,
            n, topo.m1, topo.m2, topo.m3, topo.w2, _ceil_o(topo, 1))
        if hit is not None:
            d, q, r, s, s_r, subtree, plan = hit
            chosen, common, upos, umask = plan
            base = subtree * topo.m2
            sd, sr = _select_spines(common, umask if upos >= 0 else 0,
                                    s, s_r if upos >= 0 else 0)
            hosts: list[int] = []
            links: list[tuple[int, int]] = []
            for pos in chosen:
                leaf = base + pos
                hosts += table.free_host_indices(leaf, d)
                links += [(leaf, p) for p in _bits(sd)]
            if upos >= 0:
                leaf = base + upos
                hosts += table.free_host_indices(leaf, r)
                links += [(leaf, p) for p in _bits(sr)]
            alloc = TenantAllocation(request.tenant_id, n, hosts, links, [],
                                     level=2, shape=(q, d, r))
            table.commit(alloc, time)
            return alloc

    # Level 3: whole leaves across sub-trees; sizes round up to full leaves.
    if not topo.dummy_top:
        units = -(-n // topo.m1)
        if units <= topo.m2 * topo.m3:
            hit = kernel.search_level3(
                table.whole_free_leaves, table.m2_rep,
                units, topo.m2, topo.m3, topo.w3, _ceil_o(topo, 2))
            if hit is not None:
                d, q, r, s, s_r, _, plan = hit
                chosen, common, upos, umask = plan
                sd, sr = _select_spines(common, umask if upos >= 0 else 0,
                                        s, s_r if upos >= 0 else 0)
                hosts = []
                l1: list[tuple[int, int]] = []
                l2: list[tuple[int, int]] = []
                all_ports = list(range(topo.w2))
                for subtree, leaf_count, gmask in (
                        [(k, d, sd) for k in chosen]
                        + ([(upos, r, sr)] if upos >= 0 else [])):
                    for leaf in _whole_free_leaves_of(table, subtree, leaf_count):
                        hosts += list(topo.hosts_of_leaf(leaf))
                        l1 += [(leaf, p) for p in all_ports]
                    for j in range(topo.w2):
                        sw = topo.l2_index(subtree, j)
                        l2 += [(sw, g) for g in _bits(gmask)]
                alloc = TenantAllocation(request.tenant_id, n, hosts, l1, l2,
                                         level=3, shape=(q, d, r))
                table.commit(alloc, time)
                return alloc
    return None


def _empty_leaves(table: LinkTable, subtree: int) -> list[int]:
    return [l for l in table.topo.leaves_of_subtree(subtree) if table.leaf_whole_free(l)]


def _subtree_whole_free(table: LinkTable, subtree: int) -> bool:
    topo = table.topo
    if table.whole_free_leaves[subtree] != topo.m2:
        return False
    full = (1 << topo.w3) - 1
    return all(table.m2_free[topo.l2_index(subtree, j)] == full for j in range(topo.w2))


def _own_leaf(table: LinkTable, leaf: int, hosts: list[int],
              links: list[tuple[int, int]], with_links: bool) -> None:
    hosts += list(table.topo.hosts_of_leaf(leaf))
    if with_links:
        links += [(leaf, p) for p in range(table.topo.w2)]


def simple_allocate(table: LinkTable, request: AllocRequest,
                    time: int = 0) -> TenantAllocation | None:
    """Place the tenant in completely empty sub-trees, rounding it up.

    ``s`` empty sub-trees of the level below the containment level are taken
    whole, with all their internal links; for ``s > 1`` all their up-links
    too.  Fails when fewer than ``s`` empty sub-trees exist side by side.
    """
    topo = table.topo
    level, s = min_level(topo, request.n)

    if level == 1:
        cands = [l for l in range(topo.n_leaves) if table.leaf_whole_free(l)]
        if not cands:
            return None
        alloc = TenantAllocation(request.tenant_id, request.n, [], [], [],
                                 level=1, shape=(1, request.n, 0))
        _own_leaf(table, cands[0], alloc.hosts, alloc.l1_links, with_links=False)
        table.commit(alloc, time)
        return alloc

    if level == 2:
        order = sorted(range(topo.m3), key=lambda k: (table.free_per_subtree[k], k))
        for k in order:
            empty = _empty_leaves(table, k)
            if len(empty) < s:
                continue
            hosts: list[int] = []
            l1: list[tuple[int, int]] = []
            for leaf in empty[:s]:
                _own_leaf(table, leaf, hosts, l1, with_links=(s > 1))
            alloc = TenantAllocation(request.tenant_id, request.n, hosts, l1, [],
                                     level=2, shape=(s, topo.m1, 0))
            table.commit(alloc, time)
            return alloc
        return None

    # level 3: s completely empty 2-level sub-trees
    empty_subs = [k for k in range(topo.m3) if _subtree_whole_free(table, k)]
    if len(empty_subs) < s:
        return None
    hosts = []
    l1 = []
    l2: list[tuple[int, int]] = []
    for k in empty_subs[:s]:
        for leaf in topo.leaves_of_subtree(k):
            _own_leaf(table, leaf, hosts, l1, with_links=True)
        for j in range(topo.w2):
            sw = topo.l2_index(k, j)
            l2 += [(sw, g) for g in range(topo.w3)]
    alloc = TenantAllocation(request.tenant_id, request.n, hosts, l1, l2,
                             level=3, shape=(s, topo.m2, 0))
    table.commit(alloc, time)
    return alloc


def _shared_leaf_candidates(table: LinkTable, subtree: int, need: int,
                            exclude: set[int]) -> list[int]:
    """Leaves able to host a leftover whose tenant will own all their
    up-links: enough free hosts and every up-port still free.

    Port exclusivity is what enforces the one-expander rule: a leaf that
    already has an expanding tenant has no free up-ports left.
    """
    topo = table.topo
    full = (1 << topo.w2) - 1
    out = []
    for leaf in topo.leaves_of_subtree(subtree):
        if leaf in exclude:
            continue
        if table.free_hosts[leaf] >= need and table.m1_free[leaf] == full:
            out.append(leaf)
    out.sort(key=lambda l: (table.free_hosts[l], l))
    return out


def extended_simple_allocate(table: LinkTable, request: AllocRequest,
                             time: int = 0) -> TenantAllocation | None:
    """Simple placement where the leftover may share a sub-tree.

    The sharing tenant becomes the sole expander of the shared sub-tree and
    owns all of its up-links; other tenants there must stay inside it.
    """
    topo = table.topo
    n = request.n
    level, _ = min_level(topo, n)

    if level == 1:
        # Non-expanding: any leaf with room, most-used-first.
        leaf = kernel.pick_leaf(table.free_hosts, n)
        if leaf < 0:
            return None
        alloc = TenantAllocation(request.tenant_id, n,
                                 table.free_host_indices(leaf, n), [], [],
                                 level=1, shape=(1, n, 0))
        table.commit(alloc, time)
        return alloc

    if level == 2:
        full_cnt, leftover = divmod(n, topo.m1)
        order = sorted(range(topo.m3), key=lambda k: (table.free_per_subtree[k], k))
        for k in order:
            empty = _empty_leaves(table, k)
            if len(empty) < full_cnt:
                continue
            chosen_full = empty[:full_cnt]
            shared = None
            if leftover:
                cands = _shared_leaf_candidates(table, k, leftover, set(chosen_full))
                if not cands:
                    continue
                shared = cands[0]
            hosts: list[int] = []
            l1: list[tuple[int, int]] = []
            for leaf in chosen_full:
                _own_leaf(table, leaf, hosts, l1, with_links=True)
            if shared is not None:
                hosts += table.free_host_indices(shared, leftover)
                l1 += [(shared, p) for p in range(topo.w2)]
            alloc = TenantAllocation(request.tenant_id, n, hosts, l1, [],
                                     level=2, shape=(full_cnt, topo.m1, leftover))
            table.commit(alloc, time)
            return alloc
        return None

    # level 3: full sub-trees plus a leftover expanded into one shared sub-tree
    full_cnt, leftover = divmod(n, topo.m1 * topo.m2)
    empty_subs = [k for k in range(topo.m3) if _subtree_whole_free(table, k)]
    if len(empty_subs) < full_cnt:
        return None
    chosen_subs = empty_subs[:full_cnt]
    hosts = []
    l1 = []
    l2: list[tuple[int, int]] = []
    for k in chosen_subs:
        for leaf in topo.leaves_of_subtree(k):
            _own_leaf(table, leaf, hosts, l1, with_links=True)
        for j in range(topo.w2):
            l2 += [(topo.l2_index(k, j), g) for g in range(topo.w3)]
    if leftover:
        shared_sub = None
        used = set(chosen_subs)
        full2 = (1 << topo.w3) - 1
        order = sorted((k for k in range(topo.m3) if k not in used),
                       key=lambda k: (table.free_per_subtree[k], k))
        full_leaves, sub_left = divmod(leftover, topo.m1)
        for k in order:
            if any(table.m2_free[topo.l2_index(k, j)] != full2 for j in range(topo.w2)):
                continue  # someone already expands out of this sub-tree
            empty = _empty_leaves(table, k)
            if len(empty) < full_leaves:
                continue
            shared_leaf = None
            if sub_left:
                cands = _shared_leaf_candidates(table, k, sub_left, set(empty[:full_leaves]))
                if not cands:
                    continue
                shared_leaf = cands[0]
            shared_sub = k
            for leaf in empty[:full_leaves]:
                _own_leaf(table, leaf, hosts, l1, with_links=True)
            if shared_leaf is not None:
                hosts += table.free_host_indices(shared_leaf, sub_left)
                l1 += [(shared_leaf, p) for p in range(topo.w2)]
            for j in range(topo.w2):
                l2 += [(topo.l2_index(k, j), g) for g in range(topo.w3)]
            break
        if shared_sub is None:
            return None
    alloc = TenantAllocation(request.tenant_id, n, hosts, l1, l2,
                             level=3, shape=(full_cnt, topo.m2, leftover))
    table.commit(alloc, time)
    return alloc


def unconstrained_allocate(table: LinkTable, request: AllocRequest,
                           time: int = 0) -> TenantAllocation | None:
    """Bare-metal: any N free hosts, most-used leaves first, no links."""
    topo = table.topo
    n = request.n
    if n < 1:
        raise ValueError("host count must be >= 1")
    if sum(table.free_hosts) < n:
        return None
    hosts: list[int] = []
    order = sorted(range(topo.n_leaves), key=lambda l: (table.free_hosts[l], l))
    for leaf in order:
        if table.free_hosts[leaf] == 0:
            continue
        take = min(n - len(hosts), table.free_hosts[leaf])
        hosts += table.free_host_indices(leaf, take)
        if len(hosts) == n:
            break
    alloc = TenantAllocation(request.tenant_id, n, hosts, [], [],
                             level=0, shape=(0, 0, 0))
    table.commit(alloc, time)
    return alloc


ALGORITHMS = {
    "laas": laas_allocate,
    "simple": simple_allocate,
    "extendedSimple": extended_simple_allocate,
    "extended": extended_simple_allocate,
    "unconstrained": unconstrained_allocate,
}
