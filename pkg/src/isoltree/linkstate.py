"""Mutable allocation state: free-port masks, host occupancy, tenant registry.

The table tracks one bitmask of free up-ports per leaf (bit p set = the link
to level-2 switch p is free) and one per level-2 switch.  Level-2 up-links
are only ever taken in whole plane groups -- every plane of a sub-tree gains
or loses the same spine-group bit together -- which is what makes a single
representative mask per sub-tree a sound search structure.

All mutations are all-or-nothing: a commit validates every resource before
touching anything.  Single writer; readers may inspect freely between
mutations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .topology import Topology

log = logging.getLogger(__name__)


class AllocationError(Exception):
    """A commit/release conflict. The message names the first bad resource."""


class UnknownTenantError(KeyError):
    pass


class UnknownLinkError(ValueError):
    pass


@dataclass
class TenantAllocation:
    """One tenant's dedicated hosts and links.

    ``n`` is the requested host count; ``hosts`` may be larger when the
    placement rounds up to whole leaves or sub-trees.  ``shape`` is the
    (Q, D, R) decomposition at the granularity of ``level`` (leaves for
    level 2, whole sub-trees for level 3).  Level 0 marks a bare-metal
    allocation with no link isolation.
    """

    tenant_id: str
    n: int
    hosts: list[int]
    l1_links: list[tuple[int, int]]  # (leaf index, up port)
    l2_links: list[tuple[int, int]]  # (level-2 switch index, up port)
    level: int = 0
    shape: tuple[int, int, int] = (0, 0, 0)

    def sort_canonical(self) -> None:
        self.hosts.sort()
        self.l1_links.sort()
        self.l2_links.sort()


@dataclass
class Transaction:
    kind: str  # ADD | REM
    tenant_id: str
    time: int
    allocation: TenantAllocation | None = None


def _full_mask(width: int) -> int:
    return (1 << width) - 1


@dataclass
class LinkTable:
    topo: Topology
    host_owner: list[str | None] = field(init=False)
    free_hosts: list[int] = field(init=False)          # per leaf
    free_per_subtree: list[int] = field(init=False)
    m1_free: list[int] = field(init=False)             # per leaf, bit p = free
    m2_free: list[int] = field(init=False)             # per level-2 switch
    whole_free_leaves: list[int] = field(init=False)   # per sub-tree
    m2_rep: list[int] = field(init=False)              # per sub-tree, AND over planes
    faulty_l1: set[tuple[int, int]] = field(default_factory=set)
    faulty_l2: set[tuple[int, int]] = field(default_factory=set)
    tenants: dict[str, TenantAllocation] = field(default_factory=dict)
    transactions: list[Transaction] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        t = self.topo
        self.host_owner = [None] * t.n_hosts
        self.free_hosts = [t.m1] * t.n_leaves
        self.free_per_subtree = [t.m1 * t.m2] * t.m3
        self.m1_free = [_full_mask(t.w2)] * t.n_leaves
        self.m2_free = [_full_mask(t.w3)] * t.n_l2
        self.whole_free_leaves = [t.m2] * t.m3
        self.m2_rep = [_full_mask(t.w3)] * t.m3

    # -- derived views -------------------------------------------------------

    def free_host_indices(self, leaf: int, count: int) -> list[int]:
        """Lowest ``count`` free host indices on ``leaf``."""
        out = []
        for h in self.topo.hosts_of_leaf(leaf):
            if self.host_owner[h] is None:
                out.append(h)
                if len(out) == count:
                    return out
        raise AllocationError(f"leaf {leaf} has fewer than {count} free hosts")

    def leaf_whole_free(self, leaf: int) -> bool:
        t = self.topo
        return self.free_hosts[leaf] == t.m1 and self.m1_free[leaf] == _full_mask(t.w2)

    def owned_l1_links(self) -> int:
        return sum(len(a.l1_links) for a in self.tenants.values())

    def owned_l2_links(self) -> int:
        return sum(len(a.l2_links) for a in self.tenants.values())

    def owned_hosts(self) -> int:
        return sum(len(a.hosts) for a in self.tenants.values())

    def state_key(self):
        """Hashable snapshot of the physical state, for identity tests."""
        return (
            tuple(self.host_owner),
            tuple(self.m1_free),
            tuple(self.m2_free),
            frozenset(self.faulty_l1),
            frozenset(self.faulty_l2),
        )

    # -- internal bookkeeping -------------------------------------------------

    def _refresh_leaf(self, leaf: int, delta_hosts: int) -> None:
        t = self.topo
        k = t.subtree_of_leaf(leaf)
        before = self.leaf_whole_free(leaf)
        self.free_hosts[leaf] += delta_hosts
        self.free_per_subtree[k] += delta_hosts
        after = self.leaf_whole_free(leaf)
        if before != after:
            self.whole_free_leaves[k] += 1 if after else -1

    def _recount_whole(self, leaf: int, was_whole: bool) -> None:
        if was_whole != self.leaf_whole_free(leaf):
            k = self.topo.subtree_of_leaf(leaf)
            self.whole_free_leaves[k] += -1 if was_whole else 1

    def _recompute_rep(self, subtree: int) -> None:
        t = self.topo
        rep = _full_mask(t.w3)
        for j in range(t.w2):
            rep &= self.m2_free[t.l2_index(subtree, j)]
        self.m2_rep[subtree] = rep

    # -- mutations -------------------------------------------------------------

    def commit(self, alloc: TenantAllocation, time: int = 0) -> None:
        """Register a tenant, claiming its hosts and links atomically.

        Rejects (leaving the table untouched) on any conflict: duplicate
        tenant id, an occupied or duplicate host, an owned or faulty link,
        or a level-2 link set that is not plane-symmetric.
        """
        t = self.topo
        tid = alloc.tenant_id
        if tid in self.tenants:
            raise AllocationError(f"tenant {tid} already exists")
        if alloc.n < 1 or not alloc.hosts:
            raise AllocationError(f"tenant {tid}: empty allocation")

        seen_hosts = set()
        for h in alloc.hosts:
            if h < 0 or h >= t.n_hosts:
                raise AllocationError(f"tenant {tid}: host {h} does not exist")
            if h in seen_hosts:
                raise AllocationError(f"tenant {tid}: host {h} listed twice")
            seen_hosts.add(h)
            owner = self.host_owner[h]
            if owner is not None:
                raise AllocationError(f"tenant {tid}: host {h} is owned by {owner}")

        seen_l1 = set()
        for leaf, port in alloc.l1_links:
            if leaf < 0 or leaf >= t.n_leaves or port < 0 or port >= t.w2:
                raise AllocationError(f"tenant {tid}: no such leaf up-link ({leaf},{port})")
            if (leaf, port) in seen_l1:
                raise AllocationError(f"tenant {tid}: leaf link ({leaf},{port}) listed twice")
            seen_l1.add((leaf, port))
            if (leaf, port) in self.faulty_l1:
                raise AllocationError(f"tenant {tid}: leaf link ({leaf},{port}) is faulty")
            if not (self.m1_free[leaf] >> port) & 1:
                raise AllocationError(f"tenant {tid}: leaf link ({leaf},{port}) is taken")

        seen_l2 = set()
        groups: dict[tuple[int, int], set[int]] = {}
        for sw, port in alloc.l2_links:
            if sw < 0 or sw >= t.n_l2 or port < 0 or port >= t.w3:
                raise AllocationError(f"tenant {tid}: no such level-2 up-link ({sw},{port})")
            if (sw, port) in seen_l2:
                raise AllocationError(f"tenant {tid}: level-2 link ({sw},{port}) listed twice")
            seen_l2.add((sw, port))
            if (sw, port) in self.faulty_l2:
                raise AllocationError(f"tenant {tid}: level-2 link ({sw},{port}) is faulty")
            if not (self.m2_free[sw] >> port) & 1:
                raise AllocationError(f"tenant {tid}: level-2 link ({sw},{port}) is taken")
            groups.setdefault((t.l2_subtree(sw), port), set()).add(t.l2_plane(sw))
        for (k, port), planes in groups.items():
            if len(planes) != t.w2:
                raise AllocationError(
                    f"tenant {tid}: level-2 group (subtree {k}, spine {port}) does not "
                    f"cover all {t.w2} planes (asymmetric allocation)"
                )

        # validated -- apply
        for h in alloc.hosts:
            self.host_owner[h] = tid
        for leaf in {t.leaf_of_host(h) for h in alloc.hosts}:
            taken = sum(1 for h in alloc.hosts if t.leaf_of_host(h) == leaf)
            self._refresh_leaf(leaf, -taken)
        for leaf, port in alloc.l1_links:
            was = self.leaf_whole_free(leaf)
            self.m1_free[leaf] &= ~(1 << port)
            self._recount_whole(leaf, was)
        touched = set()
        for sw, port in alloc.l2_links:
            self.m2_free[sw] &= ~(1 << port)
            touched.add(t.l2_subtree(sw))
        for k in touched:
            self._recompute_rep(k)
        alloc.sort_canonical()
        self.tenants[tid] = alloc
        self.transactions.append(Transaction("ADD", tid, time, alloc))

    def release(self, tenant_id: str, time: int = 0) -> TenantAllocation:
        """Return all of a tenant's hosts and links to the free pool.

        Links that were marked faulty while owned stay excluded.
        """
        if tenant_id not in self.tenants:
            raise UnknownTenantError(tenant_id)
        alloc = self.tenants.pop(tenant_id)
        t = self.topo
        for h in alloc.hosts:
            self.host_owner[h] = None
        for leaf in {t.leaf_of_host(h) for h in alloc.hosts}:
            freed = sum(1 for h in alloc.hosts if t.leaf_of_host(h) == leaf)
            self._refresh_leaf(leaf, freed)
        for leaf, port in alloc.l1_links:
            if (leaf, port) in self.faulty_l1:
                continue  # stays excluded
            was = self.leaf_whole_free(leaf)
            self.m1_free[leaf] |= 1 << port
            self._recount_whole(leaf, was)
        touched = set()
        for sw, port in alloc.l2_links:
            if (sw, port) not in self.faulty_l2:
                self.m2_free[sw] |= 1 << port
            touched.add(t.l2_subtree(sw))
        for k in touched:
            self._recompute_rep(k)
        self.transactions.append(Transaction("REM", tenant_id, time, None))
        return alloc

    def mark_faulty(self, kind: str, switch: int, port: int) -> None:
        """Exclude one up-link from all future allocation searches.

        A link currently owned by a tenant stays owned (no migration); it is
        only flagged, with a warning recorded.
        """
        t = self.topo
        if kind == "l1":
            if switch < 0 or switch >= t.n_leaves or port < 0 or port >= t.w2:
                raise UnknownLinkError(f"no leaf up-link ({switch},{port})")
            if (switch, port) in self.faulty_l1:
                return
            self.faulty_l1.add((switch, port))
            if (self.m1_free[switch] >> port) & 1:
                was = self.leaf_whole_free(switch)
                self.m1_free[switch] &= ~(1 << port)
                self._recount_whole(switch, was)
            else:
                msg = f"leaf link ({switch},{port}) marked faulty while tenant-owned"
                self.warnings.append(msg)
                log.warning(msg)
        elif kind == "l2":
            if switch < 0 or switch >= t.n_l2 or port < 0 or port >= t.w3:
                raise UnknownLinkError(f"no level-2 up-link ({switch},{port})")
            if (switch, port) in self.faulty_l2:
                return
            self.faulty_l2.add((switch, port))
            if (self.m2_free[switch] >> port) & 1:
                self.m2_free[switch] &= ~(1 << port)
                self._recompute_rep(t.l2_subtree(switch))
            else:
                msg = f"level-2 link ({switch},{port}) marked faulty while tenant-owned"
                self.warnings.append(msg)
                log.warning(msg)
        else:
            raise UnknownLinkError(f"unknown link kind {kind!r}")

    def clear_faulty(self, kind: str, switch: int, port: int) -> None:
        """Inverse of :meth:`mark_faulty` for a link that is not owned."""
        t = self.topo
        if kind == "l1":
            if (switch, port) not in self.faulty_l1:
                raise UnknownLinkError(f"leaf link ({switch},{port}) is not faulty")
            self.faulty_l1.discard((switch, port))
            owned = any((switch, port) in a.l1_links for a in self.tenants.values())
            if not owned:
                was = self.leaf_whole_free(switch)
                self.m1_free[switch] |= 1 << port
                self._recount_whole(switch, was)
        elif kind == "l2":
            if (switch, port) not in self.faulty_l2:
                raise UnknownLinkError(f"level-2 link ({switch},{port}) is not faulty")
            self.faulty_l2.discard((switch, port))
            owned = any((switch, port) in a.l2_links for a in self.tenants.values())
            if not owned:
                self.m2_free[switch] |= 1 << port
                self._recompute_rep(t.l2_subtree(switch))
        else:
            raise UnknownLinkError(f"unknown link kind {kind!r}")

    # -- consistency ------------------------------------------------------------

    def check_conservation(self) -> None:
        """free + owned + faulty-excluded must cover every resource exactly once."""
        t = self.topo
        free_l1 = sum(m.bit_count() for m in self.m1_free)
        owned_l1 = self.owned_l1_links()
        owned_set = {lk for a in self.tenants.values() for lk in a.l1_links}
        excluded = len([lk for lk in self.faulty_l1 if lk not in owned_set])
        if free_l1 + owned_l1 + excluded != t.total_l1_up_links:
            raise AssertionError(
                f"leaf up-link conservation broken: {free_l1}+{owned_l1}+{excluded} "
                f"!= {t.total_l1_up_links}"
            )
        free_l2 = sum(m.bit_count() for m in self.m2_free)
        owned_l2 = self.owned_l2_links()
        owned2 = {lk for a in self.tenants.values() for lk in a.l2_links}
        excluded2 = len([lk for lk in self.faulty_l2 if lk not in owned2])
        if free_l2 + owned_l2 + excluded2 != t.total_l2_up_links:
            raise AssertionError(
                f"level-2 up-link conservation broken: {free_l2}+{owned_l2}+{excluded2} "
                f"!= {t.total_l2_up_links}"
            )
        free_h = sum(1 for o in self.host_owner if o is None)
        if free_h + self.owned_hosts() != t.n_hosts:
            raise AssertionError("host conservation broken")
        if free_h != sum(self.free_hosts):
            raise AssertionError("per-leaf free host counters out of sync")
