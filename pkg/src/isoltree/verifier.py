"""Independent validation of allocations and transaction logs.

``check_placement`` and ``check_links`` test the structural conditions that
make a tenant's sub-topology rearrangeably non-blocking: equal host counts
per leaf up to one smaller remainder, and per-leaf link sets that form one
common spine set with the remainder nested inside it.  ``routability_oracle``
is the ground truth: it routes actual permutations over the allocated links
by exact search, with no knowledge of how the allocation was produced.

``check_log`` replays a transaction log against a fresh table, asserting
disjointness, conservation and the structural checks at every step.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Any, Iterable

from .linkstate import AllocationError, LinkTable, TenantAllocation, UnknownTenantError
from .topology import Topology
from .translog import Transaction

SAMPLED_DEFAULT_K = 1000
SAMPLED_DEFAULT_SEED = 20160607
EXHAUSTIVE_HOST_LIMIT = 8


@dataclass
class Verdict:
    ok: bool
    rule: str | None = None
    witness: Any = None

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def passed(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def failed(cls, rule: str, witness: Any) -> "Verdict":
        return cls(False, rule, witness)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _leaf_counts(alloc: TenantAllocation, topo: Topology) -> dict[int, int]:
    counts: dict[int, int] = {}
    for h in alloc.hosts:
        leaf = topo.leaf_of_host(h)
        counts[leaf] = counts.get(leaf, 0) + 1
    return counts


def _equal_tail(counts: dict[int, int]) -> tuple[bool, Any]:
    """N_1 <= N_2 = ... = N_t over the given unit->count map."""
    if len(counts) <= 1:
        return True, None
    items = sorted(counts.items(), key=lambda kv: kv[1])
    tail = items[1:]
    top = tail[-1][1]
    for unit, c in tail:
        if c != top:
            return False, {"unit": unit, "count": c, "expected": top}
    return True, None


def check_placement(alloc: TenantAllocation, topo: Topology,
                    approximated: bool = True) -> Verdict:
    """Necessary host-placement condition.

    Per-leaf host counts sorted ascending must satisfy
    ``N_1 <= N_2 = ... = N_t``.  For allocations that cross sub-trees
    (level-2 up-links present) the same rule must hold at sub-tree
    granularity and, when ``approximated`` is set, every touched leaf must
    be whole.
    """
    counts = _leaf_counts(alloc, topo)
    ok, witness = _equal_tail(counts)
    if not ok:
        return Verdict.failed("placement.equal-tail", witness)
    if alloc.l2_links:
        if approximated:
            for leaf, c in counts.items():
                if c != topo.m1:
                    return Verdict.failed(
                        "placement.whole-leaf", {"leaf": leaf, "count": c})
        sub_counts: dict[int, int] = {}
        for leaf in counts:
            k = topo.subtree_of_leaf(leaf)
            sub_counts[k] = sub_counts.get(k, 0) + 1
        ok, witness = _equal_tail(sub_counts)
        if not ok:
            return Verdict.failed("placement.subtree-equal-tail", witness)
    return Verdict.passed()


def _link_sets(pairs: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    sets: dict[int, set[int]] = {}
    for unit, port in pairs:
        sets.setdefault(unit, set()).add(port)
    return sets


def _common_set_check(counts: dict[int, int], sets: dict[int, set[int]],
                      ceil_o: int, layer: str) -> Verdict:
    """Shared core of the sufficient link condition at one granularity."""
    d = max(counts.values())
    smaller = {u: c for u, c in counts.items() if c < d}
    if len(smaller) > 1:
        return Verdict.failed(f"{layer}.shape", {"smaller_units": sorted(smaller)})
    s_req = _ceil_div(d, ceil_o)
    repeated = [u for u, c in counts.items() if c == d]
    ref: set[int] | None = None
    for u in repeated:
        su = sets.get(u, set())
        if len(su) != s_req:
            return Verdict.failed(
                f"{layer}.count", {"unit": u, "links": len(su), "required": s_req})
        if ref is None:
            ref = su
        elif su != ref:
            return Verdict.failed(
                f"{layer}.common-set", {"unit": u, "set": sorted(su),
                                        "expected": sorted(ref)})
    if smaller:
        (u, r), = smaller.items()
        su = sets.get(u, set())
        if len(su) != _ceil_div(r, ceil_o):
            return Verdict.failed(
                f"{layer}.remainder-count",
                {"unit": u, "links": len(su), "required": _ceil_div(r, ceil_o)})
        assert ref is not None
        if not su <= ref:
            return Verdict.failed(
                f"{layer}.remainder-subset", {"unit": u, "outside": sorted(su - ref)})
    return Verdict.passed()


def _full_ownership_check(counts: dict[int, int], sets: dict[int, set[int]],
                          width: int, layer: str) -> Verdict:
    everything = set(range(width))
    for u in counts:
        if sets.get(u, set()) != everything:
            return Verdict.failed(f"{layer}.not-owned-whole", {"unit": u})
    return Verdict.passed()


def check_links(alloc: TenantAllocation, table: LinkTable | Topology,
                strict: bool = True) -> Verdict:
    """Sufficient link-allocation condition.

    Strict mode demands the exact theorem shape: all repeated leaves share
    one identical spine set of the required size, the remainder leaf's set
    nests inside it, and per-leaf link counts match per-leaf host counts
    (divided by the rounded oversubscription ratio on slimmed trees).
    Relaxed mode additionally accepts full ownership of every crossed
    sub-tree's up-links, which is how the whole-sub-tree heuristics isolate.
    """
    topo = table.topo if isinstance(table, LinkTable) else table
    counts = _leaf_counts(alloc, topo)
    l1 = _link_sets(alloc.l1_links)
    for leaf in l1:
        if leaf not in counts:
            return Verdict.failed("links.spurious-leaf", {"leaf": leaf})

    if len(counts) <= 1:
        if alloc.l1_links or alloc.l2_links:
            if strict:
                return Verdict.failed("links.single-leaf-with-links",
                                      {"l1": len(alloc.l1_links)})
        return Verdict.passed()

    subtrees = {topo.subtree_of_leaf(l) for l in counts}
    if not alloc.l2_links:
        if len(subtrees) > 1:
            return Verdict.failed("links.containment", {"subtrees": sorted(subtrees)})
        verdict = _common_set_check(counts, l1, _ceil_div(topo.m1, topo.w2), "links.l1")
        if verdict or strict:
            return verdict
        return _full_ownership_check(counts, l1, topo.w2, "links.l1")

    # level-3 allocation: whole leaves, plane-replicated level-2 groups
    full_leaf = set(range(topo.w2))
    for leaf in counts:
        if l1.get(leaf, set()) != full_leaf:
            if strict:
                return Verdict.failed("links.l1.whole-leaf", {"leaf": leaf})
            return Verdict.failed("links.l1.not-owned-whole", {"leaf": leaf})

    by_subtree_plane: dict[int, dict[int, set[int]]] = {}
    for sw, port in alloc.l2_links:
        k = topo.l2_subtree(sw)
        by_subtree_plane.setdefault(k, {}).setdefault(topo.l2_plane(sw), set()).add(port)
    sub_counts: dict[int, int] = {}
    for leaf in counts:
        k = topo.subtree_of_leaf(leaf)
        sub_counts[k] = sub_counts.get(k, 0) + 1
    for k, planes in by_subtree_plane.items():
        if k not in sub_counts:
            return Verdict.failed("links.l2.spurious-subtree", {"subtree": k})
        group_sets = list(planes.values())
        if len(planes) != topo.w2 or any(g != group_sets[0] for g in group_sets):
            return Verdict.failed("links.l2.asymmetric", {"subtree": k})
    for k in sub_counts:
        if k not in by_subtree_plane:
            return Verdict.failed("links.l2.missing", {"subtree": k})

    rep_sets = {k: next(iter(planes.values()))
                for k, planes in by_subtree_plane.items()}
    verdict = _common_set_check(sub_counts, rep_sets, _ceil_div(topo.m2, topo.w3),
                                "links.l2")
    if verdict or strict:
        return verdict
    return _full_ownership_check(sub_counts, rep_sets, topo.w3, "links.l2")


def isolation_sufficient(alloc: TenantAllocation, topo: Topology) -> Verdict:
    """Relaxed acceptance used by the log checker: the exact theorem shape
    or full ownership of every crossed unit's up-links."""
    placement = check_placement(alloc, topo, approximated=False)
    if not placement:
        return placement
    return check_links(alloc, topo, strict=False)


# ---------------------------------------------------------------------------
# Routability oracle
# ---------------------------------------------------------------------------


class OracleSizeError(ValueError):
    pass


class _Router:
    """Exact feasibility of one traffic permutation over allocated links."""

    def __init__(self, topo: Topology, alloc: TenantAllocation, capacity: int):
        self.topo = topo
        self.capacity = capacity
        self.leaf_ports = _link_sets(alloc.l1_links)
        self.l2 = {(sw, q) for sw, q in alloc.l2_links}
        self._cache: dict[tuple, bool] = {}

    def _options(self, a: int, b: int) -> list[tuple[int, int]]:
        topo = self.topo
        planes = self.leaf_ports.get(a, set()) & self.leaf_ports.get(b, set())
        ka, kb = topo.subtree_of_leaf(a), topo.subtree_of_leaf(b)
        if ka == kb:
            return [(j, -1) for j in sorted(planes)]
        out = []
        for j in sorted(planes):
            for q in range(topo.w3):
                if (topo.l2_index(ka, j), q) in self.l2 and \
                        (topo.l2_index(kb, j), q) in self.l2:
                    out.append((j, q))
        return out

    def routes(self, flows: list[tuple[int, int]]) -> bool:
        """flows are (src_leaf, dst_leaf) pairs, one unit of bandwidth each."""
        key = tuple(sorted(flows))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        used: dict[tuple, int] = {}
        options = [self._options(a, b) for a, b in flows]
        if any(not opts for opts in options):
            self._cache[key] = False
            return False
        order = sorted(range(len(flows)), key=lambda i: len(options[i]))
        result = self._assign(flows, options, order, 0, used)
        self._cache[key] = result
        return result

    def _fits(self, a: int, b: int, j: int, q: int, used: dict[tuple, int]) -> bool:
        topo = self.topo
        cap = self.capacity
        if used.get(("u1", a, j), 0) >= cap or used.get(("d1", b, j), 0) >= cap:
            return False
        if q >= 0:
            ka, kb = topo.subtree_of_leaf(a), topo.subtree_of_leaf(b)
            if used.get(("u2", ka, j, q), 0) >= cap:
                return False
            if used.get(("d2", kb, j, q), 0) >= cap:
                return False
        return True

    def _claim(self, a: int, b: int, j: int, q: int, used: dict[tuple, int], delta: int):
        topo = self.topo
        used[("u1", a, j)] = used.get(("u1", a, j), 0) + delta
        used[("d1", b, j)] = used.get(("d1", b, j), 0) + delta
        if q >= 0:
            ka, kb = topo.subtree_of_leaf(a), topo.subtree_of_leaf(b)
            used[("u2", ka, j, q)] = used.get(("u2", ka, j, q), 0) + delta
            used[("d2", kb, j, q)] = used.get(("d2", kb, j, q), 0) + delta

    def _assign(self, flows, options, order, depth, used) -> bool:
        if depth == len(order):
            return True
        i = order[depth]
        a, b = flows[i]
        for j, q in options[i]:
            if self._fits(a, b, j, q, used):
                self._claim(a, b, j, q, used, 1)
                if self._assign(flows, options, order, depth + 1, used):
                    return True
                self._claim(a, b, j, q, used, -1)
        return False


def routability_oracle(topo: Topology, alloc: TenantAllocation,
                       mode: str = "exhaustive", k: int = SAMPLED_DEFAULT_K,
                       seed: int = SAMPLED_DEFAULT_SEED,
                       capacity: int = 1) -> Verdict:
    """Route tenant traffic permutations over the allocated links.

    Each permutation is feasible when every inter-leaf flow gets a distinct
    allocated spine per leaf pair such that no allocated link carries more
    than ``capacity`` flows per direction; the decision per permutation is
    exact.  ``exhaustive`` tries all N! permutations (N <= 8); ``sampled``
    draws ``k`` of them with a fixed seed.
    """
    hosts = sorted(alloc.hosts)
    n = len(hosts)
    if mode == "exhaustive":
        if n > EXHAUSTIVE_HOST_LIMIT:
            raise OracleSizeError(
                f"exhaustive mode is limited to {EXHAUSTIVE_HOST_LIMIT} hosts, got {n}")
        perms: Iterable[tuple[int, ...]] = itertools.permutations(hosts)
    elif mode == "sampled":
        rng = random.Random(seed)
        perms = (tuple(rng.sample(hosts, n)) for _ in range(k))
    else:
        raise ValueError(f"unknown oracle mode {mode!r}")

    router = _Router(topo, alloc, capacity)
    leaf_of = topo.leaf_of_host
    for perm in perms:
        flows = []
        for src, dst in zip(hosts, perm):
            if src != dst and leaf_of(src) != leaf_of(dst):
                flows.append((leaf_of(src), leaf_of(dst)))
        if flows and not router.routes(flows):
            witness = [(s, d) for s, d in zip(hosts, perm)]
            return Verdict.failed("oracle.unroutable", {"permutation": witness})
    return Verdict.passed()


# ---------------------------------------------------------------------------
# Transaction-log replay
# ---------------------------------------------------------------------------


class LogViolation(Exception):
    def __init__(self, lineno: int, rule: str, witness: Any):
        super().__init__(f"line {lineno}: {rule}: {witness}")
        self.lineno = lineno
        self.rule = rule
        self.witness = witness


@dataclass
class LogSummary:
    add_count: int = 0
    rem_count: int = 0
    l1_added: int = 0
    l1_removed: int = 0
    l2_added: int = 0
    l2_removed: int = 0

    def lines(self) -> list[str]:
        return [
            f"-I- Checked {self.add_count} ADD and {self.rem_count} REM jobs",
            f"-I- Added/Rem {self.l1_added}/{self.l1_removed} L1PORTS and "
            f"{self.l2_added}/{self.l2_removed} L2PORTS",
        ]


def check_log(topo: Topology, entries: Iterable[tuple[int, Transaction]],
              strict: bool = False) -> LogSummary:
    """Replay ADD/REM records against a fresh table.

    Disjointness and conservation are asserted on every record.  Tenants
    holding links must satisfy the structural checks (exact theorem shape in
    strict mode; relaxed sufficiency otherwise); link-less tenants claim no
    isolation and are only tracked for host disjointness.
    """
    table = LinkTable(topo)
    summary = LogSummary()
    for lineno, tx in entries:
        if tx.kind == "ADD":
            alloc = tx.allocation
            assert alloc is not None
            if alloc.l1_links or alloc.l2_links:
                verdict = check_placement(alloc, topo, approximated=strict)
                if not verdict:
                    raise LogViolation(lineno, verdict.rule, verdict.witness)
                verdict = check_links(alloc, topo, strict=strict)
                if not verdict:
                    raise LogViolation(lineno, verdict.rule, verdict.witness)
            try:
                table.commit(alloc, tx.time)
            except AllocationError as exc:
                raise LogViolation(lineno, "conflict", str(exc)) from exc
            summary.add_count += 1
            summary.l1_added += len(alloc.l1_links)
            summary.l2_added += len(alloc.l2_links)
        else:
            try:
                released = table.release(tx.tenant_id, tx.time)
            except UnknownTenantError as exc:
                raise LogViolation(lineno, "unknown-tenant", tx.tenant_id) from exc
            summary.rem_count += 1
            summary.l1_removed += len(released.l1_links)
            summary.l2_removed += len(released.l2_links)
        try:
            table.check_conservation()
        except AssertionError as exc:
            raise LogViolation(lineno, "conservation", str(exc)) from exc
    return summary
