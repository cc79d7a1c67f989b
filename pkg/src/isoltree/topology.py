"""Fat-tree topology model with canonical indexing and physical name mapping.

Trees are XGFTs described by per-level child counts ``m = (m1, m2, m3)`` and
parent counts ``w = (w1, w2, w3)``.  Two-level trees are normalized to three
levels with a dummy top (``m3 = w3 = 1``) so the rest of the engine handles
exactly one shape.

Canonical indexing (all 0-based, left to right):

* host ``h``           -> leaf ``h // m1``
* leaf ``l``           -> 2-level sub-tree ``l // m2``
* level-2 switch       -> ``subtree * w2 + j`` where ``j`` is the plane index
* level-3 switch       -> ``j * w3 + q`` (plane ``j``, spine group ``q``)

Leaf up-port ``p`` connects the leaf to level-2 switch ``p`` of its sub-tree;
level-2 up-port ``q`` connects switch ``(k, j)`` to level-3 switch ``(j, q)``.
Ports are 0-based inside the engine; :class:`NameMap` translates to the
1-based physical numbering used by external configuration files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

MAX_PORT_WIDTH = 64  # up-port masks are single machine words


class TopologyError(ValueError):
    pass


class NameMapError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """An XGFT normalized to 3 levels. Immutable; safe to share."""

    m: tuple[int, int, int]
    w: tuple[int, int, int]

    @property
    def m1(self) -> int:
        return self.m[0]

    @property
    def m2(self) -> int:
        return self.m[1]

    @property
    def m3(self) -> int:
        return self.m[2]

    @property
    def w2(self) -> int:
        return self.w[1]

    @property
    def w3(self) -> int:
        return self.w[2]

    @property
    def dummy_top(self) -> bool:
        """True when this is a 2-level tree carried in 3-level form."""
        return self.m[2] == 1 and self.w[2] == 1

    @property
    def n_hosts(self) -> int:
        return self.m[0] * self.m[1] * self.m[2]

    @property
    def n_leaves(self) -> int:
        return self.m[1] * self.m[2]

    @property
    def n_l2(self) -> int:
        return self.w[1] * self.m[2]

    @property
    def n_l3(self) -> int:
        # A dummy top is presented as a single conceptual root switch.
        if self.dummy_top:
            return 1
        return self.w[1] * self.w[2]

    @property
    def total_l1_up_links(self) -> int:
        return self.n_leaves * self.w2

    @property
    def total_l2_up_links(self) -> int:
        return self.n_l2 * self.w3

    @property
    def subtree_capacity(self) -> tuple[int, int, int, int]:
        """Hosts under one level-l sub-tree, for l = 0..3."""
        m1, m2, m3 = self.m
        return (0, m1, m1 * m2, m1 * m2 * m3)

    def oversub_ratio(self, level: int) -> float:
        """Down-link to up-link ratio at ``level`` (1 or 2)."""
        if level not in (1, 2):
            raise TopologyError("oversubscription defined for levels 1 and 2")
        return self.m[level - 1] / self.w[level]

    @property
    def full_bisection(self) -> bool:
        return self.m[0] == self.w[1] and (self.dummy_top or self.m[1] == self.w[2])

    # -- canonical index helpers -------------------------------------------

    def leaf_of_host(self, host: int) -> int:
        return host // self.m1

    def subtree_of_leaf(self, leaf: int) -> int:
        return leaf // self.m2

    def hosts_of_leaf(self, leaf: int) -> range:
        return range(leaf * self.m1, (leaf + 1) * self.m1)

    def leaves_of_subtree(self, subtree: int) -> range:
        return range(subtree * self.m2, (subtree + 1) * self.m2)

    def l2_index(self, subtree: int, plane: int) -> int:
        return subtree * self.w2 + plane

    def l2_subtree(self, l2: int) -> int:
        return l2 // self.w2

    def l2_plane(self, l2: int) -> int:
        return l2 % self.w2


def build_xgft(m: Iterable[int], w: Iterable[int]) -> Topology:
    """Build a topology from level vectors of length 2 or 3.

    A 2-level request is normalized by appending ``m3 = w3 = 1``.  Rejects
    anything with more than 3 levels, non-positive entries, ``w1 != 1`` or
    switch radixes beyond the engine's mask width.
    """
    m = tuple(int(x) for x in m)
    w = tuple(int(x) for x in w)
    if len(m) != len(w):
        raise TopologyError(f"level vectors differ in length: {m} vs {w}")
    if len(m) not in (2, 3):
        raise TopologyError(f"only 2- and 3-level trees are supported, got h={len(m)}")
    if any(x < 1 for x in m) or any(x < 1 for x in w):
        raise TopologyError("all child/parent counts must be >= 1")
    if w[0] != 1:
        raise TopologyError("hosts have exactly one uplink (w1 must be 1)")
    if len(m) == 2:
        m = m + (1,)
        w = w + (1,)
    if w[1] > MAX_PORT_WIDTH or w[2] > MAX_PORT_WIDTH:
        raise TopologyError(f"up-port counts above {MAX_PORT_WIDTH} are not supported")
    return Topology(m, w)


def min_level(topo: Topology, n: int) -> tuple[int, int]:
    """Smallest tree level whose sub-tree holds ``n`` hosts, and how many
    sub-trees of the level below are needed.

    Returns ``(l_min, s)`` with ``s = ceil(n / R[l_min - 1])``; for
    ``l_min == 1`` the tenant fits in a single leaf and ``s`` is 1.
    """
    if n < 1:
        raise ValueError("host count must be >= 1")
    caps = topo.subtree_capacity
    if n > caps[3]:
        raise TopologyError(f"request for {n} hosts exceeds cloud of {caps[3]}")
    for level in (1, 2, 3):
        if caps[level - 1] < n <= caps[level]:
            if level == 1:
                return 1, 1
            return level, math.ceil(n / caps[level - 1])
    raise AssertionError("unreachable: capacities cover [1, total]")


# ---------------------------------------------------------------------------
# Physical name mapping
# ---------------------------------------------------------------------------

NAME_MAP_HEADER = "# lvl,swIdx,name,UP,upPorts,DN,dnPorts"


@dataclass
class _Device:
    name: str
    up_ports: list[int]
    dn_ports: list[int]


@dataclass
class NameMap:
    """Bidirectional map between canonical indices and physical names/ports.

    ``devices[level][index]`` holds the physical name plus the 1-based
    physical numbers of the up and down ports, in engine port order.
    """

    topo: Topology
    devices: dict[int, dict[int, _Device]]
    _by_name: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self._by_name:
            for lvl, row in self.devices.items():
                for idx, dev in row.items():
                    self._by_name[dev.name] = (lvl, idx)

    def name_of(self, level: int, index: int) -> str:
        return self.devices[level][index].name

    def index_of(self, name: str) -> tuple[int, int]:
        return self._by_name[name]

    def up_port(self, level: int, index: int, engine_port: int) -> int:
        """Physical number of ``engine_port``-th up port of a device."""
        return self.devices[level][index].up_ports[engine_port]

    @property
    def up_port_count(self) -> int:
        return sum(len(d.up_ports) for row in self.devices.values() for d in row.values())

    @property
    def dn_port_count(self) -> int:
        return sum(len(d.dn_ports) for row in self.devices.values() for d in row.values())


def _expected_port_counts(topo: Topology, level: int) -> tuple[int, int]:
    if level == 0:
        return 1, 0
    if level == 1:
        return topo.w2, topo.m1
    if level == 2:
        return (0 if topo.dummy_top else topo.w3), topo.m2
    if level == 3:
        return 0, topo.m3
    raise NameMapError(f"level {level} out of range")


def _device_count(topo: Topology, level: int) -> int:
    if level == 0:
        return topo.n_hosts
    if level == 1:
        return topo.n_leaves
    if level == 2:
        return topo.n_l2
    if level == 3:
        return 0 if topo.dummy_top else topo.w2 * topo.w3
    return 0


def load_name_map(stream: TextIO, topo: Topology) -> NameMap:
    """Parse the name-mapping CSV against ``topo``.

    Format: a comment header line, then one row per host and switch,
    ``lvl,swIdx,name,UP,<ports>,DN,<ports>`` with trailing empty fields
    tolerated.  Rows for dummy-top levels must be absent.
    """
    devices: dict[int, dict[int, _Device]] = {0: {}, 1: {}, 2: {}, 3: {}}
    saw_header = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            saw_header = True
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 3:
            raise NameMapError(f"line {lineno}: expected lvl,swIdx,name,...: {line!r}")
        try:
            level = int(fields[0])
            index = int(fields[1])
        except ValueError as exc:
            raise NameMapError(f"line {lineno}: bad level/index: {line!r}") from exc
        name = fields[2]
        if not name:
            raise NameMapError(f"line {lineno}: empty device name")
        up: list[int] = []
        dn: list[int] = []
        target = None
        for tok in fields[3:]:
            if tok == "UP":
                target = up
            elif tok == "DN":
                target = dn
            elif tok == "":
                continue
            else:
                if target is None:
                    raise NameMapError(f"line {lineno}: port number before UP/DN keyword")
                target.append(int(tok))
        if level not in (0, 1, 2, 3):
            raise NameMapError(f"line {lineno}: level {level} out of range")
        count = _device_count(topo, level)
        if index < 0 or index >= count:
            raise NameMapError(
                f"line {lineno}: level {level} index {index} outside 0..{count - 1}"
            )
        if index in devices[level]:
            raise NameMapError(f"line {lineno}: duplicate entry for level {level} index {index}")
        exp_up, exp_dn = _expected_port_counts(topo, level)
        if len(up) != exp_up or len(dn) != exp_dn:
            raise NameMapError(
                f"line {lineno}: device {name!r} has {len(up)} up/{len(dn)} down ports, "
                f"expected {exp_up}/{exp_dn}"
            )
        devices[level][index] = _Device(name, up, dn)
    if not saw_header:
        raise NameMapError("missing header line (expected leading '#' comment)")

    names: set[str] = set()
    for level in (0, 1, 2, 3):
        count = _device_count(topo, level)
        missing = [i for i in range(count) if i not in devices[level]]
        if missing:
            raise NameMapError(
                f"level {level}: missing rows for indices {missing[:8]}"
                + ("..." if len(missing) > 8 else "")
            )
        extra = [i for i in devices[level] if i >= count]
        if extra:
            raise NameMapError(f"level {level}: rows for nonexistent indices {extra}")
        for dev in devices[level].values():
            if dev.name in names:
                raise NameMapError(f"duplicate device name {dev.name!r}")
            names.add(dev.name)
    return NameMap(topo, devices)


def default_name_map(topo: Topology) -> NameMap:
    """Synthetic map matching the conventional naming: hosts ``comp-<i+1>``,
    switches ``SW_L<level>_<index>``, up ports first then down ports."""
    devices: dict[int, dict[int, _Device]] = {0: {}, 1: {}, 2: {}, 3: {}}
    for h in range(topo.n_hosts):
        devices[0][h] = _Device(f"comp-{h + 1}", [1], [])
    for level in (1, 2, 3):
        exp_up, exp_dn = _expected_port_counts(topo, level)
        for i in range(_device_count(topo, level)):
            up = list(range(1, exp_up + 1))
            dn = list(range(exp_up + 1, exp_up + exp_dn + 1))
            devices[level][i] = _Device(f"SW_L{level}_{i}", up, dn)
    return NameMap(topo, devices)


def write_name_map(nm: NameMap, stream: TextIO) -> None:
    stream.write(NAME_MAP_HEADER + "\n")
    for level in (0, 1, 2, 3):
        for idx in sorted(nm.devices[level]):
            dev = nm.devices[level][idx]
            parts = [str(level), str(idx), dev.name]
            if dev.up_ports:
                parts.append("UP")
                parts.extend(str(p) for p in dev.up_ports)
            if dev.dn_ports:
                parts.append("DN")
                parts.extend(str(p) for p in dev.dn_ports)
            stream.write(",".join(parts) + "\n")
