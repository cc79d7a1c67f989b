"""Cloud-controller command scripts and SDN port-group configuration.

Every tenant state change produces a numbered shell script under ``OSCfg/``
(aggregate create/teardown around per-host membership commands) and a full
rewrite of ``SDNCfg/groups.conf`` describing, per tenant, its host ports and
the pmask of up-ports it owns on each switch.  pmask bit k corresponds to
physical port number k, so ports {1,2} render as ``0x6``.

Files are written atomically (temp + rename): external consumers poll these
directories.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .linkstate import TenantAllocation
from .topology import NameMap, Topology


def atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, str(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _tenant_sort_key(tid: str):
    return (0, int(tid)) if tid.isdigit() else (1, tid)


def host_names(alloc: TenantAllocation, names: NameMap) -> list[str]:
    return [names.name_of(0, h) for h in sorted(alloc.hosts)]


def add_script(k: int, alloc: TenantAllocation, names: NameMap) -> str:
    tid = alloc.tenant_id
    log = f"OSCfg/cmd-{k}.log"
    lines = [
        "#!/bin/bash",
        "#",
        f"# Adding tenant {tid} to OpenStack",
        "#",
        f"echo Adding tenant {tid} to OpenStack > {log}",
        f"keystone tenant-create --name laas-tenant-{tid} "
        f"--description \"LaaS Tenant {tid}\" >> {log}",
        f"tenantId=`keystone tenant-get laas-tenant-{tid} | "
        f"awk '/ id /{{print $4}}'` >> {log}",
        f"nova aggregate-create laas-aggr-{tid} >> {log}",
        f"nova aggregate-set-metadata laas-aggr-{tid} "
        f"filter_tenant_id=$tenantId >> {log}",
    ]
    for name in host_names(alloc, names):
        lines.append(f"nova aggregate-add-host laas-aggr-{tid} {name} >> {log}")
    return "\n".join(lines) + "\n"


def remove_script(k: int, alloc: TenantAllocation, names: NameMap) -> str:
    tid = alloc.tenant_id
    log = f"OSCfg/cmd-{k}.log"
    lines = [
        "#!/bin/bash",
        "#",
        f"# Removing tenant {tid} from OpenStack",
        "#",
    ]
    for name in host_names(alloc, names):
        lines.append(f"nova aggregate-remove-host laas-aggr-{tid} {name} >> {log}")
    lines.append(f"nova aggregate-delete laas-aggr-{tid} >> {log}")
    lines.append(f"keystone tenant-delete laas-tenant-{tid} >> {log}")
    return "\n".join(lines) + "\n"


def _pmask(physical_ports: list[int]) -> str:
    mask = 0
    for p in physical_ports:
        mask |= 1 << p
    return f"0x{mask:x}"


def switch_pmasks(alloc: TenantAllocation, topo: Topology,
                  names: NameMap) -> list[tuple[str, str]]:
    """(switch name, pmask) pairs for every switch the tenant owns ports on."""
    per_switch: dict[tuple[int, int], list[int]] = {}
    for leaf, port in alloc.l1_links:
        per_switch.setdefault((1, leaf), []).append(names.up_port(1, leaf, port))
    for sw, port in alloc.l2_links:
        per_switch.setdefault((2, sw), []).append(names.up_port(2, sw, port))
    out = []
    for (level, idx) in sorted(per_switch):
        out.append((names.name_of(level, idx), _pmask(per_switch[(level, idx)])))
    return out


def groups_conf(tenants: dict[str, TenantAllocation], topo: Topology,
                names: NameMap) -> str:
    """Render the full port-group file for the current tenant set."""
    blocks = []
    for tid in sorted(tenants, key=_tenant_sort_key):
        alloc = tenants[tid]
        entries = [f"name={name}/U1:P{names.up_port(0, h, 0)}"
                   for h, name in zip(sorted(alloc.hosts), host_names(alloc, names))]
        block = ["port-group", f"name: T{tid}-hcas", "obj_list:"]
        block += [f"    {e}" for e in entries[:-1]]
        block.append(f"    {entries[-1]};")
        block.append("end-port-group")
        blocks.append("\n".join(block))
        switches = switch_pmasks(alloc, topo, names)
        if switches:
            block = ["port-group", f"name: T{tid}-switches", "obj_list:"]
            rows = [f"name={name}/U1 pmask={mask}" for name, mask in switches]
            block += [f"    {r}" for r in rows[:-1]]
            block.append(f"    {rows[-1]};")
            block.append("end-port-group")
            blocks.append("\n".join(block))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


class ConfigWriter:
    """Numbered cmd-K.log scripts plus a regenerated SDN groups file."""

    def __init__(self, base_dir: str | Path, topo: Topology, names: NameMap):
        self.base = Path(base_dir)
        self.topo = topo
        self.names = names
        self.counter = 0

    @property
    def os_dir(self) -> Path:
        return self.base / "OSCfg"

    @property
    def sdn_dir(self) -> Path:
        return self.base / "SDNCfg"

    def tenant_added(self, alloc: TenantAllocation,
                     tenants: dict[str, TenantAllocation]) -> Path:
        self.counter += 1
        path = self.os_dir / f"cmd-{self.counter}.log"
        atomic_write(path, add_script(self.counter, alloc, self.names))
        self._regen_sdn(tenants)
        return path

    def tenant_removed(self, alloc: TenantAllocation,
                       tenants: dict[str, TenantAllocation]) -> Path:
        self.counter += 1
        path = self.os_dir / f"cmd-{self.counter}.log"
        atomic_write(path, remove_script(self.counter, alloc, self.names))
        self._regen_sdn(tenants)
        return path

    def _regen_sdn(self, tenants: dict[str, TenantAllocation]) -> None:
        atomic_write(self.sdn_dir / "groups.conf",
                     groups_conf(tenants, self.topo, self.names))
