"""RESTful tenant lifecycle over the allocation engine.

POST /tenants        form fields id, n -> TenantSummary JSON or failure body
GET /tenants         map of id -> TenantSummary
GET /tenants/{id}/hosts     sorted physical host names
GET /tenants/{id}/l1Ports   [{"pNum": .., "sName": ..}, ...]
DELETE /tenants/{id}        204

Every successful state change writes a numbered cloud-controller script and
regenerates the SDN group files.  Requests mutate through a single lock; the
transaction log doubles as the persistence story (replay on startup).
"""

from __future__ import annotations

import threading
import urllib.parse
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .allocator import AllocRequest, laas_allocate
from .configgen import ConfigWriter
from .linkstate import LinkTable, TenantAllocation
from .topology import NameMap, Topology, default_name_map
from . import translog

DEFAULT_PORT = 12345


def tenant_summary(alloc: TenantAllocation) -> dict:
    return {
        "N": alloc.n,
        "hosts": len(alloc.hosts),
        "l1Ports": len(alloc.l1_links),
        "l2Ports": len(alloc.l2_links),
    }


class ServiceState:
    def __init__(self, topo: Topology, names: NameMap | None = None,
                 out_dir: str | Path = ".", log_path: str | Path | None = None,
                 replay: bool = False):
        self.topo = topo
        self.names = names or default_name_map(topo)
        self.table = LinkTable(topo)
        self.writer = ConfigWriter(out_dir, topo, self.names)
        self.lock = threading.Lock()
        self.clock = 0
        self.log_path = Path(log_path) if log_path else None
        if replay and self.log_path and self.log_path.exists():
            self._replay()

    def _replay(self) -> None:
        assert self.log_path is not None
        with self.log_path.open() as fh:
            for _, tx in translog.read_log(fh):
                if tx.kind == "ADD":
                    assert tx.allocation is not None
                    self.table.commit(tx.allocation, tx.time)
                else:
                    self.table.release(tx.tenant_id, tx.time)
                self.clock = max(self.clock, tx.time + 1)

    def _append_log(self) -> None:
        if self.log_path is None:
            return
        tx = self.table.transactions[-1]
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a") as fh:
            fh.write(translog.render(tx) + "\n")

    def create(self, tenant_id: str, n: int) -> TenantAllocation | None:
        with self.lock:
            if tenant_id in self.table.tenants:
                raise KeyError(tenant_id)
            alloc = laas_allocate(self.table, AllocRequest(tenant_id, n),
                                  time=self.clock)
            if alloc is None:
                return None
            self.clock += 1
            self._append_log()
            self.writer.tenant_added(alloc, self.table.tenants)
            return alloc

    def delete(self, tenant_id: str) -> TenantAllocation:
        with self.lock:
            alloc = self.table.release(tenant_id, self.clock)
            self.clock += 1
            self._append_log()
            self.writer.tenant_removed(alloc, self.table.tenants)
            return alloc


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="tenant link-isolation service")
    app.state.engine = state

    @app.get("/tenants")
    def list_tenants():
        return {tid: tenant_summary(a) for tid, a in state.table.tenants.items()}

    @app.post("/tenants")
    async def create_tenant(request: Request):
        # parsed by hand: form bodies arrive as application/x-www-form-urlencoded
        body = (await request.body()).decode()
        fields = urllib.parse.parse_qs(body)
        tenant_id = fields.get("id", [None])[0]
        n_raw = fields.get("n", [None])[0]
        if not tenant_id or n_raw is None:
            return JSONResponse({"message": "fields 'id' and 'n' are required"},
                                status_code=400)
        try:
            n = int(n_raw)
        except ValueError:
            return JSONResponse({"message": f"bad host count {n_raw!r}"},
                                status_code=400)
        if n < 1:
            return JSONResponse({"message": "host count must be >= 1"},
                                status_code=400)
        try:
            alloc = state.create(tenant_id, n)
        except KeyError:
            return JSONResponse({"message": f"Tenant {tenant_id} already exists"},
                                status_code=409)
        if alloc is None:
            return JSONResponse({"message": f"Fail to allocate tenant {tenant_id}"},
                                status_code=409)
        return tenant_summary(alloc)

    @app.get("/tenants/{tenant_id}/hosts")
    def tenant_hosts(tenant_id: str):
        alloc = state.table.tenants.get(tenant_id)
        if alloc is None:
            return JSONResponse({"message": f"No tenant {tenant_id}"}, status_code=404)
        return [state.names.name_of(0, h) for h in sorted(alloc.hosts)]

    @app.get("/tenants/{tenant_id}/l1Ports")
    def tenant_l1_ports(tenant_id: str):
        alloc = state.table.tenants.get(tenant_id)
        if alloc is None:
            return JSONResponse({"message": f"No tenant {tenant_id}"}, status_code=404)
        return [{"pNum": state.names.up_port(1, leaf, port),
                 "sName": state.names.name_of(1, leaf)}
                for leaf, port in sorted(alloc.l1_links)]

    @app.delete("/tenants/{tenant_id}", status_code=204)
    def delete_tenant(tenant_id: str):
        try:
            state.delete(tenant_id)
        except KeyError:
            return JSONResponse({"message": f"No tenant {tenant_id}"}, status_code=404)
        return Response(status_code=204)

    return app


def serve(state: ServiceState, host: str = "127.0.0.1",
          port: int = DEFAULT_PORT) -> None:
    import uvicorn

    print(f"-I- Defined {state.names.up_port_count} up ports and "
          f"{state.names.dn_port_count} down port mappings")
    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
