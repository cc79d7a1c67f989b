"""Transaction-log grammar: one record per line.

    ADD <id> <t> H:<i,...> L1:<leaf.port,...> L2:<sw.port,...>
    REM <id> <t>

Lists are comma-separated and canonically sorted; an empty list is a bare
``H:`` / ``L1:`` / ``L2:`` token.  Line-oriented and diff-friendly, carrying
exactly the fields the log checker needs.
"""

from __future__ import annotations

from typing import Iterable, TextIO

from .linkstate import TenantAllocation, Transaction


class LogFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _render_pairs(pairs: list[tuple[int, int]]) -> str:
    return ",".join(f"{a}.{b}" for a, b in pairs)


def render(tx: Transaction) -> str:
    if tx.kind == "REM":
        return f"REM {tx.tenant_id} {tx.time}"
    a = tx.allocation
    assert a is not None
    hosts = ",".join(str(h) for h in a.hosts)
    return (f"ADD {tx.tenant_id} {tx.time} H:{hosts} "
            f"L1:{_render_pairs(a.l1_links)} L2:{_render_pairs(a.l2_links)}")


def write_log(transactions: Iterable[Transaction], stream: TextIO) -> int:
    count = 0
    for tx in transactions:
        stream.write(render(tx) + "\n")
        count += 1
    return count


def _parse_pairs(field: str, lineno: int) -> list[tuple[int, int]]:
    if not field:
        return []
    out = []
    for item in field.split(","):
        try:
            a, b = item.split(".")
            out.append((int(a), int(b)))
        except ValueError as exc:
            raise LogFormatError(lineno, f"bad link token {item!r}") from exc
    return out


def parse_line(line: str, lineno: int) -> Transaction:
    parts = line.split()
    if not parts:
        raise LogFormatError(lineno, "empty record")
    kind = parts[0]
    if kind == "REM":
        if len(parts) != 3:
            raise LogFormatError(lineno, f"REM needs id and time: {line!r}")
        return Transaction("REM", parts[1], int(parts[2]))
    if kind != "ADD":
        raise LogFormatError(lineno, f"unknown record kind {kind!r}")
    if len(parts) != 6 or not parts[3].startswith("H:") \
            or not parts[4].startswith("L1:") or not parts[5].startswith("L2:"):
        raise LogFormatError(lineno, f"malformed ADD record: {line!r}")
    tid, t = parts[1], int(parts[2])
    hosts_field = parts[3][2:]
    hosts = [int(h) for h in hosts_field.split(",")] if hosts_field else []
    if not hosts:
        raise LogFormatError(lineno, "ADD with no hosts")
    l1 = _parse_pairs(parts[4][3:], lineno)
    l2 = _parse_pairs(parts[5][3:], lineno)
    alloc = TenantAllocation(tid, len(hosts), hosts, l1, l2)
    return Transaction("ADD", tid, t, alloc)


def read_log(stream: TextIO) -> list[tuple[int, Transaction]]:
    """Parse a log stream into (line number, transaction) pairs."""
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        out.append((lineno, parse_line(line, lineno)))
    return out
