"""Strict-FIFO scheduling simulator over a request trace.

The head of the queue blocks everything behind it: a failed request is only
retried after a departure frees resources.  At equal timestamps departures
are processed before placements, and the head is retried until it fails,
which packs the cloud as tightly as the allocation algorithm allows.

Utilization integrates the *requested* host count of the active tenants over
the measurement window divided by the cloud's host-time capacity; hosts a
heuristic rounds up and strands are deliberately not credited.  The window
runs from the first head-of-line failure to the last successful placement
(the steady-state region between filling and draining).
"""

from __future__ import annotations

import heapq
import time as _time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .allocator import ALGORITHMS, AllocRequest
from .linkstate import LinkTable
from .topology import Topology, build_xgft
from .workload import TenantRequest, gen_requests, make_distribution


@dataclass
class SimReport:
    jobs_obtained: int = 0
    placed_jobs: int = 0
    unplaced_jobs: int = 0
    first_block_time: int | None = None
    last_placement_time: int | None = None
    considered_jobs: int = 0
    skipped_first: int = 0
    skipped_last: int = 0
    potential_host_time: float = 0.0
    actual_host_time: float = 0.0
    host_utilization: float = 0.0
    l1_link_utilization: float = 0.0
    l2_link_utilization: float = 0.0
    total_link_utilization: float = 0.0
    power_off_link_fraction: float = 0.0
    wall_clock: float = 0.0
    diagnostics: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        fb = self.first_block_time if self.first_block_time is not None else 0
        lp = self.last_placement_time if self.last_placement_time is not None else 0
        out = [
            f"-I- Obtained {self.jobs_obtained} jobs",
            f"-I- first waiting job at: {fb} lastJobPlacementTime {lp}",
            f"-I- Total potential hosts * time = {self.potential_host_time:.6g}",
            f"-I- Total considered jobs: {self.considered_jobs} "
            f"skip first: {self.skipped_first} last: {self.skipped_last}",
            f"-I- Total actual hosts * time = {self.actual_host_time:.6g}",
            f"-I- Host Utilization = {self.host_utilization:.2f}",
            f"-I- L1 Up Links Utilization  = {self.l1_link_utilization:.2f}",
            f"-I- L2 Up Links Utilization  = {self.l2_link_utilization:.2f}",
            f"-I- Total Links Utilization  = {self.total_link_utilization:.2f}",
            f"-I- Power Off Links = {self.power_off_link_fraction:.2f}",
            f"-I- Run Time = {self.wall_clock:.1f} sec",
        ]
        out[1:1] = [f"-W- {d}" for d in self.diagnostics]
        return out


@dataclass
class LatencySample:
    size: int
    seconds: float


@dataclass
class SimResult:
    report: SimReport
    table: LinkTable
    latencies: list[LatencySample] = field(default_factory=list)


def run_fifo(topo: Topology, trace: list[TenantRequest], algorithm: str = "laas",
             collect_latency: bool = False) -> SimResult:
    """Replay ``trace`` through ``algorithm`` under strict FIFO scheduling."""
    try:
        allocate = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; "
                         f"choose from {sorted(ALGORITHMS)}") from None
    started = _time.perf_counter()
    table = LinkTable(topo)
    report = SimReport(jobs_obtained=len(trace))
    result = SimResult(report, table)

    pending = deque(sorted(trace, key=lambda r: r.arrival))
    ready: deque[TenantRequest] = deque()
    departures: list[tuple[int, int, str, int]] = []  # (time, seq, id, size)
    seq = 0
    now = 0
    used_n = 0        # requested sizes of active tenants
    owned_hosts = 0
    owned_l1 = 0
    owned_l2 = 0
    head_waiting = False
    # piecewise-constant series of (time, used_n, owned_hosts, owned_l1, owned_l2)
    series: list[tuple[int, int, int, int, int]] = [(0, 0, 0, 0, 0)]
    residencies: list[tuple[int, int]] = []  # (placed_at, departs_at)

    def record():
        series.append((now, used_n, owned_hosts, owned_l1, owned_l2))

    while pending or ready or departures:
        ticks = []
        if ready:
            if departures:
                ticks.append(departures[0][0])
            elif not pending:
                report.diagnostics.append(
                    f"request {ready[0].id} (size {ready[0].size}) can never be "
                    f"placed: no departures pending")
                report.unplaced_jobs = len(ready)
                break
        if pending:
            ticks.append(pending[0].arrival)
        if not ticks and departures:
            ticks.append(departures[0][0])
        if not ticks:
            break
        now = max(now, min(ticks))

        while departures and departures[0][0] <= now:
            dep_t, _, tid, size = heapq.heappop(departures)
            released = table.release(tid, dep_t)
            used_n -= size
            owned_hosts -= len(released.hosts)
            owned_l1 -= len(released.l1_links)
            owned_l2 -= len(released.l2_links)
            head_waiting = False
        while pending and pending[0].arrival <= now:
            ready.append(pending.popleft())
        record()

        while ready and not head_waiting:
            req = ready[0]
            request = AllocRequest(str(req.id), req.size)
            if collect_latency:
                t0 = _time.perf_counter()
                alloc = allocate(table, request, time=now)
                result.latencies.append(
                    LatencySample(req.size, _time.perf_counter() - t0))
            else:
                alloc = allocate(table, request, time=now)
            if alloc is None:
                if report.first_block_time is None:
                    report.first_block_time = now
                head_waiting = True
                break
            ready.popleft()
            seq += 1
            heapq.heappush(departures, (now + req.duration, seq, str(req.id), req.size))
            used_n += req.size
            owned_hosts += len(alloc.hosts)
            owned_l1 += len(alloc.l1_links)
            owned_l2 += len(alloc.l2_links)
            report.placed_jobs += 1
            report.last_placement_time = now
            residencies.append((now, now + req.duration))
            record()

    report.wall_clock = _time.perf_counter() - started
    _finalize(topo, report, series, residencies)
    return result


def _finalize(topo: Topology, report: SimReport, series, residencies):
    if report.placed_jobs == 0:
        report.diagnostics.append("no jobs were placed; utilization undefined")
        return
    last_place = report.last_placement_time
    if report.first_block_time is not None:
        window = (report.first_block_time, last_place)
    else:
        # never blocked: measure from the moment the cloud is fully loaded
        # until it starts draining
        first_dep = min((r[1] for r in residencies), default=last_place)
        window = (last_place, max(first_dep, last_place))
    w_lo, w_hi = window
    length = w_hi - w_lo
    if length <= 0:
        report.diagnostics.append("measurement window is empty")
        report.considered_jobs = report.placed_jobs
        return

    host_time = 0.0
    l1_time = 0.0
    l2_time = 0.0
    owned_up_time = 0.0  # host uplinks + leaf uplinks + level-2 uplinks in use
    for (t0, used, owned_h, l1, l2), (t1, *_rest) in zip(series, series[1:]):
        lo, hi = max(t0, w_lo), min(t1, w_hi)
        if hi <= lo:
            continue
        dt = hi - lo
        host_time += used * dt
        l1_time += l1 * dt
        l2_time += l2 * dt
        owned_up_time += (owned_h + l1 + l2) * dt
    # the series is flat after its last point through the window end
    t_last, used, owned_h, l1, l2 = series[-1]
    if t_last < w_hi:
        dt = w_hi - max(t_last, w_lo)
        if dt > 0:
            host_time += used * dt
            l1_time += l1 * dt
            l2_time += l2 * dt
            owned_up_time += (owned_h + l1 + l2) * dt

    total_hosts = topo.n_hosts
    report.potential_host_time = float(total_hosts * length)
    report.actual_host_time = host_time
    report.host_utilization = 100.0 * host_time / (total_hosts * length)
    t_l1 = topo.total_l1_up_links
    t_l2 = topo.total_l2_up_links
    report.l1_link_utilization = 100.0 * l1_time / (t_l1 * length) if t_l1 else 0.0
    report.l2_link_utilization = 100.0 * l2_time / (t_l2 * length) if t_l2 else 0.0
    # link-count-weighted average of the two switch layers
    report.total_link_utilization = (
        100.0 * (l1_time + l2_time) / ((t_l1 + t_l2) * length) if t_l1 + t_l2 else 0.0)
    all_up = total_hosts + t_l1 + t_l2
    report.power_off_link_fraction = 100.0 * (1.0 - owned_up_time / (all_up * length))

    report.skipped_first = sum(1 for placed, dep in residencies if dep <= w_lo)
    report.skipped_last = sum(1 for placed, dep in residencies if placed >= w_hi)
    report.considered_jobs = (report.placed_jobs - report.skipped_first
                              - report.skipped_last)


# ---------------------------------------------------------------------------
# Parameter sweeps and allocation-latency measurement
# ---------------------------------------------------------------------------


def _sweep_one(args) -> dict:
    m, w, family, mean, algorithm, seed, count, duration_range = args
    topo = build_xgft(m, w)
    dist = make_distribution(family, mean, topo.n_hosts)
    trace = gen_requests(count, dist, duration_range, arrival_mode=0, seed=seed)
    res = run_fifo(topo, trace, algorithm)
    return {
        "mean": mean,
        "algorithm": algorithm,
        "seed": seed,
        "hostUtilization": round(res.report.host_utilization, 4),
        "powerOffLinkFraction": round(res.report.power_off_link_fraction, 4),
    }


SWEEP_FIELDS = ["mean", "algorithm", "seed", "hostUtilization", "powerOffLinkFraction"]


def sweep(topo: Topology, family: str, means: list[float], algorithms: list[str],
          seeds: list[int], count: int = 4000,
          duration_range: tuple[int, int] = (20, 3000),
          jobs: int = 1) -> list[dict]:
    """One ``run_fifo`` per (mean, algorithm, seed); returns plottable rows."""
    if not means or not algorithms or not seeds:
        raise ValueError("sweep grids must be nonempty")
    tasks = [(topo.m, topo.w, family, mean, alg, seed, count, duration_range)
             for mean in means for alg in algorithms for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]


@dataclass
class LatencyBucket:
    lo: int
    hi: int
    count: int
    mean_seconds: float
    max_seconds: float


def bucket_latencies(samples: list[LatencySample]) -> list[LatencyBucket]:
    """Group per-call latencies into power-of-two tenant-size buckets."""
    groups: dict[int, list[float]] = {}
    for s in samples:
        groups.setdefault(s.size.bit_length() - 1, []).append(s.seconds)
    out = []
    for b in sorted(groups):
        vals = groups[b]
        out.append(LatencyBucket(1 << b, (1 << (b + 1)) - 1, len(vals),
                                 sum(vals) / len(vals), max(vals)))
    return out


def measure_alloc_latency(topo: Topology, trace: list[TenantRequest],
                          algorithm: str = "laas") -> tuple[SimResult, list[LatencyBucket]]:
    res = run_fifo(topo, trace, algorithm, collect_latency=True)
    return res, bucket_latencies(res.latencies)
