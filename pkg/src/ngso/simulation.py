"""Packet-level discrete-event simulation of ground-to-ground traffic.

Every site emits packets to uniformly chosen other sites. Packets follow
unipath source routes on the snapshot that is current when they are emitted;
if the topology changes while a packet is in flight it finishes its current
hop and is re-routed from there on the new snapshot. Each link is a FIFO
transmitter. In ``"shared"`` mode both directions of a link share one
transmitter (the link rate is the capacity of the edge, as in the max-load
formula); ``"duplex"`` gives each direction its own.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT
from .routing import (
    DEFAULT_PACKET_BITS,
    FifoLink,
    RoutingGraph,
    RoutingMetric,
    edge_key,
    edge_weights,
    shortest_routes_from,
)


@dataclass
class PacketRecord:
    id: int
    src: int
    dst: int
    created_s: float
    delivered_s: float
    waiting_s: float
    transmission_s: float
    propagation_s: float
    hops: int

    @property
    def total_s(self) -> float:
        return self.waiting_s + self.transmission_s + self.propagation_s

    def to_json(self) -> str:
        return json.dumps({**self.__dict__, "total_s": self.total_s}, sort_keys=True)


@dataclass
class SimulationResult:
    generated: int
    delivered: int
    in_flight: int
    dropped: int
    unroutable: int
    mean_waiting_s: float
    mean_transmission_s: float
    mean_propagation_s: float
    records: list[PacketRecord] = field(default_factory=list, repr=False)
    probe_times: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    probe_backlog: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def mean_total_s(self) -> float:
        return self.mean_waiting_s + self.mean_transmission_s + self.mean_propagation_s

    @property
    def mean_prop_plus_tx_s(self) -> float:
        return self.mean_transmission_s + self.mean_propagation_s


class _Snapshot:
    def __init__(self, graph: RoutingGraph, metric: RoutingMetric) -> None:
        self.graph = graph
        self.weights = edge_weights(graph, metric)
        self._trees: dict[int, dict] = {}

    def route(self, src: int, dst: int):
        tree = self._trees.get(src)
        if tree is None:
            tree = self._trees[src] = shortest_routes_from(self.graph, src, self.weights)
        r = tree.get(dst)
        return None if r is None else r.vertices


def simulate_packets(
    schedule: RoutingGraph | Sequence[tuple[float, RoutingGraph]],
    rate_pps: float,
    metric: RoutingMetric,
    horizon_s: float,
    seed: int,
    packet_bits: float = DEFAULT_PACKET_BITS,
    arrivals: str = "poisson",
    queue_mode: str = "shared",
    drain: bool = True,
    probe_interval_s: float | None = None,
    probe_edges: Sequence[tuple[int, int]] = (),
    keep_records: bool = False,
) -> SimulationResult:
    """Run the simulation; deterministic for a given ``seed``.

    ``schedule`` is a single graph or ``(start_time, graph)`` pairs sorted by
    time. Generation stops at ``horizon_s``; with ``drain`` the packets still
    in the network are then carried to their destination. Probes sample the
    backlog (seconds of queued work) of ``probe_edges`` every
    ``probe_interval_s`` up to the horizon.
    """
    if rate_pps < 0 or horizon_s <= 0:
        raise ValueError("need rate_pps >= 0 and horizon_s > 0")
    if arrivals not in ("poisson", "deterministic"):
        raise ValueError("arrivals must be 'poisson' or 'deterministic'")
    if queue_mode not in ("shared", "duplex"):
        raise ValueError("queue_mode must be 'shared' or 'duplex'")
    if isinstance(schedule, RoutingGraph):
        schedule = [(0.0, schedule)]
    starts = [float(s) for s, _ in schedule]
    snaps = [_Snapshot(g, metric) for _, g in schedule]

    def snap_index(now: float) -> int:
        return max(0, int(np.searchsorted(starts, now, side="right")) - 1)

    sites = snaps[0].graph.site_vertices
    n_sites = len(sites)
    seq = 0
    events: list = []

    def push(t: float, kind: int, payload) -> None:
        nonlocal seq
        heapq.heappush(events, (t, seq, kind, payload))
        seq += 1

    gen_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_sites)]

    def next_gap(k: int) -> float:
        if arrivals == "deterministic":
            return 1.0 / rate_pps
        return float(gen_rngs[k].exponential(1.0 / rate_pps))

    GEN, HOP, PROBE = 0, 1, 2
    if rate_pps > 0 and n_sites > 1:
        for k in range(n_sites):
            first = (k + 1) / (n_sites + 1) / rate_pps if arrivals == "deterministic" else next_gap(k)
            if first < horizon_s:
                push(first, GEN, k)
    if probe_interval_s:
        for t in np.arange(probe_interval_s, horizon_s + 1e-12, probe_interval_s):
            push(float(t), PROBE, None)

    links: dict = {}
    probe_t: list[float] = []
    probe_b: dict[tuple[int, int], list[float]] = {e: [] for e in probe_edges}
    records: list[PacketRecord] = []
    generated = delivered = dropped = unroutable = 0
    sum_w = sum_tx = sum_prop = 0.0
    next_id = 0

    def link_state(u: int, v: int) -> FifoLink:
        key = edge_key(u, v) if queue_mode == "shared" else (u, v)
        q = links.get(key)
        if q is None:
            q = links[key] = FifoLink()
        return q

    def transmit(now: float, pkt: dict) -> None:
        nonlocal dropped
        idx = snap_index(now)
        here = pkt["route"][pkt["pos"]]
        if idx != pkt["snap"]:
            new = snaps[idx].route(here, pkt["dst"]) if here in snaps[idx].graph.vertices else None
            if new is None:
                dropped += 1
                return
            pkt["route"], pkt["pos"], pkt["snap"] = new, 0, idx
        nxt = pkt["route"][pkt["pos"] + 1]
        edge = snaps[pkt["snap"]].graph.edge(here, nxt)
        tx = packet_bits / edge.rate_bps
        wait = link_state(here, nxt).enqueue(now, tx)
        prop = edge.distance_m / SPEED_OF_LIGHT
        pkt["w"] += wait
        pkt["tx"] += tx
        pkt["prop"] += prop
        pkt["pos"] += 1
        pkt["hops"] += 1
        push(now + wait + tx + prop, HOP, pkt)

    while events:
        now, _, kind, payload = heapq.heappop(events)
        if not drain and now > horizon_s:
            break
        if kind == GEN:
            k = payload
            rng = gen_rngs[k]
            other = int(rng.integers(n_sites - 1))
            dst_k = other if other < k else other + 1
            src, dst = sites[k], sites[dst_k]
            idx = snap_index(now)
            route = snaps[idx].route(src, dst)
            if route is None:
                unroutable += 1
            else:
                generated += 1
                pkt = {"id": next_id, "src": src, "dst": dst, "t0": now, "route": route, "pos": 0,
                       "snap": idx, "w": 0.0, "tx": 0.0, "prop": 0.0, "hops": 0}
                next_id += 1
                transmit(now, pkt)
            t_next = now + next_gap(k)
            if t_next < horizon_s:
                push(t_next, GEN, k)
        elif kind == HOP:
            pkt = payload
            if pkt["route"][pkt["pos"]] == pkt["dst"]:
                delivered += 1
                sum_w += pkt["w"]
                sum_tx += pkt["tx"]
                sum_prop += pkt["prop"]
                if keep_records:
                    records.append(PacketRecord(pkt["id"], pkt["src"], pkt["dst"], pkt["t0"], now,
                                                pkt["w"], pkt["tx"], pkt["prop"], pkt["hops"]))
            else:
                transmit(now, pkt)
        else:
            probe_t.append(now)
            for e in probe_edges:
                q = links.get(tuple(e) if queue_mode == "duplex" else edge_key(*e))
                probe_b[e].append(q.backlog(now) if q is not None else 0.0)

    in_flight = generated - delivered - dropped
    n = max(delivered, 1)
    return SimulationResult(
        generated, delivered, in_flight, dropped, unroutable,
        sum_w / n, sum_tx / n, sum_prop / n, records,
        np.asarray(probe_t), {e: np.asarray(v) for e, v in probe_b.items()},
    )
