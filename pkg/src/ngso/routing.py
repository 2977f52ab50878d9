"""Ground-to-ground routing over the satellite network.

Vertices are integers: satellites keep their flat constellation index and
ground site ``k`` becomes vertex ``n_sats + k``. Links are undirected.
"""
from __future__ import annotations

import csv
import enum
import heapq
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT
from .coverage import CoverageSpec, GroundSite, elevations
from .link import GSL, ISL, LinkParams, free_space_path_loss, link_rate
from .matching import Matching
from .orbits import Constellation

DEFAULT_PACKET_BITS = 1500 * 8


# -- ground segment --------------------------------------------------------------------


def load_sites(source: str | None = None) -> list[GroundSite]:
    """Read ``id,latitude_deg,longitude_deg`` rows; ``None`` or ``"ksat"`` loads the
    bundled 23-site KSAT-like ground segment."""
    if source in (None, "ksat"):
        text = resources.files("ngso.data").joinpath("ksat_like_sites.csv").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    rows = csv.DictReader(io.StringIO(text))
    return [GroundSite.from_degrees(float(r["latitude_deg"]), float(r["longitude_deg"]), 0.0, r["id"])
            for r in rows]


# -- graph -------------------------------------------------------------------------------


class EdgeKind(str, enum.Enum):
    GSL = "gsl"
    INTRA = "intra"
    INTER = "inter"


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    kind: EdgeKind
    distance_m: float
    rate_bps: float
    carrier_hz: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class RoutingGraph:
    t: float
    n_sats: int
    sites: list[GroundSite]
    edges: dict[tuple[int, int], GraphEdge] = field(default_factory=dict)
    disconnected: set[int] = field(default_factory=set)
    fallback: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        self._adj: dict[int, list[int]] | None = None

    def add(self, edge: GraphEdge) -> None:
        if edge.u == edge.v:
            raise ValueError("self loop")
        self.edges[edge.key] = edge
        self._adj = None

    @property
    def site_vertices(self) -> list[int]:
        return [self.n_sats + k for k in range(len(self.sites))]

    @property
    def vertices(self) -> list[int]:
        return list(range(self.n_sats + len(self.sites)))

    def is_site(self, x: int) -> bool:
        return x >= self.n_sats

    def neighbours(self, x: int) -> list[int]:
        if self._adj is None:
            adj: dict[int, list[int]] = {}
            for u, v in self.edges:
                adj.setdefault(u, []).append(v)
                adj.setdefault(v, []).append(u)
            self._adj = {k: sorted(vs) for k, vs in adj.items()}
        return self._adj.get(x, [])

    def edge(self, u: int, v: int) -> GraphEdge:
        return self.edges[edge_key(u, v)]

    def family(self, kind: EdgeKind) -> list[GraphEdge]:
        return [e for e in self.edges.values() if e.kind is kind]

    def degree(self, x: int) -> int:
        return len(self.neighbours(x))


def build_routing_graph(
    constellation: Constellation,
    sites: Sequence[GroundSite],
    matching: Matching | None,
    t: float,
    gsl: LinkParams = GSL,
    isl: LinkParams = ISL,
    spec: CoverageSpec = CoverageSpec(),
) -> RoutingGraph:
    """Intra-plane rings, matched inter-plane ISLs and one GSL per ground site.

    A site attaches to its nearest satellite at or above ``eps_min``; failing
    that, to the nearest one above the horizon (recorded in ``fallback``); with
    nothing above the horizon it is left ``disconnected``.
    """
    consts = constellation.constants
    pos = constellation.positions(t)
    n = len(constellation)
    graph = RoutingGraph(float(t), n, list(sites))

    for s_idx, shell in enumerate(constellation.shells):
        for a in range(shell.n_planes):
            members = constellation.plane_members(s_idx, a)
            if members.size < 2:
                continue
            ring = [(members[k], members[(k + 1) % members.size]) for k in range(members.size)]
            for u, v in ring:
                if u == v or edge_key(int(u), int(v)) in graph.edges:
                    continue
                d = float(np.linalg.norm(pos[u] - pos[v]))
                graph.add(GraphEdge(int(u), int(v), EdgeKind.INTRA, d, float(link_rate(isl, d)), isl.carrier_hz))

    if matching is not None:
        for link in matching.links:
            u, v = link.sats
            if link.rate_bps <= 0:
                continue
            d = float(np.linalg.norm(pos[u] - pos[v]))
            graph.add(GraphEdge(u, v, EdgeKind.INTER, d, float(link.rate_bps), isl.carrier_hz))

    if sites:
        site_pos = np.stack([s.position(consts) for s in sites])
        elev = elevations(site_pos, pos)
        dist = np.linalg.norm(pos[None, :, :] - site_pos[:, None, :], axis=-1)
        for k in range(len(sites)):
            vertex = n + k
            for threshold, flagged in ((spec.min_elevation_rad, False), (0.0, True)):
                ok = elev[k] >= threshold
                if ok.any():
                    cand = np.flatnonzero(ok)
                    best = int(cand[np.argmin(dist[k, cand])])
                    d = float(dist[k, best])
                    graph.add(GraphEdge(best, vertex, EdgeKind.GSL, d, float(link_rate(gsl, d)), gsl.carrier_hz))
                    if flagged:
                        graph.fallback.add(vertex)
                    break
            else:
                graph.disconnected.add(vertex)
    return graph


# -- metrics --------------------------------------------------------------------------


class MetricKind(str, enum.Enum):
    HOP_COUNT = "hop_count"
    PATH_LOSS = "path_loss"
    LATENCY = "latency"


@dataclass(frozen=True)
class RoutingMetric:
    """Edge-weight rule.

    The latency metric adds a statistical waiting estimate per hop: a constant
    (``queue_model="constant"``) or the M/M/1 queueing delay for an offered
    load of ``offered_load_pps`` packets/s (``queue_model="mm1"``).
    """

    kind: MetricKind = MetricKind.LATENCY
    mean_packet_bits: float = DEFAULT_PACKET_BITS
    queue_model: str = "constant"
    constant_wait_s: float = 0.0
    offered_load_pps: float = 0.0
    path_loss_scale: str = "db"

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.queue_model not in ("constant", "mm1"):
            raise ValueError("queue_model must be 'constant' or 'mm1'")
        if self.path_loss_scale not in ("db", "linear"):
            raise ValueError("path_loss_scale must be 'db' or 'linear'")

    def expected_wait(self, rate_bps: float) -> float:
        if self.queue_model == "constant":
            return self.constant_wait_s
        mu = rate_bps / self.mean_packet_bits
        lam = self.offered_load_pps
        if lam >= mu:
            return math.inf
        return lam / (mu * (mu - lam))


HOP_COUNT = RoutingMetric(MetricKind.HOP_COUNT)
PATH_LOSS = RoutingMetric(MetricKind.PATH_LOSS)
PATH_LOSS_LINEAR = RoutingMetric(MetricKind.PATH_LOSS, path_loss_scale="linear")
LATENCY = RoutingMetric(MetricKind.LATENCY)


def metric_weight(edge: GraphEdge, metric: RoutingMetric) -> float:
    if metric.kind is MetricKind.HOP_COUNT:
        return 1.0
    if metric.kind is MetricKind.PATH_LOSS:
        loss = float(free_space_path_loss(edge.distance_m, edge.carrier_hz))
        return 10.0 * math.log10(loss) if metric.path_loss_scale == "db" else loss
    if edge.rate_bps <= 0:
        return math.inf
    return (edge.distance_m / SPEED_OF_LIGHT + metric.mean_packet_bits / edge.rate_bps
            + metric.expected_wait(edge.rate_bps))


def edge_weights(graph: RoutingGraph, metric: RoutingMetric) -> dict[tuple[int, int], float]:
    return {k: metric_weight(e, metric) for k, e in graph.edges.items()}


# -- routes ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Route:
    src: int
    dst: int
    vertices: tuple[int, ...]
    weight: float

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [edge_key(a, b) for a, b in zip(self.vertices, self.vertices[1:])]

    @property
    def hops(self) -> int:
        return max(0, len(self.vertices) - 1)


def _transit_ok(graph: RoutingGraph, x: int, dst: int) -> bool:
    return not graph.is_site(x) or x == dst


def shortest_routes_from(
    graph: RoutingGraph, src: int, weights: dict[tuple[int, int], float]
) -> dict[int, Route]:
    """Dijkstra from ``src``; ties resolved by the lexicographically smallest
    vertex sequence. Ground sites are never used as transit vertices."""
    best: dict[int, tuple[float, tuple[int, ...]]] = {}
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (src,))]
    while heap:
        dist, path = heapq.heappop(heap)
        x = path[-1]
        if x in best:
            continue
        best[x] = (dist, path)
        if x != src and graph.is_site(x):
            continue
        for y in graph.neighbours(x):
            if y in best:
                continue
            w = weights[edge_key(x, y)]
            if math.isinf(w):
                continue
            heapq.heappush(heap, (dist + w, path + (y,)))
    return {x: Route(src, x, p, d) for x, (d, p) in best.items()}


def shortest_route(graph: RoutingGraph, src: int, dst: int, metric: RoutingMetric | dict) -> Route | None:
    """Minimum-weight route, or ``None`` when ``dst`` is unreachable."""
    weights = metric if isinstance(metric, dict) else edge_weights(graph, metric)
    if src == dst:
        return Route(src, dst, (src,), 0.0)
    return shortest_routes_from(graph, src, weights).get(dst)


def all_site_routes(graph: RoutingGraph, metric: RoutingMetric) -> dict[tuple[int, int], Route]:
    """Routes for every ordered pair of distinct, mutually reachable sites."""
    weights = edge_weights(graph, metric)
    sites = graph.site_vertices
    out = {}
    for s in sites:
        if s in graph.disconnected:
            continue
        tree = shortest_routes_from(graph, s, weights)
        for d in sites:
            if d != s and d in tree:
                out[(s, d)] = tree[d]
    return out


# -- load ----------------------------------------------------------------------------


def path_load(lam: float, n_gs: int) -> float:
    """Load carried by each path when every site spreads ``lam`` over the others."""
    if n_gs < 2:
        raise ValueError("need at least two ground stations")
    return 2.0 * lam / (n_gs - 1)


@dataclass(frozen=True)
class MaxLoad:
    value: float  # same unit as the edge rates
    bottleneck: tuple[int, int]
    path_counts: dict[tuple[int, int], int]


def max_load_per_gs(graph: RoutingGraph, routes: Iterable[Route], n_gs: int | None = None) -> MaxLoad:
    """Largest per-site load the routes sustain: min over used edges of R (N_GS - 1) / N_p."""
    counts: dict[tuple[int, int], int] = {}
    any_route = False
    for r in routes:
        any_route = True
        for e in r.edges:
            counts[e] = counts.get(e, 0) + 1
    if not any_route:
        raise ValueError("no routes given")
    n_gs = len(graph.sites) if n_gs is None else n_gs
    best, where = math.inf, None
    for e in sorted(counts):
        val = graph.edges[e].rate_bps * (n_gs - 1) / counts[e]
        if val < best:
            best, where = val, e
    return MaxLoad(best, where, counts)


# -- one-hop latency ------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyBreakdown:
    waiting_s: float
    transmission_s: float
    propagation_s: float

    @property
    def total_s(self) -> float:
        return self.waiting_s + self.transmission_s + self.propagation_s


def one_hop_latency(edge: GraphEdge, packet_bits: float, queue_wait_s: float = 0.0) -> LatencyBreakdown:
    if edge.rate_bps <= 0:
        raise ValueError("edge has zero rate")
    return LatencyBreakdown(queue_wait_s, packet_bits / edge.rate_bps, edge.distance_m / SPEED_OF_LIGHT)


class FifoLink:
    """Work-conserving FIFO transmitter: tracks when the link frees up."""

    def __init__(self) -> None:
        self.busy_until = 0.0

    def enqueue(self, now: float, service_s: float) -> float:
        """Return the waiting time of a packet arriving at ``now``."""
        start = max(now, self.busy_until)
        self.busy_until = start + service_s
        return start - now

    def backlog(self, now: float) -> float:
        return max(0.0, self.busy_until - now)
