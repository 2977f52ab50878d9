import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngso.constants import SPEED_OF_LIGHT
from ngso.coverage import CoverageSpec, GroundSite, elevations
from ngso.link import ISL, free_space_path_loss
from ngso.matching import feasible_edges, greedy_match
from ngso.orbits import Constellation, preset
from ngso.routing import (
    HOP_COUNT,
    LATENCY,
    PATH_LOSS,
    EdgeKind,
    FifoLink,
    GraphEdge,
    MetricKind,
    Route,
    RoutingGraph,
    RoutingMetric,
    all_site_routes,
    build_routing_graph,
    edge_weights,
    load_sites,
    max_load_per_gs,
    metric_weight,
    one_hop_latency,
    path_load,
    shortest_route,
)

F = 26e9


def site(k: int) -> GroundSite:
    return GroundSite.from_degrees(0.0, float(k), 0.0, f"s{k}")


def graph(n_sats: int, n_sites: int, edges) -> RoutingGraph:
    g = RoutingGraph(0.0, n_sats, [site(k) for k in range(n_sites)])
    for u, v, rate, dist in edges:
        kind = EdgeKind.GSL if max(u, v) >= n_sats else EdgeKind.INTRA
        g.add(GraphEdge(u, v, kind, dist, rate, F))
    return g


def four_cycle() -> RoutingGraph:
    # sats 0-1-2-3-0, site 4 on sat 0, site 5 on sat 2
    return graph(4, 2, [(0, 1, 1e9, 1e6), (1, 2, 1e9, 1e6), (2, 3, 1e9, 1e6), (3, 0, 1e9, 1e6),
                        (0, 4, 1e9, 1e6), (2, 5, 1e9, 1e6)])


def test_four_cycle_routes():
    g = four_cycle()
    r = shortest_route(g, 4, 5, HOP_COUNT)
    assert r.vertices == (4, 0, 1, 2, 5)  # lexicographic tie-break over the two halves
    assert r.hops == 4 and r.weight == 4.0
    assert shortest_route(g, 4, 4, HOP_COUNT).hops == 0
    assert g.degree(4) == 1 and g.degree(0) == 3
    with pytest.raises(ValueError):
        g.add(GraphEdge(1, 1, EdgeKind.INTRA, 1.0, 1.0, F))


def test_sites_are_not_transit():
    # site 3 bridges sats 0 and 1; the only sat-sat path is through it
    g = graph(3, 2, [(0, 3, 1e9, 1e6), (1, 3, 1e9, 1e6), (1, 2, 1e9, 1e6), (2, 4, 1e9, 1e6)])
    assert shortest_route(g, 0, 4, HOP_COUNT) is None
    assert shortest_route(g, 3, 4, HOP_COUNT).vertices == (3, 1, 2, 4)


def test_metric_weights():
    e = GraphEdge(0, 1, EdgeKind.INTER, 3e6, 1e9, F)
    assert metric_weight(e, HOP_COUNT) == 1.0
    assert metric_weight(e, PATH_LOSS) == pytest.approx(10 * math.log10(free_space_path_loss(3e6, F)))
    lin = RoutingMetric(MetricKind.PATH_LOSS, path_loss_scale="linear")
    assert metric_weight(e, lin) == pytest.approx(float(free_space_path_loss(3e6, F)))
    assert metric_weight(e, LATENCY) == pytest.approx(3e6 / SPEED_OF_LIGHT + 12000 / 1e9)
    const = RoutingMetric(constant_wait_s=1e-3)
    assert metric_weight(e, const) == pytest.approx(metric_weight(e, LATENCY) + 1e-3)
    mm1 = RoutingMetric(queue_model="mm1", offered_load_pps=40000.0)
    mu = 1e9 / 12000
    assert mm1.expected_wait(1e9) == pytest.approx(40000 / (mu * (mu - 40000)))
    assert RoutingMetric(queue_model="mm1", offered_load_pps=mu).expected_wait(1e9) == math.inf
    assert metric_weight(GraphEdge(0, 1, EdgeKind.INTER, 1.0, 0.0, F), LATENCY) == math.inf
    with pytest.raises(ValueError):
        RoutingMetric(queue_model="mg1")
    with pytest.raises(ValueError):
        RoutingMetric(path_loss_scale="np")


def test_one_hop_latency_example():
    e = GraphEdge(0, 1, EdgeKind.INTER, 1000e3, 1e9, F)
    lat = one_hop_latency(e, 12000)
    assert lat.waiting_s == 0.0
    assert lat.transmission_s == pytest.approx(12e-6)
    assert lat.propagation_s == pytest.approx(3.33564095e-3, rel=1e-8)
    assert lat.total_s == pytest.approx(lat.transmission_s + lat.propagation_s)
    with pytest.raises(ValueError):
        one_hop_latency(GraphEdge(0, 1, EdgeKind.INTER, 1.0, 0.0, F), 12000)


def test_path_load_examples():
    assert path_load(1.0, 3) == 1.0
    assert path_load(11.0, 23) == 1.0
    with pytest.raises(ValueError):
        path_load(1.0, 1)


def test_max_load_examples():
    g = graph(1, 2, [(0, 1, 5e8, 1e6)])
    one = Route(1, 0, (1, 0), 1.0)
    assert max_load_per_gs(g, [one], n_gs=2).value == 5e8
    # star: three sites behind one hub edge 0-1, all six ordered pairs cross it
    access = [(sat, x, 1e10, 1e6) for sat in (0, 1) for x in (2, 3, 4)]
    hub = graph(2, 3, [(0, 1, 6e8, 1e6)] + access)
    routes = [Route(a, b, (a, 0, 1, b), 3.0) for a, b in itertools.permutations((2, 3, 4), 2)]
    res = max_load_per_gs(hub, routes)
    assert res.path_counts[(0, 1)] == 6
    assert res.value == pytest.approx(6e8 / 3)
    assert res.bottleneck == (0, 1)
    with pytest.raises(ValueError):
        max_load_per_gs(hub, [])


def random_graph(rng, n_sats: int, n_sites: int) -> RoutingGraph:
    edges = []
    for u in range(n_sats):
        for v in range(u + 1, n_sats):
            if rng.random() < 0.5:
                edges.append((u, v, float(rng.integers(1, 5)) * 1e8, float(rng.uniform(1e5, 3e6))))
    for k in range(n_sites):
        edges.append((int(rng.integers(n_sats)), n_sats + k, float(rng.integers(1, 5)) * 1e8, 1e6))
    return graph(n_sats, n_sites, edges)


def brute_force(g: RoutingGraph, src: int, dst: int, weights) -> float:
    best = math.inf
    inner = [x for x in range(g.n_sats) if x not in (src, dst)]
    for r in range(len(inner) + 1):
        for mid in itertools.permutations(inner, r):
            path = (src,) + mid + (dst,)
            ks = [tuple(sorted(p)) for p in zip(path, path[1:])]
            if all(k in g.edges for k in ks):
                best = min(best, sum(weights[k] for k in ks))
    return best


@pytest.mark.parametrize("metric", [HOP_COUNT, PATH_LOSS, LATENCY])
def test_dijkstra_matches_exhaustive(metric):
    rng = np.random.default_rng(5)
    for _ in range(200 // 3 + 1):
        g = random_graph(rng, int(rng.integers(2, 7)), int(rng.integers(2, 4)))
        w = edge_weights(g, metric)
        s, d = g.site_vertices[0], g.site_vertices[1]
        r = shortest_route(g, s, d, w)
        expected = brute_force(g, s, d, w)
        if r is None:
            assert expected == math.inf
        else:
            assert r.weight == pytest.approx(expected)
            assert r.vertices[0] == s and r.vertices[-1] == d
            assert not any(g.is_site(x) for x in r.vertices[1:-1])


def brute_max_load(g: RoutingGraph, routes) -> float:
    best = math.inf
    for key, e in g.edges.items():
        n_p = sum(key in r.edges for r in routes)
        if n_p:
            best = min(best, e.rate_bps * (len(g.sites) - 1) / n_p)
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_max_load_matches_brute_force_and_scales(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(2, 7)), int(rng.integers(2, 5)))
    routes = list(all_site_routes(g, HOP_COUNT).values())
    if not routes:
        return
    assert max_load_per_gs(g, routes).value == brute_max_load(g, routes)
    doubled = RoutingGraph(g.t, g.n_sats, g.sites)
    for e in g.edges.values():
        doubled.add(GraphEdge(e.u, e.v, e.kind, e.distance_m, 2 * e.rate_bps, e.carrier_hz))
    assert max_load_per_gs(doubled, routes).value == 2 * max_load_per_gs(g, routes).value


def test_hop_count_minimal_hops():
    rng = np.random.default_rng(9)
    for _ in range(30):
        g = random_graph(rng, 6, 2)
        s, d = g.site_vertices
        r_hop = shortest_route(g, s, d, HOP_COUNT)
        r_lat = shortest_route(g, s, d, LATENCY)
        if r_hop is not None:
            assert r_hop.hops <= r_lat.hops


def test_fifo_link():
    q = FifoLink()
    assert q.enqueue(0.0, 1.0) == 0.0
    assert q.enqueue(0.5, 1.0) == 0.5
    assert q.backlog(1.0) == pytest.approx(1.0)
    assert q.enqueue(5.0, 1.0) == 0.0
    assert q.backlog(10.0) == 0.0


def test_load_sites():
    sites = load_sites()
    assert len(sites) == 23
    assert len({s.id for s in sites}) == 23


def test_kepler_routing_graph():
    c = Constellation([preset("kepler")])
    sites = load_sites()
    m = greedy_match(feasible_edges(c, 0.0, ISL))
    g = build_routing_graph(c, sites, m, 0.0)
    assert len(g.family(EdgeKind.INTRA)) == len(c)
    assert len(g.family(EdgeKind.INTER)) == len(m)
    n_gsl = len(g.family(EdgeKind.GSL))
    assert n_gsl == len(sites) - len(g.disconnected)
    pos = c.positions(0.0)
    spec = CoverageSpec()
    for x in g.site_vertices:
        if x in g.disconnected:
            assert g.degree(x) == 0
            continue
        assert g.degree(x) == 1
        sat = g.neighbours(x)[0]
        s = sites[x - g.n_sats]
        el = elevations(s.position(), pos)[0]
        if x not in g.fallback:
            assert el[sat] >= spec.min_elevation_rad - 1e-12
            visible = np.flatnonzero(el >= spec.min_elevation_rad)
            d = np.linalg.norm(pos[visible] - s.position(), axis=1)
            assert visible[np.argmin(d)] == sat
    routes = all_site_routes(g, HOP_COUNT)
    assert max_load_per_gs(g, routes.values()).value > 0
