import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngso.constants import SPHERICAL
from ngso.link import ISL, PhasedArray, link_rate, with_array
from ngso.matching import (
    ATMOSPHERE_CLEARANCE_M,
    Edge,
    Matching,
    MatchedLink,
    TopologySnapshot,
    TransceiverBudget,
    candidate_pairs,
    feasible_edges,
    greedy_match,
    is_maximal,
    rate_cdf,
    run_establishment_schedule,
    segment_clearance,
)
from ngso.orbits import Constellation, Geometry, ShellConfig, preset


def snapshot(weighted: dict, vertices=None, t: float = 0.0) -> TopologySnapshot:
    edges = {}
    for (u, v), w in weighted.items():
        edges[(u, v)] = Edge(u, v, 1e6, float(w), 1.0)
    verts = vertices or {x for k in weighted for x in k}
    return TopologySnapshot(t, frozenset(verts), edges, t)


def check_matching(m: Matching, snap: TopologySnapshot) -> None:
    seen = set()
    for link in m:
        assert link.u not in seen and link.v not in seen
        seen.update((link.u, link.v))
        assert (link.u, link.v) in snap.edges
    assert is_maximal(m, snap)


def test_kepler_edges_match_brute_force():
    c = Constellation([preset("kepler")])
    snap = feasible_edges(c, 0.0, ISL)
    pos = c.positions(0.0)
    r = SPHERICAL.earth_radius_m + 575e3
    count = 0
    for a in range(7):
        b = (a + 1) % 7
        for i in c.plane_members(0, a):
            for j in c.plane_members(0, b):
                d = np.linalg.norm(pos[i] - pos[j])
                gamma = 2 * math.asin(min(1.0, d / (2 * r)))
                # equal-radius chord comes closest to the centre at its midpoint
                if r * math.cos(gamma / 2) >= SPHERICAL.earth_radius_m + ATMOSPHERE_CLEARANCE_M:
                    assert float(link_rate(ISL, d)) > 0
                    count += 1
    assert len(snap) == count
    assert count < 7 * 400
    for e in snap.edges.values():
        assert e.rate_bps == pytest.approx(float(link_rate(ISL, e.distance_m)), rel=1e-9)


def test_candidate_pairs_adjacent_planes_only():
    c = Constellation([preset("kepler")])
    i, j = candidate_pairs(c)
    assert len(i) == 7 * 400
    dp = np.abs(c.plane[i] - c.plane[j])
    assert set(dp.tolist()) == {1, 6}
    assert np.all(i < j)
    ia, _ = candidate_pairs(c, all_planes=True)
    assert len(ia) == 21 * 400


def test_segment_clearance_through_earth():
    a = np.array([[7e6, 0.0, 0.0]])
    assert segment_clearance(a, -a)[0] == pytest.approx(0.0)
    b = np.array([[7e6, 1e6, 0.0]])
    assert segment_clearance(a, b)[0] == pytest.approx(7e6)


def test_occlusion_toy():
    # two satellites on opposite sides of the Earth never connect
    shell = ShellConfig(Geometry.STAR, 4, 2, 575e3, math.pi / 2)
    c = Constellation([shell], earth_rotation=False)
    snap = feasible_edges(c, 0.0, ISL)
    pos = c.positions(0.0)
    for (u, v) in snap.edges:
        assert segment_clearance(pos[[u[0]]], pos[[v[0]]])[0] >= SPHERICAL.earth_radius_m + ATMOSPHERE_CLEARANCE_M


def test_triangle_hand_trace():
    a, b, cc = (0, 0), (1, 0), (2, 0)
    snap = snapshot({(a, b): 3.0, (b, cc): 2.0, (a, cc): 1.0})
    m = greedy_match(snap)
    assert m.keys() == {(a, b)}
    assert m.total_weight() == 3.0


def test_path_greedy_vs_optimal():
    # greedy takes the heavy middle edge; optimum is the two outer edges
    v = [(k, 0) for k in range(4)]
    snap = snapshot({(v[0], v[1]): 2.0, (v[1], v[2]): 3.0, (v[2], v[3]): 2.0})
    m = greedy_match(snap)
    assert m.total_weight() == 3.0
    check_matching(m, snap)


def test_tie_break_lexicographic():
    a, b, cc = (0, 0), (1, 0), (2, 0)
    snap = snapshot({(b, cc): 1.0, (a, b): 1.0})
    assert greedy_match(snap).keys() == {(a, b)}


def optimal_weight(snap: TopologySnapshot) -> float:
    keys = list(snap.edges)
    best = 0.0
    for r in range(len(keys) + 1):
        for combo in itertools.combinations(keys, r):
            verts = [x for k in combo for x in k]
            if len(verts) == len(set(verts)):
                best = max(best, sum(snap.edges[k].rate_bps for k in combo))
    return best


def random_tripartite(rng) -> TopologySnapshot:
    sizes = rng.integers(1, 5, size=3)
    parts = [[(int(p * 10 + k), 0) for k in range(s)] for p, s in enumerate(sizes)]
    weighted = {}
    for pa, pb in ((0, 1), (1, 2), (0, 2)):
        for u in parts[pa]:
            for v in parts[pb]:
                if rng.random() < 0.5:
                    weighted[(u, v)] = float(rng.integers(1, 10))
    verts = {x for p in parts for x in p}
    return snapshot(weighted, verts)


def test_greedy_half_approximation_exhaustive():
    rng = np.random.default_rng(11)
    for _ in range(50):
        snap = random_tripartite(rng)
        if len(snap.edges) > 14:
            continue
        m = greedy_match(snap)
        check_matching(m, snap)
        assert m.total_weight() >= 0.5 * optimal_weight(snap) - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_greedy_invariants(seed):
    rng = np.random.default_rng(seed)
    snap = random_tripartite(rng)
    m1 = greedy_match(snap)
    m2 = greedy_match(snap)
    check_matching(m1, snap)
    assert m1.keys() == m2.keys()


def test_lookahead_weight_is_minimum():
    a, b, cc = (0, 0), (1, 0), (2, 0)
    now = snapshot({(a, b): 5.0, (a, cc): 4.0}, {a, b, cc})
    ahead = snapshot({(a, b): 1.0, (a, cc): 4.0}, {a, b, cc}, t=10.0)
    m = greedy_match(now, ahead)
    assert m.keys() == {(a, cc)}
    assert m.links[0].rate_bps == 4.0
    missing = snapshot({(a, cc): 4.0}, {a, b, cc}, t=10.0)
    assert greedy_match(now, missing).keys() == {(a, cc)}


def test_vertex_set_mismatch():
    a, b, cc = (0, 0), (1, 0), (2, 0)
    with pytest.raises(ValueError):
        greedy_match(snapshot({(a, b): 1.0}), snapshot({(a, cc): 1.0}))


def test_initial_links_kept():
    a, b, cc, d = (0, 0), (1, 0), (2, 0), (3, 0)
    snap = snapshot({(a, b): 5.0, (cc, d): 1.0, (b, cc): 9.0})
    init = Matching(0.0, [MatchedLink(a, b, 5.0, 1e6)])
    m = greedy_match(snap, initial=init)
    assert m.keys() == {(a, b), (cc, d)}
    with pytest.raises(ValueError):
        greedy_match(snap, initial=Matching(0.0, [MatchedLink(a, b, 5.0, 1e6), MatchedLink(b, cc, 1.0, 1e6)]))


def test_kepler_matching_properties():
    c = Constellation([preset("kepler")])
    snap = feasible_edges(c, 0.0, ISL)
    m = greedy_match(snap)
    check_matching(m, snap)
    for link in m:
        # each end uses the transceiver facing the partner's side
        assert c.plane[link.u[0]] != c.plane[link.v[0]]
    one = feasible_edges(c, 0.0, ISL, TransceiverBudget(inter_plane=1))
    m1 = greedy_match(one)
    check_matching(m1, one)
    assert len(m1) <= len(c) // 2


def test_frozen_motion_fixed_point():
    c = Constellation([preset("kepler")])
    link = with_array(ISL, PhasedArray(16))
    run = run_establishment_schedule(c, link, 10.0, 30.0, 5.0, freeze_motion=True)
    assert len(run.matchings) == 3
    assert [m.keys() for m in run.matchings[1:]] == [run.matchings[0].keys()] * 2
    per_sample = run.rates.reshape(6, -1)
    assert np.allclose(per_sample, per_sample[0])


def test_establishment_schedule_shapes():
    c = Constellation([preset("kepler")])
    run = run_establishment_schedule(c, ISL, 0.0, 3.0, 1.0)
    assert len(run.matchings) == 3
    assert run.rates.size == run.u.size == run.times.size
    assert run.mean_rate > 0 and run.median_rate > 0
    with pytest.raises(ValueError):
        run_establishment_schedule(c, ISL, -1.0, 3.0)


def test_rate_cdf():
    cdf = rate_cdf([3.0, 1.0, 2.0])
    assert list(cdf.values) == [1.0, 2.0, 3.0]
    assert list(cdf.fractions) == pytest.approx([1 / 3, 2 / 3, 1.0])
    assert cdf.median == 2.0
    with pytest.raises(ValueError):
        rate_cdf([])


def test_matching_csv(tmp_path):
    c = Constellation([preset("kepler")])
    m = greedy_match(feasible_edges(c, 0.0, ISL))
    p = tmp_path / "m.csv"
    m.to_csv(p, c)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,u_plane,u_slot,v_plane,v_slot,beam_k,distance_m,rate_bps"
    assert len(lines) == len(m) + 1
