"""Inter-plane ISL establishment by greedy matching.

Each satellite carries one or two inter-plane transceivers. With two, one
looks along +pitch (the orbit normal) and one along -pitch, so a neighbour on
a given side can only be reached through that side's transceiver. A vertex of
the matching graph is ``(satellite index, transceiver index)``.

The antenna body frame of a satellite is its local orbital frame:
x along-track (roll axis), y along the orbit normal (pitch axis), z radial.
Antennas keep their pointing fixed in this frame between re-establishments.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

from .antenna import ArrayGeometry, butler_gains, steered_gain
from .link import ButlerArray, LinkParams, ParabolicAntenna, PhasedArray, free_space_path_loss, parabolic_pattern, shannon_rate, snr
from .orbits import Constellation

Vertex = tuple[int, int]
EdgeKey = tuple[Vertex, Vertex]

ATMOSPHERE_CLEARANCE_M = 80e3


@dataclass(frozen=True)
class TransceiverBudget:
    intra_plane: int = 2
    inter_plane: int = 2

    def __post_init__(self) -> None:
        if self.intra_plane < 0 or self.inter_plane not in (1, 2):
            raise ValueError("intra_plane must be >= 0 and inter_plane 1 or 2")


@dataclass(frozen=True)
class Edge:
    u: Vertex
    v: Vertex
    distance_m: float
    rate_bps: float
    snr: float
    beam_u: int | None = None
    beam_v: int | None = None

    @property
    def key(self) -> EdgeKey:
        return (self.u, self.v)


@dataclass
class TopologySnapshot:
    """Feasible inter-plane edges at ``t``; antennas pointed at ``steer_time``."""

    t: float
    vertices: frozenset[Vertex]
    edges: dict[EdgeKey, Edge]
    steer_time: float

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class MatchedLink:
    u: Vertex
    v: Vertex
    rate_bps: float
    distance_m: float
    beam_u: int | None = None
    beam_v: int | None = None

    @property
    def sats(self) -> tuple[int, int]:
        return self.u[0], self.v[0]


@dataclass
class Matching:
    t: float
    links: list[MatchedLink] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self):
        return iter(self.links)

    @property
    def used(self) -> set[Vertex]:
        return {x for link in self.links for x in (link.u, link.v)}

    def keys(self) -> set[EdgeKey]:
        return {(link.u, link.v) for link in self.links}

    def total_weight(self) -> float:
        return sum(link.rate_bps for link in self.links)

    def to_csv(self, path: str | Path, constellation: Constellation) -> None:
        with open(path, "w", newline="") as fh:
            write_matching_rows(csv.writer(fh, lineterminator="\n"), [self], constellation, header=True)


MATCHING_COLUMNS = ["t", "u_plane", "u_slot", "v_plane", "v_slot", "beam_k", "distance_m", "rate_bps"]


def write_matching_rows(writer, matchings: Iterable[Matching], constellation: Constellation, header: bool = True) -> None:
    if header:
        writer.writerow(MATCHING_COLUMNS)
    for m in matchings:
        for link in m.links:
            su, sv = constellation.ids[link.u[0]], constellation.ids[link.v[0]]
            beam = "" if link.beam_u is None else f"{link.beam_u}:{link.beam_v}"
            writer.writerow([f"{m.t:.9g}", su.plane, su.slot, sv.plane, sv.slot, beam,
                             f"{link.distance_m:.9g}", f"{link.rate_bps:.9g}"])


# -- geometry ------------------------------------------------------------------------


def local_frames(constellation: Constellation, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Positions (N, 3) and body axes (N, 3, 3), rows x/y/z, in Earth-fixed axes."""
    pos = constellation.positions(t)
    vel = constellation.velocities(t)
    x = vel / np.linalg.norm(vel, axis=1, keepdims=True)
    y = constellation.orbit_normals(t)
    z = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    return pos, np.stack([x, y, z], axis=1)


def segment_clearance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum distance from the Earth's centre to each segment a-b."""
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    s = np.clip(-np.einsum("ij,ij->i", a, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = a + s[:, None] * d
    return np.linalg.norm(closest, axis=1)


@dataclass
class PairGeometry:
    distance: np.ndarray
    dir_ij: np.ndarray  # unit vector to j in i's body frame
    dir_ji: np.ndarray
    clearance: np.ndarray


def pair_geometry(constellation: Constellation, i: np.ndarray, j: np.ndarray, t: float) -> PairGeometry:
    pos, axes = local_frames(constellation, t)
    delta = pos[j] - pos[i]
    dist = np.linalg.norm(delta, axis=1)
    unit = delta / dist[:, None]
    dir_ij = np.einsum("nak,nk->na", axes[i], unit)
    dir_ji = np.einsum("nak,nk->na", axes[j], -unit)
    return PairGeometry(dist, dir_ij, dir_ji, segment_clearance(pos[i], pos[j]))


def _array_geometry(antenna, f: float) -> ArrayGeometry:
    return ArrayGeometry.for_frequency(antenna.k, f, antenna.spacing_wavelengths)


def end_gains(antenna, f: float, steer_dir: np.ndarray, true_dir: np.ndarray, beams=None):
    """Gains of one link end; returns (gains, beams) where beams are 1-based or None."""
    if isinstance(antenna, ParabolicAntenna):
        cos_off = np.clip(np.einsum("nk,nk->n", steer_dir, true_dir), -1.0, 1.0)
        return parabolic_pattern(antenna, f, np.arccos(cos_off)), None
    geom = _array_geometry(antenna, f)
    if isinstance(antenna, PhasedArray):
        return steered_gain(geom, steer_dir, true_dir), None
    if isinstance(antenna, ButlerArray):
        if beams is None:
            beams = np.argmax(butler_gains(geom, steer_dir, antenna.fixed_polar_rad), axis=1) + 1
        g = butler_gains(geom, true_dir, antenna.fixed_polar_rad)
        return g[np.arange(len(beams)), beams - 1], beams
    raise TypeError(f"unsupported antenna {antenna!r}")


@dataclass
class PairRates:
    rate: np.ndarray
    snr: np.ndarray
    distance: np.ndarray
    clear: np.ndarray
    side_i: np.ndarray
    side_j: np.ndarray
    beam_i: np.ndarray | None
    beam_j: np.ndarray | None


def pair_rates(
    constellation: Constellation,
    link: LinkParams,
    i: np.ndarray,
    j: np.ndarray,
    t: float,
    steer_time: float | None = None,
    clearance_m: float = ATMOSPHERE_CLEARANCE_M,
) -> PairRates:
    """Rates of links i-j at ``t`` with antennas pointed at ``steer_time``."""
    i = np.asarray(i, dtype=int)
    j = np.asarray(j, dtype=int)
    now = pair_geometry(constellation, i, j, t)
    steer = now if steer_time is None or steer_time == t else pair_geometry(constellation, i, j, steer_time)
    f = link.carrier_hz
    g_i, beam_i = end_gains(link.tx_antenna, f, steer.dir_ij, now.dir_ij)
    g_j, beam_j = end_gains(link.rx_antenna, f, steer.dir_ji, now.dir_ji)
    clear = now.clearance >= constellation.constants.earth_radius_m + clearance_m
    s = np.where(clear, snr(link, now.distance, g_i, g_j), 0.0)
    rate = np.asarray(shannon_rate(link, s), dtype=float)
    side_i = (steer.dir_ij[:, 1] < 0).astype(int)
    side_j = (steer.dir_ji[:, 1] < 0).astype(int)
    return PairRates(rate, np.asarray(s), now.distance, clear, side_i, side_j, beam_i, beam_j)


def candidate_pairs(constellation: Constellation, all_planes: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i < j) of satellites in different planes of the same shell.

    By default only adjacent planes (RAAN neighbours, wrapping around) pair up.
    """
    ii, jj = [], []
    for s_idx, shell in enumerate(constellation.shells):
        p = shell.n_planes
        if p < 2:
            continue
        if all_planes:
            plane_pairs = [(a, b) for a in range(p) for b in range(a + 1, p)]
        else:
            plane_pairs = sorted({tuple(sorted((a, (a + 1) % p))) for a in range(p)})
        for a, b in plane_pairs:
            ma = constellation.plane_members(s_idx, a)
            mb = constellation.plane_members(s_idx, b)
            A, B = np.meshgrid(ma, mb, indexing="ij")
            ii.append(A.ravel())
            jj.append(B.ravel())
    if not ii:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    i = np.concatenate(ii)
    j = np.concatenate(jj)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def transceiver_vertices(constellation: Constellation, budget: TransceiverBudget) -> frozenset[Vertex]:
    return frozenset((s, k) for s in range(len(constellation)) for k in range(budget.inter_plane))


def feasible_edges(
    constellation: Constellation,
    t: float,
    link: LinkParams,
    budget: TransceiverBudget = TransceiverBudget(),
    max_range_m: float | None = None,
    steer_time: float | None = None,
    all_planes: bool = False,
    clearance_m: float = ATMOSPHERE_CLEARANCE_M,
) -> TopologySnapshot:
    """Inter-plane edges with a positive rate that clear the atmosphere."""
    i, j = candidate_pairs(constellation, all_planes)
    steer_time = t if steer_time is None else steer_time
    pr = pair_rates(constellation, link, i, j, t, steer_time, clearance_m)
    ok = pr.clear & (pr.rate > 0)
    if max_range_m is not None:
        ok &= pr.distance <= max_range_m
    two = budget.inter_plane == 2
    edges: dict[EdgeKey, Edge] = {}
    for n in np.flatnonzero(ok):
        u = (int(i[n]), int(pr.side_i[n]) if two else 0)
        v = (int(j[n]), int(pr.side_j[n]) if two else 0)
        edge = Edge(
            u, v, float(pr.distance[n]), float(pr.rate[n]), float(pr.snr[n]),
            None if pr.beam_i is None else int(pr.beam_i[n]),
            None if pr.beam_j is None else int(pr.beam_j[n]),
        )
        edges[edge.key] = edge
    return TopologySnapshot(t, transceiver_vertices(constellation, budget), edges, steer_time)


# -- greedy matching --------------------------------------------------------------------


class InterferenceModel(Protocol):
    def on_match(
        self, matched: list[MatchedLink], remaining: dict[EdgeKey, float]
    ) -> tuple[dict[EdgeKey, float], list[MatchedLink]]:
        """Return changed weights of remaining edges and the re-rated matched links."""


def greedy_match(
    snapshot: TopologySnapshot,
    lookahead: TopologySnapshot | None = None,
    initial: Matching | None = None,
    interference: InterferenceModel | None = None,
) -> Matching:
    """Greedy maximum-weight one-to-one matching over transceivers.

    Edge weight is the rate at ``t``, or the smaller of the rates at ``t`` and
    ``t + dt`` when a lookahead snapshot is supplied (an edge missing from the
    lookahead counts as rate 0). Equal weights are broken by the lexicographic
    order of the vertex pair. Links from ``initial`` are kept as they are.
    """
    if lookahead is not None and lookahead.vertices != snapshot.vertices:
        raise ValueError("snapshot and lookahead have different vertex sets")
    weights: dict[EdgeKey, float] = {}
    for key, edge in snapshot.edges.items():
        w = edge.rate_bps
        if lookahead is not None:
            ahead = lookahead.edges.get(key)
            w = min(w, ahead.rate_bps if ahead is not None else 0.0)
        if w > 0:
            weights[key] = w

    matching = Matching(snapshot.t)
    used: set[Vertex] = set()
    if initial is not None:
        for link in initial.links:
            if link.u in used or link.v in used:
                raise ValueError("initial matching is not one-to-one")
            matching.links.append(link)
            used.update((link.u, link.v))

    version: dict[EdgeKey, int] = {}
    heap = [(-w, key, 0) for key, w in weights.items()]
    heapq.heapify(heap)
    remaining = {k: w for k, w in weights.items() if k[0] not in used and k[1] not in used}
    adjacent: dict[Vertex, list[EdgeKey]] = {}
    for k in remaining:
        adjacent.setdefault(k[0], []).append(k)
        adjacent.setdefault(k[1], []).append(k)

    while heap:
        neg_w, key, ver = heapq.heappop(heap)
        if ver != version.get(key, 0) or key not in remaining:
            continue
        u, v = key
        if u in used or v in used:
            continue
        edge = snapshot.edges[key]
        matching.links.append(MatchedLink(u, v, -neg_w, edge.distance_m, edge.beam_u, edge.beam_v))
        used.update((u, v))
        for k in adjacent.get(u, []) + adjacent.get(v, []):
            remaining.pop(k, None)
        if interference is not None:
            changed, relinked = interference.on_match(matching.links, remaining)
            matching.links = relinked
            for k, w in changed.items():
                if w <= 0:
                    remaining.pop(k, None)
                    continue
                remaining[k] = w
                version[k] = version.get(k, 0) + 1
                heapq.heappush(heap, (-w, k, version[k]))
    return matching


def is_maximal(matching: Matching, snapshot: TopologySnapshot) -> bool:
    used = matching.used
    return not any(
        e.u not in used and e.v not in used and e.rate_bps > 0 for e in snapshot.edges.values()
    )


class SubbandInterference:
    """SINR re-weighting for links sharing a frequency sub-band.

    Links between planes ``a`` and ``a + 1`` use sub-band ``a mod n_subbands``
    (the wrap-around pair uses ``P - 1``). Both ends of every established link
    transmit; any other receiver on the same sub-band picks this up through a
    ``sidelobe_gain`` at each end.
    """

    def __init__(self, constellation: Constellation, snapshot: TopologySnapshot, link: LinkParams,
                 n_subbands: int = 2, sidelobe_gain: float = 1.0) -> None:
        self.constellation = constellation
        self.snapshot = snapshot
        self.link = link
        self.n_subbands = n_subbands
        self.sidelobe_gain = sidelobe_gain
        self.positions = constellation.positions(snapshot.t)

    def subband(self, key: EdgeKey) -> int:
        c = self.constellation
        pu, pv = c.plane[key[0][0]], c.plane[key[1][0]]
        shell = c.shells[c.shell_index[key[0][0]]]
        lo, hi = sorted((int(pu), int(pv)))
        base = hi if (lo == 0 and hi == shell.n_planes - 1 and shell.n_planes > 2) else lo
        return base % self.n_subbands

    def _interference_at(self, receiver: int, exclude: set[int], band: int, matched: list[MatchedLink]) -> float:
        total = 0.0
        for link in matched:
            if self.subband((link.u, link.v)) != band:
                continue
            for tx in link.sats:
                if tx in exclude:
                    continue
                d = float(np.linalg.norm(self.positions[tx] - self.positions[receiver]))
                total += self.link.tx_power_w * self.sidelobe_gain**2 / free_space_path_loss(d, self.link.carrier_hz)
        return total

    def _sinr_rate(self, key: EdgeKey, base_snr: float, matched: list[MatchedLink]) -> float:
        band = self.subband(key)
        a, b = key[0][0], key[1][0]
        signal = base_snr * self.link.noise_power_w
        worst = math.inf
        for rx in (a, b):
            i_w = self._interference_at(rx, {a, b}, band, matched)
            worst = min(worst, signal / (self.link.noise_power_w + i_w))
        return float(shannon_rate(self.link, worst))

    def on_match(self, matched, remaining):
        newest = matched[-1]
        band = self.subband((newest.u, newest.v))
        relinked = []
        for link in matched:
            key = (link.u, link.v)
            if self.subband(key) == band and link is not newest:
                edge = self.snapshot.edges[key]
                rate = min(link.rate_bps, self._sinr_rate(key, edge.snr, matched))
                link = MatchedLink(link.u, link.v, rate, link.distance_m, link.beam_u, link.beam_v)
            relinked.append(link)
        changed = {}
        for key, w in remaining.items():
            if self.subband(key) != band:
                continue
            new_w = min(w, self._sinr_rate(key, self.snapshot.edges[key].snr, relinked))
            if new_w != w:
                changed[key] = new_w
        return changed, relinked


# -- periodic re-establishment ---------------------------------------------------------


@dataclass
class EstablishmentRun:
    matchings: list[Matching]
    times: np.ndarray  # sample time of every link sample
    u: np.ndarray
    v: np.ndarray
    rates: np.ndarray

    @property
    def mean_rate(self) -> float:
        return float(self.rates.mean()) if self.rates.size else 0.0

    @property
    def median_rate(self) -> float:
        return float(np.median(self.rates)) if self.rates.size else 0.0


def run_establishment_schedule(
    constellation: Constellation,
    link: LinkParams,
    reestablish_dt: float,
    horizon_s: float,
    sample_dt: float = 1.0,
    budget: TransceiverBudget = TransceiverBudget(),
    t0: float = 0.0,
    all_planes: bool = False,
    lookahead: bool = True,
    seed_prior: bool = False,
    freeze_motion: bool = False,
    max_range_m: float | None = None,
    interference: Callable[[TopologySnapshot], InterferenceModel] | None = None,
) -> EstablishmentRun:
    """Re-match every ``reestablish_dt`` seconds and sample link rates in between.

    ``reestablish_dt = 0`` re-matches at every sample (ideal pointing). Between
    re-establishments the antennas keep the pointing chosen at establishment,
    so rates degrade with satellite motion. With ``seed_prior`` the previous
    links that are still feasible are kept and only the rest is re-matched.
    ``interference`` builds an interference model per snapshot.
    """
    if reestablish_dt < 0 or sample_dt <= 0 or horizon_s <= 0:
        raise ValueError("need reestablish_dt >= 0 and positive sample_dt, horizon")
    n_samples = int(math.floor(horizon_s / sample_dt + 1e-9))
    sample_times = t0 + sample_dt * np.arange(n_samples)
    matchings: list[Matching] = []
    out_t, out_u, out_v, out_r = [], [], [], []
    current: Matching | None = None
    est_geom_t = t0
    next_est = t0
    for t in sample_times:
        geom_t = t0 if freeze_motion else float(t)
        if current is None or reestablish_dt == 0 or t >= next_est - 1e-9:
            snap = feasible_edges(constellation, geom_t, link, budget, max_range_m, all_planes=all_planes)
            ahead = None
            if lookahead and reestablish_dt > 0 and not freeze_motion:
                ahead = feasible_edges(constellation, geom_t + reestablish_dt, link, budget, max_range_m,
                                       steer_time=geom_t, all_planes=all_planes)
            initial = None
            if seed_prior and current is not None:
                keep = [l for l in current.links if (l.u, l.v) in snap.edges
                        and (ahead is None or (l.u, l.v) in ahead.edges)]
                initial = Matching(geom_t, [
                    MatchedLink(l.u, l.v, snap.edges[(l.u, l.v)].rate_bps, snap.edges[(l.u, l.v)].distance_m,
                                l.beam_u, l.beam_v) for l in keep])
            model = interference(snap) if interference is not None else None
            current = greedy_match(snap, ahead, initial, model)
            current.t = float(t)
            matchings.append(current)
            est_geom_t = geom_t
            next_est = float(t) + reestablish_dt
        if not current.links:
            continue
        i = np.array([l.u[0] for l in current.links])
        j = np.array([l.v[0] for l in current.links])
        pr = pair_rates(constellation, link, i, j, geom_t, est_geom_t)
        out_t.append(np.full(i.size, t))
        out_u.append(i)
        out_v.append(j)
        out_r.append(pr.rate)
    cat = lambda xs, dt: np.concatenate(xs) if xs else np.empty(0, dtype=dt)  # noqa: E731
    return EstablishmentRun(matchings, cat(out_t, float), cat(out_u, int), cat(out_v, int), cat(out_r, float))


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray
    fractions: np.ndarray

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.values, q))

    @property
    def median(self) -> float:
        return float(np.median(self.values))


def rate_cdf(samples) -> EmpiricalCdf:
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("no samples")
    return EmpiricalCdf(x, np.arange(1, x.size + 1) / x.size)
