"""Ground visibility geometry and constellation availability statistics."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .constants import SPHERICAL, PhysicalConstants
from .link import LinkParams, link_rate
from .orbits import Constellation, SatelliteId, SatelliteState, latlon_to_unit, orbital_period

ARCCOS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class GroundSite:
    latitude_rad: float
    longitude_rad: float
    altitude_m: float = 0.0
    id: str = ""

    def __post_init__(self) -> None:
        if abs(self.latitude_rad) > math.pi / 2 + 1e-12:
            raise ValueError("latitude out of range")
        lon = (self.longitude_rad + math.pi) % (2 * math.pi) - math.pi
        object.__setattr__(self, "longitude_rad", lon)

    @classmethod
    def from_degrees(cls, lat: float, lon: float, altitude_m: float = 0.0, id: str = "") -> "GroundSite":
        return cls(math.radians(lat), math.radians(lon), altitude_m, id)

    def position(self, constants: PhysicalConstants = SPHERICAL) -> np.ndarray:
        return (constants.earth_radius_m + self.altitude_m) * latlon_to_unit(
            self.latitude_rad, self.longitude_rad
        )


@dataclass(frozen=True)
class CoverageSpec:
    min_elevation_rad: float = math.radians(30.0)

    def __post_init__(self) -> None:
        if not 0 <= self.min_elevation_rad < math.pi / 2:
            raise ValueError("min elevation must lie in [0, pi/2)")


def _check_elevation(eps: float) -> None:
    if not -1e-12 <= eps <= math.pi / 2 + 1e-12:
        raise ValueError(f"elevation {eps} outside [0, pi/2]")


def slant_range(
    h: float, eps: float, constants: PhysicalConstants = SPHERICAL, user_altitude_m: float = 0.0
) -> float:
    """Distance from a terminal at ``user_altitude_m`` to a satellite at altitude ``h``
    seen at elevation ``eps``."""
    if not h > 0:
        raise ValueError("altitude must be positive")
    _check_elevation(eps)
    r_u = constants.earth_radius_m + user_altitude_m
    r_s = constants.earth_radius_m + h
    s = math.sin(eps)
    return math.sqrt(r_u**2 * s * s + r_s**2 - r_u**2) - r_u * s


def central_angle(
    h: float, eps: float, constants: PhysicalConstants = SPHERICAL, user_altitude_m: float = 0.0
) -> float:
    """Earth central angle between a terminal and the satellite's nadir."""
    d = slant_range(h, eps, constants, user_altitude_m)
    r_u = constants.earth_radius_m + user_altitude_m
    r_s = constants.earth_radius_m + h
    arg = (r_s**2 + r_u**2 - d * d) / (2.0 * r_u * r_s)
    if abs(arg) > 1.0 + ARCCOS_TOLERANCE:
        raise ArithmeticError(f"arccos argument {arg} out of range")
    return math.acos(min(1.0, max(-1.0, arg)))


def coverage_area(h: float, min_elevation: float, constants: PhysicalConstants = SPHERICAL) -> float:
    alpha = central_angle(h, min_elevation, constants)
    return 2.0 * math.pi * constants.earth_radius_m**2 * (1.0 - math.cos(alpha))


def max_pass_duration(h: float, min_elevation: float, constants: PhysicalConstants = SPHERICAL) -> float:
    """Upper bound on the pass length, reached when the satellite crosses the zenith."""
    return orbital_period(h, constants) * central_angle(h, min_elevation, constants) / math.pi


def elevations(site_positions, sat_positions) -> np.ndarray:
    """Elevation angles (..., M, N) of N satellites seen from M sites."""
    sites = np.atleast_2d(np.asarray(site_positions, dtype=float))
    sats = np.atleast_2d(np.asarray(sat_positions, dtype=float))
    delta = sats[None, :, :] - sites[:, None, :]
    dist = np.linalg.norm(delta, axis=-1)
    if np.any(dist == 0):
        raise ValueError("site and satellite positions coincide")
    up = sites / np.linalg.norm(sites, axis=-1, keepdims=True)
    sin_e = np.einsum("mnk,mk->mn", delta, up) / dist
    return np.arcsin(np.clip(sin_e, -1.0, 1.0))


def elevation(site: GroundSite, sat_state: SatelliteState | np.ndarray,
              constants: PhysicalConstants = SPHERICAL) -> float:
    pos = sat_state.position_m if isinstance(sat_state, SatelliteState) else sat_state
    return float(elevations(site.position(constants), pos)[0, 0])


def in_coverage(site: GroundSite, sat_state: SatelliteState | np.ndarray, spec: CoverageSpec,
                constants: PhysicalConstants = SPHERICAL) -> bool:
    return elevation(site, sat_state, constants) >= spec.min_elevation_rad


def in_coverage_by_distance(site: GroundSite, sat_state: SatelliteState | np.ndarray, spec: CoverageSpec,
                            constants: PhysicalConstants = SPHERICAL) -> bool:
    """Equivalent test: the satellite is within the slant range at the minimum elevation.

    Only meaningful for a satellite above the site's horizon plane side of the Earth
    (the distance test alone cannot see through the planet).
    """
    pos = sat_state.position_m if isinstance(sat_state, SatelliteState) else np.asarray(sat_state)
    h = float(np.linalg.norm(pos)) - constants.earth_radius_m
    d = float(np.linalg.norm(pos - site.position(constants)))
    return d <= slant_range(h, spec.min_elevation_rad, constants, site.altitude_m)


# -- constellation-level statistics -------------------------------------------------


@dataclass(frozen=True)
class AvailabilityProfile:
    latitudes_rad: np.ndarray
    availability: np.ndarray
    mean_visible: np.ndarray

    def rows(self):
        for lat, a, m in zip(self.latitudes_rad, self.availability, self.mean_visible):
            yield math.degrees(lat), float(a), float(m)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["latitude_deg", "availability", "mean_visible"])
            for lat, a, m in self.rows():
                w.writerow([f"{lat:.9g}", f"{a:.9g}", f"{m:.9g}"])


def availability_by_latitude(
    constellation: Constellation,
    spec: CoverageSpec,
    lat_grid: Sequence[float],
    n_longitudes: int = 100,
    time_step_s: float = 10.0,
    duration_s: float | None = None,
    threads: int = 1,
) -> AvailabilityProfile:
    """Fraction of (time, longitude) samples with a satellite in coverage, per latitude.

    Sites sit at sea level on ``n_longitudes`` evenly spaced meridians. Time runs
    from 0 over ``duration_s`` (default: one orbital period of the first shell).
    A satellite covers a site when their central angle does not exceed
    ``central_angle(h, eps_min)``, which is the elevation test restated.
    """
    lats = np.asarray(lat_grid, dtype=float)
    if lats.size == 0:
        raise ValueError("latitude grid is empty")
    if n_longitudes < 1 or time_step_s <= 0:
        raise ValueError("need at least one longitude and a positive time step")
    consts = constellation.constants
    if duration_s is None:
        duration_s = orbital_period(constellation.shells[0].altitude_m, consts)
    times = np.arange(0.0, duration_s, time_step_s)

    cos_alpha = np.array([
        math.cos(central_angle(h, spec.min_elevation_rad, consts)) for h in constellation.altitude
    ])
    lons = -math.pi + 2.0 * math.pi * np.arange(n_longitudes) / n_longitudes
    site_units = latlon_to_unit(lats[:, None], lons[None, :]).reshape(-1, 3)

    def count(t: float) -> np.ndarray:
        sats = constellation.positions(t)
        sats /= np.linalg.norm(sats, axis=1, keepdims=True)
        visible = (site_units @ sats.T) >= cos_alpha[None, :]
        return visible.sum(axis=1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(count, times))
    else:
        counts = [count(t) for t in times]
    # fixed-order reduction keeps results bit-identical regardless of threading
    stacked = np.stack(counts).reshape(times.size, lats.size, n_longitudes)
    availability = (stacked > 0).mean(axis=(0, 2))
    mean_visible = stacked.mean(axis=(0, 2))
    return AvailabilityProfile(lats, availability, mean_visible)


@dataclass(frozen=True)
class PassSample:
    t: float
    elevation_rad: float
    distance_m: float
    rate_bps: float


def _sat_position(constellation: Constellation, idx: int, t: float) -> np.ndarray:
    return constellation.positions(t)[idx]


def pass_rate_profile(
    constellation: Constellation,
    site: GroundSite,
    sat: SatelliteId,
    link: LinkParams,
    spec: CoverageSpec,
    dt: float,
    t_start: float = 0.0,
    search_horizon_s: float = 86400.0,
) -> list[PassSample]:
    """Rate along the first pass of ``sat`` over ``site`` starting after ``t_start``.

    Entry and exit instants are refined to the exact ``eps_min`` crossing; the
    samples in between follow a ``dt`` grid. Returns an empty list when the
    satellite never rises above ``eps_min`` within the search horizon.
    """
    consts = constellation.constants
    idx = constellation.index(sat)
    site_pos = site.position(consts)
    eps_min = spec.min_elevation_rad

    def margin(t: float) -> float:
        return float(elevations(site_pos, _sat_position(constellation, idx, t))[0, 0]) - eps_min

    t = t_start
    t_end = t_start + search_horizon_s
    if margin(t) >= 0:
        # already visible: walk back is not allowed, the pass starts now
        entry = t
    else:
        entry = None
        while t < t_end:
            nxt = t + dt
            if margin(nxt) >= 0:
                entry = brentq(margin, t, nxt, xtol=1e-9)
                break
            t = nxt
        if entry is None:
            return []
    t = entry
    while True:
        nxt = t + dt
        if margin(nxt) < 0:
            exit_ = brentq(margin, t, nxt, xtol=1e-9)
            break
        t = nxt
    grid = [entry] + [x for x in np.arange(math.ceil(entry / dt) * dt, exit_, dt) if entry < x < exit_] + [exit_]
    samples = []
    for ti in grid:
        pos = _sat_position(constellation, idx, ti)
        d = float(np.linalg.norm(pos - site_pos))
        el = float(elevations(site_pos, pos)[0, 0])
        samples.append(PassSample(float(ti), el, d, float(link_rate(link, d))))
    return samples
