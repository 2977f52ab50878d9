import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngso.constants import SPHERICAL
from ngso.coverage import (
    AvailabilityProfile,
    CoverageSpec,
    GroundSite,
    availability_by_latitude,
    central_angle,
    coverage_area,
    elevation,
    elevations,
    in_coverage,
    in_coverage_by_distance,
    max_pass_duration,
    pass_rate_profile,
    slant_range,
)
from ngso.link import GSL, link_rate
from ngso.orbits import Constellation, Geometry, SatelliteId, ShellConfig, preset

R = SPHERICAL.earth_radius_m
SLANT_600_30 = 1075088.01692912  # mpmath evaluation
ALPHA_600_30 = 0.133961282200430


def test_slant_range_values():
    assert slant_range(600e3, math.radians(30)) == pytest.approx(SLANT_600_30, rel=1e-12)
    assert slant_range(600e3, math.pi / 2) == pytest.approx(600e3, rel=1e-12)
    with pytest.raises(ValueError):
        slant_range(600e3, -0.1)
    with pytest.raises(ValueError):
        slant_range(600e3, 2.0)
    with pytest.raises(ValueError):
        slant_range(0.0, 0.5)


@given(st.floats(100e3, 3000e3), st.floats(0, math.pi / 2))
def test_slant_range_bounds(h, eps):
    d = slant_range(h, eps)
    assert h * (1 - 1e-12) <= d <= slant_range(h, 0.0) * (1 + 1e-12)


def test_slant_range_monotone():
    eps = np.linspace(0, math.pi / 2, 200)
    d = [slant_range(700e3, e) for e in eps]
    assert np.all(np.diff(d) < 0)


def _elev(site, sat):
    # plain re-derivation, independent of the library helper
    v = sat - site
    return math.asin(np.dot(v, site) / (np.linalg.norm(v) * np.linalg.norm(site)))


def test_central_angle_geometric_oracle():
    h, eps = 600e3, math.radians(30)
    sat = np.array([R + h, 0.0, 0.0])
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        site = R * np.array([math.cos(mid), math.sin(mid), 0.0])
        if _elev(site, sat) > eps:
            lo = mid
        else:
            hi = mid
    alpha = central_angle(h, eps)
    assert alpha == pytest.approx(0.5 * (lo + hi), abs=1e-6)
    assert alpha == pytest.approx(ALPHA_600_30, abs=1e-12)
    assert central_angle(h, math.pi / 2) == pytest.approx(0.0, abs=1e-7)


@given(st.floats(200e3, 2000e3), st.floats(0, math.pi / 2))
def test_law_of_cosines_closure(h, eps):
    d = slant_range(h, eps)
    assert R**2 + d**2 + 2 * R * d * math.sin(eps) == pytest.approx((R + h) ** 2, rel=1e-9)


def test_coverage_area():
    assert coverage_area(600e3, math.pi / 2 - 1e-12) == pytest.approx(0.0, abs=1.0)
    hs = np.linspace(300e3, 2000e3, 20)
    areas = [coverage_area(h, math.radians(30)) for h in hs]
    assert np.all(np.diff(areas) > 0)
    # cap formula at alpha = pi covers the sphere
    assert 2 * math.pi * R**2 * (1 - math.cos(math.pi)) == pytest.approx(4 * math.pi * R**2)


def test_elevation_cases():
    site = GroundSite(0.3, 1.2)
    p = site.position()
    zenith = p / np.linalg.norm(p) * (R + 500e3)
    assert elevation(site, zenith) == pytest.approx(math.pi / 2)
    assert elevation(site, -zenith) < 0
    assert in_coverage(site, zenith, CoverageSpec(math.radians(89)))
    assert not in_coverage(site, -zenith, CoverageSpec(0.0))
    with pytest.raises(ValueError):
        elevations(p, p)


def _place(site: GroundSite, h: float, eps: float, bearing: float) -> np.ndarray:
    """Satellite at altitude h seen from the site at elevation eps."""
    up = site.position() / np.linalg.norm(site.position())
    east = np.cross([0.0, 0.0, 1.0], up)
    east /= np.linalg.norm(east)
    north = np.cross(up, east)
    d = slant_range(h, eps)
    horiz = math.cos(bearing) * north + math.sin(bearing) * east
    return site.position() + d * (math.cos(eps) * horiz + math.sin(eps) * up)


def test_elevation_slant_range_consistency():
    site = GroundSite.from_degrees(40.0, -3.0)
    for eps in np.radians([5, 25, 45, 80]):
        sat = _place(site, 800e3, eps, 0.7)
        assert np.linalg.norm(sat) == pytest.approx(R + 800e3, rel=1e-9)
        assert elevation(site, sat) == pytest.approx(eps, abs=1e-9)


def test_boundary_is_closed():
    site = GroundSite.from_degrees(10.0, 20.0)
    eps = math.radians(30)
    sat = _place(site, 700e3, eps, 1.0)
    e = elevation(site, sat)
    assert in_coverage(site, sat, CoverageSpec(e))


def test_coverage_tests_equivalent_on_random_pairs():
    rng = np.random.default_rng(7)
    n = 100_000
    spec = CoverageSpec(math.radians(30))
    lat = np.arcsin(rng.uniform(-1, 1, n))
    lon = rng.uniform(-math.pi, math.pi, n)
    sites = R * np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)
    h = rng.uniform(300e3, 2000e3, n)
    # satellites concentrated around each site so both outcomes are frequent
    offs = rng.normal(scale=0.15, size=(n, 3))
    dirs = sites / R + offs
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sats = dirs * (R + h)[:, None]
    delta = sats - sites
    dist = np.linalg.norm(delta, axis=1)
    sin_e = np.einsum("ij,ij->i", delta, sites / R) / dist
    by_elev = sin_e >= math.sin(spec.min_elevation_rad)
    limit = np.array([slant_range(x, spec.min_elevation_rad) for x in h])
    by_dist = dist <= limit
    disagree = by_elev != by_dist
    assert np.all(np.abs(dist[disagree] - limit[disagree]) < 1.0)
    assert 0.1 < by_elev.mean() < 0.9
    # library entry points agree on a subsample
    for k in range(0, n, 5000):
        s = GroundSite(float(lat[k]), float(lon[k]))
        assert in_coverage(s, sats[k], spec) == in_coverage_by_distance(s, sats[k], spec) or abs(
            dist[k] - limit[k]) < 1.0


def _polar_one_sat(h: float, earth_rotation: bool = False) -> Constellation:
    return Constellation([ShellConfig(Geometry.STAR, 1, 1, h, math.pi / 2)], earth_rotation=earth_rotation)


def test_pass_duration_matches_simulation():
    h, eps = 575e3, math.radians(30)
    c = _polar_one_sat(h)
    # the sub-satellite point of the polar orbit runs along the meridian lon = 0
    site = GroundSite(0.5, 0.0)
    spec = CoverageSpec(eps)
    dt = 1.0
    samples = pass_rate_profile(c, site, SatelliteId(0, 0, 0), GSL, spec, dt)
    duration = samples[-1].t - samples[0].t
    assert duration == pytest.approx(max_pass_duration(h, eps), abs=dt)
    assert max_pass_duration(h, math.pi / 2 - 1e-12) == pytest.approx(0.0, abs=1e-3)

    # symmetric pass: rate series mirrors about mid-pass, peak in the middle
    rates = np.array([s.rate_bps for s in samples])
    times = np.array([s.t for s in samples])
    mid = 0.5 * (times[0] + times[-1])
    mirrored = np.interp(2 * mid - times, times, rates)
    assert np.allclose(mirrored, rates, rtol=0.01)
    assert abs(times[np.argmax(rates)] - mid) <= dt
    edge = link_rate(GSL, slant_range(h, eps))
    assert samples[0].rate_bps == pytest.approx(edge, rel=1e-6)
    assert samples[-1].rate_bps == pytest.approx(edge, rel=1e-6)

    # a misaligned site sees a strictly shorter pass
    off = GroundSite(0.5, 0.05)
    s2 = pass_rate_profile(c, off, SatelliteId(0, 0, 0), GSL, spec, dt)
    assert s2[-1].t - s2[0].t < duration - 1.0


def test_lower_orbit_shorter_pass():
    spec = CoverageSpec(math.radians(30))
    site = GroundSite(0.5, 0.0)
    low = pass_rate_profile(_polar_one_sat(575e3), site, SatelliteId(0, 0, 0), GSL, spec, 1.0)
    high = pass_rate_profile(_polar_one_sat(1200e3), site, SatelliteId(0, 0, 0), GSL, spec, 1.0)
    assert low[-1].t - low[0].t < high[-1].t - high[0].t


def test_no_pass_gives_empty_series():
    c = Constellation([ShellConfig(Geometry.STAR, 1, 1, 575e3, math.radians(10))], earth_rotation=False)
    site = GroundSite.from_degrees(80.0, 0.0)
    assert pass_rate_profile(c, site, SatelliteId(0, 0, 0), GSL, CoverageSpec(), 10.0, search_horizon_s=7000) == []


def test_availability_small_grid(tmp_path):
    c = Constellation([preset("kepler")])
    lats = np.radians([-60, -30, 0, 30, 60])
    prof = availability_by_latitude(c, CoverageSpec(), lats, n_longitudes=24, time_step_s=60)
    assert np.all((prof.availability >= 0) & (prof.availability <= 1))
    assert np.all(prof.mean_visible >= prof.availability)
    # symmetric constellation gives a symmetric profile
    assert np.allclose(prof.availability, prof.availability[::-1], atol=0.02)
    path = tmp_path / "a.csv"
    prof.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "latitude_deg,availability,mean_visible"
    assert len(lines) == 6
    with pytest.raises(ValueError):
        availability_by_latitude(c, CoverageSpec(), [], 10)


def test_availability_threads_bit_identical():
    c = Constellation([preset("kepler")])
    lats = np.radians([0, 45, 80])
    a = availability_by_latitude(c, CoverageSpec(), lats, 20, 120.0, threads=1)
    b = availability_by_latitude(c, CoverageSpec(), lats, 20, 120.0, threads=4)
    assert np.array_equal(a.availability, b.availability)
    assert np.array_equal(a.mean_visible, b.mean_visible)


@settings(max_examples=30)
@given(st.floats(-math.pi / 2, math.pi / 2), st.floats(-10, 10))
def test_ground_site_normalises_longitude(lat, lon):
    s = GroundSite(lat, lon)
    assert -math.pi <= s.longitude_rad < math.pi
    assert np.linalg.norm(s.position()) == pytest.approx(R)


def test_profile_rows():
    prof = AvailabilityProfile(np.array([0.0]), np.array([0.5]), np.array([0.7]))
    assert list(prof.rows()) == [(0.0, 0.5, 0.7)]
