"""Walker constellations on ideal circular orbits.

Satellites move on circular Keplerian orbits and the Earth rotates uniformly
underneath them; there are no perturbations. Positions are returned in an
Earth-fixed frame whose z axis is the rotation axis and whose x axis points to
the reference meridian at t = 0.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constants import SPHERICAL, PhysicalConstants

TWO_PI = 2.0 * math.pi


class Geometry(str, enum.Enum):
    STAR = "star"
    DELTA = "delta"


@dataclass(frozen=True)
class ShellConfig:
    """Walker parameters of one orbital shell.

    ``inter_plane_phasing`` shifts plane ``a`` along its orbit by
    ``phasing * a`` in-plane slots. ``per_plane_altitude_offset_m`` holds
    one additive offset per plane (orbital separation); empty means no offset.
    """

    geometry: Geometry
    n_sats: int
    n_planes: int
    altitude_m: float
    inclination_rad: float
    inter_plane_phasing: float = 0.0
    per_plane_altitude_offset_m: tuple[float, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        object.__setattr__(
            self, "per_plane_altitude_offset_m", tuple(self.per_plane_altitude_offset_m)
        )
        if self.n_planes < 1 or self.n_sats < 1:
            raise ValueError("n_sats and n_planes must be positive")
        if self.n_sats % self.n_planes:
            raise ValueError(
                f"n_sats={self.n_sats} is not divisible by n_planes={self.n_planes}"
            )
        if not self.altitude_m > 0:
            raise ValueError("altitude_m must be positive")
        if not 0 < self.inclination_rad <= math.pi - 1e-9:
            raise ValueError("inclination_rad must lie in (0, pi)")
        if not 0 <= self.inter_plane_phasing < 1:
            raise ValueError("inter_plane_phasing must lie in [0, 1)")
        offsets = self.per_plane_altitude_offset_m
        if offsets and len(offsets) != self.n_planes:
            raise ValueError("per_plane_altitude_offset_m needs one entry per plane")

    @property
    def sats_per_plane(self) -> int:
        return self.n_sats // self.n_planes

    @property
    def raan_step(self) -> float:
        span = math.pi if self.geometry is Geometry.STAR else TWO_PI
        return span / self.n_planes

    def raan(self, plane: int) -> float:
        return plane * self.raan_step

    def initial_anomaly(self, plane: int, slot: int) -> float:
        n_op = self.sats_per_plane
        nu = TWO_PI * slot / n_op + self.inter_plane_phasing * (TWO_PI / n_op) * plane
        return math.fmod(nu, TWO_PI)

    def plane_altitude(self, plane: int) -> float:
        if self.per_plane_altitude_offset_m:
            return self.altitude_m + self.per_plane_altitude_offset_m[plane]
        return self.altitude_m


PRESETS: dict[str, ShellConfig] = {
    "kepler": ShellConfig(Geometry.STAR, 140, 7, 575e3, math.radians(98.6), name="kepler"),
    "oneweb": ShellConfig(Geometry.STAR, 648, 18, 1200e3, math.radians(86.4), name="oneweb"),
    "starlink550": ShellConfig(
        Geometry.DELTA, 1584, 72, 550e3, math.radians(53.0), name="starlink550"
    ),
}


def preset(name: str) -> ShellConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown constellation preset {name!r}; known: {sorted(PRESETS)}") from None


class SatelliteId(NamedTuple):
    shell: int
    plane: int
    slot: int


@dataclass(frozen=True)
class SatelliteState:
    position_m: np.ndarray
    velocity_mps: np.ndarray
    epoch_s: float


# -- closed-form orbital quantities -------------------------------------------------


def _check_altitude(h: float) -> None:
    if not h > 0:
        raise ValueError(f"altitude must be positive, got {h}")


def orbital_velocity(h: float, constants: PhysicalConstants = SPHERICAL) -> float:
    """Circular orbital speed (m/s) at altitude ``h`` metres."""
    _check_altitude(h)
    return math.sqrt(constants.gm / (constants.earth_radius_m + h))


def orbital_period(h: float, constants: PhysicalConstants = SPHERICAL) -> float:
    """Circular orbital period (s) at altitude ``h`` metres."""
    _check_altitude(h)
    return math.sqrt(4.0 * math.pi**2 / constants.gm * (constants.earth_radius_m + h) ** 3)


def recursive_altitude(n: int, m: int = 1, constants: PhysicalConstants = SPHERICAL) -> float:
    """Altitude whose ground track repeats after ``n`` revolutions in ``m`` days."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    period = m * constants.equinoctial_day_s
    return ((period**2 * constants.gm) / (2.0 * n * math.pi) ** 2) ** (1.0 / 3.0) - (
        constants.earth_radius_m
    )


def intra_plane_distance(n_op: int, h: float, constants: PhysicalConstants = SPHERICAL) -> float:
    """Chord between neighbouring satellites of one plane."""
    if n_op < 2:
        raise ValueError("need at least two satellites per plane")
    return 2.0 * (constants.earth_radius_m + h) * math.sin(math.pi / n_op)


def spherical_distance(
    theta_u: float,
    theta_v: float,
    phi_u: float,
    phi_v: float,
    h: float,
    constants: PhysicalConstants = SPHERICAL,
) -> float:
    """Chord between two points on the sphere of radius R_E + h.

    ``theta`` are polar angles (from the north pole), ``phi`` azimuths.
    """
    r = constants.earth_radius_m + h
    # 1 - cos(tu)cos(tv) - cos(dphi)sin(tu)sin(tv), rewritten without cancellation
    inner = 2.0 * math.sin((theta_u - theta_v) / 2) ** 2 + 2.0 * math.sin(theta_u) * math.sin(
        theta_v
    ) * math.sin((phi_u - phi_v) / 2) ** 2
    return math.sqrt(max(0.0, 2.0 * r * r * inner))


def aligned_inter_plane_distance(
    n_planes: int, h: float, constants: PhysicalConstants = SPHERICAL
) -> float:
    """Equatorial distance between aligned satellites of adjacent star planes."""
    return 2.0 * (constants.earth_radius_m + h) * math.sin(math.pi / (2 * n_planes))


def max_inter_plane_distance(
    n_op: int, n_planes: int, h: float, constants: PhysicalConstants = SPHERICAL
) -> float:
    """Worst-case distance to the nearest satellite of an adjacent star plane."""
    if n_op < 2 or n_planes < 2:
        raise ValueError("need n_op >= 2 and n_planes >= 2")
    r = constants.earth_radius_m + h
    plus = math.sin(math.pi / 2 + math.pi / n_op)
    minus = math.sin(math.pi / 2 - math.pi / n_op)
    assert math.isclose(plus, minus, rel_tol=1e-12)
    return r * math.sqrt(2.0 - 2.0 * math.cos(math.pi / n_planes) * plus)


# -- constellation ---------------------------------------------------------------------


def ecef_to_latlon(position: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Geocentric latitude and longitude (radians) of Earth-fixed vectors."""
    p = np.asarray(position, dtype=float)
    lat = np.arctan2(p[..., 2], np.hypot(p[..., 0], p[..., 1]))
    lon = np.arctan2(p[..., 1], p[..., 0])
    return lat, lon


def latlon_to_unit(lat, lon) -> np.ndarray:
    lat, lon = np.broadcast_arrays(np.asarray(lat, dtype=float), np.asarray(lon, dtype=float))
    return np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1
    )


def shortest_angle(a, b):
    """Signed shortest angular difference ``a - b`` in [-pi, pi)."""
    return (np.asarray(a) - np.asarray(b) + math.pi) % TWO_PI - math.pi


@dataclass
class Constellation:
    """Indexed satellites of one or more shells.

    Satellites are numbered shell by shell, plane by plane, slot by slot; the
    flat index is what the vectorised methods use.
    """

    shells: Sequence[ShellConfig]
    constants: PhysicalConstants = SPHERICAL
    earth_rotation: bool = True
    ids: list[SatelliteId] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if isinstance(self.shells, ShellConfig):
            self.shells = [self.shells]
        self.shells = tuple(self.shells)
        if not self.shells:
            raise ValueError("constellation needs at least one shell")
        ids, raan, nu0, radius, incl = [], [], [], [], []
        for s_idx, shell in enumerate(self.shells):
            for a in range(shell.n_planes):
                for k in range(shell.sats_per_plane):
                    ids.append(SatelliteId(s_idx, a, k))
                    raan.append(shell.raan(a))
                    nu0.append(shell.initial_anomaly(a, k))
                    radius.append(self.constants.earth_radius_m + shell.plane_altitude(a))
                    incl.append(shell.inclination_rad)
        self.ids = ids
        self._index = {sid: i for i, sid in enumerate(ids)}
        self.raan = np.array(raan)
        self.anomaly0 = np.array(nu0)
        self.radius = np.array(radius)
        self.inclination = np.array(incl)
        self.altitude = self.radius - self.constants.earth_radius_m
        self.mean_motion = np.sqrt(self.constants.gm / self.radius**3)
        self.shell_index = np.array([i.shell for i in ids])
        self.plane = np.array([i.plane for i in ids])
        self.slot = np.array([i.slot for i in ids])
        self._cos_raan, self._sin_raan = np.cos(self.raan), np.sin(self.raan)
        self._cos_i, self._sin_i = np.cos(self.inclination), np.sin(self.inclination)

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, sat: SatelliteId) -> int:
        try:
            return self._index[SatelliteId(*sat)]
        except KeyError:
            raise KeyError(f"unknown satellite {sat}") from None

    @property
    def omega_earth(self) -> float:
        return self.constants.earth_rotation_rate if self.earth_rotation else 0.0

    def anomaly(self, t: float) -> np.ndarray:
        return np.mod(self.anomaly0 + self.mean_motion * t, TWO_PI)

    def _frame(self, t: float):
        u = self.anomaly0 + self.mean_motion * t
        cu, su = np.cos(u), np.sin(u)
        cO, sO, ci, si = self._cos_raan, self._sin_raan, self._cos_i, self._sin_i
        # unit radial and along-track vectors in the inertial frame
        radial = np.stack([cO * cu - sO * su * ci, sO * cu + cO * su * ci, su * si], axis=-1)
        along = np.stack([-cO * su - sO * cu * ci, -sO * su + cO * cu * ci, cu * si], axis=-1)
        return radial, along

    def _to_fixed(self, vectors: np.ndarray, t: float) -> np.ndarray:
        theta = self.omega_earth * t
        if theta == 0.0:
            return vectors
        c, s = math.cos(theta), math.sin(theta)
        out = np.empty_like(vectors)
        out[..., 0] = c * vectors[..., 0] + s * vectors[..., 1]
        out[..., 1] = -s * vectors[..., 0] + c * vectors[..., 1]
        out[..., 2] = vectors[..., 2]
        return out

    def positions(self, t: float) -> np.ndarray:
        """Earth-fixed positions (N, 3) in metres at time ``t``."""
        radial, _ = self._frame(t)
        return self._to_fixed(radial * self.radius[:, None], t)

    def velocities(self, t: float) -> np.ndarray:
        """Orbital (inertial) velocity vectors expressed in Earth-fixed axes."""
        _, along = self._frame(t)
        return self._to_fixed(along * (self.radius * self.mean_motion)[:, None], t)

    def ground_velocities(self, t: float) -> np.ndarray:
        """Time derivative of :meth:`positions`, i.e. velocity relative to the ground."""
        pos = self.positions(t)
        w = self.omega_earth
        return self.velocities(t) - np.cross(np.array([0.0, 0.0, w]), pos)

    def orbit_normals(self, t: float) -> np.ndarray:
        """Unit angular-momentum vectors (pitch axis) in Earth-fixed axes."""
        normal = np.stack([self._sin_raan * self._sin_i, -self._cos_raan * self._sin_i, self._cos_i], axis=-1)
        return self._to_fixed(normal, t)

    def propagate(self, sat: SatelliteId, t: float) -> SatelliteState:
        if t < 0:
            raise ValueError("t must be non-negative")
        i = self.index(sat)
        return SatelliteState(self.positions(t)[i], self.velocities(t)[i], float(t))

    def plane_members(self, shell: int, plane: int) -> np.ndarray:
        return np.flatnonzero((self.shell_index == shell) & (self.plane == plane))
