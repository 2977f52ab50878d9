"""Physical constants used throughout the package."""
from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K
REFERENCE_TEMPERATURE_K = 290.0


@dataclass(frozen=True)
class PhysicalConstants:
    """Gravitational parameter, Earth radius, sidereal day and speed of light.

    The default uses a spherical Earth of mean radius 6371 km. The
    ``wgs-equatorial`` set swaps in the WGS-84 equatorial radius, which is what
    reproduces the classic 554 km / 1248 km repeat-ground-track altitudes.
    """

    gm: float = 3.986004418e14  # m^3/s^2
    earth_radius_m: float = 6_371_000.0
    equinoctial_day_s: float = 86164.0
    c_mps: float = SPEED_OF_LIGHT

    @property
    def earth_rotation_rate(self) -> float:
        """Earth rotation rate in rad/s (one turn per equinoctial day)."""
        return 2.0 * math.pi / self.equinoctial_day_s


SPHERICAL = PhysicalConstants()
WGS_EQUATORIAL = PhysicalConstants(earth_radius_m=6_378_137.0)

CONSTANT_SETS = {"spherical": SPHERICAL, "wgs-equatorial": WGS_EQUATORIAL}


def constants_by_name(name: str) -> PhysicalConstants:
    try:
        return CONSTANT_SETS[name]
    except KeyError:
        raise ValueError(
            f"unknown constant set {name!r}; choose from {sorted(CONSTANT_SETS)}"
        ) from None
