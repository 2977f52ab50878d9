"""RF link budget: path loss, noise, antenna gain, SNR and Shannon rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.special import j1

from .constants import BOLTZMANN, REFERENCE_TEMPERATURE_K, SPEED_OF_LIGHT, SPHERICAL, PhysicalConstants
from .orbits import ShellConfig, max_inter_plane_distance


def db(x):
    return 10.0 * np.log10(x)


def from_db(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


# -- antennas ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParabolicAntenna:
    diameter_m: float
    efficiency: float = 0.55

    def __post_init__(self) -> None:
        if not self.diameter_m > 0:
            raise ValueError("diameter must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class PhasedArray:
    """K x K digitally steered array; spacing in wavelengths."""

    k: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self) -> None:
        if self.k < 1 or not self.spacing_wavelengths > 0:
            raise ValueError("need k >= 1 and positive spacing")


@dataclass(frozen=True)
class ButlerArray:
    """K x K array fed by a Butler matrix: K fixed beams, polar cut fixed."""

    k: int
    spacing_wavelengths: float = 0.5
    fixed_polar_rad: float = math.pi / 2

    def __post_init__(self) -> None:
        if self.k < 1 or not self.spacing_wavelengths > 0:
            raise ValueError("need k >= 1 and positive spacing")


AntennaSpec = Union[ParabolicAntenna, PhasedArray, ButlerArray]


def parabolic_gain(diameter_m: float, f: float, efficiency: float, c: float = SPEED_OF_LIGHT) -> float:
    """Peak aperture gain eta * (pi D f / c)^2 (linear)."""
    return efficiency * (math.pi * diameter_m * f / c) ** 2


def parabolic_pattern(antenna: ParabolicAntenna, f: float, off_axis_rad, c: float = SPEED_OF_LIGHT):
    """Gain of a uniformly illuminated circular aperture ``off_axis_rad`` from boresight."""
    peak = parabolic_gain(antenna.diameter_m, f, antenna.efficiency, c)
    x = math.pi * antenna.diameter_m * f / c * np.sin(np.asarray(off_axis_rad, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        shape = np.where(np.abs(x) < 1e-12, 1.0, (2.0 * j1(x) / x) ** 2)
    return peak * shape


def peak_gain(antenna: AntennaSpec, f: float, c: float = SPEED_OF_LIGHT) -> float:
    if isinstance(antenna, ParabolicAntenna):
        return parabolic_gain(antenna.diameter_m, f, antenna.efficiency, c)
    return float(antenna.k**2)


# -- rates ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSet:
    """Discrete rates (bps) a link may select; empty means continuous Shannon."""

    rates: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        rates = tuple(sorted(float(r) for r in self.rates))
        if any(r <= 0 for r in rates):
            raise ValueError("rates must be strictly positive")
        object.__setattr__(self, "rates", rates)

    @property
    def continuous(self) -> bool:
        return not self.rates

    def select(self, shannon):
        """Largest rate not above the Shannon capacity, else 0."""
        shannon = np.asarray(shannon, dtype=float)
        if self.continuous:
            return shannon
        table = np.asarray(self.rates)
        idx = np.searchsorted(table, shannon, side="right") - 1
        return np.where(idx >= 0, table[np.clip(idx, 0, None)], 0.0)


CONTINUOUS = RateSet()


@dataclass(frozen=True)
class LinkParams:
    carrier_hz: float
    bandwidth_hz: float
    tx_power_w: float
    noise_temperature_k: float
    noise_figure_db: float
    tx_antenna: AntennaSpec
    rx_antenna: AntennaSpec
    pointing_loss_db: float = 0.3
    pointing_loss_ends: int = 2
    rates: RateSet = field(default_factory=RateSet)
    name: str = ""

    def __post_init__(self) -> None:
        for attr in ("carrier_hz", "bandwidth_hz", "tx_power_w", "noise_temperature_k"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"{attr} must be positive")
        if self.noise_figure_db < 0 or self.pointing_loss_db < 0:
            raise ValueError("noise figure and pointing loss must be non-negative")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def noise_power_w(self) -> float:
        return noise_power(self.bandwidth_hz, self.noise_temperature_k, self.noise_figure_db)

    @property
    def pointing_loss(self) -> float:
        """Linear loss factor (>= 1) for all antenna ends of one link."""
        return float(from_db(self.pointing_loss_db * self.pointing_loss_ends))

    def with_(self, **changes) -> "LinkParams":
        return replace(self, **changes)


def free_space_path_loss(d, f: float, c: float = SPEED_OF_LIGHT):
    """(4 pi d f / c)^2, dimensionless."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or f <= 0:
        raise ValueError("distance and frequency must be positive")
    out = (4.0 * math.pi * d * f / c) ** 2
    return float(out) if out.ndim == 0 else out


def noise_power(bandwidth_hz: float, noise_temperature_k: float, noise_figure_db: float) -> float:
    """k_B B (T_N + T_0 (F - 1)) in watts, T_0 = 290 K."""
    excess = REFERENCE_TEMPERATURE_K * (10.0 ** (noise_figure_db / 10.0) - 1.0)
    return BOLTZMANN * bandwidth_hz * (noise_temperature_k + excess)


def snr(params: LinkParams, d, g_tx=None, g_rx=None, interference_w=0.0):
    """Received SNR (or SINR when ``interference_w`` is given)."""
    if g_tx is None:
        g_tx = peak_gain(params.tx_antenna, params.carrier_hz)
    if g_rx is None:
        g_rx = peak_gain(params.rx_antenna, params.carrier_hz)
    received = (
        params.tx_power_w
        * np.asarray(g_tx)
        * np.asarray(g_rx)
        / (free_space_path_loss(d, params.carrier_hz) * params.pointing_loss)
    )
    out = received / (params.noise_power_w + np.asarray(interference_w))
    return float(out) if np.ndim(out) == 0 else out


def shannon_rate(params: LinkParams, snr_value):
    """B log2(1 + SNR), quantised to the link's rate set when one is given."""
    snr_value = np.asarray(snr_value, dtype=float)
    if np.any(snr_value < 0):
        raise ValueError("SNR must be non-negative")
    out = params.rates.select(params.bandwidth_hz * np.log2(1.0 + snr_value))
    return float(out) if np.ndim(out) == 0 else out


def link_rate(params: LinkParams, d, g_tx=None, g_rx=None):
    return shannon_rate(params, snr(params, d, g_tx, g_rx))


# -- presets ----------------------------------------------------------------------------


GSL = LinkParams(
    carrier_hz=20e9,
    bandwidth_hz=500e6,
    tx_power_w=10.0,
    noise_temperature_k=150.0,
    noise_figure_db=1.2,
    tx_antenna=ParabolicAntenna(0.26),
    rx_antenna=ParabolicAntenna(0.33),
    name="gsl",
)

ISL = LinkParams(
    carrier_hz=26e9,
    bandwidth_hz=500e6,
    tx_power_w=10.0,
    noise_temperature_k=290.0,
    noise_figure_db=2.0,
    tx_antenna=ParabolicAntenna(0.26),
    rx_antenna=ParabolicAntenna(0.26),
    name="isl",
)

LINK_PRESETS = {"gsl": GSL, "isl": ISL}


def with_array(params: LinkParams, antenna: AntennaSpec) -> LinkParams:
    """Swap both ends to ``antenna``. Arrays carry no fixed pointing loss:
    their mispointing is modelled explicitly through stale beam weights."""
    loss = params.pointing_loss_db if isinstance(antenna, ParabolicAntenna) else 0.0
    return replace(params, tx_antenna=antenna, rx_antenna=antenna, pointing_loss_db=loss)


# -- global ISL connectivity ------------------------------------------------------------


@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    distance_m: float
    snr: float
    shannon_bps: float
    selected_bps: float
    margin_db: float


def isl_connectivity_check(
    params: LinkParams,
    shell: ShellConfig,
    rates: RateSet | None = None,
    floor_bps: float = 0.0,
    constants: PhysicalConstants = SPHERICAL,
) -> ConnectivityReport:
    """Can every satellite reach its nearest inter-plane neighbour at the worst spot?

    The margin is the SNR surplus over what the smallest admissible rate needs:
    the lowest rate of ``rates``, or ``floor_bps`` in continuous mode. With a
    zero floor in continuous mode any positive SNR connects and the margin is
    infinite.
    """
    rates = rates if rates is not None else params.rates
    d = max_inter_plane_distance(shell.sats_per_plane, shell.n_planes, shell.altitude_m, constants)
    s = snr(params, d)
    capacity = params.bandwidth_hz * math.log2(1.0 + s)
    if rates.continuous:
        needed = floor_bps
        selected = capacity if capacity > floor_bps else 0.0
    else:
        needed = rates.rates[0]
        below = [r for r in rates.rates if r < capacity]
        selected = below[-1] if below else 0.0
    if needed > 0:
        required_snr = 2.0 ** (needed / params.bandwidth_hz) - 1.0
        margin = 10.0 * math.log10(s / required_snr) if s > 0 else -math.inf
    else:
        margin = math.inf if s > 0 else -math.inf
    connected = 0 < needed < capacity if needed > 0 else capacity > 0
    return ConnectivityReport(connected, d, s, capacity, selected, margin)
