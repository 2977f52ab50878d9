"""Scenario files: a YAML document validated into a typed tree.

Every section has documented defaults. Unknown keys are rejected, and the
defaults the loader filled in are listed so they can be written to the
provenance block of each run.
"""
from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .constants import CONSTANT_SETS, constants_by_name
from .coverage import CoverageSpec, GroundSite
from .link import GSL, ISL, ButlerArray, LinkParams, ParabolicAntenna, PhasedArray, RateSet, with_array
from .orbits import PRESETS, Constellation, Geometry, ShellConfig
from .routing import MetricKind, RoutingMetric, load_sites

EXPERIMENTS = (
    "table2-regression",
    "pass-profile",
    "availability",
    "isl-rate-cdf",
    "beam-pattern",
    "reestablishment-sweep",
    "routing-latency",
    "max-load",
    "connectivity-check",
)
STOCHASTIC = {"routing-latency", "beam-pattern"}


class ScenarioError(ValueError):
    """Raised for unreadable or invalid scenario documents."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ShellModel(_Strict):
    geometry: Literal["star", "delta"]
    n_sats: int = Field(gt=0)
    n_planes: int = Field(gt=0)
    altitude_km: float = Field(gt=0)
    inclination_deg: float = Field(gt=0, lt=180)
    inter_plane_phasing: float = Field(0.0, ge=0, lt=1)
    per_plane_altitude_offset_m: list[float] = []
    name: str = ""

    @model_validator(mode="after")
    def _divisible(self):
        if self.n_sats % self.n_planes:
            raise ValueError(f"n_sats={self.n_sats} is not divisible by n_planes={self.n_planes}")
        if self.per_plane_altitude_offset_m and len(self.per_plane_altitude_offset_m) != self.n_planes:
            raise ValueError("per_plane_altitude_offset_m needs one entry per plane")
        return self

    def to_shell(self) -> ShellConfig:
        return ShellConfig(Geometry(self.geometry), self.n_sats, self.n_planes, self.altitude_km * 1e3,
                           math.radians(self.inclination_deg), self.inter_plane_phasing,
                           tuple(self.per_plane_altitude_offset_m), self.name)


class LinkOverrides(_Strict):
    """Changes to a preset link bundle; unset fields keep the preset value."""

    carrier_hz: Optional[float] = Field(None, gt=0)
    bandwidth_hz: Optional[float] = Field(None, gt=0)
    tx_power_w: Optional[float] = Field(None, gt=0)
    noise_temperature_k: Optional[float] = Field(None, gt=0)
    noise_figure_db: Optional[float] = Field(None, ge=0)
    pointing_loss_db: Optional[float] = Field(None, ge=0)
    rates_bps: Optional[list[float]] = None

    def apply(self, base: LinkParams) -> LinkParams:
        changes = {k: v for k, v in self.model_dump().items() if v is not None and k != "rates_bps"}
        if self.rates_bps is not None:
            changes["rates"] = RateSet(tuple(self.rates_bps))
        return base.with_(**changes)


class LinkSection(_Strict):
    gsl: LinkOverrides = LinkOverrides()
    isl: LinkOverrides = LinkOverrides()


class CoverageSection(_Strict):
    min_elevation_deg: float = Field(30.0, ge=0, lt=90)


class AntennaSection(_Strict):
    mode: Literal["parabolic", "digital", "butler"] = "parabolic"
    k: int = Field(16, ge=1)


class MatchingSection(_Strict):
    reestablish_dt_s: list[float] = [0.0, 2.0, 10.0, 30.0]
    horizon_s: Optional[float] = Field(None, gt=0)
    sample_dt_s: float = Field(1.0, gt=0)
    snapshot_dt_s: float = Field(60.0, gt=0)
    lookahead: bool = True
    all_planes: bool = False

    @field_validator("reestablish_dt_s")
    @classmethod
    def _non_negative(cls, v):
        if not v or any(x < 0 for x in v):
            raise ValueError("needs at least one non-negative value")
        return v


class SiteModel(_Strict):
    id: str = ""
    latitude_deg: float = Field(ge=-90, le=90)
    longitude_deg: float
    altitude_m: float = 0.0

    def to_site(self) -> GroundSite:
        return GroundSite.from_degrees(self.latitude_deg, self.longitude_deg, self.altitude_m, self.id)


class TrafficSection(_Strict):
    """Offered load per ground site: ``load_bps`` if given, otherwise
    ``load_fraction`` of the latency metric's maximum load per site."""

    load_bps: Optional[float] = Field(None, ge=0)
    load_fraction: float = Field(1.0, ge=0)
    packet_bits: float = Field(12000.0, gt=0)
    arrivals: Literal["poisson", "deterministic"] = "poisson"
    horizon_s: float = Field(0.2, gt=0)
    queue_mode: Literal["shared", "duplex"] = "shared"
    drain: bool = True
    trace: bool = False


class RoutingSection(_Strict):
    metrics: list[Literal["hop_count", "path_loss", "latency"]] = ["hop_count", "path_loss", "latency"]
    queue_model: Literal["constant", "mm1"] = "constant"
    constant_wait_s: float = Field(0.0, ge=0)
    path_loss_scale: Literal["db", "linear"] = "db"
    snapshot_t_s: float = Field(0.0, ge=0)

    def metric(self, name: str, packet_bits: float, offered_pps: float = 0.0) -> RoutingMetric:
        return RoutingMetric(MetricKind(name), packet_bits, self.queue_model, self.constant_wait_s,
                             offered_pps, self.path_loss_scale)


class AvailabilitySection(_Strict):
    lat_step_deg: float = Field(5.0, gt=0)
    lat_max_deg: float = Field(90.0, ge=0, le=90)
    n_longitudes: int = Field(100, ge=1)
    time_step_s: float = Field(10.0, gt=0)
    duration_s: Optional[float] = Field(None, gt=0)


class PassProfileSection(_Strict):
    site: SiteModel = SiteModel(id="lat10", latitude_deg=10.0, longitude_deg=0.0)
    shell: int = Field(0, ge=0)
    plane: int = Field(0, ge=0)
    slot: int = Field(0, ge=0)
    dt_s: float = Field(1.0, gt=0)
    t_start_s: float = Field(0.0, ge=0)


class BeamPatternSection(_Strict):
    k: int = Field(4, ge=1)
    n_azimuths: int = Field(721, ge=2)
    sphere_samples: int = Field(200_000, ge=1)


class Scenario(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    constellation: Union[str, list[ShellModel]] = "kepler"
    constants: Literal["spherical", "wgs-equatorial"] = "spherical"
    link: LinkSection = LinkSection()
    coverage: CoverageSection = CoverageSection()
    antenna: AntennaSection = AntennaSection()
    matching: MatchingSection = MatchingSection()
    ground_segment: Union[str, list[SiteModel]] = "ksat"
    traffic: TrafficSection = TrafficSection()
    routing: RoutingSection = RoutingSection()
    availability: AvailabilitySection = AvailabilitySection()
    pass_profile: PassProfileSection = PassProfileSection()
    beam_pattern: BeamPatternSection = BeamPatternSection()
    output: str = "out"
    threads: int = Field(1, ge=1)

    @field_validator("constellation")
    @classmethod
    def _known_preset(cls, v):
        if isinstance(v, str) and v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}; known: {sorted(PRESETS)}")
        if isinstance(v, list) and not v:
            raise ValueError("needs at least one shell")
        return v

    @field_validator("ground_segment")
    @classmethod
    def _known_segment(cls, v):
        if isinstance(v, str) and v != "ksat" and not Path(v).is_file():
            raise ValueError(f"ground segment {v!r} is neither 'ksat' nor a readable file")
        return v

    @model_validator(mode="after")
    def _seed_for_stochastic(self):
        if self.experiment in STOCHASTIC and self.seed is None:
            raise ValueError(f"seed is mandatory for experiment {self.experiment!r}")
        return self

    # -- builders --

    def physical_constants(self):
        return constants_by_name(self.constants)

    def shells(self) -> list[ShellConfig]:
        if isinstance(self.constellation, str):
            return [PRESETS[self.constellation]]
        return [s.to_shell() for s in self.constellation]

    def build_constellation(self) -> Constellation:
        return Constellation(self.shells(), self.physical_constants())

    def gsl(self) -> LinkParams:
        return self.link.gsl.apply(GSL)

    def isl(self) -> LinkParams:
        """ISL bundle with the configured antenna at both ends."""
        base = self.link.isl.apply(ISL)
        if self.antenna.mode == "parabolic":
            return base
        cls = PhasedArray if self.antenna.mode == "digital" else ButlerArray
        return with_array(base, cls(self.antenna.k))

    def isl_parabolic(self) -> LinkParams:
        base = self.link.isl.apply(ISL)
        return base if isinstance(base.tx_antenna, ParabolicAntenna) else base.with_(
            tx_antenna=ISL.tx_antenna, rx_antenna=ISL.rx_antenna)

    def coverage_spec(self) -> CoverageSpec:
        return CoverageSpec(math.radians(self.coverage.min_elevation_deg))

    def sites(self) -> list[GroundSite]:
        if isinstance(self.ground_segment, str):
            return load_sites(self.ground_segment)
        return [s.to_site() for s in self.ground_segment]


def _defaults(model: BaseModel, prefix: str = "") -> dict[str, Any]:
    """Dotted paths of every field the document left unset, with the value used."""
    out: dict[str, Any] = {}
    for name in type(model).model_fields:
        value = getattr(model, name)
        path = f"{prefix}{name}"
        if name not in model.model_fields_set:
            out[path] = value.model_dump(mode="json") if isinstance(value, BaseModel) else _plain(value)
        elif isinstance(value, BaseModel):
            out.update(_defaults(value, path + "."))
    return out


def _plain(value):
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    return value


def _format_error(err: ValidationError) -> str:
    errors = err.errors()
    # a union field reports one error per branch; keep the informative ones
    specific = [e for e in errors if not e["type"].endswith("_type")]
    lines = []
    for e in specific or errors:
        parts = [str(p) for p in e["loc"] if not (isinstance(p, str) and ("[" in p or p == "str"))]
        lines.append(f"{'.'.join(parts) or '<root>'}: {e['msg']}")
    return "invalid scenario: " + "; ".join(lines)


def parse_scenario(data: Any, overrides: dict[str, Any] | None = None) -> Scenario:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping")
    data = {**data, **(overrides or {})}
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_error(err)) from None


def load_scenario(path: str | Path, overrides: dict[str, Any] | None = None) -> Scenario:
    text = Path(path).read_text()
    return loads_scenario(text, overrides)


def loads_scenario(text: str, overrides: dict[str, Any] | None = None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ScenarioError(f"cannot parse scenario{where}: {getattr(err, 'problem', err)}") from None
    return parse_scenario(data, overrides)


def applied_defaults(scenario: Scenario) -> dict[str, Any]:
    return _defaults(scenario)


def serialize(scenario: Scenario) -> str:
    """Full scenario with every default written out, as YAML."""
    return yaml.safe_dump(scenario.model_dump(mode="json"), sort_keys=True)


def scenario_hash(scenario: Scenario) -> str:
    return hashlib.sha256(serialize(scenario).encode()).hexdigest()


def constant_set_names() -> list[str]:
    return sorted(CONSTANT_SETS)
