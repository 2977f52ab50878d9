"""Command line entry point: ``ngso run|validate|presets``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .constants import constants_by_name
from .experiments import ExperimentResult, run_experiment
from .link import LINK_PRESETS, ParabolicAntenna
from .orbits import PRESETS
from .scenario import Scenario, ScenarioError, applied_defaults, load_scenario, scenario_hash, serialize

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("ngso")


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    if hasattr(value, "dtype"):
        return fmt(value.item())
    return str(value)


def write_result(result: ExperimentResult, scenario: Scenario, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        path = out_dir / f"{result.experiment}.{name}.csv"
        lines = [",".join(table.columns)] + [",".join(fmt(v) for v in row) for row in table.rows]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    for name, records in result.traces.items():
        path = out_dir / f"{result.experiment}.{name}.jsonl"
        path.write_text("".join(r + "\n" for r in records))
        written.append(path)
    consts = scenario.physical_constants()
    summary = {
        "experiment": result.experiment,
        "summary": _json_safe(result.summary),
        "provenance": {
            "tool_version": __version__,
            "scenario_sha256": scenario_hash(scenario),
            "seed": scenario.seed,
            "constants": {"name": scenario.constants, "gm": consts.gm, "earth_radius_m": consts.earth_radius_m,
                          "equinoctial_day_s": consts.equinoctial_day_s, "c_mps": consts.c_mps},
            "defaults_applied": applied_defaults(scenario),
        },
    }
    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    (out_dir / "scenario.resolved.yaml").write_text(serialize(scenario))
    return written


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, float):
        if math.isinf(obj) or math.isnan(obj):
            return str(obj)
        return float(f"{obj:.9g}")
    if hasattr(obj, "dtype"):
        return _json_safe(obj.item())
    return obj


def presets_text() -> str:
    lines = ["constellations:"]
    for name, s in PRESETS.items():
        lines.append(
            f"  {name}: geometry={s.geometry.value} N={s.n_sats} P={s.n_planes} N_op={s.sats_per_plane} "
            f"h={s.altitude_m / 1e3:g} km inclination={math.degrees(s.inclination_rad):g} deg"
        )
    lines.append("links:")
    for name, p in LINK_PRESETS.items():
        ant = lambda a: f"dish {a.diameter_m:g} m" if isinstance(a, ParabolicAntenna) else repr(a)  # noqa: E731
        lines.append(
            f"  {name}: f={p.carrier_hz / 1e9:g} GHz B={p.bandwidth_hz / 1e6:g} MHz Pt={p.tx_power_w:g} W "
            f"T={p.noise_temperature_k:g} K F={p.noise_figure_db:g} dB tx={ant(p.tx_antenna)} "
            f"rx={ant(p.rx_antenna)} pointing_loss={p.pointing_loss_db:g} dB/end"
        )
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ngso", description="NGSO constellation analysis toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run the experiment of a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (overrides the scenario)")
    run.add_argument("--seed", type=int, help="random seed (overrides the scenario)")
    run.add_argument("--threads", type=int, help="worker threads")
    run.add_argument("--constants", choices=["spherical", "wgs-equatorial"])
    val = sub.add_parser("validate", help="check a scenario file and print it with defaults")
    val.add_argument("scenario")
    val.add_argument("--seed", type=int)
    val.add_argument("--constants", choices=["spherical", "wgs-equatorial"])
    sub.add_parser("presets", help="list constellation and link presets")
    return parser


def _overrides(args) -> dict[str, Any]:
    out = {}
    for key in ("out", "seed", "threads", "constants"):
        value = getattr(args, key, None)
        if value is not None:
            out["output" if key == "out" else key] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    if args.verb == "presets":
        print(presets_text())
        return EXIT_OK
    try:
        scenario = load_scenario(args.scenario, _overrides(args))
        constants_by_name(scenario.constants)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.verb == "validate":
        sys.stdout.write(serialize(scenario))
        return EXIT_OK
    try:
        result = run_experiment(scenario)
        written = write_result(result, scenario, Path(scenario.output))
    except Exception as err:  # noqa: BLE001
        log.error("experiment %s failed: %s", scenario.experiment, err)
        return EXIT_RUNTIME
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
