"""
ma-isac command-line entry point.

Subcommands:
    solve       one scheme on one realization -> solution.csv [+ trace.csv]
    montecarlo  sweep x schemes x realizations -> runs.csv, summary.csv
    sweep       beampattern over an angle grid -> sweep_<scheme>.csv/.svg
    status      print the progress of a running or finished campaign
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv

from campaign_runner import DEFAULT_WORKERS, SWEEP_KEYS, CampaignSpec, run_campaign
from scenario import ConfigError, ScenarioConfig, config_from_mapping, draw_scenario, load_config
from scripts.check_progress import print_campaign_status
from services.baseline_service import SCHEME_NAMES, BaselineKind, run_baseline
from services.pdd_service import STATUS_INFEASIBLE
from services.sdr_service import InfeasibleSdpError, SolverError
from utils.channel_metrics import beampattern_sweep
from utils.csv_schema import (
    SOLUTION_COLUMNS,
    SWEEP_COLUMNS,
    TRACE_COLUMNS,
    solution_rows,
    trace_rows,
    write_rows,
)
from utils.plotting import save_beampattern_svg
from utils.units import linear_to_db, watts_to_dbm

load_dotenv()

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_INFEASIBLE = 3


def configure_logging():
    level = os.environ.get("MA_ISAC_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="[%(name)s] %(levelname)s %(message)s", stream=sys.stderr)


def _load(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else config_from_mapping({})
    if args.seed is not None:
        config = config.with_updates(seed=args.seed)
    return config


def _parse_list(text: str, convert=str) -> List:
    return [convert(part.strip()) for part in text.split(",") if part.strip()]


def cmd_solve(args) -> int:
    config = _load(args)
    scenario = draw_scenario(config, args.realization)
    result = run_baseline(args.scheme, scenario)

    os.makedirs(args.out, exist_ok=True)
    write_rows(os.path.join(args.out, "solution.csv"), SOLUTION_COLUMNS, solution_rows(result))
    if args.trace and result.trace:
        write_rows(os.path.join(args.out, "trace.csv"), TRACE_COLUMNS, trace_rows(result))

    radiated = watts_to_dbm(np.sum(np.abs(result.W_D) ** 2))
    print(f"[solve] scheme={result.scheme} gain={result.gain_db:.3f} dB power={radiated:.2f} dBm "
          f"status={result.status}")
    if result.status == STATUS_INFEASIBLE:
        print(f"[solve] infeasible: {result.verdict or 'SINR targets not met'}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    config = _load(args)
    sweep_values = _parse_list(args.sweep_values, float) if args.sweep_values else []
    spec = CampaignSpec(
        base=config,
        schemes=_parse_list(args.schemes),
        realizations=args.realizations,
        out_dir=args.out,
        sweep_key=args.sweep_key,
        sweep_values=sweep_values,
    )
    _, summary = run_campaign(spec, workers=args.workers)

    print("=" * 70)
    print("CAMPAIGN SUMMARY")
    print("=" * 70)
    for row in summary:
        print(f"  {row['sweep_value']:>8g}  {row['scheme']:<7} mean={row['mean_gain_db']:.3f} dB "
              f"std={row['std_gain_db']:.3f}  used {row['n_used']}/{row['n_total']}")
    print("=" * 70)
    return EXIT_OK


def angle_grid(theta_min: float, theta_max: float, step: float) -> np.ndarray:
    """Uniform grid in degrees that contains both endpoints."""
    if not step > 0 or theta_max < theta_min:
        raise ConfigError(f"Invalid angle grid [{theta_min}, {theta_max}] step {step}")
    count = int(round((theta_max - theta_min) / step)) + 1
    return np.linspace(theta_min, theta_max, count)


def cmd_sweep(args) -> int:
    config = _load(args)
    scenario = draw_scenario(config, args.realization)
    grid_deg = angle_grid(args.theta_min, args.theta_max, args.theta_step)
    schemes = _parse_list(args.scheme)
    if BaselineKind.UPPER_BOUND.value in schemes:
        raise ConfigError("sweep: scheme 'bound' has no beamformer to sweep")

    exit_code = EXIT_OK
    for scheme in schemes:
        result = run_baseline(scheme, scenario)
        if result.status == STATUS_INFEASIBLE:
            exit_code = EXIT_INFEASIBLE
        gains = beampattern_sweep(result.t, result.W_D, config.wavelength, np.radians(grid_deg))
        gains_db = linear_to_db(gains / config.transmit_power)
        rows = [{"theta_deg": float(theta), "gain_db": float(g)} for theta, g in zip(grid_deg, gains_db)]
        write_rows(os.path.join(args.out, f"sweep_{scheme}.csv"), SWEEP_COLUMNS, rows)
        save_beampattern_svg(os.path.join(args.out, f"sweep_{scheme}.svg"), grid_deg, gains_db,
                             title=f"{scheme} beampattern", target_deg=float(np.degrees(config.target_angle)))
        print(f"[sweep] scheme={scheme} peak={np.max(gains_db):.3f} dB at "
              f"{grid_deg[int(np.argmax(gains_db))]:.2f} deg")
    return exit_code


def cmd_status(args) -> int:
    return print_campaign_status(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ma-isac",
                                     description="Movable-antenna ISAC joint position and beamforming design")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme_default: Optional[str] = "pdd"):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        if scheme_default is not None:
            p.add_argument("--scheme", default=scheme_default,
                           help=f"scheme ({'|'.join(SCHEME_NAMES)})")
            p.add_argument("--realization", type=int, default=0, help="channel realization index")

    solve = sub.add_parser("solve", help="solve one realization")
    common(solve)
    solve.add_argument("--trace", action="store_true", help="write trace.csv for PDD runs")
    solve.set_defaults(func=cmd_solve)

    mc = sub.add_parser("montecarlo", help="Monte Carlo campaign")
    common(mc, scheme_default=None)
    mc.add_argument("--schemes", default="pdd,fa,random,bound", help="comma-separated schemes")
    mc.add_argument("--realizations", type=int, default=50)
    mc.add_argument("--sweep-key", choices=SWEEP_KEYS, default=None)
    mc.add_argument("--sweep-values", default="", help="comma-separated sweep values")
    mc.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    mc.set_defaults(func=cmd_montecarlo)

    sweep = sub.add_parser("sweep", help="beampattern sweep")
    common(sweep, scheme_default="pdd,fa")
    sweep.add_argument("--theta-min", type=float, default=-90.0)
    sweep.add_argument("--theta-max", type=float, default=90.0)
    sweep.add_argument("--theta-step", type=float, default=0.25)
    sweep.set_defaults(func=cmd_sweep)

    status = sub.add_parser("status", help="campaign progress")
    status.add_argument("--out", default="out")
    status.set_defaults(func=cmd_status)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        # ConfigError, pydantic validation and unknown scheme names
        print(f"Configuration error: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSdpError as e:
        print(f"Infeasible: {str(e)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as e:
        print(f"Solver failure ({e.solver}, status {e.status}): {str(e)}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
