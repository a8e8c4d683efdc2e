"""
Command-line runner for the cohomology experiments.

    cohomolib cf --alpha golden --depth 20 --json
    cohomolib dk --map arnold:eps=0.5,rho=golden --phi cos --csv out/dk.csv
    cohomolib coboundary --map rotation:rho=golden --phi cos --r 11 --levels 3 4 5 6 --json

Exit codes: 0 success, 2 failed check, 3 budget exhausted, 4 bad configuration.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from .action import (
    MAX_WORD,
    commutator_defect,
    flatness_test,
    induced_action,
    pair_distance,
    rebase,
    renormalize,
)
from .arithmetic import (
    ContinuedFraction,
    closest_return_check,
    coerce_alpha,
    diophantine_test,
    liouville_levels,
    parse_alpha,
)
from .calculus import pr_expression, pr_polynomial
from .circlemap import (
    CircleLift,
    check_partition,
    distortion_report,
    make_family,
    parse_map_spec,
    renorm_geometry,
    rotation_number,
)
from .coboundary import approximate_by_coboundary
from .cocycle import cr_norm, dk_sweep, herman_sequence
from .errors import (
    EXIT_ASSERTION,
    EXIT_CONFIG,
    EXIT_OK,
    BudgetExceeded,
    CohomologyError,
    ConfigParse,
    exit_code_for,
)
from .fourier import solve_rotation, solve_rotation_diophantine_bound
from .functions import named_function
from .models import ExperimentConfig, LevelPolicy, NumericsConfig
from .output import Row, envelope, render_json, write_csv, write_json

logger = logging.getLogger(__name__)

COMMANDS = (
    "cf",
    "map",
    "dk",
    "herman",
    "corollary-c",
    "solve-rotation",
    "renorm",
    "coboundary",
    "calculus",
)

RANDOM_POINTS = 256

Outcome = Tuple[Any, Dict[str, bool], List[Row]]


# Inputs ----------------------------------------------------------------------


def build_map(config: ExperimentConfig) -> Tuple[CircleLift, ContinuedFraction]:
    """The map of the experiment and the CF of its rotation number"""
    numerics = config.numerics
    kind, params = parse_map_spec(config.map)
    f = make_family(kind, params, numerics)
    target = params.get("rho")
    if target is not None:
        cf = coerce_alpha(target, depth=config.depth, bits=numerics.bits)
    else:
        estimate = rotation_number(
            f, numerics.rotation_tol, numerics.max_iter, bits=numerics.bits
        )
        cf = estimate.cf
        logger.info(f"Rotation number measured from closest returns: {estimate.alpha:.15g}")
    return f, cf


def load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParse(f"cannot read config {path}: {e}", path=path) from e
    return validate_config(text)


def validate_config(text: str) -> ExperimentConfig:
    """Strict JSON parse; field locations of every problem go into the error"""
    try:
        config = ExperimentConfig.model_validate_json(text)
    except ValidationError as e:
        fields = [".".join(str(part) for part in err["loc"]) or "<root>" for err in e.errors()]
        logger.error(f"Config rejected: {fields}")
        raise ConfigParse(
            f"invalid experiment config: {e.error_count()} error(s)", fields=fields
        ) from e
    if config.command not in COMMANDS:
        raise ConfigParse(f"unknown command {config.command!r}", fields=["command"])
    return config


def apply_environment(config: ExperimentConfig) -> ExperimentConfig:
    """COHOMOLIB_THREADS overrides numerics.threads, from flags or from a config file"""
    threads = os.getenv("COHOMOLIB_THREADS")
    if not threads:
        return config
    try:
        count = int(threads)
    except ValueError as e:
        raise ConfigParse(
            f"COHOMOLIB_THREADS must be an integer, got {threads!r}", fields=["threads"]
        ) from e
    numerics = config.numerics.model_copy(update={"threads": max(1, count)})
    return config.model_copy(update={"numerics": numerics})


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
        if config.command != args.command:
            logger.warning(f"Config file runs {config.command!r}, not {args.command!r}")
        return apply_environment(config)
    numerics: Dict[str, Any] = {}
    for name in ("grid_size", "bits", "budget_qn", "n_min"):
        value = getattr(args, name, None)
        if value is not None:
            numerics[name] = value
    fields = {
        name: getattr(args, name)
        for name in ExperimentConfig.model_fields
        if name not in ("command", "numerics") and getattr(args, name, None) is not None
    }
    try:
        config = ExperimentConfig(
            command=args.command, numerics=NumericsConfig(**numerics), **fields
        )
    except ValidationError as e:
        fields_bad = [".".join(str(part) for part in err["loc"]) for err in e.errors()]
        raise ConfigParse(f"invalid arguments: {fields_bad}", fields=fields_bad) from e
    return apply_environment(config)


# Commands --------------------------------------------------------------------


def run_cf(config: ExperimentConfig) -> Outcome:
    cf = parse_alpha(config.alpha, config.depth, config.numerics.bits)
    levels = liouville_levels(cf, config.tau)
    diophantine = diophantine_test(cf, config.C, config.tau)
    checks: Dict[str, bool] = {}
    if not cf.is_rational:
        try:
            closest_return_check(cf, min(100_000, config.numerics.budget_qn))
            checks["closest_returns"] = True
        except AssertionError as e:
            logger.error(f"Closest-return check failed: {e}")
            checks["closest_returns"] = False
    report = dict(
        cf.summary(), liouville_levels=levels.model_dump(), diophantine=diophantine.model_dump()
    )
    rows = [
        {
            "n": n,
            "a_n": cf.a[n] if n < len(cf.a) else None,
            "p_n": cf.pn(n),
            "q_n": cf.qn(n),
            "beta_n": float(cf.beta_n(n)),
            "liouville": n in levels,
        }
        for n in range(cf.depth + 1)
    ]
    return report, checks, rows


def run_map(config: ExperimentConfig) -> Outcome:
    f, cf = build_map(config)
    n = config.level
    geometry = renorm_geometry(f, cf, n, config.numerics)
    partition = check_partition(f, cf, n, config=config.numerics)
    distortion = distortion_report(f, cf, n, config.numerics)
    report = {
        "map": {"kind": f.kind.value, "params": f.params},
        "alpha": cf.summary(),
        "geometry": geometry.summary(),
        "partition": partition.model_dump(),
        "distortion": distortion.model_dump(),
    }
    x = np.arange(256) / 256
    shift_prev = geometry.f_prev(x) - x
    shift_cur = geometry.f_cur(x) - x
    rows = [
        {
            "x": float(xi),
            "f_prev_minus_x": float(a),
            "f_cur_minus_x": float(b),
            "m_prev": abs(float(a)),
            "m_cur": abs(float(b)),
        }
        for xi, a, b in zip(x, shift_prev, shift_cur)
    ]
    return report, {"partition_disjoint": partition.disjoint}, rows


def _dk_reports(config: ExperimentConfig) -> Tuple[CircleLift, ContinuedFraction, List[Any]]:
    f, cf = build_map(config)
    phi = named_function(config.phi, config.numerics.grid_size)
    max_qn = min(100_000, config.numerics.budget_qn)
    levels = config.levels or None
    return f, cf, dk_sweep(phi, f, cf, max_qn, levels, config=config.numerics)


def run_dk(config: ExperimentConfig) -> Outcome:
    _, _, reports = _dk_reports(config)
    rows = [r.model_dump() for r in reports]
    return reports, {"denjoy_koksma": all(r.passed for r in reports)}, rows


def run_corollary_c(config: ExperimentConfig) -> Outcome:
    """Decay of ||S^{q_n} phi - q_n mu||_{C^0} from level 2 to the last level in budget"""
    _, _, reports = _dk_reports(config)
    reports = [r for r in reports if r.n >= 2]
    if not reports:
        if config.levels:
            raise ConfigParse(
                f"corollary-c needs a level n >= 2, got levels {config.levels}", fields=["levels"]
            )
        raise BudgetExceeded(
            "no level n >= 2 fits the q_n budget", budget_qn=config.numerics.budget_qn
        )
    rows = [{"n": r.n, "q_n": r.q_n, "sup_dev": r.sup_dev} for r in reports]
    first, last = reports[0].sup_dev, reports[-1].sup_dev
    ratio = last / first if first > 0 else 0.0
    report = {"levels": rows, "ratio_last_to_first": ratio}
    logger.info(f"Corollary C proxy: last/first = {ratio:.3e}")
    return report, {"decay_below_10_percent": ratio < 0.1}, rows


def run_herman(config: ExperimentConfig) -> Outcome:
    f, cf = build_map(config)
    values = herman_sequence(f, cf, config.n_max, config.numerics)
    rows = [{"n": n, "q_n": cf.qn(n), "sup_log_dfqn": v} for n, v in enumerate(values)]
    tail = values[3:]
    decreasing = all(b < a or a < 1e-14 for a, b in zip(tail, tail[1:]))
    return {"values": values}, {"decreasing_from_level_3": decreasing}, rows


def run_solve_rotation(config: ExperimentConfig) -> Outcome:
    numerics = config.numerics
    cf = parse_alpha(config.alpha, config.depth, numerics.bits)
    psi = named_function(config.psi, numerics.grid_size)
    u, report = solve_rotation(psi, cf, config.modes, numerics.grid_size)
    bound = solve_rotation_diophantine_bound(
        cf, config.C, config.tau, psi, config.modes, numerics.grid_size
    )
    checks: Dict[str, bool] = {}
    if psi.max_mode <= config.modes:
        checks["residual"] = report.residual <= 1e-8
    result = {"solution": report.model_dump(), "bound": bound.model_dump(), "u_modes": u.max_mode}
    return result, checks, report.rows()


def run_renorm(config: ExperimentConfig) -> Outcome:
    numerics = config.numerics
    f, cf = build_map(config)
    phi = named_function(config.phi, numerics.grid_size)
    n = config.level
    Phi = renormalize(f, phi, cf, n, numerics)
    geometry = renorm_geometry(f, cf, n, numerics)
    witness = flatness_test(Phi, geometry.x_star, numerics.flatness_tol, numerics.interval_samples)
    # identities are checked on the grid plus seeded random points
    rng = np.random.default_rng(config.seed)
    points = np.sort(np.concatenate([np.linspace(0.0, 1.0, 257), rng.random(RANDOM_POINTS)]))
    checks = {"commutation": commutator_defect(Phi, points) <= 1e-9}
    report: Dict[str, Any] = {
        "level": n,
        "sample_points": {"seed": config.seed, "random": RANDOM_POINTS, "total": len(points)},
        "matrix": [list(row) for row in Phi.matrix],
        "generator_sup": {
            "psi_10": float(np.max(np.abs(Phi.g10.fiber(points)))),
            "psi_01": float(np.max(np.abs(Phi.g01.fiber(points)))),
        },
        "generator_c1": {
            "psi_10": cr_norm(Phi.g10.fiber, 1, numerics.grid_size),
            "psi_01": cr_norm(Phi.g01.fiber, 1, numerics.grid_size),
        },
        "flatness": witness.model_dump(),
    }
    if cf.qn(n) + cf.qn(n - 1) <= MAX_WORD:
        rebased = rebase(induced_action(f, phi), Phi.matrix)
        identity = max(
            pair_distance(rebased.g10, Phi.g10, points), pair_distance(rebased.g01, Phi.g01, points)
        )
        report["generator_identity"] = identity
        checks["generator_identity"] = identity <= 1e-9
    rows = [
        {
            "generator": name,
            "sup": report["generator_sup"][name],
            "c1": report["generator_c1"][name],
        }
        for name in ("psi_10", "psi_01")
    ]
    return report, checks, rows


def run_coboundary(config: ExperimentConfig) -> Outcome:
    numerics = config.numerics
    f, cf = build_map(config)
    phi = named_function(config.phi, numerics.grid_size)
    policy = config.policy
    if config.levels and policy == LevelPolicy.LIOUVILLE:
        policy = LevelPolicy.EXPLICIT
    report = approximate_by_coboundary(
        f, phi, cf, config.epsilon, config.r, policy, config.levels or None, numerics
    )
    rows = []
    for record in report.levels:
        row = record.model_dump(exclude={"certificate"})
        row["certificate"] = record.certificate.passed if record.certificate else None
        rows.append(row)
    checks = {"certificate": bool(report.certificate and report.certificate.passed)}
    return report, checks, rows


def run_calculus(config: ExperimentConfig) -> Outcome:
    r = config.print_pr if config.print_pr is not None else config.r
    terms = pr_polynomial(r)
    rows = [
        {"exponents": list(exponents), "coefficient": coefficient}
        for exponents, coefficient in sorted(terms.items())
    ]
    return {"r": r, "expression": str(pr_expression(r)), "terms": len(rows)}, {}, rows


HANDLERS: Dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "cf": run_cf,
    "map": run_map,
    "dk": run_dk,
    "herman": run_herman,
    "corollary-c": run_corollary_c,
    "solve-rotation": run_solve_rotation,
    "renorm": run_renorm,
    "coboundary": run_coboundary,
    "calculus": run_calculus,
}


def run(config: ExperimentConfig, print_json: bool = False) -> int:
    """Run one experiment, write its artifacts and return the exit status"""
    logger.info(f"Running {config.command}")
    report, checks, rows = HANDLERS[config.command](config)
    result = envelope(report, config, checks)
    if config.csv:
        write_csv(rows, config.csv)
    if config.json_path:
        write_json(result, config.json_path)
    if print_json:
        print(render_json(result))
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        logger.error(f"Failed checks: {failed}")
        return EXIT_ASSERTION
    return EXIT_OK


# Argument parsing ------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="ExperimentConfig JSON; overrides the flags")
    parser.add_argument("--json", action="store_true", help="print the JSON report")
    parser.add_argument("--json-path", dest="json_path", help="also write the JSON report here")
    parser.add_argument("--csv", help="write per-level rows to this CSV file")
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument("--grid", dest="grid_size", type=int)
    parser.add_argument("--bits", type=int)
    parser.add_argument("--budget-qn", dest="budget_qn", type=int)
    parser.add_argument("--seed", type=int, help="seed for the random points of identity checks")
    parser.add_argument("--depth", type=int)


def _add_map(parser: argparse.ArgumentParser, phi: bool = True) -> None:
    parser.add_argument("--map", help="family spec, e.g. arnold:eps=0.5,rho=golden")
    if phi:
        parser.add_argument("--phi", help="cocycle: cos, sin, sawtooth, cosK, const:c, modes:...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohomolib", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True)

    cf = sub.add_parser("cf", help="continued fraction, convergents and Liouville levels")
    cf.add_argument("--alpha")
    cf.add_argument("--tau", type=float)
    cf.add_argument("--C", type=float)

    map_ = sub.add_parser("map", help="renormalization geometry of a map at one level")
    _add_map(map_, phi=False)
    map_.add_argument("--level", type=int)

    for name, help_text in (
        ("dk", "Denjoy-Koksma checks per level"),
        ("corollary-c", "decay of centered Birkhoff sums at closest returns"),
    ):
        command = sub.add_parser(name, help=help_text)
        _add_map(command)
        command.add_argument("--levels", type=int, nargs="+")

    herman = sub.add_parser("herman", help="sup |log Df^{q_n}| per level")
    _add_map(herman, phi=False)
    herman.add_argument("--n-max", dest="n_max", type=int)

    solve = sub.add_parser("solve-rotation", help="Fourier solver over a rigid rotation")
    solve.add_argument("--alpha")
    solve.add_argument("--psi")
    solve.add_argument("--modes", type=int)
    solve.add_argument("--tau", type=float)
    solve.add_argument("--C", type=float)

    renorm = sub.add_parser("renorm", help="renormalized fibered action at one level")
    _add_map(renorm)
    renorm.add_argument("--level", type=int)

    cob = sub.add_parser("coboundary", help="approximate phi by a coboundary")
    _add_map(cob)
    cob.add_argument("--r", type=int)
    cob.add_argument("--epsilon", type=float)
    cob.add_argument("--levels", type=int, nargs="+")
    cob.add_argument("--policy", choices=[p.value for p in LevelPolicy])
    cob.add_argument("--n-min", dest="n_min", type=int)

    calc = sub.add_parser("calculus", help="print the P_r polynomial")
    calc.add_argument("--print-pr", dest="print_pr", type=int)
    calc.add_argument("--r", type=int)

    for command in sub.choices.values():
        _add_common(command)
    return parser


def configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.getenv("COHOMOLIB_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = config_from_args(args)
        return run(config, print_json=args.json)
    except CohomologyError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(json.dumps(e.to_dict(), indent=2), file=sys.stderr)
        return exit_code_for(e)
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
