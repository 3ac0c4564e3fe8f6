"""Command-line front end.

Every command prints JSON (or a table) on stdout. Failures print an error
object ``{"error": CODE, "message": ..., "command": ...}`` and exit with a
nonzero status.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import reference
from .equilibria import dfe, solve_endemic
from .errors import ConfigError, SairsError, StateError
from .metrics import peak_summary, table_report, totals_csv
from .reproduction import r0_report
from .simulate import ScenarioConfig, run_scenario, simulate_params
from .stability import Regime, Variant, build_certificate, classify, lyapunov_decrease

EXIT_ERROR = 2
REPRODUCE_T_END = 60.0
REPRODUCE_FIXED_STEP = 0.005
CERTIFICATE_T_END = 200.0


def _schema() -> dict:
    text = resources.files("sairsnet").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def parse_config(text: str) -> ScenarioConfig:
    """Validate a JSON scenario document and build the config.

    Schema violations raise :class:`ConfigError` naming the offending field;
    parameter problems such as a reducible transmission pattern surface as
    the corresponding library error.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", code="INVALID_JSON") from None
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}", field=where,
                          errors=[{"field": ".".join(str(p) for p in e.absolute_path) or "<root>",
                                   "message": e.message} for e in errors])
    config = ScenarioConfig.from_dict(doc)
    config.build_params()
    return config


def serialize_config(config: ScenarioConfig) -> str:
    return json.dumps(config.to_dict(), indent=2)


def _load_config(arg: str) -> ScenarioConfig:
    if arg.lstrip().startswith("{"):
        return parse_config(arg)
    try:
        text = Path(arg).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {arg!r}: {exc}", code="IO_ERROR") from None
    return parse_config(text)


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "gamma_variant", None):
        changes["gamma"] = reference.GAMMA_VARIANTS[args.gamma_variant]
    if getattr(args, "seed_fraction", None) is not None:
        changes["seed_fraction"] = args.seed_fraction
    if getattr(args, "fixed_step", None) is not None:
        changes["integrator"] = replace(config.integrator, fixed_step=args.fixed_step)
    return config.with_(**changes) if changes else config


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _endemic_or_none(params):
    try:
        return solve_endemic(params)
    except SairsError:
        return None


def cmd_simulate(args, config: ScenarioConfig) -> dict:
    traj, events = run_scenario(config)
    ee = _endemic_or_none(config.build_params())
    summaries = peak_summary(traj, events, None if ee is None else ee.state)
    out = Path(args.out)
    _write(out / "trajectory.csv", traj.to_csv())
    _write(out / "totals.csv", totals_csv(traj))
    report = {
        "events": events.to_dict(),
        "peaks": [s.to_dict() for s in summaries],
        "stats": traj.stats,
    }
    _write(out / "events.json", _dumps(report))
    return {"out": str(out), "samples": len(traj), "stats": traj.stats}


def cmd_r0(args, config: ScenarioConfig) -> dict:
    return r0_report(config.build_params(), config.build_topology())


def cmd_equilibrium(args, config: ScenarioConfig) -> dict:
    params = config.build_params()
    out = {"dfe": dfe(params).to_dict()}
    ee = _endemic_or_none(params)
    out["endemic"] = None if ee is None else ee.to_dict()
    return out


def _certificate_checks(config: ScenarioConfig, verdict) -> list[dict]:
    params = config.build_params()
    variants = []
    if np.all(params.nu == 0) and verdict.regime in (Regime.DFE_GAS, Regime.DFE_GAS_BOUNDARY_NU0):
        variants.append(Variant.DFE_Q)
    if verdict.endemic_gas and verdict.endemic_gas.startswith("GAS_SAIR"):
        variants.append(Variant.SAIR_V)
    if verdict.endemic_gas and verdict.endemic_gas.startswith("GAS_DELTA_EQUAL"):
        variants.append(Variant.SAIRS_DELTA_EQ_VW)
    if not variants:
        return []
    x0 = config.initial_state()
    if np.any(x0.reshape(-1, 3)[:, 1:] == 0):
        # Certificates live on the interior; nudge zero infected entries inward.
        g = x0.reshape(-1, 3).copy()
        g[:, 1:] = np.maximum(g[:, 1:], 1e-4)
        g[:, 0] = np.minimum(g[:, 0], 1.0 - g[:, 1:].sum(axis=1))
        x0 = g.ravel()
    traj = simulate_params(params, x0, CERTIFICATE_T_END,
                           replace(config.integrator, sample_step=0.05))
    checks = []
    for v in variants:
        cert = build_certificate(params, v)
        entry = {"variant": v.value, "balance_residual": cert.balance_residual}
        try:
            entry.update(lyapunov_decrease(cert, traj))
        except StateError as exc:
            entry.update(skipped=str(exc))
        checks.append(entry)
    return checks


def cmd_stability(args, config: ScenarioConfig) -> dict:
    verdict = classify(config.build_params())
    out = verdict.to_dict()
    out["certificate_checks"] = _certificate_checks(config, verdict)
    return out


def cmd_metrics(args, config: ScenarioConfig):
    traj, events = run_scenario(config)
    ee = _endemic_or_none(config.build_params())
    summaries = peak_summary(traj, events, None if ee is None else ee.state)
    fmt = args.format or "text"
    text = "".join(table_report(summaries, fmt, kind) + ("\n" if fmt == "json" else "")
                   for kind in ("A", "I"))
    if args.out:
        out = Path(args.out)
        _write(out / "tables_A.csv", table_report(summaries, "csv", "A"))
        _write(out / "tables.csv", table_report(summaries, "csv", "I"))
    return text


def _reproduce_one(out: Path, network: str, variant: str, seed: float, fixed_step: float) -> dict:
    config = reference.scenario(network, variant, seed, t_end=REPRODUCE_T_END,
                                fixed_step=fixed_step)
    params = config.build_params()
    traj, events = run_scenario(config)
    summaries = peak_summary(traj, events, solve_endemic(params).state)
    folder = out / f"{network}_{variant}"
    r0_doc = {**r0_report(params, config.build_topology()),
              "comparison": reference.compare_r0(network, params),
              "gamma": params.gamma, "seed_fraction": seed}
    _write(folder / "r0.json", _dumps(r0_doc))
    _write(folder / "trajectory.csv", traj.to_csv())
    _write(folder / "tables.csv", table_report(summaries, "csv", "I"))
    _write(folder / "tables_A.csv", table_report(summaries, "csv", "A"))
    _write(folder / "totals.csv", totals_csv(traj))
    comparison = {kind: reference.compare_tables(network, summaries, kind) for kind in ("I", "A")}
    _write(folder / "comparison.json", _dumps(comparison))
    return {
        "network": network,
        "gamma_variant": variant,
        "r0": r0_doc["comparison"],
        "I_max_abs_magnitude_delta": comparison["I"]["max_abs_magnitude_delta"],
        "I_orderings_match": comparison["I"]["orderings_match"],
        "A_max_abs_magnitude_delta": comparison["A"]["max_abs_magnitude_delta"],
        "A_orderings_match": comparison["A"]["orderings_match"],
        "directory": str(folder),
    }


def cmd_reproduce(args, config=None) -> dict:
    out = Path(args.out)
    variants = [args.gamma_variant] if args.gamma_variant else list(reference.GAMMA_VARIANTS)
    fixed_step = args.fixed_step if args.fixed_step is not None else REPRODUCE_FIXED_STEP
    seeds, calibration = {}, {}
    for v in variants:
        if args.seed_fraction is not None:
            seeds[v] = args.seed_fraction
        else:
            res = reference.calibrate_seed(v)
            seeds[v] = res.seed_fraction
            calibration[v] = res.to_dict()
    scenarios = [_reproduce_one(out, net, v, seeds[v], fixed_step)
                 for v in variants for net in reference.NETWORKS]
    report = {"fixed_step": fixed_step, "seed_fractions": seeds, "calibration": calibration,
              "scenarios": scenarios}
    _write(out / "report.json", _dumps(report))
    return report


def cmd_validate(args, config: ScenarioConfig) -> dict:
    return {"valid": True, "config": config.to_dict()}


COMMANDS = {
    "simulate": cmd_simulate,
    "r0": cmd_r0,
    "equilibrium": cmd_equilibrium,
    "stability": cmd_stability,
    "metrics": cmd_metrics,
    "reproduce": cmd_reproduce,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sairsnet",
                                     description="Multi-group SAIRS epidemics on community networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "reproduce",
                       help="path to a JSON scenario, or the JSON text itself")
        p.add_argument("--out", default="sairsnet-out" if name in ("simulate", "reproduce") else None,
                       help="output directory")
        p.add_argument("--format", choices=["csv", "json", "text"])
        p.add_argument("--fixed-step", type=float, dest="fixed_step")
        p.add_argument("--gamma-variant", choices=sorted(reference.GAMMA_VARIANTS),
                       dest="gamma_variant")
        p.add_argument("--seed-fraction", type=float, dest="seed_fraction")
    return parser


def run_command(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        config = None
        if args.config is not None:
            config = _apply_overrides(_load_config(args.config), args)
        result = COMMANDS[args.command](args, config)
    except SairsError as exc:
        print(_dumps({**exc.to_dict(), "command": args.command}), file=stdout)
        return EXIT_ERROR
    print(result if isinstance(result, str) else _dumps(result), file=stdout)
    return 0


def main(argv=None) -> None:
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
