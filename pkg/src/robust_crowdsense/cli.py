"""Command-line entry point.

    robust-crowdsense solve-hard    --config scenario.yaml [--out DIR]
    robust-crowdsense solve-soft    --config scenario.yaml [--seed S] [--mc-samples N] [--verbose]
    robust-crowdsense special-case  --config scenario.yaml
    robust-crowdsense table1        [--config experiment.yaml] [--replications R]
    robust-crowdsense sweep         [--config experiment.yaml]
    robust-crowdsense simulate      [--config experiment.yaml]

Exit status: 0 success, 1 configuration error, 2 infeasible or non-terminating.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import hard, sim, soft
from .config import load_experiment, load_scenario
from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    InfeasibleError,
    NonTerminationError,
    StructuralError,
)
from .model import total_payment

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    return obj


def _dump(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(out_dir, name, text):
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def aligned(header, rows):
    cells = [list(header)] + [[sim.fmt(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def _csv_rows(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


# ---------------------------------------------------------------------------
# scenario subcommands
# ---------------------------------------------------------------------------


def _scenario(args):
    return load_scenario(_need_config(args))


def _need_config(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return args.config


def cmd_solve_hard(args):
    scenario = _scenario(args)
    if not scenario.spec.is_hard:
        raise ConfigError("solve-hard needs spec.kind: hard")
    outcome = hard.solve_pa2(scenario)
    cert = hard.certify_gap(outcome, scenario)
    feasible, slack = hard.verify_pa1(outcome.policy, scenario.spec.epsilon)
    record = {
        "subcommand": "solve-hard",
        "spec": scenario.spec.to_dict(),
        "policy": outcome.policy.rho,
        "bids": outcome.policy.bids(scenario),
        "F": outcome.objective,
        "dual": outcome.dual,
        "certificate": cert.to_dict(),
        "feasibility": {"feasible": bool(feasible), "slack": slack},
    }
    table = aligned(("quantity", "value"), [
        ("F", outcome.objective), ("dual", outcome.dual),
        ("certificate", cert.bound), ("joint_slack", slack),
    ])
    return record, table


def cmd_solve_soft(args):
    scenario = _scenario(args)
    if scenario.spec.is_hard:
        raise ConfigError("solve-soft needs spec.kind: soft")
    params = soft.SoftSearchParams()
    if args.seed is not None:
        params = replace(params, master_seed=args.seed)
    if args.mc_samples is not None:
        params = replace(params, mc_samples=args.mc_samples)
    outcome = soft.algorithm1(scenario, params)
    cert = soft.theorem5_certificate(scenario)
    slacks = soft.verify_pb1(outcome.policy, scenario)
    record = {
        "subcommand": "solve-soft",
        "spec": scenario.spec.to_dict(),
        "search": {"master_seed": params.master_seed, "mc_samples": params.mc_samples},
        "policy": outcome.policy.rho,
        "F": outcome.objective,
        "per_location": [p.to_dict(verbose=args.verbose) for p in outcome.per_location],
        "certificate": cert.to_dict(),
        "feasibility": [{"feasible": bool(ok), "slack": s} for ok, s in slacks],
    }
    rows = [
        (l, p.gamma_final, p.q_estimate, p.exact_tail_check, p.samples, s)
        for l, (p, (_, s)) in enumerate(zip(outcome.per_location, slacks))
    ]
    table = aligned(("location", "gamma", "q_estimate", "exact_tail", "samples", "slack"), rows)
    table += f"F = {sim.fmt(outcome.objective)}   certificate = {sim.fmt(cert.bound)}\n"
    return record, table


def cmd_special_case(args):
    scenario = _scenario(args)
    if scenario.spec.is_hard:
        raise ConfigError("special-case needs spec.kind: soft")
    try:
        policy, clamped = soft.closed_form_policy(scenario)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    cert = soft.theorem6_certificate(scenario)
    slacks = soft.verify_pb1(policy, scenario)
    record = {
        "subcommand": "special-case",
        "spec": scenario.spec.to_dict(),
        "policy": policy.rho,
        "column_values": policy.rho[0],
        "clamped": list(clamped),
        "F": total_payment(policy, scenario),
        "certificate": cert.to_dict(),
        "feasibility": [{"feasible": bool(ok), "slack": s} for ok, s in slacks],
    }
    rows = [(l, policy.rho[0, l], str(c).lower(), s) for l, (c, (_, s)) in enumerate(zip(clamped, slacks))]
    table = aligned(("location", "rho", "clamped", "slack"), rows)
    return record, table


# ---------------------------------------------------------------------------
# experiment subcommands
# ---------------------------------------------------------------------------


def _experiment(args):
    config = load_experiment(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.replications is not None:
        config = replace(config, replications=args.replications)
    if args.mc_samples is not None:
        config = replace(config, search=replace(config.search, mc_samples=args.mc_samples))
    return config


def _config_dict(config):
    return {
        "T": config.T, "L": config.L, "r_low": config.r_low, "r_high": config.r_high,
        "curve_scale": config.curve_scale, "curve_exponent": config.curve_exponent,
        "epsilons": config.epsilons, "betas": config.betas,
        "replications": config.replications, "master_seed": config.master_seed,
        "search": {k: getattr(config.search, k) for k in config.search.__dataclass_fields__},
    }


def _table1(config, files):
    rows, _ = sim.run_table1(config)
    text = sim.table1_csv(rows)
    files["table1.csv"] = text
    return "joint success probability\n" + aligned(*_csv_rows(text))


def _sweep(config, files, summary):
    out = ""
    text = sim.gap_csv(sim.run_gap_hard(config))
    files["gap_hard.csv"] = text
    out += "hard case: time-average gap\n" + aligned(*_csv_rows(text))
    failures = {}
    for label, rng in (("setting1", sim.SETTING_I), ("setting2", sim.SETTING_II)):
        rows, fails = sim.run_gap_soft(replace(config, alpha_range=rng))
        text = sim.gap_csv(rows)
        files[f"gap_soft_{label}.csv"] = text
        failures[label] = {sim.fmt(b): n for b, n in fails.items()}
        out += f"soft case {label}: time-average gap\n" + aligned(*_csv_rows(text))
    summary["non_terminating_replications"] = failures
    return out


def _run_experiment(args, table1, sweep):
    config = _experiment(args)
    files, summary = {}, {"subcommand": args.command, "config": _config_dict(config)}
    text = ""
    if table1:
        text += _table1(config, files)
    if sweep:
        text += _sweep(config, files, summary)
    files["summary.json"] = _dump(summary)
    return files, text


def cmd_table1(args):
    return _run_experiment(args, table1=True, sweep=False)


def cmd_sweep(args):
    return _run_experiment(args, table1=False, sweep=True)


def cmd_simulate(args):
    return _run_experiment(args, table1=True, sweep=True)


SCENARIO_COMMANDS = {
    "solve-hard": cmd_solve_hard,
    "solve-soft": cmd_solve_soft,
    "special-case": cmd_special_case,
}
EXPERIMENT_COMMANDS = {
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def build_parser():
    parser = _Parser(prog="robust-crowdsense", description="Bid optimization under chance constraints.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in (*SCENARIO_COMMANDS, *EXPERIMENT_COMMANDS):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--out", help="directory for result files (created if missing)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--mc-samples", type=int, help="initial Monte Carlo sample count")
        p.add_argument("--replications", type=int, help="override the replication count")
        p.add_argument("--verbose", action="store_true", help="include search trajectories")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command in SCENARIO_COMMANDS:
            record, text = SCENARIO_COMMANDS[args.command](args)
            _write(args.out, "result.json", _dump(record))
        else:
            files, text = EXPERIMENT_COMMANDS[args.command](args)
            for name, body in files.items():
                _write(args.out, name, body)
    except (InfeasibleError, NonTerminationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag and args.verbose:
            print(_dump(diag), file=sys.stderr, end="")
        return EXIT_INFEASIBLE
    except (ConfigError, DomainError, StructuralError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
