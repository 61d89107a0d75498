"""Command-line entry point.

Exit codes: 0 success or property holds, 1 property violated, 2 bad input
(config or precondition), 3 state ceiling exceeded. The config schema is
documented in :mod:`nifldp.config`.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .adversary import (
    advantage,
    bayes_optimal,
    bound_chain,
    challenge_experiment,
    distribution_challenge,
)
from .config import ConfigError, ExperimentConfig, load_config
from .errors import NiFlDpError, PreconditionViolation, StateExplosion
from .kripke import PathDistribution, build_model, mc_terminal_distribution, terminal_distribution
from .learning import DiscreteLaplace
from .moniteo import MoniteoConfig, run_moniteo
from .privacy import DecompositionMode, decomposition_check, realized_epsilon, within_budget
from .serialization import (
    advantage_report_to_json,
    challenge_csv_rows,
    challenge_to_json,
    decomposition_report_to_json,
    distribution_to_json,
    epsilon_report_to_json,
    float_or_inf,
    moniteo_report_to_json,
    moniteo_summary,
    prob_to_str,
)
from .validation import run_suite

log = logging.getLogger("nifldp")

EXIT_OK, EXIT_VIOLATED, EXIT_BAD_INPUT, EXIT_CEILING = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args, cfg: ExperimentConfig | None) -> Path:
    if args.out is not None:
        return Path(args.out)
    return cfg.output_dir if cfg is not None else Path("out")


def _pair(cfg: ExperimentConfig, *, require_neighbors: bool = True) -> tuple[PathDistribution, PathDistribution]:
    """The two curmodpar distributions the command compares."""
    if cfg.scenario == "distributions":
        return cfg.d0, cfg.d1
    run = cfg.neighbor_run(require_neighbors=require_neighbors)
    if cfg.mode == "montecarlo":
        return (
            mc_terminal_distribution(run.i0, run.system, cfg.samples, cfg.seed),
            mc_terminal_distribution(run.i1, run.system, cfg.samples, cfg.seed + 1),
        )
    m0 = build_model(run.i0, run.system, ceiling=cfg.state_ceiling)
    m1 = build_model(run.i1, run.system, ceiling=cfg.state_ceiling)
    return terminal_distribution(m0), terminal_distribution(m1)


def cmd_enumerate(args, cfg: ExperimentConfig) -> int:
    if cfg.scenario == "distributions":
        raise _Fail(EXIT_BAD_INPUT, "enumerate needs a custom or moniteo scenario")
    out = _out_dir(args, cfg)
    i = cfg.initial()
    if cfg.mode == "montecarlo":
        dist = mc_terminal_distribution(i, cfg.system, cfg.samples, cfg.seed)
        stats = {"mode": "montecarlo", "samples": cfg.samples, "seed": cfg.seed}
    else:
        m = build_model(i, cfg.system, ceiling=cfg.state_ceiling)
        dist = terminal_distribution(m)
        stats = {
            "mode": "exact",
            "states": len(m.states),
            "terminal_states": len(m.terminals),
            "traces": dist.trace_count,
            "max_depth": m.max_depth(),
        }
    _write_json(out / "distribution.json", distribution_to_json(dist))
    _write_json(out / "model_stats.json", stats)
    print(f"enumerate: {len(dist.support())} outcome(s), wrote {out / 'distribution.json'}")
    return EXIT_OK


def cmd_epsilon(args, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    d0, d1 = _pair(cfg)
    report = realized_epsilon(d0, d1, cfg.delta)
    holds = within_budget(report.epsilon, cfg.epsilon_budget)
    doc = epsilon_report_to_json(report)
    doc.update(budget=cfg.epsilon_budget, holds=holds, mode=cfg.mode, scenario=cfg.scenario)
    _write_json(out / "epsilon_report.json", doc)
    print(f"epsilon: {doc['epsilon']} budget={cfg.epsilon_budget} holds={holds}")
    return EXIT_OK if holds else EXIT_VIOLATED


def cmd_advantage(args, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    d0, d1 = _pair(cfg)
    eps = realized_epsilon(d0, d1)
    report = bound_chain(d0, d1) if eps.finite else advantage(bayes_optimal(d0, d1), d0, d1)
    adversary = bayes_optimal(d0, d1)
    if cfg.scenario == "distributions":
        challenge = distribution_challenge(d0, d1, adversary, cfg.challenge_trials, cfg.challenge_seed)
    else:
        challenge = challenge_experiment(cfg.neighbor_run(), adversary, cfg.challenge_trials, cfg.challenge_seed)
    doc = advantage_report_to_json(report)
    doc["challenge"] = challenge_to_json(challenge)
    doc["mode"] = cfg.mode
    _write_json(out / "advantage_report.json", doc)
    with open(out / "challenge.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(challenge_csv_rows(challenge))
    print(
        f"advantage: tv={float(report.tv):.6f} tight_bound={report.tight_bound:.6f} "
        f"exp_bound={report.exp_bound:.6f} challenge_estimate={challenge.advantage:.6f}"
    )
    return EXIT_OK


def cmd_decompose(args, cfg: ExperimentConfig) -> int:
    if cfg.scenario == "distributions":
        raise _Fail(EXIT_BAD_INPUT, "decompose needs a custom or moniteo scenario")
    if cfg.mode != "exact":
        raise _Fail(EXIT_BAD_INPUT, "decompose runs in exact mode only")
    out = _out_dir(args, cfg)
    all_mode = cfg.decomposition_mode is DecompositionMode.ALL_CLIENTS_DIFFER
    run = cfg.neighbor_run(require_neighbors=not all_mode)
    report = decomposition_check(run, cfg.decomposition_mode, ceiling=cfg.state_ceiling)
    _write_json(out / "decomposition_report.json", decomposition_report_to_json(report))
    print(
        f"decompose: mode={report.mode.value} global={float_or_inf(report.global_report.epsilon)} "
        f"bound={float_or_inf(report.bound)} holds={report.bound_holds}"
    )
    return EXIT_OK if report.bound_holds else EXIT_VIOLATED


def cmd_validate(args) -> int:
    results = run_suite(fault=args.fault)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return EXIT_VIOLATED
    print("all checks passed")
    return EXIT_OK


def cmd_moniteo(args, cfg: ExperimentConfig | None) -> int:
    if cfg is not None and cfg.scenario != "moniteo":
        raise _Fail(EXIT_BAD_INPUT, "moniteo needs a moniteo scenario")
    mcfg = cfg.moniteo if cfg is not None else MoniteoConfig()
    out = _out_dir(args, cfg)
    if args.sweep:
        rows = []
        for t in (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4)):
            clamp = mcfg.mechanism.clamp_steps if mcfg.mechanism is not None else 2
            r = run_moniteo(replace(mcfg, mechanism=DiscreteLaplace(t, clamp)))
            print(moniteo_summary(r))
            rows.append({"t": prob_to_str(t), "epsilon": float_or_inf(r.epsilon.epsilon), "budget_ok": r.budget_ok})
        eps = [r["epsilon"] for r in rows]
        _write_json(out / "moniteo_sweep.json", {"rows": rows})
        return EXIT_OK if all(a >= b for a, b in zip(eps, eps[1:])) else EXIT_VIOLATED
    report = run_moniteo(mcfg)
    _write_json(out / "moniteo_report.json", moniteo_report_to_json(report))
    print(moniteo_summary(report))
    return EXIT_OK if report.budget_ok else EXIT_VIOLATED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nifldp", description="Exact privacy analysis of federated-learning runs.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("enumerate", "enumerate one run and write its model distribution"),
        ("epsilon", "realized epsilon between the neighbor runs"),
        ("advantage", "optimal distinguishing advantage and a sampled guessing game"),
        ("decompose", "per-client against global epsilon"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
    sp = sub.add_parser("moniteo", help="satellite case study; defaults when no config is given")
    sp.add_argument("config", nargs="?", help="experiment config with a moniteo scenario")
    sp.add_argument("--out", help="output directory (overrides output_dir)")
    sp.add_argument("--sweep", action="store_true", help="compare t in {1/2, 2/3, 3/4}")
    sp = sub.add_parser("validate", help="run the built-in oracle suite")
    sp.add_argument("--fault", choices=["perturb-pmf"], help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(args)
        cfg = load_config(args.config) if args.config is not None else None
        handler = {
            "enumerate": cmd_enumerate,
            "epsilon": cmd_epsilon,
            "advantage": cmd_advantage,
            "decompose": cmd_decompose,
            "moniteo": cmd_moniteo,
        }[args.command]
        return handler(args, cfg)
    except _Fail as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except PreconditionViolation as e:
        where = f" (client {e.client})" if e.client is not None else ""
        print(f"precondition violated{where}: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except StateExplosion as e:
        print(f"state ceiling of {e.ceiling} states exceeded; use montecarlo mode", file=sys.stderr)
        return EXIT_CEILING
    except (NiFlDpError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
