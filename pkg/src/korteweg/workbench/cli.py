"""Command-line entry point: ``korteweg {run,sweep,compare,lemmas}``.

Exit codes: 0 success, 1 failed check, 2 config error, 3 vacuum abort,
4 drift-consistency abort, 5 non-finite abort, 6 incompatible runs.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, IncompatibleRunsError
from . import runner
from .config import LemmaConfig, SweepConfig, load_json, load_scenario
from .runio import load_run


def _cmd_run(args) -> int:
    config = load_scenario(args.config)
    out = args.output_dir or config.output_dir or Path(args.config).with_suffix("").name
    outcome = runner.execute_run(config, out)
    s = outcome.summary
    print(f"{s['status']}: t={s['t_final']:.6g} steps={s['steps']} "
          f"energy drift={s['energy_drift_relative']:.3e} -> {outcome.run_dir}")
    return outcome.exit_code


def _cmd_sweep(args) -> int:
    config = SweepConfig.from_dict(load_json(args.config))
    code, report = runner.execute_sweep(config, args.output_dir)
    for cell in report["cells"]:
        print(f"nu={cell['nu']:<10g} E(T)={cell['E_final']!s:<24} exit={cell['exit_code']}")
    print(f"monotone={report.get('monotone')} order={report.get('order_relative_entropy')}")
    return code


def _cmd_compare(args) -> int:
    a, b = load_run(args.run_a), load_run(args.run_b)
    result = runner.compare_runs(a, b, args.functional, args.c0)
    out = args.output_dir or (Path(args.run_a) / f"compare_{args.functional}")
    runner.write_comparison(out, result, args.run_a, args.run_b)
    cert = result["certificate"]
    for t, rep in zip(result["times"], result["reports"]):
        print(f"t={t:<12.6g} E={rep.value:.6e} b={rep.b_value:.3e}")
    print(f"certificate: C={cert['C']:.4g} satisfied={cert['satisfied']} "
          f"margin={cert['margin']}")
    return runner.EXIT_OK if cert["satisfied"] in (True, None) else runner.EXIT_FAILURE


def _cmd_lemmas(args) -> int:
    config = LemmaConfig.from_dict(load_json(args.config))
    code, report = runner.execute_lemmas(config, args.output_dir)
    for case in report["cases"]:
        print(f"gamma={case['gamma']} s={case['s']}: {'pass' if case['pass'] else 'FAIL'}")
    for ctl in report["negative_controls"]:
        print(f"control gamma={ctl['gamma']} s={ctl['s']}: expected failure "
              f"{'detected' if ctl['expected_failure_detected'] else 'NOT detected'}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="korteweg", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="viscous-limit sweep over nu")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="relative entropy of run A against run B")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--functional", choices=("euk", "nsk", "glt"), default="euk")
    p.add_argument("--c0", type=float, default=None, help="override the frozen Gronwall c0")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("lemmas", help="identity and inequality-lemma suite")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_lemmas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except IncompatibleRunsError as exc:
        print(str(exc), file=sys.stderr)
        return runner.EXIT_INCOMPATIBLE


if __name__ == "__main__":
    sys.exit(main())
