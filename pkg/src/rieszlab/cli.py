"""Command-line interface.

Subcommands: simulate, decay, energy-audit, relax-limit, dispersion,
constants, selftest.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 acceptance-check failure (selftest).

Every subcommand accepts ``-c/--config FILE`` (TOML), repeatable
``--set key.path=value`` overrides, ``-o/--output DIR``, and ``--dry-run``
to validate and print the resolved configuration without computing.
The environment variable RIESZ_LAB_JOBS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .config import RunConfig
from .errors import ConfigError, RieszLabError, SteppingError
from .scenarios import (
    scenario_constants,
    scenario_decay,
    scenario_dispersion,
    scenario_energy_audit,
    scenario_relax_limit,
    scenario_selftest,
    scenario_simulate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4

_SCENARIO_FUNCS = {
    "simulate": scenario_simulate,
    "decay": scenario_decay,
    "energy-audit": scenario_energy_audit,
    "relax-limit": scenario_relax_limit,
    "dispersion": scenario_dispersion,
    "constants": scenario_constants,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("-c", "--config", help="TOML configuration file")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration key (dotted path, TOML literal value)",
    )
    sub.add_argument("-o", "--output", help="output directory (overrides config)")
    sub.add_argument(
        "--dry-run",
        action="store_true",
        help="validate and print the resolved configuration, then exit",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rieszlab",
        description="Pseudo-spectral lab for damped Euler flow with attractive "
        "Riesz interactions on the periodic torus.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("simulate", "run one trajectory and write its diagnostics"),
        ("decay", "simulate and fit exponential decay rates"),
        ("energy-audit", "convergence audit of the dissipation identity"),
        ("relax-limit", "overdamped-limit sweep against the density flow"),
        ("dispersion", "tabulate linearized mode frequencies"),
        ("constants", "evaluate the iteration constants"),
    ]:
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "relax-limit":
            sub.add_argument(
                "--jobs", type=int, default=None, help="parallel run bound"
            )

    st = subs.add_parser("selftest", help="run the built-in oracle suite")
    st.add_argument(
        "--sabotage",
        default=None,
        help=argparse.SUPPRESS,  # test fixture: corrupt the named check
    )
    return parser


def _load(args, scenario: str) -> RunConfig:
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f'output_dir="{args.output}"')
    return RunConfig.from_file(args.config, overrides, scenario=scenario)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "selftest":
        report = scenario_selftest(sabotage=args.sabotage)
        for line in report.lines():
            print(line)
        return EXIT_OK if report.ok else EXIT_ACCEPTANCE

    try:
        cfg = _load(args, args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dry_run:
        print(json.dumps(cfg.doc, indent=2, sort_keys=True))
        return EXIT_OK

    func = _SCENARIO_FUNCS[args.command]
    try:
        if args.command == "relax-limit":
            results = func(cfg, jobs=args.jobs)
        else:
            results = func(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SteppingError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RieszLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(json.dumps(_brief(results), indent=2, sort_keys=True, default=str))
    print(f"artifacts written to {cfg.output_dir}")
    return EXIT_OK


def _brief(results: dict) -> dict:
    """Console digest: drop bulky per-sample payloads."""
    return {
        k: v
        for k, v in results.items()
        if not isinstance(v, (bytes, bytearray))
    }


if __name__ == "__main__":
    sys.exit(main())
