"""Command line interface: run experiments, replicate them, verify subsystems.

Exit codes: 0 success, 2 configuration error, 3 numerical fault,
4 solver divergence, 1 anything else (including failed verify suites).
"""

import argparse
import sys

from .errors import ConfigFault, NumericalFault, SolverDivergence, ToolkitError
from .harness import ExperimentConfig, replicate, run_experiment
from .verify import SUITES, run_suite


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bifisgd",
        description="Bi-fidelity stochastic gradient optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured optimization run")
    run.add_argument("--config", required=True, help="path to a JSON experiment config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="override the output directory")

    rep = sub.add_parser("replicate", help="aggregate statistics over repeated runs")
    rep.add_argument("--config", required=True)
    rep.add_argument("--runs", type=int, required=True, help="number of replications")
    rep.add_argument("--out", default=None)

    ver = sub.add_parser("verify", help="run a built-in verification suite")
    ver.add_argument("suite", choices=sorted(SUITES) + ["all"])
    return parser


def _load_config(args):
    config = ExperimentConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        config = ExperimentConfig(config.problem, config.algorithm, config.params,
                                  seed=args.seed, output=config.output)
        config.validate()
    return config


def _cmd_run(args):
    config = _load_config(args)
    artifacts = run_experiment(config, out_dir=args.out)
    summary = artifacts.summary
    print(f"{config.problem}/{config.algorithm} seed={config.seed}: "
          f"{summary['iterations']} iterations, "
          f"final objective {summary['final_objective']:.6g}, "
          f"cost {summary['final_cost']:.6g} HF units")
    print(f"trace: {artifacts.trace_path}")
    print(f"summary: {artifacts.summary_path}")
    return 0


def _cmd_replicate(args):
    config = _load_config(args)
    result = replicate(config, args.runs, out_dir=args.out)
    mean = result["mean_rel_err"]
    print(f"{config.problem}/{config.algorithm}: {args.runs} runs, "
          f"{mean.size} iterations, final mean relative error {mean[-1]:.6g}")
    if "path" in result:
        print(f"aggregate: {result['path']}")
    return 0


def _cmd_verify(args):
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        ok, detail = run_suite(name)
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}: {detail}")
        failed |= not ok
    return 1 if failed else 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replicate":
            return _cmd_replicate(args)
        return _cmd_verify(args)
    except ConfigFault as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3
    except SolverDivergence as exc:
        print(f"solver divergence: {exc}", file=sys.stderr)
        return 4
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
