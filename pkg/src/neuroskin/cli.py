"""Command-line interface.

Subcommands: ``simulate`` (forward run to a trace file), ``make-target``
(forward run at the true parameters, written to the configured target
path), ``train`` (hybrid pipeline), ``evaluate`` (re-score a logged
iterate history), ``bench`` (optimizers on standard test functions).
Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as cfgmod
from . import trainer
from .benchmarks import rosenbrock, rosenbrock_grad, sphere
from .errors import ConfigError, NeuroskinError
from .lbfgsb import QuasiNewtonOptions, lbfgsb_minimize
from .pso import PsoConfig, pso_run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neuroskin")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to the YAML configuration")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--workers", type=int, default=None, help="override the configured worker cap")

    p_sim = sub.add_parser("simulate", help="forward-simulate the configured model")
    add_common(p_sim)
    p_sim.add_argument("--output", default="trace.out", help="trace file to write")

    add_common(sub.add_parser("make-target", help="generate the synthetic target file"))
    add_common(sub.add_parser("train", help="run the hybrid training pipeline"))

    p_eval = sub.add_parser("evaluate", help="append objective values to an iterate history")
    add_common(p_eval)
    p_eval.add_argument("--history", default=None, help="history file (defaults to the configured result path)")

    p_bench = sub.add_parser("bench", help="optimizers on standard test functions")
    p_bench.add_argument("--seed", type=int, default=0)
    return parser


def _load(args) -> cfgmod.TrainingConfig:
    cfg = cfgmod.load_config(args.config)
    return cfgmod.with_overrides(cfg, seed=args.seed, workers=args.workers)


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    trace = trainer.run_forward(cfg)
    np.savetxt(args.output, trace.displacements)
    print(f"wrote {trace.displacements.shape[0]} steps x {trace.displacements.shape[1]} "
          f"tracked nodes to {args.output}")
    return 0


def _cmd_make_target(args) -> int:
    cfg = _load(args)
    trainer.make_target(cfg)
    print(f"wrote synthetic target to {cfg.objective.target_path}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load(args)
    report = trainer.hybrid_train(cfg)
    params = ", ".join(f"{v:.6g}" for v in report.final_parameters)
    print(f"swarm best objective: {report.pso_best:.6e}")
    print(f"final parameters: [{params}]")
    print(f"final objective: {report.final_objective:.6e}")
    print(f"iterate log: {cfg.paths.result}; convergence log: {cfg.paths.convergence_log}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load(args)
    annotated = trainer.evaluate_history(cfg, args.history)
    path = args.history if args.history is not None else cfg.paths.result
    print(f"re-evaluated {annotated.shape[0]} iterates; appended objective column to {path}")
    return 0


def _cmd_bench(args) -> int:
    pso_cfg = PsoConfig(
        bounds=np.repeat([[-5.0, 5.0]], 10, axis=0),
        particles=30,
        max_iterations=200,
        seed=args.seed,
    )
    result = pso_run(pso_cfg, sphere)
    print(f"swarm / 10-dim sphere: best {result.best_fitness:.3e}")

    options = QuasiNewtonOptions(
        bounds=np.repeat([[-2.0, 2.0]], 2, axis=0),
        max_iterations=200,
        max_function_evals=400,
        stop_factor=10.0,
        gradient_tolerance=1.0e-8,
    )
    x, f, diag = lbfgsb_minimize(
        lambda v: (rosenbrock(v), rosenbrock_grad(v)), np.array([-1.2, 1.0]), options
    )
    print(f"quasi-Newton / 2-dim Rosenbrock: x = ({x[0]:.6f}, {x[1]:.6f}), "
          f"f = {f:.3e}, {diag.n_iterations} iterations ({diag.stop_reason})")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "make-target": _cmd_make_target,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NeuroskinError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())
