"""End-to-end hybrid training pipeline: swarm search, then bounded
quasi-Newton refinement seeded at the swarm's best point.

All logged artifacts are deterministic functions of (config, seed): the
iterate log (``result.txt`` style), and the convergence CSV. The JSON
report additionally carries wall-clock timings, which of course vary.
"""

from __future__ import annotations

import functools
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .config import TrainingConfig
from .errors import ParseError
from .lbfgsb import forward_diff_gradient, lbfgsb_minimize
from .objective import apply_parameters, objective_from_model
from .pool import EvaluationPool, resolve_workers
from .pso import pso_run


def log_iterate(path, x) -> None:
    """Append one iterate: components joined by commas, full-precision
    decimal rendering, newline-terminated."""
    vec = np.asarray(x, dtype=float).ravel()
    with open(path, "a") as fh:
        fh.write(",".join(repr(float(v)) for v in vec) + "\n")


def _write_convergence(path, rows, n_params: int) -> None:
    header = "iteration,phase,best_objective," + ",".join(f"p{i}" for i in range(n_params))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for iteration, phase, best, params in rows:
            rendered = ",".join(repr(float(v)) for v in params)
            fh.write(f"{iteration},{phase},{repr(float(best))},{rendered}\n")


@dataclass
class TrainingReport:
    pso_history: list = field(default_factory=list)
    qn_history: list = field(default_factory=list)
    final_parameters: list = field(default_factory=list)
    final_objective: float | None = None
    pso_best: float | None = None
    qn_stop_reason: str | None = None
    qn_evaluations: int = 0
    timings: dict = field(default_factory=dict)
    seed: int = 0
    completed: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "completed": self.completed,
            "pso_best": self.pso_best,
            "final_parameters": self.final_parameters,
            "final_objective": self.final_objective,
            "qn_stop_reason": self.qn_stop_reason,
            "qn_evaluations": self.qn_evaluations,
            "timings": self.timings,
            "pso_history": self.pso_history,
            "qn_history": self.qn_history,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def hybrid_train(cfg: TrainingConfig) -> TrainingReport:
    """Run the full pipeline and persist result/convergence/report files.

    On a phase failure the partial report is saved before the error
    propagates.
    """
    workers = resolve_workers(cfg.workers)
    obj_cfg = cfgmod.build_objective_config(cfg)
    fn = functools.partial(objective_from_model, obj_cfg)
    n = cfg.objective.groups

    result_path = cfg.paths.result
    if os.path.isfile(result_path):
        os.remove(result_path)

    report = TrainingReport(seed=cfg.seed)
    convergence_rows = []
    try:
        t0 = time.perf_counter()
        with EvaluationPool(fn, min(cfg.pso.particles, workers)) as pool:
            pso_result = pso_run(
                cfgmod.pso_config(cfg), fn, mapper=pool.map_or_inf, x0=cfg.x0
            )
        report.timings["pso_s"] = time.perf_counter() - t0
        report.pso_best = pso_result.best_fitness
        for rec in pso_result.history:
            report.pso_history.append(
                {"iteration": rec.iteration, "best": rec.best_fitness,
                 "position": rec.best_position.tolist()}
            )
            convergence_rows.append(
                (rec.iteration, "pso", rec.best_fitness, rec.best_position)
            )

        t1 = time.perf_counter()
        with EvaluationPool(fn, min(n + 1, workers)) as pool:
            def f_and_grad(x):
                res = forward_diff_gradient(
                    fn, x, cfg.delta,
                    mapper=pool.map_strict, bounds=cfg.bounds, mode=cfg.delta_mode,
                )
                return res.f, res.g

            x_best, f_best, diag = lbfgsb_minimize(
                f_and_grad,
                pso_result.best_position,
                cfgmod.quasi_newton_options(cfg),
                iterate_callback=lambda xk: log_iterate(result_path, xk),
            )
        report.timings["quasi_newton_s"] = time.perf_counter() - t1
        for k, (fk, xk) in enumerate(zip(diag.accepted_f, diag.accepted_x), start=1):
            report.qn_history.append({"iteration": k, "best": fk, "position": xk.tolist()})
            convergence_rows.append((k, "quasi_newton", fk, xk))
        report.qn_stop_reason = diag.stop_reason
        report.qn_evaluations = diag.n_evaluations

        report.final_parameters = [float(v) for v in x_best]
        report.final_objective = fn(np.asarray(x_best, dtype=float))
        report.completed = True
    finally:
        _write_convergence(cfg.paths.convergence_log, convergence_rows, n)
        report.save(cfg.paths.report)
    return report


def parse_history(path) -> np.ndarray:
    """Read an iterate log: comma-separated floats, one iterate per line."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                row = [float(tok) for tok in stripped.split(",")]
            except ValueError as exc:
                raise ParseError(f"line {lineno} of {path} is not numeric: {stripped!r}", line=lineno) from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"line {lineno} of {path} has {len(row)} columns, expected {width}",
                    line=lineno,
                )
            rows.append(row)
    if not rows:
        raise ParseError(f"history file {path} is empty")
    return np.asarray(rows, dtype=float)


def evaluate_history(cfg: TrainingConfig, history_path=None) -> np.ndarray:
    """Re-score every logged iterate and rewrite the file with the
    objective appended as a final column. Returns the annotated array."""
    path = history_path if history_path is not None else cfg.paths.result
    history = parse_history(path)
    obj_cfg = cfgmod.build_objective_config(cfg)
    fn = functools.partial(objective_from_model, obj_cfg)
    with EvaluationPool(fn, resolve_workers(cfg.workers)) as pool:
        values = pool.map_strict(list(history))
    annotated = np.column_stack([history, values])
    with open(path, "w") as fh:
        for row in annotated:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return annotated


def make_target(cfg: TrainingConfig):
    """Forward-simulate at the configured true parameters and write the
    target file the objective trains against."""
    if cfg.true_parameters is None:
        raise ParseError("target.true_parameters is not set in the configuration")
    model = apply_parameters(
        cfgmod.build_model(cfg), np.asarray(cfg.true_parameters, dtype=float),
        cfgmod.parameter_mode(cfg),
    )
    trace = _run_trace(cfg, model)
    _save_target(cfg, trace)
    return trace


def run_forward(cfg: TrainingConfig):
    """Forward-simulate the model exactly as configured (baseline values)."""
    return _run_trace(cfg, cfgmod.build_model(cfg))


def _run_trace(cfg: TrainingConfig, model):
    from .fe import simulate

    inputs = cfgmod.build_input(cfg, len(model.mesh.supported_nodes))
    return simulate(
        model,
        inputs,
        cfg.simulation.dt,
        cfg.simulation.n_steps,
        tracked_nodes=cfg.objective.tracked_nodes,
        rayleigh_a0=cfg.simulation.rayleigh_a0,
        rayleigh_a1=cfg.simulation.rayleigh_a1,
    )


def _save_target(cfg: TrainingConfig, trace) -> None:
    if cfg.objective.tracked_nodes is None:
        data = trace.output[:, None]
    else:
        cols = [trace.tracked_nodes.index(n) for n in cfg.objective.tracked_nodes]
        data = trace.displacements[:, cols]
    np.savetxt(cfg.objective.target_path, data)
