"""Training configuration: YAML schema, validation and builders.

The file layout is documented in the README; every section maps onto one
dataclass below. Paths inside the file are used as given (relative paths
resolve against the working directory).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dataclass_fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .fe import InputSignal
from .membrane import ActivationKind, MembraneModel, build_membrane
from .objective import ObjectiveConfig, ParameterMode, load_target
from .pso import PsoConfig
from .lbfgsb import QuasiNewtonOptions


@dataclass
class ModelConfig:
    nx: int = 20
    ny: int = 10
    size: float = 50.0
    support_edge: str = "left"
    output_node: int | None = None
    neuron_input_weight: float = 0.25
    neuron_output_weight: float = 10.0
    activation: str = "symmetric_sigmoid"
    elastic_modulus: float = 500000.0
    poisson: float = 0.2
    density: float = 1.0e-4
    thickness: float = 10.0


@dataclass
class SimulationConfig:
    dt: float = 1.0e-3
    n_steps: int = 100
    rayleigh_a0: float = 0.0
    rayleigh_a1: float = 0.0


@dataclass
class InputConfig:
    kind: str = "sine"          # sine | step | file
    amplitude: float = 1.0
    frequency: float = 10.0     # Hz, sine only
    path: str | None = None     # file only


@dataclass
class ObjectiveSection:
    mode: str = "element_modulus_groups"
    groups: int = 4
    target_path: str = "output.out"
    tracked_nodes: tuple[int, ...] | None = None


@dataclass
class PsoSection:
    particles: int = 20
    iterations: int = 30
    omega: float = 0.7
    phi1: float = 1.5
    phi2: float = 1.5


@dataclass
class QuasiNewtonSection:
    memory: int = 10
    max_iterations: int = 100
    max_function_evals: int = 200
    stop_factor: float = 1.0e7
    gradient_tolerance: float = 1.0e-5


@dataclass
class PathsSection:
    result: str = "result.txt"
    convergence_log: str = "convergence.csv"
    report: str = "report.json"


@dataclass
class TrainingConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    input: InputConfig = field(default_factory=InputConfig)
    objective: ObjectiveSection = field(default_factory=ObjectiveSection)
    pso: PsoSection = field(default_factory=PsoSection)
    quasi_newton: QuasiNewtonSection = field(default_factory=QuasiNewtonSection)
    paths: PathsSection = field(default_factory=PathsSection)
    bounds: np.ndarray = field(default_factory=lambda: np.array([[400000.0, 550000.0]]))
    x0: tuple[float, ...] | None = None
    true_parameters: tuple[float, ...] | None = None
    delta: float = 1.0e-2
    delta_mode: str = "absolute"
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        n = self.objective.groups
        if n < 1:
            raise ConfigError("objective.groups must be at least 1")
        bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if bounds.shape == (1, 2) and n > 1:
            bounds = np.repeat(bounds, n, axis=0)
        if bounds.shape != (n, 2):
            raise ConfigError(
                f"bounds must be one [lo, hi] pair or {n} pairs, got shape {bounds.shape}"
            )
        self.bounds = bounds
        if self.x0 is not None and len(self.x0) != n:
            raise ConfigError(f"x0 must have {n} components")
        if self.true_parameters is not None and len(self.true_parameters) != n:
            raise ConfigError(f"target.true_parameters must have {n} components")
        if self.delta_mode not in ("absolute", "relative"):
            raise ConfigError(f"delta_mode must be absolute or relative, got {self.delta_mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


def _coerce_section(cls, mapping, name):
    if mapping is None:
        return cls()
    if not isinstance(mapping, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(mapping) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    kwargs = dict(mapping)
    if "tracked_nodes" in kwargs and kwargs["tracked_nodes"] is not None:
        kwargs["tracked_nodes"] = tuple(int(v) for v in kwargs["tracked_nodes"])
    # PyYAML reads unsigned-exponent floats like 1.0e7 as strings; coerce
    # every numeric field by the type of its default
    for f in dataclass_fields(cls):
        if f.name not in kwargs or kwargs[f.name] is None:
            continue
        try:
            if isinstance(f.default, bool):
                continue
            if isinstance(f.default, float):
                kwargs[f.name] = float(kwargs[f.name])
            elif isinstance(f.default, int):
                kwargs[f.name] = int(kwargs[f.name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"key {name}.{f.name} must be numeric: {kwargs[f.name]!r}") from exc
    if "output_node" in kwargs and kwargs["output_node"] is not None:
        kwargs["output_node"] = int(kwargs["output_node"])
    return cls(**kwargs)


def config_from_mapping(data: dict) -> TrainingConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    known = {
        "model", "simulation", "input", "objective", "pso", "quasi_newton",
        "paths", "training", "target",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level sections: {sorted(unknown)}")

    training = data.get("training") or {}
    target = data.get("target") or {}
    extra = set(training) - {"bounds", "x0", "seed", "workers", "delta", "delta_mode"}
    if extra:
        raise ConfigError(f"unknown keys in section 'training': {sorted(extra)}")
    extra = set(target) - {"true_parameters"}
    if extra:
        raise ConfigError(f"unknown keys in section 'target': {sorted(extra)}")

    kwargs = {}
    if "bounds" in training:
        kwargs["bounds"] = np.asarray(training["bounds"], dtype=float)
    if training.get("x0") is not None:
        kwargs["x0"] = tuple(float(v) for v in training["x0"])
    if target.get("true_parameters") is not None:
        kwargs["true_parameters"] = tuple(float(v) for v in target["true_parameters"])
    for key in ("seed", "workers"):
        if key in training:
            kwargs[key] = int(training[key])
    if "delta" in training:
        kwargs["delta"] = float(training["delta"])
    if "delta_mode" in training:
        kwargs["delta_mode"] = str(training["delta_mode"])

    return TrainingConfig(
        model=_coerce_section(ModelConfig, data.get("model"), "model"),
        simulation=_coerce_section(SimulationConfig, data.get("simulation"), "simulation"),
        input=_coerce_section(InputConfig, data.get("input"), "input"),
        objective=_coerce_section(ObjectiveSection, data.get("objective"), "objective"),
        pso=_coerce_section(PsoSection, data.get("pso"), "pso"),
        quasi_newton=_coerce_section(QuasiNewtonSection, data.get("quasi_newton"), "quasi_newton"),
        paths=_coerce_section(PathsSection, data.get("paths"), "paths"),
        **kwargs,
    )


def load_config(path) -> TrainingConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh)
    try:
        return config_from_mapping(data or {})
    except TypeError as exc:
        raise ConfigError(f"invalid configuration in {path}: {exc}") from exc


def build_model(cfg: TrainingConfig) -> MembraneModel:
    try:
        activation = ActivationKind(cfg.model.activation)
    except ValueError as exc:
        raise ConfigError(f"unknown activation {cfg.model.activation!r}") from exc
    return build_membrane(
        cfg.model.nx,
        cfg.model.ny,
        cfg.model.size,
        support_edge=cfg.model.support_edge,
        output_node=cfg.model.output_node,
        neuron_input_weight=cfg.model.neuron_input_weight,
        neuron_output_weight=cfg.model.neuron_output_weight,
        activation=activation,
        elastic_modulus=cfg.model.elastic_modulus,
        poisson=cfg.model.poisson,
        density=cfg.model.density,
        thickness=cfg.model.thickness,
    )


def build_input(cfg: TrainingConfig, n_supports: int) -> InputSignal:
    sim = cfg.simulation
    kind = cfg.input.kind
    if kind == "file":
        if not cfg.input.path:
            raise ConfigError("input.kind is 'file' but input.path is not set")
        signal = InputSignal.from_file(cfg.input.path)
        if signal.n_steps != sim.n_steps or signal.n_channels != n_supports:
            raise ConfigError(
                f"input file must be ({sim.n_steps}, {n_supports}), "
                f"got ({signal.n_steps}, {signal.n_channels})"
            )
        return signal
    t = np.arange(1, sim.n_steps + 1) * sim.dt
    if kind == "sine":
        samples = cfg.input.amplitude * np.sin(2.0 * np.pi * cfg.input.frequency * t)
    elif kind == "step":
        samples = np.full(sim.n_steps, cfg.input.amplitude)
    else:
        raise ConfigError(f"input.kind must be sine, step or file, got {kind!r}")
    return InputSignal.uniform(samples, n_supports)


def parameter_mode(cfg: TrainingConfig) -> ParameterMode:
    try:
        return ParameterMode(cfg.objective.mode)
    except ValueError as exc:
        raise ConfigError(f"unknown objective mode {cfg.objective.mode!r}") from exc


def build_objective_config(cfg: TrainingConfig) -> ObjectiveConfig:
    """Assemble the full simulation-backed objective, loading the target."""
    model = build_model(cfg)
    inputs = build_input(cfg, len(model.mesh.supported_nodes))
    target = load_target(cfg.objective.target_path)
    return ObjectiveConfig(
        model=model,
        inputs=inputs,
        dt=cfg.simulation.dt,
        n_steps=cfg.simulation.n_steps,
        target=target,
        mode=parameter_mode(cfg),
        tracked_nodes=cfg.objective.tracked_nodes,
        rayleigh_a0=cfg.simulation.rayleigh_a0,
        rayleigh_a1=cfg.simulation.rayleigh_a1,
    )


def pso_config(cfg: TrainingConfig) -> PsoConfig:
    return PsoConfig(
        bounds=cfg.bounds,
        particles=cfg.pso.particles,
        max_iterations=cfg.pso.iterations,
        omega=cfg.pso.omega,
        phi1=cfg.pso.phi1,
        phi2=cfg.pso.phi2,
        seed=cfg.seed,
    )


def quasi_newton_options(cfg: TrainingConfig) -> QuasiNewtonOptions:
    qn = cfg.quasi_newton
    return QuasiNewtonOptions(
        bounds=cfg.bounds,
        memory=qn.memory,
        max_iterations=qn.max_iterations,
        max_function_evals=qn.max_function_evals,
        stop_factor=qn.stop_factor,
        gradient_tolerance=qn.gradient_tolerance,
    )


def with_overrides(cfg: TrainingConfig, seed: int | None = None, workers: int | None = None) -> TrainingConfig:
    out = cfg
    if seed is not None:
        out = replace(out, seed=int(seed))
    if workers is not None:
        out = replace(out, workers=int(workers))
    return out
