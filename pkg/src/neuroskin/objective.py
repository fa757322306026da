"""Error measures and the simulation-backed objective.

Connects a parameter vector to the membrane simulator: the vector is
expanded onto the elements (grouped moduli or grouped neuron output
weights), the transient response is computed, and its tracked channels
are scored against a target series.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EvaluationError, ShapeError
from .fe import InputSignal, simulate
from .membrane import MembraneModel, Neuron

class ParameterMode(enum.Enum):
    ELEMENT_MODULUS_GROUPS = "element_modulus_groups"
    NEURON_OUTPUT_WEIGHTS = "neuron_output_weights"


def _as_series(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"{name} must be a non-empty 1-D series, got shape {arr.shape}")
    return arr


def mse(predicted, target) -> float:
    """Mean squared error over paired samples."""
    p = _as_series("predicted", predicted)
    t = _as_series("target", target)
    if p.shape != t.shape:
        raise ShapeError(f"series lengths differ: {p.shape} vs {t.shape}")
    d = p - t
    return float(np.mean(d * d))


def rmse(predicted, target) -> float:
    """Root mean squared error over paired samples."""
    return float(np.sqrt(mse(predicted, target)))


def cost_multinode(sim, target) -> float:
    """Unnormalized double sum of squared differences over (time, node)."""
    s = np.asarray(sim, dtype=float)
    t = np.asarray(target, dtype=float)
    if s.ndim != 2 or s.shape != t.shape:
        raise ShapeError(f"(time x node) shapes must match: {s.shape} vs {t.shape}")
    d = s - t
    return float(np.sum(d * d))


def expand_parameters(x, n_elements: int) -> np.ndarray:
    """Expand n group values onto n_elements elements as contiguous blocks
    in element-numbering order (group size k = n_elements / n)."""
    vec = np.asarray(x, dtype=float).ravel()
    n = vec.size
    if n < 1:
        raise ConfigError("parameter vector must not be empty")
    if n_elements % n != 0:
        raise ConfigError(
            f"group count {n} does not divide the element count {n_elements}"
        )
    return np.repeat(vec, n_elements // n)


def apply_parameters(model: MembraneModel, x, mode: ParameterMode) -> MembraneModel:
    """Return a copy of the model with the parameter vector written into
    the per-element moduli or neuron output weights."""
    per_element = expand_parameters(x, model.mesh.n_elements)
    if mode is ParameterMode.ELEMENT_MODULUS_GROUPS:
        material = replace(model.material, elastic_modulus=per_element)
        return replace(model, material=material)
    if mode is ParameterMode.NEURON_OUTPUT_WEIGHTS:
        neurons = tuple(
            Neuron(n.input_weights, n.activation, float(w))
            for n, w in zip(model.neurons, per_element)
        )
        return replace(model, neurons=neurons)
    raise ConfigError(f"unknown parameter mode: {mode!r}")


def load_target(path) -> np.ndarray:
    """Load a target series file: whitespace-separated floats, one row per
    time step, one column per tracked node."""
    arr = np.loadtxt(path, ndmin=2)
    if arr.size == 0:
        raise ShapeError(f"target file {path} is empty")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"target file {path} contains non-finite values")
    return arr


@dataclass(eq=False)
class ObjectiveConfig:
    """Everything needed to score a parameter vector.

    ``target`` has ``n_steps + 1`` rows (matching the simulation trace,
    initial state included). With ``tracked_nodes`` unset the objective is
    the RMSE of the output-node channel against the single target column;
    with tracked nodes set it is the unnormalized multi-node squared sum.
    """

    model: MembraneModel
    inputs: InputSignal
    dt: float
    n_steps: int
    target: np.ndarray
    mode: ParameterMode = ParameterMode.ELEMENT_MODULUS_GROUPS
    tracked_nodes: tuple[int, ...] | None = None
    rayleigh_a0: float = 0.0
    rayleigh_a1: float = 0.0

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        if self.target.ndim == 1:
            self.target = self.target[:, None]
        expected_cols = 1 if self.tracked_nodes is None else len(self.tracked_nodes)
        if self.target.shape != (self.n_steps + 1, expected_cols):
            raise ShapeError(
                f"target must be ({self.n_steps + 1}, {expected_cols}), "
                f"got {self.target.shape}"
            )


def objective_from_model(config: ObjectiveConfig, x) -> float:
    """Expand ``x`` into the model, simulate, and score against the target."""
    vec = np.asarray(x, dtype=float).ravel()
    try:
        model = apply_parameters(config.model, vec, config.mode)
        trace = simulate(
            model,
            config.inputs,
            config.dt,
            config.n_steps,
            tracked_nodes=config.tracked_nodes,
            rayleigh_a0=config.rayleigh_a0,
            rayleigh_a1=config.rayleigh_a1,
        )
    except Exception as exc:
        raise EvaluationError(f"simulation failed at x={vec.tolist()}: {exc}", x=vec) from exc
    if config.tracked_nodes is None:
        return rmse(trace.output, config.target[:, 0])
    # column order follows config.tracked_nodes (output node prepended by
    # the simulator only if absent; keep the configured order here)
    cols = [trace.tracked_nodes.index(n) for n in config.tracked_nodes]
    return cost_multinode(trace.displacements[:, cols], config.target)
