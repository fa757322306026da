import numpy as np
import pytest

from neuroskin.config import (
    InputConfig,
    ModelConfig,
    ObjectiveSection,
    PathsSection,
    PsoSection,
    QuasiNewtonSection,
    SimulationConfig,
    TrainingConfig,
)
from neuroskin.trainer import make_target


def small_training_config(tmp_path, **overrides) -> TrainingConfig:
    """A 6x3-mesh, 2-group identification scenario that trains in seconds.

    Truth is 500000 per group, start 450000, same bounds as the full demo.
    """
    defaults = dict(
        model=ModelConfig(nx=6, ny=3, size=50.0),
        simulation=SimulationConfig(dt=1.0e-3, n_steps=30, rayleigh_a0=5.0),
        input=InputConfig(kind="sine", amplitude=1.0, frequency=12.0),
        objective=ObjectiveSection(groups=2, target_path=str(tmp_path / "output.out")),
        pso=PsoSection(particles=4, iterations=4),
        quasi_newton=QuasiNewtonSection(
            max_iterations=15, max_function_evals=60, gradient_tolerance=1.0e-12
        ),
        paths=PathsSection(
            result=str(tmp_path / "result.txt"),
            convergence_log=str(tmp_path / "convergence.csv"),
            report=str(tmp_path / "report.json"),
        ),
        bounds=np.array([[400000.0, 550000.0]]),
        x0=(450000.0, 450000.0),
        true_parameters=(500000.0, 500000.0),
        seed=1,
        workers=1,
    )
    defaults.update(overrides)
    return TrainingConfig(**defaults)


@pytest.fixture
def small_config(tmp_path):
    cfg = small_training_config(tmp_path)
    make_target(cfg)
    return cfg
