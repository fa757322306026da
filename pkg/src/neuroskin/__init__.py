"""Neuro-membrane simulation and hybrid parameter identification."""

from .errors import (
    AssemblyError,
    ConfigError,
    EvaluationError,
    ModelError,
    NeuroskinError,
    OptimizationError,
    ParseError,
    ShapeError,
    StepError,
)
from .membrane import (
    ActivationKind,
    MaterialField,
    MembraneModel,
    Mesh,
    Neuron,
    activation_eval,
    build_membrane,
    element_traction_forces,
    neuron_potential,
)
from .fe import (
    DynamicState,
    GlobalSystem,
    InputSignal,
    SimulationTrace,
    assemble,
    element_stiffness,
    initial_state,
    neuro_force_vector,
    newmark_step,
    simulate,
    zero_state,
)
from .objective import (
    ObjectiveConfig,
    ParameterMode,
    apply_parameters,
    cost_multinode,
    expand_parameters,
    load_target,
    mse,
    objective_from_model,
    rmse,
)
from .pso import PsoConfig, PsoResult, Swarm, Particle, pso_run, pso_step
from .lbfgsb import (
    GradientResult,
    QuasiNewtonOptions,
    forward_diff_gradient,
    lbfgsb_minimize,
)
from .pool import EvaluationPool, resolve_workers
from .config import TrainingConfig, load_config
from .trainer import (
    TrainingReport,
    evaluate_history,
    hybrid_train,
    log_iterate,
    make_target,
)

__version__ = "0.1.0"
