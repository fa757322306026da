"""Dynamic plane-stress finite-element engine for the neuro-membrane.

Bilinear 4-node square elements (2x2 Gauss quadrature), lumped mass,
optional Rayleigh damping, and an implicit average-acceleration time
stepper. The per-element neuron tractions enter the equations of motion
as a displacement-dependent force, resolved inside each step by
fixed-point iteration.

DOF layout: node index ``i`` (0-based) owns DOFs ``2*i`` (horizontal, x)
and ``2*i + 1`` (vertical, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import AssemblyError, ModelError, ShapeError, StepError
from .membrane import ActivationKind, MembraneModel

_GAUSS = 1.0 / np.sqrt(3.0)
_GAUSS_POINTS = [(-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS)]

# parent-square corner signs, counterclockwise from lower-left
_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def plane_stress_matrix(E: float, nu: float) -> np.ndarray:
    """Plane-stress constitutive matrix relating (eps_x, eps_y, gamma_xy)
    to (sig_x, sig_y, tau_xy)."""
    c = E / (1.0 - nu * nu)
    return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]])


def strain_displacement(size: float, xi: float, eta: float) -> np.ndarray:
    """3x8 strain-displacement matrix of the square bilinear element at
    parent coordinates (xi, eta). DOF order: (ux1, uy1, ..., ux4, uy4)."""
    # d/dx = (2/size) d/dxi on the square element
    dn_dxi = 0.25 * _CORNERS[:, 0] * (1.0 + eta * _CORNERS[:, 1])
    dn_deta = 0.25 * _CORNERS[:, 1] * (1.0 + xi * _CORNERS[:, 0])
    dn_dx = dn_dxi * (2.0 / size)
    dn_dy = dn_deta * (2.0 / size)
    B = np.zeros((3, 8))
    B[0, 0::2] = dn_dx
    B[1, 1::2] = dn_dy
    B[2, 0::2] = dn_dy
    B[2, 1::2] = dn_dx
    return B


def element_stiffness(E: float, nu: float, t: float, size: float) -> np.ndarray:
    """8x8 stiffness of one square plane-stress element."""
    if E <= 0.0 or not (0.0 <= nu < 0.5) or t <= 0.0 or size <= 0.0:
        raise ModelError(
            f"invalid element material/geometry: E={E}, nu={nu}, t={t}, size={size}"
        )
    D = plane_stress_matrix(E, nu)
    det_j = size * size / 4.0
    Ke = np.zeros((8, 8))
    for xi, eta in _GAUSS_POINTS:
        B = strain_displacement(size, xi, eta)
        Ke += B.T @ D @ B * det_j
    return Ke * t


@dataclass(eq=False)
class GlobalSystem:
    """Assembled matrices plus the free/constrained DOF partition.

    ``mass`` is the lumped (diagonal) mass vector. ``input_dofs`` are the
    horizontal DOFs of the supported nodes in ascending node order; they are
    the channels driven by an input signal.
    """

    stiffness: np.ndarray
    mass: np.ndarray
    damping: np.ndarray
    constrained: np.ndarray
    free: np.ndarray
    input_dofs: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __post_init__(self):
        self.stiffness = np.asarray(self.stiffness, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        self.damping = np.asarray(self.damping, dtype=float)
        self.constrained = np.asarray(self.constrained, dtype=int)
        self.free = np.asarray(self.free, dtype=int)
        self.input_dofs = np.asarray(self.input_dofs, dtype=int)
        n = self.stiffness.shape[0]
        if self.stiffness.shape != (n, n) or self.damping.shape != (n, n):
            raise ShapeError("stiffness and damping must be square and same size")
        if self.mass.shape != (n,):
            raise ShapeError("mass must be a diagonal vector of length n_dofs")
        if np.any(self.mass <= 0.0):
            raise AssemblyError("lumped mass entries must all be positive")
        if len(self.free) + len(self.constrained) != n:
            raise ShapeError("free and constrained DOF sets must partition all DOFs")

    @property
    def n_dofs(self) -> int:
        return self.stiffness.shape[0]


def assemble(model: MembraneModel, rayleigh_a0: float = 0.0, rayleigh_a1: float = 0.0) -> GlobalSystem:
    """Assemble global stiffness, lumped mass and (optional) Rayleigh
    damping ``a0*M + a1*K``, with both DOFs of every supported node
    constrained."""
    mesh = model.mesh
    n_dofs = 2 * mesh.n_nodes
    # all elements share nu, t and size, so one unit-modulus matrix suffices
    base = element_stiffness(1.0, model.material.poisson, model.material.thickness, mesh.size)
    K = np.zeros((n_dofs, n_dofs))
    M = np.zeros(n_dofs)
    node_mass = model.material.density * model.material.thickness * mesh.element_area / 4.0
    for e, nodes in enumerate(mesh.elements):
        dofs = np.empty(8, dtype=int)
        dofs[0::2] = 2 * nodes
        dofs[1::2] = 2 * nodes + 1
        K[np.ix_(dofs, dofs)] += model.material.elastic_modulus[e] * base
        M[dofs] += node_mass

    supported = mesh.supported_indices
    constrained = np.sort(np.concatenate([2 * supported, 2 * supported + 1]))
    free = np.setdiff1d(np.arange(n_dofs), constrained)

    # three in-plane rigid-body modes must be removed before K_ff can be SPD
    if len(constrained) < 3:
        raise AssemblyError(
            f"only {len(constrained)} constrained DOFs; at least 3 are needed "
            "to remove the in-plane rigid-body modes"
        )
    K_ff = K[np.ix_(free, free)]
    try:
        np.linalg.cholesky(K_ff)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(
            "free-DOF stiffness is not positive definite; the support set "
            "does not remove all rigid-body motion"
        ) from exc

    C = rayleigh_a0 * np.diag(M) + rayleigh_a1 * K
    return GlobalSystem(
        stiffness=K,
        mass=M,
        damping=C,
        constrained=constrained,
        free=free,
        input_dofs=2 * supported,
    )


def _neuro_kernel(model: MembraneModel):
    """Vectorized map from a global displacement vector to the global
    neuron traction force vector. Returns None when every neuron is
    disabled (linear model)."""
    if all(n.activation is ActivationKind.ZERO for n in model.neurons):
        return None
    ux_dofs = 2 * model.mesh.elements  # (n_el, 4)
    weights = np.array([n.input_weights for n in model.neurons])
    scale = np.array([n.output_weight for n in model.neurons]) * model.mesh.element_area / 4.0
    kind_groups = {}
    for e, n in enumerate(model.neurons):
        kind_groups.setdefault(n.activation, []).append(e)
    kind_groups = {k: np.asarray(v) for k, v in kind_groups.items()}
    n_dofs = 2 * model.mesh.n_nodes

    def kernel(u: np.ndarray) -> np.ndarray:
        z = np.einsum("ij,ij->i", weights, u[ux_dofs])
        out = np.empty_like(z)
        for kind, idx in kind_groups.items():
            if kind is ActivationKind.SYMMETRIC_SIGMOID:
                out[idx] = np.tanh(z[idx])
            elif kind is ActivationKind.LINEAR_SATURATING:
                out[idx] = np.clip(z[idx], -1.0, 1.0)
            else:
                out[idx] = 0.0
        per_node = out * scale
        force = np.zeros(n_dofs)
        np.add.at(force, ux_dofs, per_node[:, None])
        return force

    return kernel


def neuro_force_vector(model: MembraneModel, displacement) -> np.ndarray:
    """Global force vector contributed by all neurons at the given
    displacement state (horizontal DOFs only)."""
    u = np.asarray(displacement, dtype=float)
    n_dofs = 2 * model.mesh.n_nodes
    if u.shape != (n_dofs,):
        raise ShapeError(f"displacement must have length {n_dofs}, got shape {u.shape}")
    kernel = _neuro_kernel(model)
    if kernel is None:
        return np.zeros(n_dofs)
    return kernel(u)


@dataclass(eq=False)
class DynamicState:
    """Displacement, velocity and acceleration over all DOFs at time ``t``."""

    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray


def zero_state(system: GlobalSystem) -> DynamicState:
    n = system.n_dofs
    return DynamicState(0.0, np.zeros(n), np.zeros(n), np.zeros(n))


def initial_state(system: GlobalSystem, u0=None, v0=None, f_ext=None) -> DynamicState:
    """State at t=0 with the acceleration consistent with the equations of
    motion on the free DOFs (constrained accelerations start at zero)."""
    n = system.n_dofs
    u = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float).copy()
    v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    f = np.zeros(n) if f_ext is None else np.asarray(f_ext, dtype=float)
    a = np.zeros(n)
    fr = system.free
    residual = f - system.stiffness @ u - system.damping @ v
    a[fr] = residual[fr] / system.mass[fr]
    return DynamicState(0.0, u, v, a)


def _newmark_core(system, chol, state, dt, f_ext, prescribed, feedback, fp_tol, fp_max_iter):
    """One average-acceleration step (beta=1/4, gamma=1/2) to t+dt.

    ``chol`` is the Cholesky factorization of the effective free-DOF
    matrix for this dt. The neuron force (if any) is converged by Picard
    iteration on the implicit displacement.
    """
    beta, gamma = 0.25, 0.5
    c0 = 1.0 / (beta * dt * dt)
    c1 = gamma / (beta * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0
    c4 = gamma / beta - 1.0
    c5 = dt / 2.0 * (gamma / beta - 2.0)
    c6 = dt * (1.0 - gamma)
    c7 = gamma * dt

    fr, co = system.free, system.constrained
    K, C, M = system.stiffness, system.damping, system.mass

    u_new = state.u.copy()
    a_c = np.empty(0)
    v_c = np.empty(0)
    if len(co):
        u_c = prescribed
        a_c = c0 * (u_c - state.u[co]) - c2 * state.v[co] - c3 * state.a[co]
        v_c = state.v[co] + c6 * state.a[co] + c7 * a_c
        u_new[co] = u_c

    # constant part of the effective right-hand side on the free DOFs
    rhs = f_ext[fr].copy()
    rhs += M[fr] * (c0 * state.u[fr] + c2 * state.v[fr] + c3 * state.a[fr])
    rhs += C[np.ix_(fr, fr)] @ (c1 * state.u[fr] + c4 * state.v[fr] + c5 * state.a[fr])
    if len(co):
        rhs -= K[np.ix_(fr, co)] @ u_new[co]
        rhs -= C[np.ix_(fr, co)] @ v_c

    if feedback is None:
        u_new[fr] = cho_solve(chol, rhs)
    else:
        f_nl = feedback(u_new)
        residual = np.inf
        for _ in range(fp_max_iter):
            u_new[fr] = cho_solve(chol, rhs + f_nl[fr])
            f_next = feedback(u_new)
            residual = float(np.linalg.norm(f_next - f_nl))
            f_nl = f_next
            if residual <= fp_tol * max(1.0, float(np.linalg.norm(f_nl))):
                break
        else:
            raise StepError(
                f"neuron force iteration did not converge within {fp_max_iter} "
                f"iterations (last residual {residual:.3e})",
                residual=residual,
            )

    a_new = np.zeros_like(state.a)
    v_new = np.zeros_like(state.v)
    a_new[fr] = c0 * (u_new[fr] - state.u[fr]) - c2 * state.v[fr] - c3 * state.a[fr]
    v_new[fr] = state.v[fr] + c6 * state.a[fr] + c7 * a_new[fr]
    if len(co):
        a_new[co] = a_c
        v_new[co] = v_c
    return DynamicState(state.t + dt, u_new, v_new, a_new)


def _effective_factorization(system: GlobalSystem, dt: float):
    beta, gamma = 0.25, 0.5
    fr = system.free
    K_eff = (
        system.stiffness[np.ix_(fr, fr)]
        + (1.0 / (beta * dt * dt)) * np.diag(system.mass[fr])
        + (gamma / (beta * dt)) * system.damping[np.ix_(fr, fr)]
    )
    return cho_factor(K_eff)


def newmark_step(
    system: GlobalSystem,
    state: DynamicState,
    dt: float,
    external_forces=None,
    prescribed=None,
    *,
    force_feedback=None,
    fp_tol: float = 1.0e-8,
    fp_max_iter: int = 50,
) -> DynamicState:
    """Advance the system one implicit step of size ``dt``.

    ``external_forces`` is the applied load vector at the end of the step;
    ``prescribed`` holds the end-of-step values of the constrained DOFs
    (aligned with ``system.constrained``; zeros when omitted).
    ``force_feedback`` maps a displacement vector to an extra force vector
    (the neuron tractions) and is converged implicitly.
    """
    if dt <= 0.0:
        raise StepError(f"time step must be positive, got {dt}")
    n = system.n_dofs
    f_ext = np.zeros(n) if external_forces is None else np.asarray(external_forces, dtype=float)
    if f_ext.shape != (n,):
        raise ShapeError(f"external forces must have length {n}")
    if prescribed is None:
        pres = np.zeros(len(system.constrained))
    else:
        pres = np.asarray(prescribed, dtype=float)
        if pres.shape != (len(system.constrained),):
            raise ShapeError(
                f"prescribed values must have length {len(system.constrained)}"
            )
    chol = _effective_factorization(system, dt)
    return _newmark_core(system, chol, state, dt, f_ext, pres, force_feedback, fp_tol, fp_max_iter)


@dataclass(eq=False)
class InputSignal:
    """Prescribed horizontal displacement histories at the supported nodes.

    ``values`` has one row per time step (the value at the END of each
    step; the initial state is zero) and one column per supported node in
    ascending node order.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ShapeError("input signal must be a 2-D array (steps x channels)")
        self.values = vals

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_file(cls, path) -> "InputSignal":
        """Load a whitespace-separated numeric file (rows = time steps,
        columns = input channels)."""
        return cls(np.loadtxt(path, ndmin=2))

    @classmethod
    def uniform(cls, samples, n_channels: int) -> "InputSignal":
        """Same 1-D sample sequence applied to every channel."""
        col = np.asarray(samples, dtype=float).reshape(-1, 1)
        return cls(np.repeat(col, n_channels, axis=1))


@dataclass(eq=False)
class SimulationTrace:
    """Time series of tracked horizontal nodal displacements.

    ``displacements`` has ``n_steps + 1`` rows (the first is the initial
    state) and one column per tracked node (1-based node numbers in
    ``tracked_nodes``). The output channel is the column of ``output_node``.
    """

    times: np.ndarray
    displacements: np.ndarray
    tracked_nodes: tuple[int, ...]
    output_node: int

    @property
    def output(self) -> np.ndarray:
        return self.displacements[:, self.tracked_nodes.index(self.output_node)]

    def save(self, path) -> None:
        np.savetxt(path, self.displacements)


def simulate(
    model: MembraneModel,
    inputs: InputSignal,
    dt: float,
    n_steps: int,
    *,
    tracked_nodes=None,
    rayleigh_a0: float = 0.0,
    rayleigh_a1: float = 0.0,
    fp_tol: float = 1.0e-8,
    fp_max_iter: int = 50,
) -> SimulationTrace:
    """Run a transient simulation from zero initial conditions.

    The input signal prescribes the horizontal displacement of every
    supported node; vertical support DOFs stay fixed at zero. The trace
    records the horizontal displacement of the tracked nodes (the output
    node is always included) after every step.
    """
    if dt <= 0.0:
        raise StepError(f"time step must be positive, got {dt}")
    if inputs.n_steps != n_steps:
        raise ShapeError(
            f"input signal has {inputs.n_steps} steps but n_steps={n_steps}"
        )
    n_supports = len(model.mesh.supported_nodes)
    if inputs.n_channels != n_supports:
        raise ShapeError(
            f"input signal has {inputs.n_channels} channels but the mesh has "
            f"{n_supports} supported nodes"
        )

    tracked = (model.mesh.output_node,) if tracked_nodes is None else tuple(int(n) for n in tracked_nodes)
    if model.mesh.output_node not in tracked:
        tracked = (model.mesh.output_node,) + tracked
    for node in tracked:
        if not (1 <= node <= model.mesh.n_nodes):
            raise ModelError(f"tracked node {node} out of range 1..{model.mesh.n_nodes}")
    tracked_dofs = np.array([2 * (n - 1) for n in tracked])

    system = assemble(model, rayleigh_a0, rayleigh_a1)
    feedback = _neuro_kernel(model)
    chol = _effective_factorization(system, dt)

    # positions of the driven horizontal DOFs inside the constrained set
    input_pos = np.searchsorted(system.constrained, system.input_dofs)

    state = zero_state(system)
    record = np.zeros((n_steps + 1, len(tracked)))
    f_ext = np.zeros(system.n_dofs)
    for k in range(n_steps):
        pres = np.zeros(len(system.constrained))
        pres[input_pos] = inputs.values[k]
        state = _newmark_core(system, chol, state, dt, f_ext, pres, feedback, fp_tol, fp_max_iter)
        record[k + 1] = state.u[tracked_dofs]

    times = np.arange(n_steps + 1) * dt
    return SimulationTrace(
        times=times,
        displacements=record,
        tracked_nodes=tracked,
        output_node=model.mesh.output_node,
    )
