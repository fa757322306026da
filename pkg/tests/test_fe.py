import dataclasses

import numpy as np
import pytest

from neuroskin.errors import AssemblyError, ModelError, ShapeError, StepError
from neuroskin.fe import (
    GlobalSystem,
    InputSignal,
    assemble,
    element_stiffness,
    initial_state,
    neuro_force_vector,
    newmark_step,
    plane_stress_matrix,
    simulate,
    strain_displacement,
    zero_state,
)
from neuroskin.membrane import ActivationKind, build_membrane, element_traction_forces

GAUSS = 1.0 / np.sqrt(3.0)
GAUSS_POINTS = [(-GAUSS, -GAUSS), (GAUSS, -GAUSS), (GAUSS, GAUSS), (-GAUSS, GAUSS)]


def uniform_strain_displacement(coords, ex, ey, gxy):
    """Nodal displacements of the linear field with constant strain
    (ex, ey, gxy): u = ex*x + gxy*y, v = ey*y."""
    u = np.empty(2 * len(coords))
    u[0::2] = ex * coords[:, 0] + gxy * coords[:, 1]
    u[1::2] = ey * coords[:, 1]
    return u


class TestElementStiffness:
    def test_symmetry(self):
        Ke = element_stiffness(500000.0, 0.2, 10.0, 50.0)
        assert np.max(np.abs(Ke - Ke.T)) <= 1e-12 * np.max(np.abs(Ke))

    def test_rigid_translation_nullspace(self):
        Ke = element_stiffness(500000.0, 0.2, 10.0, 50.0)
        tx = np.tile([1.0, 0.0], 4)
        ty = np.tile([0.0, 1.0], 4)
        scale = np.max(np.abs(Ke))
        assert np.max(np.abs(Ke @ tx)) <= 1e-10 * scale
        assert np.max(np.abs(Ke @ ty)) <= 1e-10 * scale

    def test_matches_exact_integration(self):
        # exact symbolic integration of the bilinear-quad plane-stress form
        # at E=1, nu=0.3, t=1 (independent of the square's edge length)
        a, b, c, d = 45 / 91, 5 / 28, -55 / 182, -5 / 364
        e, f, g, h = -45 / 182, -5 / 28, 5 / 91, 5 / 364
        expected = np.array(
            [
                [a, b, c, d, e, f, g, h],
                [b, a, h, g, f, e, d, c],
                [c, h, a, f, g, d, e, b],
                [d, g, f, a, h, c, b, e],
                [e, f, g, h, a, b, c, d],
                [f, e, d, c, b, a, h, g],
                [g, d, e, b, c, h, a, f],
                [h, c, b, e, d, g, f, a],
            ]
        )
        Ke = element_stiffness(1.0, 0.3, 1.0, 50.0)
        np.testing.assert_allclose(Ke, expected, rtol=1e-12, atol=1e-15)

    def test_scales_linearly_in_modulus_and_thickness(self):
        base = element_stiffness(1.0, 0.25, 1.0, 50.0)
        np.testing.assert_allclose(element_stiffness(7.0, 0.25, 1.0, 50.0), 7.0 * base, rtol=1e-13)
        np.testing.assert_allclose(element_stiffness(1.0, 0.25, 3.0, 50.0), 3.0 * base, rtol=1e-13)

    @pytest.mark.parametrize("E,nu,t,size", [(-1.0, 0.2, 1.0, 50.0), (1.0, 0.6, 1.0, 50.0), (1.0, 0.2, 0.0, 50.0), (1.0, 0.2, 1.0, -5.0)])
    def test_invalid_parameters(self, E, nu, t, size):
        with pytest.raises(ModelError):
            element_stiffness(E, nu, t, size)


class TestAssemble:
    def test_reference_mesh_dof_counts(self):
        system = assemble(build_membrane(20, 10, 50.0))
        assert system.n_dofs == 462
        assert len(system.constrained) == 22
        assert len(system.free) == 440

    def test_free_stiffness_symmetric(self):
        system = assemble(build_membrane(20, 10, 50.0))
        K = system.stiffness[np.ix_(system.free, system.free)]
        assert np.max(np.abs(K - K.T)) <= 1e-12 * np.max(np.abs(K))

    def test_single_element_two_fixed_nodes(self):
        system = assemble(build_membrane(1, 1, 50.0))
        assert len(system.free) == 4
        K_ff = system.stiffness[np.ix_(system.free, system.free)]
        np.linalg.cholesky(K_ff)  # SPD by construction

    def test_total_mass(self):
        model = build_membrane(20, 10, 50.0)
        system = assemble(model)
        mat = model.material
        expected = mat.density * mat.thickness * model.mesh.element_area * model.mesh.n_elements
        assert system.mass.sum() / 2.0 == pytest.approx(expected, rel=1e-12)

    def test_insufficient_supports_raises(self):
        model = build_membrane(2, 2, 50.0)
        unsupported = dataclasses.replace(model.mesh, supported_nodes=())
        floating = dataclasses.replace(model, mesh=unsupported)
        with pytest.raises(AssemblyError):
            assemble(floating)


class TestPatchTest:
    STRAIN = (1.2e-3, -4.0e-4, 6.0e-4)

    def test_single_element_uniform_stress(self):
        model = build_membrane(1, 1, 50.0, activation=ActivationKind.ZERO)
        mesh, mat = model.mesh, model.material
        u = uniform_strain_displacement(mesh.coords, *self.STRAIN)
        D = plane_stress_matrix(mat.elastic_modulus[0], mat.poisson)
        expected = D @ np.array(self.STRAIN)
        dofs = np.empty(8, dtype=int)
        dofs[0::2] = 2 * mesh.elements[0]
        dofs[1::2] = 2 * mesh.elements[0] + 1
        for xi, eta in GAUSS_POINTS:
            stress = D @ strain_displacement(mesh.size, xi, eta) @ u[dofs]
            np.testing.assert_allclose(stress, expected, rtol=1e-10)

    def test_two_by_two_mesh_uniform_stress(self):
        model = build_membrane(2, 2, 50.0, activation=ActivationKind.ZERO)
        mesh, mat = model.mesh, model.material
        system = assemble(model)
        u = uniform_strain_displacement(mesh.coords, *self.STRAIN)

        # prescribe every boundary node, solve only the center node
        boundary = [n for n in range(mesh.n_nodes) if np.any(mesh.coords[n] == 0.0) or np.any(mesh.coords[n] == 100.0)]
        fixed = np.sort(np.concatenate([2 * np.array(boundary), 2 * np.array(boundary) + 1]))
        free = np.setdiff1d(np.arange(system.n_dofs), fixed)
        assert len(free) == 2
        K = system.stiffness
        u_solved = u.copy()
        u_solved[free] = np.linalg.solve(
            K[np.ix_(free, free)], -K[np.ix_(free, fixed)] @ u[fixed]
        )

        D = plane_stress_matrix(mat.elastic_modulus[0], mat.poisson)
        expected = D @ np.array(self.STRAIN)
        for quad in mesh.elements:
            dofs = np.empty(8, dtype=int)
            dofs[0::2] = 2 * quad
            dofs[1::2] = 2 * quad + 1
            for xi, eta in GAUSS_POINTS:
                stress = D @ strain_displacement(mesh.size, xi, eta) @ u_solved[dofs]
                np.testing.assert_allclose(stress, expected, rtol=1e-10)


class TestNeuroForceVector:
    def test_zero_displacement(self):
        model = build_membrane(3, 2, 50.0)
        assert np.all(neuro_force_vector(model, np.zeros(2 * model.mesh.n_nodes)) == 0.0)

    def test_disabled_neurons(self):
        model = build_membrane(3, 2, 50.0, activation=ActivationKind.ZERO)
        rng = np.random.default_rng(0)
        u = rng.normal(size=2 * model.mesh.n_nodes)
        assert np.all(neuro_force_vector(model, u) == 0.0)

    def test_single_element_scatter(self):
        model = build_membrane(1, 1, 50.0)
        rng = np.random.default_rng(1)
        u = rng.normal(size=8) * 0.5
        quad = model.mesh.elements[0]
        expected = np.zeros(8)
        expected[2 * quad] = element_traction_forces(model, 0, u[2 * quad])
        np.testing.assert_allclose(neuro_force_vector(model, u), expected, rtol=1e-14)

    def test_wrong_length(self):
        model = build_membrane(1, 1, 50.0)
        with pytest.raises(ShapeError):
            neuro_force_vector(model, np.zeros(3))


def sdof_system(k=1.0, m=1.0):
    return GlobalSystem(
        stiffness=np.array([[k]]),
        mass=np.array([m]),
        damping=np.zeros((1, 1)),
        constrained=np.array([], dtype=int),
        free=np.array([0]),
    )


class TestNewmarkStep:
    def test_zero_stays_zero(self):
        system = sdof_system()
        state = zero_state(system)
        for _ in range(10):
            state = newmark_step(system, state, 0.1)
        assert state.u[0] == 0.0 and state.v[0] == 0.0 and state.a[0] == 0.0

    def test_sdof_tracks_cosine(self):
        # m=1, k=1, u0=1: u(t) = cos(t); one period at 100 steps/period
        system = sdof_system()
        dt = 2.0 * np.pi / 100.0
        state = initial_state(system, u0=[1.0])
        worst = 0.0
        for _ in range(100):
            state = newmark_step(system, state, dt)
            worst = max(worst, abs(state.u[0] - np.cos(state.t)))
        assert worst < 0.01

    def test_energy_conservation_linear_free_vibration(self):
        model = build_membrane(4, 2, 50.0, activation=ActivationKind.ZERO)
        system = assemble(model)
        rng = np.random.default_rng(3)
        u0 = np.zeros(system.n_dofs)
        u0[system.free] = 0.1 * rng.normal(size=len(system.free))
        state = initial_state(system, u0=u0)

        def energy(s):
            return 0.5 * s.v @ (system.mass * s.v) + 0.5 * s.u @ (system.stiffness @ s.u)

        e_ref = energy(state)
        prev = e_ref
        for _ in range(1000):
            state = newmark_step(system, state, 1.0e-4)
            e = energy(state)
            assert abs(e - prev) / e_ref < 1e-6  # per-step drift
            prev = e
        assert abs(energy(state) - e_ref) / e_ref < 0.01  # total drift

    def test_unconditionally_stable_across_dt(self):
        model = build_membrane(3, 2, 50.0, activation=ActivationKind.ZERO)
        system = assemble(model)
        u0 = np.zeros(system.n_dofs)
        u0[system.free] = 0.05
        bound = 10.0 * np.max(np.abs(u0))
        for dt in (1e-3, 1e-2, 1e-1, 1.0):
            state = initial_state(system, u0=u0)
            for _ in range(200):
                state = newmark_step(system, state, dt)
                assert np.max(np.abs(state.u)) < bound

    def test_rejects_bad_dt(self):
        with pytest.raises(StepError):
            newmark_step(sdof_system(), zero_state(sdof_system()), 0.0)

    def test_nonconvergent_feedback_raises(self):
        # feedback stiffer than the structure itself defeats the iteration
        system = sdof_system(k=1.0, m=1.0)
        state = initial_state(system, u0=[1.0])
        runaway = lambda u: -1.0e6 * u
        with pytest.raises(StepError) as err:
            newmark_step(system, state, 1.0, force_feedback=runaway, fp_max_iter=5)
        assert err.value.residual is not None


class TestSimulate:
    def test_zero_inputs_zero_trace(self):
        model = build_membrane(3, 2, 50.0)
        trace = simulate(model, InputSignal.uniform(np.zeros(12), 3), 1e-3, 12)
        assert trace.displacements.shape == (13, 1)
        assert np.all(trace.displacements == 0.0)
        assert trace.times[-1] == pytest.approx(12e-3)

    def test_linear_scaling_with_disabled_neurons(self):
        model = build_membrane(4, 2, 50.0, activation=ActivationKind.ZERO)
        base = InputSignal.uniform(0.5 * np.sin(np.linspace(0.1, 3.0, 20)), 3)
        scaled = InputSignal(3.0 * base.values)
        t1 = simulate(model, base, 1e-3, 20)
        t3 = simulate(model, scaled, 1e-3, 20)
        np.testing.assert_allclose(t3.displacements, 3.0 * t1.displacements, rtol=1e-12, atol=1e-15)

    def test_superposition_fails_with_active_neurons(self):
        model = build_membrane(4, 2, 50.0)
        base = InputSignal.uniform(0.5 * np.sin(np.linspace(0.1, 3.0, 20)), 3)
        scaled = InputSignal(2.0 * base.values)
        t1 = simulate(model, base, 1e-3, 20)
        t2 = simulate(model, scaled, 1e-3, 20)
        deviation = np.max(np.abs(t2.displacements - 2.0 * t1.displacements))
        assert deviation > 1e-6  # documented nonlinearity

    def test_step_input_converges_to_static_solution(self):
        model = build_membrane(3, 2, 50.0)
        n_steps = 800
        amplitude = 0.5
        trace = simulate(
            model,
            InputSignal.uniform(np.full(n_steps, amplitude), 3),
            1e-3,
            n_steps,
            rayleigh_a0=200.0,
        )

        # independent static solver: K u = neuron forces, supports held
        system = assemble(model)
        from neuroskin.fe import _neuro_kernel

        kernel = _neuro_kernel(model)
        fr, co = system.free, system.constrained
        K = system.stiffness
        u = np.zeros(system.n_dofs)
        u[system.input_dofs] = amplitude
        u_c = u[co].copy()
        for _ in range(200):
            f = kernel(u)
            u_next = u.copy()
            u_next[fr] = np.linalg.solve(
                K[np.ix_(fr, fr)], f[fr] - K[np.ix_(fr, co)] @ u_c
            )
            if np.max(np.abs(u_next - u)) < 1e-13:
                u = u_next
                break
            u = u_next

        out_dof = 2 * model.mesh.output_index
        assert trace.output[-1] == pytest.approx(u[out_dof], rel=1e-5)

    def test_bit_identical_repeat_runs(self):
        model = build_membrane(4, 3, 50.0)
        sig = InputSignal.uniform(np.sin(np.linspace(0, 2, 25)), 4)
        t1 = simulate(model, sig, 1e-3, 25, rayleigh_a0=2.0)
        t2 = simulate(model, sig, 1e-3, 25, rayleigh_a0=2.0)
        assert np.array_equal(t1.displacements, t2.displacements)

    def test_channel_count_validated(self):
        model = build_membrane(3, 2, 50.0)
        with pytest.raises(ShapeError):
            simulate(model, InputSignal.uniform(np.zeros(10), 2), 1e-3, 10)

    def test_tracked_nodes_include_output(self):
        model = build_membrane(3, 2, 50.0)
        trace = simulate(model, InputSignal.uniform(np.zeros(5), 3), 1e-3, 5, tracked_nodes=(1, 2))
        assert model.mesh.output_node in trace.tracked_nodes
        assert trace.displacements.shape[1] == 3
