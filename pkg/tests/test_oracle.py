import math

import numpy as np
import pytest

from qbattery.closed_form import amplitudes
from qbattery.core import InitialState, KernelSpec, SystemParams, TimeGrid, kernel_from_params
from qbattery.oracle import (
    ConservationError,
    StepSizeError,
    bath_for_horizon,
    exponential_kernel_amplitude,
    kernel_time_domain,
    lorentzian,
    make_discrete_bath,
    solve_discrete_modes,
    solve_volterra,
)

OPTICAL = 1.5e9
START = InitialState(1, 0)


class TestKernelTimeDomain:
    def test_value_at_unit_delay(self):
        k = KernelSpec(g0=0.025, a=0.5 + 1.5j, b=1 - 0.3j)
        cosh = complex(math.cosh(0.5) * math.cos(1.5), math.sinh(0.5) * math.sin(1.5))
        decay = math.exp(-1) * complex(math.cos(0.3), math.sin(0.3))
        assert abs(kernel_time_domain(k, 1.0) - 0.025 * cosh * decay) < 1e-15

    def test_origin_equals_strength(self):
        k = kernel_from_params(SystemParams(omega0=OPTICAL, gamma=20, d_coupling=0.3, beta=5e-10))
        assert kernel_time_domain(k, 0.0) == 5.0

    def test_negative_delay_rejected(self):
        k = KernelSpec(g0=1.0, a=0, b=1)
        with pytest.raises(ValueError):
            kernel_time_domain(k, [0.0, -0.1])

    def test_array_input(self):
        k = KernelSpec(g0=1.0, a=0, b=1)
        np.testing.assert_allclose(kernel_time_domain(k, [0, 1, 2]), np.exp(-np.arange(3)), rtol=1e-15)


class TestVolterra:
    def test_no_reservoir_no_exchange(self):
        traj = solve_volterra(SystemParams(omega0=OPTICAL, gamma=1e-12, d_coupling=0.0), START, TimeGrid(5.0, 100))
        np.testing.assert_allclose(traj.c1, 1.0, atol=1e-11)
        np.testing.assert_allclose(traj.c2, 0.0, atol=1e-15)

    @pytest.mark.parametrize("gamma, tol", [(0.1, 1e-5), (1.0, 1e-5), (20.0, 5e-5)])
    def test_exponential_kernel_solution(self, gamma, tol):
        grid = TimeGrid(10.0, 2000)
        traj = solve_volterra(SystemParams(omega0=OPTICAL, gamma=gamma, d_coupling=0.0), START, grid)
        assert np.max(np.abs(np.abs(traj.c1) - np.abs(exponential_kernel_amplitude(gamma, grid.times)))) <= tol

    def test_second_order_convergence(self):
        p = SystemParams(omega0=OPTICAL, gamma=20.0, d_coupling=0.0)
        errors = []
        for n in (500, 1000, 2000):
            grid = TimeGrid(10.0, n)
            traj = solve_volterra(p, START, grid)
            errors.append(np.max(np.abs(traj.c1 - exponential_kernel_amplitude(20.0, grid.times))))
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.5 < coarse / fine < 4.5

    @pytest.mark.parametrize("h", [0.5, 0.1])
    def test_coarse_step_rejected(self, h):
        p = SystemParams(omega0=OPTICAL, gamma=20.0, d_coupling=0.3)
        with pytest.raises(StepSizeError, match="h vs h/2"):
            solve_volterra(p, START, TimeGrid(10.0, round(10 / h)))

    def test_step_check_can_be_skipped(self):
        p = SystemParams(omega0=OPTICAL, gamma=20.0, d_coupling=0.3)
        solve_volterra(p, START, TimeGrid(10.0, 20), check_step=False)

    def test_matches_closed_form_for_moving_qubits(self):
        p = SystemParams(omega0=OPTICAL, gamma=0.1, d_coupling=0.3, beta=7e-10)
        grid = TimeGrid(30.0, 6000)
        v = solve_volterra(p, START, grid)
        c = amplitudes(p, START, grid)
        assert np.max(np.abs(v.c1 - c.c1)) < 1e-5
        assert np.max(np.abs(v.c2 - c.c2)) < 1e-5


class TestDiscreteBath:
    p = SystemParams(omega0=50.0, gamma=0.1, d_coupling=0.3, beta=0.02)

    def test_coverage_of_sampled_window(self):
        bath = make_discrete_bath(self.p, n_modes=800, half_width=50)
        assert bath.coverage == pytest.approx(2 * math.atan(50) / math.pi, abs=1e-6)

    def test_modes_centred_on_cavity_resonance(self):
        p = self.p.replace(delta=0.4)
        bath = make_discrete_bath(p, n_modes=10, half_width=5)
        np.testing.assert_allclose(bath.omegas, 49.6 - 5 + np.arange(10) + 0.5)
        np.testing.assert_allclose(bath.couplings**2, lorentzian(p, bath.omegas) * 1.0)

    def test_lorentzian_peak(self):
        assert lorentzian(self.p, 50.0) == pytest.approx(0.1 / (2 * math.pi))

    def test_horizon_bath_pushes_echo_out(self):
        bath = bath_for_horizon(self.p, 30.0)
        period = 2 * math.pi / bath.spacing
        assert period >= 2 * (30 + 20) - 1e-9
        assert bath.gamma_cavity == pytest.approx(period / 4)

    def test_invalid_bath(self):
        from qbattery.core import ParameterError

        with pytest.raises(ParameterError):
            make_discrete_bath(self.p, n_modes=0)

    def test_sampled_kernel_is_stationary_and_matches_continuum(self):
        bath = bath_for_horizon(self.p, 10.0)
        k = kernel_from_params(self.p)

        def shape(t):
            return np.sin(bath.omegas * (self.p.beta * t - bath.gamma_cavity))

        for tau in (0.5, 1.5, 3.0):
            values = []
            for t in (4.0, 6.5, 9.0):
                phase = np.exp(1j * (self.p.omega0 - bath.omegas) * tau)
                values.append(np.sum(bath.couplings**2 * shape(t) * shape(t - tau) * phase))
            assert max(abs(v - values[0]) for v in values) < 1e-4 * k.g0
            assert abs(values[0] - kernel_time_domain(k, tau)) < 1e-3 * k.g0


class TestDiscreteModes:
    def test_uncoupled_reservoir_gives_rabi_exchange(self):
        p = SystemParams(omega0=50.0, gamma=1e-14, d_coupling=0.3)
        grid = TimeGrid(10.0, 200)
        traj = solve_discrete_modes(p, make_discrete_bath(p, n_modes=50), START, grid)
        np.testing.assert_allclose(np.abs(traj.c2) ** 2, np.sin(0.3 * grid.times) ** 2, atol=1e-9)

    def test_excitation_conserved_and_matches_closed_form(self):
        p = SystemParams(omega0=50.0, gamma=0.1, d_coupling=0.3)
        grid = TimeGrid(10.0, 1000)
        traj = solve_discrete_modes(p, bath_for_horizon(p, 10.0), START, grid)
        assert np.max(np.abs(traj.total_excitation - 1)) <= 1e-6
        exact = amplitudes(p, START, grid)
        assert np.max(np.abs(traj.c1 - exact.c1)) < 1e-5
        assert np.max(np.abs(traj.c2 - exact.c2)) < 1e-5

    def test_coarse_integration_detected(self):
        p = SystemParams(omega0=50.0, gamma=0.1, d_coupling=0.3)
        with pytest.raises(ConservationError, match="drifted"):
            solve_discrete_modes(p, bath_for_horizon(p, 10.0), START, TimeGrid(10.0, 10), max_step=1.0)


def test_critically_damped_exponential_kernel():
    t = np.linspace(0, 10, 11)
    np.testing.assert_allclose(exponential_kernel_amplitude(1.0, t), np.exp(-t / 2) * (1 + t / 2))
    near = exponential_kernel_amplitude(1.0 - 1e-10, t)
    np.testing.assert_allclose(near, np.exp(-t / 2) * (1 + t / 2), atol=1e-8)
