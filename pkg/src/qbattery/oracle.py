"""Brute-force reference solvers for the charger/battery amplitudes.

Two routes that share nothing with the Laplace-domain solution:

* ``solve_volterra`` integrates the integro-differential amplitude equations
  directly in the time domain with the stationary continuum kernel.
* ``solve_discrete_modes`` integrates the full Schroedinger equation of the
  two qubits and a finite set of reservoir modes, with the sinusoidal
  shape functions of the moving qubits, before any continuum limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AmplitudeTrajectory,
    InitialState,
    KernelSpec,
    ParameterError,
    SolverError,
    SystemParams,
    TimeGrid,
    kernel_from_params,
    validate_params,
)

MAX_VOLTERRA_STEP_ERROR = 1e-4
MAX_NORM_DRIFT = 1e-4


class StepSizeError(SolverError):
    pass


class ConservationError(SolverError):
    pass


def kernel_time_domain(k: KernelSpec, tau):
    """F(tau) = g0 cosh(a tau) exp(-b tau) for tau >= 0."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("kernel is only defined for tau >= 0")
    out = k.g0 * np.cosh(k.a * tau) * np.exp(-k.b * tau)
    return out if out.ndim else complex(out)


def _volterra_march(kernel: np.ndarray, d: float, y0: np.ndarray, h: float, n: int) -> np.ndarray:
    """Product-trapezoidal march with an Euler predictor and one trapezoidal corrector.

    ``kernel[m]`` holds F(m h). Solves y' = -iD * swap(y) - int_0^t F(t - s) y(s) ds
    for the pair y = (c1, c2).
    """
    y = np.zeros((n + 1, 2), dtype=complex)
    y[0] = y0
    k0 = kernel[0]

    def rate(yn, memory):
        return -1j * d * yn[::-1] - memory

    memory = np.zeros(2, dtype=complex)
    g_prev = rate(y[0], memory)
    for m in range(1, n + 1):
        # trapezoid weights: 1/2 at both ends, 1 in between
        hist = 0.5 * kernel[m] * y[0]
        if m > 1:
            hist = hist + kernel[m - 1 : 0 : -1] @ y[1:m]
        y_pred = y[m - 1] + h * g_prev
        g_pred = rate(y_pred, h * (hist + 0.5 * k0 * y_pred))
        y[m] = y[m - 1] + 0.5 * h * (g_prev + g_pred)
        g_prev = rate(y[m], h * (hist + 0.5 * k0 * y[m]))
    return y


def solve_volterra(
    p: SystemParams, init: InitialState, grid: TimeGrid, check_step: bool = True
) -> AmplitudeTrajectory:
    """Second-order product-trapezoidal solution of the amplitude equations.

    Before the full march, the first 10 steps are repeated at half the step
    size; a discrepancy above 1e-4 raises StepSizeError.
    """
    validate_params(p)
    k = kernel_from_params(p)
    h = grid.step
    n = grid.n_steps
    y0 = np.array([init.c1_0, init.c2_0], dtype=complex)
    if check_step:
        probe = min(10, n)
        coarse = _volterra_march(kernel_time_domain(k, h * np.arange(probe + 1)), p.d_coupling, y0, h, probe)
        fine = _volterra_march(
            kernel_time_domain(k, 0.5 * h * np.arange(2 * probe + 1)), p.d_coupling, y0, 0.5 * h, 2 * probe
        )
        err = float(np.max(np.abs(coarse[-1] - fine[-1])))
        if not err <= MAX_VOLTERRA_STEP_ERROR:
            raise StepSizeError(
                f"step h={h:.3g} rejected: h vs h/2 discrepancy {err:.3e} after {probe} steps exceeds "
                f"{MAX_VOLTERRA_STEP_ERROR:g}"
            )
    y = _volterra_march(kernel_time_domain(k, grid.times), p.d_coupling, y0, h, n)
    return AmplitudeTrajectory(t=grid.times, c1=y[:, 0], c2=y[:, 1])


@dataclass(frozen=True)
class DiscreteBath:
    """Uniformly sampled Lorentzian reservoir, identical for both qubits.

    ``couplings[k]**2 = J(omegas[k]) * spacing`` (midpoint rule on the window).
    """

    omegas: np.ndarray
    couplings: np.ndarray
    spacing: float
    gamma_cavity: float
    gamma: float

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    @property
    def coverage(self) -> float:
        """Fraction of the analytic spectral weight gamma/2 held by the sampled modes."""
        return float(np.sum(self.couplings**2) / (0.5 * self.gamma))


@dataclass(frozen=True)
class DiscreteModeTrajectory(AmplitudeTrajectory):
    """Qubit amplitudes plus the total excitation |c1|^2 + |c2|^2 + sum |d_k|^2 + sum |d'_k|^2."""

    total_excitation: np.ndarray | None = None


def lorentzian(p: SystemParams, omega):
    """J(omega) in units of lambda, centred on omega0 - delta."""
    x = p.omega0 - np.asarray(omega, dtype=float) - p.delta
    return p.gamma / (2 * math.pi) / (x * x + 1.0)


def make_discrete_bath(
    p: SystemParams, n_modes: int = 800, gamma_cavity: float = 40.0, half_width: float = 50.0
) -> DiscreteBath:
    if n_modes < 1:
        raise ParameterError(f"n_modes must be positive, got {n_modes!r}")
    if half_width <= 0 or gamma_cavity < 0:
        raise ParameterError("half_width must be > 0 and gamma_cavity >= 0")
    centre = p.omega0 - p.delta
    spacing = 2 * half_width / n_modes
    omegas = centre - half_width + spacing * (np.arange(n_modes) + 0.5)
    couplings = np.sqrt(lorentzian(p, omegas) * spacing)
    return DiscreteBath(omegas=omegas, couplings=couplings, spacing=spacing, gamma_cavity=gamma_cavity, gamma=p.gamma)


def bath_for_horizon(p: SystemParams, t_max: float, half_width: float = 50.0, margin: float = 20.0) -> DiscreteBath:
    """Discrete bath whose artefacts stay beyond ``t_max + margin``.

    A uniform mode grid of spacing dw revives the kernel after 2 pi / dw, and
    the product of the two shape functions echoes wherever 2 Gamma is close to
    a multiple of that period. Choosing the period >= 2 (t_max + margin) and
    Gamma = period / 4 puts the first echo at period / 2.
    """
    period = 2 * (t_max + margin)
    n_modes = max(800, math.ceil(2 * half_width * period / (2 * math.pi)))
    spacing = 2 * half_width / n_modes
    return make_discrete_bath(p, n_modes, gamma_cavity=math.pi / (2 * spacing), half_width=half_width)


def exponential_kernel_amplitude(gamma: float, t):
    """Exact amplitude for D = 0, beta = 0, delta = 0 and unit initial amplitude.

    With F(tau) = (gamma/4) exp(-tau) the amplitude is
    exp(-t/2) [cosh(d t/2) + sinh(d t/2) / d] with d = sqrt(1 - gamma).
    """
    t = np.asarray(t, dtype=float)
    d = np.sqrt(complex(1.0 - gamma))
    if abs(d) < 1e-12:
        return np.exp(-t / 2) * (1 + t / 2) + 0j
    return np.exp(-t / 2) * (np.cosh(d * t / 2) + np.sinh(d * t / 2) / d)


def solve_discrete_modes(
    p: SystemParams,
    bath: DiscreteBath,
    init: InitialState,
    grid: TimeGrid,
    max_step: float = 0.0025,
) -> AmplitudeTrajectory:
    """Fixed-step RK4 on the qubit + reservoir-mode amplitudes (interaction picture).

    State layout: [c1, c2, d_1..d_n (reservoir A), d'_1..d'_n (reservoir B)].
    Each grid interval is split into ceil(h / max_step) RK4 steps.
    """
    validate_params(p)
    n = bath.n_modes
    g = bath.couplings
    detuning = p.omega0 - bath.omegas
    d = p.d_coupling

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        shape = np.sin(bath.omegas * (p.beta * t - bath.gamma_cavity))
        coupling = g * shape * np.exp(1j * detuning * t)
        dy = np.empty_like(y)
        c1, c2 = y[0], y[1]
        dA, dB = y[2 : 2 + n], y[2 + n :]
        dy[0] = -1j * (d * c2 + coupling @ dA)
        dy[1] = -1j * (d * c1 + coupling @ dB)
        dy[2 : 2 + n] = -1j * np.conj(coupling) * c1
        dy[2 + n :] = -1j * np.conj(coupling) * c2
        return dy

    y = np.zeros(2 + 2 * n, dtype=complex)
    y[0], y[1] = init.c1_0, init.c2_0
    times = grid.times
    sub = max(1, math.ceil(grid.step / max_step - 1e-9))
    h = grid.step / sub
    c1 = np.empty(len(times), dtype=complex)
    c2 = np.empty(len(times), dtype=complex)
    total = np.empty(len(times))
    c1[0], c2[0] = y[0], y[1]
    total[0] = float(np.vdot(y, y).real)
    for i in range(1, len(times)):
        for j in range(sub):
            t = times[i - 1] + j * h
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        total[i] = float(np.vdot(y, y).real)
        drift = abs(total[i] - 1.0)
        if drift > MAX_NORM_DRIFT:
            raise ConservationError(
                f"excitation number drifted by {drift:.3e} at lambda*t={times[i]:.6g} (limit {MAX_NORM_DRIFT:g})"
            )
        c1[i], c2[i] = y[0], y[1]
    return DiscreteModeTrajectory(t=times.copy(), c1=c1, c2=c2, total_excitation=total)
