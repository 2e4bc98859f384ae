"""Figures of merit for the charging process: stored energy, ergotropy, efficiency.

Energies are reported in units of the qubit frequency omega0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AmplitudeTrajectory, InitialState

EFFICIENCY_FLOOR = 1e-12
POPULATION_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ObservableTrajectory:
    """Per-time-point observables; ``eta`` is NaN where the efficiency is undefined."""

    t: np.ndarray
    p_charger: np.ndarray
    p_battery: np.ndarray
    dE_A: np.ndarray
    dE_B: np.ndarray
    W: np.ndarray
    eta: np.ndarray


def stored_energy(p_t, p_0):
    """Change of a qubit's internal energy, omega0 * (p_t - p_0), in omega0 units."""
    return np.subtract(p_t, p_0)


def ergotropy_qubit(p_excited):
    """(2p - 1) * Theta(p - 1/2) with Theta(0) = 1/2."""
    p = np.asarray(p_excited, dtype=float)
    out = (2 * p - 1) * np.heaviside(p - 0.5, 0.5) + 0.0  # + 0.0 folds -0.0
    return out if out.ndim else float(out)


def reduced_state(p_excited: float) -> np.ndarray:
    """Diagonal qubit state in the (|e>, |g>) basis."""
    return np.diag([p_excited, 1.0 - p_excited])


def ergotropy_general(populations, energies) -> float:
    """Ergotropy of a state diagonal in the energy eigenbasis.

    The passive state puts the populations, sorted in decreasing order, on the
    levels sorted in increasing energy; the ergotropy is the energy difference.

    >>> ergotropy_general([0.1, 0.3, 0.6], [0.0, 1.0, 2.0])
    1.0
    """
    p = np.asarray(populations, dtype=float)
    e = np.asarray(energies, dtype=float)
    if p.shape != e.shape or p.ndim != 1:
        raise ValueError("populations and energies must be 1-d sequences of equal length")
    if abs(p.sum() - 1.0) > POPULATION_SUM_TOL:
        raise ValueError(f"populations must sum to 1, got {p.sum()!r}")
    if np.any(np.diff(e) <= 0):
        raise ValueError("energies must be strictly ascending")
    passive = np.sort(p)[::-1]
    return float(np.dot(p, e) - np.dot(passive, e))


def efficiency(W: float, dE_B: float) -> float | None:
    """W / dE_B, or None when the battery has not gained energy."""
    if dE_B > EFFICIENCY_FLOOR:
        return W / dE_B
    return None


def observables_from_trajectory(traj: AmplitudeTrajectory, init: InitialState) -> ObservableTrajectory:
    p_a = np.abs(traj.c1) ** 2
    p_b = np.abs(traj.c2) ** 2
    dE_A = stored_energy(p_a, abs(init.c1_0) ** 2)
    dE_B = stored_energy(p_b, abs(init.c2_0) ** 2)
    W = ergotropy_qubit(p_b)
    eta = np.array([math.nan if (x := efficiency(w, e)) is None else x for w, e in zip(W, dE_B)])
    return ObservableTrajectory(t=traj.t, p_charger=p_a, p_battery=p_b, dE_A=dE_A, dE_B=dE_B, W=W, eta=eta)


def late_time_mean(t, values, start: float) -> float:
    """Mean of ``values`` over t >= start, ignoring NaNs; NaN if nothing defined."""
    sel = np.asarray(values)[np.asarray(t) >= start]
    sel = sel[~np.isnan(sel)]
    return float(sel.mean()) if sel.size else math.nan
