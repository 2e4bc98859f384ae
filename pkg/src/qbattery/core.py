"""Domain types, parameter validation and the reduced memory kernel.

All rates are measured in units of the reservoir spectral width lambda, so
lambda = 1 internally and times are dimensionless (lambda * t).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set or configuration is invalid."""


class SolverError(RuntimeError):
    """Base class for numerical failures inside a solver."""


class KernelMode(str, enum.Enum):
    CONSISTENT = "consistent"
    AS_PRINTED = "as_printed"


class SolutionMode(str, enum.Enum):
    TWO_BRANCH = "two_branch"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the charger/battery pair, in units of lambda."""

    omega0: float
    gamma: float
    d_coupling: float
    delta: float = 0.0
    beta: float = 0.0
    kernel_mode: KernelMode = KernelMode.CONSISTENT
    solution_mode: SolutionMode = SolutionMode.TWO_BRANCH

    def replace(self, **changes: Any) -> "SystemParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class KernelSpec:
    """Reduced kernel F(tau) = g0 * cosh(a tau) * exp(-b tau).

    Both the closed-form solver and the Volterra oracle consume this triple.
    """

    g0: float
    a: complex
    b: complex
    mode: KernelMode = KernelMode.CONSISTENT

    def __post_init__(self) -> None:
        if not self.b.real > 0:
            raise ParameterError(f"kernel decay rate must have Re(b) > 0, got b={self.b!r}")

    def laplace(self, s):
        """F(s) = g0 (s + b) / ((s + b)^2 - a^2)."""
        u = np.asarray(s) + self.b
        return self.g0 * u / (u * u - self.a * self.a)


@dataclass(frozen=True)
class InitialState:
    """Amplitudes of |e_A, g_B> (charger excited) and |g_A, e_B> (battery excited)."""

    c1_0: complex
    c2_0: complex

    def __post_init__(self) -> None:
        norm = abs(self.c1_0) ** 2 + abs(self.c2_0) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ParameterError(f"initial state must be normalized, |c1|^2+|c2|^2 = {norm!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0, h, 2h, ..., t_max with h = t_max / n_steps."""

    t_max: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (isinstance(self.t_max, (int, float)) and math.isfinite(self.t_max) and self.t_max > 0):
            raise ParameterError(f"invalid grid: t_max must be positive and finite, got {self.t_max!r}")
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 2:
            raise ParameterError(f"invalid grid: n_steps must be an integer >= 2, got {self.n_steps!r}")

    @property
    def step(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Charger (c1) and battery (c2) amplitudes sampled on a time grid."""

    t: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.c1) ** 2 + np.abs(self.c2) ** 2


def validate_params(raw: SystemParams) -> SystemParams:
    """Return ``raw`` unchanged if every field is admissible.

    Raises ParameterError naming each offending field otherwise.
    """
    problems = []
    for name in ("omega0", "gamma", "d_coupling", "delta", "beta"):
        value = getattr(raw, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            problems.append(f"{name}: must be a finite real number, got {value!r}")
    if not problems:
        if raw.gamma <= 0:
            problems.append(f"gamma: coupling strength must be > 0, got {raw.gamma!r}")
        if raw.omega0 <= 0:
            problems.append(f"omega0: transition frequency must be > 0, got {raw.omega0!r}")
        if not 0 <= raw.beta < 1:
            problems.append(f"beta: velocity must be subluminal, 0 <= beta < 1, got {raw.beta!r}")
        if raw.d_coupling < 0:
            problems.append(f"d_coupling: dipole coupling must be >= 0, got {raw.d_coupling!r}")
    if not isinstance(raw.kernel_mode, KernelMode):
        problems.append(f"kernel_mode: expected KernelMode, got {raw.kernel_mode!r}")
    if not isinstance(raw.solution_mode, SolutionMode):
        problems.append(f"solution_mode: expected SolutionMode, got {raw.solution_mode!r}")
    if problems:
        raise ParameterError("; ".join(problems))
    return raw


def kernel_from_params(p: SystemParams) -> KernelSpec:
    """Build the (g0, a, b) kernel triple for the moving-qubit reservoir.

    ``a = beta * (1 + i(omega0 - delta))`` in both modes. The decay rate is
    ``b = 1 - i delta`` for the consistent convention and
    ``b = 1 + i(omega0 - delta)`` for the as-printed frequency-domain form.
    """
    validate_params(p)
    lam_bar = complex(1.0, p.omega0 - p.delta)
    a = p.beta * lam_bar
    if p.kernel_mode is KernelMode.CONSISTENT:
        b = complex(1.0, -p.delta)
    else:
        b = lam_bar
    return KernelSpec(g0=p.gamma / 4.0, a=a, b=b, mode=p.kernel_mode)


def normalize_initial(c1_0: complex, c2_0: complex) -> InitialState:
    norm = math.hypot(abs(c1_0), abs(c2_0))
    if norm == 0 or not math.isfinite(norm):
        raise ParameterError("initial amplitudes must not both vanish")
    return InitialState(complex(c1_0) / norm, complex(c2_0) / norm)


CONFIG_KEYS = (
    "omega0_over_lambda",
    "gamma_over_lambda",
    "D_over_lambda",
    "Delta_over_lambda",
    "beta",
    "kernel_mode",
    "solution_mode",
    "c1_0",
    "c2_0",
    "t_max_lambda",
    "n_steps",
)

# config key -> SystemParams field, for the scalar physical parameters
PARAM_KEYS = {
    "omega0_over_lambda": "omega0",
    "gamma_over_lambda": "gamma",
    "D_over_lambda": "d_coupling",
    "Delta_over_lambda": "delta",
    "beta": "beta",
}


def _real(cfg: Mapping[str, Any], key: str) -> float:
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(f"{key}: expected a number, got {value!r}")
    return float(value)


def _amplitude(cfg: Mapping[str, Any], key: str) -> complex:
    value = cfg[key]
    if not isinstance(value, Mapping) or set(value) != {"re", "im"}:
        raise ParameterError(f"{key}: expected an object with keys 're' and 'im', got {value!r}")
    parts = []
    for part in ("re", "im"):
        x = value[part]
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ParameterError(f"{key}.{part}: expected a number, got {x!r}")
        parts.append(float(x))
    return complex(*parts)


def config_from_dict(cfg: Mapping[str, Any]) -> tuple[SystemParams, InitialState, TimeGrid]:
    """Parse a configuration document into validated domain objects."""
    if not isinstance(cfg, Mapping):
        raise ParameterError("configuration must be a JSON object")
    missing = [k for k in CONFIG_KEYS if k not in cfg]
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if missing or unknown:
        parts = []
        if missing:
            parts.append("missing keys: " + ", ".join(missing))
        if unknown:
            parts.append("unknown keys: " + ", ".join(unknown))
        raise ParameterError("; ".join(parts))
    try:
        kernel_mode = KernelMode(cfg["kernel_mode"])
    except ValueError:
        raise ParameterError(f"kernel_mode: expected 'consistent' or 'as_printed', got {cfg['kernel_mode']!r}") from None
    try:
        solution_mode = SolutionMode(cfg["solution_mode"])
    except ValueError:
        raise ParameterError(
            f"solution_mode: expected 'two_branch' or 'paper_literal', got {cfg['solution_mode']!r}"
        ) from None
    params = validate_params(
        SystemParams(
            **{field_name: _real(cfg, key) for key, field_name in PARAM_KEYS.items()},
            kernel_mode=kernel_mode,
            solution_mode=solution_mode,
        )
    )
    init = normalize_initial(_amplitude(cfg, "c1_0"), _amplitude(cfg, "c2_0"))
    n_steps = cfg["n_steps"]
    if isinstance(n_steps, float) and n_steps.is_integer():
        n_steps = int(n_steps)
    grid = TimeGrid(_real(cfg, "t_max_lambda"), n_steps)
    return params, init, grid


def config_to_dict(params: SystemParams, init: InitialState, grid: TimeGrid) -> dict[str, Any]:
    cfg: dict[str, Any] = {key: getattr(params, name) for key, name in PARAM_KEYS.items()}
    cfg["kernel_mode"] = params.kernel_mode.value
    cfg["solution_mode"] = params.solution_mode.value
    cfg["c1_0"] = {"re": init.c1_0.real, "im": init.c1_0.imag}
    cfg["c2_0"] = {"re": init.c2_0.real, "im": init.c2_0.imag}
    cfg["t_max_lambda"] = grid.t_max
    cfg["n_steps"] = grid.n_steps
    return cfg
