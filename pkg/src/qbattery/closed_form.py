"""Closed-form amplitudes from the Laplace-domain branch cubics.

Writing u = c1 + c2 and v = c1 - c2 decouples the amplitude equations into
u(s) = u(0) / (s + F(s) + iD) and v(s) = v(0) / (s + F(s) - iD). Clearing the
denominator of F(s) turns each factor into a cubic in s,

    P_sigma(s) = (s + sigma*iD) * ((s + b)^2 - a^2) + g0 * (s + b),

whose three roots give M_sigma(t) = 2 * sum_i w_i exp(q_i t) with residues
w_i = ((q_i + b)^2 - a^2) / prod_{j != i} (q_i - q_j).  Branch -1 (factor
s - iD) carries v, branch +1 carries u.
"""

from __future__ import annotations

import cmath
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    AmplitudeTrajectory,
    InitialState,
    KernelSpec,
    SolutionMode,
    SolverError,
    SystemParams,
    TimeGrid,
    kernel_from_params,
    validate_params,
)

EPS = np.finfo(float).eps
DEGENERACY_GAP = 1e-8
DEGENERACY_NUDGE = 1e-10
NEWTON_TOL = 1e-12


class CubicConvergenceError(SolverError):
    pass


class DegenerateRootsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BranchRoots:
    branch_sign: int
    roots: tuple[complex, complex, complex]
    residues: tuple[complex, complex, complex]
    degenerate: bool = False


def branch_cubic(k: KernelSpec, d_coupling: float, branch_sign: int) -> np.ndarray:
    """Monic coefficients [1, c2, c1, c0] of the branch cubic in s."""
    if branch_sign not in (1, -1):
        raise ValueError(f"branch_sign must be +1 or -1, got {branch_sign!r}")
    e = branch_sign * 1j * d_coupling
    b, a2, g0 = k.b, k.a * k.a, k.g0
    return np.array(
        [
            1.0 + 0j,
            2 * b + e,
            b * b - a2 + 2 * b * e + g0,
            e * (b * b - a2) + g0 * b,
        ],
        dtype=complex,
    )


def shifted_cubic(k: KernelSpec, d_coupling: float, branch_sign: int) -> np.ndarray:
    """Branch cubic in the shifted variable u = s + b.

    (u - b + sigma*iD)(u^2 - a^2) + g0 u, expanded without ever forming b^2,
    which keeps the as-printed kernel (|b| ~ 1e9) in double precision.
    """
    e = branch_sign * 1j * d_coupling - k.b
    a2 = k.a * k.a
    return np.array([1.0 + 0j, e, k.g0 - a2, -e * a2], dtype=complex)


def branch_residual(k: KernelSpec, d_coupling: float, branch_sign: int, s: complex) -> complex:
    """P_sigma(s) evaluated in factored form."""
    u = s + k.b
    return (s + branch_sign * 1j * d_coupling) * (u * u - k.a * k.a) + k.g0 * u


def _horner(coeffs, x):
    p = coeffs[0]
    dp = 0j
    for c in coeffs[1:]:
        dp = dp * x + p
        p = p * x + c
    return p, dp


def _term_scale(coeffs, x) -> float:
    ax = abs(x)
    n = len(coeffs) - 1
    return sum(abs(c) * ax ** (n - i) for i, c in enumerate(coeffs))


def _cardano(c2: complex, c1: complex, c0: complex) -> list[complex]:
    shift = c2 / 3
    p = c1 - c2 * c2 / 3
    q = 2 * c2**3 / 27 - c2 * c1 / 3 + c0
    # p, q at rounding level of their own terms are a triple root
    p_floor = 8 * EPS * (abs(c1) + abs(c2) ** 2 / 3)
    q_floor = 8 * EPS * (2 * abs(c2) ** 3 / 27 + abs(c2 * c1) / 3 + abs(c0))
    if abs(p) <= p_floor:
        p = 0j
    if abs(q) <= q_floor:
        q = 0j
    if p == 0 and q == 0:
        return [-shift] * 3
    disc = cmath.sqrt(q * q / 4 + p**3 / 27)
    w = -q / 2 + disc
    w2 = -q / 2 - disc
    if abs(w2) > abs(w):
        w = w2
    big = w ** (1 / 3)
    if big == 0:
        # q^2/4 + p^3/27 underflowed: q is negligible, t^3 + p t = 0
        r = cmath.sqrt(-p)
        return [-shift, r - shift, -r - shift]
    omega = complex(-0.5, 3**0.5 / 2)
    roots = []
    for k in range(3):
        cbrt = big * omega**k
        roots.append(cbrt - p / (3 * cbrt) - shift)
    return roots


def _sort_key(z: complex):
    return (z.real, z.imag)


def _polish(c, r: complex, polish_steps: int) -> tuple[complex, float]:
    val, _ = _horner(c, r)
    steps = 0
    while steps < polish_steps + 8:
        if steps >= polish_steps and abs(val) <= NEWTON_TOL * max(1.0, _term_scale(c, r)):
            break
        _, dval = _horner(c, r)
        if dval == 0:
            break
        candidate = r - val / dval
        cval, _ = _horner(c, candidate)
        steps += 1
        if abs(cval) > abs(val):
            break
        r, val = candidate, cval
    return complex(r), abs(val) / max(1.0, _term_scale(c, r))


def _deflate(c, big: complex) -> list[complex]:
    # remaining pair from Vieta: product -c0/big, sum from whichever identity
    # carries the smaller rounding error
    prod = -c[3] / big
    sum_a = -(c[1] + big)
    sum_b = (c[2] - prod) / big
    err_a = abs(c[1]) + abs(big)
    err_b = (abs(c[2]) + abs(prod)) / abs(big)
    total = sum_a if err_a <= err_b else sum_b
    disc = cmath.sqrt(total * total - 4 * prod)
    x1 = (total + disc) / 2 if abs(total + disc) >= abs(total - disc) else (total - disc) / 2
    x2 = prod / x1 if x1 != 0 else total - x1
    return [x1, x2]


def solve_cubic(coeffs, polish_steps: int = 2) -> list[complex]:
    """Roots of a monic complex cubic, sorted by (Re, Im).

    Cardano's formula followed by Newton polishing. Convergence is judged on
    the backward error |P(q)| / sum_k |c_k| |q|^k, which equals the usual
    1e-12 * max(1, |q|^3) bound for O(1) coefficients and stays meaningful
    when the coefficients span many orders of magnitude. If Cardano's small
    roots are swamped by cancellation, the largest root is kept and the other
    two are recovered by deflation.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (4,):
        raise ValueError("expected four coefficients [1, c2, c1, c0]")
    if not np.all(np.isfinite(c)):
        raise ValueError(f"non-finite cubic coefficients: {c}")
    if c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    c = [complex(x) for x in c / c[0]]
    roots = _cardano(c[1], c[2], c[3])
    polished = [_polish(c, r, polish_steps) for r in roots]
    if max(e for _, e in polished) > NEWTON_TOL:
        big, _ = _polish(c, max(roots, key=abs), polish_steps)
        if big != 0:
            polished = [(big, 0.0)] + [_polish(c, r, polish_steps) for r in _deflate(c, big)]
            polished[0] = _polish(c, big, polish_steps)
    if max(e for _, e in polished) > NEWTON_TOL:
        raise CubicConvergenceError(
            "cubic root polishing did not converge: "
            + ", ".join(f"q={r:.6g} rel_residual={e:.3e}" for r, e in polished)
        )
    return sorted((r for r, _ in polished), key=_sort_key)


def _degenerate_pair(roots):
    """Closest pair (i, j) whose gap is below DEGENERACY_GAP times the pair's size."""
    worst = None
    for i, j in itertools.combinations(range(3), 2):
        size = max(abs(roots[i]), abs(roots[j]))
        gap = abs(roots[i] - roots[j])
        if size > 0 and gap < DEGENERACY_GAP * size:
            if worst is None or gap / size < worst[2]:
                worst = (i, j, gap / size)
    return worst


def branch_roots(k: KernelSpec, d_coupling: float, branch_sign: int) -> BranchRoots:
    """Roots and residue weights of one branch cubic."""
    coeffs = shifted_cubic(k, d_coupling, branch_sign)
    u = solve_cubic(coeffs)
    degenerate = False
    if all(x == 0 for x in u):
        raise SolverError("triple root at s = -b: residue expansion undefined")
    pair = _degenerate_pair(u)
    if pair is not None:
        degenerate = True
        size = max(abs(u[pair[0]]), abs(u[pair[1]]))
        nudged = coeffs.copy()
        nudged[3] += DEGENERACY_NUDGE * (abs(coeffs[3]) if coeffs[3] != 0 else size**3)
        u = solve_cubic(nudged)
        warnings.warn(
            f"near-degenerate roots on branch {branch_sign:+d}; constant term perturbed by 1e-10",
            DegenerateRootsWarning,
            stacklevel=2,
        )

    a2 = k.a * k.a
    residues = []
    for i in range(3):
        den = 1
        for j in range(3):
            if j != i:
                den *= u[i] - u[j]
        residues.append((u[i] * u[i] - a2) / den)

    # s = u - b cancels badly for the root nearest b when |b| is huge; the
    # root-sum identity recovers it: s_big = -sigma*iD - (sum of the others' u).
    big = max(range(3), key=lambda i: abs(u[i]))
    s = [ui - k.b for ui in u]
    s[big] = -branch_sign * 1j * d_coupling - sum(u[j] for j in range(3) if j != big)

    order = sorted(range(3), key=lambda i: _sort_key(s[i]))
    return BranchRoots(
        branch_sign=branch_sign,
        roots=tuple(s[i] for i in order),
        residues=tuple(residues[i] for i in order),
        degenerate=degenerate,
    )


def m_kernel(roots: BranchRoots, t):
    """M(t) = 2 * sum_i w_i exp(q_i t); accepts scalar or array t."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(roots.roots)
    w = np.asarray(roots.residues)
    out = 2 * np.sum(w[:, None] * np.exp(np.multiply.outer(q, t.ravel())), axis=0)
    return out.reshape(t.shape) if t.ndim else complex(out[0])


def m_kernel_levi_civita(q, a: complex, b: complex, t):
    """M(t) written as the antisymmetric sum over root permutations."""
    q = [complex(x) for x in q]
    t = np.asarray(t, dtype=float)
    vandermonde = (q[0] - q[1]) * (q[0] - q[2]) * (q[1] - q[2])
    total = np.zeros(t.shape, dtype=complex)
    for perm in itertools.permutations(range(3)):
        i, j, k = perm
        sign = _levi_civita(perm)
        total = total + sign * np.exp(q[i] * t) * (q[j] - q[k]) * ((q[i] + b) ** 2 - a * a)
    return total / vandermonde


def _levi_civita(perm) -> int:
    i, j, k = perm
    return (i - j) * (j - k) * (k - i) // 2


def amplitudes(p: SystemParams, init: InitialState, grid: TimeGrid) -> AmplitudeTrajectory:
    """c1(t), c2(t) on ``grid`` by inverse Laplace transform."""
    validate_params(p)
    k = kernel_from_params(p)
    t = grid.times
    flags = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRootsWarning)
        minus = branch_roots(k, p.d_coupling, -1)
        plus = branch_roots(k, p.d_coupling, +1)
    for br in (minus, plus):
        if br.degenerate:
            flags.append(f"degenerate roots on branch {br.branch_sign:+d}; constant term perturbed")
    m_minus = m_kernel(minus, t)
    c10, c20 = init.c1_0, init.c2_0
    if p.solution_mode is SolutionMode.TWO_BRANCH:
        m_plus = m_kernel(plus, t)
        total = m_minus + m_plus
        diff = m_minus - m_plus
        c1 = 0.25 * (c10 * total - c20 * diff)
        c2 = 0.25 * (c20 * total - c10 * diff)
    else:
        c1 = 0.5 * (c10 * m_minus.real - 1j * c20 * m_minus.imag)
        c2 = 0.5 * (c20 * m_minus.real - 1j * c10 * m_minus.imag)
    return AmplitudeTrajectory(t=t, c1=c1, c2=c2, warnings=tuple(flags))
