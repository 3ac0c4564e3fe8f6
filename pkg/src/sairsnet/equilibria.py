"""Disease-free and endemic equilibria.

The endemic equilibrium is found through the asymptomatic fractions alone:
eliminating ``I*`` and ``S*`` from the equilibrium equations leaves the
fixed-point problem ``A* = H(A*)`` with

    h_i(y) = (G y)_i / (1 + xi_i (G y)_i),

where ``G`` is the infection-transfer matrix (equal to ``M1`` when all
``mu_i`` coincide), ``K_i = alpha / (delta_I + mu_i)`` and
``xi_i = (alpha + delta_A + mu_i + gamma + gamma K_i) / (mu_i + gamma)``.
``H`` is monotone and strictly sublinear, so plain iteration from an upper
seed decreases monotonically onto the unique positive fixed point whenever
``r0 > 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConvergenceError, EquilibriumError
from .model import ModelParams, StateVector, _jacobian, reduced_field
from .reproduction import dfe_susceptible, r0 as compute_r0

MAP_TOL = 1e-13
MAP_MAX_ITER = 1_000_000
RESIDUAL_TOL = 1e-10


class EquilibriumKind(str, Enum):
    DFE = "DFE"
    ENDEMIC = "ENDEMIC"


@dataclass(frozen=True, eq=False)
class FixedPointMap:
    params: ModelParams
    K: np.ndarray
    xi: np.ndarray
    matrix: np.ndarray

    @classmethod
    def from_params(cls, params: ModelParams) -> "FixedPointMap":
        p = params
        K = p.alpha / (p.delta_I + p.mu)
        out_a = p.alpha + p.delta_A + p.mu
        xi = (out_a + p.gamma + p.gamma * K) / (p.mu + p.gamma)
        s0 = dfe_susceptible(p)
        matrix = (p.beta_A + p.beta_I * K[None, :]) * (s0 / out_a)[:, None]
        return cls(p, K, xi, matrix)

    def upper_seed(self) -> np.ndarray:
        """Componentwise ``min(1/xi_i, (delta_I + mu_i)/alpha)``, an upper
        bound for every fixed point."""
        bound = 1.0 / self.xi
        if self.params.alpha > 0:
            bound = np.minimum(bound, (self.params.delta_I + self.params.mu) / self.params.alpha)
        return bound


def endemic_map(fmap: FixedPointMap, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    gy = fmap.matrix @ y
    return gy / (1.0 + fmap.xi * gy)


def iterate_endemic_map(fmap, y0, tol=MAP_TOL, max_iter=MAP_MAX_ITER, record=False):
    """Iterate ``y <- H(y)`` until successive iterates differ by less than
    ``tol`` in max norm.

    Returns ``(y, iterations, converged)``, plus the list of iterates when
    ``record`` is set.
    """
    y = np.array(y0, dtype=float)
    history = [y.copy()] if record else None
    for it in range(1, max_iter + 1):
        y_new = endemic_map(fmap, y)
        if record:
            history.append(y_new.copy())
        if np.abs(y_new - y).max() < tol:
            y = y_new
            return (y, it, True, history) if record else (y, it, True)
        y = y_new
    return (y, max_iter, False, history) if record else (y, max_iter, False)


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    kind: EquilibriumKind
    state: StateVector
    residual: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        st = self.state
        return {
            "kind": self.kind.value,
            "S": st.S.tolist(),
            "A": st.A.tolist(),
            "I": st.I.tolist(),
            "R": st.R.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def equilibrium_residual(params: ModelParams, state: StateVector) -> float:
    """Max-norm of the reduced vector field at ``state``."""
    reduced = state.to_reduced()
    return float(np.abs(reduced_field(params)(0.0, reduced.values)).max())


def dfe(params: ModelParams) -> EquilibriumReport:
    s0 = dfe_susceptible(params)
    zero = np.zeros(params.n)
    state = StateVector.from_compartments(s0, zero, zero, 1.0 - s0)
    return EquilibriumReport(
        EquilibriumKind.DFE, state, equilibrium_residual(params, state), 0, True
    )


def back_substitute(params: ModelParams, A) -> StateVector:
    """Full equilibrium state from the asymptomatic fractions ``A``."""
    A = np.asarray(A, dtype=float)
    p = params
    K = p.alpha / (p.delta_I + p.mu)
    I = K * A  # noqa: E741
    pressure = (p.beta_A + p.beta_I * K[None, :]) @ A
    S = (p.alpha + p.delta_A + p.mu) * A / pressure
    R = 1.0 - S - A - I
    return StateVector.from_compartments(S, A, I, R)


def _newton_polish(params: ModelParams, x: np.ndarray, steps: int = 8) -> np.ndarray:
    f = reduced_field(params)
    n = params.n
    best, best_res = x, np.abs(f(0.0, x)).max()
    for _ in range(steps):
        g = x.reshape(n, 3)
        J = _jacobian(params, g[:, 0], g[:, 1], g[:, 2])
        try:
            x = x - np.linalg.solve(J, f(0.0, x))
        except np.linalg.LinAlgError:
            break
        res = np.abs(f(0.0, x)).max()
        if res < best_res:
            best, best_res = x, res
        if res < 1e-15:
            break
    return best


def solve_endemic(params: ModelParams) -> EquilibriumReport:
    """Unique endemic equilibrium, which exists iff ``r0 > 1``.

    Raises
    ------
    EquilibriumError
        When ``r0 <= 1``.
    ConvergenceError
        When the residual stays above ``1e-10``.
    """
    r = compute_r0(params)
    if r <= 1.0:
        raise EquilibriumError(f"no endemic equilibrium: r0 = {r:.6g} <= 1", r0=r)
    if r < 1.0 + 1e-6:
        warnings.warn(
            f"r0 = {r:.9g} is barely above 1; convergence is slow and the "
            "endemic equilibrium is close to the disease-free one",
            RuntimeWarning,
            stacklevel=2,
        )
    fmap = FixedPointMap.from_params(params)
    A, iterations, _ = iterate_endemic_map(fmap, fmap.upper_seed())
    state = back_substitute(params, A)
    residual = equilibrium_residual(params, state)
    if residual > 1e-12:
        x = _newton_polish(params, state.to_reduced().values)
        polished = StateVector("REDUCED_3N", x).to_full()
        polished_res = equilibrium_residual(params, polished)
        if polished_res < residual and np.all(polished.A > 0):
            state, residual = polished, polished_res
    converged = residual <= RESIDUAL_TOL
    if not converged:
        raise ConvergenceError(
            f"endemic equilibrium residual {residual:.3e} above {RESIDUAL_TOL}",
            iterations=iterations,
        )
    return EquilibriumReport(EquilibriumKind.ENDEMIC, state, residual, iterations, converged)
