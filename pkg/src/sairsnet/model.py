"""Multi-group SAIRS model with vaccination.

Each community ``i`` has susceptible ``S_i``, asymptomatic infected ``A_i``,
symptomatic infected ``I_i`` and recovered ``R_i`` fractions. Community ``i``
is infected by community ``j`` at rate ``beta_A[i, j]`` (through asymptomatic
carriers) and ``beta_I[i, j]`` (through symptomatic ones).

States are flat vectors grouped per community: ``(S_1, A_1, I_1, ...)`` for
the reduced system and ``(S_1, A_1, I_1, R_1, ...)`` for the full one.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, IrreducibilityError, ParameterError, StateError
from .numerics import Trajectory
from .topology import is_strongly_connected

__all__ = [
    "Layout",
    "ModelParams",
    "StateVector",
    "Trajectory",
    "ValidationReport",
    "STATE_TOL",
    "rhs_reduced",
    "rhs_full",
    "jacobian_reduced",
    "validate_state",
    "clamp_reduced",
    "reduced_field",
]

STATE_TOL = 1e-9


def _rate_vector(value, n, name) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise DimensionError(f"{name} must have length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """All rates of the model.

    ``mu`` and ``nu`` may be given as scalars and are broadcast to one value
    per community. Construction enforces the standing assumptions: both
    transmission matrices are nonnegative with a positive diagonal and have
    strongly connected nonzero patterns.
    """

    beta_A: np.ndarray
    beta_I: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    alpha: float
    gamma: float
    delta_A: float
    delta_I: float

    def __post_init__(self):
        ba = np.array(self.beta_A, dtype=float, ndmin=2)
        bi = np.array(self.beta_I, dtype=float, ndmin=2)
        if ba.ndim != 2 or ba.shape[0] != ba.shape[1]:
            raise DimensionError(f"beta_A must be square, got {ba.shape}")
        if bi.shape != ba.shape:
            raise DimensionError(f"beta_I shape {bi.shape} != beta_A shape {ba.shape}")
        n = ba.shape[0]
        if n < 1:
            raise DimensionError("need at least one group")
        mu = _rate_vector(self.mu, n, "mu")
        nu = _rate_vector(self.nu, n, "nu")
        for name, arr in (("beta_A", ba), ("beta_I", bi), ("mu", mu), ("nu", nu)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} has non-finite entries", field=name)
            if np.any(arr < 0):
                raise ParameterError(f"{name} must be nonnegative", field=name)
        if np.any(mu <= 0):
            raise ParameterError("mu must be strictly positive", field="mu")
        for name in ("alpha", "gamma", "delta_A", "delta_I"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be a nonnegative number", field=name)
            object.__setattr__(self, name, v)
        for name, arr in (("beta_A", ba), ("beta_I", bi)):
            if np.any(np.diag(arr) <= 0):
                raise ParameterError(f"{name} needs a positive diagonal", field=name)
            if not is_strongly_connected(arr):
                raise IrreducibilityError(f"{name} is reducible", field=name)
        for name, arr in (("beta_A", ba), ("beta_I", bi), ("mu", mu), ("nu", nu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.beta_A.shape[0]

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def scaled(self, factor: float) -> "ModelParams":
        """Copy with both transmission matrices multiplied by ``factor``."""
        return self.replace(beta_A=self.beta_A * factor, beta_I=self.beta_I * factor)

    def to_dict(self) -> dict:
        return {
            "beta_A": self.beta_A.tolist(),
            "beta_I": self.beta_I.tolist(),
            "mu": self.mu.tolist(),
            "nu": self.nu.tolist(),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "delta_A": self.delta_A,
            "delta_I": self.delta_I,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        return cls(**{f.name: doc[f.name] for f in dataclasses.fields(cls)})


class Layout(str, Enum):
    FULL_4N = "FULL_4N"
    REDUCED_3N = "REDUCED_3N"

    @property
    def width(self) -> int:
        return 4 if self is Layout.FULL_4N else 3


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: Layout
    values: np.ndarray

    def __post_init__(self):
        layout = Layout(self.layout)
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size == 0 or vals.size % layout.width:
            raise DimensionError(
                f"{layout.value} state length must be a positive multiple of {layout.width}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_compartments(cls, S, A, I, R=None) -> "StateVector":  # noqa: E741
        cols = [np.atleast_1d(np.asarray(c, dtype=float)) for c in (S, A, I)]
        if R is not None:
            cols.append(np.atleast_1d(np.asarray(R, dtype=float)))
        if len({c.shape for c in cols}) != 1:
            raise DimensionError("compartment vectors must have equal length")
        layout = Layout.FULL_4N if R is not None else Layout.REDUCED_3N
        return cls(layout, np.column_stack(cols).ravel())

    @property
    def n(self) -> int:
        return self.values.size // self.layout.width

    @property
    def groups(self) -> np.ndarray:
        return self.values.reshape(self.n, self.layout.width)

    @property
    def S(self) -> np.ndarray:
        return self.groups[:, 0]

    @property
    def A(self) -> np.ndarray:
        return self.groups[:, 1]

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return self.groups[:, 2]

    @property
    def R(self) -> np.ndarray:
        g = self.groups
        return g[:, 3] if self.layout is Layout.FULL_4N else 1.0 - g.sum(axis=1)

    def to_full(self) -> "StateVector":
        if self.layout is Layout.FULL_4N:
            return self
        return StateVector.from_compartments(self.S, self.A, self.I, self.R)

    def to_reduced(self) -> "StateVector":
        if self.layout is Layout.REDUCED_3N:
            return self
        return StateVector.from_compartments(self.S, self.A, self.I)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    negative: tuple[float, ...]
    excess: tuple[float, ...]
    messages: tuple[str, ...]


def validate_state(state: StateVector, tol: float = STATE_TOL) -> ValidationReport:
    """Check a state against the feasible region.

    Reports, per group, the magnitude of the most negative entry and the
    violation of the group constraint (sum exceeding 1 for the reduced
    layout, deviation from 1 for the full one). Passes iff every violation is
    at most ``tol``.
    """
    g = state.groups
    negative = np.maximum(-g.min(axis=1), 0.0)
    sums = g.sum(axis=1)
    if state.layout is Layout.FULL_4N:
        excess = np.abs(sums - 1.0)
    else:
        excess = np.maximum(sums - 1.0, 0.0)
    messages = []
    for i, (neg, exc) in enumerate(zip(negative, excess), start=1):
        if neg > tol:
            messages.append(f"group {i}: negative entry of magnitude {neg:.3g}")
        if exc > tol:
            kind = "sum deviates from 1" if state.layout is Layout.FULL_4N else "sum exceeds 1"
            messages.append(f"group {i}: {kind} by {exc:.3g}")
    return ValidationReport(
        not messages, tuple(negative.tolist()), tuple(excess.tolist()), tuple(messages)
    )


def clamp_reduced(x: np.ndarray, tol: float = STATE_TOL) -> np.ndarray:
    """Clamp reduced-layout state(s) onto the feasible region.

    Entries down to ``-tol`` are set to zero and group sums up to ``1 + tol``
    are rescaled to 1. Anything worse raises :class:`StateError`. Accepts a
    single flat state or a 2-D stack.
    """
    arr = np.asarray(x, dtype=float)
    g = arr.reshape(arr.shape[:-1] + (arr.shape[-1] // 3, 3))
    lo = g.min()
    if lo < -tol:
        raise StateError(f"state leaves the feasible region: entry {lo:.3g} < 0")
    sums = g.sum(axis=-1)
    hi = sums.max()
    if hi > 1.0 + tol:
        raise StateError(f"state leaves the feasible region: group sum {hi:.12g} > 1")
    if lo >= 0 and hi <= 1.0:
        return arr
    g = np.maximum(g, 0.0)
    sums = g.sum(axis=-1, keepdims=True)
    g = np.where(sums > 1.0, g / np.maximum(sums, 1.0), g)
    return g.reshape(arr.shape)


def _check(params: ModelParams, state: StateVector, layout: Layout) -> None:
    if state.layout is not layout:
        raise DimensionError(f"expected a {layout.value} state, got {state.layout.value}")
    if state.n != params.n:
        raise DimensionError(f"state has {state.n} groups but params have {params.n}")
    report = validate_state(state)
    if not report.ok:
        raise StateError("; ".join(report.messages))


def _as_state(params, state, layout) -> StateVector:
    if not isinstance(state, StateVector):
        state = StateVector(layout, state)
    _check(params, state, layout)
    return state


def force_of_infection(params: ModelParams, A, I) -> np.ndarray:  # noqa: E741
    """``sum_j beta_A[i, j] A_j + beta_I[i, j] I_j`` per group."""
    return params.beta_A @ A + params.beta_I @ I


def reduced_field(params: ModelParams):
    """Unchecked vector field ``f(t, x)`` of the reduced system, for integrators."""
    ba, bi, mu = params.beta_A, params.beta_I, params.mu
    out_s = params.mu + params.nu + params.gamma
    out_a = params.alpha + params.delta_A + params.mu
    out_i = params.delta_I + params.mu
    alpha, gamma = params.alpha, params.gamma
    n = params.n

    def f(t, x):
        g = x.reshape(n, 3)
        S, A, I = g[:, 0], g[:, 1], g[:, 2]  # noqa: E741
        incidence = (ba @ A + bi @ I) * S
        out = np.empty((n, 3))
        out[:, 0] = mu - incidence - out_s * S + gamma * (1.0 - A - I)
        out[:, 1] = incidence - out_a * A
        out[:, 2] = alpha * A - out_i * I
        return out.ravel()

    return f


def rhs_reduced(params: ModelParams, state) -> np.ndarray:
    """Time derivative of ``(S_i, A_i, I_i)`` for the reduced 3n system."""
    state = _as_state(params, state, Layout.REDUCED_3N)
    return reduced_field(params)(0.0, state.values)


def rhs_full(params: ModelParams, state) -> np.ndarray:
    """Time derivative of ``(S_i, A_i, I_i, R_i)``; each group's four
    components sum to zero."""
    state = _as_state(params, state, Layout.FULL_4N)
    S, A, I, R = state.S, state.A, state.I, state.R  # noqa: E741
    p = params
    incidence = force_of_infection(p, A, I) * S
    out = np.empty((p.n, 4))
    out[:, 0] = p.mu - incidence - (p.mu + p.nu) * S + p.gamma * R
    out[:, 1] = incidence - (p.alpha + p.delta_A + p.mu) * A
    out[:, 2] = p.alpha * A - (p.delta_I + p.mu) * I
    out[:, 3] = p.delta_A * A + p.delta_I * I + p.nu * S - (p.gamma + p.mu) * R
    return out.ravel()


def jacobian_reduced(params: ModelParams, state) -> np.ndarray:
    """Analytic 3n x 3n Jacobian of :func:`rhs_reduced`."""
    state = _as_state(params, state, Layout.REDUCED_3N)
    return _jacobian(params, state.S, state.A, state.I)


def _jacobian(p: ModelParams, S, A, I) -> np.ndarray:  # noqa: E741
    n = p.n
    lam = force_of_infection(p, A, I)
    J = np.zeros((n, 3, n, 3))
    idx = np.arange(n)
    # dS_i/dt
    J[idx, 0, idx, 0] = -lam - (p.mu + p.nu + p.gamma)
    J[:, 0, :, 1] = -p.beta_A * S[:, None]
    J[:, 0, :, 2] = -p.beta_I * S[:, None]
    J[idx, 0, idx, 1] -= p.gamma
    J[idx, 0, idx, 2] -= p.gamma
    # dA_i/dt
    J[idx, 1, idx, 0] = lam
    J[:, 1, :, 1] = p.beta_A * S[:, None]
    J[:, 1, :, 2] = p.beta_I * S[:, None]
    J[idx, 1, idx, 1] -= p.alpha + p.delta_A + p.mu
    # dI_i/dt
    J[idx, 2, idx, 1] = p.alpha
    J[idx, 2, idx, 2] = -(p.delta_I + p.mu)
    return J.reshape(3 * n, 3 * n)
