"""Numerical kernels shared by the analysis modules.

Perron data of nonnegative matrices, the dense spectral abscissa, positive
flow-balance vectors of weighted digraphs, and an adaptive Dormand-Prince
integrator with cubic Hermite dense output.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    IntegrationError,
    IrreducibilityError,
    ParameterError,
)


@dataclass(frozen=True, eq=False)
class PerronData:
    rho: float
    right_vector: np.ndarray
    iterations: int
    residual: float


def _square(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} has non-finite entries")
    return a


def power_iteration(M, tol: float = 1e-13, max_iter: int = 100_000) -> PerronData:
    """Perron root and right Perron vector of a nonnegative irreducible matrix.

    Iterates on ``M + s I`` with ``s = ||M||_inf / 2``; the shift makes the
    iteration matrix primitive, so periodic inputs (bipartite adjacency
    matrices, permutations) converge too. The eigenvalue estimate is the
    Rayleigh quotient of the current iterate, and iteration stops once two
    successive quotients agree to ``tol`` and the residual
    ``||M v - rho v||_inf`` is at most ``1e-10 ||M||_inf``.

    Raises
    ------
    IrreducibilityError
        If ``M`` has negative entries or its digraph is not strongly connected.
    ConvergenceError
        If ``max_iter`` is exhausted.
    """
    from .topology import is_strongly_connected

    m = _square(M)
    if np.any(m < 0):
        raise IrreducibilityError("power iteration needs a nonnegative matrix")
    if not is_strongly_connected(m):
        raise IrreducibilityError("matrix is reducible")
    size = m.shape[0]
    norm = float(np.abs(m).sum(axis=1).max())
    if norm == 0.0:
        return PerronData(0.0, np.ones(size), 0, 0.0)

    shift = 0.5 * norm
    b = m + shift * np.eye(size)
    v = np.ones(size)
    prev = math.nan
    for it in range(1, max_iter + 1):
        w = b @ v
        v = w / w.max()
        mv = m @ v
        rho = float(v @ mv / (v @ v))
        if abs(rho - prev) <= tol * max(1.0, abs(rho)):
            residual = float(np.abs(mv - rho * v).max())
            if residual <= 1e-10 * norm:
                return PerronData(rho, v, it, residual)
        prev = rho
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", iterations=max_iter
    )


def spectral_abscissa(M) -> float:
    """Largest real part over the eigenvalues of a real square matrix.

    Uses LAPACK's general eigensolver (Hessenberg reduction followed by the
    shifted QR iteration).
    """
    m = _square(M)
    if m.size == 0:
        raise DimensionError("empty matrix")
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    return float(eig.real.max())


def positive_balance_vector(W) -> np.ndarray:
    """Positive coefficients ``c`` balancing the weighted digraph ``W``.

    Solves ``c_k sum_j W[k, j] = sum_i c_i W[i, k]`` for every node ``k``,
    i.e. ``(diag(rowsum W) - W^T) c = 0``, normalized so ``min(c) = 1``.
    These are the weights that make ``sum_ij c_i W_ij (p_i - p_j)`` vanish
    for every potential ``p``; for a strongly connected digraph they are
    proportional to the Laplacian cofactors of the matrix-tree theorem.
    """
    from .topology import is_strongly_connected

    w = _square(W, "weight matrix")
    if np.any(w < 0):
        raise IrreducibilityError("weights must be nonnegative")
    size = w.shape[0]
    if size == 1:
        return np.ones(1)
    if not is_strongly_connected(w):
        raise IrreducibilityError("weight digraph is not strongly connected")

    lap = np.diag(w.sum(axis=1)) - w.T
    # Rows of lap sum to the zero row, so the last equation is redundant.
    c = np.empty(size)
    c[-1] = 1.0
    try:
        sub = lap[:-1, :-1]
        if np.linalg.cond(sub) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned reduced system")
        c[:-1] = np.linalg.solve(sub, -lap[:-1, -1])
    except np.linalg.LinAlgError:
        _, s, vt = np.linalg.svd(lap)
        if size > 1 and s[-2] <= 1e-12 * s[0]:
            raise IrreducibilityError("balance kernel has dimension > 1")
        c = vt[-1] * np.sign(vt[-1].sum())
    if np.any(c <= 0):
        raise IrreducibilityError("balance vector is not strictly positive")
    c = c / c.min()
    scale = float(np.abs(w.sum(axis=1) * c).max())
    residual = float(np.abs(lap @ c).max())
    if residual > 1e-10 * scale:
        raise ConvergenceError(f"balance residual {residual:.3e} too large")
    return c


# ---------------------------------------------------------------------------
# Integrator

@dataclass(frozen=True)
class IntegratorOptions:
    """Settings for :func:`integrate`.

    ``fixed_step`` disables error control; ``sample_step`` is the spacing of
    the dense-output samples (``None`` keeps the accepted step points only).
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    fixed_step: float | None = None
    sample_step: float | None = None
    first_step: float | None = None
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError("tolerances must be positive")
        if not self.max_step > 0:
            raise ParameterError("max_step must be positive")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ParameterError("fixed_step must be positive")
        if self.sample_step is not None and not self.sample_step > 0:
            raise ParameterError("sample_step must be positive")


@dataclass(eq=False)
class Trajectory:
    """Time-indexed solution.

    ``values`` holds one row per entry of ``times``. When ``n_groups`` is set
    the rows use the grouped layout ``(S_1, A_1, I_1, ..., S_n, A_n, I_n)``
    and the compartment accessors are available. The accepted integration
    steps (``step_*``) are kept for dense evaluation between samples.
    """

    times: np.ndarray
    values: np.ndarray
    step_times: np.ndarray | None = None
    step_values: np.ndarray | None = None
    step_derivs: np.ndarray | None = None
    stats: dict = field(default_factory=dict)
    n_groups: int | None = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def _grouped(self) -> np.ndarray:
        if self.n_groups is None:
            raise DimensionError("trajectory has no group layout")
        return self.values.reshape(len(self.times), self.n_groups, 3)

    @property
    def S(self) -> np.ndarray:
        return self._grouped()[:, :, 0]

    @property
    def A(self) -> np.ndarray:
        return self._grouped()[:, :, 1]

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return self._grouped()[:, :, 2]

    @property
    def R(self) -> np.ndarray:
        g = self._grouped()
        return 1.0 - g.sum(axis=2)

    def evaluate(self, t) -> np.ndarray:
        """State at time(s) ``t`` from the cubic Hermite interpolant of the
        accepted steps (linear interpolation of samples if steps were not
        kept)."""
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.step_times is None:
            out = np.column_stack(
                [np.interp(tt, self.times, self.values[:, k]) for k in range(self.values.shape[1])]
            )
        else:
            st = self.step_times
            idx = np.clip(np.searchsorted(st, tt, side="right") - 1, 0, len(st) - 2)
            out = _hermite(
                st[idx], self.step_values[idx], self.step_derivs[idx],
                st[idx + 1], self.step_values[idx + 1], self.step_derivs[idx + 1], tt,
            )
        return out[0] if scalar else out

    def to_csv(self, target=None) -> str | None:
        """Write ``t, S_1, A_1, I_1, R_1, ..., R_n`` as CSV.

        Returns the text when ``target`` is None, else writes to the path.
        """
        n = self.n_groups
        if n is None:
            raise DimensionError("trajectory has no group layout")
        header = ["t"]
        for i in range(1, n + 1):
            header += [f"S_{i}", f"A_{i}", f"I_{i}", f"R_{i}"]
        g = self._grouped()
        full = np.concatenate([g, (1.0 - g.sum(axis=2))[:, :, None]], axis=2)
        table = np.column_stack([self.times, full.reshape(len(self.times), 4 * n)])
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        np.savetxt(buf, table, delimiter=",", fmt="%.12g")
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="\n") as fh:
            fh.write(text)
        return None


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = np.asarray(t1 - t0, dtype=float)
    theta = np.asarray((t - t0) / h, dtype=float)
    if y0.ndim == 2:
        theta = theta[:, None]
        h = h[:, None]
    th2 = theta * theta
    th3 = th2 * theta
    return (
        (2 * th3 - 3 * th2 + 1) * y0
        + (th3 - 2 * th2 + theta) * h * f0
        + (-2 * th3 + 3 * th2) * y1
        + (th3 - th2) * h * f1
    )


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dopri_step(rhs, t, y, f, h):
    k = np.empty((7, y.size))
    k[0] = f
    for s in range(1, 7):
        k[s] = rhs(t + _C[s] * h, y + h * (_A[s] @ k[:s]))
    y_new = y + h * (_B5 @ k)
    # Stage 7 is evaluated at y_new (FSAL), so k[6] is f(t + h, y_new).
    return y_new, k[6], h * (_E @ k)


def _initial_step(rhs, t0, y0, f0, rtol, atol, span):
    sc = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _sample_grid(t0, t1, dt):
    count = int(math.floor((t1 - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(count + 1)
    if t1 - grid[-1] > 1e-9 * max(1.0, abs(t1)):
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_span: tuple[float, float],
    opts: IntegratorOptions | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    n_groups: int | None = None,
) -> Trajectory:
    """Integrate ``dx/dt = rhs(t, x)`` over ``t_span`` with Dormand-Prince 5(4).

    Step size control is proportional on the mixed error
    ``atol + rtol * |x|`` (RMS norm). With ``opts.fixed_step`` the same
    fifth-order scheme runs without error control, which gives bit-identical
    reruns. ``project`` is applied to every accepted state and every dense
    sample (used to clamp round-off excursions out of the feasible region);
    it must accept both a single state and a 2-D stack of states.

    Raises
    ------
    IntegrationError
        On step-size underflow or too many steps.
    """
    opts = opts or IntegratorOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ParameterError("t_span must be a nonempty interval")
    y = np.array(x0, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ParameterError("initial state has non-finite entries")
    if project is not None:
        y = project(y)

    nfev = [0]

    def f_eval(t, x):
        nfev[0] += 1
        return np.asarray(rhs(t, x), dtype=float)

    t = t0
    f = f_eval(t, y)
    step_t, step_y, step_f = [t], [y], [f]
    n_rejected = 0
    span = t1 - t0

    if opts.fixed_step is not None:
        n_steps = int(math.ceil(span / opts.fixed_step - 1e-12))
        for k in range(n_steps):
            t_next = t1 if k == n_steps - 1 else t0 + (k + 1) * opts.fixed_step
            y_new, f_new, _ = _dopri_step(f_eval, t, y, f, t_next - t)
            if project is not None:
                y_proj = project(y_new)
                if not np.array_equal(y_proj, y_new):
                    y_new, f_new = y_proj, f_eval(t_next, y_proj)
            if not np.all(np.isfinite(y_new)):
                raise IntegrationError("solution became non-finite", t=t_next)
            t, y, f = t_next, y_new, f_new
            step_t.append(t)
            step_y.append(y)
            step_f.append(f)
    else:
        h = opts.first_step or _initial_step(f_eval, t, y, f, opts.rtol, opts.atol, span)
        h = min(h, opts.max_step)
        accepted = 0
        last_rejected = False
        while t < t1:
            if accepted + n_rejected >= opts.max_steps:
                raise IntegrationError("maximum number of steps exceeded", t=t)
            if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
                raise IntegrationError(
                    f"step size underflow at t={t:.6g} (problem may be stiff)",
                    code="STEP_UNDERFLOW", t=t,
                )
            if t + h >= t1 or t1 - (t + h) < 1e-12 * max(1.0, abs(t1)):
                h = t1 - t
                t_next = t1
            else:
                t_next = t + h
            y_new, f_new, err_vec = _dopri_step(f_eval, t, y, f, h)
            sc = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
            if not np.isfinite(err):
                err = math.inf
            if err <= 1.0:
                if project is not None:
                    y_proj = project(y_new)
                    if not np.array_equal(y_proj, y_new):
                        y_new, f_new = y_proj, f_eval(t_next, y_proj)
                t, y, f = t_next, y_new, f_new
                step_t.append(t)
                step_y.append(y)
                step_f.append(f)
                accepted += 1
                fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if last_rejected:
                    fac = min(fac, 1.0)
                last_rejected = False
            else:
                n_rejected += 1
                last_rejected = True
                fac = max(0.2, 0.9 * err ** -0.2) if np.isfinite(err) else 0.2
            h = min(h * fac, opts.max_step)

    st = np.array(step_t)
    sy = np.array(step_y)
    sf = np.array(step_f)
    if opts.sample_step is None:
        times, values = st, sy
    else:
        times = _sample_grid(t0, t1, opts.sample_step)
        idx = np.clip(np.searchsorted(st, times, side="right") - 1, 0, len(st) - 2)
        values = _hermite(st[idx], sy[idx], sf[idx], st[idx + 1], sy[idx + 1], sf[idx + 1], times)
        values[0] = sy[0]
        values[-1] = sy[-1]
        if project is not None:
            # project must accept a stack of states as well as a single one
            values = project(values)
    stats = {
        "n_steps": len(st) - 1,
        "n_rejected": n_rejected,
        "n_rhs": nfev[0],
        "rtol": opts.rtol,
        "atol": opts.atol,
        "fixed_step": opts.fixed_step,
    }
    return Trajectory(times, values, st, sy, sf, stats, n_groups)
