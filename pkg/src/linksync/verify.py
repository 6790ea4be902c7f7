"""Numeric verification of the damping-gain conditions and the integral
inequalities behind them.

The damping certificate evaluates, per agent, the minimum damping that
dominates the delay-induced disturbance terms:

    k_i > sum over initial neighbors j of
          alpha_ij p (gamma + eta) / 2
          + p (gamma + n eta) dbar_ij^2 / (2 alpha_ji)

with free positive constants alpha.  The same test can be written as "all
column sums of a sparse matrix Phi are positive", with k_i minus the alpha
terms on the diagonal and the cross terms on the initial-edge positions;
both forms are computed and must agree.

The inequality suites numerically integrate (trapezoid rule) both sides
of the two L2 cross-term bounds used in the energy analysis and report
RHS - LHS, which must never be meaningfully negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import CommGraph
from .potential import MismatchConstants, PotentialParams, potential_gradient

__all__ = [
    "GainCertificate",
    "CrossTermResult",
    "MismatchTrajectoryReport",
    "optimal_alpha",
    "optimal_alphas",
    "damping_certificate",
    "delay_cross_term_residual",
    "maxnorm_cross_term_residual",
    "trajectory_mismatch_check",
]

_ALPHA_FLOOR = 1e-12


def optimal_alpha(gamma: float, eta: float, dim: int, dbar: float) -> float:
    """Minimizer of a*alpha + b/alpha for one directed edge.

    With a = p(gamma + eta)/2 and b = p(gamma + n eta) dbar^2 / 2 the
    optimum is dbar * sqrt((gamma + n eta) / (gamma + eta)), independent of
    p; the minimized contribution is p dbar sqrt((gamma+eta)(gamma+n eta)).
    A tiny positive floor keeps alpha valid when dbar = 0.
    """
    if gamma < 0.0 or eta < 0.0 or gamma + eta <= 0.0:
        raise ValueError("gamma and eta must be non-negative with a positive sum")
    if dbar < 0.0:
        raise ValueError("dbar must be non-negative")
    return max(dbar * math.sqrt((gamma + dim * eta) / (gamma + eta)), _ALPHA_FLOOR)


def optimal_alphas(
    constants: MismatchConstants, dim: int, delay_bound: np.ndarray, graph: CommGraph
) -> np.ndarray:
    """Per-directed-edge optimal alphas as an (N, N) matrix.

    alpha[i, j] trades its own term in agent i's bound against the cross
    term it induces in agent j's bound, so it is sized by the delay bound
    of the j -> i channel (delay_bound[i, j]).
    """
    n = graph.n_agents
    alphas = np.zeros((n, n))
    for i, j in graph.directed_edges():
        alphas[i, j] = optimal_alpha(
            constants.gamma, constants.eta, dim, float(delay_bound[i, j])
        )
    return alphas


@dataclass
class GainCertificate:
    """Per-agent damping bounds, the sparse column-sum matrix, and verdicts."""

    bounds: np.ndarray        # (N,) right side of the damping condition
    k_min: np.ndarray         # (N,) smallest damping eigenvalue per agent
    alphas: np.ndarray        # (N, N), nonzero on directed initial edges
    phi: np.ndarray           # (N, N) column-sum test matrix
    column_sums: np.ndarray   # (N,)
    agent_pass: np.ndarray    # (N,) bool, k_min > bound
    passed: bool

    def to_dict(self) -> dict:
        return {
            "bounds": self.bounds.tolist(),
            "k_min": self.k_min.tolist(),
            "column_sums": self.column_sums.tolist(),
            "agent_pass": self.agent_pass.tolist(),
            "passed": self.passed,
        }


def damping_certificate(
    gains,
    params: PotentialParams,
    delay_bound: np.ndarray,
    constants: MismatchConstants,
    graph: CommGraph,
    alphas: np.ndarray | None = None,
) -> GainCertificate:
    """Check the damping gains against the delay-disturbance bounds.

    Covers both network kinds; they share the same functional form once the
    proportional gain and the state dimension are fixed by ``params``.
    With ``alphas`` omitted the per-edge optimal values are used.
    """
    n = graph.n_agents
    dim = params.dim
    p = params.p_gain
    gamma, eta = constants.gamma, constants.eta
    delay_bound = np.asarray(delay_bound, dtype=float)
    if alphas is None:
        alphas = optimal_alphas(constants, dim, delay_bound, graph)
    else:
        alphas = np.asarray(alphas, dtype=float)
        for i, j in graph.directed_edges():
            if not alphas[i, j] > 0.0:
                raise ValueError(f"alpha[{i}, {j}] must be positive")

    bounds = np.zeros(n)
    phi = np.zeros((n, n))
    k_min = gains.k_min
    for i in range(n):
        phi[i, i] = k_min[i]
    for i, j in graph.directed_edges():
        # own alpha term, and the cross term driven by the i -> j channel
        bounds[i] += alphas[i, j] * p * (gamma + eta) / 2.0
        bounds[i] += p * (gamma + dim * eta) * delay_bound[j, i] ** 2 / (2.0 * alphas[j, i])
        phi[i, i] -= p * (gamma + eta) / 2.0 * alphas[i, j]
        phi[i, j] = -p * (gamma + dim * eta) * delay_bound[i, j] ** 2 / (2.0 * alphas[i, j])
    column_sums = phi.sum(axis=0)
    agent_pass = k_min > bounds
    return GainCertificate(
        bounds=bounds,
        k_min=np.asarray(k_min, dtype=float),
        alphas=alphas,
        phi=phi,
        column_sums=column_sums,
        agent_pass=agent_pass,
        passed=bool(np.all(agent_pass)),
    )


@dataclass(frozen=True)
class CrossTermResult:
    lhs: float
    rhs: float
    residual: float   # rhs - lhs; meaningfully negative means a violation
    scale: float      # magnitude for relative tolerances

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale


def _check_grid(t: np.ndarray) -> float:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need a 1-D time grid with at least two points")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
        raise ValueError("time grid must be uniform")
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    return float(dt[0])


def _as_signal(x, steps: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != steps:
        raise ValueError("signal length must match the time grid")
    return x


def _trapezoid(values: np.ndarray, dt: float) -> float:
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


def _window_integrals(t, y, d, dt) -> np.ndarray:
    """Integral of y over [s - d(s), s] per grid point, with constant
    pre-history y(s) = y(0) for s < 0."""
    S, n = y.shape
    # cumulative trapezoid antiderivative on the grid, Y[0] = 0
    inc = 0.5 * dt * (y[1:] + y[:-1])
    Y = np.vstack([np.zeros((1, n)), np.cumsum(inc, axis=0)])
    lo = t - d
    k = np.clip(np.floor(lo / dt).astype(np.int64), 0, S - 2)
    w = lo / dt - k
    Y_lo = Y[k] * (1.0 - w)[:, None] + Y[k + 1] * w[:, None]
    # before the grid the antiderivative continues linearly with slope y(0)
    pre = lo < 0.0
    if np.any(pre):
        Y_lo[pre] = lo[pre, None] * y[0][None, :]
    return Y - Y_lo


def delay_cross_term_residual(t, x, y, d, alpha: float, dbar: float) -> CrossTermResult:
    """Residual of: twice the integrated cross term of x against the
    delay-window integral of y, bounded by alpha ||x||^2 + dbar^2/alpha ||y||^2.

    Signals are sampled on the uniform grid t (starting at 0); y uses a
    constant pre-history before t = 0.  The delays d must sit in [0, dbar].
    """
    dt = _check_grid(t)
    t = np.asarray(t, dtype=float)
    x = _as_signal(x, t.size)
    y = _as_signal(y, t.size)
    d = np.asarray(d, dtype=float)
    if d.shape != t.shape:
        raise ValueError("delay samples must match the time grid")
    if np.any(d < 0.0) or np.any(d > dbar * (1.0 + 1e-12)):
        raise ValueError("delays must stay within [0, dbar]")
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    if x.shape[1] != y.shape[1]:
        raise ValueError("x and y must share a dimension")
    W = _window_integrals(t, y, d, dt)
    lhs = 2.0 * _trapezoid(np.sum(x * W, axis=1), dt)
    l2x = _trapezoid(np.sum(x * x, axis=1), dt)
    l2y = _trapezoid(np.sum(y * y, axis=1), dt)
    rhs = alpha * l2x + dbar**2 / alpha * l2y
    scale = max(abs(rhs), abs(lhs), 1e-30)
    return CrossTermResult(lhs=lhs, rhs=rhs, residual=rhs - lhs, scale=scale)


def maxnorm_cross_term_residual(t, x, y, d, alpha: float, dbar: float) -> CrossTermResult:
    """Residual of the max-component variant: the cross term of x against
    the largest component magnitude of the delay-window integral of y,
    bounded by alpha/2 ||x||^2 + n dbar^2 / (2 alpha) ||y||^2."""
    dt = _check_grid(t)
    t = np.asarray(t, dtype=float)
    x = _as_signal(x, t.size)
    y = _as_signal(y, t.size)
    d = np.asarray(d, dtype=float)
    if d.shape != t.shape:
        raise ValueError("delay samples must match the time grid")
    if np.any(d < 0.0) or np.any(d > dbar * (1.0 + 1e-12)):
        raise ValueError("delays must stay within [0, dbar]")
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    if x.shape[1] != y.shape[1]:
        raise ValueError("x and y must share a dimension")
    n = y.shape[1]
    W = _window_integrals(t, y, d, dt)
    ybar = np.max(np.abs(W), axis=1)
    lhs = _trapezoid(np.sum(x, axis=1) * ybar, dt)
    l2x = _trapezoid(np.sum(x * x, axis=1), dt)
    l2y = _trapezoid(np.sum(y * y, axis=1), dt)
    rhs = 0.5 * alpha * l2x + n * dbar**2 / (2.0 * alpha) * l2y
    scale = max(abs(rhs), abs(lhs), 1e-30)
    return CrossTermResult(lhs=lhs, rhs=rhs, residual=rhs - lhs, scale=scale)


@dataclass(frozen=True)
class MismatchTrajectoryReport:
    max_violation: float      # componentwise max of |grad diff| - bound
    ok: bool
    worst_time: float
    worst_edge: tuple[int, int]
    samples: int


def trajectory_mismatch_check(
    record, constants: MismatchConstants, params: PotentialParams | None = None
) -> MismatchTrajectoryReport:
    """Re-check the componentwise gradient-mismatch bound along a recorded
    run: for each sample and directed initial edge, every component of the
    difference between the gradient at the current and at the delayed
    neighbor position must stay within gamma |e| + eta ||e||_inf, e being
    the neighbor displacement over the delay window."""
    if params is None:
        params = record.config.params()
    gamma, eta = constants.gamma, constants.eta
    directed = record.graph.directed_edges()
    worst = -np.inf
    worst_time = 0.0
    worst_edge = (0, 0)
    S = record.times.shape[0]
    for s in range(S):
        pos = record.positions[s]
        for e, (i, j) in enumerate(directed):
            xjd = record.delayed_positions[s, e]
            disp = pos[j] - xjd
            g_now = potential_gradient(pos[i], pos[j], params)
            g_del = potential_gradient(pos[i], xjd, params)
            lhs = np.abs(g_now - g_del)
            bound = gamma * np.abs(disp) + eta * np.max(np.abs(disp))
            violation = float(np.max(lhs - bound))
            if violation > worst:
                worst = violation
                worst_time = float(record.times[s])
                worst_edge = (i, j)
    return MismatchTrajectoryReport(
        max_violation=worst,
        ok=bool(worst <= 1e-12),
        worst_time=worst_time,
        worst_edge=worst_edge,
        samples=S,
    )
