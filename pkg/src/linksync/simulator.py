"""Fixed-step integration of the delayed closed loops, with monitors.

The delay equations are integrated by the method of steps: the accepted
per-step positions form each agent's transmission history, and every RK4
sub-stage reads delayed neighbor positions by linear interpolation of
that history (sub-stage times slightly past the newest accepted sample
extrapolate linearly from the last two samples).  Histories advance once
per accepted step, which keeps the scheme fully explicit.

Runs are deterministic: identical configs (including seeds) produce
bit-identical records.  A run continues to the horizon after a link is
lost, for diagnosis, but aborts immediately when an evaluated distance
reaches the potential domain boundary sqrt(radius^2 + barrier) or when
the state stops being finite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .delay import DelayProfile, _delay_at, edge_phase
from .dynamics import DampingGains, TwoLinkArm
from .graph import CommGraph, graph_from_positions, is_connected
from .potential import (
    PotentialParams,
    mismatch_constants,
    plan_parameters,
)

__all__ = [
    "ScenarioConfig",
    "TrajectoryRecord",
    "AbortInfo",
    "MonitorReport",
    "GainCheckError",
    "run_scenario",
    "lyapunov_value",
    "initial_kinetic_energy",
    "monitors",
    "write_csv",
]

KINDS = ("single-integrator", "euler-lagrange")

ABORT_NONE = 0
ABORT_DOMAIN = 1
ABORT_NONFINITE = 2


class GainCheckError(ValueError):
    """Configured damping gains failed the certificate and no bypass was set."""


@dataclass(eq=False)
class ScenarioConfig:
    """Full description of one experiment.  Distances in meters (or radians
    for arm networks), times in seconds."""

    name: str
    kind: str
    n_agents: int
    dim: int
    initial_positions: np.ndarray
    initial_velocities: np.ndarray
    radius: float
    buffer: float
    edge_threshold: float
    barrier: float
    p_gain: float
    damping: np.ndarray            # (n_agents, dim) diagonal entries
    delay_bound: np.ndarray        # (n_agents, n_agents); [i, j] bounds the
                                   # age of agent j's position as seen by i
    delay_kind: str = "sinusoidal"
    delay_frequency: float = 1.0
    delay_seed: int = 0
    delay_step_std: float = 0.02
    delay_grid: float = 0.01
    step: float = 1e-3
    horizon: float = 20.0
    decimation: int = 10
    arm: TwoLinkArm | None = None
    consensus_tol: float = 1e-2
    lyapunov_rel_tol: float = 1e-3
    gain_check: str = "enforce"
    defaults_applied: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        pos = np.asarray(self.initial_positions, dtype=float)
        if pos.shape != (self.n_agents, self.dim):
            raise ValueError(
                f"initial_positions must have shape ({self.n_agents}, {self.dim})"
            )
        vel = np.asarray(self.initial_velocities, dtype=float)
        if vel.shape != pos.shape:
            raise ValueError("initial_velocities must match initial_positions")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("initial state must be finite")
        object.__setattr__(self, "initial_positions", pos)
        object.__setattr__(self, "initial_velocities", vel)
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        if not 0.0 < self.buffer < self.radius:
            raise ValueError("buffer must lie in (0, radius)")
        if not 0.0 < self.edge_threshold <= self.radius:
            raise ValueError("edge_threshold must lie in (0, radius]")
        if not self.barrier > 0.0:
            raise ValueError("barrier must be positive")
        if not self.p_gain > 0.0:
            raise ValueError("p_gain must be positive")
        damping = np.asarray(self.damping, dtype=float)
        if damping.ndim == 1:
            damping = np.repeat(damping[:, None], self.dim, axis=1)
        if damping.shape != (self.n_agents, self.dim):
            raise ValueError("damping must give one gain (or one row) per agent")
        if not np.all(damping > 0.0):
            raise ValueError("damping entries must be positive")
        object.__setattr__(self, "damping", damping)
        dbar = np.asarray(self.delay_bound, dtype=float)
        if dbar.ndim == 0:
            dbar = np.full((self.n_agents, self.n_agents), float(dbar))
        if dbar.shape != (self.n_agents, self.n_agents):
            raise ValueError("delay_bound must be a scalar or an (N, N) matrix")
        if not np.all(dbar >= 0.0) or not np.all(np.isfinite(dbar)):
            raise ValueError("delay bounds must be finite and non-negative")
        object.__setattr__(self, "delay_bound", dbar)
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.decimation < 1:
            raise ValueError("decimation must be at least 1")
        positive = dbar[dbar > 0.0]
        if positive.size and self.step > positive.min() / 10.0:
            raise ValueError(
                f"step {self.step} too coarse for the smallest nonzero delay "
                f"bound {positive.min()} (need step <= bound / 10)"
            )
        if self.kind == "euler-lagrange":
            if self.dim != 2:
                raise ValueError("arm networks are 2-dimensional (two joints)")
            if self.arm is None:
                raise ValueError("arm networks need an arm model")
        if self.gain_check not in ("enforce", "bypass"):
            raise ValueError("gain_check must be 'enforce' or 'bypass'")
        if not self.consensus_tol > 0.0:
            raise ValueError("consensus_tol must be positive")
        if not self.lyapunov_rel_tol >= 0.0:
            raise ValueError("lyapunov_rel_tol must be non-negative")

    def params(self) -> PotentialParams:
        return PotentialParams(
            radius=self.radius,
            buffer=self.buffer,
            barrier=self.barrier,
            p_gain=self.p_gain,
            n_agents=self.n_agents,
            dim=self.dim,
        )

    def gains(self) -> DampingGains:
        return DampingGains(diag=self.damping)

    def graph(self) -> CommGraph:
        return graph_from_positions(
            self.initial_positions, self.radius, self.edge_threshold
        )

    def to_dict(self) -> dict:
        """Fully explicit dict; parsing it back reproduces this config."""
        out = {
            "name": self.name,
            "kind": self.kind,
            "n_agents": self.n_agents,
            "dim": self.dim,
            "initial_positions": self.initial_positions.tolist(),
            "initial_velocities": self.initial_velocities.tolist(),
            "radius": self.radius,
            "buffer": self.buffer,
            "edge_threshold": self.edge_threshold,
            "barrier": self.barrier,
            "p_gain": self.p_gain,
            "damping": self.damping.tolist(),
            "delay_bound": self.delay_bound.tolist(),
            "delay": {
                "kind": self.delay_kind,
                "frequency": self.delay_frequency,
                "seed": self.delay_seed,
                "step_std": self.delay_step_std,
                "grid": self.delay_grid,
            },
            "step": self.step,
            "horizon": self.horizon,
            "decimation": self.decimation,
            "consensus_tol": self.consensus_tol,
            "lyapunov_rel_tol": self.lyapunov_rel_tol,
            "gain_check": self.gain_check,
        }
        if self.arm is not None:
            out["arm"] = {
                "m1": self.arm.m1,
                "m2": self.arm.m2,
                "l1": self.arm.l1,
                "l2": self.arm.l2,
                "gravity": self.arm.gravity,
            }
        return out


@dataclass(frozen=True)
class AbortInfo:
    time: float
    reason: str                     # "potential-domain" or "non-finite"
    edge: tuple[int, int] | None    # (receiver, sender) when a pair tripped it

    def to_dict(self) -> dict:
        return {"time": self.time, "reason": self.reason,
                "edge": list(self.edge) if self.edge else None}


@dataclass(eq=False)
class TrajectoryRecord:
    """Decimated time series of one run plus everything needed to audit it."""

    config: ScenarioConfig
    graph: CommGraph
    times: np.ndarray              # (S,)
    positions: np.ndarray          # (S, N, n)
    velocities: np.ndarray         # (S, N, n)  filter state or joint rates
    lyapunov: np.ndarray           # (S,)
    edge_distances: np.ndarray     # (S, M) in graph.edges order
    spread: np.ndarray             # (S,) max over all agent pairs
    margin: np.ndarray             # (S,) min over initial edges of radius - dist
    delayed_positions: np.ndarray  # (S, 2M, n) in graph.directed_edges() order
    abort: AbortInfo | None
    gain_check: dict
    wall_time: float
    meta: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.abort is not None


@njit(cache=True)
def _lookup(POS, j, idx, k_accepted):
    """Linear interpolation of agent j's accepted positions at fractional
    step index ``idx``; constant before step 0, linear extrapolation past
    ``k_accepted`` (the newest accepted step)."""
    n = POS.shape[2]
    out = np.empty(n)
    if idx <= 0.0 or k_accepted == 0:
        for d in range(n):
            out[d] = POS[0, j, d]
        return out
    i0 = int(idx)
    if i0 > k_accepted - 1:
        i0 = k_accepted - 1
    w = idx - i0
    for d in range(n):
        out[d] = POS[i0, j, d] * (1.0 - w) + POS[i0 + 1, j, d] * w
    return out


@njit(cache=True)
def _integrate_si(x0, v0, kdiag, p, r2, q_barrier, n_steps, h,
                  recv, send, e_tail, e_head,
                  kinds, bounds, omegas, phases, walks, walk_dt):
    """RK4 method-of-steps for the filtered single-integrator network.

    Returns (POS, VEL, abort_step, abort_code, abort_edge, abort_time).
    POS[k] is the accepted state at t = k h; on abort only rows
    0..abort_step are valid.
    """
    N = x0.shape[0]
    n = x0.shape[1]
    E2 = recv.shape[0]
    M = e_tail.shape[0]
    dom = r2 + q_barrier
    hc = 2.0 * dom
    POS = np.empty((n_steps + 1, N, n))
    VEL = np.empty((n_steps + 1, N, n))
    for i in range(N):
        for d in range(n):
            POS[0, i, d] = x0[i, d]
            VEL[0, i, d] = v0[i, d]
    x = x0.copy()
    v = v0.copy()
    kx = np.empty((4, N, n))
    kv = np.empty((4, N, n))
    xs = np.empty((N, n))
    vs = np.empty((N, n))
    for step in range(n_steps):
        t = step * h
        # the accepted state itself must stay inside the potential domain
        for m in range(M):
            a = e_tail[m]
            b = e_head[m]
            dist2 = 0.0
            for d in range(n):
                diff = x[a, d] - x[b, d]
                dist2 += diff * diff
            if dist2 >= dom:
                return POS, VEL, step, ABORT_DOMAIN, 2 * m, t
        for s_i in range(4):
            if s_i == 0:
                ts = t
                for i in range(N):
                    for d in range(n):
                        xs[i, d] = x[i, d]
                        vs[i, d] = v[i, d]
            elif s_i == 3:
                ts = t + h
                for i in range(N):
                    for d in range(n):
                        xs[i, d] = x[i, d] + h * kx[2, i, d]
                        vs[i, d] = v[i, d] + h * kv[2, i, d]
            else:
                ts = t + 0.5 * h
                for i in range(N):
                    for d in range(n):
                        xs[i, d] = x[i, d] + 0.5 * h * kx[s_i - 1, i, d]
                        vs[i, d] = v[i, d] + 0.5 * h * kv[s_i - 1, i, d]
            for i in range(N):
                for d in range(n):
                    kx[s_i, i, d] = vs[i, d]
                    kv[s_i, i, d] = -kdiag[i, d] * vs[i, d]
            for e in range(E2):
                i = recv[e]
                j = send[e]
                dly = _delay_at(kinds[e], bounds[e], omegas[e], phases[e],
                                walks[e], walk_dt, ts)
                xjd = _lookup(POS, j, (ts - dly) / h, step)
                dist2 = 0.0
                for d in range(n):
                    diff = xs[i, d] - xjd[d]
                    dist2 += diff * diff
                if dist2 >= dom:
                    return POS, VEL, step, ABORT_DOMAIN, e, ts
                co = p * hc / ((dom - dist2) * (dom - dist2))
                for d in range(n):
                    kv[s_i, i, d] -= co * (xs[i, d] - xjd[d])
        ok = True
        for i in range(N):
            for d in range(n):
                x[i, d] = x[i, d] + (h / 6.0) * (
                    kx[0, i, d] + 2.0 * kx[1, i, d] + 2.0 * kx[2, i, d] + kx[3, i, d]
                )
                v[i, d] = v[i, d] + (h / 6.0) * (
                    kv[0, i, d] + 2.0 * kv[1, i, d] + 2.0 * kv[2, i, d] + kv[3, i, d]
                )
                if not (np.isfinite(x[i, d]) and np.isfinite(v[i, d])):
                    ok = False
        if not ok:
            return POS, VEL, step, ABORT_NONFINITE, -1, t + h
        for i in range(N):
            for d in range(n):
                POS[step + 1, i, d] = x[i, d]
                VEL[step + 1, i, d] = v[i, d]
    return POS, VEL, n_steps, ABORT_NONE, -1, n_steps * h


@njit(cache=True)
def _integrate_el(x0, v0, kdiag, p, r2, q_barrier, n_steps, h,
                  recv, send, e_tail, e_head,
                  kinds, bounds, omegas, phases, walks, walk_dt,
                  m1, m2, l1, l2):
    """RK4 method-of-steps for the two-link arm network.

    Control torques compensate gravity exactly, so gravity cancels out of
    the closed loop and is omitted here; the Coriolis matrix keeps the
    Christoffel convention of :func:`linksync.dynamics.arm_matrices`.
    """
    N = x0.shape[0]
    E2 = recv.shape[0]
    M = e_tail.shape[0]
    dom = r2 + q_barrier
    hc = 2.0 * dom
    POS = np.empty((n_steps + 1, N, 2))
    VEL = np.empty((n_steps + 1, N, 2))
    for i in range(N):
        for d in range(2):
            POS[0, i, d] = x0[i, d]
            VEL[0, i, d] = v0[i, d]
    x = x0.copy()
    v = v0.copy()
    kx = np.empty((4, N, 2))
    kv = np.empty((4, N, 2))
    xs = np.empty((N, 2))
    vs = np.empty((N, 2))
    grad = np.empty((N, 2))
    ma = (m1 + m2) * l1 * l1 + m2 * l2 * l2
    mb = m2 * l1 * l2
    mc = m2 * l2 * l2
    for step in range(n_steps):
        t = step * h
        for m in range(M):
            a = e_tail[m]
            b = e_head[m]
            d0 = x[a, 0] - x[b, 0]
            d1 = x[a, 1] - x[b, 1]
            dist2 = d0 * d0 + d1 * d1
            if dist2 >= dom:
                return POS, VEL, step, ABORT_DOMAIN, 2 * m, t
        for s_i in range(4):
            if s_i == 0:
                ts = t
                for i in range(N):
                    for d in range(2):
                        xs[i, d] = x[i, d]
                        vs[i, d] = v[i, d]
            elif s_i == 3:
                ts = t + h
                for i in range(N):
                    for d in range(2):
                        xs[i, d] = x[i, d] + h * kx[2, i, d]
                        vs[i, d] = v[i, d] + h * kv[2, i, d]
            else:
                ts = t + 0.5 * h
                for i in range(N):
                    for d in range(2):
                        xs[i, d] = x[i, d] + 0.5 * h * kx[s_i - 1, i, d]
                        vs[i, d] = v[i, d] + 0.5 * h * kv[s_i - 1, i, d]
            for i in range(N):
                grad[i, 0] = 0.0
                grad[i, 1] = 0.0
            for e in range(E2):
                i = recv[e]
                j = send[e]
                dly = _delay_at(kinds[e], bounds[e], omegas[e], phases[e],
                                walks[e], walk_dt, ts)
                xjd = _lookup(POS, j, (ts - dly) / h, step)
                d0 = xs[i, 0] - xjd[0]
                d1 = xs[i, 1] - xjd[1]
                dist2 = d0 * d0 + d1 * d1
                if dist2 >= dom:
                    return POS, VEL, step, ABORT_DOMAIN, e, ts
                co = hc / ((dom - dist2) * (dom - dist2))
                grad[i, 0] += co * d0
                grad[i, 1] += co * d1
            for i in range(N):
                c2 = np.cos(xs[i, 1])
                s2 = np.sin(xs[i, 1])
                m11 = ma + 2.0 * mb * c2
                m12 = mc + mb * c2
                hcor = mb * s2
                # torque with gravity already cancelled, minus Coriolis
                t1 = (-p * grad[i, 0] - kdiag[i, 0] * vs[i, 0]
                      + hcor * vs[i, 1] * vs[i, 0]
                      + hcor * (vs[i, 0] + vs[i, 1]) * vs[i, 1])
                t2 = (-p * grad[i, 1] - kdiag[i, 1] * vs[i, 1]
                      - hcor * vs[i, 0] * vs[i, 0])
                det = m11 * mc - m12 * m12
                kx[s_i, i, 0] = vs[i, 0]
                kx[s_i, i, 1] = vs[i, 1]
                kv[s_i, i, 0] = (mc * t1 - m12 * t2) / det
                kv[s_i, i, 1] = (-m12 * t1 + m11 * t2) / det
        ok = True
        for i in range(N):
            for d in range(2):
                x[i, d] = x[i, d] + (h / 6.0) * (
                    kx[0, i, d] + 2.0 * kx[1, i, d] + 2.0 * kx[2, i, d] + kx[3, i, d]
                )
                v[i, d] = v[i, d] + (h / 6.0) * (
                    kv[0, i, d] + 2.0 * kv[1, i, d] + 2.0 * kv[2, i, d] + kv[3, i, d]
                )
                if not (np.isfinite(x[i, d]) and np.isfinite(v[i, d])):
                    ok = False
        if not ok:
            return POS, VEL, step, ABORT_NONFINITE, -1, t + h
        for i in range(N):
            for d in range(2):
                POS[step + 1, i, d] = x[i, d]
                VEL[step + 1, i, d] = v[i, d]
    return POS, VEL, n_steps, ABORT_NONE, -1, n_steps * h


def _edge_profiles(cfg: ScenarioConfig, graph: CommGraph) -> list[DelayProfile]:
    """One delay profile per directed edge, seeds and phases per edge index."""
    profiles = []
    for k, (i, j) in enumerate(graph.directed_edges()):
        profiles.append(
            DelayProfile(
                kind=cfg.delay_kind,
                bound=float(cfg.delay_bound[i, j]),
                frequency=cfg.delay_frequency,
                phase=edge_phase(k),
                step_std=cfg.delay_step_std,
                grid=cfg.delay_grid,
                seed=cfg.delay_seed + k,
            )
        )
    return profiles


def _profile_arrays(cfg: ScenarioConfig, profiles: list[DelayProfile]):
    from .delay import KIND_CODES

    e2 = len(profiles)
    kinds = np.array([KIND_CODES[p.kind] for p in profiles], dtype=np.int64)
    bounds = np.array([p.bound for p in profiles])
    omegas = np.array([2.0 * math.pi * p.frequency for p in profiles])
    phases = np.array([p.phase for p in profiles])
    if cfg.delay_kind == "random-walk":
        tables = [p.walk_table(cfg.horizon + cfg.step) for p in profiles]
        width = max(t.shape[0] for t in tables)
        walks = np.zeros((e2, width))
        for k, t in enumerate(tables):
            walks[k, : t.shape[0]] = t
            walks[k, t.shape[0]:] = t[-1]
    else:
        walks = np.zeros((max(e2, 1), 1))
    return kinds, bounds, omegas, phases, walks, cfg.delay_grid


def initial_kinetic_energy(cfg: ScenarioConfig) -> float:
    """Kinetic energy of the initial state (filter energy for the
    single-integrator kind, inertia-weighted joint rates for arms)."""
    from .dynamics import arm_kinetic_energy

    if cfg.kind == "single-integrator":
        return 0.5 * float(np.sum(cfg.initial_velocities**2))
    total = 0.0
    for i in range(cfg.n_agents):
        total += arm_kinetic_energy(
            cfg.arm, cfg.initial_positions[i], cfg.initial_velocities[i]
        )
    return total


def _gain_check_info(cfg: ScenarioConfig, graph: CommGraph) -> dict:
    """Feasibility plan plus damping certificate for the configured gains."""
    from .verify import damping_certificate

    info: dict = {"mode": cfg.gain_check}
    ke0 = initial_kinetic_energy(cfg)
    plan = plan_parameters(
        n_agents=cfg.n_agents,
        dim=cfg.dim,
        radius=cfg.radius,
        buffer=cfg.buffer,
        delay_bound=float(cfg.delay_bound.max()),
        kinetic_energy=ke0,
        barrier=cfg.barrier,
        p_gain=cfg.p_gain,
    )
    info["feasibility"] = plan.to_dict()
    if not plan.feasible:
        info["certificate"] = None
        info["passed"] = False
        info["detail"] = f"parameter plan infeasible: {plan.violated}"
        return info
    constants = mismatch_constants(cfg.params(), float(cfg.delay_bound.max()), plan.slack)
    cert = damping_certificate(
        cfg.gains(), cfg.params(), cfg.delay_bound, constants, graph
    )
    info["certificate"] = cert.to_dict()
    info["passed"] = bool(cert.passed)
    if not cert.passed:
        info["detail"] = "damping gains below the certificate bounds"
    return info


def run_scenario(cfg: ScenarioConfig) -> TrajectoryRecord:
    """Integrate one scenario and assemble its trajectory record.

    Gains are checked against the damping certificate first; a failing or
    infeasible check raises GainCheckError unless the config says
    ``gain_check: bypass``, in which case the outcome is recorded and the
    run proceeds.
    """
    started = time.perf_counter()
    graph = cfg.graph()
    gain_info = _gain_check_info(cfg, graph)
    if cfg.gain_check == "enforce" and not gain_info["passed"]:
        raise GainCheckError(
            gain_info.get("detail", "damping gain check failed")
            + "; set gain_check: bypass to run anyway"
        )

    profiles = _edge_profiles(cfg, graph)
    kinds, bounds, omegas, phases, walks, walk_dt = _profile_arrays(cfg, profiles)
    directed = graph.directed_edges()
    recv = np.array([i for i, _ in directed], dtype=np.int64)
    send = np.array([j for _, j in directed], dtype=np.int64)
    e_tail = np.array([a for a, _ in graph.edges], dtype=np.int64)
    e_head = np.array([b for _, b in graph.edges], dtype=np.int64)
    if e_tail.size == 0:
        e_tail = np.zeros(0, dtype=np.int64)
        e_head = np.zeros(0, dtype=np.int64)

    n_steps = int(round(cfg.horizon / cfg.step))
    common = (
        cfg.initial_positions.copy(), cfg.initial_velocities.copy(),
        cfg.damping.copy(), cfg.p_gain, cfg.radius**2, cfg.barrier,
        n_steps, cfg.step, recv, send, e_tail, e_head,
        kinds, bounds, omegas, phases, walks, walk_dt,
    )
    if cfg.kind == "single-integrator":
        POS, VEL, last_step, code, edge_idx, abort_t = _integrate_si(*common)
    else:
        POS, VEL, last_step, code, edge_idx, abort_t = _integrate_el(
            *common, cfg.arm.m1, cfg.arm.m2, cfg.arm.l1, cfg.arm.l2
        )

    abort = None
    if code != ABORT_NONE:
        reason = "potential-domain" if code == ABORT_DOMAIN else "non-finite"
        edge = tuple(directed[edge_idx]) if edge_idx >= 0 else None
        abort = AbortInfo(time=float(abort_t), reason=reason, edge=edge)

    n_rows = last_step + 1
    sample_idx = np.arange(0, n_rows, cfg.decimation)
    if sample_idx.size == 0 or sample_idx[-1] != n_rows - 1:
        sample_idx = np.append(sample_idx, n_rows - 1)
    times = sample_idx * cfg.step
    positions = POS[sample_idx].copy()
    velocities = VEL[sample_idx].copy()

    params = cfg.params()
    lyap = _lyapunov_series(cfg, params, graph, positions, velocities)
    edge_dist = _edge_distance_series(positions, graph)
    spread = _spread_series(positions)
    if graph.n_edges:
        margin = cfg.radius - edge_dist.max(axis=1)
    else:
        margin = np.full(times.shape, cfg.radius)
    delayed = _delayed_series(cfg, profiles, directed, POS, n_rows, sample_idx)

    record = TrajectoryRecord(
        config=cfg,
        graph=graph,
        times=times,
        positions=positions,
        velocities=velocities,
        lyapunov=lyap,
        edge_distances=edge_dist,
        spread=spread,
        margin=margin,
        delayed_positions=delayed,
        abort=abort,
        gain_check=gain_info,
        wall_time=time.perf_counter() - started,
        meta={
            "n_steps": n_steps,
            "completed_steps": int(last_step),
            "connected": is_connected(graph),
            "edge_threshold": cfg.edge_threshold,
            "delay_seeds": [p.seed for p in profiles],
            "delay_phases": [p.phase for p in profiles],
        },
    )
    return record


def _lyapunov_series(cfg, params, graph, positions, velocities) -> np.ndarray:
    """Total energy at each sample: p * sum of link potentials over initial
    edges plus the kinetic-like term of the network kind."""
    S = positions.shape[0]
    pot = np.zeros(S)
    dom = params.radius**2 + params.barrier
    for a, b in graph.edges:
        d2 = np.sum((positions[:, a, :] - positions[:, b, :]) ** 2, axis=1)
        den = dom - d2
        # a sample past the domain boundary has no finite energy; the abort
        # machinery reports it, keep the series finite for the monitors
        den = np.where(den > 0.0, den, np.nan)
        pot += d2 / den
    pot *= params.p_gain
    if cfg.kind == "single-integrator":
        kin = 0.5 * np.sum(velocities**2, axis=(1, 2))
    else:
        arm = cfg.arm
        c2 = np.cos(positions[:, :, 1])
        ma = (arm.m1 + arm.m2) * arm.l1**2 + arm.m2 * arm.l2**2
        mb = arm.m2 * arm.l1 * arm.l2
        mc = arm.m2 * arm.l2**2
        m11 = ma + 2.0 * mb * c2
        m12 = mc + mb * c2
        v1 = velocities[:, :, 0]
        v2 = velocities[:, :, 1]
        kin = 0.5 * np.sum(m11 * v1**2 + 2.0 * m12 * v1 * v2 + mc * v2**2, axis=1)
    out = pot + kin
    return np.where(np.isfinite(out), out, np.inf)


def _edge_distance_series(positions, graph) -> np.ndarray:
    S = positions.shape[0]
    out = np.empty((S, graph.n_edges))
    for k, (a, b) in enumerate(graph.edges):
        out[:, k] = np.linalg.norm(positions[:, a, :] - positions[:, b, :], axis=1)
    return out


def _spread_series(positions) -> np.ndarray:
    S, N, _ = positions.shape
    out = np.zeros(S)
    for i in range(N):
        for j in range(i + 1, N):
            d = np.linalg.norm(positions[:, i, :] - positions[:, j, :], axis=1)
            np.maximum(out, d, out=out)
    return out


def _delayed_series(cfg, profiles, directed, POS, n_rows, sample_idx) -> np.ndarray:
    """Delayed sender positions at each sample time, per directed edge,
    using the same uniform-grid interpolation as the integrator."""
    S = sample_idx.size
    E2 = len(directed)
    n = POS.shape[2]
    out = np.empty((S, E2, n))
    ts = sample_idx * cfg.step
    for e, (_i, j) in enumerate(directed):
        d = profiles[e].delays(ts)
        idx = (ts - d) / cfg.step
        i0 = np.clip(np.floor(idx).astype(np.int64), 0, max(n_rows - 2, 0))
        w = np.clip(idx - i0, 0.0, None)
        w = np.where(idx <= 0.0, 0.0, w)
        i1 = np.minimum(i0 + 1, n_rows - 1)
        out[:, e, :] = POS[i0, j, :] * (1.0 - w)[:, None] + POS[i1, j, :] * w[:, None]
    return out


def lyapunov_value(cfg: ScenarioConfig, positions, velocities) -> float:
    """Network energy of one state under the configured initial edge set."""
    pos = np.asarray(positions, dtype=float).reshape(1, cfg.n_agents, cfg.dim)
    vel = np.asarray(velocities, dtype=float).reshape(1, cfg.n_agents, cfg.dim)
    series = _lyapunov_series(cfg, cfg.params(), cfg.graph(), pos, vel)
    return float(series[0])


@dataclass
class MonitorReport:
    """Verdicts over a completed (or aborted) record."""

    lyapunov_initial: float
    lyapunov_max: float
    lyapunov_excess: float          # max over time of V(t) - V(0)
    lyapunov_ok: bool
    first_lyapunov_violation: float | None
    margin_min: float
    links_ok: bool
    first_link_violation: float | None
    final_spread: float
    consensus_ok: bool
    threshold_ok: bool              # V(0) strictly below p * potential-at-radius
    aborted: bool
    connectivity_ok: bool           # links kept, energy bounded, no abort
    passed: bool                    # connectivity_ok and consensus reached

    def to_dict(self) -> dict:
        return {
            "lyapunov_initial": self.lyapunov_initial,
            "lyapunov_max": self.lyapunov_max,
            "lyapunov_excess": self.lyapunov_excess,
            "lyapunov_ok": self.lyapunov_ok,
            "first_lyapunov_violation": self.first_lyapunov_violation,
            "margin_min": self.margin_min,
            "links_ok": self.links_ok,
            "first_link_violation": self.first_link_violation,
            "final_spread": self.final_spread,
            "consensus_ok": self.consensus_ok,
            "threshold_ok": self.threshold_ok,
            "aborted": self.aborted,
            "connectivity_ok": self.connectivity_ok,
            "passed": self.passed,
        }


def monitors(record: TrajectoryRecord) -> MonitorReport:
    """Evaluate the energy, link-maintenance, and consensus verdicts."""
    cfg = record.config
    v = record.lyapunov
    v0 = float(v[0])
    vmax = float(np.max(v))
    tol = cfg.lyapunov_rel_tol
    band = v0 * (1.0 + tol) + 1e-15
    lyap_ok = bool(vmax <= band)
    first_v = None
    if not lyap_ok:
        k = int(np.argmax(v > band))
        first_v = float(record.times[k])
    margin_min = float(np.min(record.margin))
    links_ok = bool(margin_min > 0.0)
    first_link = None
    if not links_ok:
        k = int(np.argmax(record.margin <= 0.0))
        first_link = float(record.times[k])
    final_spread = float(record.spread[-1])
    consensus_ok = bool(final_spread < cfg.consensus_tol) and not record.aborted
    threshold_ok = bool(v0 < cfg.p_gain * cfg.params().radius_energy)
    connectivity_ok = lyap_ok and links_ok and not record.aborted
    return MonitorReport(
        lyapunov_initial=v0,
        lyapunov_max=vmax,
        lyapunov_excess=vmax - v0,
        lyapunov_ok=lyap_ok,
        first_lyapunov_violation=first_v,
        margin_min=margin_min,
        links_ok=links_ok,
        first_link_violation=first_link,
        final_spread=final_spread,
        consensus_ok=consensus_ok,
        threshold_ok=threshold_ok,
        aborted=record.aborted,
        connectivity_ok=connectivity_ok,
        passed=connectivity_ok and consensus_ok,
    )


def write_csv(record: TrajectoryRecord, path) -> None:
    """Trajectory as delimited text: one row per sample, 17 significant
    digits (full float64 round-trip)."""
    cfg = record.config
    vel_label = "u" if cfg.kind == "single-integrator" else "qdot"
    cols = ["time"]
    for i in range(cfg.n_agents):
        for d in range(cfg.dim):
            cols.append(f"x{i + 1}_{d + 1}")
    for i in range(cfg.n_agents):
        for d in range(cfg.dim):
            cols.append(f"{vel_label}{i + 1}_{d + 1}")
    cols += ["V", "spread", "margin"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        S = record.times.shape[0]
        for s in range(S):
            row = [record.times[s]]
            row.extend(record.positions[s].ravel())
            row.extend(record.velocities[s].ravel())
            row.extend((record.lyapunov[s], record.spread[s], record.margin[s]))
            fh.write(",".join(f"{value:.17g}" for value in row) + "\n")
