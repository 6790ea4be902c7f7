"""Agent models and control laws.

Two network types share the same proportional-plus-damping structure:

* single-integrator agents with a first-order filter state: the position
  integrates the filter state, and the filter integrates the negative
  delayed potential gradient minus a damping term.  The closed loop is a
  damped second-order network.
* two-link planar arms (revolute joints, point masses at the distal link
  ends) driven by gravity-compensated torques with the same delayed
  gradient plus joint damping.

Gradients are always evaluated between the agent's current position and
the neighbor's delayed position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import CommGraph
from .potential import PotentialParams, link_potential, potential_gradient

__all__ = [
    "DampingGains",
    "TwoLinkArm",
    "si_closed_loop_derivative",
    "arm_matrices",
    "gravity_torque",
    "arm_control_torque",
    "arm_forward_dynamics",
    "arm_potential_energy",
    "arm_kinetic_energy",
    "arm_total_energy",
    "el_closed_loop_derivative",
    "network_interaction_energy",
]


@dataclass(frozen=True)
class DampingGains:
    """Per-agent positive diagonal damping, one row per agent."""

    diag: np.ndarray  # (n_agents, dim)

    def __post_init__(self) -> None:
        diag = np.asarray(self.diag, dtype=float)
        if diag.ndim != 2:
            raise ValueError("damping gains must be an (n_agents, dim) array")
        if not np.all(np.isfinite(diag)) or not np.all(diag > 0.0):
            raise ValueError("every damping entry must be positive and finite")
        object.__setattr__(self, "diag", diag)

    @property
    def k_min(self) -> np.ndarray:
        """Smallest diagonal entry per agent (the eigenvalue used in bounds)."""
        return self.diag.min(axis=1)


def si_closed_loop_derivative(
    positions: np.ndarray,
    filter_state: np.ndarray,
    delayed: np.ndarray,
    gains: DampingGains,
    params: PotentialParams,
    graph: CommGraph,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop derivative of the filtered single-integrator network.

    ``delayed`` holds one delayed sender position per directed edge, in
    ``graph.directed_edges()`` order.  Returns (d positions, d filter).
    """
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(filter_state, dtype=float)
    dx = vel.copy()
    du = -gains.diag * vel
    for e, (i, _j) in enumerate(graph.directed_edges()):
        du[i] -= params.p_gain * potential_gradient(pos[i], delayed[e], params)
    return dx, du


@dataclass(frozen=True)
class TwoLinkArm:
    """Planar 2-DOF arm with point masses at the distal ends of both links.

    Gravity acts along the negative second plane axis; setting
    ``gravity=0`` turns the arm into a free double pendulum in the plane,
    which the energy-conservation tests use.
    """

    m1: float = 0.5
    m2: float = 0.5
    l1: float = 1.0
    l2: float = 1.0
    gravity: float = 9.81

    def __post_init__(self) -> None:
        for name in ("m1", "m2", "l1", "l2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def arm_matrices(
    model: TwoLinkArm, q: np.ndarray, qdot: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inertia M(q), Coriolis C(q, qdot), and gravity torque g(q).

    M is symmetric positive definite with configuration-independent
    eigenvalue bounds; M' - 2C is skew-symmetric (C uses the Christoffel
    convention).
    """
    m1, m2, l1, l2, grav = model.m1, model.m2, model.l1, model.l2, model.gravity
    c2 = math.cos(q[1])
    mass = np.array(
        [
            [(m1 + m2) * l1**2 + m2 * l2**2 + 2.0 * m2 * l1 * l2 * c2,
             m2 * l2**2 + m2 * l1 * l2 * c2],
            [m2 * l2**2 + m2 * l1 * l2 * c2, m2 * l2**2],
        ]
    )
    hcor = m2 * l1 * l2 * math.sin(q[1])
    cor = np.array(
        [
            [-hcor * qdot[1], -hcor * (qdot[0] + qdot[1])],
            [hcor * qdot[0], 0.0],
        ]
    )
    return mass, cor, gravity_torque(model, q)


def gravity_torque(model: TwoLinkArm, q: np.ndarray) -> np.ndarray:
    m1, m2, l1, l2, grav = model.m1, model.m2, model.l1, model.l2, model.gravity
    c1 = math.cos(q[0])
    c12 = math.cos(q[0] + q[1])
    return np.array(
        [
            (m1 + m2) * grav * l1 * c1 + m2 * grav * l2 * c12,
            m2 * grav * l2 * c12,
        ]
    )


def arm_potential_energy(model: TwoLinkArm, q: np.ndarray) -> float:
    """Gravitational potential with both masses measured from joint height."""
    m1, m2, l1, l2, grav = model.m1, model.m2, model.l1, model.l2, model.gravity
    return (m1 + m2) * grav * l1 * math.sin(q[0]) + m2 * grav * l2 * math.sin(q[0] + q[1])


def arm_kinetic_energy(model: TwoLinkArm, q: np.ndarray, qdot: np.ndarray) -> float:
    mass, _, _ = arm_matrices(model, q, qdot)
    return 0.5 * float(qdot @ mass @ qdot)


def arm_total_energy(model: TwoLinkArm, q: np.ndarray, qdot: np.ndarray) -> float:
    return arm_kinetic_energy(model, q, qdot) + arm_potential_energy(model, q)


def arm_control_torque(
    q: np.ndarray,
    qdot: np.ndarray,
    delayed_neighbors: np.ndarray,
    damping_diag: np.ndarray,
    params: PotentialParams,
    model: TwoLinkArm,
) -> np.ndarray:
    """Gravity-compensated proportional-plus-damping torque for one arm.

    ``delayed_neighbors`` stacks the delayed joint positions of this
    agent's neighbors, one row each (possibly zero rows).
    """
    tau = gravity_torque(model, q) - np.asarray(damping_diag, dtype=float) * qdot
    neighbors = np.asarray(delayed_neighbors, dtype=float).reshape(-1, len(q))
    for xjd in neighbors:
        tau -= params.p_gain * potential_gradient(q, xjd, params)
    return tau


def arm_forward_dynamics(
    model: TwoLinkArm, q: np.ndarray, qdot: np.ndarray, tau: np.ndarray
) -> np.ndarray:
    """Joint accelerations M^{-1} (tau - C qdot - g)."""
    mass, cor, grav = arm_matrices(model, q, qdot)
    rhs = np.asarray(tau, dtype=float) - cor @ qdot - grav
    det = mass[0, 0] * mass[1, 1] - mass[0, 1] * mass[1, 0]
    return np.array(
        [
            (mass[1, 1] * rhs[0] - mass[0, 1] * rhs[1]) / det,
            (-mass[1, 0] * rhs[0] + mass[0, 0] * rhs[1]) / det,
        ]
    )


def el_closed_loop_derivative(
    positions: np.ndarray,
    velocities: np.ndarray,
    delayed: np.ndarray,
    gains: DampingGains,
    params: PotentialParams,
    model: TwoLinkArm,
    graph: CommGraph,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop derivative of the arm network.

    Composes the per-agent control torque with the forward dynamics;
    ``delayed`` is laid out as in :func:`si_closed_loop_derivative`.
    """
    q = np.asarray(positions, dtype=float)
    qd = np.asarray(velocities, dtype=float)
    n_agents = q.shape[0]
    dq = qd.copy()
    dqd = np.empty_like(qd)
    directed = graph.directed_edges()
    for i in range(n_agents):
        rows = [delayed[e] for e, (recv, _s) in enumerate(directed) if recv == i]
        stacked = np.array(rows) if rows else np.zeros((0, q.shape[1]))
        tau = arm_control_torque(q[i], qd[i], stacked, gains.diag[i], params, model)
        dqd[i] = arm_forward_dynamics(model, q[i], qd[i], tau)
    return dq, dqd


def network_interaction_energy(
    positions: np.ndarray, params: PotentialParams, graph: CommGraph
) -> float:
    """Sum of link potentials over the (undirected) edges."""
    pos = np.asarray(positions, dtype=float)
    total = 0.0
    for a, b in graph.edges:
        total += link_potential(float(np.linalg.norm(pos[a] - pos[b])), params)
    return total
