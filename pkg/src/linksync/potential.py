"""Link potential, its gradient, and the parameter selection calculus.

The potential of a link at distance ``d`` is ``d^2 / (r^2 - d^2 + Q)`` with
broadcast radius ``r`` and barrier softness ``Q > 0``.  It is finite and
strictly increasing on [0, r], blows up only at ``sqrt(r^2 + Q)``, and its
gradient is a proportional coupling whose gain stiffens as a link
approaches the radius.

The rest of this module derives admissible parameters:

* ``barrier_ceiling``   - upper bound on Q so that the worst-case sum of
  link energies at distance r - buffer stays below the energy of a single
  link at the radius (the budget that turns "energy non-increasing" into
  "no link ever reaches the radius").
* ``mismatch_constants`` - constants (gamma, eta) bounding, componentwise,
  how much the gradient evaluated at a delayed neighbor position can
  deviate from the gradient at the current one.
* ``p_gain_floor``      - lower bound on the proportional gain so that the
  initial kinetic energy fits under the same budget.
* ``plan_parameters``   - joint search/validation returning a
  ``FeasibilityReport``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PotentialParams",
    "MismatchConstants",
    "FeasibilityReport",
    "PotentialDomainError",
    "InfeasibleParameters",
    "link_potential",
    "coupling_gain",
    "potential_gradient",
    "barrier_ceiling",
    "pair_budget_holds",
    "barrier_floor_terms",
    "mismatch_constants",
    "p_gain_floor",
    "plan_parameters",
]


class PotentialDomainError(ValueError):
    """A distance reached or passed sqrt(r^2 + Q), where the potential blows up."""


class InfeasibleParameters(ValueError):
    """The requested parameter combination violates one of the bounds."""


@dataclass(frozen=True)
class PotentialParams:
    """Geometry and gains shared by the potential and the closed loops.

    radius   broadcast radius r (m or rad)
    buffer   initial safety margin: initial neighbors sit within radius - buffer
    barrier  softness Q of the potential barrier (length^2); the potential
             at the radius equals radius^2 / barrier
    p_gain   proportional gain p multiplying every gradient term
    n_agents network size
    dim      agent state dimension n
    """

    radius: float
    buffer: float
    barrier: float
    p_gain: float = 1.0
    n_agents: int = 2
    dim: int = 1

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        if not 0.0 < self.buffer < self.radius:
            raise ValueError("buffer must lie in (0, radius)")
        if not self.barrier > 0.0:
            raise ValueError("barrier must be positive")
        if not self.p_gain > 0.0:
            raise ValueError("p_gain must be positive")
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def domain_radius(self) -> float:
        """Distance at which the potential blows up, sqrt(radius^2 + barrier)."""
        return math.sqrt(self.radius**2 + self.barrier)

    @property
    def radius_energy(self) -> float:
        """Potential of a single link at the broadcast radius, radius^2 / barrier."""
        return self.radius**2 / self.barrier


def _denominator(dist_sq: float, params: PotentialParams) -> float:
    den = params.radius**2 - dist_sq + params.barrier
    if den <= 0.0:
        raise PotentialDomainError(
            f"distance {math.sqrt(dist_sq):.6g} outside the potential domain "
            f"[0, {params.domain_radius:.6g})"
        )
    return den


def link_potential(dist: float, params: PotentialParams) -> float:
    """Energy of a link at distance ``dist``: dist^2 / (r^2 - dist^2 + Q)."""
    if dist < 0.0:
        raise ValueError("distance must be non-negative")
    d2 = float(dist) ** 2
    return d2 / _denominator(d2, params)


def coupling_gain(dist: float, params: PotentialParams) -> float:
    """State-dependent gradient gain 2(r^2 + Q) / (r^2 - dist^2 + Q)^2.

    Positive and increasing on the domain, so couplings stiffen as a link
    approaches the broadcast radius.
    """
    if dist < 0.0:
        raise ValueError("distance must be non-negative")
    den = _denominator(float(dist) ** 2, params)
    return 2.0 * (params.radius**2 + params.barrier) / den**2


def potential_gradient(xi, xj, params: PotentialParams) -> np.ndarray:
    """Gradient of the link potential with respect to the first position.

    Equals coupling_gain(|xi - xj|) * (xi - xj); the gradient with respect
    to the second position is its negative.
    """
    diff = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    den = _denominator(float(diff @ diff), params)
    return (2.0 * (params.radius**2 + params.barrier) / den**2) * diff


def barrier_ceiling(n_agents: int, radius: float, buffer: float) -> float | None:
    """Strict upper bound on the barrier keeping the link-energy budget valid.

    Returns None when the network is small enough that the budget holds for
    every positive barrier (no constraint).
    """
    if n_agents < 2:
        raise ValueError("the budget bound needs at least 2 agents")
    if not 0.0 < buffer < radius:
        raise ValueError("buffer must lie in (0, radius)")
    inner = (radius - buffer) ** 2
    lhs = n_agents * (n_agents - 1)
    if lhs <= 2.0 * radius**2 / inner:
        return None
    return 2.0 * radius**2 * (radius**2 - inner) / (lhs * inner - 2.0 * radius**2)


def pair_budget_holds(n_agents: int, radius: float, buffer: float, barrier: float) -> bool:
    """Direct check of the budget: all-pairs energy at radius - buffer stays
    strictly below the single-link energy at the radius."""
    params = PotentialParams(radius=radius, buffer=buffer, barrier=barrier)
    worst = 0.5 * n_agents * (n_agents - 1) * link_potential(radius - buffer, params)
    return worst < params.radius_energy


@dataclass(frozen=True)
class MismatchConstants:
    """Componentwise bound constants for the delayed-gradient mismatch.

    For states inside the invariant energy set and delayed positions within
    their reachable envelope, each component of the difference between the
    gradient at the current and at the delayed neighbor position is bounded
    by ``gamma * |e_k| + eta * max_k |e_k|`` where ``e`` is the neighbor
    displacement accumulated over the delay window.

    slack          headroom Delta between the barrier and the floor terms
    gamma          coefficient on the componentwise displacement
    eta            coefficient on the max-norm displacement
    barrier_floor  floor terms + slack; the barrier must not be below it
    """

    slack: float
    gamma: float
    eta: float
    barrier_floor: float


def barrier_floor_terms(params: PotentialParams, delay_bound: float) -> float:
    """Barrier mass consumed by the worst-case delayed-distance overshoot.

    2 p n^2 dbar^2 psi(r) + 2 n r dbar sqrt(2 p psi(r)), evaluated at the
    largest delay bound; the barrier must exceed this by a positive slack
    for delayed gradients to stay inside the potential domain.
    """
    if delay_bound < 0.0:
        raise ValueError("delay bound must be non-negative")
    n = params.dim
    p = params.p_gain
    r = params.radius
    peak = params.radius_energy
    return (
        2.0 * p * n**2 * delay_bound**2 * peak
        + 2.0 * n * r * delay_bound * math.sqrt(2.0 * p * peak)
    )


def mismatch_constants(
    params: PotentialParams, delay_bound: float, slack: float
) -> MismatchConstants:
    """Constants (gamma, eta) at their closed-form lower bounds.

    Raises InfeasibleParameters when the barrier cannot absorb the
    worst-case delayed overshoot plus the requested slack.
    """
    if not slack > 0.0:
        raise ValueError("slack must be positive")
    floor = barrier_floor_terms(params, delay_bound) + slack
    if params.barrier < floor:
        raise InfeasibleParameters(
            f"barrier {params.barrier:.6g} below the gradient-domain floor "
            f"{floor:.6g} (floor terms + slack {slack:.6g})"
        )
    r2q = params.radius**2 + params.barrier
    n = params.dim
    r = params.radius
    gamma = 2.0 * r2q / slack**2
    eta = (
        4.0
        * r2q**2
        * (2.0 * r + n * delay_bound * math.sqrt(2.0 * params.p_gain * params.radius_energy))
        * math.sqrt(n)
        * r
        / (params.barrier**2 * slack**2)
    )
    return MismatchConstants(slack=slack, gamma=gamma, eta=eta, barrier_floor=floor)


def p_gain_floor(
    kinetic_energy: float, n_agents: int, radius: float, buffer: float, barrier: float
) -> float:
    """Strict lower bound on the proportional gain absorbing the initial
    kinetic energy into the link-energy budget.

    Zero when the network starts at rest.  Raises InfeasibleParameters when
    the budget itself fails (barrier too large for the network size), since
    then no gain works.
    """
    if kinetic_energy < 0.0:
        raise ValueError("kinetic energy must be non-negative")
    if kinetic_energy == 0.0:
        return 0.0
    params = PotentialParams(radius=radius, buffer=buffer, barrier=barrier)
    denom = 2.0 * params.radius_energy - n_agents * (n_agents - 1) * link_potential(
        radius - buffer, params
    )
    if denom <= 0.0:
        raise InfeasibleParameters(
            "link-energy budget fails at this barrier; no proportional gain can "
            "absorb a positive kinetic energy"
        )
    return 2.0 * kinetic_energy / denom


@dataclass
class FeasibilityReport:
    """Outcome of the joint (barrier, p_gain, slack) selection.

    When ``feasible`` the triple is certified and carries its mismatch
    constants; otherwise ``violated`` names the failed inequality.
    """

    feasible: bool
    n_agents: int
    dim: int
    radius: float
    buffer: float
    delay_bound: float
    kinetic_energy: float
    barrier: float | None = None
    p_gain: float | None = None
    slack: float | None = None
    gamma: float | None = None
    eta: float | None = None
    ceiling: float | None = None
    floor_terms: float | None = None
    p_floor: float | None = None
    checks: dict = field(default_factory=dict)
    violated: str | None = None
    searched: bool = False

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "inputs": {
                "n_agents": self.n_agents,
                "dim": self.dim,
                "radius": self.radius,
                "buffer": self.buffer,
                "delay_bound": self.delay_bound,
                "kinetic_energy": self.kinetic_energy,
            },
            "barrier": self.barrier,
            "p_gain": self.p_gain,
            "slack": self.slack,
            "gamma": self.gamma,
            "eta": self.eta,
            "barrier_ceiling": self.ceiling,
            "barrier_floor_terms": self.floor_terms,
            "p_gain_floor": self.p_floor,
            "checks": dict(self.checks),
            "violated": self.violated,
            "searched": self.searched,
        }


def _ladder_below(limit: float, decades: int = 8) -> list[float]:
    """1-2-5 ladder values strictly below ``limit``, descending."""
    out = []
    exp = math.floor(math.log10(limit)) + 1
    for e in range(exp, exp - decades, -1):
        for m in (5.0, 2.0, 1.0):
            v = m * 10.0**e
            if v < limit:
                out.append(v)
    return out


def _max_ladder_p(params_proto: dict, barrier: float, delay_bound: float) -> float | None:
    """Largest 1-2-5 gain whose floor terms leave at least a third of the
    barrier as headroom.  None when even the smallest candidate fails."""
    for p in _ladder_below(1e3, decades=12):
        params = PotentialParams(barrier=barrier, p_gain=p, **params_proto)
        if barrier_floor_terms(params, delay_bound) <= (2.0 / 3.0) * barrier:
            return p
    return None


def plan_parameters(
    n_agents: int,
    dim: int,
    radius: float,
    buffer: float,
    delay_bound: float,
    kinetic_energy: float = 0.0,
    barrier: float | None = None,
    p_gain: float | None = None,
) -> FeasibilityReport:
    """Search or validate a (barrier, p_gain) pair and certify it.

    With ``barrier``/``p_gain`` given, validates that pair; otherwise walks
    a deterministic 1-2-5 ladder: the largest barrier strictly below the
    budget ceiling, then the largest gain leaving gradient-domain headroom,
    then down the barrier ladder when the kinetic-energy floor bites.  The
    slack is set to half the available headroom, balancing the size of the
    mismatch constants against the feasibility margin.

    Infeasibility is a result, not an error: the report names the violated
    inequality.
    """
    report = FeasibilityReport(
        feasible=False,
        n_agents=n_agents,
        dim=dim,
        radius=radius,
        buffer=buffer,
        delay_bound=delay_bound,
        kinetic_energy=kinetic_energy,
    )
    ceiling = barrier_ceiling(n_agents, radius, buffer) if n_agents >= 2 else None
    report.ceiling = ceiling
    proto = {"radius": radius, "buffer": buffer, "n_agents": n_agents, "dim": dim}

    def _validate(q: float, p: float) -> bool:
        report.barrier = q
        report.p_gain = p
        report.checks = {}
        report.slack = report.gamma = report.eta = None
        report.floor_terms = report.p_floor = None
        report.feasible = False
        params = PotentialParams(barrier=q, p_gain=p, **proto)
        budget_ok = ceiling is None or pair_budget_holds(n_agents, radius, buffer, q)
        report.checks["budget"] = budget_ok
        if not budget_ok:
            report.violated = "barrier at or above the budget ceiling"
            return False
        try:
            p_floor = p_gain_floor(kinetic_energy, n_agents, radius, buffer, q)
        except InfeasibleParameters:
            report.checks["gain_floor"] = False
            report.violated = "budget leaves no room for the initial kinetic energy"
            return False
        report.p_floor = p_floor
        gain_ok = p > p_floor or (p_floor == 0.0 and p > 0.0)
        report.checks["gain_floor"] = gain_ok
        if not gain_ok:
            report.violated = "p_gain at or below the kinetic-energy floor"
            return False
        floor_terms = barrier_floor_terms(params, delay_bound)
        report.floor_terms = floor_terms
        headroom_ok = q > floor_terms
        report.checks["gradient_domain"] = headroom_ok
        if not headroom_ok:
            report.violated = "barrier below the gradient-domain floor"
            return False
        slack = 0.5 * (q - floor_terms)
        constants = mismatch_constants(params, delay_bound, slack)
        report.slack = slack
        report.gamma = constants.gamma
        report.eta = constants.eta
        report.feasible = True
        report.violated = None
        return True

    if barrier is not None or p_gain is not None:
        if barrier is None or p_gain is None:
            raise ValueError("give both barrier and p_gain, or neither")
        _validate(barrier, p_gain)
        return report

    report.searched = True
    q_candidates = (
        _ladder_below(ceiling) if ceiling is not None else [radius**2]
    )
    for q in q_candidates[:10]:
        p = _max_ladder_p(proto, q, delay_bound)
        if p is None:
            continue
        try:
            p_floor = p_gain_floor(kinetic_energy, n_agents, radius, buffer, q)
        except InfeasibleParameters:
            continue
        if not (p > p_floor or (p_floor == 0.0 and p > 0.0)):
            continue
        if _validate(q, p):
            return report
    report.feasible = False
    if report.violated is None:
        report.violated = (
            "no ladder pair satisfies the kinetic-energy floor together with "
            "the gradient-domain headroom"
        )
    return report
