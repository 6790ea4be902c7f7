import math

import numpy as np
import pytest

from linksync.dynamics import DampingGains
from linksync.graph import CommGraph
from linksync.potential import MismatchConstants, PotentialParams
from linksync.verify import (
    damping_certificate,
    delay_cross_term_residual,
    maxnorm_cross_term_residual,
    optimal_alpha,
    optimal_alphas,
    trajectory_mismatch_check,
)


def toy_constants(gamma, eta, slack=1.0):
    return MismatchConstants(slack=slack, gamma=gamma, eta=eta, barrier_floor=0.0)


def test_optimal_alpha_recovers_scalar_minimum():
    # a = p(gamma+eta)/2 = 1 and b = p(gamma+n eta) dbar^2/2 = 0.01 with
    # p = 2, gamma = 1, eta = 0, dbar = 0.1: the optimum of a*x + b/x
    alpha = optimal_alpha(gamma=1.0, eta=0.0, dim=2, dbar=0.1)
    assert math.isclose(alpha, 0.1, rel_tol=1e-14)
    a, b = 1.0, 0.01
    assert math.isclose(a * alpha + b / alpha, 0.2, rel_tol=1e-14)


def test_optimal_alpha_equals_dbar_when_symmetric():
    assert math.isclose(optimal_alpha(gamma=3.3, eta=3.3, dim=1, dbar=0.07),
                        0.07, rel_tol=1e-14)


def test_optimal_alpha_beats_grid_search():
    rng = np.random.Generator(np.random.PCG64(2))
    grid = np.logspace(-4, 4, 4000)
    for _ in range(100):
        gamma = float(10.0 ** rng.uniform(-2, 3))
        eta = float(10.0 ** rng.uniform(-2, 3))
        dim = int(rng.integers(1, 4))
        dbar = float(rng.uniform(0.01, 0.5))
        a = (gamma + eta) / 2.0
        b = (gamma + dim * eta) * dbar**2 / 2.0
        alpha = optimal_alpha(gamma, eta, dim, dbar)
        best = float(np.min(a * grid + b / grid))
        assert a * alpha + b / alpha <= best + 1e-9 * best


def test_optimal_alpha_floor_when_delay_free():
    alpha = optimal_alpha(gamma=1.0, eta=1.0, dim=1, dbar=0.0)
    assert alpha > 0.0


def test_certificate_toy_bound():
    # two agents, one edge each way: bound = p(gamma+eta)/2 alpha
    # + p(gamma+n eta) dbar^2 / (2 alpha) = 1 + 0.01 with everything at 1
    g = CommGraph(2, ((0, 1),))
    params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2, p_gain=1.0,
                             n_agents=2, dim=1)
    constants = toy_constants(gamma=1.0, eta=1.0)
    dbar = np.full((2, 2), 0.1)
    alphas = np.full((2, 2), 1.0)
    for k, ok in ((1.02, True), (1.0, False)):
        gains = DampingGains(diag=np.full((2, 1), k))
        cert = damping_certificate(gains, params, dbar, constants, g, alphas=alphas)
        assert np.allclose(cert.bounds, 1.01, rtol=1e-14)
        assert cert.passed is ok


def test_certificate_delay_free_degenerates():
    g = CommGraph(2, ((0, 1),))
    params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2, p_gain=1.0,
                             n_agents=2, dim=1)
    constants = toy_constants(gamma=1.0, eta=1.0)
    dbar = np.zeros((2, 2))
    cert = damping_certificate(
        DampingGains(diag=np.full((2, 1), 1e-6)), params, dbar, constants, g
    )
    # cross terms vanish and the optimal alphas shrink the rest to nothing
    assert np.all(cert.bounds < 1e-9)
    assert cert.passed


def test_certificate_rejects_nonpositive_alpha():
    g = CommGraph(2, ((0, 1),))
    params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2, p_gain=1.0,
                             n_agents=2, dim=1)
    with pytest.raises(ValueError):
        damping_certificate(
            DampingGains(diag=np.ones((2, 1))), params, np.full((2, 2), 0.1),
            toy_constants(1.0, 1.0), g, alphas=np.zeros((2, 2)),
        )


def test_certificate_column_sums_equal_margins():
    # the column-sum form and the per-agent bound form are the same test
    rng = np.random.Generator(np.random.PCG64(13))
    for _ in range(50):
        n = int(rng.integers(2, 8))
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.5:
                    edges.append((i, j))
        if not edges:
            edges = [(0, 1)]
        g = CommGraph(n, tuple(edges))
        dim = int(rng.integers(1, 3))
        params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2,
                                 p_gain=float(rng.uniform(0.01, 2.0)),
                                 n_agents=n, dim=dim)
        constants = toy_constants(float(rng.uniform(0.1, 100.0)),
                                  float(rng.uniform(0.1, 1e4)))
        dbar = rng.uniform(0.0, 0.2, size=(n, n))
        alphas = np.zeros((n, n))
        for i, j in g.directed_edges():
            alphas[i, j] = rng.uniform(0.01, 5.0)
        gains = DampingGains(diag=rng.uniform(0.1, 500.0, size=(n, dim)))
        cert = damping_certificate(gains, params, dbar, constants, g, alphas=alphas)
        margins = cert.k_min - cert.bounds
        assert np.allclose(cert.column_sums, margins, rtol=1e-12, atol=1e-12)
        assert bool(np.all(cert.column_sums > 0.0)) == cert.passed


def test_certificate_cross_term_orientation():
    # the damping burden of a delayed channel falls on the *sender*: with
    # only agent 1's data delayed (agent 0 sees stale data), agent 1's
    # bound carries the cross term and agent 0's does not
    g = CommGraph(2, ((0, 1),))
    params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2, p_gain=1.0,
                             n_agents=2, dim=1)
    constants = toy_constants(gamma=1.0, eta=1.0)
    dbar = np.zeros((2, 2))
    dbar[0, 1] = 0.2  # age of agent 1's position as seen by agent 0
    alphas = np.full((2, 2), 1.0)
    cert = damping_certificate(
        DampingGains(diag=np.ones((2, 1))), params, dbar, constants, g, alphas=alphas
    )
    base = 1.0  # alpha p (gamma+eta) / 2
    cross = 1.0 * (1.0 + 1.0) * 0.2**2 / 2.0
    assert math.isclose(cert.bounds[0], base, rel_tol=1e-14)
    assert math.isclose(cert.bounds[1], base + cross, rel_tol=1e-14)
    # off-diagonal sparsity pattern mirrors the receiving channel
    assert math.isclose(cert.phi[0, 1], -cross, rel_tol=1e-14)
    assert cert.phi[1, 0] == 0.0


def test_optimized_alphas_never_worse_than_unit():
    rng = np.random.Generator(np.random.PCG64(4))
    for _ in range(30):
        n = int(rng.integers(2, 7))
        edges = [(i, i + 1) for i in range(n - 1)]
        g = CommGraph(n, tuple(edges))
        params = PotentialParams(radius=1.0, buffer=0.4, barrier=0.2,
                                 p_gain=float(rng.uniform(0.05, 1.5)),
                                 n_agents=n, dim=2)
        constants = toy_constants(float(rng.uniform(1.0, 50.0)),
                                  float(rng.uniform(1.0, 1e3)))
        dbar = np.full((n, n), float(rng.uniform(0.01, 0.2)))
        unit = np.ones((n, n))
        cert_unit = damping_certificate(
            DampingGains(diag=np.ones((n, 2))), params, dbar, constants, g, alphas=unit
        )
        cert_opt = damping_certificate(
            DampingGains(diag=np.ones((n, 2))), params, dbar, constants, g,
            alphas=optimal_alphas(constants, 2, dbar, g),
        )
        assert np.all(cert_opt.bounds <= cert_unit.bounds + 1e-12)


def grid(n_points=1501, dt=1e-3):
    return np.arange(n_points) * dt


def test_cross_term_equality_case():
    # constant equal signals, constant delay at the bound, alpha = dbar:
    # both sides evaluate to 2 |c|^2 dbar T
    t = grid(2001)
    dbar = 0.3
    c = np.full((t.size, 2), 1.3)
    d = np.full(t.size, dbar)
    res = delay_cross_term_residual(t, c, c, d, alpha=dbar, dbar=dbar)
    expected = 2 * (1.3**2 * 2) * dbar * t[-1]
    assert math.isclose(res.lhs, expected, rel_tol=1e-10)
    assert abs(res.relative_residual) < 1e-10


def test_cross_term_zero_y():
    t = grid()
    rng = np.random.Generator(np.random.PCG64(1))
    x = rng.normal(size=(t.size, 2))
    y = np.zeros((t.size, 2))
    d = np.full(t.size, 0.1)
    res = delay_cross_term_residual(t, x, y, d, alpha=0.7, dbar=0.1)
    assert res.lhs == 0.0
    assert res.residual >= 0.0


def test_maxnorm_zero_y_residual_is_alpha_half_l2x():
    t = grid()
    rng = np.random.Generator(np.random.PCG64(2))
    x = rng.normal(size=(t.size, 3))
    y = np.zeros((t.size, 3))
    d = np.full(t.size, 0.05)
    alpha = 1.3
    res = maxnorm_cross_term_residual(t, x, y, d, alpha=alpha, dbar=0.05)
    assert res.lhs == 0.0
    l2x = np.trapezoid(np.sum(x * x, axis=1), t)
    assert math.isclose(res.residual, 0.5 * alpha * l2x, rel_tol=1e-12)


def test_maxnorm_tuned_constant_case_is_tight():
    t = grid(2001)
    dbar = 0.3
    c1, c2 = 0.8, -1.7
    x = np.full((t.size, 1), c1)
    y = np.full((t.size, 1), c2)
    d = np.full(t.size, dbar)
    alpha = abs(c2) * dbar / abs(c1)
    res = maxnorm_cross_term_residual(t, x, y, d, alpha=alpha, dbar=dbar)
    assert res.residual >= -1e-10 * res.scale
    assert abs(res.relative_residual) < 1e-10


def test_randomized_inequality_suites_small():
    from linksync.cli import run_inequality_suites

    result = run_inequality_suites(trials=150, seed=123)
    assert result["passed"]
    assert result["delay_cross_term"] >= -1e-8
    assert result["maxnorm_cross_term"] >= -1e-8


def test_trajectory_mismatch_check_flags_violations():
    from linksync.simulator import ScenarioConfig, run_scenario

    cfg = ScenarioConfig(
        name="probe",
        kind="single-integrator",
        n_agents=2,
        dim=1,
        initial_positions=[[0.0], [0.5]],
        initial_velocities=[[0.3], [-0.3]],
        radius=1.0,
        buffer=0.4,
        edge_threshold=0.6,
        barrier=0.2,
        p_gain=1.0,
        damping=[[5.0], [5.0]],
        delay_bound=0.05,
        step=1e-3,
        horizon=0.5,
        decimation=5,
        gain_check="bypass",
    )
    record = run_scenario(cfg)
    generous = toy_constants(gamma=1e4, eta=1e4)
    assert trajectory_mismatch_check(record, generous).ok
    # constants too small to dominate the actual gradient slope get flagged
    stingy = toy_constants(gamma=1e-6, eta=1e-6)
    report = trajectory_mismatch_check(record, stingy)
    assert not report.ok
    assert report.max_violation > 0.0


def test_grid_validation():
    t = grid()
    x = np.zeros((t.size, 1))
    d = np.zeros(t.size)
    with pytest.raises(ValueError):
        delay_cross_term_residual(t + 0.5, x, x, d, 1.0, 0.1)
    with pytest.raises(ValueError):
        delay_cross_term_residual(t[:100], x, x, d, 1.0, 0.1)
    with pytest.raises(ValueError):
        delay_cross_term_residual(t, x, x, d + 0.2, 1.0, 0.1)
    with pytest.raises(ValueError):
        delay_cross_term_residual(t, x, x, d, -1.0, 0.1)
