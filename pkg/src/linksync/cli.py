"""Command-line front end: scenario configs in, CSV/report/figures out.

Subcommands:
  run <config>         integrate a scenario, emit trajectory CSV, a JSON run
                       report, and (with --svg) SVG figures
  check-gains <config> evaluate the damping certificate only
  feasibility <config> validate the configured parameters and search for a
                       feasible alternative
  verify               randomized integral-inequality suites

Exit codes: 0 pass, 1 monitor or certificate failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import TwoLinkArm
from .potential import mismatch_constants, plan_parameters
from .simulator import (
    GainCheckError,
    ScenarioConfig,
    initial_kinetic_energy,
    monitors,
    run_scenario,
    write_csv,
)
from .verify import (
    damping_certificate,
    delay_cross_term_residual,
    maxnorm_cross_term_residual,
)

__all__ = ["ConfigError", "parse_config", "parse_config_dict", "bundled_config_path", "main"]


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


_TOP_KEYS = {
    "name": str,
    "kind": str,
    "n_agents": int,
    "dim": int,
    "initial_positions": list,
    "initial_velocities": list,
    "radius": (int, float),
    "buffer": (int, float),
    "edge_threshold": (int, float),
    "barrier": (int, float),
    "p_gain": (int, float),
    "damping": list,
    "delay_bound": (int, float, list),
    "delay": dict,
    "step": (int, float),
    "horizon": (int, float),
    "decimation": int,
    "arm": dict,
    "consensus_tol": (int, float),
    "lyapunov_rel_tol": (int, float),
    "gain_check": str,
}

_REQUIRED = ("name", "kind", "n_agents", "dim", "initial_positions",
             "radius", "buffer", "barrier", "damping", "delay_bound",
             "step", "horizon")

_DELAY_KEYS = {
    "kind": str,
    "frequency": (int, float),
    "seed": int,
    "step_std": (int, float),
    "grid": (int, float),
}

_ARM_KEYS = {
    "m1": (int, float),
    "m2": (int, float),
    "l1": (int, float),
    "l2": (int, float),
    "gravity": (int, float),
}


def _check_keys(data: dict, allowed: dict, path: str) -> None:
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"{path}{key}: unknown key")
        if not isinstance(value, allowed[key]) or isinstance(value, bool):
            want = allowed[key]
            names = (
                "/".join(t.__name__ for t in want)
                if isinstance(want, tuple)
                else want.__name__
            )
            raise ConfigError(f"{path}{key}: expected {names}")


def parse_config_dict(data: dict) -> ScenarioConfig:
    """Validate a config mapping and build a ScenarioConfig.

    Unknown keys are rejected; every applied default is recorded in the
    config's ``defaults_applied``.
    """
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    _check_keys(data, _TOP_KEYS, "")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(f"{key}: required key missing")

    defaults: dict = {}

    def _get(key, fallback):
        if key in data:
            return data[key]
        defaults[key] = fallback
        return fallback

    n_agents = data["n_agents"]
    dim = data["dim"]
    delay = data.get("delay")
    if delay is None:
        delay = {"kind": "sinusoidal", "frequency": 1.0, "seed": 0,
                 "step_std": 0.02, "grid": 0.01}
        defaults["delay"] = dict(delay)
    else:
        _check_keys(delay, _DELAY_KEYS, "delay.")
        delay = dict(delay)
        for key, value in (("kind", "sinusoidal"), ("frequency", 1.0), ("seed", 0),
                           ("step_std", 0.02), ("grid", 0.01)):
            if key not in delay:
                delay[key] = value
                defaults[f"delay.{key}"] = value

    arm = None
    if data["kind"] == "euler-lagrange":
        if "arm" not in data:
            raise ConfigError("arm: required for euler-lagrange configs")
        _check_keys(data["arm"], _ARM_KEYS, "arm.")
        arm_data = dict(data["arm"])
        if "gravity" not in arm_data:
            arm_data["gravity"] = 9.81
            defaults["arm.gravity"] = 9.81
        missing = [k for k in ("m1", "m2", "l1", "l2") if k not in arm_data]
        if missing:
            raise ConfigError(f"arm.{missing[0]}: required key missing")
        try:
            arm = TwoLinkArm(**arm_data)
        except ValueError as exc:
            raise ConfigError(f"arm: {exc}") from exc
    elif "arm" in data:
        raise ConfigError("arm: only valid for euler-lagrange configs")

    kwargs = dict(
        name=data["name"],
        kind=data["kind"],
        n_agents=n_agents,
        dim=dim,
        initial_positions=data["initial_positions"],
        initial_velocities=_get(
            "initial_velocities", [[0.0] * dim for _ in range(n_agents)]
        ),
        radius=float(data["radius"]),
        buffer=float(data["buffer"]),
        edge_threshold=float(
            _get("edge_threshold", float(data["radius"]) - float(data["buffer"]))
        ),
        barrier=float(data["barrier"]),
        p_gain=float(_get("p_gain", 1.0)),
        damping=data["damping"],
        delay_bound=data["delay_bound"],
        delay_kind=delay["kind"],
        delay_frequency=float(delay["frequency"]),
        delay_seed=int(delay["seed"]),
        delay_step_std=float(delay["step_std"]),
        delay_grid=float(delay["grid"]),
        step=float(data["step"]),
        horizon=float(data["horizon"]),
        decimation=int(_get("decimation", 10)),
        arm=arm,
        consensus_tol=float(_get("consensus_tol", 1e-2)),
        lyapunov_rel_tol=float(_get("lyapunov_rel_tol", 1e-3)),
        gain_check=_get("gain_check", "enforce"),
        defaults_applied=defaults,
    )
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ScenarioConfig:
    """Load and validate a JSON scenario config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config_dict(data)


def bundled_config_path(name: str) -> Path:
    """Path of a packaged scenario config (``si_line5`` or ``el_arm5``)."""
    ref = resources.files("linksync") / "configs" / f"{name}.json"
    return Path(str(ref))


def _apply_overrides(cfg: ScenarioConfig, args) -> tuple[ScenarioConfig, dict]:
    overrides = {}
    data = cfg.to_dict()
    if args.seed is not None:
        data["delay"]["seed"] = args.seed
        overrides["delay.seed"] = args.seed
    if args.step is not None:
        data["step"] = args.step
        overrides["step"] = args.step
    if args.horizon is not None:
        data["horizon"] = args.horizon
        overrides["horizon"] = args.horizon
    if overrides:
        cfg = parse_config_dict(data)
    return cfg, overrides


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    cfg, overrides = _apply_overrides(cfg, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        record = run_scenario(cfg)
    except GainCheckError as exc:
        print(f"gain check failed: {exc}", file=sys.stderr)
        return 1
    report = monitors(record)

    csv_path = out_dir / f"{cfg.name}_trajectory.csv"
    write_csv(record, csv_path)
    artifacts = {"csv": str(csv_path)}
    if args.svg:
        from .plots import save_distance_figure, save_position_figure

        pos_path = out_dir / f"{cfg.name}_positions.svg"
        dist_path = out_dir / f"{cfg.name}_distances.svg"
        save_position_figure(record, pos_path)
        save_distance_figure(record, dist_path)
        artifacts["figures"] = [str(pos_path), str(dist_path)]

    payload = {
        "scenario": cfg.to_dict(),
        "defaults_applied": cfg.defaults_applied,
        "overrides": overrides,
        "graph": {
            "edges": [list(e) for e in record.graph.edges],
            "connected": record.meta["connected"],
            "edge_threshold": cfg.edge_threshold,
        },
        "delays": {
            "kind": cfg.delay_kind,
            "seeds": record.meta["delay_seeds"],
            "phases": record.meta["delay_phases"],
        },
        "gain_check": record.gain_check,
        "monitors": report.to_dict(),
        "abort": record.abort.to_dict() if record.abort else None,
        "artifacts": artifacts,
        "wall_time_seconds": record.wall_time,
    }
    report_path = out_dir / f"{cfg.name}_report.json"
    report_path.write_text(json.dumps(payload, indent=2))

    print(f"run {cfg.name}: wrote {csv_path} and {report_path}")
    print(
        f"  links_ok={report.links_ok} lyapunov_ok={report.lyapunov_ok} "
        f"final_spread={report.final_spread:.3e} margin_min={report.margin_min:.3f}"
    )
    if record.abort:
        print(f"  aborted at t={record.abort.time:.3f}: {record.abort.reason}")
    # consensus at a finite horizon is reported, not gated on: the hard
    # safety verdicts are link maintenance and energy boundedness
    return 0 if report.connectivity_ok else 1


def _certificate_payload(cfg: ScenarioConfig) -> tuple[dict, bool]:
    graph = cfg.graph()
    ke0 = initial_kinetic_energy(cfg)
    dbar_max = float(cfg.delay_bound.max())
    plan = plan_parameters(
        n_agents=cfg.n_agents, dim=cfg.dim, radius=cfg.radius, buffer=cfg.buffer,
        delay_bound=dbar_max, kinetic_energy=ke0,
        barrier=cfg.barrier, p_gain=cfg.p_gain,
    )
    payload = {"feasibility": plan.to_dict(), "certificate": None}
    if not plan.feasible:
        return payload, False
    constants = mismatch_constants(cfg.params(), dbar_max, plan.slack)
    cert = damping_certificate(cfg.gains(), cfg.params(), cfg.delay_bound, constants, graph)
    payload["certificate"] = cert.to_dict()
    return payload, bool(cert.passed)


def _cmd_check_gains(args) -> int:
    cfg = parse_config(args.config)
    payload, passed = _certificate_payload(cfg)
    if payload["certificate"] is None:
        print(
            "no certificate: parameter plan infeasible "
            f"({payload['feasibility']['violated']})"
        )
    else:
        cert = payload["certificate"]
        for i, (k, b, ok) in enumerate(
            zip(cert["k_min"], cert["bounds"], cert["agent_pass"])
        ):
            print(f"  agent {i + 1}: k_min={k:.6g} bound={b:.6g} {'ok' if ok else 'FAIL'}")
        print(f"certificate {'passed' if passed else 'FAILED'}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{cfg.name}_gains.json").write_text(json.dumps(payload, indent=2))
    return 0 if passed else 1


def _cmd_feasibility(args) -> int:
    cfg = parse_config(args.config)
    ke0 = initial_kinetic_energy(cfg)
    dbar_max = float(cfg.delay_bound.max())
    inputs = dict(
        n_agents=cfg.n_agents, dim=cfg.dim, radius=cfg.radius, buffer=cfg.buffer,
        delay_bound=dbar_max, kinetic_energy=ke0,
    )
    configured = plan_parameters(barrier=cfg.barrier, p_gain=cfg.p_gain, **inputs)
    suggestion = plan_parameters(**inputs)
    payload = {
        "configured": configured.to_dict(),
        "search": suggestion.to_dict(),
    }
    if configured.feasible:
        print(
            f"configured pair feasible: barrier={configured.barrier} "
            f"p_gain={configured.p_gain} slack={configured.slack:.6g} "
            f"gamma={configured.gamma:.6g} eta={configured.eta:.6g}"
        )
    else:
        print(f"configured pair infeasible: {configured.violated}")
        if suggestion.feasible:
            print(
                f"search suggests barrier={suggestion.barrier} p_gain={suggestion.p_gain}"
            )
        else:
            print(f"search found no feasible pair: {suggestion.violated}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{cfg.name}_feasibility.json").write_text(json.dumps(payload, indent=2))
    return 0 if configured.feasible else 1


def _random_signal(rng, t, dim):
    out = np.zeros((t.size, dim))
    for d in range(dim):
        for _ in range(3):
            amp = rng.uniform(0.1, 2.0)
            freq = rng.uniform(0.2, 4.0)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            out[:, d] += amp * np.sin(2.0 * math.pi * freq * t + phase)
    return out


def run_inequality_suites(trials: int, seed: int, rel_tol: float = 1e-8) -> dict:
    """Randomized residual suites for both integral cross-term bounds.

    Returns the worst relative residuals; both must be >= -rel_tol.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = {"delay_cross_term": np.inf, "maxnorm_cross_term": np.inf}
    for _ in range(trials):
        dim = int(rng.integers(1, 4))
        dt = 1e-3
        steps = int(rng.integers(500, 1500))
        t = np.arange(steps) * dt
        dbar = float(rng.uniform(0.0, 0.3))
        d = dbar * (1.0 + np.sin(2.0 * math.pi * rng.uniform(0.2, 3.0) * t
                                 + rng.uniform(0.0, 2.0 * math.pi))) / 2.0
        alpha = float(10.0 ** rng.uniform(-2.0, 2.0))
        x = _random_signal(rng, t, dim)
        y = _random_signal(rng, t, dim)
        r1 = delay_cross_term_residual(t, x, y, d, alpha, dbar)
        r2 = maxnorm_cross_term_residual(t, x, y, d, alpha, dbar)
        worst["delay_cross_term"] = min(worst["delay_cross_term"], r1.relative_residual)
        worst["maxnorm_cross_term"] = min(worst["maxnorm_cross_term"], r2.relative_residual)
    worst["passed"] = bool(
        worst["delay_cross_term"] >= -rel_tol and worst["maxnorm_cross_term"] >= -rel_tol
    )
    worst["trials"] = trials
    worst["seed"] = seed
    return worst


def _cmd_verify(args) -> int:
    result = run_inequality_suites(args.trials, args.seed)
    print(
        f"delay cross-term worst relative residual:   {result['delay_cross_term']:.3e}"
    )
    print(
        f"maxnorm cross-term worst relative residual: {result['maxnorm_cross_term']:.3e}"
    )
    print(f"{result['trials']} trials, seed {result['seed']}: "
          f"{'passed' if result['passed'] else 'FAILED'}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "verify_report.json").write_text(json.dumps(result, indent=2))
    return 0 if result["passed"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="linksync",
        description="Delayed multi-agent coordination: simulate, certify, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a scenario and emit artifacts")
    p_run.add_argument("config", help="path to a scenario JSON config")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--svg", action="store_true", help="also render SVG figures")
    p_run.add_argument("--seed", type=int, default=None, help="override the delay seed")
    p_run.add_argument("--step", type=float, default=None, help="override the step (s)")
    p_run.add_argument("--horizon", type=float, default=None, help="override the horizon (s)")

    p_gains = sub.add_parser("check-gains", help="evaluate the damping certificate")
    p_gains.add_argument("config")
    p_gains.add_argument("--out", default=None)

    p_feas = sub.add_parser("feasibility", help="parameter feasibility check and search")
    p_feas.add_argument("config")
    p_feas.add_argument("--out", default=None)

    p_verify = sub.add_parser("verify", help="randomized inequality suites")
    p_verify.add_argument("--trials", type=int, default=1000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2

    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check-gains":
            return _cmd_check_gains(args)
        if args.command == "feasibility":
            return _cmd_feasibility(args)
        if args.command == "verify":
            return _cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


def entry() -> None:
    sys.exit(main())
