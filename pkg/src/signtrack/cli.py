"""Command-line interface: configuration, orchestration, and output files.

Subcommands: ``track`` (one trajectory CSV per algorithm), ``mse``
(per-iterate error curve plus bound summary), ``limits`` (ODE deviation
pair, scaled-error series, and diffusion summary), ``cumavg`` (cumulative
averages of parameter and estimates), ``selftest`` (built-in battery of
closed-form and determinism checks).

All outputs are deterministic functions of (config, master seed): files are
byte-identical across repeated runs and across ``--threads`` settings.
Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 selftest failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    DEFAULT_MASTER_SEED,
    RunConfig,
    config_digest,
    load_config,
    preset_config,
)
from .csvio import write_csv, write_json
from .errors import ConfigError, DivergenceDetected, SigntrackError
from .experiment import (
    Scenario,
    burn_in_default,
    diffusion_check,
    mse_bound,
    mse_curve,
    ode_deviation,
    replication_stream,
    scaled_error,
)
from .filters import run_tracking
from .limits import (
    KIND_SWITCHED,
    effective_matrix,
    field_equilibrium,
    limit_system_for,
    lyapunov_solve,
    matrix_sqrt_psd,
    noise_covariance,
)
from .regime import (
    GeneratorMatrix,
    RegimeModel,
    mean_parameter,
    stationary_distribution,
    transition_matrix,
)

__all__ = ["main"]


def _component_names(base: str, r: int) -> list[str]:
    return [base] if r == 1 else [f"{base}_{i + 1}" for i in range(r)]


def _preamble(cfg: RunConfig, command: str) -> dict:
    return {
        "config_hash": config_digest(cfg),
        "master_seed": cfg.master_seed,
        "command": command,
    }


def cmd_track(cfg: RunConfig, out: Path, threads: int) -> int:
    regime = cfg.regime()
    signal = cfg.signal
    n = cfg.n_steps
    r = regime.dim
    mu = cfg.mu
    alpha_names = _component_names("alpha", r)
    for algo in cfg.algorithms:
        traj = run_tracking(
            regime, signal, cfg.filter_for(algo), n, replication_stream(cfg.master_seed, 0)
        )
        alpha = regime.states[traj.chain.indices]
        theta_names = _component_names(f"theta_{algo}", r)
        columns = ["n", "t", *alpha_names, *theta_names, "y"]
        rows = [
            [k, k * mu, *alpha[k], *traj.thetas[k], traj.observations[k]]
            for k in range(n)
        ]
        write_csv(out / f"track_{algo}.csv", columns, rows, _preamble(cfg, "track"))
    return 0


def cmd_mse(cfg: RunConfig, out: Path, threads: int) -> int:
    grid = cfg.mu_grid if cfg.mu_grid is not None else (cfg.mu,)
    algo = cfg.algorithms[0]
    entries = []
    for i, mu in enumerate(grid):
        scen = cfg.scenario_for(algo, mu=mu)
        curve = mse_curve(scen, threads=threads, burn_in=cfg.burn_in)
        eps = cfg.coupling.epsilon(mu)
        bound = mse_bound(mu, eps) if mu > 0.0 and eps > 0.0 else None
        try:
            plateau = curve.plateau_gap()
        except ConfigError:
            plateau = None
        try:
            steady = curve.steady_state()
        except ConfigError:
            steady = None
        entries.append((mu, eps, bound, steady, plateau, curve))
        columns = ["n", "t", "mse"] + (["stderr"] if curve.stderr is not None else [])
        rows = []
        for k in range(cfg.n_steps + 1):
            row = [k, k * mu, curve.mse[k]]
            if curve.stderr is not None:
                row.append(curve.stderr[k])
            rows.append(row)
        name = "mse_curve.csv" if len(grid) == 1 else f"mse_curve_{i}.csv"
        write_csv(out / name, columns, rows, _preamble(cfg, "mse"))

    fit_idx = max(range(len(entries)), key=lambda i: entries[i][0])
    fit_mu, _, fit_bound, fit_steady, _, _ = entries[fit_idx]
    fitted_c = (
        fit_steady / fit_bound
        if fit_bound is not None and fit_steady is not None
        else None
    )
    rows_summary = []
    for mu, eps, bound, steady, plateau, curve in entries:
        rows_summary.append(
            {
                "mu": mu,
                "epsilon": eps,
                "bound": bound,
                "steady_state_mse": steady,
                "c_times_bound": None
                if fitted_c is None or bound is None
                else fitted_c * bound,
                "plateau_gap": plateau,
                "stderr_present": curve.stderr is not None,
                "burn_in": curve.burn_in,
            }
        )
    write_json(
        out / "mse_summary.json",
        {
            "config_hash": config_digest(cfg),
            "master_seed": cfg.master_seed,
            "algorithm": algo,
            "fitted_c": fitted_c,
            "fitted_at_mu": fit_mu,
            "rows": rows_summary,
        },
    )
    return 0


def cmd_limits(cfg: RunConfig, out: Path, threads: int) -> int:
    mu = cfg.mu
    if mu <= 0.0:
        raise ConfigError("limits command requires mu > 0")
    regime = cfg.regime()
    signal = cfg.signal
    algo = cfg.algorithms[0]
    kind = cfg.coupling.limit_kind
    horizon = cfg.horizon if cfg.horizon is not None else cfg.n_steps * mu
    dt_ode = cfg.dt_ode if cfg.dt_ode is not None else mu
    reps = cfg.replications

    s1 = cfg.scenario_for(algo)
    mu2 = mu / 2.0
    n2 = int(np.ceil(horizon / mu2 * (1.0 + 1e-12)))
    s2 = cfg.scenario_for(algo, mu=mu2, n_steps=n2)
    dev1 = ode_deviation(s1, dt_ode, horizon, threads=threads)
    dev2 = ode_deviation(s2, dt_ode, horizon, threads=threads)
    improved = dev2.per_replication < dev1.per_replication
    write_csv(
        out / "limits_deviation.csv",
        ["replication", "deviation_mu", "deviation_half_mu", "improved"],
        [
            [i, dev1.per_replication[i], dev2.per_replication[i], int(improved[i])]
            for i in range(reps)
        ],
        _preamble(cfg, "limits"),
    )

    centering = cfg.coupling.centering
    burn = cfg.burn_in if cfg.burn_in is not None else burn_in_default(mu)
    traj = run_tracking(
        regime, signal, cfg.filter_for(algo), cfg.n_steps, replication_stream(cfg.master_seed, 0)
    )
    series = scaled_error(traj, centering, burn, regime)
    z_names = _component_names("z", regime.dim)
    write_csv(
        out / "limits_zseries.csv",
        ["n", "t", *z_names],
        [
            [burn + j, (burn + j) * mu, *series.values[j]]
            for j in range(series.values.shape[0])
        ],
        _preamble(cfg, "limits"),
    )

    diffusion = diffusion_check(s1, centering, reps=reps, threads=threads)
    system = limit_system_for(regime, signal, kind)
    if kind == KIND_SWITCHED:
        equilibrium = None
    else:
        equilibrium = field_equilibrium(system).tolist()
    per_regime = None
    if diffusion.per_regime is not None:
        per_regime = {
            str(i): {
                "empirical_cov": rep["empirical"],
                "reference_cov": rep["reference"],
                "rel_discrepancy": rep["rel_discrepancy"],
                "n_samples": rep["n_samples"],
            }
            for i, rep in diffusion.per_regime.items()
        }
    write_json(
        out / "limits_summary.json",
        {
            "config_hash": config_digest(cfg),
            "master_seed": cfg.master_seed,
            "algorithm": algo,
            "kind": kind,
            "horizon": horizon,
            "dt_ode": dt_ode,
            "field_equilibrium": equilibrium,
            "regime_states": regime.states.tolist(),
            "deviation": {
                "mean_mu": dev1.mean,
                "mean_half_mu": dev2.mean,
                "fraction_improved": float(improved.mean()),
                "replications": reps,
                "mu": mu,
                "half_mu": mu2,
            },
            "diffusion": {
                "centering": centering,
                "empirical_cov": diffusion.empirical,
                "reference_cov": diffusion.reference,
                "rel_discrepancy": diffusion.rel_discrepancy,
                "n_samples": diffusion.n_samples,
                "per_regime": per_regime,
            },
        },
    )
    return 0


def cmd_cumavg(cfg: RunConfig, out: Path, threads: int) -> int:
    regime = cfg.regime()
    signal = cfg.signal
    n = cfg.n_steps
    r = regime.dim
    mu = cfg.mu
    counts = np.arange(1, n + 1)[:, None]
    trajs = {
        algo: run_tracking(
            regime, signal, cfg.filter_for(algo), n, replication_stream(cfg.master_seed, 0)
        )
        for algo in cfg.algorithms
    }
    columns = ["n", *_component_names("cumavg_alpha", r)]
    series = []
    if n > 0:
        first = next(iter(trajs.values()))
        alpha = regime.states[first.chain.indices[:n]]
        series.append(np.cumsum(alpha, axis=0) / counts)
        for algo in cfg.algorithms:
            columns += _component_names(f"cumavg_theta_{algo}", r)
            series.append(np.cumsum(trajs[algo].thetas[:n], axis=0) / counts)
        data = np.hstack(series)
        rows = [[k, *data[k]] for k in range(n)]
    else:
        for algo in cfg.algorithms:
            columns += _component_names(f"cumavg_theta_{algo}", r)
        rows = []
    write_csv(out / "cumavg.csv", columns, rows, _preamble(cfg, "cumavg"))
    return 0


def _selftest_checks(cfg: RunConfig, threads: int) -> list[dict]:
    checks: list[dict] = []

    def add(name: str, passed: bool, detail: float) -> None:
        checks.append({"name": name, "passed": bool(passed), "detail": float(detail)})

    gen = GeneratorMatrix([[-0.6, 0.4, 0.2], [0.2, -0.5, 0.3], [0.4, 0.1, -0.5]])
    nu = stationary_distribution(gen)
    dev = float(np.abs(nu - 1.0 / 3.0).max())
    add("stationary_distribution_uniform", dev <= 1e-10, dev)

    states = np.array([[-1.0], [0.0], [1.0]])
    a_star = mean_parameter(states, np.array([0.75, 0.125, 0.125]))
    a_bar = mean_parameter(states, nu)
    add("initial_mean_exact", a_star[0] == -0.625, a_star[0])
    add("stationary_mean_exact", abs(a_bar[0]) <= 1e-12, a_bar[0])

    a = effective_matrix(cfg.signal)
    expected = float(np.sqrt(2.0 / np.pi) / cfg.signal.noise_std * cfg.regressor.cov[0, 0])
    add("effective_matrix_closed_form", abs(float(a[0, 0]) - expected) <= 1e-12, float(a[0, 0]))

    sigma = noise_covariance(cfg.signal).sigma
    s = lyapunov_solve(a, sigma)
    target = float(sigma[0, 0] / (2.0 * a[0, 0]))
    add("lyapunov_scalar", abs(float(s[0, 0]) - target) <= 1e-12, float(s[0, 0]))

    gen2 = GeneratorMatrix([[-1.0, 1.0], [2.0, -2.0]])
    model2 = RegimeModel(
        states=np.array([[0.0], [1.0]]),
        generator=gen2,
        epsilon=0.1,
        initial_dist=np.array([0.5, 0.5]),
    )
    p = transition_matrix(model2)
    dist = model2.initial_dist.copy()
    n_enum = 8
    paths = np.stack(
        np.meshgrid(*([np.arange(2)] * (n_enum + 1)), indexing="ij"), axis=-1
    ).reshape(-1, n_enum + 1)
    probs = model2.initial_dist[paths[:, 0]]
    for k in range(n_enum):
        probs = probs * p[paths[:, k], paths[:, k + 1]]
    enum = np.zeros(2)
    for j in range(2):
        enum[j] = probs[paths[:, n_enum] == j].sum()
    matpow = model2.initial_dist @ np.linalg.matrix_power(p, n_enum)
    diff = float(np.abs(enum - matpow).max())
    add("chain_enumeration_oracle", diff <= 1e-12, diff)

    root = matrix_sqrt_psd(np.array([[2.0, 0.5], [0.5, 1.0]]))
    resid = float(np.linalg.norm(root @ root.T - np.array([[2.0, 0.5], [0.5, 1.0]])))
    add("matrix_sqrt_residual", resid <= 1e-10, resid)

    scen = cfg.scenario_for(cfg.algorithms[0])
    serial = mse_curve(scen, threads=1)
    threaded = mse_curve(scen, threads=max(2, threads))
    again = mse_curve(scen, threads=1)
    same = (
        np.array_equal(serial.mse, threaded.mse)
        and np.array_equal(serial.mse, again.mse)
        and np.array_equal(serial.stderr, threaded.stderr)
    )
    add("replication_determinism", same, 1.0 if same else 0.0)
    return checks


def cmd_selftest(cfg: RunConfig, out: Path, threads: int) -> int:
    checks = _selftest_checks(cfg, threads)
    all_passed = all(c["passed"] for c in checks)
    scen = cfg.scenario_for(cfg.algorithms[0])
    curve = mse_curve(scen, threads=threads)
    columns = ["n", "t", "mse"] + (["stderr"] if curve.stderr is not None else [])
    rows = []
    for k in range(cfg.n_steps + 1):
        row = [k, k * cfg.mu, curve.mse[k]]
        if curve.stderr is not None:
            row.append(curve.stderr[k])
        rows.append(row)
    write_csv(out / "selftest_curve.csv", columns, rows, _preamble(cfg, "selftest"))
    write_json(
        out / "selftest_summary.json",
        {
            "config_hash": config_digest(cfg),
            "master_seed": cfg.master_seed,
            "all_passed": all_passed,
            "checks": checks,
        },
    )
    for c in checks:
        status = "ok" if c["passed"] else "FAIL"
        print(f"selftest {status}: {c['name']} ({c['detail']:.6g})")
    return 0 if all_passed else 4


_COMMANDS = {
    "track": cmd_track,
    "mse": cmd_mse,
    "limits": cmd_limits,
    "cumavg": cmd_cumavg,
    "selftest": cmd_selftest,
}

_SELFTEST_STEPS = 200
_SELFTEST_REPS = 32


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signtrack",
        description="Simulate sign-error/sign-regressor/LMS tracking of a "
        "Markov-switching parameter and check its limit approximations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument(
            "--config",
            help="path to a JSON config file, or a preset name "
            "(e_eq_mu, e_ll_mu, e_gg_mu)",
        )
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--reps", type=int, default=None, help="override replications")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            if args.config is not None:
                raise ConfigError(
                    "selftest runs a fixed built-in battery; --config is not supported"
                )
            cfg = replace(
                preset_config("e_eq_mu"),
                n_steps=_SELFTEST_STEPS,
                replications=_SELFTEST_REPS,
            )
        elif args.config is not None:
            cfg = load_config(args.config)
        else:
            raise ConfigError(f"{args.command} requires --config")
        cfg = cfg.with_overrides(master_seed=args.seed, replications=args.reps)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args.threads)
    except DivergenceDetected as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SigntrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
