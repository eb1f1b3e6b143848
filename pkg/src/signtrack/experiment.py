"""Monte Carlo harness connecting the filters to their limit systems.

Three kinds of checks are supported: mean-square tracking error against the
``mu + eps + eps^2/mu`` bound shape, sup-norm deviation of the interpolated
estimate path from the matching limit ODE, and tail covariance of scaled
errors against the stationary covariance of the limiting
Ornstein-Uhlenbeck process.

Replication ``i`` of a run with master seed ``m`` always draws from
``numpy.random.default_rng([m, i])``, and replications are processed in
fixed-size chunks reduced in index order, so every statistic is bitwise
reproducible for any worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceDetected, OutOfHorizon
from .filters import FilterConfig, Trajectory, run_tracking_batch
from .limits import (
    KIND_FAST,
    KIND_SLOW,
    KIND_SWITCHED,
    LimitSystem,
    integrate_ode,
    limit_system_for,
    lyapunov_solve,
    noise_covariance,
)
from .regime import ChainPath, RegimeModel, mean_parameter, stationary_distribution
from .signals import SignalModel

__all__ = [
    "COUPLING_KINDS",
    "CENTERINGS",
    "Coupling",
    "Scenario",
    "ScaledErrorSeries",
    "ExperimentReport",
    "MseCurve",
    "OdeDeviationReport",
    "DiffusionReport",
    "replication_stream",
    "scenario_digest",
    "mse_bound",
    "mse_curve",
    "interpolate",
    "ode_deviation",
    "scaled_error",
    "diffusion_check",
    "burn_in_default",
]

COUPLING_KINDS = ("proportional", "slow", "fast")
CENTERINGS = ("chain", "initial_mean", "stationary_mean")

# Fixed batch size for replication processing.  Worker threads each take
# whole chunks and partial results are reduced in chunk order, which keeps
# floating-point reduction order independent of the thread count.
CHUNK_SIZE = 64

_CENTERING_FOR_COUPLING = {
    "proportional": "chain",
    "slow": "initial_mean",
    "fast": "stationary_mean",
}
_KIND_FOR_COUPLING = {
    "proportional": KIND_SWITCHED,
    "slow": KIND_SLOW,
    "fast": KIND_FAST,
}


@dataclass(frozen=True)
class Coupling:
    """Rule tying the regime's transition scale to the filter stepsize.

    - ``proportional(c)``: eps = c * mu (chain and filter evolve together)
    - ``slow(delta)``:     eps = mu ** (1 + delta) (chain much slower)
    - ``fast(gamma)``:     eps = mu ** gamma, 1/2 <= gamma < 1 (chain faster)
    """

    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in COUPLING_KINDS:
            raise ConfigError(f"coupling kind must be one of {COUPLING_KINDS}")
        v = float(self.value)
        if self.kind == "proportional" and not v > 0.0:
            raise ConfigError("proportional coupling requires c > 0")
        if self.kind == "slow" and not v > 0.0:
            raise ConfigError("slow coupling requires delta > 0")
        if self.kind == "fast" and not 0.5 <= v < 1.0:
            raise ConfigError("fast coupling requires 1/2 <= gamma < 1")
        object.__setattr__(self, "value", v)

    def epsilon(self, mu: float) -> float:
        if self.kind == "proportional":
            return self.value * mu
        if self.kind == "slow":
            return mu ** (1.0 + self.value)
        return mu**self.value

    @property
    def limit_kind(self) -> str:
        return _KIND_FOR_COUPLING[self.kind]

    @property
    def centering(self) -> str:
        return _CENTERING_FOR_COUPLING[self.kind]


@dataclass(frozen=True)
class Scenario:
    """One fully specified tracking experiment.

    The regime's transition scale must equal the coupling rule evaluated at
    the filter stepsize, so that stepsize sweeps stay on the declared
    coupling curve.
    """

    regime: RegimeModel
    signal: SignalModel
    filter: FilterConfig
    coupling: Coupling
    n_steps: int
    n_replications: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.regime.dim != self.signal.dim or self.regime.dim != self.filter.dim:
            raise ConfigError("regime, signal and filter dimensions must agree")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be >= 0")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        implied = self.coupling.epsilon(self.filter.mu)
        if abs(self.regime.epsilon - implied) > 1e-12 * max(1.0, implied):
            raise ConfigError(
                f"regime epsilon {self.regime.epsilon!r} does not match coupling "
                f"{self.coupling.kind}({self.coupling.value}) at mu={self.filter.mu!r} "
                f"(implied {implied!r})"
            )

    def with_mu(self, mu: float) -> "Scenario":
        """Same scenario at a different stepsize, eps re-derived from the coupling."""
        regime = RegimeModel(
            states=self.regime.states,
            generator=self.regime.generator,
            epsilon=self.coupling.epsilon(mu),
            initial_dist=self.regime.initial_dist,
        )
        filt = FilterConfig(
            algorithm=self.filter.algorithm,
            mu=mu,
            theta0=self.filter.theta0,
            divergence_guard=self.filter.divergence_guard,
        )
        return Scenario(
            regime=regime,
            signal=self.signal,
            filter=filt,
            coupling=self.coupling,
            n_steps=self.n_steps,
            n_replications=self.n_replications,
            master_seed=self.master_seed,
        )

    def to_dict(self) -> dict:
        reg = self.regime
        sig = self.signal
        return {
            "regime": {
                "states": reg.states.tolist(),
                "generator": reg.generator.entries.tolist(),
                "epsilon": reg.epsilon,
                "initial_dist": reg.initial_dist.tolist(),
            },
            "signal": {
                "regressor": {
                    "kind": sig.regressor.kind,
                    "cov": sig.regressor.cov.tolist(),
                    "clip": sig.regressor.clip,
                },
                "noise": {
                    "kind": sig.noise.kind,
                    "cov": sig.noise.cov.tolist(),
                    "clip": sig.noise.clip,
                },
            },
            "filter": {
                "algorithm": self.filter.algorithm,
                "mu": self.filter.mu,
                "theta0": self.filter.theta0.tolist(),
                "divergence_guard": self.filter.divergence_guard,
            },
            "coupling": {"kind": self.coupling.kind, "value": self.coupling.value},
            "n_steps": self.n_steps,
            "n_replications": self.n_replications,
            "master_seed": self.master_seed,
        }


def replication_stream(master_seed: int, index: int) -> np.random.Generator:
    """The random stream owned by one replication."""
    return np.random.default_rng([master_seed, index])


def scenario_digest(scenario: Scenario) -> str:
    """SHA-256 of the canonical JSON form of a scenario."""
    payload = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class ScaledErrorSeries:
    """Burn-in-trimmed, 1/sqrt(mu)-scaled estimation errors."""

    values: np.ndarray
    centering: str
    burn_in: int

    def __post_init__(self) -> None:
        if self.centering not in CENTERINGS:
            raise ConfigError(f"centering must be one of {CENTERINGS}")
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ConfigError("scaled error values must be finite")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class MseCurve:
    """Per-iterate mean-square error with optional standard errors."""

    mse: np.ndarray
    stderr: np.ndarray | None
    n_replications: int
    burn_in: int

    def steady_state(self) -> float:
        """Mean over the final half of the post-burn-in iterates."""
        window = self.mse[self.burn_in :]
        if window.size == 0:
            raise ConfigError("burn_in leaves no iterates for the steady state")
        return float(window[window.size // 2 :].mean())

    def plateau_gap(self) -> float:
        """Relative MSE change between the last two quarters of the run."""
        window = self.mse[self.burn_in :]
        if window.size < 4:
            raise ConfigError("too few post-burn-in iterates for a plateau check")
        q = window.size // 4
        a = float(window[-2 * q : -q].mean())
        b = float(window[-q:].mean())
        return abs(b - a) / max(abs(a), 1e-300)


@dataclass(frozen=True)
class OdeDeviationReport:
    """Sup-norm deviations between estimate paths and the limit ODE."""

    mean: float
    per_replication: np.ndarray
    horizon: float
    dt_ode: float
    kind: str


@dataclass(frozen=True)
class DiffusionReport:
    """Tail covariance of scaled errors against the OU stationary covariance."""

    empirical: np.ndarray
    reference: np.ndarray
    rel_discrepancy: float
    centering: str
    n_samples: int
    per_regime: dict | None = None


@dataclass(frozen=True)
class ExperimentReport:
    """Serializable bundle of experiment outputs.

    ``wall_clock`` is informational and never serialized, keeping outputs
    byte-for-byte reproducible from (config, master_seed).
    """

    config_hash: str
    master_seed: int
    mse: np.ndarray | None = None
    stderr: np.ndarray | None = None
    bound: float | None = None
    deviation: dict = field(default_factory=dict)
    covariances: dict = field(default_factory=dict)
    wall_clock: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"config_hash": self.config_hash, "master_seed": self.master_seed}
        if self.mse is not None:
            out["mse"] = np.asarray(self.mse).tolist()
        if self.stderr is not None:
            out["stderr"] = np.asarray(self.stderr).tolist()
        if self.bound is not None:
            out["bound"] = self.bound
        if self.deviation:
            out["deviation"] = self.deviation
        if self.covariances:
            out["covariances"] = self.covariances
        return out


def burn_in_default(mu: float) -> int:
    """Iterations to discard before steady-state statistics: ceil(5/mu)."""
    if not 0.0 < mu < 1.0:
        raise ConfigError("burn_in_default requires 0 < mu < 1")
    return int(np.ceil(5.0 / mu))


def mse_bound(mu: float, eps: float) -> float:
    """Shape of the mean-square tracking error bound: mu + eps + eps^2/mu."""
    if mu <= 0.0 or eps <= 0.0:
        raise ConfigError("mse_bound requires mu > 0 and eps > 0")
    return mu + eps + eps * eps / mu


def _chunk_ranges(total: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK_SIZE, total)) for lo in range(0, total, CHUNK_SIZE)]


def _run_chunks(scenario: Scenario, worker, threads: int, keep_thetas: bool):
    """Run one batch per chunk and reduce in chunk order.

    ``worker(batch, lo, hi)`` maps a chunk's BatchTracking to a partial
    result; the list of partials is returned in chunk-index order no matter
    how many threads ran.  If several chunks diverge, the error with the
    smallest replication index is raised, matching serial execution.
    """
    ranges = _chunk_ranges(scenario.n_replications)

    def one(bounds):
        lo, hi = bounds
        rngs = [replication_stream(scenario.master_seed, i) for i in range(lo, hi)]
        batch = run_tracking_batch(
            scenario.regime,
            scenario.signal,
            scenario.filter,
            scenario.n_steps,
            rngs,
            keep_thetas=keep_thetas,
            replication_offset=lo,
        )
        return worker(batch, lo, hi)

    if threads <= 1:
        return [one(b) for b in ranges]
    results: list = [None] * len(ranges)
    errors: list[tuple[int, Exception]] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(one, b) for b in ranges]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except DivergenceDetected as exc:
                errors.append((i, exc))
    if errors:
        raise min(errors, key=lambda pair: pair[0])[1]
    return results


def mse_curve(
    scenario: Scenario, threads: int = 1, burn_in: int | None = None
) -> MseCurve:
    """Per-iterate E|alpha_n - theta_n|^2 across replications.

    Standard errors are reported only when more than one replication ran;
    with a single replication the sample variance is undefined and the
    stderr field is None rather than zero.  ``burn_in`` overrides the
    default steady-state window start of ceil(5/mu) iterates.
    """

    def worker(batch, lo, hi):
        sq = batch.sq_errors
        return sq.sum(axis=0), (sq * sq).sum(axis=0)

    partials = _run_chunks(scenario, worker, threads, keep_thetas=False)
    n = scenario.n_steps
    total = np.zeros(n + 1)
    total_sq = np.zeros(n + 1)
    for s, s2 in partials:
        total += s
        total_sq += s2
    reps = scenario.n_replications
    mean = total / reps
    if reps > 1:
        var = np.maximum((total_sq - reps * mean * mean) / (reps - 1), 0.0)
        stderr = np.sqrt(var / reps)
    else:
        stderr = None
    if burn_in is None:
        mu = scenario.filter.mu
        burn_in = burn_in_default(mu) if 0.0 < mu < 1.0 else 0
    elif burn_in < 0:
        raise ConfigError("burn_in must be >= 0")
    burn = min(burn_in, n)
    return MseCurve(mse=mean, stderr=stderr, n_replications=reps, burn_in=burn)


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Right-continuous piecewise-constant interpolation theta(t) = theta_{floor(t/mu)}."""
    if t < 0.0:
        raise OutOfHorizon(t, traj.horizon)
    mu = traj.mu
    if mu <= 0.0 or t >= traj.n_steps * mu:
        raise OutOfHorizon(t, traj.horizon)
    return traj.thetas[int(np.floor(t / mu))]


def _grid_indices(times: np.ndarray, mu: float, n_steps: int) -> np.ndarray:
    """Iterate index under each output time, robust to float grid rounding."""
    idx = np.floor(times / mu * (1.0 + 1e-12)).astype(int)
    return np.clip(idx, 0, n_steps)


def ode_deviation(
    scenario: Scenario,
    dt_ode: float,
    horizon: float,
    system: LimitSystem | None = None,
    threads: int = 1,
) -> OdeDeviationReport:
    """Sup-norm deviation of each estimate path from its limit ODE.

    The limit kind follows the scenario's coupling: proportional couplings
    are compared against the chain-driven switched ODE (each replication's
    discrete jump at step k becomes a continuous-time jump at k*mu), slow
    and fast couplings against their autonomous averaged fields.  Reports
    the per-replication sup over the ODE output grid and the mean across
    replications.
    """
    mu = scenario.filter.mu
    if mu <= 0.0:
        raise ConfigError("ode_deviation requires mu > 0")
    if horizon > scenario.n_steps * mu * (1.0 + 1e-12):
        raise OutOfHorizon(horizon, scenario.n_steps * mu)
    kind = scenario.coupling.limit_kind
    if system is None:
        system = limit_system_for(scenario.regime, scenario.signal, kind)
    if system.kind != kind:
        raise ConfigError(f"limit system kind {system.kind!r} does not match coupling")
    theta0 = scenario.filter.theta0

    if kind == KIND_SWITCHED:

        def worker(batch, lo, hi):
            out = np.empty(hi - lo)
            for j in range(hi - lo):
                chain = ChainPath.from_discrete(batch.chain_indices[j], mu)
                times, path = integrate_ode(system, theta0, dt_ode, horizon, chain=chain)
                idx = _grid_indices(times, mu, scenario.n_steps)
                gap = batch.thetas[j, idx, :] - path
                out[j] = np.abs(gap).max()
            return out

    else:
        ref_times, ref_path = integrate_ode(system, theta0, dt_ode, horizon)
        ref_idx = _grid_indices(ref_times, mu, scenario.n_steps)

        def worker(batch, lo, hi):
            gap = batch.thetas[:, ref_idx, :] - ref_path[None, :, :]
            return np.abs(gap).max(axis=(1, 2))

    partials = _run_chunks(scenario, worker, threads, keep_thetas=True)
    per_rep = np.concatenate(partials)
    return OdeDeviationReport(
        mean=float(per_rep.mean()),
        per_replication=per_rep,
        horizon=horizon,
        dt_ode=dt_ode,
        kind=kind,
    )


def scaled_error(
    traj: Trajectory,
    centering: str,
    burn_in: int,
    regime: RegimeModel,
) -> ScaledErrorSeries:
    """Centered, 1/sqrt(mu)-scaled errors after discarding ``burn_in`` iterates.

    Centerings: ``chain`` uses the realized parameter alpha_n, ``initial_mean``
    the initial-distribution mean, ``stationary_mean`` the stationary mean.
    """
    if centering not in CENTERINGS:
        raise ConfigError(f"centering must be one of {CENTERINGS}")
    n_points = traj.thetas.shape[0]
    if burn_in >= n_points:
        raise ConfigError(f"burn_in {burn_in} must be < series length {n_points}")
    if traj.mu <= 0.0:
        raise ConfigError("scaled_error requires mu > 0")
    thetas = traj.thetas[burn_in:]
    if centering == "chain":
        center = regime.states[traj.chain.indices[burn_in:]]
    elif centering == "initial_mean":
        center = mean_parameter(regime.states, regime.initial_dist)[None, :]
    else:
        nu = stationary_distribution(regime.generator)
        center = mean_parameter(regime.states, nu)[None, :]
    values = (center - thetas) / np.sqrt(traj.mu)
    return ScaledErrorSeries(values=values, centering=centering, burn_in=burn_in)


def _reference_matrices(scenario: Scenario, centering: str):
    """Drift matrix/matrices and noise covariance for the OU reference."""
    sigma = noise_covariance(scenario.signal).sigma
    switched = limit_system_for(scenario.regime, scenario.signal, KIND_SWITCHED)
    if centering == "chain":
        return switched.matrices, sigma
    if centering == "initial_mean":
        weights = scenario.regime.initial_dist
    else:
        weights = stationary_distribution(scenario.regime.generator)
    avg = np.zeros((scenario.regime.dim, scenario.regime.dim))
    for w, a in zip(weights, switched.matrices):
        avg += w * a
    return avg, sigma


def diffusion_check(
    scenario: Scenario,
    centering: str,
    reps: int,
    threads: int = 1,
) -> DiffusionReport:
    """Tail covariance of the scaled error against the OU stationary covariance.

    The centering must match the coupling (chain with proportional,
    initial_mean with slow, stationary_mean with fast).  The empirical
    covariance pools the final half of the post-burn-in scaled errors over
    all replications; the reference solves the Lyapunov equation with the
    centering's drift matrix.  With chain centering the comparison is also
    reported per occupied regime against that regime's drift matrix.
    """
    if centering not in CENTERINGS:
        raise ConfigError(f"centering must be one of {CENTERINGS}")
    if centering != scenario.coupling.centering:
        raise ConfigError(
            f"centering {centering!r} does not match coupling {scenario.coupling.kind!r}"
        )
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    mu = scenario.filter.mu
    burn = burn_in_default(mu)
    n = scenario.n_steps
    if burn >= n + 1:
        raise ConfigError("n_steps too small for the default burn-in")
    tail_start = burn + (n + 1 - burn) // 2
    r = scenario.regime.dim
    m0 = scenario.regime.m0
    states = scenario.regime.states
    sqrt_mu = np.sqrt(mu)
    run = Scenario(
        regime=scenario.regime,
        signal=scenario.signal,
        filter=scenario.filter,
        coupling=scenario.coupling,
        n_steps=n,
        n_replications=reps,
        master_seed=scenario.master_seed,
    )

    if centering == "initial_mean":
        center_const = mean_parameter(states, scenario.regime.initial_dist)
    elif centering == "stationary_mean":
        center_const = mean_parameter(states, stationary_distribution(scenario.regime.generator))
    else:
        center_const = None

    def worker(batch, lo, hi):
        thetas = batch.thetas[:, tail_start:, :]
        if center_const is None:
            center = states[batch.chain_indices[:, tail_start:]]
        else:
            center = center_const[None, None, :]
        z = (center - thetas) / sqrt_mu
        flat = z.reshape(-1, r)
        total = flat.sum(axis=0)
        outer = flat.T @ flat
        count = flat.shape[0]
        groups = None
        if center_const is None:
            groups = []
            gidx = batch.chain_indices[:, tail_start:].reshape(-1)
            for i in range(m0):
                sel = z.reshape(-1, r)[gidx == i]
                groups.append((sel.sum(axis=0), sel.T @ sel, sel.shape[0]))
        return total, outer, count, groups

    partials = _run_chunks(run, worker, threads, keep_thetas=True)

    def finalize(total, outer, count):
        mean = total / count
        return outer / count - np.outer(mean, mean)

    total = np.zeros(r)
    outer = np.zeros((r, r))
    count = 0
    g_total = [np.zeros(r) for _ in range(m0)]
    g_outer = [np.zeros((r, r)) for _ in range(m0)]
    g_count = [0] * m0
    for t, o, c, groups in partials:
        total += t
        outer += o
        count += c
        if groups is not None:
            for i, (gt, go, gc) in enumerate(groups):
                g_total[i] += gt
                g_outer[i] += go
                g_count[i] += gc

    drift, sigma = _reference_matrices(scenario, centering)
    per_regime = None
    if centering == "chain":
        refs = [lyapunov_solve(a, sigma) for a in drift]
        per_regime = {}
        emp_parts = []
        for i in range(m0):
            if g_count[i] == 0:
                continue
            emp_i = finalize(g_total[i], g_outer[i], g_count[i])
            rel_i = float(
                np.linalg.norm(emp_i - refs[i]) / max(np.linalg.norm(refs[i]), 1e-300)
            )
            per_regime[i] = {
                "empirical": emp_i,
                "reference": refs[i],
                "rel_discrepancy": rel_i,
                "n_samples": g_count[i],
            }
            emp_parts.append((emp_i, refs[i], g_count[i]))
        empirical = finalize(total, outer, count)
        reference = np.zeros((r, r))
        for _, ref, w in emp_parts:
            reference += (w / count) * ref
    else:
        empirical = finalize(total, outer, count)
        reference = lyapunov_solve(drift, sigma)
    rel = float(np.linalg.norm(empirical - reference) / max(np.linalg.norm(reference), 1e-300))
    return DiffusionReport(
        empirical=empirical,
        reference=reference,
        rel_discrepancy=rel,
        centering=centering,
        n_samples=count,
        per_regime=per_regime,
    )
