"""Adaptive filter recursions and the tracking driver.

Three estimators of a regime-switching parameter share one driver so that
side-by-side comparisons consume identical chain and signal draws:

    SE   theta' = theta + mu * phi * sgn(y - phi' theta)
    SR   theta' = theta + mu * sgn(phi) * (y - phi' theta)     (componentwise)
    LMS  theta' = theta + mu * phi * (y - phi' theta)

with sgn(0) = 0.  The driver simulates y_n = phi_n' alpha_n + e_n along a
sampled regime path and applies the chosen recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, DivergenceDetected
from .regime import ChainPath, RegimeModel, sample_dtmc_batch
from .signals import SignalModel, draw_block

ALGORITHMS = ("SE", "SR", "LMS")


def sign(x):
    """Sign with sign(0) = 0, elementwise on arrays."""

    return np.sign(x)


def se_step(theta, phi, y: float, mu: float) -> np.ndarray:
    """One sign-error update."""

    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return theta + mu * phi * sign(y - float((phi * theta).sum()))


def sr_step(theta, phi, y: float, mu: float) -> np.ndarray:
    """One sign-regressor update."""

    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return theta + mu * sign(phi) * (y - float((phi * theta).sum()))


def lms_step(theta, phi, y: float, mu: float) -> np.ndarray:
    """One least-mean-squares update."""

    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return theta + mu * phi * (y - float((phi * theta).sum()))


@dataclass(frozen=True)
class FilterConfig:
    """Algorithm choice, stepsize, start point and the divergence guard.

    mu = 0 is allowed (the estimate then never moves), which keeps the
    degenerate checks expressible.
    """

    algorithm: str
    mu: float
    theta0: np.ndarray
    divergence_guard: float = 1e6

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        mu = float(self.mu)
        if not np.isfinite(mu) or mu < 0:
            raise ConfigError(f"mu must be >= 0, got {mu!r}")
        t0 = np.atleast_1d(np.asarray(self.theta0, dtype=float)).copy()
        if t0.ndim != 1:
            raise ConfigError("theta0 must be a vector")
        guard = float(self.divergence_guard)
        if not guard > 0:
            raise ConfigError("divergence_guard must be positive")
        t0.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "theta0", t0)
        object.__setattr__(self, "divergence_guard", guard)

    @property
    def dim(self) -> int:
        return self.theta0.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """One tracking run: estimates, the driving chain, and observations."""

    thetas: np.ndarray
    chain: ChainPath
    observations: np.ndarray
    mu: float
    epsilon: float

    @property
    def n_steps(self) -> int:
        return self.thetas.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.mu


@dataclass(frozen=True)
class BatchTracking:
    """Stacked replications from the vectorized driver."""

    chain_indices: np.ndarray
    observations: np.ndarray
    sq_errors: np.ndarray
    thetas: np.ndarray | None


def draw_replication(
    regime: RegimeModel,
    signal: SignalModel,
    n_steps: int,
    rng: np.random.Generator,
):
    """All randomness of one replication, in the canonical order.

    The order is fixed (chain uniforms, then regressors, then noises) so that
    every consumer of a replication stream sees identical draws.
    """

    u = rng.random(n_steps + 1)
    phi = draw_block(signal.regressor, n_steps, rng)
    e = draw_block(signal.noise, n_steps, rng)[:, 0]
    return u, phi, e


def run_tracking_batch(
    regime: RegimeModel,
    signal: SignalModel,
    filt: FilterConfig,
    n_steps: int,
    rngs,
    keep_thetas: bool = False,
    replication_offset: int = 0,
) -> BatchTracking:
    """Run one replication per rng, vectorized across replications.

    Every replication consumes only its own stream, so results do not depend
    on how replications are grouped into batches.

    Raises
    ------
    DivergenceDetected
        If any estimate norm exceeds the guard; the error names the offending
        replication (offset + local index) and step.
    """

    r = regime.dim
    if signal.dim != r or filt.dim != r:
        raise DimensionMismatch(
            f"regime dim {r}, signal dim {signal.dim}, theta0 dim {filt.dim} "
            "must all agree"
        )
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    n_reps = len(rngs)
    u = np.empty((n_reps, n_steps + 1))
    phi = np.empty((n_reps, n_steps, r))
    e = np.empty((n_reps, n_steps))
    for i, rng in enumerate(rngs):
        u[i], phi[i], e[i] = draw_replication(regime, signal, n_steps, rng)

    idx = sample_dtmc_batch(regime, n_steps, u)
    alpha = regime.states[idx]
    y = np.einsum("ikj,ikj->ik", phi, alpha[:, :n_steps, :]) + e

    mu = filt.mu
    guard_sq = filt.divergence_guard**2
    theta = np.broadcast_to(filt.theta0, (n_reps, r)).copy()
    sq_errors = np.empty((n_reps, n_steps + 1))
    thetas = np.empty((n_reps, n_steps + 1, r)) if keep_thetas else None
    for k in range(n_steps + 1):
        if thetas is not None:
            thetas[:, k, :] = theta
        diff = alpha[:, k, :] - theta
        sq_errors[:, k] = np.einsum("ij,ij->i", diff, diff)
        if k == n_steps:
            break
        phi_k = phi[:, k, :]
        resid = y[:, k] - np.einsum("ij,ij->i", phi_k, theta)
        if filt.algorithm == "SE":
            theta = theta + mu * phi_k * np.sign(resid)[:, None]
        elif filt.algorithm == "SR":
            theta = theta + mu * np.sign(phi_k) * resid[:, None]
        else:
            theta = theta + mu * phi_k * resid[:, None]
        norms_sq = np.einsum("ij,ij->i", theta, theta)
        if np.any(norms_sq > guard_sq):
            i = int(np.argmax(norms_sq))
            raise DivergenceDetected(
                step=k + 1,
                norm=float(np.sqrt(norms_sq[i])),
                replication=replication_offset + i,
            )
    return BatchTracking(
        chain_indices=idx, observations=y, sq_errors=sq_errors, thetas=thetas
    )


def run_tracking(
    regime: RegimeModel,
    signal: SignalModel,
    filt: FilterConfig,
    n_steps: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Track the regime for n_steps iterates using one replication stream.

    Two calls with equal generator states produce identical trajectories;
    calls that differ only in the algorithm consume identical chain and
    signal draws, which is what makes overlay comparisons meaningful.
    """

    batch = run_tracking_batch(
        regime, signal, filt, n_steps, [rng], keep_thetas=True
    )
    return Trajectory(
        thetas=batch.thetas[0],
        chain=ChainPath(kind="discrete", indices=batch.chain_indices[0]),
        observations=batch.observations[0],
        mu=filt.mu,
        epsilon=regime.epsilon,
    )
