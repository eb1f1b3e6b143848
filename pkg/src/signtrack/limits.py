"""Deterministic and diffusion limit systems for the adaptive filters.

For small step size the (interpolated) estimate trajectories concentrate
around ordinary differential equations whose right-hand sides are built
from an *effective matrix* ``A`` — the Jacobian of the averaged update
direction ``E[phi * sgn(phi' d + e)]`` at ``d = 0``.  Around those ODE
limits, suitably scaled estimation errors behave like Ornstein-Uhlenbeck
processes whose stationary covariance solves a Lyapunov equation.  This
module provides the fields, the integrators, and the algebra for both
levels of approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    MonteCarloVarianceTooHigh,
    NonGaussianClosedForm,
    NotPositiveSemidefinite,
    SingularLyapunov,
    UnknownState,
)
from .regime import ChainPath, RegimeModel, stationary_distribution
from .signals import KIND_GAUSSIAN, SignalModel, draw_block

__all__ = [
    "KIND_SWITCHED",
    "KIND_SLOW",
    "KIND_FAST",
    "LIMIT_KINDS",
    "LimitSystem",
    "NoiseCovariance",
    "effective_matrix",
    "limit_system_for",
    "switched_field",
    "slow_field",
    "fast_field",
    "field_equilibrium",
    "integrate_ode",
    "noise_covariance",
    "matrix_sqrt_psd",
    "lyapunov_solve",
    "simulate_ou",
]

KIND_SWITCHED = "switched"
KIND_SLOW = "slow"
KIND_FAST = "fast"
LIMIT_KINDS = (KIND_SWITCHED, KIND_SLOW, KIND_FAST)

_EIG_TOL = 1e-12
_RESIDUAL_TOL = 1e-10
_PSD_TOL = -1e-10
_MC_SE_FRACTION = 0.05


def _as_matrix(a: np.ndarray, r: int, what: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.shape != (r, r):
        raise DimensionMismatch(f"{what} must have shape ({r}, {r}), got {m.shape}")
    return m


@dataclass(frozen=True)
class LimitSystem:
    """A deterministic limit regime: per-state gain matrices plus weights.

    ``kind`` selects which averaging applies:

    - ``"switched"``: the parameter chain survives in the limit; the ODE
      switches its right-hand side with the chain state.
    - ``"slow"``: the chain is frozen at its initial distribution; the
      field is the ``initial_dist``-weighted average.
    - ``"fast"``: the chain equilibrates instantly; the field is the
      stationary-distribution-weighted average.

    Every gain matrix must have all eigenvalues in the open right half
    plane so each field is a strict contraction toward its equilibrium.
    """

    kind: str
    states: np.ndarray
    matrices: tuple[np.ndarray, ...]
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in LIMIT_KINDS:
            raise ConfigError(f"kind must be one of {LIMIT_KINDS}, got {self.kind!r}")
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1:
            raise ConfigError(f"states must be (m0, r), got shape {states.shape}")
        object.__setattr__(self, "states", states)
        m0, r = states.shape
        if len(self.matrices) != m0:
            raise DimensionMismatch(
                f"need one gain matrix per state ({m0}), got {len(self.matrices)}"
            )
        mats = tuple(_as_matrix(a, r, f"matrices[{i}]") for i, a in enumerate(self.matrices))
        object.__setattr__(self, "matrices", mats)
        for i, a in enumerate(mats):
            eig = np.linalg.eigvals(a)
            if float(eig.real.min()) <= _EIG_TOL:
                raise ConfigError(
                    f"matrices[{i}] must have eigenvalues with positive real part; "
                    f"min real part {eig.real.min():.3e}"
                )
        if self.kind == KIND_SWITCHED:
            if self.weights is not None:
                raise ConfigError("switched systems take no weights")
        else:
            if self.weights is None:
                raise ConfigError(f"{self.kind!r} systems require weights")
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (m0,):
                raise DimensionMismatch(f"weights must have shape ({m0},), got {w.shape}")
            if w.min() < 0.0 or abs(float(w.sum()) - 1.0) > 1e-12:
                raise ConfigError("weights must be a probability vector")
            object.__setattr__(self, "weights", w)

    @property
    def m0(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def averaged_matrix(self) -> np.ndarray:
        """Weighted average of the gain matrices (slow/fast kinds only)."""
        if self.weights is None:
            raise ConfigError("switched systems have no single averaged matrix")
        out = np.zeros((self.dim, self.dim))
        for w, a in zip(self.weights, self.matrices):
            out += w * a
        return out


@dataclass(frozen=True)
class NoiseCovariance:
    """Covariance of the update-direction noise and its symmetric PSD root."""

    sigma: np.ndarray
    sqrt: np.ndarray
    method: str = field(default="closed_form_iid")

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=float)
        sqrt = np.asarray(self.sqrt, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionMismatch(f"sigma must be square, got shape {sigma.shape}")
        if sqrt.shape != sigma.shape:
            raise DimensionMismatch("sqrt must have the same shape as sigma")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sqrt", sqrt)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


def effective_matrix(
    signal: SignalModel,
    method: str = "closed_form_gaussian",
    samples: int | None = None,
    fd_step: float = 0.01,
    rng: np.random.Generator | None = None,
    chunk: int = 1_000_000,
) -> np.ndarray:
    """Jacobian at zero of ``d -> E[phi * sgn(phi' d + e)]``.

    ``"closed_form_gaussian"`` uses the exact value ``sqrt(2/pi) * cov_phi
    / noise_std`` available when regressor and noise are untruncated
    Gaussians.  ``"monte_carlo"`` estimates the same Jacobian by central
    finite differences sharing one set of random draws across both
    perturbation signs and all columns, and rejects the estimate if its
    aggregate standard error exceeds 5% of the matrix norm.
    """
    r = signal.dim
    if method == "closed_form_gaussian":
        if signal.regressor.kind != KIND_GAUSSIAN or signal.noise.kind != KIND_GAUSSIAN:
            raise NonGaussianClosedForm(
                "closed-form effective matrix requires untruncated Gaussian "
                "regressor and noise"
            )
        return np.sqrt(2.0 / np.pi) * signal.regressor.cov / signal.noise_std
    if method != "monte_carlo":
        raise ConfigError(f"unknown effective_matrix method {method!r}")
    if samples is None or samples < 2:
        raise ConfigError("monte_carlo method requires samples >= 2")
    if fd_step <= 0.0:
        raise ConfigError("fd_step must be positive")
    if rng is None:
        raise ConfigError("monte_carlo method requires an rng")

    total = np.zeros((r, r))
    total_sq = np.zeros((r, r))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        phi = draw_block(signal.regressor, m, rng)
        e = draw_block(signal.noise, m, rng)[:, 0]
        for j in range(r):
            d = fd_step * phi[:, j]
            w = phi * ((np.sign(d + e) - np.sign(-d + e)) / (2.0 * fd_step))[:, None]
            total[:, j] += w.sum(axis=0)
            total_sq[:, j] += (w * w).sum(axis=0)
        done += m
    mean = total / samples
    var = np.maximum(total_sq / samples - mean * mean, 0.0)
    stderr = float(np.linalg.norm(np.sqrt(var / samples)))
    scale = float(np.linalg.norm(mean))
    if scale > 0.0 and stderr > _MC_SE_FRACTION * scale:
        raise MonteCarloVarianceTooHigh(stderr, _MC_SE_FRACTION * scale)
    return mean


def limit_system_for(
    regime: RegimeModel,
    signal: SignalModel,
    kind: str,
    method: str = "closed_form_gaussian",
    **kwargs,
) -> LimitSystem:
    """Build the limit system induced by a regime/signal pair.

    With independent regressors the per-state gain matrices coincide, so
    one effective matrix is shared by every state; the weights come from
    the regime's initial distribution (slow) or stationary distribution
    (fast).
    """
    a = effective_matrix(signal, method=method, **kwargs)
    mats = tuple(a for _ in range(regime.m0))
    if kind == KIND_SWITCHED:
        weights = None
    elif kind == KIND_SLOW:
        weights = regime.initial_dist
    elif kind == KIND_FAST:
        weights = stationary_distribution(regime.generator)
    else:
        raise ConfigError(f"kind must be one of {LIMIT_KINDS}, got {kind!r}")
    return LimitSystem(kind=kind, states=regime.states, matrices=mats, weights=weights)


def switched_field(system: LimitSystem, state_index: int, theta: np.ndarray) -> np.ndarray:
    """Right-hand side ``A_i (a_i - theta)`` of the switched limit ODE."""
    if not 0 <= state_index < system.m0:
        raise UnknownState(state_index, system.m0)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (system.dim,):
        raise DimensionMismatch(f"theta must have shape ({system.dim},), got {theta.shape}")
    return system.matrices[state_index] @ (system.states[state_index] - theta)


def _averaged_field(system: LimitSystem, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (system.dim,):
        raise DimensionMismatch(f"theta must have shape ({system.dim},), got {theta.shape}")
    out = np.zeros(system.dim)
    for w, a, s in zip(system.weights, system.matrices, system.states):
        out += w * (a @ (s - theta))
    return out


def slow_field(system: LimitSystem, theta: np.ndarray) -> np.ndarray:
    """Initial-distribution-averaged field for slowly varying regimes."""
    if system.kind != KIND_SLOW:
        raise ConfigError(f"slow_field requires a 'slow' system, got {system.kind!r}")
    return _averaged_field(system, theta)


def fast_field(system: LimitSystem, theta: np.ndarray) -> np.ndarray:
    """Stationary-distribution-averaged field for fast regimes."""
    if system.kind != KIND_FAST:
        raise ConfigError(f"fast_field requires a 'fast' system, got {system.kind!r}")
    return _averaged_field(system, theta)


def field_equilibrium(system: LimitSystem) -> np.ndarray:
    """The unique zero of an averaged field: the weighted mean parameter.

    Solves ``(sum_i w_i A_i) theta = sum_i w_i A_i a_i``; with identical
    per-state matrices this reduces to the weighted average of the states.
    """
    if system.kind == KIND_SWITCHED:
        raise ConfigError("switched fields have a moving target, not one equilibrium")
    lhs = system.averaged_matrix()
    rhs = np.zeros(system.dim)
    for w, a, s in zip(system.weights, system.matrices, system.states):
        rhs += w * (a @ s)
    return np.linalg.solve(lhs, rhs)


def _rk4_step(f, theta: np.ndarray, h: float) -> np.ndarray:
    k1 = f(theta)
    k2 = f(theta + 0.5 * h * k1)
    k3 = f(theta + 0.5 * h * k2)
    k4 = f(theta + h * k3)
    return theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(
    system: LimitSystem,
    theta0: np.ndarray,
    dt: float,
    horizon: float,
    chain: ChainPath | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a limit ODE with classical RK4 on a uniform output grid.

    Returns ``(times, thetas)`` with ``times[k] = k * dt`` up to the
    horizon.  For switched systems a continuous-time chain path must be
    supplied; integration substeps never straddle a jump, and the regime
    within each substep is the chain state at the substep's left endpoint,
    so the discontinuous right-hand side is exactly piecewise smooth.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (system.dim,):
        raise DimensionMismatch(f"theta0 must have shape ({system.dim},), got {theta0.shape}")
    if dt <= 0.0 or horizon <= 0.0:
        raise ConfigError("dt and horizon must be positive")
    n_out = int(np.floor(horizon / dt + 1e-9))
    times = np.arange(n_out + 1) * dt

    if system.kind == KIND_SWITCHED:
        if chain is None:
            raise ConfigError("switched systems require a driving chain path")
        jumps = [t for t in chain.jump_times if 0.0 < t < times[-1]]
    else:
        if chain is not None:
            raise ConfigError(f"{system.kind!r} systems take no driving chain")
        jumps = []

    grid = np.unique(np.concatenate([times, np.asarray(jumps, dtype=float)]))
    thetas = np.empty((n_out + 1, system.dim))
    thetas[0] = theta0
    theta = theta0.copy()
    out_idx = 1
    for left, right in zip(grid[:-1], grid[1:]):
        h = right - left
        if h <= 0.0:
            continue
        if system.kind == KIND_SWITCHED:
            i = chain.state_at(left)
            f = lambda th, i=i: switched_field(system, i, th)
        else:
            f = lambda th: _averaged_field(system, th)
        theta = _rk4_step(f, theta, h)
        while out_idx <= n_out and times[out_idx] <= right + 1e-12 * max(1.0, right):
            thetas[out_idx] = theta
            out_idx += 1
    return times, thetas


def noise_covariance(
    signal: SignalModel,
    method: str = "closed_form_iid",
    lag_cutoff: int = 5,
    samples: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> NoiseCovariance:
    """Covariance of the stationary update noise ``phi * sgn(e)``.

    With independent draws and continuous noise, ``sgn(e)^2 = 1`` almost
    surely, so the closed form is exactly the regressor covariance.  The
    empirical method sums lagged second moments of simulated noise terms
    up to ``lag_cutoff`` (both time directions) and must yield a positive
    semidefinite matrix.
    """
    r = signal.dim
    if method == "closed_form_iid":
        sigma = signal.regressor.cov.copy()
    elif method == "empirical":
        if rng is None:
            raise ConfigError("empirical method requires an rng")
        if samples <= lag_cutoff + 1:
            raise ConfigError("samples must exceed lag_cutoff + 1")
        phi = draw_block(signal.regressor, samples, rng)
        e = draw_block(signal.noise, samples, rng)[:, 0]
        w = phi * np.sign(e)[:, None]
        sigma = (w.T @ w) / samples
        for j in range(1, lag_cutoff + 1):
            c = (w[j:].T @ w[:-j]) / (samples - j)
            sigma = sigma + c + c.T
        sigma = 0.5 * (sigma + sigma.T)
        min_eig = float(np.linalg.eigvalsh(sigma).min())
        if min_eig < _PSD_TOL:
            raise NotPositiveSemidefinite(min_eig)
    else:
        raise ConfigError(f"unknown noise_covariance method {method!r}")
    if sigma.shape != (r, r):
        raise DimensionMismatch(f"covariance must have shape ({r}, {r})")
    return NoiseCovariance(sigma=sigma, sqrt=matrix_sqrt_psd(sigma), method=method)


def matrix_sqrt_psd(sigma: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below ``-1e-10`` are rejected; tiny negative values from
    rounding are clamped to zero.  The result satisfies
    ``S @ S.T == sigma`` to within ``1e-10`` in the Frobenius norm.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"sigma must be square, got shape {sigma.shape}")
    sym = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sym)
    if float(vals.min()) < _PSD_TOL:
        raise NotPositiveSemidefinite(float(vals.min()))
    root = vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    residual = float(np.linalg.norm(root @ root.T - sym))
    if residual > _RESIDUAL_TOL * max(1.0, float(np.linalg.norm(sym))):
        raise NotPositiveSemidefinite(float(vals.min()))
    return root


def lyapunov_solve(a: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Solve ``A S + S A' = Sigma`` for symmetric ``S`` via Kronecker products.

    Solvable exactly when no two eigenvalues of ``A`` sum to zero; the
    solution is checked to residual 1e-10 and symmetrized.
    """
    a = np.asarray(a, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    r = a.shape[0]
    if a.shape != (r, r) or sigma.shape != (r, r):
        raise DimensionMismatch("a and sigma must be square matrices of equal size")
    eig = np.linalg.eigvals(a)
    pair_sums = np.abs(eig[:, None] + eig[None, :])
    scale = max(1.0, float(np.abs(eig).max()))
    if float(pair_sums.min()) < 1e-12 * scale:
        raise SingularLyapunov(
            "eigenvalue pair of A sums to zero; Lyapunov equation is singular"
        )
    eye = np.eye(r)
    m = np.kron(eye, a) + np.kron(a, eye)
    vec = np.linalg.solve(m, sigma.reshape(-1, order="F"))
    s = vec.reshape(r, r, order="F")
    s = 0.5 * (s + s.T)
    residual = float(np.linalg.norm(a @ s + s @ a.T - sigma))
    if residual > _RESIDUAL_TOL * max(1.0, float(np.linalg.norm(sigma))):
        raise SingularLyapunov(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    return s


def simulate_ou(
    matrices: np.ndarray | tuple[np.ndarray, ...],
    sqrt_cov: np.ndarray,
    z0: np.ndarray,
    dt: float,
    horizon: float,
    rng: np.random.Generator,
    chain: ChainPath | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama path of ``dz = -A z dt + sqrt_cov dW``.

    ``matrices`` is either a single drift matrix or one per regime state,
    in which case a continuous-time chain path selects the active drift
    at each step's left endpoint.  Returns ``(times, z)`` on the uniform
    grid ``k * dt``.
    """
    z0 = np.asarray(z0, dtype=float)
    r = z0.shape[0]
    sqrt_cov = _as_matrix(sqrt_cov, r, "sqrt_cov")
    if dt <= 0.0 or horizon <= 0.0:
        raise ConfigError("dt and horizon must be positive")
    single = isinstance(matrices, np.ndarray) and np.asarray(matrices).ndim == 2
    if single:
        mats = (_as_matrix(matrices, r, "matrices"),)
        if chain is not None:
            raise ConfigError("chain given but only one drift matrix supplied")
    else:
        mats = tuple(_as_matrix(m, r, f"matrices[{i}]") for i, m in enumerate(matrices))
        if chain is None:
            raise ConfigError("per-regime drift matrices require a driving chain")
    n = int(np.floor(horizon / dt + 1e-9))
    times = np.arange(n + 1) * dt
    noise = rng.standard_normal((n, r)) @ sqrt_cov.T * np.sqrt(dt)
    z = np.empty((n + 1, r))
    z[0] = z0
    cur = z0.copy()
    for k in range(n):
        a = mats[0] if single else mats[chain.state_at(times[k])]
        cur = cur - (a @ cur) * dt + noise[k]
        z[k + 1] = cur
    return times, z
