"""Markov regime process: generator validation, sampling, and distributions.

The regime is a finite-state Markov chain on parameter values a_1, ..., a_m0
(points in R^r).  In discrete time it moves with the near-identity transition
matrix P = I + eps * Q where Q is an irreducible generator; eps controls how
fast the regime wanders relative to the filter iteration.  The same generator
also defines a continuous-time chain used by the deterministic limit systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    NegativeOffDiagonal,
    NotIrreducible,
    RowSumNonzero,
    SingularSystem,
)

_ROW_SUM_TOL = 1e-12
_DIST_SUM_TOL = 1e-12
_STATIONARY_RESIDUAL_TOL = 1e-10
_PROB_STEP_SCALE = 1e-3


def _as_float_matrix(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"generator must be square, got shape {a.shape}")
    if a.shape[0] < 2:
        raise ConfigError("generator needs at least two states")
    if not np.all(np.isfinite(a)):
        raise ConfigError("generator entries must be finite")
    return a


def _strongly_connected(adj: np.ndarray) -> bool:
    """Depth-first reachability from state 0 in both edge directions."""

    m = adj.shape[0]

    def reaches_all(graph: np.ndarray) -> bool:
        seen = np.zeros(m, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.nonzero(graph[i])[0]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated generator of an irreducible finite-state Markov chain.

    Parameters
    ----------
    entries : array_like, shape (m0, m0)
        Off-diagonal entries are jump rates (>= 0); every row sums to zero.

    Raises
    ------
    NegativeOffDiagonal
        If some rate q_ij (i != j) is negative.
    RowSumNonzero
        If a row sum deviates from zero by more than 1e-12.
    NotIrreducible
        If the positive-rate graph is not strongly connected.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = _as_float_matrix(self.entries)
        m = a.shape[0]
        for i in range(m):
            for j in range(m):
                if i != j and a[i, j] < 0:
                    raise NegativeOffDiagonal(i, j, float(a[i, j]))
        sums = a.sum(axis=1)
        bad = np.nonzero(np.abs(sums) > _ROW_SUM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise RowSumNonzero(i, float(sums[i]))
        adj = (a > 0) & ~np.eye(m, dtype=bool)
        if not _strongly_connected(adj):
            raise NotIrreducible("positive-rate graph is not strongly connected")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def m0(self) -> int:
        return self.entries.shape[0]

    @property
    def max_exit_rate(self) -> float:
        return float(np.max(-np.diag(self.entries)))


def validate_generator(entries) -> GeneratorMatrix:
    """Validate raw entries and wrap them as a GeneratorMatrix."""

    return GeneratorMatrix(entries)


@dataclass(frozen=True)
class RegimeModel:
    """Finite-state regime: parameter values, generator, step scale, start law.

    Parameters
    ----------
    states : array_like, shape (m0, r)
        Distinct parameter values the regime can take.  A 1-d array of length
        m0 is accepted for scalar (r = 1) problems.
    generator : GeneratorMatrix
    epsilon : float
        Transition scale, >= 0.  Must satisfy eps * max_i |q_ii| <= 1 so that
        I + eps * Q is a stochastic matrix.
    initial_dist : array_like, shape (m0,)
        Distribution of the initial state; entries >= 0, sum 1 within 1e-12.
    """

    states: np.ndarray
    generator: GeneratorMatrix
    epsilon: float
    initial_dist: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ConfigError(f"states must be (m0, r), got shape {s.shape}")
        m0 = self.generator.m0
        if s.shape[0] != m0:
            raise ConfigError(
                f"{s.shape[0]} states but the generator has {m0} rows"
            )
        for i in range(m0):
            for j in range(i + 1, m0):
                if np.array_equal(s[i], s[j]):
                    raise ConfigError(f"states {i} and {j} coincide")
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps < 0:
            raise ConfigError(f"epsilon must be >= 0, got {eps!r}")
        if eps * self.generator.max_exit_rate > 1.0 + 1e-15:
            raise ConfigError(
                f"epsilon = {eps!r} too large: eps * max|q_ii| = "
                f"{eps * self.generator.max_exit_rate!r} exceeds 1"
            )
        p0 = np.asarray(self.initial_dist, dtype=float)
        if p0.shape != (m0,):
            raise ConfigError(f"initial_dist must have shape ({m0},)")
        if np.any(p0 < 0):
            raise ConfigError("initial_dist entries must be >= 0")
        if abs(p0.sum() - 1.0) > _DIST_SUM_TOL:
            raise ConfigError(f"initial_dist sums to {p0.sum()!r}, expected 1")
        s = s.copy()
        s.flags.writeable = False
        p0 = p0.copy()
        p0.flags.writeable = False
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "initial_dist", p0)

    @property
    def m0(self) -> int:
        return self.generator.m0

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def transition_matrix(model: RegimeModel) -> np.ndarray:
    """One-step matrix P = I + eps * Q; rows sum to one within 1e-12."""

    m0 = model.m0
    p = np.eye(m0) + model.epsilon * model.generator.entries
    return p


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Stationary law nu of the generator, solving nu Q = 0, sum(nu) = 1.

    The transposed system is made square by replacing one redundant balance
    equation with the normalization row, then solved by dense LU.  The result
    is checked: residual ||nu Q||_inf <= 1e-10 and nu >= 0.

    Raises
    ------
    SingularSystem
        If the solve fails or the residual check does not hold.
    """

    q = gen.entries
    m0 = gen.m0
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(m0)
    b[-1] = 1.0
    try:
        nu = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"stationary solve failed: {exc}") from exc
    residual = float(np.max(np.abs(nu @ q)))
    if residual > _STATIONARY_RESIDUAL_TOL or np.any(nu < -_STATIONARY_RESIDUAL_TOL):
        raise SingularSystem(
            f"stationary solution rejected (residual {residual:.3e})"
        )
    return nu


def mean_parameter(states, dist) -> np.ndarray:
    """Average parameter sum_i dist_i * a_i as a vector of length r."""

    s = np.asarray(states, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    d = np.asarray(dist, dtype=float)
    if d.shape != (s.shape[0],):
        raise ConfigError(
            f"distribution shape {d.shape} does not match {s.shape[0]} states"
        )
    return (d[:, None] * s).sum(axis=0)


@dataclass(frozen=True)
class ChainPath:
    """A realized regime path, discrete (per-iterate) or continuous-time.

    Discrete paths store the state index at every filter iterate.  Continuous
    paths store the initial index, the strictly increasing jump times and the
    index sequence after each jump; the path is right-continuous.
    """

    kind: str
    indices: np.ndarray | None = None
    jump_times: np.ndarray | None = None
    state_seq: np.ndarray | None = None
    horizon: float | None = None

    def __post_init__(self):
        if self.kind == "discrete":
            if self.indices is None:
                raise ConfigError("discrete path needs indices")
            idx = np.asarray(self.indices, dtype=np.int64)
            idx.flags.writeable = False
            object.__setattr__(self, "indices", idx)
        elif self.kind == "continuous":
            if self.jump_times is None or self.state_seq is None or self.horizon is None:
                raise ConfigError("continuous path needs jump_times, state_seq, horizon")
            t = np.asarray(self.jump_times, dtype=float)
            s = np.asarray(self.state_seq, dtype=np.int64)
            if s.shape != (t.shape[0] + 1,):
                raise ConfigError("state_seq must be one longer than jump_times")
            if t.size and (np.any(np.diff(t) <= 0) or t[0] <= 0 or t[-1] > self.horizon):
                raise ConfigError("jump times must be strictly increasing in (0, horizon]")
            t.flags.writeable = False
            s.flags.writeable = False
            object.__setattr__(self, "jump_times", t)
            object.__setattr__(self, "state_seq", s)
        else:
            raise ConfigError(f"unknown path kind {self.kind!r}")

    def state_at(self, t: float) -> int:
        """State index of a continuous path at time t (right-continuous)."""

        if self.kind != "continuous":
            raise ConfigError("state_at applies to continuous paths")
        if t < 0 or t > self.horizon:
            raise ConfigError(f"t = {t!r} outside [0, {self.horizon!r}]")
        pos = int(np.searchsorted(self.jump_times, t, side="right"))
        return int(self.state_seq[pos])

    @staticmethod
    def from_discrete(indices, dt: float) -> "ChainPath":
        """Continuous path with a jump at k*dt for every discrete transition."""

        idx = np.asarray(indices, dtype=np.int64)
        change = np.nonzero(np.diff(idx) != 0)[0] + 1
        return ChainPath(
            kind="continuous",
            jump_times=change * dt,
            state_seq=np.concatenate(([idx[0]], idx[change])),
            horizon=idx.size * dt,
        )


def categorical_indices(cum: np.ndarray, u) -> np.ndarray:
    """Inverse-CDF lookup: index of the first cumulative weight above u.

    cum has the cumulative distribution(s) along the last axis; u broadcasts
    against the leading axes.  Shared by the one-path samplers and the batch
    replication engine so both consume uniforms identically.
    """

    u = np.asarray(u)
    idx = (cum <= u[..., None]).sum(axis=-1)
    return np.minimum(idx, cum.shape[-1] - 1)


def sample_dtmc(model: RegimeModel, n_steps: int, rng: np.random.Generator) -> ChainPath:
    """Sample alpha_0, ..., alpha_n of the discrete-time regime.

    Draws n_steps + 1 uniforms up front (one for the initial state, one per
    transition) and maps them through inverse CDFs, so a path is a pure
    function of the generator state.

    Returns
    -------
    ChainPath
        Discrete path with n_steps + 1 state indices.
    """

    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    u = rng.random(n_steps + 1)
    cum_p0 = np.cumsum(model.initial_dist)
    cum_rows = np.cumsum(transition_matrix(model), axis=1)
    idx = np.empty(n_steps + 1, dtype=np.int64)
    idx[0] = categorical_indices(cum_p0, u[0])
    for k in range(n_steps):
        idx[k + 1] = categorical_indices(cum_rows[idx[k]], u[k + 1])
    return ChainPath(kind="discrete", indices=idx)


def sample_dtmc_batch(
    model: RegimeModel, n_steps: int, uniforms: np.ndarray
) -> np.ndarray:
    """Vectorized sample_dtmc over replications.

    uniforms has shape (n_reps, n_steps + 1); each row must come from that
    replication's own stream in the canonical order.  Row i equals the
    indices sample_dtmc would produce from the same uniforms.
    """

    n_reps = uniforms.shape[0]
    if uniforms.shape[1] != n_steps + 1:
        raise DimensionMismatch(
            f"need {n_steps + 1} uniforms per row, got {uniforms.shape[1]}"
        )
    cum_p0 = np.cumsum(model.initial_dist)
    cum_rows = np.cumsum(transition_matrix(model), axis=1)
    idx = np.empty((n_reps, n_steps + 1), dtype=np.int64)
    idx[:, 0] = categorical_indices(cum_p0[None, :], uniforms[:, 0])
    for k in range(n_steps):
        idx[:, k + 1] = categorical_indices(cum_rows[idx[:, k]], uniforms[:, k + 1])
    return idx


def sample_ctmc(
    gen: GeneratorMatrix,
    initial_dist,
    horizon: float,
    rng: np.random.Generator,
) -> ChainPath:
    """Sample a continuous-time path on [0, horizon] by the jump-chain method.

    Holding times in state i are exponential with rate -q_ii; on a jump the
    next state j != i is chosen with probability q_ij / (-q_ii).
    """

    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    p0 = np.asarray(initial_dist, dtype=float)
    if p0.shape != (gen.m0,) or np.any(p0 < 0) or abs(p0.sum() - 1) > _DIST_SUM_TOL:
        raise ConfigError("initial_dist must be a probability vector over the states")
    q = gen.entries
    rates = -np.diag(q)
    jump = q / np.where(rates > 0, rates, 1.0)[:, None]
    np.fill_diagonal(jump, 0.0)
    cum_jump = np.cumsum(jump, axis=1)
    cum_p0 = np.cumsum(p0)

    state = int(categorical_indices(cum_p0, rng.random()))
    seq = [state]
    times = []
    t = 0.0
    while True:
        rate = rates[state]
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t > horizon:
            break
        state = int(categorical_indices(cum_jump[state], rng.random()))
        times.append(t)
        seq.append(state)
    return ChainPath(
        kind="continuous",
        jump_times=np.asarray(times),
        state_seq=np.asarray(seq),
        horizon=float(horizon),
    )


def evolve_probability(p0, gen: GeneratorMatrix, t: float) -> np.ndarray:
    """Marginal law at time t of the continuous-time chain started from p0.

    Integrates dp/dt = p Q by classical RK4 with a fixed step no larger than
    1e-3 / max|q_ii| and renormalizes the result to unit mass.  Kept as an
    explicit integrator (not a matrix exponential) so the same code path is
    exercised as in the coupled limit systems.
    """

    p = np.asarray(p0, dtype=float)
    if p.shape != (gen.m0,):
        raise ConfigError(f"p0 must have shape ({gen.m0},)")
    if np.any(p < 0) or abs(p.sum() - 1) > _DIST_SUM_TOL:
        raise ConfigError("p0 must be a probability vector")
    if t < 0:
        raise ConfigError("t must be >= 0")
    if t == 0:
        return p.copy()
    q = gen.entries
    h_max = _PROB_STEP_SCALE / max(gen.max_exit_rate, 1e-300)
    n = max(1, int(np.ceil(t / h_max)))
    h = t / n
    for _ in range(n):
        k1 = p @ q
        k2 = (p + 0.5 * h * k1) @ q
        k3 = (p + 0.5 * h * k2) @ q
        k4 = (p + h * k3) @ q
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p / p.sum()
