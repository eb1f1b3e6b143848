"""Regressor and observation-noise model.

Signals are i.i.d. over iterates and independent of the regime chain: the
regressor phi_n is a zero-mean Gaussian vector with covariance Sigma_phi
(optionally truncated to a box), the noise e_n a zero-mean Gaussian scalar.
An observation is y_n = phi_n' a + e_n for the active parameter a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch

KIND_GAUSSIAN = "gaussian"
KIND_TRUNCATED = "truncated_gaussian"


@dataclass(frozen=True)
class DistSpec:
    """Zero-mean Gaussian (or box-truncated Gaussian) with covariance cov.

    clip is the half-width B of the truncation box; draws are rejected and
    retried until every component lies in [-B, B], which preserves symmetry
    (and hence the zero mean).
    """

    kind: str
    cov: np.ndarray
    clip: float | None = None

    def __post_init__(self):
        if self.kind not in (KIND_GAUSSIAN, KIND_TRUNCATED):
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ConfigError(f"covariance must be square, got shape {c.shape}")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise ConfigError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(c)
        if eigs.min() <= 0:
            raise ConfigError(
                f"covariance must be positive definite (min eigenvalue {eigs.min()!r})"
            )
        if self.kind == KIND_TRUNCATED:
            if self.clip is None or not (float(self.clip) > 0):
                raise ConfigError("truncated_gaussian needs a clip bound > 0")
            object.__setattr__(self, "clip", float(self.clip))
        elif self.clip is not None:
            raise ConfigError("clip is only meaningful for truncated_gaussian")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "cov", c)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)


@dataclass(frozen=True)
class SignalModel:
    """Joint model for the regressor process and the observation noise."""

    regressor: DistSpec
    noise: DistSpec

    def __post_init__(self):
        if self.noise.dim != 1:
            raise ConfigError("noise must be scalar (1x1 covariance)")

    @property
    def dim(self) -> int:
        return self.regressor.dim

    @property
    def noise_std(self) -> float:
        return float(np.sqrt(self.noise.cov[0, 0]))


def gaussian_signal_model(regressor_cov, noise_variance: float) -> SignalModel:
    """Convenience constructor for the plain Gaussian model."""

    return SignalModel(
        regressor=DistSpec(KIND_GAUSSIAN, np.atleast_2d(regressor_cov)),
        noise=DistSpec(KIND_GAUSSIAN, [[float(noise_variance)]]),
    )


def draw_block(spec: DistSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws, shape (n, dim), honoring truncation by redraws.

    Rejected rows are redrawn in index order until all lie inside the box,
    so the draw sequence is a deterministic function of the stream.
    """

    chol = spec.cholesky()
    x = rng.standard_normal((n, spec.dim)) @ chol.T
    if spec.kind == KIND_TRUNCATED:
        bad = np.nonzero(np.any(np.abs(x) > spec.clip, axis=1))[0]
        while bad.size:
            x[bad] = rng.standard_normal((bad.size, spec.dim)) @ chol.T
            bad = bad[np.any(np.abs(x[bad]) > spec.clip, axis=1)]
    return x


def sample_signal(model: SignalModel, rng: np.random.Generator):
    """One (phi, e) pair; phi has shape (r,), e is a float."""

    phi = draw_block(model.regressor, 1, rng)[0]
    e = float(draw_block(model.noise, 1, rng)[0, 0])
    return phi, e


def observe(phi, a, e: float) -> float:
    """Observation y = phi' a + e."""

    phi = np.asarray(phi, dtype=float)
    a = np.asarray(a, dtype=float)
    if phi.shape != a.shape:
        raise DimensionMismatch(
            f"regressor shape {phi.shape} does not match parameter shape {a.shape}"
        )
    return float((phi * a).sum() + e)
