"""Shared fixtures: the standard three-state scalar setup used throughout."""

from __future__ import annotations

import numpy as np
import pytest

import signtrack as st

# Three-state generator with uniform stationary law; rows sum to zero and
# column sums are zero too, which is what makes the uniform law stationary.
THREE_STATE_Q = [[-0.6, 0.4, 0.2], [0.2, -0.5, 0.3], [0.4, 0.1, -0.5]]
SKEWED_START = [0.75, 0.125, 0.125]
SCALAR_STATES = [[-1.0], [0.0], [1.0]]

# Exact means of the scalar states under the start law and the uniform law.
START_MEAN = -0.625
STATIONARY_MEAN = 0.0

# Closed-form gain of the sign nonlinearity for unit regressor variance and
# noise standard deviation 1/2: sqrt(2/pi)/0.5.
SCALAR_GAIN = float(np.sqrt(2.0 / np.pi) / 0.5)


@pytest.fixture(scope="session")
def generator() -> st.GeneratorMatrix:
    return st.GeneratorMatrix(THREE_STATE_Q)


@pytest.fixture(scope="session")
def scalar_signal() -> st.SignalModel:
    return st.gaussian_signal_model(np.eye(1), 0.25)


@pytest.fixture(scope="session")
def scalar_regime(generator) -> st.RegimeModel:
    return st.RegimeModel(
        states=SCALAR_STATES,
        generator=generator,
        epsilon=0.03,
        initial_dist=SKEWED_START,
    )


def make_regime(generator=None, epsilon=0.03, states=SCALAR_STATES, initial=SKEWED_START):
    if generator is None:
        generator = st.GeneratorMatrix(THREE_STATE_Q)
    return st.RegimeModel(
        states=states, generator=generator, epsilon=epsilon, initial_dist=initial
    )


def make_scenario(
    generator=None,
    signal=None,
    coupling: st.Coupling | None = None,
    mu: float = 0.05,
    n_steps: int = 1000,
    n_replications: int = 1,
    master_seed: int = 4,
    algorithm: str = "SE",
    states=SCALAR_STATES,
    initial=SKEWED_START,
    theta0=None,
    regressor_var: float = 1.0,
    noise_var: float = 0.25,
) -> st.Scenario:
    if generator is None:
        generator = st.GeneratorMatrix(THREE_STATE_Q)
    if signal is None:
        signal = st.gaussian_signal_model(np.eye(1) * regressor_var, noise_var)
    if coupling is None:
        coupling = st.Coupling("proportional", 0.6)
    regime = st.RegimeModel(
        states=states,
        generator=generator,
        epsilon=coupling.epsilon(mu),
        initial_dist=initial,
    )
    filt = st.FilterConfig(
        algorithm=algorithm,
        mu=mu,
        theta0=np.zeros(regime.dim) if theta0 is None else theta0,
    )
    return st.Scenario(
        regime=regime,
        signal=signal,
        filter=filt,
        coupling=coupling,
        n_steps=n_steps,
        n_replications=n_replications,
        master_seed=master_seed,
    )
