import numpy as np
import pytest

from app.api.gains import GainSet, find_gammas, inflate_gamma2, synthesize_gains
from app.api.sim import GainDocument, ScenarioConfig, SignalSpec, Waveform, paper_gain_set


@pytest.fixture(scope="session")
def paper_gains() -> GainSet:
    return paper_gain_set(1.0)


@pytest.fixture(scope="session")
def toy_gains() -> GainSet:
    return GainSet(X=np.array([[1.0]]), Y=np.array([-2.0]), rho1=1.0, rho2=1.0, Delta=0.5)


@pytest.fixture(scope="session")
def n2_gains() -> GainSet:
    return synthesize_gains(2, 1.0, 0.5, 1.0, method="seeded")


@pytest.fixture(scope="session")
def n2_iss(n2_gains):
    return inflate_gamma2(n2_gains, find_gammas(n2_gains), 1.1)


@pytest.fixture(scope="session")
def n2_scenario(n2_gains) -> ScenarioConfig:
    """Two integrators, d = sin(10t), no noise and no mismatched perturbation."""
    return ScenarioConfig(
        name="n2",
        n=2,
        T=10.0,
        h=5e-3,
        x0=[1.0, 1.0],
        gains=GainDocument(**n2_gains.to_document()),
        signals=SignalSpec(matched=Waveform(kind="sin", amp=1.0, omega=10.0), Delta=1.0, noise=0.0),
    )
