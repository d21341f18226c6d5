import numpy as np
import pytest

from app.core.spectral import HermitianOperator, QuantumState, SpaceLayout, pauli


@pytest.fixture
def sx() -> HermitianOperator:
    return pauli("x")


@pytest.fixture
def sz() -> HermitianOperator:
    return pauli("z")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


def qubit(amplitudes) -> QuantumState:
    return QuantumState.normalized(SpaceLayout(2, 0, 1), amplitudes)
