import numpy as np
import pytest

from dirichlet_lab import DiscreteForm


@pytest.fixture
def k3():
    """3-state chain with killing at state 0: the hand-solvable fixture."""
    return DiscreteForm(m=np.ones(3),
                        J=np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.0]]),
                        kappa=np.array([1.0, 0.0, 0.0]))


@pytest.fixture
def two_state():
    return DiscreteForm(m=np.ones(2),
                        J=np.array([[0.0, 0.5], [0.5, 0.0]]),
                        kappa=np.array([1.0, 0.0]))
