import numpy as np
import pytest

from regfit import linear, physics


@pytest.fixture
def poisson_problem():
    """u'' = -pi^2 sin(pi x) on [0, 1] with u(0) = u(1) = 0; solution sin(pi x)."""
    return physics.CollocationProblem(
        a=lambda x: 1.0,
        b=lambda x: 0.0,
        c=lambda x: 0.0,
        source=lambda x: -np.pi**2 * np.sin(np.pi * x),
        domain=(0.0, 1.0),
        boundary=(
            physics.BoundaryCondition(0.0, "dirichlet", 0.0),
            physics.BoundaryCondition(1.0, "dirichlet", 0.0),
        ),
    )


@pytest.fixture
def poisson_basis():
    centers = np.linspace(0.0, 1.0, 40)[:, None]
    return linear.GaussianRBF(centers, np.full(40, 8.0))
