"""Built-in worked instances and their published reference values."""

import math

import numpy as np

from .problem import ProblemSpec, chain

__all__ = ["FIXTURES", "REFERENCE", "fixture", "decoupled"]


def _two_by_two():
    return chain(2, 1.0, p0=[1.0, 0.0], label="2x2 chain, xi=1")


def _three_by_three():
    return chain(3, 1.0, p0=[1.0, 1.0, 0.0], label="3x3 chain, xi=1, p0=(1,1,0)")


def _three_chain():
    # the middle state is lifted to eps at simulation time by the kick
    return chain(3, 1.0, p0=[1.0, 0.0, 0.0], label="3-chain limit, xi=1, p0=(1,0,0)")


FIXTURES = {
    "2x2": _two_by_two,
    "3x3": _three_by_three,
    "3chain": _three_chain,
}


def fixture(name):
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def decoupled():
    """Block-diagonal instance whose coupling graph is disconnected."""
    A = np.array([[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return ProblemSpec(A, [1.0, 0.0, 0.0], label="decoupled")


#: published values (value, tolerance) for the worked instances
REFERENCE = {
    "2x2": {
        "efficiency": (math.sqrt(2.0) - 1.0, 1e-6),
        "energy": (3.0 - 2.0 * math.sqrt(2.0), 1e-6),
    },
    "3x3": {
        "energy": (0.2821, 1e-3),
        "eigenvalue": (0.8589, 2e-3),
        "eigenvector": ((0.4546, 0.8257, 0.3339), 2e-3),
        "matrix": (
            (
                (0.1775, 0.3225, 0.1304),
                (0.3225, 0.5856, 0.2368),
                (0.1304, 0.2368, 0.0958),
            ),
            2e-3,
        ),
        "efficiency": (0.5311, 1e-3),
        "x0": (1.8163, 2e-3),
        "y0": (0.7345, 2e-3),
    },
    "3chain": {
        "efficiency": (2.0 - math.sqrt(3.0), None),
        # tolerance per delta in the (1, delta^2, delta^2) limit sequence
        "limit_tolerances": {1e-2: 1e-2, 1e-3: 3e-3},
    },
}
