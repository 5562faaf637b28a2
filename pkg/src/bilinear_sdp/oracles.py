"""Closed-form reference values for the chain examples.

Two-state chain with relaxation ratio ``xi``: in rescaled time the direction
``m = (1, x) / |(1, x)|`` moves ``p`` along a line of slope
``f(x) = (x - xi x^2) / (x + xi)`` (target gain per unit of ``p_1`` spent).
The best slope is attained at ``x0 = sqrt(1 + xi^2) - xi`` where
``f(x0) = x0^2``.

Three-state chain started from ``(1, 0+, 0)`` with the middle state held
fixed: the gain with ratios ``x = m_2/m_1``, ``y = m_3/m_1`` is
``g(x, y) = (x y - xi y^2) / (x + xi)`` under ``y = 1 - xi x`` for the
middle balance; it peaks at ``x0 = sqrt(xi^2 + 2) - xi`` with value
``x0^4 / 4``.

Closed forms are benign in double precision for ``xi`` in [1e-3, 1e3].
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "ClosedForm2x2",
    "ClosedForm3Chain",
    "analytic_2x2",
    "analytic_3chain",
    "analytic_reachable_2x2",
    "slope_2x2",
    "gain_3chain",
]


def _check_xi(xi):
    xi = float(xi)
    if not xi > 0 or not math.isfinite(xi):
        raise InvalidInputError(f"xi must be positive and finite, got {xi}")
    return xi


def slope_2x2(x, xi):
    """Target gain per unit of ``p_1`` for direction ratio ``x = m_2 / m_1``."""
    x = np.asarray(x, dtype=float)
    return (x - xi * x * x) / (x + xi)


def gain_3chain(x, y, xi):
    """``g(x, y) = (x y - xi y^2) / (x + xi)``."""
    return (x * y - xi * y * y) / (x + xi)


@dataclass(frozen=True)
class ClosedForm2x2:
    xi: float
    x0: float

    @property
    def efficiency(self):
        """Largest final ``r_2`` from ``r = (1, 0)``."""
        return self.x0

    @property
    def p_gain(self):
        return self.x0**2

    @property
    def direction(self):
        return np.array([1.0, self.x0]) / math.sqrt(1.0 + self.x0**2)

    @property
    def f_at_x0(self):
        return float(slope_2x2(self.x0, self.xi))


@dataclass(frozen=True)
class ClosedForm3Chain:
    xi: float
    x0: float

    @property
    def f_max(self):
        return self.x0**4 / 4.0

    @property
    def efficiency(self):
        """Limit of the final ``r_3`` from ``r = (1, eps, 0)`` as ``eps -> 0``."""
        return self.x0**2 / 2.0

    @property
    def y0(self):
        return 1.0 - self.xi * self.x0

    @property
    def interval(self):
        """Range ``[xi / (1 + xi^2), 1 / xi]`` that contains ``x0``."""
        return self.xi / (1.0 + self.xi**2), 1.0 / self.xi


def analytic_2x2(xi):
    """Closed form for the two-state chain ``[[-xi, -1], [1, -xi]]``.

    Raises
    ------
    InvalidInputError
        If ``xi <= 0``.
    """
    xi = _check_xi(xi)
    # x0 = sqrt(1 + xi^2) - xi, written to avoid cancellation at large xi
    return ClosedForm2x2(xi, 1.0 / (math.hypot(1.0, xi) + xi))


def analytic_3chain(xi):
    """Closed form for the three-state chain with the middle state held fixed."""
    xi = _check_xi(xi)
    return ClosedForm3Chain(xi, 2.0 / (math.sqrt(xi * xi + 2.0) + xi))


def analytic_reachable_2x2(xi, r1, r2):
    """Membership in the closed reachable set from ``r = (1, 0)``.

    True iff ``r1, r2 >= 0`` and ``r2^2 + x0^2 r1^2 <= x0^2`` (1e-12 slack).
    """
    x0 = analytic_2x2(xi).x0
    if r1 < 0 or r2 < 0:
        return False
    return r2 * r2 + x0 * x0 * r1 * r1 <= x0 * x0 + 1e-12
