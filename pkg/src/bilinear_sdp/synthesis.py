"""Turn an optimal ``M`` into executable controls.

* :func:`schedule_from_solution` splits ``M = sum_k lambda_k m_k m_k^T`` into
  piecewise-constant unit directions in rescaled time, cycled ``N`` times.
* :class:`FeedbackLaw` realizes one direction as state feedback ``u(r)`` for
  the radial system, with ``|u_i| <= 1``.
* :func:`physical_controls` converts ``u`` and its rate into the rotation
  controls ``v`` of the bilinear ``(x, y)`` system.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, SingularControlError
from .linalg import spectral_decompose, sym_matrix

__all__ = [
    "ControlSchedule",
    "FeedbackLaw",
    "schedule_from_solution",
    "choose_repetitions",
    "feedback_controls",
    "feedback_rates",
    "epsilon_kick",
    "radial_rates",
    "physical_controls",
    "U_CLAMP",
]

#: |u| is clamped to this before taking arccos.
U_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True, eq=False)
class FeedbackLaw:
    """Feedback realizing one constant direction ``m``.

    ``pivot`` is the index of the largest ``|m_i|``; ``ratios`` are
    ``m_i / m_pivot``.
    """

    direction: np.ndarray
    pivot: int
    ratios: np.ndarray

    @classmethod
    def from_direction(cls, m):
        m = np.asarray(m, dtype=float).ravel()
        norm = np.linalg.norm(m)
        if norm == 0:
            raise InvalidInputError("direction must be non-zero")
        m = m / norm
        j = int(np.argmax(np.abs(m)))
        return cls(m, j, m / m[j])

    def to_dict(self):
        return {"pivot": self.pivot, "ratios": self.ratios.tolist()}


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """One cycle of ``(duration, direction)`` pairs, repeated ``repetitions`` times.

    Durations are in rescaled time and already divided by ``repetitions``.
    """

    durations: np.ndarray
    directions: np.ndarray
    repetitions: int = 1

    @property
    def rank(self):
        return len(self.durations)

    @property
    def total_duration(self):
        return float(np.sum(self.durations) * self.repetitions)

    @property
    def segments(self):
        """Fully expanded list of ``(duration, direction)``."""
        cycle = list(zip(self.durations, self.directions))
        return cycle * self.repetitions

    @property
    def laws(self):
        return [FeedbackLaw.from_direction(m) for m in self.directions]

    def boundaries(self):
        """Cumulative rescaled times at which each expanded segment ends."""
        return np.cumsum([d for d, _ in self.segments])

    def matrix(self):
        """``sum duration * m m^T`` over the expanded schedule."""
        n = self.directions.shape[1]
        out = np.zeros((n, n))
        for d, m in zip(self.durations, self.directions):
            out += self.repetitions * d * np.outer(m, m)
        return out

    def with_repetitions(self, n_reps):
        scale = self.repetitions / n_reps
        return ControlSchedule(self.durations * scale, self.directions, n_reps)

    def to_dict(self):
        laws = self.laws
        return {
            "repetitions": self.repetitions,
            "total_duration": self.total_duration,
            "segments": [
                {"duration": float(d), "direction": m.tolist(), **law.to_dict()}
                for d, m, law in zip(self.durations, self.directions, laws)
            ],
        }


def schedule_from_solution(m_opt, n_reps=1, rel_tol=1e-12):
    """Eigen-split ``m_opt`` into a direction schedule.

    Eigenpairs with ``lambda > rel_tol * lambda_max`` become segments of
    duration ``lambda / n_reps``. A rank-1 matrix yields a single segment
    whatever ``n_reps`` is, since repeating one direction changes nothing.
    """
    if n_reps < 1:
        raise InvalidInputError("n_reps must be >= 1")
    M = sym_matrix(m_opt)
    n = M.shape[0]
    w, v = spectral_decompose(M)
    if w[0] <= 0:
        return ControlSchedule(np.zeros(0), np.zeros((0, n)), 1)
    keep = w > rel_tol * w[0]
    lam = w[keep]
    if len(lam) == 1:
        n_reps = 1
    return ControlSchedule(lam / n_reps, v[:, keep].T.copy(), int(n_reps))


def choose_repetitions(m_opt, p0, A, cap=4096, floor=-1e-9):
    """Smallest power of two ``N <= cap`` keeping every ``p_i >= floor``.

    The p-trajectory is piecewise linear, so checking the vertices is exact.
    Rank <= 1 needs no repetition. If no ``N`` up to ``cap`` works, a
    ``RuntimeWarning`` is issued and ``cap`` is returned.
    """
    from .simulate import simulate_p

    base = schedule_from_solution(m_opt)
    if base.rank <= 1:
        return 1
    N = 1
    while N <= cap:
        traj = simulate_p(base.with_repetitions(N), p0, A)
        if traj.states.min() >= floor:
            return N
        N *= 2
    warnings.warn(
        f"no repetition count up to {cap} keeps the p-trajectory nonnegative",
        RuntimeWarning,
        stacklevel=2,
    )
    return cap


def _feedback(law, r):
    s = law.ratios
    j = law.pivot
    need = s != 0
    if r[j] <= 0 or np.any(r[need] <= 0):
        return np.zeros_like(r), np.inf, -1
    g = np.zeros_like(r)
    g[need] = s[need] * r[j] / r[need]
    k = int(np.argmax(np.abs(g)))
    big_m = abs(g[k])
    return g / big_m, big_m, k


def feedback_controls(law, r):
    """Controls ``u`` with ``u_i r_i`` parallel to the law's direction.

    ``u_pivot = 1 / Mx`` and ``u_i = s_i r_pivot u_pivot / r_i`` where
    ``Mx = max_i |s_i r_pivot / r_i|``. Returns zeros (a stationary state)
    when a radius needed by the law is zero.
    """
    r = np.asarray(r.r if hasattr(r, "r") else r, dtype=float)
    return _feedback(law, r)[0]


def radial_rates(A, u, r):
    """``dr_i/dt = sum_j a_ij u_i u_j r_j``."""
    return u * (A @ (u * r))


def feedback_rates(law, r, rdot):
    """Time derivative of :func:`feedback_controls` along a trajectory.

    Obtained by the chain rule through ``r``, so no finite differences.
    """
    r = np.asarray(r, dtype=float)
    u, big_m, k = _feedback(law, r)
    if k < 0:
        return np.zeros_like(r)
    s = law.ratios
    j = law.pivot
    gk = s[k] * r[j] / r[k]
    gk_dot = s[k] * (rdot[j] * r[k] - r[j] * rdot[k]) / r[k] ** 2
    uj_dot = -np.sign(gk) * gk_dot / big_m**2
    udot = np.zeros_like(r)
    need = s != 0
    rn = r[need]
    udot[need] = (
        s[need] * ((rdot[j] * u[j] + r[j] * uj_dot) * rn - r[j] * u[j] * rdot[need]) / rn**2
    )
    udot[j] = uj_dot
    if k != j:
        udot[k] = 0.0  # |u_k| = 1 while k attains the maximum
    return udot


def epsilon_kick(r0, law, eps=None):
    """Lift zero radii that a law needs to ``eps``.

    ``law`` may be a single :class:`FeedbackLaw` or a sequence of them. The
    default ``eps`` is ``1e-3 * max(r0)``.
    """
    r = np.array(r0.r if hasattr(r0, "r") else r0, dtype=float)
    laws = [law] if isinstance(law, FeedbackLaw) else list(law)
    if eps is None:
        eps = 1e-3 * float(r.max())
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    needed = np.zeros(r.shape, dtype=bool)
    for lw in laws:
        needed |= lw.ratios != 0
    r[(r == 0) & needed] = eps
    return r


def physical_controls(u, r, u_dot, A):
    """Rotation controls ``v`` of the bilinear system realizing ``u(t)``.

    With phases ``phi_i = arccos(u_i)`` this is
    ``v_i = -dphi_i/dt - (dr_i/dt / r_i) tan(phi_i)``, evaluated in the
    equivalent form ``-dphi_i/dt - sin(phi_i) (A (u*r))_i / r_i`` that stays
    finite at ``u_i = 0``.

    Raises
    ------
    SingularControlError
        If ``r_i = 0`` while ``u_dot_i != 0``.
    """
    u = np.clip(np.asarray(u, dtype=float), -U_CLAMP, U_CLAMP)
    r = np.asarray(r, dtype=float)
    u_dot = np.asarray(u_dot, dtype=float)
    A = np.asarray(A, dtype=float)
    zero = r <= 0
    if np.any(zero & (u_dot != 0)):
        raise SingularControlError("cannot set the phase of a zero-radius component")
    sin_phi = np.sqrt(1.0 - u * u)
    phi_dot = -u_dot / sin_phi
    drive = A @ (u * r)
    v = -phi_dot
    pos = ~zero
    v[pos] -= sin_phi[pos] * drive[pos] / r[pos]
    return v
