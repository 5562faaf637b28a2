"""Integrate the p-, r- and (x, y)-systems.

The p-system is integrated exactly (it is piecewise linear in rescaled
time). The r- and (x, y)-systems run under closed-loop feedback with an
adaptive Runge-Kutta 4(5) integrator; rescaled time ``t' = int U^2 dt`` is
carried as an extra state so segment switches can be located by event
detection.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .problem import BilinearState
from .synthesis import (
    feedback_controls,
    feedback_rates,
    physical_controls,
    radial_rates,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "simulate_p",
    "simulate_r",
    "simulate_xy",
    "closed_loop_xy",
    "rescaled_time",
]


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step_fraction: float = 1e-3
    #: closed loops stop once t' >= (1 - tprime_tail) * T_f
    tprime_tail: float = 1e-4
    stall_rate: float = 1e-12
    default_horizon: float = 1e6
    #: closed-loop (x, y) runs: phase tracking gain and rotation cap
    phase_gain: float = 1.0
    max_rotation: float = 1e4


@dataclass(eq=False)
class Trajectory:
    """Time-sampled states in one coordinate system.

    ``space`` is ``"p"`` (times are rescaled times), ``"r"`` or ``"xy"``
    (states are ``x_1..x_n, y_1..y_n``).
    """

    times: np.ndarray
    states: np.ndarray
    space: str
    controls: np.ndarray = None
    U: np.ndarray = None
    tprime: np.ndarray = None
    meta: dict = field(default_factory=dict)
    #: (t_start, t_end, callable) pieces from the integrator's dense output
    dense: list = field(default_factory=list, repr=False)

    @property
    def n(self):
        return self.states.shape[1] // (2 if self.space == "xy" else 1)

    @property
    def final(self):
        return self.states[-1]

    def radii(self):
        if self.space == "r":
            return self.states
        if self.space == "p":
            return np.sqrt(np.clip(self.states, 0.0, None))
        n = self.n
        return np.hypot(self.states[:, :n], self.states[:, n:])

    def sample(self, t):
        """States at times ``t``, using the integrator's interpolant if present."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        width = self.states.shape[1]
        if not self.dense:
            return np.column_stack([np.interp(t, self.times, self.states[:, i]) for i in range(width)])
        out = np.empty((len(t), width))
        starts = np.array([a for a, _, _ in self.dense])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        for k in np.unique(idx):
            a, b, fn = self.dense[k]
            sel = idx == k
            out[sel] = fn(np.clip(t[sel], a, b)).T[:, :width]
        return out

    def radii_at(self, t):
        s = self.sample(t)
        if self.space == "r":
            return s
        if self.space == "p":
            return np.sqrt(np.clip(s, 0.0, None))
        n = self.n
        return np.hypot(s[:, :n], s[:, n:])

    def columns(self):
        n = self.n
        if self.space == "xy":
            state = [f"x_{i}" for i in range(1, n + 1)] + [f"y_{i}" for i in range(1, n + 1)]
            ctrl = "v"
        else:
            state = [f"{self.space}_{i}" for i in range(1, n + 1)]
            ctrl = "m" if self.space == "p" else "u"
        ctrl_cols = [f"{ctrl}_{i}" for i in range(1, n + 1)] if self.controls is not None else []
        return ["t", "tprime"] + state + ctrl_cols + ["U"]

    def to_csv(self, path_or_file, digits=12):
        rows = len(self.times)
        tprime = self.tprime if self.tprime is not None else self.times
        U = self.U if self.U is not None else np.ones(rows)
        parts = [self.times[:, None], tprime[:, None], self.states]
        if self.controls is not None:
            parts.append(self.controls)
        parts.append(U[:, None])
        table = np.hstack(parts)
        fmt = f"{{:.{digits}g}}"

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in table:
                w.writerow([fmt.format(x) for x in row])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)


def _p_rates(A, m):
    return 2.0 * m * (A @ m)


def simulate_p(schedule, p0, A):
    """Exact p-trajectory of a direction schedule, sampled at its vertices.

    Each segment moves ``p`` with the constant rate ``2 m_i (A m)_i``. The
    trajectory's ``meta["min_p"]`` and ``meta["nonnegative"]`` (tolerance
    1e-9) report whether the path left the admissible orthant.
    """
    A = np.asarray(A, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if schedule.rank == 0:
        states = p0[None, :].copy()
        times = np.zeros(1)
        controls = np.zeros((1, len(p0)))
    else:
        rates = np.array([_p_rates(A, m) for m in schedule.directions])
        steps = schedule.durations[:, None] * rates
        cycle = np.tile(steps, (schedule.repetitions, 1))
        states = np.vstack([p0, p0 + np.cumsum(cycle, axis=0)])
        times = np.concatenate([[0.0], np.cumsum(np.tile(schedule.durations, schedule.repetitions))])
        dirs = np.tile(schedule.directions, (schedule.repetitions, 1))
        controls = np.vstack([dirs, dirs[-1:]])
    min_p = float(states.min())
    return Trajectory(
        times=times,
        states=states,
        space="p",
        controls=controls,
        U=np.ones(len(times)),
        tprime=times.copy(),
        meta={"min_p": min_p, "nonnegative": min_p >= -1e-9},
    )


def _segment_targets(schedule, cfg):
    bounds = schedule.boundaries()
    if len(bounds):
        bounds = bounds.copy()
        bounds[-1] = (1.0 - cfg.tprime_tail) * bounds[-1]
    return bounds


def _run_closed_loop(rhs_for, z0, laws, targets, horizon, cfg):
    """Integrate segment by segment; the last state component is ``t'``.

    ``rhs_for(law)`` returns ``f(t, z)``. Each segment ends when ``t'``
    reaches its target (event), when motion stalls, or at ``horizon``.
    """
    ts, zs, seg_index = [np.zeros(1)], [z0[None, :]], [np.zeros(1, dtype=int)]
    dense = []
    t0 = 0.0
    z = z0.copy()
    meta = {"status": "ok", "segments_completed": 0, "reached_target": False}
    max_step = cfg.max_step_fraction * horizon
    for k, (law, target) in enumerate(zip(laws, targets)):
        if t0 >= horizon:
            break
        f = rhs_for(law)

        def reach(t, zz, target=target):
            return zz[-1] - target

        reach.terminal = True
        reach.direction = 1

        def stall(t, zz, f=f):
            return np.linalg.norm(f(t, zz)[:-1]) - cfg.stall_rate

        stall.terminal = True
        stall.direction = -1

        if z[-1] >= target:
            meta["segments_completed"] = k + 1
            continue
        if stall(t0, z) <= 0:
            # already at rest: the event only fires on a crossing
            meta["status"] = "stalled"
            break
        sol = solve_ivp(
            f, (t0, horizon), z, method="RK45", rtol=cfg.rtol, atol=cfg.atol,
            max_step=max_step, events=[reach, stall], dense_output=True,
        )
        if sol.sol is not None and sol.t[-1] > t0:
            dense.append((t0, float(sol.t[-1]), sol.sol))
        ts.append(sol.t[1:])
        zs.append(sol.y.T[1:])
        seg_index.append(np.full(len(sol.t) - 1, k))
        t0 = float(sol.t[-1])
        z = sol.y[:, -1].copy()
        if sol.status == -1:
            meta["status"] = "numeric-failure"
            meta["message"] = sol.message
            break
        if sol.status == 1 and len(sol.t_events[0]):
            meta["segments_completed"] = k + 1
            continue
        if sol.status == 1:
            meta["status"] = "stalled"
        break
    else:
        meta["reached_target"] = True
    t = np.concatenate(ts)
    Z = np.vstack(zs)
    segs = np.concatenate(seg_index)
    keep = np.concatenate([[True], np.diff(t) > 0])
    meta["horizon"] = horizon
    return t[keep], Z[keep], segs[keep], meta, dense


def simulate_r(A, schedule, r0, horizon=None, cfg=None):
    """Closed-loop radial system ``dr_i/dt = sum_j a_ij u_i u_j r_j``.

    Controls come from the feedback law of the active segment; segments
    switch when the accumulated ``t'`` crosses their boundary. The run ends
    when ``t'`` reaches ``(1 - tprime_tail) * T_f``, when motion stalls,
    or at ``horizon``. ``meta["status"]`` is ``"numeric-failure"`` if the
    integrator gave up; the partial trajectory is still returned.
    """
    cfg = cfg or IntegratorConfig()
    A = np.asarray(A, dtype=float)
    r0 = np.asarray(r0.r if hasattr(r0, "r") else r0, dtype=float)
    horizon = cfg.default_horizon if horizon is None else float(horizon)
    laws = schedule.laws * schedule.repetitions if schedule.rank else []

    def rhs_for(law):
        def f(t, z):
            r = np.clip(z[:-1], 0.0, None)
            u = feedback_controls(law, r)
            return np.append(radial_rates(A, u, r), np.sum((u * r) ** 2))

        return f

    z0 = np.append(r0, 0.0)
    if not laws:
        t = np.array([0.0, horizon])
        Z = np.vstack([z0, z0])
        segs = np.zeros(2, dtype=int)
        meta = {"status": "ok", "segments_completed": 0, "reached_target": True, "horizon": horizon}
        dense = []
    else:
        t, Z, segs, meta, dense = _run_closed_loop(rhs_for, z0, laws, _segment_targets(schedule, cfg), horizon, cfg)
    R = Z[:, :-1]
    if laws:
        U_ctrl = np.array([feedback_controls(laws[s], np.clip(r, 0.0, None)) for s, r in zip(segs, R)])
    else:
        U_ctrl = np.zeros_like(R)
    meta["T_f"] = schedule.total_duration
    return Trajectory(
        times=t,
        states=R,
        space="r",
        controls=U_ctrl,
        U=np.sqrt(np.sum((U_ctrl * R) ** 2, axis=1)),
        tprime=Z[:, -1],
        meta=meta,
        dense=dense,
    )


def simulate_xy(A, s0, v_source, horizon, cfg=None, events=None):
    """Bilinear system ``x' = -V y``, ``y' = V x + A y`` with ``V = diag(v)``.

    ``v_source(t, x, y)`` supplies the controls. Rescaled time is
    accumulated as ``int |y|^2 dt`` (``u_i r_i = y_i``).
    """
    cfg = cfg or IntegratorConfig()
    A = np.asarray(A, dtype=float)
    n = A.shape[0]

    def f(t, z):
        x, y = z[:n], z[n:2 * n]
        v = v_source(t, x, y)
        return np.concatenate([-v * y, v * x + A @ y, [y @ y]])

    z0 = np.append(s0.as_vector(), 0.0)
    sol = solve_ivp(
        f, (0.0, float(horizon)), z0, method="RK45", rtol=cfg.rtol, atol=cfg.atol,
        max_step=cfg.max_step_fraction * horizon, events=events, dense_output=True,
    )
    Z = sol.y.T
    V = np.array([v_source(t, z[:n], z[n:2 * n]) for t, z in zip(sol.t, Z)])
    Y = Z[:, n:2 * n]
    meta = {"status": "numeric-failure" if sol.status == -1 else "ok", "horizon": horizon}
    return Trajectory(
        times=sol.t, states=Z[:, :-1], space="xy", controls=V,
        U=np.linalg.norm(Y, axis=1), tprime=Z[:, -1], meta=meta,
        dense=[(0.0, float(sol.t[-1]), sol.sol)] if sol.sol is not None else [],
    )


def _xy_law_controls(A, law, x, y, cfg):
    """Physical controls realizing ``law`` from bilinear state ``(x, y)``.

    Feed-forward :func:`physical_controls` at the state's own phases (which
    keeps any phase offset constant) plus a proportional pull
    ``phase_gain * (phi_law - phi_state)``, since the phase is otherwise only
    neutrally stable and integration error would accumulate over long runs.
    Where a phase must sweep through 0 or pi with non-zero speed the required rotation is unbounded (an integrable singularity), so
    ``|v|`` is capped at ``max_rotation``.
    """
    r = np.hypot(x, y)
    pos = r > 0
    safe = np.where(pos, r, 1.0)
    u = feedback_controls(law, r)
    rdot = np.where(pos, y * (A @ y) / safe, 0.0)
    u_dot = feedback_rates(law, r, rdot)
    v = physical_controls(np.where(pos, y / safe, 0.0), r, u_dot, A)
    phi_law = np.arccos(np.clip(u, -1.0, 1.0))
    err = np.angle(np.exp(1j * (phi_law - np.arctan2(x, y))))
    v -= cfg.phase_gain * np.where(pos, err, 0.0)
    return np.clip(v, -cfg.max_rotation, cfg.max_rotation)


def closed_loop_xy(A, schedule, r0, horizon=None, cfg=None):
    """Bilinear system driven by the physical realization of the feedback law.

    The start state puts each radius at the phase the first law asks for
    (an instantaneous rotation, which unbounded ``v`` permits). Segment
    switching and termination follow :func:`simulate_r`.
    """
    cfg = cfg or IntegratorConfig()
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    r0 = np.asarray(r0.r if hasattr(r0, "r") else r0, dtype=float)
    horizon = cfg.default_horizon if horizon is None else float(horizon)
    laws = schedule.laws * schedule.repetitions if schedule.rank else []
    u0 = feedback_controls(laws[0], r0) if laws else np.zeros(n)
    s0 = BilinearState.from_radial(r0, u0)

    def rhs_for(law):
        def f(t, z):
            x, y = z[:n], z[n:2 * n]
            v = _xy_law_controls(A, law, x, y, cfg)
            return np.concatenate([-v * y, v * x + A @ y, [y @ y]])

        return f

    z0 = np.append(s0.as_vector(), 0.0)
    if not laws:
        t = np.array([0.0, horizon])
        Z = np.vstack([z0, z0])
        segs = np.zeros(2, dtype=int)
        meta = {"status": "ok", "segments_completed": 0, "reached_target": True, "horizon": horizon}
        dense = []
    else:
        t, Z, segs, meta, dense = _run_closed_loop(rhs_for, z0, laws, _segment_targets(schedule, cfg), horizon, cfg)
    S = Z[:, :-1]
    if laws:
        V = np.array([_xy_law_controls(A, laws[k], s[:n], s[n:], cfg) for k, s in zip(segs, S)])
    else:
        V = np.zeros((len(t), n))
    meta["T_f"] = schedule.total_duration
    return Trajectory(
        times=t, states=S, space="xy", controls=V,
        U=np.linalg.norm(S[:, n:], axis=1), tprime=Z[:, -1], meta=meta, dense=dense,
    )


def rescaled_time(traj):
    """Cumulative trapezoidal ``int_0^t U^2 dt`` from a trajectory's samples."""
    if traj.U is None:
        raise ValueError("trajectory has no U samples")
    return cumulative_trapezoid(traj.U**2, traj.times, initial=0.0)
