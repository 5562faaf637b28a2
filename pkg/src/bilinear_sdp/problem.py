"""Problem instances, hypothesis checks, constraint matrices and coordinates.

Three coordinate systems describe the same physical state:

* bilinear ``(x, y)`` with ``x' = -V y``, ``y' = V x + A y``;
* radii ``r_i = sqrt(x_i**2 + y_i**2)``;
* squared radii ``p_i = r_i**2``, whose dynamics are linear in ``m m^T``
  after rescaling time by ``U**2``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .linalg import is_negative_definite

__all__ = [
    "ProblemSpec",
    "ValidationReport",
    "ConstraintSet",
    "BilinearState",
    "RadialState",
    "chain",
    "random_spec",
    "validate",
    "is_irreducible",
    "build_constraints",
    "constraint_matrix",
    "feasible_seed",
    "xy_to_r",
    "r_to_p",
    "p_to_r",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Coupling matrix ``A`` and initial point ``p0`` (squared radii).

    ``target`` is the 0-based index of the coordinate being maximized and
    defaults to the last one.
    """

    A: np.ndarray
    p0: np.ndarray
    target: int = -1
    label: str = ""

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        p0 = np.array(self.p0, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise InvalidInputError(f"A must be a non-empty square matrix, got {A.shape}")
        if p0.shape[0] != A.shape[0]:
            raise InvalidInputError(f"p0 has length {p0.shape[0]}, expected {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(p0))):
            raise InvalidInputError("A and p0 must be finite")
        n = A.shape[0]
        target = int(self.target)
        if not -n <= target < n:
            raise InvalidInputError(f"target {target} out of range for n={n}")
        A.setflags(write=False)
        p0.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "target", target % n)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def others(self):
        """Indices of the non-target coordinates, in order."""
        return [i for i in range(self.n) if i != self.target]

    def with_p0(self, p0):
        return ProblemSpec(self.A, p0, self.target, self.label)

    def permuted(self, perm):
        """Relabel states so that new state ``k`` is old state ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise InvalidInputError("perm must be a permutation of range(n)")
        inverse = np.argsort(perm)
        return ProblemSpec(
            self.A[np.ix_(perm, perm)], self.p0[perm], int(inverse[self.target]), self.label
        )


def chain(n, xi, p0=None, label=""):
    """Tridiagonal chain: ``-xi`` on the diagonal, ``-1`` above, ``+1`` below."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    A = -xi * np.eye(n) - np.eye(n, k=1) + np.eye(n, k=-1)
    if p0 is None:
        p0 = np.zeros(n)
        p0[0] = 1.0
    return ProblemSpec(A, p0, label=label or f"chain(n={n}, xi={xi:g})")


def random_spec(rng, n, kind="dense"):
    """Random valid instance with ``p0`` uniform on ``[0, 1]^n``.

    ``kind="dense"``: symmetric part ``-Q diag(l) Q^T`` with ``l`` in
    [0.2, 2] plus a Gaussian skew part. ``kind="tridiagonal"``: diagonal in
    [-2, -0.3], skew-dominated nearest-neighbour couplings whose symmetric
    part is small enough for Gershgorin to certify negative definiteness.
    """
    if kind == "dense":
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        sym = -(q * rng.uniform(0.2, 2.0, n)) @ q.T
        g = rng.normal(size=(n, n))
        A = sym + 0.5 * (g - g.T)
    elif kind == "tridiagonal":
        A = np.diag(-rng.uniform(0.3, 2.0, n))
        for i in range(n - 1):
            c = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
            e = rng.uniform(-0.1, 0.1)
            A[i, i + 1] = c + e
            A[i + 1, i] = -c + e
    else:
        raise InvalidInputError(f"unknown instance kind {kind!r}")
    return ProblemSpec(A, rng.uniform(0.0, 1.0, n), label=f"random-{kind}-{n}")


@dataclass(frozen=True)
class ValidationReport:
    negative_definite: bool
    irreducible: bool
    nonnegative: bool
    messages: tuple = ()

    @property
    def ok(self):
        return self.negative_definite and self.irreducible and self.nonnegative

    def __bool__(self):
        return self.ok


def is_irreducible(A):
    """Strong connectivity of the graph with an edge i->j whenever a_ij != 0."""
    A = np.asarray(A)
    n = A.shape[0]
    adj = (A != 0) & ~np.eye(n, dtype=bool)

    def reach(adjacency):
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adjacency[i]):
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        return len(seen) == n

    return reach(adj) and reach(adj.T)


def validate(spec):
    """Check the structural hypotheses: negative definite ``A + A^T``,
    irreducible ``A`` and nonnegative ``p0``."""
    messages = []
    negdef = is_negative_definite(spec.A + spec.A.T, tol=1e-12)
    if not negdef:
        messages.append("A + A^T is not negative definite")
    irreducible = is_irreducible(spec.A)
    if not irreducible:
        messages.append("A is not irreducible (coupling graph not strongly connected)")
    nonneg = bool(np.all(spec.p0 >= 0))
    if not nonneg:
        messages.append("p0 has negative entries")
    return ValidationReport(negdef, irreducible, nonneg, tuple(messages))


def constraint_matrix(A, i):
    """Symmetric matrix with ``2 a_ii`` at (i, i) and ``a_ij`` at (i, j), (j, i).

    ``<constraint_matrix(A, i), m m^T>`` is the rate of change of ``p_i``
    under unit direction ``m``.
    """
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    out[i, :] += A[i, :]
    out[:, i] += A[i, :]
    return out


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Per-coordinate matrices plus the equality data of the transfer program.

    ``matrices[i]`` belongs to coordinate ``i`` (all ``n`` of them);
    ``indices`` are the constrained (non-target) coordinates with right-hand
    sides ``rhs``; ``objective`` is the target coordinate's matrix.
    """

    matrices: tuple
    indices: tuple
    rhs: np.ndarray
    objective: np.ndarray
    target: int


def build_constraints(spec, base=None):
    """Constraint matrices for ``max <A_t, M>`` s.t. ``<A_i, M> = b_i``.

    With ``base=None`` the right-hand side is ``b_i = -p0_i`` (every non-target
    coordinate emptied). Passing ``base`` (values for the non-target
    coordinates) gives ``b_i = base_i - p0_i``, the reachable-set slice.
    """
    mats = tuple(constraint_matrix(spec.A, i) for i in range(spec.n))
    idx = tuple(spec.others)
    if base is None:
        rhs = -spec.p0[list(idx)]
    else:
        base = np.asarray(base, dtype=float).ravel()
        if base.shape[0] != len(idx):
            raise InvalidInputError(f"base must have length {len(idx)}")
        rhs = base - spec.p0[list(idx)]
    return ConstraintSet(mats, idx, np.asarray(rhs, dtype=float), mats[spec.target], spec.target)


def feasible_seed(spec):
    """Diagonal feasible point ``diag(-p0_i / (2 a_ii))``.

    Satisfies ``<A_i, M> = -p0_i`` for every coordinate, the target included.
    """
    d = np.diag(spec.A)
    if np.any(d >= 0):
        raise InvalidInputError("feasible seed needs a strictly negative diagonal")
    return np.diag(-spec.p0 / (2.0 * d))


@dataclass(frozen=True)
class BilinearState:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise InvalidInputError("x and y must have equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("state must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_radial(cls, r, u):
        """Place each radius at phase ``arccos(u_i)``, i.e. ``y_i = u_i r_i``."""
        r = np.asarray(r, dtype=float)
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        return cls(r * np.sqrt(1.0 - u * u), r * u)

    def as_vector(self):
        return np.concatenate([self.x, self.y])


@dataclass(frozen=True)
class RadialState:
    r: np.ndarray = field()

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).ravel()
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise InvalidInputError("radii must be finite and nonnegative")
        object.__setattr__(self, "r", r)


def xy_to_r(state):
    return RadialState(np.hypot(state.x, state.y))


def r_to_p(state):
    r = state.r if isinstance(state, RadialState) else RadialState(state).r
    return r * r


def p_to_r(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InvalidInputError("p must be nonnegative")
    return RadialState(np.sqrt(p))


def problem_from_dict(data):
    """Build a spec from the JSON problem-file schema.

    Either ``{"A": [[...]], "p0": [...]}`` or ``{"chain": {"n": .., "xi": ..},
    "p0": [...]}``; optional 1-based ``target_index`` and ``label``.
    """
    if not isinstance(data, dict):
        raise InvalidInputError("problem must be a JSON object")
    if "chain" in data:
        c = data["chain"]
        try:
            base = chain(int(c["n"]), float(c["xi"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad chain block: {exc}") from exc
        A = base.A
    elif "A" in data:
        A = data["A"]
    else:
        raise InvalidInputError("problem needs either 'A' or 'chain'")
    if "p0" not in data:
        raise InvalidInputError("problem needs 'p0'")
    n = np.asarray(A).shape[0]
    t = data.get("target_index")
    target = n - 1 if t is None else int(t) - 1
    if not 0 <= target < n:
        raise InvalidInputError(f"target_index must be in 1..{n}")
    try:
        return ProblemSpec(A, data["p0"], target, str(data.get("label", "")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(str(exc)) from exc


def problem_to_dict(spec):
    return {
        "A": spec.A.tolist(),
        "p0": spec.p0.tolist(),
        "target_index": spec.target + 1,
        "label": spec.label,
    }


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
