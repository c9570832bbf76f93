"""Block space-time system, Schur-complement coarsening, and the two-level
MGRIT/Parareal iteration.

The fine system is block lower bidiagonal: identity diagonal blocks and
-Phi_l subdiagonal blocks, so block forward substitution is sequential time
stepping.  Coarsening by a factor k eliminates F-points; the exact coarse
operator steps k times on the fine grid, and the iteration replaces it with
a cheap approximation Psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .schemes import ButcherTableau, RungeKuttaStep


class InsufficientDataError(ValueError):
    """Not enough recorded residuals to compute convergence factors."""


class MatrixStep:
    """Step operator backed by an explicit matrix."""

    def __init__(self, M: np.ndarray):
        self.M = np.asarray(M)
        self.dim = self.M.shape[0]

    def apply(self, x):
        return self.M @ x

    __call__ = apply

    def matrix(self) -> np.ndarray:
        return self.M


class BlockDiagStep:
    """Step operator that is block diagonal with many small dense blocks.

    blocks has shape (m, d, d); vectors live in the concatenated space of
    dimension m*d, ordered block by block.
    """

    def __init__(self, blocks: np.ndarray):
        self.blocks = np.asarray(blocks)
        m, d, d2 = self.blocks.shape
        if d != d2:
            raise ValueError("blocks must be square")
        self.dim = m * d
        self._m, self._d = m, d

    def apply(self, x):
        x = np.asarray(x)
        cols = 1 if x.ndim == 1 else x.shape[1]
        xb = x.reshape(self._m, self._d, cols)
        out = np.matmul(self.blocks, xb)
        return out.reshape(self.dim) if x.ndim == 1 else out.reshape(self.dim, cols)

    __call__ = apply

    def matrix(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.blocks)


class ProductStep:
    """Composition of several step operators (applied left to right in time)."""

    def __init__(self, ops: list):
        self.ops = list(ops)
        self.dim = self.ops[0].dim

    def apply(self, x):
        for op in self.ops:
            x = op.apply(x)
        return x

    __call__ = apply

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(self.dim))


def _as_step(op):
    if isinstance(op, np.ndarray):
        return MatrixStep(op)
    if hasattr(op, "apply") and hasattr(op, "dim"):
        return op
    raise TypeError(f"not a step operator: {type(op)!r}")


@dataclass
class SpaceTimeSystem:
    """A u = f over N time points with coarsening factor k.

    steps[l] advances point l to point l+1 (length N-1); rhs has shape
    (N, n) with rhs[0] carrying the initial condition.
    """

    steps: list
    rhs: np.ndarray
    k: int
    problem: object | None = None
    scheme: ButcherTableau | None = None
    dt: float | None = None

    def __post_init__(self):
        self.steps = [_as_step(s) for s in self.steps]
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.steps[0].dim
        if self.rhs.shape != (len(self.steps) + 1, n):
            raise ValueError(f"rhs must have shape ({len(self.steps) + 1}, {n})")
        if self.k < 1 or (self.n_time - 1) % self.k != 0:
            raise ValueError("number of fine intervals must be a multiple of k")
        if self.n_time < self.k + 1:
            raise ValueError("need at least one coarse interval")

    @property
    def n_time(self) -> int:
        return len(self.steps) + 1

    @property
    def n_space(self) -> int:
        return self.steps[0].dim

    @property
    def n_coarse(self) -> int:
        """Number of coarse time points (N = k*(n_coarse - 1) + 1)."""
        return (self.n_time - 1) // self.k + 1

    @property
    def _shared(self) -> bool:
        first = self.steps[0]
        return all(s is first for s in self.steps)

    def c_rows(self) -> np.ndarray:
        return np.arange(0, self.n_time, self.k)


def assemble(
    problem,
    scheme: ButcherTableau,
    dt: float,
    n_time: int,
    k: int,
    *,
    u0: np.ndarray | None = None,
    forcing=None,
    dense: bool | None = None,
) -> SpaceTimeSystem:
    """Build the space-time system for a spatial problem.

    The source enters implicit-Euler style: row l of the right-hand side is
    dt * forcing(t_l) evaluated at the end of the step, and row 0 is the
    initial condition.  For small spatial dimension the step operator is
    formed as a dense matrix; otherwise stage systems are solved lazily.
    """
    if n_time < k + 1:
        raise ValueError("need n_time >= k + 1")
    n = problem.L.shape[0]
    step = RungeKuttaStep(scheme, problem.L, dt)
    if dense is None:
        dense = n <= 512
    op = MatrixStep(step.matrix()) if dense else step
    rhs = np.zeros((n_time, n))
    if u0 is not None:
        rhs[0] = u0
    if forcing is not None:
        for l in range(1, n_time):
            rhs[l] = dt * forcing(l * dt)
    return SpaceTimeSystem(steps=[op] * (n_time - 1), rhs=rhs, k=k,
                           problem=problem, scheme=scheme, dt=dt)


@dataclass
class CoarseSystem:
    """Exact Schur-complement blocks and their Psi approximations.

    a_ops[i] is the exact product of the k fine steps across coarse
    interval i; b_ops[i] is the approximation used by the iteration.
    """

    a_ops: list
    b_ops: list
    k: int
    n_coarse: int

    def __post_init__(self):
        self.a_ops = [_as_step(s) for s in self.a_ops]
        self.b_ops = [_as_step(s) for s in self.b_ops]
        if len(self.a_ops) != self.n_coarse - 1 or len(self.b_ops) != self.n_coarse - 1:
            raise ValueError("need one block per coarse interval")


def coarsen(
    sys: SpaceTimeSystem,
    coarse_scheme: ButcherTableau | None = None,
    coarse_dt: float | None = None,
    *,
    psi=None,
    exact: bool = False,
) -> CoarseSystem:
    """Build the coarse system for a space-time problem.

    By default Psi is one step of the fine scheme with step k*dt
    (rediscretization); pass coarse_scheme for an independent scheme, an
    explicit operator/matrix via psi, or exact=True to set Psi to the exact
    k-step product (which makes the two-level iteration a direct solver).
    """
    k, nc = sys.k, sys.n_coarse
    a_ops = [ProductStep(sys.steps[i * k:(i + 1) * k]) for i in range(nc - 1)]
    if exact:
        b_ops = list(a_ops)
    elif psi is not None:
        b_ops = list(psi) if isinstance(psi, (list, tuple)) else [_as_step(psi)] * (nc - 1)
    else:
        if sys.problem is None or (coarse_scheme is None and sys.scheme is None):
            raise ValueError("coarsen needs a problem/scheme context or an explicit psi")
        scheme = coarse_scheme if coarse_scheme is not None else sys.scheme
        dt_c = coarse_dt if coarse_dt is not None else k * sys.dt
        step = RungeKuttaStep(scheme, sys.problem.L, dt_c)
        op = MatrixStep(step.matrix()) if isinstance(sys.steps[0], MatrixStep) else step
        b_ops = [op] * (nc - 1)
    return CoarseSystem(a_ops=a_ops, b_ops=b_ops, k=k, n_coarse=nc)


# ---------------------------------------------------------------------------
# driver internals; u has shape (N, n) throughout


def _apply_rows(sys: SpaceTimeSystem, u: np.ndarray, src: np.ndarray, dst: np.ndarray):
    """u[dst] = Phi_dst u[src] + rhs[dst] for parallel index arrays."""
    if sys._shared:
        u[dst] = sys.steps[0].apply(u[src].T).T + sys.rhs[dst]
    else:
        for s, d in zip(src, dst):
            u[d] = sys.steps[d - 1].apply(u[s]) + sys.rhs[d]


def f_relaxation(sys: SpaceTimeSystem, u: np.ndarray):
    """Propagate across every F-interval from its left C-point (in place)."""
    starts = np.arange(0, sys.n_time - 1, sys.k)
    for off in range(1, sys.k):
        _apply_rows(sys, u, starts + off - 1, starts + off)


def c_relaxation(sys: SpaceTimeSystem, u: np.ndarray):
    """Solve every C-point row given its left F-neighbor (in place).

    The t = 0 row has no neighbor; its equation is u_0 = f_0.
    """
    u[0] = sys.rhs[0]
    c = sys.c_rows()[1:]
    _apply_rows(sys, u, c - 1, c)


def coarse_residual(sys: SpaceTimeSystem, u: np.ndarray) -> np.ndarray:
    """Fine residual restricted to C-points by injection; shape (n_coarse, n)."""
    c = sys.c_rows()
    out = np.empty((len(c), sys.n_space))
    out[0] = sys.rhs[0] - u[0]
    if sys._shared:
        out[1:] = sys.rhs[c[1:]] - u[c[1:]] + sys.steps[0].apply(u[c[1:] - 1].T).T
    else:
        for i, row in enumerate(c[1:], start=1):
            out[i] = sys.rhs[row] - u[row] + sys.steps[row - 1].apply(u[row - 1])
    return out


def coarse_forward_solve(coarse: CoarseSystem, r: np.ndarray) -> np.ndarray:
    """Solve the Psi system by block forward substitution."""
    e = np.empty_like(r)
    e[0] = r[0]
    for i in range(1, coarse.n_coarse):
        e[i] = coarse.b_ops[i - 1].apply(e[i - 1]) + r[i]
    return e


def residual(sys: SpaceTimeSystem, u: np.ndarray) -> np.ndarray:
    """f - A u over all time points."""
    out = np.empty_like(u)
    out[0] = sys.rhs[0] - u[0]
    if sys._shared:
        out[1:] = sys.rhs[1:] - u[1:] + sys.steps[0].apply(u[:-1].T).T
    else:
        for l in range(1, sys.n_time):
            out[l] = sys.rhs[l] - u[l] + sys.steps[l - 1].apply(u[l - 1])
    return out


def residual_norm(sys: SpaceTimeSystem, u: np.ndarray) -> float:
    return float(np.linalg.norm(residual(sys, u).ravel()))


def sequential_solve(sys: SpaceTimeSystem) -> np.ndarray:
    """Exact solve by block forward substitution (sequential time stepping)."""
    u = np.empty_like(sys.rhs)
    u[0] = sys.rhs[0]
    for l in range(1, sys.n_time):
        u[l] = sys.steps[l - 1].apply(u[l - 1]) + sys.rhs[l]
    return u


@dataclass
class ConvergenceTrace:
    """Per-iteration residual history of an MGRIT solve."""

    residual_norms: np.ndarray
    tol: float
    seed: int | None
    diverged: bool = False
    worst_cf: float = math.nan
    avg_cf: float = math.nan
    cf_per_iter: np.ndarray = field(default_factory=lambda: np.empty(0))
    solution: np.ndarray | None = None
    final_residual_norm: float = math.nan

    @property
    def iterations(self) -> int:
        return len(self.residual_norms) - 1


def convergence_factors(trace, skip_first: int = 1, *, tol: float | None = None,
                        cap: int = 10) -> tuple[float, float]:
    """Worst and geometric-average residual convergence factors.

    Ratios r_{i+1}/r_i are considered for i >= skip_first (the first
    iteration is transient) and only while r_i > 10*tol, which keeps
    post-stagnation noise out of the statistics.  The average is taken over
    at most `cap` ratios.
    """
    if hasattr(trace, "residual_norms"):
        res = np.asarray(trace.residual_norms, dtype=float)
        if tol is None:
            tol = trace.tol
    else:
        res = np.asarray(trace, dtype=float)
    if len(res) < 3:
        raise InsufficientDataError("need at least 3 recorded residuals")
    floor = 10.0 * tol if tol is not None else 0.0
    valid = [res[i + 1] / res[i]
             for i in range(skip_first, len(res) - 1)
             if res[i] > floor]
    if not valid:
        raise InsufficientDataError("no usable residual ratios above the stagnation floor")
    worst = max(valid)
    window = valid[:cap]
    # a ratio of exactly zero (residual collapsed to 0) pins the mean at zero
    avg = 0.0 if min(window) <= 0.0 else float(np.exp(np.mean(np.log(window))))
    return float(worst), avg


def mgrit_solve(
    sys: SpaceTimeSystem,
    coarse: CoarseSystem,
    relax: str = "F",
    u0: np.ndarray | None = None,
    max_iters: int = 100,
    tol: float = 1e-10,
    seed: int | None = 0,
    divergence_factor: float = 1e6,
) -> ConvergenceTrace:
    """Two-level MGRIT/Parareal iteration on the fine space-time system.

    Each iteration runs F-relaxation (plus a C-then-F sweep for FCF),
    restricts the residual to C-points by injection, solves the coarse Psi
    system by forward substitution, corrects the C-points, and finishes
    with F-relaxation.

    The recorded per-iteration quantity is the l2 residual of the full fine
    system evaluated at the restriction step: relaxation has just zeroed the
    F-point rows there, so the restricted residual is the full residual.
    Entry 0 of the trace is the residual of the raw initial guess.
    Iteration stops once the recorded residual hits tol, max_iters is
    exhausted, or the residual has grown by divergence_factor over its
    initial value; one final correction and F-sweep always follow the last
    recorded residual, so the returned solution is one half-cycle ahead of
    the trace (see final_residual_norm).
    """
    if relax not in ("F", "FCF"):
        raise ValueError("relax must be 'F' or 'FCF'")
    if coarse.k != sys.k or coarse.n_coarse != sys.n_coarse:
        raise ValueError("coarse system is inconsistent with the fine system")
    if u0 is not None:
        u = np.array(u0, dtype=float, copy=True)
        if u.shape != sys.rhs.shape:
            raise ValueError("initial guess has the wrong shape")
    else:
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1.0, 1.0, size=sys.rhs.shape)

    norms = [residual_norm(sys, u)]
    c = sys.c_rows()
    diverged = False
    f_consistent = False  # True once the last action on u was an F-sweep
    for _ in range(max_iters):
        if not f_consistent:
            f_relaxation(sys, u)
        if relax == "FCF":
            c_relaxation(sys, u)
            f_relaxation(sys, u)
        r_c = coarse_residual(sys, u)
        norms.append(float(np.linalg.norm(r_c.ravel())))
        e = coarse_forward_solve(coarse, r_c)
        u[c] += e
        f_relaxation(sys, u)
        f_consistent = True
        if norms[-1] <= tol:
            break
        if norms[-1] > divergence_factor * max(norms[0], np.finfo(float).tiny):
            diverged = True
            break

    trace = ConvergenceTrace(residual_norms=np.array(norms), tol=tol, seed=seed,
                             diverged=diverged)
    trace.cf_per_iter = trace.residual_norms[1:] / trace.residual_norms[:-1]
    try:
        trace.worst_cf, trace.avg_cf = convergence_factors(trace)
    except InsufficientDataError:
        pass
    trace.solution = u
    trace.final_residual_norm = residual_norm(sys, u)
    return trace
