"""Runge-Kutta schemes and their propagators for linear systems u' = -L u.

The sign convention throughout the package is that a spatial operator L
with eigenvalue xi in the right half plane is a decaying mode: one step of
size dt multiplies that mode by R(-dt*xi), where R is the stability
function of the scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings
from functools import lru_cache
from importlib import resources

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg


class UnknownSchemeError(KeyError):
    """Lookup of a scheme name that is not in the registry."""


class StabilityPoleError(ArithmeticError):
    """The stability function was evaluated at (or too close to) a pole."""


class SingularStageError(ArithmeticError):
    """A stage system (I + dt*a_ii*L) is singular; carries the stage index."""

    def __init__(self, stage: int, detail: str = ""):
        self.stage = stage
        msg = f"singular stage system at stage {stage}"
        super().__init__(msg + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class ButcherTableau:
    """An s-stage Runge-Kutta scheme.

    Invariants (checked on construction): the row sums of A equal c,
    the weights b sum to one, and explicit schemes have a strictly
    lower-triangular stage matrix.
    """

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    stability_class: str  # "L-stable" | "A-stable" | "explicit"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        s = len(b)
        if A.shape != (s, s) or c.shape != (s,):
            raise ValueError(f"{self.name}: inconsistent tableau shapes")
        if not np.allclose(A.sum(axis=1), c, atol=1e-13):
            raise ValueError(f"{self.name}: row sums of A must equal c")
        if abs(b.sum() - 1.0) > 1e-13:
            raise ValueError(f"{self.name}: weights must sum to 1")
        if self.stability_class == "explicit" and np.any(np.triu(A) != 0.0):
            raise ValueError(f"{self.name}: explicit scheme needs strictly lower-triangular A")

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def is_explicit(self) -> bool:
        return self.stability_class == "explicit"


def _parse_registry(text: str) -> dict[str, ButcherTableau]:
    schemes = {}
    fields: dict[str, list[str]] = {}
    key = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "end":
            s = int(fields["stages"][0])
            vals = [float(x) for x in fields["A"]]
            name = fields["scheme"][0]
            schemes[name] = ButcherTableau(
                name=name,
                A=np.array(vals, dtype=float).reshape(s, s),
                b=np.array([float(x) for x in fields["b"]]),
                c=np.array([float(x) for x in fields["c"]]),
                order=int(fields["order"][0]),
                stability_class=fields["class"][0],
            )
            fields = {}
            key = None
            continue
        parts = line.split()
        if parts[0] in ("scheme", "stages", "order", "class", "A", "b", "c"):
            key = parts[0]
            fields[key] = parts[1:]
        elif key is not None:
            fields[key].extend(parts)  # continuation line (A rows)
        else:
            raise ValueError(f"malformed registry line: {raw!r}")
    return schemes


@lru_cache(maxsize=1)
def _registry() -> dict[str, ButcherTableau]:
    text = resources.files("pintconv.data").joinpath("schemes.txt").read_text()
    return _parse_registry(text)


def scheme_registry() -> list[ButcherTableau]:
    """All registered schemes, in registry-file order."""
    return list(_registry().values())


def scheme_names() -> list[str]:
    return list(_registry().keys())


def get_scheme(name: str) -> ButcherTableau:
    """Look up a scheme by (case-insensitive) name."""
    try:
        return _registry()[name.lower()]
    except KeyError:
        known = ", ".join(_registry().keys())
        raise UnknownSchemeError(f"unknown scheme {name!r}; registered schemes: {known}") from None


def stability_value(scheme: ButcherTableau, z: complex) -> complex:
    """Evaluate the stability function R(z) = 1 + z*b^T (I - z A)^{-1} 1.

    Raises StabilityPoleError if (I - z A) is singular to working precision.
    """
    s = scheme.stages
    M = np.eye(s, dtype=complex) - z * scheme.A
    sv = scipy.linalg.svdvals(M)
    if sv[-1] <= 1e-13 * max(sv[0], 1.0):
        raise StabilityPoleError(f"{scheme.name}: z={z} is a pole of the stability function")
    w = np.linalg.solve(M, np.ones(s, dtype=complex))
    return complex(1.0 + z * (scheme.b @ w))


def stability_rational(scheme: ButcherTableau) -> tuple[np.ndarray, np.ndarray]:
    """Real polynomial coefficients (num, den), highest power first, with
    R(z) = num(z)/den(z).

    den(z) = det(I - z A) and num(z) = det(I - z A + z 1 b^T); both have
    degree <= s, so the coefficients are recovered exactly by sampling the
    determinants at s+1 real nodes.
    """
    s = scheme.stages
    nodes = np.arange(s + 1, dtype=float) - s / 2.0
    V = np.vander(nodes, s + 1)
    den_vals = np.array([np.linalg.det(np.eye(s) - z * scheme.A) for z in nodes])
    num_vals = np.array(
        [np.linalg.det(np.eye(s) - z * scheme.A + z * np.outer(np.ones(s), scheme.b)) for z in nodes]
    )
    den = np.linalg.solve(V, den_vals)
    num = np.linalg.solve(V, num_vals)
    return num, den


def stability_on_grid(scheme: ButcherTableau, z: np.ndarray) -> np.ndarray:
    """Vectorized R(z) over an array of complex arguments via num/den polynomials.

    Points at (numerical) poles evaluate to inf/nan rather than raising.
    """
    num, den = stability_rational(scheme)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.polyval(num, z) / np.polyval(den, z)


class RungeKuttaStep:
    """One fixed time step of a scheme applied to u' = -L u.

    Stage systems are solved with LU factorizations (sparse or dense,
    depending on L) that are computed once and reused; applying the step
    to an (n, m) batch of vectors amortizes the per-solve overhead.
    Eigenvectors of L are preserved: for an eigenpair (xi, v) of L the
    step maps v to R(-dt*xi) v.
    """

    def __init__(self, scheme: ButcherTableau, L, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.scheme = scheme
        self.dt = float(dt)
        self._sparse = scipy.sparse.issparse(L)
        self._L = L.tocsr() if self._sparse else np.asarray(L, dtype=float)
        n = self._L.shape[0]
        if self._L.shape != (n, n):
            raise ValueError("L must be square")
        self.dim = n
        self._solvers = {}
        for i, aii in enumerate(np.diag(scheme.A)):
            if aii == 0.0 or aii in self._solvers:
                continue
            self._solvers[aii] = self._factor(aii, i)

    def _factor(self, aii: float, stage: int):
        n = self.dim
        if self._sparse:
            M = (scipy.sparse.eye(n, format="csc") + (self.dt * aii) * self._L).tocsc()
            try:
                lu = scipy.sparse.linalg.splu(M)
            except RuntimeError as exc:
                raise SingularStageError(stage, str(exc)) from None
            return lu.solve
        M = np.eye(n) + (self.dt * aii) * self._L
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        if np.min(np.abs(np.diag(lu))) == 0.0:
            raise SingularStageError(stage)
        return lambda B: scipy.linalg.lu_solve((lu, piv), B, check_finite=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Advance one step; x may be a vector (n,) or a batch (n, m)."""
        x = np.asarray(x)
        A, b, dt, L = self.scheme.A, self.scheme.b, self.dt, self._L
        stages = []
        for i in range(self.scheme.stages):
            g = x if i == 0 else x + dt * sum(A[i, j] * stages[j] for j in range(i) if A[i, j] != 0.0)
            rhs = -(L @ g)
            aii = A[i, i]
            stages.append(rhs if aii == 0.0 else self._solvers[aii](rhs))
        out = x + dt * sum(b[i] * stages[i] for i in range(len(stages)) if b[i] != 0.0)
        return np.ascontiguousarray(out)

    __call__ = apply

    def matrix(self) -> np.ndarray:
        """The dense step matrix (apply to the identity)."""
        return self.apply(np.eye(self.dim))


def propagator_matrix(scheme: ButcherTableau, L, dt: float) -> np.ndarray:
    """Dense step matrix Phi with Phi v = R(-dt*xi) v on every eigenpair of L.

    Built by solving the s stage systems against identity columns; no
    eigendecomposition of L is involved.
    """
    return RungeKuttaStep(scheme, L, dt).matrix()


def batched_propagator_matrices(scheme: ButcherTableau, Ls: np.ndarray, dt: float) -> np.ndarray:
    """Step matrices for a stack of small decoupled operators, shape (m, d, d).

    Runs the same stage recursion as propagator_matrix, but with the stage
    systems solved for all m operators at once.  Useful when a large
    operator block-diagonalizes into many small independent blocks.
    """
    Ls = np.asarray(Ls)
    m, d, d2 = Ls.shape
    if d != d2:
        raise ValueError("blocks must be square")
    A, b = scheme.A, scheme.b
    eye = np.broadcast_to(np.eye(d, dtype=Ls.dtype), (m, d, d))
    stages: list[np.ndarray] = []
    for i in range(scheme.stages):
        G = eye
        for j in range(i):
            if A[i, j] != 0.0:
                G = G + dt * A[i, j] * stages[j]
        rhs = -np.matmul(Ls, G)
        aii = A[i, i]
        if aii == 0.0:
            stages.append(rhs)
        else:
            try:
                stages.append(np.linalg.solve(eye + (dt * aii) * Ls, rhs))
            except np.linalg.LinAlgError:
                raise SingularStageError(i) from None
    Phi = np.array(eye)
    for i in range(scheme.stages):
        if b[i] != 0.0:
            Phi = Phi + dt * b[i] * stages[i]
    return Phi
