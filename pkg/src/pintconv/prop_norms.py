"""Exact norms of the coarse error/residual propagators.

The norm of the two-level coarse iteration operator equals one over the
smallest singular value of a reduced block-bidiagonal operator built from
the per-interval blocks (Phi-product - Psi); a dense oracle that forms the
propagators explicitly is provided for cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DENSE_SVD_LIMIT = 4000


class SingularBlockError(ArithmeticError):
    """A (Phi-product - Psi) or Phi-product block is singular: the closed-form
    norm does not apply (Psi matches k fine steps exactly on some mode)."""

    def __init__(self, block: int, what: str):
        self.block = block
        super().__init__(f"singular {what} block at coarse interval {block}")


class SizeGuardError(ValueError):
    """Operator too large for the dense oracle."""


@dataclass
class PropagatorPair:
    """Time-independent fine/coarse step pair.

    phi is the fine step, psi the coarse step (an approximation to k fine
    steps), k the coarsening factor, and n_coarse the number of coarse time
    points of the system the norms refer to.
    """

    phi: np.ndarray
    psi: np.ndarray
    k: int
    n_coarse: int
    dt: float | None = None
    n_fine: int | None = None

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi))
        self.psi = np.atleast_2d(np.asarray(self.psi))
        if self.phi.shape != self.psi.shape or self.phi.shape[0] != self.phi.shape[1]:
            raise ValueError("phi and psi must be square with equal shapes")
        if self.n_coarse < 2:
            raise ValueError("need at least one coarse interval")

    def coarse_blocks(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        prod = np.linalg.matrix_power(self.phi, self.k)
        m = self.n_coarse - 1
        return [prod] * m, [self.psi] * m


@dataclass
class CoarseBlockPair:
    """Per-interval blocks for the time-dependent case: phi_products[i] is
    the product of the k fine steps across coarse interval i."""

    phi_products: list
    psis: list

    def __post_init__(self):
        if len(self.phi_products) != len(self.psis) or not self.phi_products:
            raise ValueError("need one (Phi-product, Psi) pair per coarse interval")

    def coarse_blocks(self):
        return ([np.atleast_2d(np.asarray(p)) for p in self.phi_products],
                [np.atleast_2d(np.asarray(p)) for p in self.psis])


def _blocks(pair):
    if hasattr(pair, "coarse_blocks"):
        return pair.coarse_blocks()
    if isinstance(pair, tuple) and len(pair) == 2:
        return CoarseBlockPair(*pair).coarse_blocks()
    raise TypeError("expected a PropagatorPair, CoarseBlockPair, or (phis, psis) tuple")


def smallest_singular_value(M: np.ndarray) -> float:
    """sigma_min by dense SVD up to DENSE_SVD_LIMIT, inverse iteration above.

    The inverse iteration runs on the normal operator through an LU
    factorization of M, with relative tolerance 1e-10 and a 500-iteration cap.
    """
    if M.shape[0] <= DENSE_SVD_LIMIT:
        return float(scipy.linalg.svdvals(M)[-1])
    lu, piv = scipy.linalg.lu_factor(M)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(M.shape[0])
    if np.iscomplexobj(M):
        v = v + 1j * rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(500):
        y = scipy.linalg.lu_solve((lu, piv), v, trans=2)  # M^H y = v
        w = scipy.linalg.lu_solve((lu, piv), y)           # M w = y
        nrm = np.linalg.norm(w)                           # -> 1/sigma_min^2
        new_est = 1.0 / np.sqrt(nrm)
        v = w / nrm
        if abs(new_est - est) <= 1e-10 * max(new_est, 1e-300):
            est = new_est
            break
        est = new_est
    return float(est)


def _inv_block(block: np.ndarray, i: int, what: str) -> np.ndarray:
    sv = scipy.linalg.svdvals(block)
    if sv[-1] <= 1e-14 * max(sv[0], 1.0):
        raise SingularBlockError(i, what)
    return np.linalg.inv(block)


@dataclass
class ReducedBidiagonal:
    """The reduced block-bidiagonal operator whose smallest singular value
    yields a propagator norm; layout records which norm it belongs to."""

    diag_blocks: list
    sub_blocks: list
    layout: str  # "residual_F" | "error_F" | "error_FCF"

    def __post_init__(self):
        if len(self.sub_blocks) != len(self.diag_blocks) - 1:
            raise ValueError("need one fewer subdiagonal block than diagonal blocks")

    def assemble(self) -> np.ndarray:
        diag, sub = self.diag_blocks, self.sub_blocks
        n = diag[0].shape[0]
        m = len(diag)
        dtype = np.result_type(*[d.dtype for d in diag + sub]) if sub else diag[0].dtype
        M = np.zeros((m * n, m * n), dtype=dtype)
        for i, d in enumerate(diag):
            M[i * n:(i + 1) * n, i * n:(i + 1) * n] = d
        for i, s in enumerate(sub):
            M[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = s
        return M

    def norm(self) -> float:
        return 1.0 / smallest_singular_value(self.assemble())


def residual_norm_f(pair) -> float:
    """Norm of the coarse residual propagator under F-relaxation.

    Equals 1/sigma_min of the bidiagonal operator with diagonal blocks
    (Phi-product_i - Psi_i)^{-1} and subdiagonal blocks
    -Psi_i (Phi-product_i - Psi_i)^{-1}.
    """
    phis, psis = _blocks(pair)
    m = len(phis)
    dinv = [_inv_block(phis[i] - psis[i], i, "difference") for i in range(m)]
    sub = [-psis[i] @ dinv[i] for i in range(m - 1)]
    return ReducedBidiagonal(dinv, sub, "residual_F").norm()


def error_norm_f(pair) -> float:
    """Norm of the coarse error propagator under F-relaxation.

    Same reduced structure as the residual norm but with the subdiagonal
    taken from the first-row/column-deleted Psi system:
    -(Phi-product_{i+1} - Psi_{i+1})^{-1} Psi_{i+1}.
    """
    phis, psis = _blocks(pair)
    m = len(phis)
    dinv = [_inv_block(phis[i] - psis[i], i, "difference") for i in range(m)]
    sub = [dinv[i + 1] @ (-psis[i + 1]) for i in range(m - 1)]
    return ReducedBidiagonal(dinv, sub, "error_F").norm()


def error_norm_fcf(pair) -> float:
    """Norm of the coarse error propagator under FCF-relaxation.

    The extra C-then-F sweep composes the coarse difference of one interval
    with the exact product of the interval before it: diagonal blocks are
    ((Phi-product_{i+1} - Psi_{i+1}) Phi-product_i)^{-1}, and the
    subdiagonal pairs them against the later-in-time -Psi_{i+2} (indices per
    coarse interval).  Requires n_coarse >= 3.
    """
    phis, psis = _blocks(pair)
    m = len(phis) - 1  # reduced dimension is n_coarse - 2
    if m < 1:
        raise ValueError("FCF norm needs at least two coarse intervals")
    dinv = []
    for i in range(m):
        _inv_block(phis[i], i, "propagator")  # singularity check on Phi-product
        dinv.append(_inv_block((phis[i + 1] - psis[i + 1]) @ phis[i], i, "difference-product"))
    sub = [dinv[i + 1] @ (-psis[i + 2]) for i in range(m - 1)]
    return ReducedBidiagonal(dinv, sub, "error_FCF").norm()


def _dense_coarse(blocks: list[np.ndarray]) -> np.ndarray:
    """Unit lower block bidiagonal matrix with -blocks[i] on the subdiagonal."""
    m = len(blocks) + 1
    n = blocks[0].shape[0]
    M = np.eye(m * n, dtype=np.result_type(*[b.dtype for b in blocks]))
    for i, b in enumerate(blocks):
        M[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = -b
    return M


def direct_norm_oracle(pair, relax: str = "F", quantity: str = "error") -> float:
    """sigma_max of the explicitly formed coarse propagator (validation oracle).

    Forms I - B^{-1}A (error) or I - A B^{-1} (residual), with an extra
    (I - A) factor for FCF; this covers the residual-FCF variant, which has
    no closed singular-value formula.
    """
    if relax not in ("F", "FCF"):
        raise ValueError("relax must be 'F' or 'FCF'")
    if quantity not in ("error", "residual"):
        raise ValueError("quantity must be 'error' or 'residual'")
    phis, psis = _blocks(pair)
    nc = len(phis) + 1
    n = phis[0].shape[0]
    if nc * n > DENSE_SVD_LIMIT:
        raise SizeGuardError(f"oracle dimension {nc * n} exceeds {DENSE_SVD_LIMIT}")
    A = _dense_coarse(phis)
    B = _dense_coarse(psis)
    if quantity == "error":
        E = np.eye(nc * n) - np.linalg.solve(B, A)
    else:
        E = np.eye(nc * n) - np.linalg.solve(B.T, A.T).T
    if relax == "FCF":
        E = E @ (np.eye(nc * n) - A)
    return float(scipy.linalg.svdvals(E)[0])
