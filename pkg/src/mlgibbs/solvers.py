"""Matrix-free conjugate gradient with an optional two-level preconditioner.

The two-level preconditioner uses a fixed number of CG smoothing steps,
which makes it a nonlinear operator; the outer iteration therefore
switches to the flexible CG beta when a preconditioner is supplied.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError, SetupError
from .hierarchy import prolong, restrict, restrict_diagonal
from .sparse import gram_apply


@dataclass
class SolveReport:
    iterations: int
    final_residual_norm: float
    converged: bool


@dataclass
class SolverConfig:
    """Knobs of the noise-injection linear solves."""

    tol: float = 1e-8
    max_iter: int | None = None
    warm_start: bool = True
    suppress_noise: bool = False  # diagnostic mode: e_1 = e_2 = 0
    precond_cap: int = 10_000
    smooth_steps: int = 2


def cg_solve(apply_A, rhs, x0=None, tol=1e-8, max_iter=None, precond=None):
    """Solve A x = rhs for SPD A given only the action of A.

    Stops when ||rhs - A x|| <= tol * ||rhs|| or after max_iter
    iterations (best iterate returned, converged=False). With `precond`
    the flexible-CG update is used.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    if max_iter is None:
        max_iter = 2 * n
    rhs_norm = np.linalg.norm(rhs)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if rhs_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    r = rhs - apply_A(x)
    res = np.linalg.norm(r)
    if res <= tol * rhs_norm:
        return x, SolveReport(0, float(res), True)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < max_iter:
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise NumericalError(f"CG breakdown at iteration {it}: p.Ap = {pAp}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r)
        if not np.isfinite(res):
            raise NumericalError(f"CG produced NaN at iteration {it}")
        if res <= tol * rhs_norm:
            return x, SolveReport(it, float(res), True)
        if precond is not None:
            # flexible CG: A-orthogonalize the new direction against the
            # previous one (the smoothed cycle is not a fixed linear map)
            z_new = precond(r)
            beta = -float(z_new @ Ap) / pAp
            rz = float(r @ z_new)
        else:
            z_new = r
            rz_new = float(r @ r)
            beta = rz_new / rz
            rz = rz_new
        p = z_new + beta * p
        z = z_new
    return x, SolveReport(it, float(res), False)


@dataclass
class TwoLevelPreconditioner:
    apply_fine: object  # action of the fine-level Gram operator
    prolongators: list  # coarse-to-fine chain below the target level
    coarse_factor: tuple = field(repr=False)
    smooth_steps: int = 2

    def __call__(self, r):
        return precond_apply(self, r)


def build_two_level(hierarchy, level, shift_diag, dense_cap=10_000, smooth_steps=2):
    """Two-level preconditioner for the Gram system at `level`: CG
    pre-smoothing plus an exact coarsest-level correction."""
    if level < 1 or level >= hierarchy.n_levels:
        raise SetupError(f"no coarse space below level {level}")
    X0 = hierarchy.matrices[0]
    if X0.n_cols > dense_cap:
        raise SetupError(f"coarse width {X0.n_cols} exceeds dense cap {dense_cap}")
    shift_diag = np.asarray(shift_diag, dtype=np.float64)
    chain = hierarchy.prolongators[:level]
    shift0 = shift_diag
    for P in reversed(chain):
        shift0 = restrict_diagonal(P, shift0)
    D0 = X0.to_dense()
    G0 = D0.T @ D0 + np.diag(shift0)
    try:
        factor = cho_factor(G0)
    except np.linalg.LinAlgError:
        G0 = G0 + np.eye(G0.shape[0]) * (1e-12 * np.trace(G0) / G0.shape[0])
        factor = cho_factor(G0)
    X_l = hierarchy.matrices[level]
    return TwoLevelPreconditioner(
        apply_fine=lambda v: gram_apply(X_l, shift_diag, v),
        prolongators=chain,
        coarse_factor=factor,
        smooth_steps=smooth_steps,
    )


def _cg_smooth(apply_A, rhs, steps):
    """Fixed number of plain CG iterations from a zero start."""
    x = np.zeros(rhs.size)
    r = rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    for _ in range(steps):
        if rr == 0.0:
            break
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0 or not np.isfinite(pAp):
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def precond_apply(M, r):
    """Smooth, then add the prolongated exact coarse correction."""
    z = _cg_smooth(M.apply_fine, r, M.smooth_steps)
    resid = r - M.apply_fine(z)
    for P in reversed(M.prolongators):
        resid = restrict(P, resid)
    yc = cho_solve(M.coarse_factor, resid)
    for P in M.prolongators:
        yc = prolong(P, yc)
    return z + yc
