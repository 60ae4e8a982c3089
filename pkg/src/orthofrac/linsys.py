"""Sparse linear algebra: constrained solves for the staggered scheme.

Displacement steps solve a symmetric positive definite system with
prescribed values eliminated; damage steps solve the same kind of
system under box constraints with a primal active-set loop. Direct
factorization is the default backend, with conjugate gradients as a
fallback for systems too large to factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class DirichletSet:
    """Prescribed degrees of freedom and their values."""

    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dofs = np.asarray(self.dofs, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if dofs.ndim != 1 or values.shape != dofs.shape:
            raise ValueError("dofs and values must be matching 1-d arrays")
        if len(np.unique(dofs)) != len(dofs):
            raise ValueError("duplicate constrained dofs")
        object.__setattr__(self, "dofs", dofs)
        object.__setattr__(self, "values", values)

    @staticmethod
    def combine(*sets: "DirichletSet") -> "DirichletSet":
        if not sets:
            return DirichletSet(np.array([], dtype=np.int64), np.array([]))
        return DirichletSet(
            np.concatenate([s.dofs for s in sets]),
            np.concatenate([s.values for s in sets]),
        )


def solve_spd(a_mat: sp.spmatrix, rhs: np.ndarray, method: str = "auto",
              rtol: float = 1e-12, x0: np.ndarray | None = None) -> np.ndarray:
    """Solve a symmetric positive definite sparse system.

    ``auto`` factors directly and falls back to Jacobi-preconditioned
    conjugate gradients if factorization runs out of memory.
    """
    rhs = np.asarray(rhs, dtype=float)
    if a_mat.shape[0] != len(rhs):
        raise ValueError("matrix and right-hand side sizes differ")
    if a_mat.shape[0] == 0:
        return np.zeros(0)
    if method not in ("auto", "direct", "cg"):
        raise ValueError(f"unknown solver method '{method}'")
    if method in ("auto", "direct"):
        try:
            lu = spla.splu(a_mat.tocsc(), permc_spec="MMD_AT_PLUS_A")
            return lu.solve(rhs)
        except MemoryError:
            if method == "direct":
                raise
    diag = a_mat.diagonal()
    if np.any(diag <= 0.0):
        raise ValueError("system matrix is not positive definite")
    precond = spla.LinearOperator(a_mat.shape, matvec=lambda v: v / diag)
    x, info = spla.cg(a_mat, rhs, x0=x0, M=precond,
                      rtol=rtol, atol=rtol * max(np.linalg.norm(rhs), 1e-30),
                      maxiter=50 * a_mat.shape[0])
    if info != 0:
        raise RuntimeError(f"conjugate gradients failed to converge (info={info})")
    return x


def solve_dirichlet(a_mat: sp.spmatrix, rhs: np.ndarray, bc: DirichletSet,
                    method: str = "auto", x0: np.ndarray | None = None) -> np.ndarray:
    """Solve A u = rhs with prescribed dofs eliminated.

    Returns the full solution vector including the prescribed values.
    """
    n = a_mat.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    free = np.ones(n, dtype=bool)
    free[bc.dofs] = False
    u = np.zeros(n)
    u[bc.dofs] = bc.values
    a_csr = a_mat.tocsr()
    reduced = a_csr[free]
    rhs_f = rhs[free] - reduced[:, bc.dofs] @ bc.values
    a_ff = reduced[:, free]
    u0 = None if x0 is None else np.asarray(x0, dtype=float)[free]
    u[free] = solve_spd(a_ff.tocsc(), rhs_f, method=method, x0=u0)
    return u


@dataclass(frozen=True)
class BoxSolveInfo:
    """Exit state of the box-constrained solve."""

    cycles: int
    projected_residual: float
    n_lower: int
    n_upper: int


def projected_residual(a_mat: sp.spmatrix, rhs: np.ndarray, x: np.ndarray,
                       lower: np.ndarray, upper: np.ndarray,
                       gap: float = 1e-12) -> np.ndarray:
    """Componentwise optimality violation of the box-constrained problem.

    At free points this is the plain residual A x - rhs; at the lower
    bound only its negative part counts, at the upper bound only the
    positive part.
    """
    grad = a_mat @ x - rhs
    r = grad.copy()
    at_lo = x <= lower + gap
    at_hi = x >= upper - gap
    r[at_lo] = np.minimum(grad[at_lo], 0.0)
    r[at_hi] = np.maximum(grad[at_hi], 0.0)
    r[at_lo & at_hi] = 0.0
    return r


def _preconditioned_free_solve(a_ff: sp.spmatrix, rhs_f: np.ndarray,
                               x0_f: np.ndarray, lu_full, free: np.ndarray,
                               n: int) -> np.ndarray:
    """Solve a free-set subsystem by CG preconditioned with the full factor.

    Embedding into the full domain and applying the factored full
    matrix is close to the exact inverse whenever few points are
    constrained, so a handful of iterations suffice. Falls back to a
    direct factorization of the subsystem if the iteration stalls.
    """
    free_idx = np.flatnonzero(free)
    buf = np.zeros(n)

    def apply_prec(v: np.ndarray) -> np.ndarray:
        buf[free_idx] = v
        out = lu_full.solve(buf)[free_idx]
        buf[free_idx] = 0.0
        return out

    precond = spla.LinearOperator(a_ff.shape, matvec=apply_prec)
    norm = np.linalg.norm(rhs_f)
    x_f, info = spla.cg(a_ff, rhs_f, x0=x0_f, M=precond, rtol=1e-12,
                        atol=1e-12 * max(norm, 1e-30), maxiter=400)
    if info != 0:
        x_f = solve_spd(a_ff, rhs_f, method="direct")
    return x_f


def solve_box_constrained(a_mat: sp.spmatrix, rhs: np.ndarray, lower: np.ndarray,
                          upper: np.ndarray, x0: np.ndarray | None = None,
                          tol: float = 1e-10, max_cycles: int = 2000,
                          method: str = "auto") -> tuple[np.ndarray, BoxSolveInfo]:
    """Minimize 0.5 x'Ax - rhs'x subject to lower <= x <= upper.

    Primal active-set iteration: solve the unconstrained problem on
    the inactive set, clamp new violations, release active points
    whose multiplier has the wrong sign, repeat. A must be symmetric
    positive definite; equal bounds pin a component outright.

    A good ``x0`` seeds the working set from its own gradient, which
    settles in a couple of cycles when the solution moves little.
    Cold starts free everything except pinned points; the constraint
    front then advances one mesh ring per cycle, which is why the
    cycle budget is generous.

    With ``auto`` the shifted full matrix is factored once per call
    and reused: it solves all-free cycles outright, preconditions
    conjugate gradients when most points are free, and only small
    free sets get their own direct factorization.
    """
    n = a_mat.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper < lower):
        raise ValueError("upper bound below lower bound")
    scale = max(np.max(np.abs(rhs)), 1e-30)
    width = upper - lower
    finite = width[np.isfinite(width)]
    gap = 1e-12 * max(float(finite.max(initial=0.0)), 1.0)
    pinned = width <= gap
    x = np.clip(lower if x0 is None else np.asarray(x0, dtype=float), lower, upper)

    a_csr = a_mat.tocsr()
    if x0 is None:
        active_lo = pinned.copy()
        active_hi = np.zeros(n, dtype=bool)
    else:
        grad = a_csr @ x - rhs
        active_lo = pinned | ((x <= lower + gap) & (grad >= 0.0))
        active_hi = ~pinned & (x >= upper - gap) & (grad < 0.0)
    # nudges a floating nullspace (threshold models below their threshold)
    # without touching the solution at solver precision
    shift = 1e-14 * max(float(a_csr.diagonal().max(initial=0.0)), 1e-30)

    full_factor: list = []

    def get_full_factor():
        # factored on first demand only: cycles with small free sets
        # never pay for it
        if not full_factor:
            try:
                shifted = (a_csr + shift * sp.identity(n, format="csr")).tocsc()
                full_factor.append(spla.splu(shifted, permc_spec="MMD_AT_PLUS_A"))
            except MemoryError:
                full_factor.append(None)
        return full_factor[0]

    for cycle in range(1, max_cycles + 1):
        x = np.where(active_lo, lower, np.where(active_hi, upper, x))
        free = ~(active_lo | active_hi)
        if free.any():
            n_free = int(free.sum())
            lu_full = get_full_factor() if (method == "auto" and n > 256
                                            and 2 * n_free >= n) else None
            if lu_full is not None and n_free == n:
                x = lu_full.solve(rhs)
            else:
                reduced = a_csr[free]
                rhs_f = rhs[free] - reduced[:, ~free] @ x[~free]
                a_ff = reduced[:, free].tocsc()
                a_ff = a_ff + shift * sp.identity(a_ff.shape[0], format="csc")
                if lu_full is not None:
                    x[free] = _preconditioned_free_solve(a_ff, rhs_f, x[free],
                                                         lu_full, free, n)
                else:
                    x[free] = solve_spd(a_ff, rhs_f, method=method, x0=x[free])
        hit_lo = free & (x < lower - gap)
        hit_hi = free & (x > upper + gap)
        if hit_lo.any() or hit_hi.any():
            active_lo |= hit_lo
            active_hi |= hit_hi
            continue
        x = np.clip(x, lower, upper)
        grad = a_mat @ x - rhs
        release_lo = active_lo & ~pinned & (grad < -tol * scale)
        release_hi = active_hi & (grad > tol * scale)
        if release_lo.any() or release_hi.any():
            active_lo &= ~release_lo
            active_hi &= ~release_hi
            continue
        res = np.max(np.abs(projected_residual(a_mat, rhs, x, lower, upper, gap)))
        return x, BoxSolveInfo(cycle, float(res), int(active_lo.sum()),
                               int(active_hi.sum()))
    raise RuntimeError(f"active-set iteration did not settle in {max_cycles} cycles")
