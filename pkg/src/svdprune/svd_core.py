"""Deterministic thin SVD of a feature matrix.

Two kernels are available.  ``"lapack"`` (the default) calls the LAPACK
divide-and-conquer driver through numpy with BLAS pinned to one thread.
``"jacobi"`` is a one-sided Jacobi iteration on the QR-preconditioned
matrix; it is slower but has no dependency on LAPACK's SVD driver.

Both kernels go through the same post-processing: descending order,
truncation to the numerical rank, and a sign convention that makes the
largest-magnitude entry of every left singular vector non-negative.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DegenerateInputError, NumericalError, ShapeError
from .matrix_io import FeatureMatrix

RANK_EPS = 2.2e-16
ORTHONORMALITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Thin SVD factors ``F = U @ diag(singular_values) @ Vt``."""

    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singular_values)


@dataclass(frozen=True)
class ValidationReport:
    u_orthonormality: float
    v_orthonormality: float
    reconstruction: float
    descending: bool
    positive: bool
    sign_convention: bool

    @property
    def passed(self) -> bool:
        return (
            self.u_orthonormality <= ORTHONORMALITY_TOL
            and self.v_orthonormality <= ORTHONORMALITY_TOL
            and self.reconstruction <= RECONSTRUCTION_TOL
            and self.descending
            and self.positive
        )


def _as_double(m) -> np.ndarray:
    if isinstance(m, FeatureMatrix):
        return m.as_double()
    return FeatureMatrix(m).as_double()


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Circle-method tournament: n - 1 rounds (n even) of disjoint pairs.
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        left, right = [], []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p >= 0 and q >= 0:
                left.append(min(p, q))
                right.append(max(p, q))
        rounds.append((np.array(left, dtype=np.intp), np.array(right, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_kernel(a: np.ndarray, max_sweeps: int):
    """One-sided Jacobi SVD of a tall matrix ``a`` (rows >= cols)."""
    rows, cols = a.shape
    if rows > cols:
        q, work = np.linalg.qr(a)
    else:
        q, work = None, a.copy()
    v = np.eye(cols)
    tol = cols * RANK_EPS
    schedule = _round_robin(cols)

    for _ in range(max_sweeps):
        rotated = False
        for p, r in schedule:
            if not len(p):
                continue
            ap, ar = work[:, p], work[:, r]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", ar, ar)
            gamma = np.einsum("ij,ij->j", ap, ar)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            p, r = p[active], r[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            for mat in (work, v):
                mp, mr = mat[:, p], mat[:, r]
                mat[:, p] = c * mp - s * mr
                mat[:, r] = s * mp + c * mr
        if not rotated:
            break
    else:
        raise NumericalError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    u = work[:, order]
    nonzero = sigma > 0
    u[:, nonzero] /= sigma[nonzero]
    if q is not None:
        u = q @ u
    return u, sigma, v[:, order].T


_blas_lock = threading.Lock()
_blas_users = 0
_blas_limiter = None


@contextmanager
def _single_thread_blas():
    # threadpoolctl limits are process-wide; only the first entrant sets them
    # and only the last one out restores them.
    global _blas_users, _blas_limiter
    with _blas_lock:
        if _blas_users == 0:
            _blas_limiter = threadpool_limits(limits=1, user_api="blas")
        _blas_users += 1
    try:
        yield
    finally:
        with _blas_lock:
            _blas_users -= 1
            if _blas_users == 0:
                _blas_limiter.restore_original_limits()
                _blas_limiter = None


def _lapack_kernel(a: np.ndarray):
    with _single_thread_blas():
        try:
            return np.linalg.svd(a, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD did not converge: {exc}") from None


def thin_svd(m, method: str = "lapack", max_sweeps: int = MAX_SWEEPS) -> SvdFactors:
    """Thin SVD truncated to numerical rank, with a fixed sign convention.

    Parameters
    ----------
    m : FeatureMatrix or array-like
        The T x D feature matrix. Computation is always in double precision.
    method : {"lapack", "jacobi"}
        Decomposition kernel.
    max_sweeps : int
        Sweep cap for the Jacobi kernel.

    Raises
    ------
    DegenerateInputError
        If the matrix is identically zero.
    NumericalError
        If the kernel fails to converge.
    """
    a = _as_double(m)
    if not np.any(a):
        raise DegenerateInputError("cannot decompose an all-zero matrix")
    rows, cols = a.shape

    if method == "lapack":
        u, s, vt = _lapack_kernel(a)
    elif method == "jacobi":
        if rows >= cols:
            u, s, vt = _jacobi_kernel(a, max_sweeps)
        else:
            vt_t, s, u_t = _jacobi_kernel(a.T, max_sweeps)
            u, vt = u_t.T, vt_t.T
    else:
        raise ValueError(f"unknown SVD method {method!r}")

    rank = max(1, int(np.count_nonzero(s > max(rows, cols) * s[0] * RANK_EPS)))
    u = np.array(u[:, :rank], order="C")
    s = np.array(s[:rank])
    vt = np.array(vt[:rank], order="C")

    pivots = np.argmax(np.abs(u), axis=0)
    flip = u[pivots, np.arange(rank)] < 0
    u[:, flip] *= -1.0
    vt[flip] *= -1.0

    for arr in (u, s, vt):
        arr.setflags(write=False)
    return SvdFactors(U=u, singular_values=s, Vt=vt)


def validate_factors(f: SvdFactors, m) -> ValidationReport:
    """Measure how well ``f`` satisfies the thin-SVD contract for ``m``."""
    a = _as_double(m)
    u = np.asarray(f.U, dtype=np.float64)
    s = np.asarray(f.singular_values, dtype=np.float64)
    vt = np.asarray(f.Vt, dtype=np.float64)
    r = len(s)
    if u.shape != (a.shape[0], r) or vt.shape != (r, a.shape[1]):
        raise ShapeError(
            f"factor shapes U{u.shape}, s({r},), Vt{vt.shape} do not match matrix {a.shape}"
        )

    eye = np.eye(r)
    u_res = float(np.max(np.abs(u.T @ u - eye)))
    v_res = float(np.max(np.abs(vt @ vt.T - eye)))
    norm = np.linalg.norm(a)
    recon = float(np.linalg.norm(a - (u * s) @ vt))
    if norm > 0:
        recon /= norm
    pivots = np.argmax(np.abs(u), axis=0)
    return ValidationReport(
        u_orthonormality=u_res,
        v_orthonormality=v_res,
        reconstruction=float(recon),
        descending=bool(np.all(np.diff(s) <= 0)),
        positive=bool(np.all(s > 0)),
        sign_convention=bool(np.all(u[pivots, np.arange(r)] >= 0)),
    )
