"""Dense symmetric matrices: eigendecomposition, spectral functions,
Loewner-matrix directional derivatives, Taylor remainders, Schatten norms
and effective rank.

All matrices here are real symmetric and carried by :class:`SymMat`, an
immutable wrapper around a ``numpy`` array.  Construction symmetrizes its
input (sample-covariance accumulation can leave last-bit asymmetry) and
rejects non-finite entries outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, DomainError, EigFailure, NotPSD, ZeroMatrix
from .functions import ScalarFunction

__all__ = [
    "SymMat",
    "SpectralDecomp",
    "as_symmat",
    "eigh",
    "apply_scalar_function",
    "loewner_first_difference",
    "frechet_derivative",
    "taylor_remainder",
    "effective_rank",
    "schatten_norm",
    "trace_inner_product",
    "default_loewner_tol",
]


@dataclass(frozen=True)
class SymMat:
    """Immutable dense real symmetric d-by-d matrix."""

    entries: np.ndarray
    symmetrized: bool = False

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix contains non-finite entries")
        was_asym = not np.array_equal(a, a.T)
        if was_asym:
            a = (a + a.T) / 2.0
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "symmetrized", was_asym)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __add__(self, other):
        return SymMat(self.entries + as_symmat(other).entries)

    def __sub__(self, other):
        return SymMat(self.entries - as_symmat(other).entries)

    def __mul__(self, c):
        return SymMat(self.entries * float(c))

    __rmul__ = __mul__


def as_symmat(a) -> SymMat:
    """Coerce an array-like (or pass through a SymMat) to :class:`SymMat`."""
    if isinstance(a, SymMat):
        return a
    return SymMat(np.asarray(a, dtype=float))


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a SymMat."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def source_dim(self) -> int:
        return self.eigenvalues.shape[0]

    def recompose(self) -> SymMat:
        u, lam = self.eigenvectors, self.eigenvalues
        return SymMat(u @ (lam[:, None] * u.T))


def eigh(a) -> SpectralDecomp:
    """Spectral decomposition of a symmetric matrix.

    Deterministic for a fixed input on one platform (LAPACK with a fixed
    reduction order).  Within degenerate eigenspaces the basis is
    arbitrary; downstream spectral operations are basis-invariant.
    """
    a = as_symmat(a)
    try:
        lam, u = np.linalg.eigh(a.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological
        raise EigFailure(str(exc)) from exc
    lam.setflags(write=False)
    u.setflags(write=False)
    return SpectralDecomp(eigenvalues=lam, eigenvectors=u)


def domain_margin(eigs: np.ndarray) -> float:
    """Rounding margin at finite domain endpoints.

    An eigenvalue this close to the boundary is indistinguishable from one
    on it (a rank-deficient covariance yields eigenvalues around
    1e-16 * scale rather than exact zeros), so it is treated as outside.
    """
    scale = float(np.abs(eigs).max()) if eigs.size else 0.0
    return 1e-12 * max(1.0, scale)


def _check_domain(eigs: np.ndarray, f: ScalarFunction):
    lo, hi = f.domain
    margin = domain_margin(eigs)
    lo_eff = lo + margin if np.isfinite(lo) else lo
    hi_eff = hi - margin if np.isfinite(hi) else hi
    bad = (eigs <= lo_eff) | (eigs >= hi_eff)
    if np.any(bad):
        raise DomainError(
            f"eigenvalue(s) {eigs[bad]} outside domain ({lo}, {hi}) of '{f.name}'"
        )


def apply_scalar_function(d: SpectralDecomp, f: ScalarFunction) -> SymMat:
    """Spectral matrix function f(A) = U f(Lambda) U^T."""
    _check_domain(d.eigenvalues, f)
    u = d.eigenvectors
    flam = f.eval(d.eigenvalues)
    return SymMat(u @ (flam[:, None] * u.T))


def default_loewner_tol(eigs: np.ndarray) -> float:
    """Degeneracy threshold: 1e-8 times max(1, eigenvalue spread)."""
    eigs = np.asarray(eigs, dtype=float)
    spread = float(eigs.max() - eigs.min()) if eigs.size else 0.0
    return 1e-8 * max(1.0, spread)


def loewner_first_difference(eigs, f: ScalarFunction, tol: float | None = None) -> np.ndarray:
    """Matrix of first divided differences of f on an eigenvalue grid.

    Entry (i, j) is (f(l_i) - f(l_j)) / (l_i - l_j) when the gap exceeds
    ``tol``, else f'((l_i + l_j) / 2); the diagonal is f'(l_i).
    """
    eigs = np.asarray(eigs, dtype=float)
    _check_domain(eigs, f)
    if tol is None:
        tol = default_loewner_tol(eigs)
    if tol <= 0:
        raise ValueError("tol must be positive")
    li = eigs[:, None]
    lj = eigs[None, :]
    gap = li - lj
    close = np.abs(gap) <= tol
    # avoid 0/0 on the (near-)diagonal before patching it with f'
    safe_gap = np.where(close, 1.0, gap)
    fv = f.eval(eigs)
    quotients = (fv[:, None] - fv[None, :]) / safe_gap
    mid_deriv = f.deriv((li + lj) / 2.0)
    out = np.where(close, mid_deriv, quotients)
    return (out + out.T) / 2.0


def frechet_derivative(d: SpectralDecomp, f: ScalarFunction, h, tol: float | None = None) -> SymMat:
    """Directional derivative Df(A; H) via the Loewner-matrix Schur product.

    In A's eigenbasis, Df(A; H) = L o (U^T H U) with L the matrix of first
    divided differences of f; linear in H and invariant under the basis
    choice inside degenerate eigenspaces.
    """
    h = as_symmat(h)
    if h.dim != d.source_dim:
        raise DimMismatch(f"H has dim {h.dim}, decomposition has {d.source_dim}")
    loewner = loewner_first_difference(d.eigenvalues, f, tol)
    u = d.eigenvectors
    h_eig = u.T @ h.entries @ u
    return SymMat(u @ (loewner * h_eig) @ u.T)


def taylor_remainder(a, h, f: ScalarFunction, tol: float | None = None) -> SymMat:
    """First-order Taylor remainder f(A+H) - f(A) - Df(A; H)."""
    a = as_symmat(a)
    h = as_symmat(h)
    if a.dim != h.dim:
        raise DimMismatch(f"A has dim {a.dim}, H has dim {h.dim}")
    da = eigh(a)
    f_a_plus_h = apply_scalar_function(eigh(a + h), f)
    f_a = apply_scalar_function(da, f)
    df = frechet_derivative(da, f, h, tol)
    return SymMat(f_a_plus_h.entries - f_a.entries - df.entries)


def effective_rank(a) -> float:
    """tr(A) / ||A||_op for a nonzero PSD matrix; lies in [1, d]."""
    a = as_symmat(a)
    lam = eigh(a).eigenvalues
    opnorm = float(np.abs(lam).max())
    if opnorm == 0.0:
        raise ZeroMatrix("effective rank undefined for the zero matrix")
    if lam.min() < -1e-10 * opnorm:
        raise NotPSD(f"minimum eigenvalue {lam.min():g} below PSD tolerance")
    return float(lam.sum()) / opnorm


def schatten_norm(a, p) -> float:
    """Schatten norm: p=1 nuclear, p=2 Hilbert-Schmidt, p=inf operator."""
    a = as_symmat(a)
    lam = eigh(a).eigenvalues
    if p == 1:
        return float(np.abs(lam).sum())
    if p == 2:
        return float(np.sqrt((lam**2).sum()))
    if p in (np.inf, float("inf"), "inf"):
        return float(np.abs(lam).max()) if lam.size else 0.0
    raise ValueError(f"unsupported Schatten order {p!r}; use 1, 2 or inf")


def trace_inner_product(a, b) -> float:
    """Hilbert-Schmidt inner product tr(AB) of two symmetric matrices."""
    a = as_symmat(a)
    b = as_symmat(b)
    if a.dim != b.dim:
        raise DimMismatch(f"dims {a.dim} and {b.dim} differ")
    return float(np.sum(a.entries * b.entries))
