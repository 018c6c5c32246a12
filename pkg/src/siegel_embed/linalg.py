"""Dense complex/real matrix kernel.

Everything here works on single matrices or on stacks of matrices with shape
``(..., n, n)``.  The eigen-solvers are cyclic Jacobi sweeps compiled with
numba; they are slower than LAPACK for large ``n`` but the matrices in this
package are tiny (``n <= 8``) and Jacobi gives orthogonality by construction.

Conventions
-----------
* ``sym_eig`` and ``hermitian_eig`` return eigenvalues in ascending order.
* ``takagi`` returns the diagonal in descending order and satisfies
  ``a = conj(K) @ diag(d) @ K^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from numba import njit

# Tolerance defaults; every public function takes an override.
SYMMETRY_TOL = 1e-10
JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 60
JOINT_DIAG_TOL = 1e-8
PHASE_ZERO_TOL = 1e-12
INVERSE_RCOND = 1e-13


class LinAlgError(ArithmeticError):
    """Base class for numerical failures in the kernel."""


class ShapeError(ValueError):
    pass


class PreconditionError(ValueError):
    """Input does not satisfy the structural precondition (symmetry, ...)."""


class ConvergenceError(LinAlgError):
    pass


class SingularMatrixError(LinAlgError):
    def __init__(self, message: str, norm: float):
        super().__init__(f"{message} (matrix norm {norm:.3e})")
        self.norm = norm


class NotPositiveDefiniteError(LinAlgError):
    def __init__(self, min_eigenvalue: float):
        super().__init__(f"matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class TakagiError(LinAlgError):
    """Simultaneous diagonalization in the Takagi factorization failed."""

    def __init__(self, residual: float, scale: float):
        super().__init__(
            f"Takagi step 2 left an off-diagonal residual of {residual:.3e} "
            f"(matrix scale {scale:.3e}); real and imaginary parts do not commute"
        )
        self.residual = residual
        self.scale = scale


@dataclass(frozen=True)
class ComplexMatrix:
    """Square complex matrix held as separate real and imaginary parts."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float)
        if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
            raise ShapeError(f"real/imaginary parts must be matching square matrices, got {re.shape} and {im.shape}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, z) -> "ComplexMatrix":
        z = np.asarray(z, dtype=complex)
        return cls(z.real.copy(), z.imag.copy())

    @classmethod
    def identity(cls, n: int) -> "ComplexMatrix":
        return cls(np.eye(n), np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.re.shape[0]

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def T(self) -> "ComplexMatrix":
        return ComplexMatrix(self.re.T, self.im.T)

    def conj(self) -> "ComplexMatrix":
        return ComplexMatrix(self.re, -self.im)

    @property
    def H(self) -> "ComplexMatrix":
        return ComplexMatrix(self.re.T, -self.im.T)

    def __matmul__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        return complex_matmul(self, other)

    def __add__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        return ComplexMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        return ComplexMatrix(self.re - other.re, self.im - other.im)

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return bool(np.max(np.abs(self.re - self.re.T), initial=0.0) <= tol
                    and np.max(np.abs(self.im - self.im.T), initial=0.0) <= tol)

    def is_hermitian(self, tol: float = SYMMETRY_TOL) -> bool:
        return bool(np.max(np.abs(self.re - self.re.T), initial=0.0) <= tol
                    and np.max(np.abs(self.im + self.im.T), initial=0.0) <= tol)

    def is_unitary(self, tol: float = 1e-9) -> bool:
        z = self.to_complex()
        return bool(np.linalg.norm(z.conj().T @ z - np.eye(self.n)) <= tol)


MatrixLike = Union[ComplexMatrix, np.ndarray]


class SymEigDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class TakagiFactorization(NamedTuple):
    diag: np.ndarray
    unitary: np.ndarray

    def reconstruct(self) -> np.ndarray:
        k = self.unitary
        return np.conj(k) @ (self.diag[..., :, None] * np.swapaxes(np.conj(k), -1, -2))


def _unwrap(a: MatrixLike) -> np.ndarray:
    if isinstance(a, ComplexMatrix):
        return a.to_complex()
    return np.asarray(a, dtype=complex)


def _square_stack(a: np.ndarray, what: str = "matrix") -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"{what} must be square, got shape {a.shape}")


def sym_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def conj_t(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(a), -1, -2)


# ----------------------------------------------------------------------------
# arithmetic

def complex_matmul(a: MatrixLike, b: MatrixLike):
    """Complex product carried out on real and imaginary parts.

    Returns a ``ComplexMatrix`` when ``a`` is one, otherwise a complex array.
    """
    wrap = isinstance(a, ComplexMatrix)
    za, zb = _unwrap(a), _unwrap(b)
    if za.shape[-1] != zb.shape[-2]:
        raise ShapeError(f"cannot multiply shapes {za.shape} and {zb.shape}")
    ar, ai, br, bi = za.real, za.imag, zb.real, zb.imag
    re = ar @ br - ai @ bi
    im = ar @ bi + ai @ br
    if wrap:
        return ComplexMatrix(re, im)
    return re + 1j * im


def _inv_via_real(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # (X + iY)^-1 = P + iQ with X invertible: P = (X + Y X^-1 Y)^-1, Q = -X^-1 Y P
    x_inv_y = np.linalg.solve(x, y)
    p = np.linalg.inv(x + y @ x_inv_y)
    return p - 1j * (x_inv_y @ p)


def _inv_via_imag(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Y invertible: Q = -(Y + X Y^-1 X)^-1, P = -Y^-1 X Q
    y_inv_x = np.linalg.solve(y, x)
    q = -np.linalg.inv(y + x @ y_inv_x)
    return -(y_inv_x @ q) + 1j * q


def _inv_via_block(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    block = np.block([[x, -y], [y, x]])
    inv = np.linalg.inv(block)
    return inv[..., :n, :n] + 1j * inv[..., n:, :n]


def complex_inverse(a: MatrixLike, rcond: float = INVERSE_RCOND, pivot: str = "auto"):
    """Invert a complex matrix (or stack) in real arithmetic.

    With ``pivot="auto"`` the real or the imaginary part is used as pivot
    block, whichever is better conditioned; when both are near-singular the
    ``2n x 2n`` real embedding ``[[X, -Y], [Y, X]]`` is inverted instead.
    ``pivot="real"`` / ``pivot="imag"`` skip the conditioning test for callers
    that know the real / imaginary part is positive definite.
    """
    wrap = isinstance(a, ComplexMatrix)
    z = _unwrap(a)
    _square_stack(z)
    if pivot in ("real", "imag"):
        out = (_inv_via_real if pivot == "real" else _inv_via_imag)(z.real, z.imag)
        return ComplexMatrix.from_complex(out) if wrap else out
    if pivot != "auto":
        raise ValueError(f"unknown pivot {pivot!r}")
    batch = z.shape[:-2]
    n = z.shape[-1]
    zf = z.reshape((-1, n, n))
    x, y = zf.real, zf.imag
    out = np.empty_like(zf)
    with np.errstate(all="ignore"):
        cx = np.linalg.cond(x)
        cy = np.linalg.cond(y)
    cx = np.where(np.isfinite(cx), cx, np.inf)
    cy = np.where(np.isfinite(cy), cy, np.inf)
    limit = 1.0 / rcond
    use_x = (cx <= cy) & (cx < limit)
    use_y = ~use_x & (cy < limit)
    rest = ~(use_x | use_y)
    if use_x.any():
        out[use_x] = _inv_via_real(x[use_x], y[use_x])
    if use_y.any():
        out[use_y] = _inv_via_imag(x[use_y], y[use_y])
    if rest.any():
        xr, yr = x[rest], y[rest]
        block = np.block([[xr, -yr], [yr, xr]])
        cb = np.linalg.cond(block)
        bad = ~np.isfinite(cb) | (cb >= limit)
        if bad.any():
            idx = np.flatnonzero(rest)[np.flatnonzero(bad)[0]]
            raise SingularMatrixError("complex matrix is singular to working precision",
                                      float(np.linalg.norm(zf[idx])))
        out[rest] = _inv_via_block(xr, yr)
    out = out.reshape(batch + (n, n))
    if wrap:
        return ComplexMatrix.from_complex(out)
    return out


# ----------------------------------------------------------------------------
# Jacobi kernels (single matrix; batched wrappers below)

@njit(cache=True)
def _jacobi_sym_one(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    threshold = tol * tol * max(scale, 1e-300)
    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if off <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, converged


@njit(cache=True)
def _jacobi_herm_one(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n) + 0j
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j].real ** 2 + a[i, j].imag ** 2
    threshold = tol * tol * max(scale, 1e-300)
    converged = False
    rotated = True
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j].real ** 2 + a[i, j].imag ** 2
        if off <= threshold or not rotated:
            converged = True
            break
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = abs(a[p, q])
                # negligible entries are skipped: their total stays below the
                # threshold, and subnormal ones would give an inexact phase
                if r * r * n * n <= threshold or r < 1e-280:
                    continue
                phase = a[p, q] / r
                phase = phase / abs(phase)
                rotated = True
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] makes G^H A G real-diagonal on (p, q)
                theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ce = c * np.conj(phase)
                se = s * np.conj(phase)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - se * akq
                    a[k, q] = s * akp + ce * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - np.conj(se) * aqk
                    a[q, k] = s * apk + np.conj(ce) * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - se * vkq
                    v[k, q] = s * vkp + ce * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    return w, v, converged


@njit(cache=True)
def _joint_jacobi_one(a1, a2, tol, max_sweeps):
    # Jacobi angles for simultaneous diagonalization of two real symmetric matrices.
    n = a1.shape[0]
    a1 = a1.copy()
    a2 = a2.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                g00 = 0.0
                g01 = 0.0
                g11 = 0.0
                for m in range(2):
                    if m == 0:
                        am = a1[p, p] - a1[q, q]
                        ap = a1[p, q] + a1[q, p]
                    else:
                        am = a2[p, p] - a2[q, q]
                        ap = a2[p, q] + a2[q, p]
                    g00 += am * am
                    g01 += am * ap
                    g11 += ap * ap
                ton = g00 - g11
                toff = 2.0 * g01
                # quarter of the angle of (ton, toff): the dominant eigenvector of G,
                # also correct when ton < 0 and toff == 0
                theta = 0.25 * np.arctan2(toff, ton)
                c = np.cos(theta)
                s = np.sin(theta)
                if abs(s) <= tol:
                    continue
                rotated = True
                for m in range(2):
                    a = a1 if m == 0 else a2
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp + s * akq
                        a[k, q] = -s * akp + c * akq
                    for k in range(n):
                        apk = a[p, k]
                        aqk = a[q, k]
                        a[p, k] = c * apk + s * aqk
                        a[q, k] = -s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp + s * vkq
                    v[k, q] = -s * vkp + c * vkq
        if not rotated:
            return v, True
    return v, False


@njit(cache=True)
def _one_sided_jacobi(a, tol, max_sweeps, want_v):
    # Hestenes Jacobi: rotate column pairs of A until they are orthogonal.  On
    # exit A V holds orthogonal columns whose norms are the singular values, to
    # high relative accuracy.  Returns (A V, V, converged); V is only
    # accumulated when want_v is set.
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n) + 0j
    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0j
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    alpha += akp.real ** 2 + akp.imag ** 2
                    beta += akq.real ** 2 + akq.imag ** 2
                    gamma += np.conj(akp) * akq
                r = abs(gamma)
                if r <= tol * np.sqrt(alpha * beta) or r < 1e-280:
                    continue
                rotated = True
                phase = gamma / r
                theta = (beta - alpha) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                se = s * np.conj(phase)
                ce = c * np.conj(phase)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - se * akq
                    a[k, q] = s * akp + ce * akq
                if want_v:
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - se * vkq
                        v[k, q] = s * vkp + ce * vkq
        if not rotated:
            converged = True
            break
    return a, v, converged


@njit(cache=True)
def _column_norms(a):
    n = a.shape[1]
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(a.shape[0]):
            acc += a[k, j].real ** 2 + a[k, j].imag ** 2
        out[j] = np.sqrt(acc)
    return out


@njit(cache=True)
def _singular_values_one(a, tol, max_sweeps):
    av, _, ok = _one_sided_jacobi(a, tol, max_sweeps, False)
    return _column_norms(av), ok


@njit(cache=True)
def _singular_values_batch(a, tol, max_sweeps):
    b, n, _ = a.shape
    out = np.empty((b, n))
    ok = np.empty(b, dtype=np.bool_)
    for i in range(b):
        sv, oki = _singular_values_one(a[i], tol, max_sweeps)
        out[i] = np.sort(sv)[::-1]
        ok[i] = oki
    return out, ok


def singular_values(a: MatrixLike, *, tol: float = JACOBI_TOL,
                    max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Singular values of a complex matrix (or stack), descending, by one-sided Jacobi."""
    z = _unwrap(a)
    _square_stack(z)
    batch, n = z.shape[:-2], z.shape[-1]
    sv, ok = _singular_values_batch(np.ascontiguousarray(z.reshape((-1, n, n)), dtype=np.complex128),
                                    tol, max_sweeps)
    if not ok.all():
        raise ConvergenceError(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")
    return sv.reshape(batch + (n,))


@njit(cache=True)
def _jacobi_sym_batch(a, tol, max_sweeps):
    b, n, _ = a.shape
    w = np.empty((b, n))
    v = np.empty((b, n, n))
    ok = np.empty(b, dtype=np.bool_)
    for i in range(b):
        wi, vi, oki = _jacobi_sym_one(a[i], tol, max_sweeps)
        order = np.argsort(wi)
        for j in range(n):
            w[i, j] = wi[order[j]]
            for k in range(n):
                v[i, k, j] = vi[k, order[j]]
        ok[i] = oki
    return w, v, ok


@njit(cache=True)
def _jacobi_herm_batch(a, tol, max_sweeps):
    b, n, _ = a.shape
    w = np.empty((b, n))
    v = np.empty((b, n, n), dtype=np.complex128)
    ok = np.empty(b, dtype=np.bool_)
    for i in range(b):
        wi, vi, oki = _jacobi_herm_one(a[i], tol, max_sweeps)
        order = np.argsort(wi)
        for j in range(n):
            w[i, j] = wi[order[j]]
            for k in range(n):
                v[i, k, j] = vi[k, order[j]]
        ok[i] = oki
    return w, v, ok


@njit(cache=True)
def _joint_jacobi_batch(a1, a2, tol, max_sweeps):
    b, n, _ = a1.shape
    v = np.empty((b, n, n))
    ok = np.empty(b, dtype=np.bool_)
    for i in range(b):
        vi, oki = _joint_jacobi_one(a1[i], a2[i], tol, max_sweeps)
        v[i] = vi
        ok[i] = oki
    return v, ok


# ----------------------------------------------------------------------------
# eigendecompositions

def sym_eig(a, tol: float = SYMMETRY_TOL, *, jacobi_tol: float = JACOBI_TOL,
            max_sweeps: int = JACOBI_MAX_SWEEPS) -> SymEigDecomposition:
    """Eigendecomposition ``a = Q diag(w) Q^T`` of a real symmetric matrix (or stack)."""
    a = np.asarray(a, dtype=float)
    _square_stack(a)
    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0)
    if asym > tol:
        raise PreconditionError(f"matrix is not symmetric (max asymmetry {asym:.3e} > {tol:.1e})")
    batch, n = a.shape[:-2], a.shape[-1]
    flat = np.ascontiguousarray(sym_part(a).reshape((-1, n, n)))
    w, v, ok = _jacobi_sym_batch(flat, jacobi_tol, max_sweeps)
    if not ok.all():
        raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return SymEigDecomposition(w.reshape(batch + (n,)), v.reshape(batch + (n, n)))


def hermitian_eig(a: MatrixLike, tol: float = SYMMETRY_TOL, *, jacobi_tol: float = JACOBI_TOL,
                  max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigendecomposition ``a = U diag(w) U^H`` of a Hermitian matrix (or stack).

    Returns ``(w, U)`` with ``w`` ascending.  ``U`` is a ``ComplexMatrix`` when
    the input was one.
    """
    wrap = isinstance(a, ComplexMatrix)
    z = _unwrap(a)
    _square_stack(z)
    dev = np.max(np.abs(z - conj_t(z)), initial=0.0)
    if dev > tol:
        raise PreconditionError(f"matrix is not Hermitian (max deviation {dev:.3e} > {tol:.1e})")
    batch, n = z.shape[:-2], z.shape[-1]
    flat = np.ascontiguousarray(0.5 * (z + conj_t(z)).reshape((-1, n, n)))
    w, u, ok = _jacobi_herm_batch(flat, jacobi_tol, max_sweeps)
    if not ok.all():
        raise ConvergenceError(f"complex Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = w.reshape(batch + (n,))
    u = u.reshape(batch + (n, n))
    if wrap:
        return w, ComplexMatrix.from_complex(u)
    return w, u


def takagi(a: MatrixLike, tol: float = SYMMETRY_TOL, *, joint_tol: float = JOINT_DIAG_TOL,
           check: bool = True) -> TakagiFactorization:
    """Takagi factorization ``a = conj(K) diag(d) K^H`` of a complex symmetric matrix.

    1. unitary-diagonalize ``A^H A = Z1^H D^2 Z1``;
    2. ``conj(Z1) A Z1^H`` has commuting symmetric real and imaginary parts, which
       are diagonalized together by an orthogonal ``Z2``, giving diagonal ``B``;
    3. ``Z3 = diag(sqrt(b_i / |b_i|))^-1`` (phase 1 where ``b_i`` vanishes);
    4. ``K = Z1^H Z2 Z3``.

    ``diag`` is sorted in descending order.  Works on stacks ``(..., n, n)``.
    """
    z = _unwrap(a)
    _square_stack(z)
    asym = np.max(np.abs(z - np.swapaxes(z, -1, -2)), initial=0.0)
    if asym > tol * max(1.0, float(np.max(np.abs(z), initial=0.0))):
        raise PreconditionError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    batch, n = z.shape[:-2], z.shape[-1]
    zf = sym_part(z.reshape((-1, n, n)))
    # work on a unit-scale copy so that A^H A neither underflows nor overflows
    amax = np.maximum(np.max(np.abs(zf.real), axis=(-2, -1), initial=0.0),
                      np.max(np.abs(zf.imag), axis=(-2, -1), initial=0.0))
    amax = np.where(amax > 0, amax, 1.0)
    # real division per part: complex division by a subnormal scalar overflows
    zf = zf.real / amax[:, None, None] + 1j * (zf.imag / amax[:, None, None])

    # step 1: A^H A = U D^2 U^H, i.e. Z1 = U^H
    aha = conj_t(zf) @ zf
    aha = 0.5 * (aha + conj_t(aha))
    _, u, ok = _jacobi_herm_batch(np.ascontiguousarray(aha), JACOBI_TOL, JACOBI_MAX_SWEEPS)
    if not ok.all():
        raise ConvergenceError("Takagi step 1 did not converge")

    # step 2: conj(Z1) A Z1^H = U^T A U = Z2 B Z2^T
    bp = sym_part(np.swapaxes(u, -1, -2) @ zf @ u)
    z2, ok = _joint_jacobi_batch(np.ascontiguousarray(bp.real), np.ascontiguousarray(bp.imag),
                                 1e-14, JACOBI_MAX_SWEEPS)
    bdiag_full = np.swapaxes(z2, -1, -2) @ bp @ z2
    b = np.diagonal(bdiag_full, axis1=-2, axis2=-1).copy()
    if check:
        off = bdiag_full - b[..., None] * np.eye(n)
        resid = np.linalg.norm(off, axis=(-2, -1))
        bad = resid > joint_tol * np.linalg.norm(zf, axis=(-2, -1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise TakagiError(float(resid[i] * amax[i]), float(amax[i]))

    # step 3: phase correction
    mag = np.abs(b)
    phase = np.divide(b, mag, out=np.ones_like(b), where=mag > PHASE_ZERO_TOL)
    z3 = 1.0 / np.sqrt(phase)

    # step 4
    k = u @ (z2 * z3[..., None, :])
    order = np.argsort(-mag, axis=-1, kind="stable")
    d = np.take_along_axis(mag, order, axis=-1) * amax[:, None]
    k = np.take_along_axis(k, order[..., None, :], axis=-1)
    return TakagiFactorization(d.reshape(batch + (n,)), k.reshape(batch + (n, n)))


def pd_sqrt_inv(y, tol: float = SYMMETRY_TOL):
    """Square root and inverse square root of a symmetric positive definite matrix."""
    w, q = sym_eig(y, tol)
    wmin = float(np.min(w))
    if not wmin > 0.0:
        raise NotPositiveDefiniteError(wmin)
    qt = np.swapaxes(q, -1, -2)
    root = np.sqrt(w)
    sqrt = (q * root[..., None, :]) @ qt
    sqrt_inv = (q / root[..., None, :]) @ qt
    return sym_part(sqrt), sym_part(sqrt_inv)
