"""Siegel upper-half space and bounded domain: transforms, distances, gradients.

All functions operate on complex arrays of shape ``(..., n, n)`` holding
symmetric matrices.  Euclidean gradients use the convention
``G = df/dRe(Z) + i df/dIm(Z)``, i.e. ``df = Re tr(G^H dZ)``, with all ``n^2``
entries treated as independent.
"""
from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from numba import njit

from ..linalg import (
    ConvergenceError,
    JACOBI_MAX_SWEEPS,
    JACOBI_TOL,
    LinAlgError,
    _column_norms,
    _jacobi_sym_one,
    _one_sided_jacobi,
    complex_inverse,
    conj_t,
    pd_sqrt_inv,
    sym_eig,
    sym_part,
    takagi,
)

log = logging.getLogger(__name__)

BOUNDARY_CLAMP = 1e-12


class DomainError(ValueError):
    """A point does not lie in the model it is claimed to belong to."""


def _eye(z: np.ndarray) -> np.ndarray:
    return np.eye(z.shape[-1])


def cayley_to_bounded(z: np.ndarray) -> np.ndarray:
    """``(Z - i Id)(Z + i Id)^-1``: Siegel upper-half space to bounded domain."""
    z = np.asarray(z, dtype=complex)
    eye = _eye(z)
    try:
        return sym_part((z - 1j * eye) @ complex_inverse(z + 1j * eye, pivot="imag"))
    except LinAlgError as exc:
        raise DomainError("Z + i Id is singular; input is not a Siegel point") from exc


def cayley_to_upper(w: np.ndarray) -> np.ndarray:
    """``i (Id + W)(Id - W)^-1``: bounded domain to Siegel upper-half space."""
    w = np.asarray(w, dtype=complex)
    eye = _eye(w)
    try:
        return sym_part(1j * (eye + w) @ complex_inverse(eye - w, pivot="real"))
    except LinAlgError as exc:
        raise DomainError("Id - W is singular; input is not in the bounded domain") from exc


class _Normalized(NamedTuple):
    s_inv: np.ndarray   # Im(Z1)^(-1/2)
    m: np.ndarray       # (Z3 + i Id)^-1
    d: np.ndarray       # Takagi diagonal of W, descending
    k: np.ndarray       # Takagi unitary of W


def _normalize_pair(z1: np.ndarray, z2: np.ndarray) -> _Normalized:
    # Move z1 to i Id by the symplectic map Z -> S^-1 (Z - X1) S^-1, then map z2 to the disc.
    x1, y1 = z1.real, z1.imag
    try:
        _, s_inv = pd_sqrt_inv(y1)
    except LinAlgError as exc:
        raise DomainError(f"imaginary part is not positive definite: {exc}") from exc
    z3 = s_inv @ (z2 - x1) @ s_inv
    m = complex_inverse(sym_part(z3) + 1j * _eye(z3), pivot="imag")
    w = sym_part(_eye(z3) - 2j * m)
    fac = takagi(w)
    d = fac.diag
    if np.any(d >= 1.0 - BOUNDARY_CLAMP):
        log.debug("clamping %d Takagi values at the boundary", int(np.sum(d >= 1.0 - BOUNDARY_CLAMP)))
    d = np.clip(d, 0.0, 1.0 - BOUNDARY_CLAMP)
    return _Normalized(s_inv, m, d, fac.unitary)


def _log_ratio(d: np.ndarray) -> np.ndarray:
    # log((1 + d) / (1 - d))
    return 2.0 * np.arctanh(d)


def takagi_spectrum(z1, z2) -> np.ndarray:
    """Takagi diagonal ``(t_1 >= ... >= t_n)`` of the normalized pair, each in ``[0, 1)``."""
    return _normalize_pair(np.asarray(z1, complex), np.asarray(z2, complex)).d


def dist_siegel(z1, z2) -> np.ndarray:
    """Riemannian distance on the Siegel upper-half space via the Takagi route."""
    d = takagi_spectrum(z1, z2)
    return np.sqrt(np.sum(_log_ratio(d) ** 2, axis=-1))


def dist_bounded(w1, w2) -> np.ndarray:
    return dist_siegel(cayley_to_upper(w1), cayley_to_upper(w2))


def siegel_dist2_grad_takagi(base, moving):
    """Squared distance and Euclidean gradient w.r.t. ``moving`` through the explicit Takagi factors.

    Kept as the reference for the compiled path in :func:`siegel_dist2_grad`.
    """
    base = np.asarray(base, complex)
    moving = np.asarray(moving, complex)
    nz = _normalize_pair(base, moving)
    ratio = _log_ratio(nz.d)
    dist2 = np.sum(ratio ** 2, axis=-1)
    # d/dt of (2 artanh t)^2
    h_prime = 4.0 * ratio / (1.0 - nz.d ** 2)
    g_w = np.conj(nz.k) @ (h_prime[..., :, None] * conj_t(nz.k))
    mh = conj_t(nz.m)
    g_z3 = -2j * (mh @ g_w @ mh)
    g = nz.s_inv @ g_z3 @ nz.s_inv
    return dist2, g


def bounded_dist2_grad(base, moving):
    """Squared distance and Euclidean gradient w.r.t. ``moving`` on the bounded domain."""
    base = np.asarray(base, complex)
    moving = np.asarray(moving, complex)
    eye = _eye(moving)
    n_inv = complex_inverse(eye - moving, pivot="real")
    z_moving = sym_part(1j * (eye + moving) @ n_inv)
    dist2, g_z = siegel_dist2_grad(cayley_to_upper(base), z_moving)
    nh = conj_t(n_inv)
    return dist2, -2j * (nh @ g_z @ nh)


@njit(cache=True)
def _inv_sqrt_pd(y, tol, max_sweeps):
    n = y.shape[0]
    w, q, _ = _jacobi_sym_one(y, tol, max_sweeps)
    s_inv = np.zeros((n, n))
    if np.min(w) <= 0.0:
        return s_inv, False
    for r in range(n):
        for c in range(n):
            acc = 0.0
            for k in range(n):
                acc += q[r, k] * q[c, k] / np.sqrt(w[k])
            s_inv[r, c] = acc
    return s_inv, True


@njit(cache=True)
def _sandwich(s, zr, zi):
    # s (zr + i zi) s for real symmetric s, symmetrized
    n = s.shape[0]
    tr = np.zeros((n, n))
    ti = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            ar = 0.0
            ai = 0.0
            for k in range(n):
                ar += s[r, k] * zr[k, c]
                ai += s[r, k] * zi[k, c]
            tr[r, c] = ar
            ti[r, c] = ai
    out = np.empty((n, n), dtype=np.complex128)
    for r in range(n):
        for c in range(n):
            ar = 0.0
            ai = 0.0
            for k in range(n):
                ar += tr[r, k] * s[k, c]
                ai += ti[r, k] * s[k, c]
            out[r, c] = ar + 1j * ai
    for r in range(n):
        for c in range(r + 1, n):
            mean = 0.5 * (out[r, c] + out[c, r])
            out[r, c] = mean
            out[c, r] = mean
    return out


@njit(cache=True)
def _gauss_jordan_inverse(a):
    n = a.shape[0]
    cm = np.empty((n, 2 * n), dtype=np.complex128)
    for r in range(n):
        for c in range(n):
            cm[r, c] = a[r, c]
            cm[r, n + c] = 1.0 if r == c else 0.0
    for col in range(n):
        piv = col
        best = abs(cm[col, col])
        for r in range(col + 1, n):
            if abs(cm[r, col]) > best:
                best = abs(cm[r, col])
                piv = r
        if piv != col:
            for c in range(2 * n):
                tmp = cm[col, c]
                cm[col, c] = cm[piv, c]
                cm[piv, c] = tmp
        inv_p = 1.0 / cm[col, col]
        for c in range(2 * n):
            cm[col, c] *= inv_p
        for r in range(n):
            if r != col:
                f = cm[r, col]
                if f != 0:
                    for c in range(2 * n):
                        cm[r, c] -= f * cm[col, c]
    return cm[:, n:].copy()


@njit(cache=True)
def _siegel_pair_kernel(x1, y1, x2, y2, tol, max_sweeps, clamp, want_grad):
    # Per pair: S^-1 from the eigenvectors of Y1, Z3 = S^-1 (Z2 - X1) S^-1,
    # M = (Z3 + i Id)^-1, W = Id - 2i M, then the SVD W = U diag(s) V^H by
    # one-sided Jacobi.  For symmetric W the singular values are the Takagi
    # values and U h(s) V^H = conj(K) h(s) K^H, so the gradient needs no phases.
    # status: 0 ok, 1 Y1 not positive definite, 2 no convergence
    b, n, _ = x1.shape
    d2 = np.empty(b)
    grad = np.zeros((b, n, n), dtype=np.complex128) if want_grad else np.zeros((0, n, n), dtype=np.complex128)
    status = np.zeros(b, dtype=np.int64)
    for i in range(b):
        s_inv, pd = _inv_sqrt_pd(y1[i], tol, max_sweeps)
        if not pd:
            status[i] = 1
            d2[i] = np.nan
            continue
        z3 = _sandwich(s_inv, x2[i] - x1[i], y2[i])
        for r in range(n):
            z3[r, r] += 1j
        m = _gauss_jordan_inverse(z3)
        wm = np.empty((n, n), dtype=np.complex128)
        for r in range(n):
            for c in range(n):
                wm[r, c] = (1.0 if r == c else 0.0) - 1j * (m[r, c] + m[c, r])
        av, v, ok = _one_sided_jacobi(wm, tol, max_sweeps, want_grad)
        if not ok:
            status[i] = 2
        sv = _column_norms(av)
        total = 0.0
        for k in range(n):
            t = min(sv[k], 1.0 - clamp)
            total += (2.0 * np.arctanh(t)) ** 2
        d2[i] = total
        if not want_grad:
            continue
        # f_k = h'(t_k) / s_k with h(t) = (2 artanh t)^2; the limit at 0 is 8
        f = np.empty(n)
        for k in range(n):
            t = min(sv[k], 1.0 - clamp)
            if sv[k] > 1e-8:
                f[k] = 8.0 * np.arctanh(t) / ((1.0 - t * t) * sv[k])
            else:
                f[k] = 8.0
        g_w = np.zeros((n, n), dtype=np.complex128)
        for r in range(n):
            for c in range(n):
                acc = 0j
                for k in range(n):
                    acc += av[r, k] * f[k] * np.conj(v[c, k])
                g_w[r, c] = acc
        # g_z3 = -2i M^H g_w M^H
        tmp = np.zeros((n, n), dtype=np.complex128)
        for r in range(n):
            for c in range(n):
                acc = 0j
                for k in range(n):
                    acc += np.conj(m[k, r]) * g_w[k, c]
                tmp[r, c] = acc
        g3 = np.zeros((n, n), dtype=np.complex128)
        for r in range(n):
            for c in range(n):
                acc = 0j
                for k in range(n):
                    acc += tmp[r, k] * np.conj(m[c, k])
                g3[r, c] = -2j * acc
        g = _sandwich(s_inv, g3.real.copy(), g3.imag.copy())
        for r in range(n):
            for c in range(n):
                grad[i, r, c] = g[r, c]
    return d2, grad, status


def _siegel_pairs(z1, z2, want_grad):
    z1, z2 = np.broadcast_arrays(np.asarray(z1, complex), np.asarray(z2, complex))
    batch, n = z1.shape[:-2], z1.shape[-1]
    f1 = z1.reshape((-1, n, n))
    f2 = z2.reshape((-1, n, n))
    d2, g, status = _siegel_pair_kernel(
        np.ascontiguousarray(f1.real), np.ascontiguousarray(sym_part(f1.imag)),
        np.ascontiguousarray(f2.real), np.ascontiguousarray(f2.imag),
        JACOBI_TOL, JACOBI_MAX_SWEEPS, BOUNDARY_CLAMP, want_grad)
    if np.any(status == 1):
        raise DomainError("imaginary part is not positive definite")
    if np.any(status == 2):
        raise ConvergenceError("one-sided Jacobi did not converge")
    return d2.reshape(batch), (g.reshape(batch + (n, n)) if want_grad else None)


def siegel_dist2(z1, z2) -> np.ndarray:
    """Squared Siegel distance in one compiled pass.

    The same quantity as ``dist_siegel(z1, z2) ** 2``: the Takagi values of the
    symmetric matrix ``W`` are its singular values, which one-sided Jacobi
    delivers directly.
    """
    return _siegel_pairs(z1, z2, False)[0]


def siegel_dist2_grad(base, moving):
    """Squared distance and its Euclidean gradient with respect to ``moving``."""
    return _siegel_pairs(base, moving, True)


# ----------------------------------------------------------------------------
# crossratio route

def crossratio_siegel(x, y) -> np.ndarray:
    """``R(X, Y) = (X - Y)(X - conj Y)^-1 (conj X - conj Y)(conj X - Y)^-1``."""
    x = np.asarray(x, complex)
    y = np.asarray(y, complex)
    xc, yc = np.conj(x), np.conj(y)
    return (x - y) @ complex_inverse(x - yc) @ (xc - yc) @ complex_inverse(xc - y)


def crossratio_bounded(x, y) -> np.ndarray:
    """Bounded-domain crossratio; needs both points invertible."""
    x = np.asarray(x, complex)
    y = np.asarray(y, complex)
    xi = np.conj(complex_inverse(x))
    yi = np.conj(complex_inverse(y))
    return (x - y) @ complex_inverse(x - yi) @ (xi - yi) @ complex_inverse(xi - y)


def _crossratio_terms(r: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(r)
    # eigenvalues are real in [0, 1); drop round-off imaginary parts
    ev = np.clip(ev.real, 0.0, None)
    t = np.clip(np.sqrt(ev), 0.0, 1.0 - BOUNDARY_CLAMP)
    return -np.sort(-_log_ratio(t), axis=-1)


def crossratio_eigen(z1, z2) -> np.ndarray:
    """Per-eigenvalue distances ``d_i = log((1 + sqrt r_i) / (1 - sqrt r_i))``, descending.

    Identical points give all zeros.
    """
    z1, z2 = np.broadcast_arrays(np.asarray(z1, complex), np.asarray(z2, complex))
    batch, n = z1.shape[:-2], z1.shape[-1]
    f1, f2 = z1.reshape((-1, n, n)), z2.reshape((-1, n, n))
    distinct = ~np.all(np.abs(f1 - f2) <= 1e-15, axis=(-2, -1))
    out = np.zeros((f1.shape[0], n))
    if distinct.any():
        out[distinct] = _crossratio_terms(crossratio_siegel(f1[distinct], f2[distinct]))
    return out.reshape(batch + (n,))


def crossratio_eigen_bounded(w1, w2) -> np.ndarray:
    return _crossratio_terms(crossratio_bounded(w1, w2))


def finsler_distances(d_vec) -> tuple[np.ndarray, np.ndarray]:
    """``(sum d_i, max d_i)`` from the per-eigenvalue distances."""
    d_vec = np.asarray(d_vec, dtype=float)
    return np.sum(d_vec, axis=-1), np.max(d_vec, axis=-1, initial=0.0)


# ----------------------------------------------------------------------------
# metric tensors

def siegel_rgrad(z, g):
    """``Y sym(G) Y``."""
    y = np.asarray(z).imag
    return sym_part(y @ sym_part(g) @ y)


def bounded_rgrad(z, g):
    """``conj(A) sym(G) A`` with ``A = Id - conj(Z) Z``."""
    z = np.asarray(z, complex)
    a = _eye(z) - np.conj(z) @ z
    return sym_part(np.conj(a) @ sym_part(g) @ a)


def siegel_inner(z, u, v):
    """``Re tr(Y^-1 U Y^-1 conj V)``."""
    y_inv = np.linalg.inv(np.asarray(z).imag)
    return np.trace(y_inv @ u @ y_inv @ np.conj(v), axis1=-2, axis2=-1).real


def bounded_inner(z, u, v):
    """``Re tr(conj(A)^-1 U A^-1 conj V)`` with ``A = Id - conj(Z) Z``."""
    z = np.asarray(z, complex)
    a = _eye(z) - np.conj(z) @ z
    a_inv = np.linalg.inv(a)
    return np.trace(np.conj(a_inv) @ u @ a_inv @ np.conj(v), axis1=-2, axis2=-1).real


# ----------------------------------------------------------------------------
# projections

def project_siegel(z, eps: float):
    """Clamp the eigenvalues of Im(Z) from below at ``eps``.

    Returns ``(projected, mask)``; rows not in ``mask`` are returned untouched.
    """
    z = np.array(z, dtype=complex, copy=True)
    y = sym_part(z.imag)
    w, q = sym_eig(y, tol=np.inf)
    mask = np.min(w, axis=-1) <= eps
    if np.any(mask):
        wm, qm = w[mask], q[mask]
        y_new = (qm * np.maximum(wm, eps)[..., None, :]) @ np.swapaxes(qm, -1, -2)
        z[mask] = sym_part(z[mask].real) + 1j * sym_part(y_new)
    return z, mask


def project_bounded(z, eps: float):
    """Clamp the Takagi values of Z from above at ``1 - eps``."""
    z = np.array(z, dtype=complex, copy=True)
    fac = takagi(sym_part(z), tol=np.inf)
    mask = np.max(fac.diag, axis=-1) >= 1.0 - eps
    if np.any(mask):
        d = np.minimum(fac.diag[mask], 1.0 - eps)
        k = fac.unitary[mask]
        z[mask] = sym_part(np.conj(k) @ (d[..., :, None] * conj_t(k)))
    return z, mask


# ----------------------------------------------------------------------------
# symplectic group

class SymplecticMatrix(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def as_block(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def from_block(cls, m: np.ndarray) -> "SymplecticMatrix":
        n = m.shape[0] // 2
        return cls(m[:n, :n], m[:n, n:], m[n:, :n], m[n:, n:])

    def __matmul__(self, other: "SymplecticMatrix") -> "SymplecticMatrix":
        return SymplecticMatrix.from_block(self.as_block() @ other.as_block())

    def block_residual(self) -> float:
        """Largest violation of the three block conditions."""
        a, b, c, d = self
        eye = np.eye(self.n)
        return max(
            np.abs(a.T @ d - c.T @ b - eye).max(),
            np.abs(a.T @ c - c.T @ a).max(),
            np.abs(b.T @ d - d.T @ b).max(),
        )

    def is_symplectic(self, tol: float = 1e-9) -> bool:
        return self.block_residual() <= tol


def symplectic_apply(g: SymplecticMatrix, z) -> np.ndarray:
    """Fractional linear action ``(A Z + B)(C Z + D)^-1``."""
    z = np.asarray(z, complex)
    try:
        return sym_part((g.a @ z + g.b) @ complex_inverse(g.c @ z + g.d))
    except LinAlgError as exc:
        raise DomainError("C Z + D is singular; g is not symplectic or Z is invalid") from exc


def random_symplectic(n: int, seed: int, rounds: int = 3) -> SymplecticMatrix:
    """Product of translations, block-diagonal ``diag(M, M^-T)`` and ``J``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    eye, zero = np.eye(n), np.zeros((n, n))
    j = SymplecticMatrix(zero, eye, -eye, zero)
    g = SymplecticMatrix(eye, zero, zero, eye)
    for _ in range(rounds):
        b = rng.uniform(-1.0, 1.0, size=(n, n))
        b = 0.5 * (b + b.T)
        m = np.eye(n) + 0.5 * rng.uniform(-1.0, 1.0, size=(n, n))
        while abs(np.linalg.det(m)) < 0.1:
            m = np.eye(n) + 0.5 * rng.uniform(-1.0, 1.0, size=(n, n))
        g = g @ SymplecticMatrix(eye, b, zero, eye)
        g = g @ SymplecticMatrix(m, zero, zero, np.linalg.inv(m).T)
        g = g @ j
    return g
