"""Single-point API over the batched spaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..linalg import ComplexMatrix, ShapeError, sym_part
from . import matrix_models as mm
from .spaces import DEFAULT_EPSILON, SpaceDescriptor, make_space

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldPoint:
    """A point of one embedding space.

    ``data`` is a real vector (euclidean, poincare), a complex symmetric
    matrix (siegel_upper, bounded_domain) or a tuple of points (product).
    """

    space: SpaceDescriptor
    data: Union[np.ndarray, tuple]

    def __post_init__(self):
        sp = self.space
        if isinstance(sp, str):
            sp = SpaceDescriptor.parse(sp)
            object.__setattr__(self, "space", sp)
        if sp.kind == "product":
            parts = tuple(self.data)
            if len(parts) != len(sp.components):
                raise ShapeError("product point needs one component per factor")
            parts = tuple(p if isinstance(p, ManifoldPoint) else ManifoldPoint(c, p)
                          for c, p in zip(sp.components, parts))
            if any(p.space != c for p, c in zip(parts, sp.components)):
                raise ShapeError("product component lies on the wrong space")
            object.__setattr__(self, "data", parts)
            return
        if isinstance(self.data, ComplexMatrix):
            object.__setattr__(self, "data", self.data.to_complex())
        if sp.is_matrix:
            z = np.array(self.data, dtype=complex)
            if z.shape != (sp.dim, sp.dim):
                raise ShapeError(f"expected a {sp.dim}x{sp.dim} matrix, got shape {z.shape}")
            if np.max(np.abs(z - z.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(z))):
                raise ShapeError("matrix points must be symmetric")
        else:
            z = np.array(self.data, dtype=float)
            if z.shape != (sp.dim,):
                raise ShapeError(f"expected a vector of length {sp.dim}, got shape {z.shape}")
        z.setflags(write=False)
        object.__setattr__(self, "data", z)

    @property
    def matrix(self) -> ComplexMatrix:
        return ComplexMatrix.from_complex(self.data)

    def flat(self) -> np.ndarray:
        sp = self.space
        if sp.kind == "product":
            return np.concatenate([p.flat() for p in self.data])
        if sp.is_matrix:
            return np.concatenate([self.data.real.ravel(), self.data.imag.ravel()])
        return np.array(self.data)

    @classmethod
    def from_flat(cls, space, flat) -> "ManifoldPoint":
        if isinstance(space, str):
            space = SpaceDescriptor.parse(space)
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (space.flat_dim,):
            raise ShapeError(f"expected {space.flat_dim} values, got shape {flat.shape}")
        if space.kind == "product":
            parts, start = [], 0
            for c in space.components:
                parts.append(cls.from_flat(c, flat[start:start + c.flat_dim]))
                start += c.flat_dim
            return cls(space, tuple(parts))
        if space.is_matrix:
            n = space.dim
            z = flat[: n * n].reshape(n, n) + 1j * flat[n * n:].reshape(n, n)
            return cls(space, sym_part(z))
        return cls(space, flat)

    def margin(self) -> float:
        return float(make_space(self.space).margin(self.flat()[None])[0])

    def is_valid(self, margin: float = 0.0) -> bool:
        return self.margin() > margin


# A tangent vector has the same layout as the point it is attached to.
TangentVector = ManifoldPoint


def _check_kind(p: ManifoldPoint, kind: str) -> None:
    if p.space.kind != kind:
        raise ShapeError(f"expected a {kind} point, got {p.space.kind}")


def _require_valid(p: ManifoldPoint) -> None:
    if not p.is_valid():
        raise mm.DomainError(f"point violates the {p.space.kind} domain condition (margin {p.margin():.3e})")


def cayley_to_bounded(z: ManifoldPoint) -> ManifoldPoint:
    _check_kind(z, "siegel_upper")
    _require_valid(z)
    return ManifoldPoint(SpaceDescriptor("bounded_domain", z.space.dim), mm.cayley_to_bounded(z.data))


def cayley_to_upper(w: ManifoldPoint) -> ManifoldPoint:
    _check_kind(w, "bounded_domain")
    _require_valid(w)
    return ManifoldPoint(SpaceDescriptor("siegel_upper", w.space.dim), mm.cayley_to_upper(w.data))


def dist_siegel(z1: ManifoldPoint, z2: ManifoldPoint) -> float:
    _check_kind(z1, "siegel_upper")
    _check_kind(z2, "siegel_upper")
    return float(mm.dist_siegel(z1.data, z2.data))


def dist_bounded(w1: ManifoldPoint, w2: ManifoldPoint) -> float:
    _check_kind(w1, "bounded_domain")
    _check_kind(w2, "bounded_domain")
    return float(mm.dist_bounded(w1.data, w2.data))


def crossratio_eigen(z1: ManifoldPoint, z2: ManifoldPoint) -> np.ndarray:
    _check_kind(z1, "siegel_upper")
    _check_kind(z2, "siegel_upper")
    return mm.crossratio_eigen(z1.data, z2.data)


def symplectic_apply(g: mm.SymplecticMatrix, z: ManifoldPoint) -> ManifoldPoint:
    _check_kind(z, "siegel_upper")
    return ManifoldPoint(z.space, mm.symplectic_apply(g, z.data))


def dist(space, p: ManifoldPoint, q: ManifoldPoint) -> float:
    """Distance between two points of ``space``."""
    if isinstance(space, str):
        space = SpaceDescriptor.parse(space)
    if p.space != space or q.space != space:
        raise ShapeError(f"points do not lie on {space}")
    return float(make_space(space).dist(p.flat()[None], q.flat()[None])[0])


def riemannian_grad(p: ManifoldPoint, g_euclidean) -> TangentVector:
    """Convert a Euclidean gradient at ``p`` into the Riemannian gradient."""
    g = g_euclidean if isinstance(g_euclidean, ManifoldPoint) else _as_tangent(p.space, g_euclidean)
    if g.space != p.space:
        raise ShapeError("gradient and point live on different spaces")
    flat = make_space(p.space).rgrad(p.flat()[None], g.flat()[None])[0]
    return TangentVector.from_flat(p.space, flat)


def _as_tangent(space: SpaceDescriptor, g) -> TangentVector:
    if space.is_matrix:
        return TangentVector(space, sym_part(np.asarray(g, dtype=complex)))
    return TangentVector(space, g)


def project_to_space(p: ManifoldPoint, epsilon: float = DEFAULT_EPSILON) -> ManifoldPoint:
    """Nearby point in the ``epsilon``-interior; interior points come back unchanged."""
    if p.space.kind == "product":
        return ManifoldPoint(p.space, tuple(project_to_space(c, epsilon) for c in p.data))
    if p.space.kind == "siegel_upper":
        z, moved = mm.project_siegel(p.data[None], epsilon)
    elif p.space.kind == "bounded_domain":
        z, moved = mm.project_bounded(p.data[None], epsilon)
    else:
        flat, moved = make_space(p.space).project(p.flat()[None], epsilon)
        return p if not moved[0] else ManifoldPoint.from_flat(p.space, flat[0])
    return p if not moved[0] else ManifoldPoint(p.space, z[0])


def random_init(space, seed: int) -> ManifoldPoint:
    """Basepoint plus a small uniform perturbation (i Id for Siegel, 0 otherwise)."""
    if isinstance(space, str):
        space = SpaceDescriptor.parse(space)
    rng = np.random.default_rng(seed)
    return ManifoldPoint.from_flat(space, make_space(space).random(1, rng)[0])
