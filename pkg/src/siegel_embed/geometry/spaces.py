"""Embedding spaces with a batched, flat-parameter interface.

Every space stores one point as a real vector of ``flat_dim`` floats.  Matrix
spaces use the row-major real part followed by the row-major imaginary part;
products concatenate their components.  All methods take arrays with a leading
batch axis.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..linalg import sym_eig, sym_part, takagi
from . import matrix_models as mm

DEFAULT_EPSILON = 1e-4
INIT_SCALE = 1e-3

KINDS = ("euclidean", "poincare", "siegel_upper", "bounded_domain", "product")
_ALIASES = {
    "euclidean": "euclidean", "e": "euclidean",
    "poincare": "poincare", "hyperbolic": "poincare", "h": "poincare",
    "siegel": "siegel_upper", "siegel_upper": "siegel_upper", "s": "siegel_upper",
    "bounded": "bounded_domain", "bounded_domain": "bounded_domain", "b": "bounded_domain",
}
_SHORT = {"euclidean": "euclidean", "poincare": "poincare",
          "siegel_upper": "siegel", "bounded_domain": "bounded"}

SPACE_GRAMMAR = """\
space    := factor ( "+" factor )*  |  "product:" factor ( "+" factor )+
factor   := kind ":" integer
kind     := "euclidean" | "poincare" | "siegel" | "bounded"
examples: siegel:4  poincare:20  product:poincare:10+euclidean:10"""


@dataclass(frozen=True)
class SpaceDescriptor:
    kind: str
    dim: int = 0
    components: tuple["SpaceDescriptor", ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "product":
            if len(self.components) < 2:
                raise ValueError("a product space needs at least two components")
            if any(c.kind == "product" for c in self.components):
                raise ValueError("product components cannot themselves be products")
            object.__setattr__(self, "dim", sum(c.dim for c in self.components))
        elif self.dim < 1:
            raise ValueError(f"{self.kind} dimension must be positive, got {self.dim}")
        elif self.components:
            raise ValueError("only product spaces have components")

    @classmethod
    def parse(cls, text: str) -> "SpaceDescriptor":
        text = text.strip().lower()
        explicit = text.startswith("product:")
        if explicit:
            text = text[len("product:"):]
        factors = [f for f in text.split("+")]
        parsed = []
        for f in factors:
            m = re.fullmatch(r"\s*([a-z_]+)\s*:\s*(\d+)\s*", f)
            if not m or m.group(1) not in _ALIASES:
                raise ValueError(f"cannot parse space factor {f!r}\n{SPACE_GRAMMAR}")
            parsed.append(cls(_ALIASES[m.group(1)], int(m.group(2))))
        if len(parsed) == 1 and not explicit:
            return parsed[0]
        return cls("product", components=tuple(parsed))

    def __str__(self) -> str:
        if self.kind == "product":
            return "product:" + "+".join(str(c) for c in self.components)
        return f"{_SHORT[self.kind]}:{self.dim}"

    @property
    def is_matrix(self) -> bool:
        return self.kind in ("siegel_upper", "bounded_domain")

    @property
    def num_params(self) -> int:
        """Free real parameters; ``n(n+1)`` for the matrix models."""
        if self.kind == "product":
            return sum(c.num_params for c in self.components)
        if self.is_matrix:
            return self.dim * (self.dim + 1)
        return self.dim

    @property
    def flat_dim(self) -> int:
        if self.kind == "product":
            return sum(c.flat_dim for c in self.components)
        if self.is_matrix:
            return 2 * self.dim * self.dim
        return self.dim


class Space:
    """Batched operations on one embedding space."""

    kind: ClassVar[str]

    def __init__(self, descriptor: SpaceDescriptor):
        self.descriptor = descriptor
        self.flat_dim = descriptor.flat_dim

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor})"

    # squared distance and Euclidean gradients with respect to both arguments
    def dist2_grad(self, x: np.ndarray, y: np.ndarray):
        raise NotImplementedError

    def dist2(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.dist2(x, y), 0.0))

    def rgrad(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, x: np.ndarray, eps: float = DEFAULT_EPSILON):
        """Return ``(projected, moved)`` where ``moved`` flags rows that changed."""
        raise NotImplementedError

    def margin(self, x: np.ndarray) -> np.ndarray:
        """Distance-to-boundary indicator; the open domain is ``margin > 0``."""
        raise NotImplementedError

    def random(self, num: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return x + v


class Euclidean(Space):
    kind = "euclidean"

    def dist2(self, x, y):
        diff = x - y
        return np.einsum("...i,...i->...", diff, diff)

    def dist2_grad(self, x, y):
        diff = x - y
        return np.einsum("...i,...i->...", diff, diff), 2.0 * diff, -2.0 * diff

    def rgrad(self, x, g):
        return g

    def inner(self, x, u, v):
        return np.einsum("...i,...i->...", u, v)

    def project(self, x, eps=DEFAULT_EPSILON):
        return x, np.zeros(x.shape[:-1], dtype=bool)

    def margin(self, x):
        return np.full(x.shape[:-1], np.inf)

    def random(self, num, rng):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=(num, self.flat_dim))


class PoincareBall(Space):
    """Unit ball with metric ``4 |dx|^2 / (1 - |x|^2)^2``."""

    kind = "poincare"

    def _terms(self, x, y):
        diff = x - y
        delta = np.einsum("...i,...i->...", diff, diff)
        alpha = 1.0 - np.einsum("...i,...i->...", x, x)
        beta = 1.0 - np.einsum("...i,...i->...", y, y)
        return diff, delta, alpha, beta

    def dist2(self, x, y):
        _, delta, alpha, beta = self._terms(x, y)
        t = np.sqrt(delta / (delta + alpha * beta))
        return (2.0 * np.arctanh(np.minimum(t, 1.0 - 1e-16))) ** 2

    def dist2_grad(self, x, y):
        diff, delta, alpha, beta = self._terms(x, y)
        t = np.sqrt(delta / (delta + alpha * beta))
        d = 2.0 * np.arctanh(np.minimum(t, 1.0 - 1e-16))
        # d(d^2)/d(cosh d) = 2 d / sinh d, and cosh d = 1 + 2 delta / (alpha beta)
        with np.errstate(invalid="ignore", divide="ignore"):
            outer = np.where(d > 1e-8, 2.0 * d / np.sinh(d), 2.0)
        scale = (outer * 4.0 / (alpha * beta))[..., None]
        gx = scale * (diff + (delta / alpha)[..., None] * x)
        gy = scale * (-diff + (delta / beta)[..., None] * y)
        return d * d, gx, gy

    def rgrad(self, x, g):
        factor = (1.0 - np.einsum("...i,...i->...", x, x)) ** 2 / 4.0
        return factor[..., None] * g

    def inner(self, x, u, v):
        lam = 4.0 / (1.0 - np.einsum("...i,...i->...", x, x)) ** 2
        return lam * np.einsum("...i,...i->...", u, v)

    def project(self, x, eps=DEFAULT_EPSILON):
        norm = np.linalg.norm(x, axis=-1)
        moved = norm > 1.0 - eps
        if np.any(moved):
            x = x.copy()
            x[moved] *= ((1.0 - eps) / norm[moved])[..., None]
        return x, moved

    def margin(self, x):
        return 1.0 - np.linalg.norm(x, axis=-1)

    def random(self, num, rng):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=(num, self.flat_dim))


class _MatrixSpace(Space):
    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.n = descriptor.dim

    def to_matrix(self, flat: np.ndarray) -> np.ndarray:
        n = self.n
        flat = np.asarray(flat, dtype=float)
        re = flat[..., : n * n].reshape(flat.shape[:-1] + (n, n))
        im = flat[..., n * n:].reshape(flat.shape[:-1] + (n, n))
        return re + 1j * im

    def to_flat(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        lead = z.shape[:-2]
        return np.concatenate([z.real.reshape(lead + (-1,)), z.imag.reshape(lead + (-1,))], axis=-1)

    def _random_symmetric(self, num, rng):
        n = self.n
        s = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(num, 2, n, n))
        s = np.triu(s) + np.swapaxes(np.triu(s, 1), -1, -2)
        return s[:, 0] + 1j * s[:, 1]

    def dist2(self, x, y):
        return self._dist2_grad_one(self.to_matrix(x), self.to_matrix(y))[0]

    def dist2_grad(self, x, y):
        zx, zy = self.to_matrix(x), self.to_matrix(y)
        # the distance is symmetric, so the gradient w.r.t. the base point is the
        # moving-point gradient with the roles swapped
        d2, g = self._dist2_grad_one(np.concatenate([zx, zy]), np.concatenate([zy, zx]))
        b = zx.shape[0]
        return d2[:b], self.to_flat(g[b:]), self.to_flat(g[:b])

    def _dist2_grad_one(self, base, moving):
        raise NotImplementedError


class SiegelUpper(_MatrixSpace):
    kind = "siegel_upper"

    def _dist2_grad_one(self, base, moving):
        return mm.siegel_dist2_grad(base, moving)

    def dist2(self, x, y):
        return mm.siegel_dist2(self.to_matrix(x), self.to_matrix(y))

    def rgrad(self, x, g):
        return self.to_flat(mm.siegel_rgrad(self.to_matrix(x), self.to_matrix(g)))

    def inner(self, x, u, v):
        return mm.siegel_inner(self.to_matrix(x), self.to_matrix(u), self.to_matrix(v))

    def project(self, x, eps=DEFAULT_EPSILON):
        z, moved = mm.project_siegel(self.to_matrix(x), eps)
        if not np.any(moved):
            return x, moved
        out = np.array(x, dtype=float, copy=True)
        out[moved] = self.to_flat(z[moved])
        return out, moved

    def margin(self, x):
        w, _ = sym_eig(sym_part(self.to_matrix(x).imag), tol=np.inf)
        return w[..., 0]

    def random(self, num, rng):
        return self.to_flat(1j * np.eye(self.n) + self._random_symmetric(num, rng))


class BoundedDomain(_MatrixSpace):
    kind = "bounded_domain"

    def _dist2_grad_one(self, base, moving):
        return mm.bounded_dist2_grad(base, moving)

    def dist2(self, x, y):
        z1 = mm.cayley_to_upper(self.to_matrix(x))
        z2 = mm.cayley_to_upper(self.to_matrix(y))
        return mm.siegel_dist2(z1, z2)

    def rgrad(self, x, g):
        return self.to_flat(mm.bounded_rgrad(self.to_matrix(x), self.to_matrix(g)))

    def inner(self, x, u, v):
        return mm.bounded_inner(self.to_matrix(x), self.to_matrix(u), self.to_matrix(v))

    def project(self, x, eps=DEFAULT_EPSILON):
        z, moved = mm.project_bounded(self.to_matrix(x), eps)
        if not np.any(moved):
            return x, moved
        out = np.array(x, dtype=float, copy=True)
        out[moved] = self.to_flat(z[moved])
        return out, moved

    def margin(self, x):
        return 1.0 - takagi(sym_part(self.to_matrix(x)), tol=np.inf).diag[..., 0]

    def random(self, num, rng):
        return self.to_flat(self._random_symmetric(num, rng))


class Product(Space):
    """Cartesian product with the l2 combination of component distances."""

    kind = "product"

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.factors = [make_space(c) for c in descriptor.components]
        bounds = np.cumsum([0] + [f.flat_dim for f in self.factors])
        self.slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def split(self, x):
        return [x[..., s] for s in self.slices]

    def dist2(self, x, y):
        return sum(f.dist2(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(y)))

    def dist2_grad(self, x, y):
        total = 0.0
        gx, gy = np.empty_like(x, dtype=float), np.empty_like(y, dtype=float)
        for f, s in zip(self.factors, self.slices):
            d2, ga, gb = f.dist2_grad(x[..., s], y[..., s])
            total = total + d2
            gx[..., s] = ga
            gy[..., s] = gb
        return total, gx, gy

    def rgrad(self, x, g):
        return np.concatenate([f.rgrad(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(g))],
                              axis=-1)

    def inner(self, x, u, v):
        return sum(f.inner(a, b, c) for f, a, b, c in
                   zip(self.factors, self.split(x), self.split(u), self.split(v)))

    def project(self, x, eps=DEFAULT_EPSILON):
        parts, moved = [], np.zeros(x.shape[:-1], dtype=bool)
        for f, a in zip(self.factors, self.split(x)):
            p, m = f.project(a, eps)
            parts.append(p)
            moved |= m
        if not np.any(moved):
            return x, moved
        return np.concatenate(parts, axis=-1), moved

    def margin(self, x):
        return np.min(np.stack([f.margin(a) for f, a in zip(self.factors, self.split(x))]), axis=0)

    def random(self, num, rng):
        return np.concatenate([f.random(num, rng) for f in self.factors], axis=-1)


_CLASSES = {cls.kind: cls for cls in (Euclidean, PoincareBall, SiegelUpper, BoundedDomain, Product)}


def make_space(descriptor) -> Space:
    if isinstance(descriptor, str):
        descriptor = SpaceDescriptor.parse(descriptor)
    return _CLASSES[descriptor.kind](descriptor)
