from .matrix_models import (
    DomainError,
    SymplecticMatrix,
    finsler_distances,
    random_symplectic,
)
from .points import (
    ManifoldPoint,
    TangentVector,
    cayley_to_bounded,
    cayley_to_upper,
    crossratio_eigen,
    dist,
    dist_bounded,
    dist_siegel,
    project_to_space,
    random_init,
    riemannian_grad,
    symplectic_apply,
)
from .serialization import load_embeddings, save_embeddings
from .spaces import DEFAULT_EPSILON, SPACE_GRAMMAR, Space, SpaceDescriptor, make_space

__all__ = [
    "DEFAULT_EPSILON", "DomainError", "ManifoldPoint", "SPACE_GRAMMAR", "Space", "SpaceDescriptor",
    "SymplecticMatrix", "TangentVector", "cayley_to_bounded", "cayley_to_upper", "crossratio_eigen",
    "dist", "dist_bounded", "dist_siegel", "finsler_distances", "load_embeddings", "make_space",
    "project_to_space", "random_init", "random_symplectic", "riemannian_grad", "save_embeddings",
    "symplectic_apply",
]
