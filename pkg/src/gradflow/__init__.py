"""Energy-stable auxiliary-variable steppers for 2-D periodic gradient flows."""

from .grid import Field, GridSpec, grad_sq_norm, inner, integrate, laplacian
from .model import Flow, ModelParams, free_energy
from .auxfun import ConvexAux, MonoAux, builtin_convex, parse_aux
from .schemes import SchemeConfig, SchemeKind, SchemeState, init_state, modified_energy, step

__all__ = [
    "Field",
    "GridSpec",
    "Flow",
    "ModelParams",
    "ConvexAux",
    "MonoAux",
    "SchemeConfig",
    "SchemeKind",
    "SchemeState",
    "builtin_convex",
    "parse_aux",
    "free_energy",
    "grad_sq_norm",
    "init_state",
    "inner",
    "integrate",
    "laplacian",
    "modified_energy",
    "step",
]

__version__ = "0.1.0"
