from .lorenz96 import Lorenz96, Lorenz96Config
from .qg import (
    QG33,
    QG65,
    QG129,
    QGConfig,
    QGModel,
    arakawa_jacobian,
    helmholtz_apply,
    helmholtz_solve,
)

__all__ = [
    "Lorenz96",
    "Lorenz96Config",
    "QG33",
    "QG65",
    "QG129",
    "QGConfig",
    "QGModel",
    "arakawa_jacobian",
    "helmholtz_apply",
    "helmholtz_solve",
]
