"""Spectral analysis of the spherically symmetric alpha^2-dynamo operator.

Modules
-------
krein     indefinite inner products and pseudo-Hermiticity checks
toy2x2    closed-form sigma3-pseudo-Hermitian 2x2 model
operator  radial discretisation of the operator matrix
eig       dense nonsymmetric eigensolver (in-repo QR iteration)
pencil    quadratic pencil form and Jordan-Keldysh chains
branch    C sweeps, branch matching, exceptional points, critical C
cli       command-line front end
"""
from .branch import (
    AffineFamily,
    critical_c,
    detect_transitions,
    match_branches,
    refine_ep,
    sweep,
)
from .eig import NonConvergence, Spectrum, dense_spectrum, eigenvector
from .operator import (
    AlphaProfile,
    BoundaryCondition,
    RadialGrid,
    Scheme,
    assemble,
    constant_alpha_oracle,
    make_grid,
)
from .pencil import build_pencil, solve_keldysh_chain

__version__ = "0.1.0"

__all__ = [
    "AffineFamily",
    "AlphaProfile",
    "BoundaryCondition",
    "NonConvergence",
    "RadialGrid",
    "Scheme",
    "Spectrum",
    "assemble",
    "build_pencil",
    "constant_alpha_oracle",
    "critical_c",
    "dense_spectrum",
    "detect_transitions",
    "eigenvector",
    "make_grid",
    "match_branches",
    "refine_ep",
    "solve_keldysh_chain",
    "sweep",
]
