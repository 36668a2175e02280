"""Numerics for the harmonic Sierpinski gasket with Kusuoka's measure."""

from .gasket import AffineMap, Cell, DepthError, DomainError, branch, cell, code_to_point, compose_word, point_to_code, apply_F, shift
from .measure import BETA, principal_eigenvalue, ruelle_apply, sample_kappa, tau_cell
from .cocycle import lyapunov, projection_estimate
from .energy import ScalarField, battery, cheeger_pre, dirichlet_matrix, theorem1_report

__version__ = "0.1.0"
