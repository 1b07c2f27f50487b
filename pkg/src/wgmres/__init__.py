"""Restarted GMRES in weighted inner products, with DCT weighting and deflated restarting."""

from .diagnostics import cycle_poly_roots, loc_p, sandwich_check, transform_eigvecs
from .gmres import Method, SolveConfig, SolveHistory, gmres1_root, solve
from .gmres_dr import solve_dr
from .sparse import (
    SparseMatrix,
    csr_from_triplets,
    gen_convdiff_2d,
    gen_diag,
    gen_laplacian_2d,
    matvec,
    parse_matrix_market,
    randn_vector,
)
from .transform import Transform
from .weighting import InnerProduct

__version__ = "0.1.0"
