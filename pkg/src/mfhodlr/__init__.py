"""Multifrontal sparse LU with hierarchically compressed fronts.

Sparse SPD/nonsymmetric systems are factorized by multifrontal elimination
over a nested-dissection tree; large frontal matrices are compressed into
HODLR form with boundary-distance low-rank (BDLR) pseudoskeleton sampling,
and the resulting low-accuracy factorization doubles as a GMRES
preconditioner.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .bdlr import BlockSampler, LowRankFactor, pseudoskeleton_compress, select_boundary_indices
from .hodlr import (
    HodlrFactorization,
    HodlrMatrix,
    UpdateRep,
    build_hodlr,
    hodlr_factorize,
    hodlr_matvec,
    hodlr_solve,
    sample_update,
)
from .krylov import (
    ConvergenceHistory,
    LinearOperator,
    Preconditioner,
    diagonal_preconditioner,
    gmres,
    ilut,
)
from .multifrontal import (
    ACCELERATED,
    CONVENTIONAL,
    MfFactorization,
    MfParams,
    mf_factorize,
    mf_solve,
)
from .ordering import EliminationTree, SeparatorTree, build_elimination_tree, nested_dissection
from .problems import MeshSpec, gen_elasticity_hex, gen_poisson7
from .sparse import (
    AdjGraph,
    ScalingRecord,
    SparseMatrix,
    adjacency_graph,
    load_matrix_market,
    row_scale,
    spmv,
    write_matrix_market,
)

__version__ = "0.1.0"

__all__ = [
    "ACCELERATED",
    "AdjGraph",
    "BlockSampler",
    "CONVENTIONAL",
    "ConvergenceHistory",
    "EliminationTree",
    "HodlrFactorization",
    "HodlrMatrix",
    "KERNEL_BACKEND",
    "LinearOperator",
    "LowRankFactor",
    "MeshSpec",
    "MfFactorization",
    "MfParams",
    "Preconditioner",
    "ScalingRecord",
    "SeparatorTree",
    "SparseMatrix",
    "UpdateRep",
    "adjacency_graph",
    "build_elimination_tree",
    "build_hodlr",
    "diagonal_preconditioner",
    "gen_elasticity_hex",
    "gen_poisson7",
    "gmres",
    "hodlr_factorize",
    "hodlr_matvec",
    "hodlr_solve",
    "ilut",
    "load_matrix_market",
    "mf_factorize",
    "mf_solve",
    "nested_dissection",
    "pseudoskeleton_compress",
    "row_scale",
    "sample_update",
    "select_boundary_indices",
    "spmv",
    "write_matrix_market",
]
