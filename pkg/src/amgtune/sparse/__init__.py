from .csr import (
    CooMatrix,
    CsrMatrix,
    DimensionMismatchError,
    SparseStructureError,
    build,
    from_dense,
    identity,
    spgemm,
    spmv,
    transpose,
    triple_product,
)
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .reorder import bandwidth, cuthill_mckee, permute_symmetric, reorder

__all__ = [
    "CooMatrix",
    "CsrMatrix",
    "DimensionMismatchError",
    "SparseStructureError",
    "MatrixMarketError",
    "build",
    "from_dense",
    "identity",
    "spgemm",
    "spmv",
    "transpose",
    "triple_product",
    "read_matrix_market",
    "write_matrix_market",
    "reorder",
    "permute_symmetric",
    "cuthill_mckee",
    "bandwidth",
]
