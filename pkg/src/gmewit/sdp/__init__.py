"""Self-contained solver for small dense semidefinite programs."""

from .model import (
    HermitianVariable,
    MatExpr,
    RealVariable,
    ScalarExpr,
    SdpProblem,
    embed_complex,
    params_to_hermitian,
)
from .sdpa import export_sdpa, import_sdpa
from .solver import SdpError, SdpSolution, compile_problem, solve, solve_compiled

__all__ = [
    "HermitianVariable",
    "MatExpr",
    "RealVariable",
    "ScalarExpr",
    "SdpProblem",
    "SdpError",
    "SdpSolution",
    "compile_problem",
    "embed_complex",
    "export_sdpa",
    "import_sdpa",
    "params_to_hermitian",
    "solve",
    "solve_compiled",
]
