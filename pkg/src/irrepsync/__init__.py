"""Multi-irreducible spectral synchronization for rotation averaging on SO(2) and SO(3)."""

from ._kernels import BACKEND
from .consensus import (
    DenoisedGraph,
    EdgePosterior,
    RotationEstimate,
    argmax_on_group,
    denoise_graph,
    edge_posterior,
    project_to_group,
    recover_rotations,
)
from .errors import CapabilityError, IrrepSyncError, NumericError, ParseError, StructuralError, UsageError
from .evaluation import ErrorReport, d_F, d_inf, error_report
from .group import (
    Group,
    IrrepIndex,
    Rotation,
    character,
    compose,
    fundamental_matrix,
    identity,
    inverse,
    irrep_matrix,
    sample_haar,
    sample_langevin,
)
from .harmonic import (
    BandLimitedFunction,
    FourierWeights,
    Kernel,
    LossKind,
    LossSpec,
    evaluate,
    lambda_policy,
    loss_fourier_coefficients,
    parseval_norm,
)
from .io import parse_g2o_rotations, read_graph, write_graph
from .laplacian import MeasurementGraph, RhoLaplacian, block_diagonal_S, build_rho_laplacian, build_weight_laplacian
from .pipeline import SolverConfig, solve
from .spectral import SpectralBlock, extract_block, smallest_eigenpairs
from .synthesis import SynthesisConfig, generate, watts_strogatz

__version__ = "0.1.0"
