"""Strain-smoothed finite elements with two-level additive Schwarz
preconditioning: meshes, assemblers, sparse solvers, spectral measurement,
and a benchmark CLI."""

from .assembly import (ElementGradient, ProblemSpec, apply_dirichlet,
                       assemble, assemble_es, assemble_load, assemble_ns,
                       assemble_sse, assemble_standard, element_gradient,
                       elasticity_benchmark, export_matrixmarket, free_dofs,
                       poisson_benchmark)
from .bench import (ExperimentConfig, run_solve, run_spectrum, run_table,
                    main)
from .exceptions import DegenerateMeshError, NotSPDError, NumericalError
from .mesh import (EdgeDomain, Hierarchy, Mesh, build_structured,
                   build_unstructured, edge_smoothing_domains, load_mesh,
                   refine_uniform, save_mesh)
from .ns1d import (Interval1DProblem, assemble_1d, kappa_lower_bound_1d,
                   rayleigh_quotients, true_kappa_1d)
from .schwarz import (OverlapDecomposition, SchwarzPreconditioner,
                      build_all_variants, build_preconditioner, decompose)
from .sparse import (CholeskyFactor, SolveReport, SparseMatrix, cholesky,
                     lanczos_kappa, pcg, spmv)
from .spectral import (SpectrumEstimate, generalized_extremes_dense,
                       generalized_kappa, local_lambda_max, local_omega0)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
