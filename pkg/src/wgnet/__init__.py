"""Wave propagation on networks of thin waveguides.

Metric-graph spectra, Green functions, and scattering matrices with
scattering-matrix vertex conditions, plus 2D finite-difference Helmholtz
solvers that produce those vertex matrices and validate the graph model.
"""

from .assembly import (AmplitudeField, AssemblyError, SecularSystem, SpectralContext,
                       SpectralPointError, build_system, green_function,
                       green_solution, secular_determinant, singularity_proximity)
from .conditions import (ConditionError, ConstantCondition, KirchhoffCondition,
                         TabulatedCondition, ThresholdDecomposition, kirchhoff_matrix,
                         load_tabulated, save_tabulated, threshold_decomposition,
                         validate_condition)
from .graph import (Edge, FreeEndBC, GraphError, GraphInvariantError, GraphSchemaError,
                    MetricGraph, Vertex, graph_to_document, load_graph,
                    local_coordinate, parse_graph, save_graph)
from .spectral import (EigenvalueList, NetworkSMatrix, SpectralError, eigenfunction,
                       find_eigenvalues, green_via_scattering, network_smatrix,
                       scattering_solution)
from .threshold import (ClassificationReport, EpsFamilyTable, ThresholdError,
                        ThresholdProblem, build_threshold_problem, classify_limit,
                        constant_mode_exists, convergence_order, eps_family,
                        limiting_eigenvalues, zero_mode_multiplicity)

__version__ = "0.1.0"
