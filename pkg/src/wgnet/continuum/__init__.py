"""2D finite-difference Helmholtz solvers for branched planar waveguides."""

from .geometry import (Geometry, GeometryError, LeadSpec, Rect, build_grid,
                       geometry_to_document, load_geometry, network_from_junction,
                       parse_geometry)
from .junction import (JunctionScatteringResult, fit_two_wave, junction_smatrix,
                       mode0_profile, scaling_invariance_check, tabulate_junction)
from .modes import ModeBasis, transverse_modes
from .network2d import network_eigenvalues_2d

__all__ = [
    "Geometry", "GeometryError", "LeadSpec", "Rect", "build_grid",
    "geometry_to_document", "load_geometry", "network_from_junction",
    "parse_geometry", "JunctionScatteringResult", "fit_two_wave",
    "junction_smatrix", "mode0_profile", "scaling_invariance_check",
    "tabulate_junction", "ModeBasis", "transverse_modes",
    "network_eigenvalues_2d",
]
