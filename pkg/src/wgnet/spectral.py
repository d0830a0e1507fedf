"""Eigenvalues, scattering solutions, and the network scattering matrix.

Eigenvalue search runs on σ_min(M(λ,ε)) rather than |D|: the determinant's
dynamic range explodes with the edge count while the smallest singular value
stays scale-stable.  Scans happen on a uniform k grid (entries are entire in
k), minima are bracketed and refined by golden section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conditions as vc
from .assembly import (SINGULARITY_TOL_REL, AmplitudeField, AssemblyError,
                       SpectralContext, assemble_batch, build_system,
                       field_from_solution, solve_system, system_layout)
from .graph import MetricGraph

BRANCH_EXCLUSION_REL = 1e-6     # keep-out around λ0, relative to λ1 − λ0
DEFAULT_RESOLUTION = 2000.0     # scan points per unit of k·max(l_e)
REFINE_WIDTH = 1e-12            # golden-section bracket width in k


class SpectralError(AssemblyError):
    """Ill-posed spectral request (wrong graph class, empty interval, ...)."""


# --------------------------- eigenvalue search ---------------------------

@dataclass(frozen=True)
class Eigenvalue:
    lam: float
    k: float
    multiplicity: int
    sigma_min: float


@dataclass
class EigenvalueList:
    eigenvalues: list[Eigenvalue]
    interval: tuple[float, float]
    epsilon: float

    def __iter__(self):
        return iter(self.eigenvalues)

    def __len__(self):
        return len(self.eigenvalues)

    def lams(self) -> np.ndarray:
        return np.array([ev.lam for ev in self.eigenvalues])

    def flat(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity, ascending."""
        return np.array([ev.lam for ev in self.eigenvalues
                         for _ in range(ev.multiplicity)])


def sigma_min_scan(graph: MetricGraph, epsilon: float, k_values,
                   layout=None, chunk: int = 16384) -> np.ndarray:
    """σ_min(M) over a k grid, batched."""
    layout = layout or system_layout(graph)
    k_values = np.asarray(k_values)
    out = np.empty(len(k_values))
    for i in range(0, len(k_values), chunk):
        M = assemble_batch(graph, epsilon, k_values[i:i + chunk], layout)
        out[i:i + chunk] = np.linalg.svd(M, compute_uv=False)[:, -1]
    return out


def _golden_min(f, a: float, b: float, xtol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > xtol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def find_eigenvalues(graph: MetricGraph, epsilon: float,
                     interval: tuple[float, float] | None = None,
                     resolution: float = DEFAULT_RESOLUTION,
                     singularity_tol: float = SINGULARITY_TOL_REL,
                     exclusion: float = BRANCH_EXCLUSION_REL) -> EigenvalueList:
    """Spectrum Λ(ε) of the graph problem inside (λ0, λ1).

    Scans σ_min on a uniform k grid, brackets its local minima, refines each
    bracket by golden section to width 1e−12 in k, and accepts a point when
    σ_min drops below the relative singularity tolerance; the multiplicity
    counts the singular values below that threshold.

    With tabulated vertex data σ_min bottoms out at the interpolation's
    unitarity defect instead of zero, so the acceptance floor is widened to
    10× the data-class tolerance (1e−6 for tabulated matrices).
    """
    if not graph.is_bounded:
        raise SpectralError("graph has leads: its spectrum above λ0 is continuous "
                            "(use the scattering machinery instead)")
    data_floor = max((vc.default_tolerance(v.condition) for v in graph.junctions),
                     default=0.0)
    accept_tol = max(singularity_tol, 10.0 * data_floor)
    delta = exclusion * (graph.lambda1 - graph.lambda0)
    lo_full, hi_full = graph.lambda0 + delta, graph.lambda1 - delta
    if interval is None:
        lo, hi = lo_full, hi_full
    else:
        lo, hi = float(interval[0]), float(interval[1])
        if hi <= graph.lambda0 or lo >= graph.lambda1:
            raise SpectralError(
                f"interval [{lo:.6g}, {hi:.6g}] lies outside (lambda0, lambda1) = "
                f"({graph.lambda0:.6g}, {graph.lambda1:.6g})")
        lo, hi = max(lo, lo_full), min(hi, hi_full)
    if hi <= lo:
        return EigenvalueList([], (lo, hi), epsilon)

    k_lo = math.sqrt(lo - graph.lambda0) / epsilon
    k_hi = math.sqrt(hi - graph.lambda0) / epsilon
    l_max = graph.max_finite_length
    n_pts = max(int(math.ceil((k_hi - k_lo) * l_max * resolution)) + 1, 16)
    ks = np.linspace(k_lo, k_hi, n_pts)

    layout = system_layout(graph)
    sig = sigma_min_scan(graph, epsilon, ks, layout)

    def sigma_of(k: float) -> float:
        M = assemble_batch(graph, epsilon, np.array([k]), layout)
        return float(np.linalg.svd(M[0], compute_uv=False)[-1])

    found: list[Eigenvalue] = []
    for i in range(1, n_pts - 1):
        if not (sig[i] <= sig[i - 1] and sig[i] <= sig[i + 1]):
            continue
        k_star = _golden_min(sigma_of, ks[i - 1], ks[i + 1], REFINE_WIDTH)
        M = assemble_batch(graph, epsilon, np.array([k_star]), layout)[0]
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] > accept_tol * sv[0]:
            continue
        mult = int(np.count_nonzero(sv <= accept_tol * sv[0]))
        lam = graph.lambda0 + (epsilon * k_star) ** 2
        found.append(Eigenvalue(lam=lam, k=k_star, multiplicity=mult,
                                sigma_min=float(sv[-1])))

    # merge brackets that refined to the same zero (conservative on multiplicity)
    found.sort(key=lambda ev: ev.k)
    merged: list[Eigenvalue] = []
    for ev in found:
        if merged and abs(ev.k - merged[-1].k) < 1e-8 * max(1.0, abs(ev.k)):
            keep = min(merged[-1], ev, key=lambda e: e.sigma_min)
            merged[-1] = Eigenvalue(keep.lam, keep.k,
                                    max(merged[-1].multiplicity, ev.multiplicity),
                                    keep.sigma_min)
        else:
            merged.append(ev)
    return EigenvalueList(merged, (lo, hi), epsilon)


# --------------------------- scattering ---------------------------

def scattering_solution(graph: MetricGraph, context: SpectralContext,
                        incident_edge: str,
                        singularity_tol: float = SINGULARITY_TOL_REL) -> AmplitudeField:
    """Graph scattering solution ψ_p: incident e^{−ikt} on one lead."""
    if graph.n_leads < 1:
        raise SpectralError("scattering needs at least one lead")
    if not graph.edge(incident_edge).is_lead:
        raise SpectralError(f"'{incident_edge}' is not a lead")
    system = build_system(graph, context, incident={incident_edge: 1.0})
    x = solve_system(system, singularity_tol=singularity_tol)
    return field_from_solution(graph, context, x, system.layout,
                               incident={incident_edge: 1.0})


@dataclass
class NetworkSMatrix:
    """m×m matrix of outgoing lead amplitudes, columns indexed by incident lead."""

    matrix: np.ndarray
    lam: complex
    epsilon: float
    lead_ids: tuple[str, ...]
    unitarity: float = field(default=float("nan"))
    symmetry: float = field(default=float("nan"))
    imag_norm: float = field(default=float("nan"))

    def __post_init__(self):
        m = self.matrix
        eye = np.eye(len(self.lead_ids))
        self.unitarity = float(np.linalg.norm(m @ m.conj().T - eye, 2))
        self.symmetry = float(np.linalg.norm(m - m.T, 2))
        self.imag_norm = float(np.linalg.norm(m.imag, 2))


def network_smatrix(graph: MetricGraph, context: SpectralContext,
                    singularity_tol: float = SINGULARITY_TOL_REL) -> NetworkSMatrix:
    """Assemble the network scattering matrix column by column."""
    leads = tuple(e.id for e in graph.leads)
    if not leads:
        raise SpectralError("graph has no leads")
    m = len(leads)
    S = np.zeros((m, m), dtype=complex)
    for p, lead_p in enumerate(leads):
        psi = scattering_solution(graph, context, lead_p,
                                  singularity_tol=singularity_tol)
        for j, lead_j in enumerate(leads):
            S[j, p] = psi.coeffs[lead_j][0]
    return NetworkSMatrix(matrix=S, lam=context.lam, epsilon=context.epsilon,
                          lead_ids=leads)


# --------------------------- Green via scattering ---------------------------

def green_via_scattering(graph: MetricGraph, context: SpectralContext,
                         source: tuple[str, float], target: tuple[str, float],
                         singularity_tol: float = SINGULARITY_TOL_REL) -> complex:
    """Green function of a spider graph expanded in its scattering solutions.

    The point source at τ on lead p injects the incoming coefficient
    β = (i/(2ε²k))·e^{ikτ} toward the junction, so g = β·ψ_p on the junction
    side of the source; past the source only the outgoing wave remains.
    """
    if len(graph.junctions) != 1 or graph.n_finite != 0:
        raise SpectralError("scattering expansion needs a spider graph "
                            "(one junction, all edges leads)")
    if context.k == 0:
        raise SpectralError("expansion undefined at the branch point λ = λ0")
    src_edge, tau = source
    tgt_edge, t = target
    if not graph.edge(src_edge).is_lead or tau <= 0:
        raise SpectralError("source must sit strictly inside a lead")

    k = context.k
    C = 1.0 / (context.epsilon ** 2 * k)
    beta = 0.5j * C * np.exp(1j * k * tau)
    psi = scattering_solution(graph, context, src_edge,
                              singularity_tol=singularity_tol)
    if tgt_edge != src_edge or t <= tau:
        return complex(beta * psi.value(tgt_edge, t))
    # past the source: purely outgoing, amplitude from matching at τ
    a_out = beta * psi.coeffs[src_edge][0] + 0.5j * C * np.exp(-1j * k * tau)
    return complex(a_out * np.exp(1j * k * t))


# --------------------------- eigenfunctions ---------------------------

def eigenfunction(graph: MetricGraph, epsilon: float, lam: float,
                  singularity_tol: float = SINGULARITY_TOL_REL) -> AmplitudeField:
    """Null-vector field at an accepted eigenvalue, unit L²(Γ) norm."""
    context = SpectralContext.for_graph(graph, lam, epsilon)
    layout = system_layout(graph)
    M = assemble_batch(graph, epsilon, np.array([context.k]), layout)[0]
    _, sv, vh = np.linalg.svd(M)
    if sv[-1] > singularity_tol * sv[0]:
        raise SpectralError(
            f"lambda={lam:.12g} is not an eigenvalue at tolerance "
            f"{singularity_tol:g} (sigma_min={sv[-1]:.3e})")
    x = vh[-1].conj()
    field = field_from_solution(graph, context, x, layout)
    norm = math.sqrt(field.l2_norm_sq())
    coeffs = {eid: (a / norm, b / norm) for eid, (a, b) in field.coeffs.items()}
    return AmplitudeField(graph, context, coeffs)
