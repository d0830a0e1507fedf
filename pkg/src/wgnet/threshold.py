"""Near-threshold limit: λ = λ0 + με² and the decoupled projection problem.

At ε = 0 the gluing condition collapses onto the ±1 eigenspaces of T(λ0):
Dirichlet rows on ran P, Neumann rows on ran P⊥ (k of one kind, d−k of the
other).  The limiting spectrum {μ_j} is computed with the same secular
machinery in the variable ν = √μ on a derived graph with λ0 = 0, ε = 1;
ε-families μ_j(ε) = (λ_j(ε) − λ0)/ε² are matched to it for convergence
studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conditions as vc
from .assembly import AssemblyError
from .graph import FreeEndBC, MetricGraph
from .spectral import find_eigenvalues

ZERO_MODE_TOL = 1e-10


class ThresholdError(AssemblyError):
    """Threshold problem cannot be formed or resolved."""


# --------------------------- problem setup ---------------------------

@dataclass
class ThresholdProblem:
    graph: MetricGraph
    decompositions: dict[str, vc.ThresholdDecomposition]

    @property
    def lambda0(self) -> float:
        return self.graph.lambda0


def build_threshold_problem(graph: MetricGraph,
                            snap_tol: float = vc.DEFAULT_SNAP_TOL,
                            allow_extrapolation: bool = False) -> ThresholdProblem:
    """Decompose T_v(λ0) at every junction."""
    decs = {}
    for v in graph.junctions:
        try:
            decs[v.id] = vc.threshold_decomposition(
                v.condition, graph.lambda0, snap_tol=snap_tol,
                allow_extrapolation=allow_extrapolation)
        except vc.ConditionError as exc:
            raise ThresholdError(f"junction '{v.id}': {exc}") from exc
    return ThresholdProblem(graph=graph, decompositions=decs)


def _limit_bc(bc: FreeEndBC) -> FreeEndBC:
    # ε·ς′ + α·ς = 0 degenerates at ε = 0: Dirichlet for α > 0, Neumann for α = 0
    if bc.kind == "robin":
        return FreeEndBC.dirichlet() if bc.alpha > 0 else FreeEndBC.neumann()
    return bc


def _limit_graph(problem: ThresholdProblem, mu_cap: float) -> MetricGraph:
    cond_map = {vid: dec.projection_condition()
                for vid, dec in problem.decompositions.items()}
    bc_map = {v.id: _limit_bc(v.bc) for v in problem.graph.vertices if v.kind == "free"}
    return problem.graph.with_conditions(cond_map, bc_map, lambda0=0.0, lambda1=mu_cap)


# --------------------------- μ = 0 modes ---------------------------

def zero_mode_multiplicity(problem: ThresholdProblem) -> int:
    """Dimension of the μ = 0 eigenspace of the limiting problem.

    At μ = 0 eigenfunctions are edgewise linear; the vertex/boundary rows
    applied to (c_e, d_e) give a square system whose null space is the
    eigenspace.
    """
    graph = problem.graph
    edges = graph.finite_edges
    if graph.n_leads:
        raise ThresholdError("limiting spectrum needs a bounded graph")
    idx = {e.id: 2 * i for i, e in enumerate(edges)}
    n = 2 * len(edges)
    rows = []
    for v in graph.vertices:
        vals = np.zeros((v.degree, n))
        ders = np.zeros((v.degree, n))
        for j, eid in enumerate(v.order):
            e = graph.edge(eid)
            c, d = idx[eid], idx[eid] + 1
            if e.start == v.id:
                vals[j, c] = 1.0
                ders[j, d] = 1.0
            else:
                vals[j, c] = 1.0
                vals[j, d] = e.length
                ders[j, d] = -1.0
        if v.kind == "free":
            bc = _limit_bc(v.bc)
            rows.append(vals[0] if bc.kind == "dirichlet" else ders[0])
        else:
            dec = problem.decompositions[v.id]
            rows.extend(dec.w_minus.T @ vals)
            rows.extend(dec.w_plus.T @ ders)
    A = np.array(rows)
    sv = np.linalg.svd(A, compute_uv=False)
    return int(np.count_nonzero(sv <= ZERO_MODE_TOL * max(sv[0], 1.0)))


def constant_mode_exists(problem: ThresholdProblem) -> bool:
    """Is ς ≡ 1 a limiting eigenfunction (the all-Neumann-compatible mode)?"""
    for v in problem.graph.vertices:
        if v.kind == "free":
            if _limit_bc(v.bc).kind == "dirichlet":
                return False
        else:
            dec = problem.decompositions[v.id]
            if np.linalg.norm(dec.p @ np.ones(dec.degree)) > 1e-10:
                return False
    return True


# --------------------------- limiting spectrum ---------------------------

@dataclass(frozen=True)
class LimitEigenvalue:
    mu: float
    multiplicity: int
    sigma_min: float


@dataclass
class LimitSpectrum:
    eigenvalues: list[LimitEigenvalue]

    def __iter__(self):
        return iter(self.eigenvalues)

    def flat(self) -> np.ndarray:
        return np.array([ev.mu for ev in self.eigenvalues
                         for _ in range(ev.multiplicity)])


def limiting_eigenvalues(problem: ThresholdProblem, count: int,
                         resolution: float = 2000.0) -> LimitSpectrum:
    """The `count` smallest eigenvalues of −d²/dt² on Γ with projection rows.

    Runs the secular eigenvalue search in ν = √μ on the derived graph
    (ε = 1, λ0 = 0); the μ = 0 eigenspace is handled separately through its
    edgewise-linear null system.
    """
    if count < 1:
        raise ThresholdError(f"count must be >= 1, got {count}")
    graph = problem.graph
    if graph.n_leads:
        raise ThresholdError("limiting spectrum needs a bounded graph")

    out: list[LimitEigenvalue] = []
    zm = zero_mode_multiplicity(problem)
    if zm:
        out.append(LimitEigenvalue(mu=0.0, multiplicity=zm, sigma_min=0.0))

    total_len = sum(e.length for e in graph.finite_edges)
    nu_lo = 0.05 * math.pi / total_len
    # Weyl density ≈ total_len/π eigenvalues per unit ν, padded by the vertex count
    nu_hi = math.pi * (count + len(graph.edges) + len(graph.vertices) + 2) / total_len
    for _ in range(24):
        limit = _limit_graph(problem, mu_cap=(nu_hi * 1.05) ** 2 + 1.0)
        res = find_eigenvalues(limit, epsilon=1.0,
                               interval=(nu_lo ** 2, nu_hi ** 2),
                               resolution=resolution,
                               exclusion=0.25 * nu_lo ** 2 / ((nu_hi * 1.05) ** 2 + 1.0))
        kept = [ev for ev in res if ev.k > 2.0 * nu_lo]
        n_found = zm + sum(ev.multiplicity for ev in kept)
        if n_found >= count:
            out.extend(LimitEigenvalue(mu=ev.lam, multiplicity=ev.multiplicity,
                                       sigma_min=ev.sigma_min) for ev in kept)
            break
        nu_hi *= 1.6
    else:
        raise ThresholdError(f"could not locate {count} limiting eigenvalues")

    # keep the count smallest; a multiplet containing the cutoff stays whole
    kept_entries: list[LimitEigenvalue] = []
    total = 0
    for ev in out:
        kept_entries.append(ev)
        total += ev.multiplicity
        if total >= count:
            break
    spectrum = LimitSpectrum(kept_entries)
    if total < count:
        raise ThresholdError(f"found only {total} of {count} limiting eigenvalues")
    return spectrum


# --------------------------- ε families ---------------------------

@dataclass
class EpsFamilyTable:
    """Rescaled eigenvalues μ_j(ε) = (λ_j(ε) − λ0)/ε² matched to the limit."""

    mu_limit: np.ndarray            # (count,)
    eps_values: tuple[float, ...]
    mu_eps: np.ndarray              # (n_eps, count)
    ambiguities: list[str] = field(default_factory=list)

    def errors(self) -> np.ndarray:
        return np.abs(self.mu_eps - self.mu_limit[None, :])


def eps_family(graph: MetricGraph, eps_list, count: int,
               snap_tol: float = vc.DEFAULT_SNAP_TOL,
               allow_extrapolation: bool = False,
               margin: float = 1.3) -> EpsFamilyTable:
    """Track the first `count` eigenvalues over a family of ε toward the limit."""
    problem = build_threshold_problem(graph, snap_tol=snap_tol,
                                      allow_extrapolation=allow_extrapolation)
    limit_flat = limiting_eigenvalues(problem, count).flat()[:count]
    mu_max = float(limit_flat[-1])

    rows = []
    ambiguities = []
    for eps in eps_list:
        lam_hi = graph.lambda0 + (mu_max * margin + 1.0) * eps ** 2
        if lam_hi >= graph.lambda1:
            raise ThresholdError(
                f"eps={eps}: window λ0 + {mu_max * margin + 1.0:.3g}·ε² reaches λ1; "
                f"the near-threshold regime needs smaller ε")
        res = find_eigenvalues(graph, eps, (graph.lambda0, lam_hi))
        mus = (res.flat() - graph.lambda0) / eps ** 2
        if len(mus) < count:
            raise ThresholdError(
                f"eps={eps}: only {len(mus)} eigenvalues below λ0 + {mu_max * margin + 1.0:.3g}·ε², "
                f"need {count}")
        mus = mus[:count]
        rows.append(mus)
        # ambiguity: an ε-eigenvalue equally close to two distinct limit values
        distinct = np.unique(limit_flat)
        if len(distinct) > 1:
            for j, m in enumerate(mus):
                d = np.sort(np.abs(distinct - m))
                if d[0] > 0 and d[1] <= 1.05 * d[0]:
                    ambiguities.append(
                        f"eps={eps}: mu={m:.9g} is equally close to limits "
                        f"{distinct[np.argsort(np.abs(distinct - m))[:2]]}")
    return EpsFamilyTable(mu_limit=np.asarray(limit_flat),
                          eps_values=tuple(float(e) for e in eps_list),
                          mu_eps=np.array(rows), ambiguities=ambiguities)


def convergence_order(table: EpsFamilyTable, j: int) -> float:
    """Fitted slope of log|μ_j(ε) − μ_j| against log ε."""
    err = table.errors()[:, j]
    x = np.log(np.asarray(table.eps_values))
    y = np.log(np.maximum(err, 1e-300))
    return float(np.polyfit(x, y, 1)[0])


# --------------------------- classification ---------------------------

@dataclass(frozen=True)
class JunctionLabel:
    vertex_id: str
    k: int
    degree: int
    label: str          # "kirchhoff-type" | "dirichlet-type" | "mixed"


@dataclass
class ClassificationReport:
    junctions: list[JunctionLabel]
    overall: str        # "kirchhoff problem" | "dirichlet problem" | "mixed"


def classify_limit(problem: ThresholdProblem,
                   positivity_tol: float = 1e-10) -> ClassificationReport:
    """Label junctions by their limiting condition type.

    Kirchhoff-type needs k = d−1 together with a strictly positive +1
    eigenvector (after normalizing the first entry positive) — the graph
    shadow of the ground-state channel weights.
    """
    labels = []
    for vid, dec in sorted(problem.decompositions.items()):
        d = dec.degree
        if dec.k == d:
            label = "dirichlet-type"
        elif dec.k == d - 1:
            w = dec.w_plus[:, 0]
            if w[0] < 0:
                w = -w
            label = "kirchhoff-type" if np.all(w > positivity_tol) else "mixed"
        else:
            label = "mixed"
        labels.append(JunctionLabel(vertex_id=vid, k=dec.k, degree=d, label=label))

    kinds = {lab.label for lab in labels}
    if kinds == {"kirchhoff-type"}:
        overall = "kirchhoff problem"
    elif kinds == {"dirichlet-type"}:
        overall = "dirichlet problem"
    else:
        overall = "mixed"
    return ClassificationReport(junctions=labels, overall=overall)
