"""Secular linear system on a metric graph.

Plane-wave ansatz per edge, ς_e(t) = a_e·e^{ikt} + b_e·e^{−ikt} with
k = √(λ−λ0)/ε (Im k ≥ 0), one outgoing unknown per lead.  Junction rows are
the gluing blocks iε(I+T)·ς′(0) − √(λ−λ0)(I−T)·ς(0) = 0 in vertex-local
coordinates; free ends contribute one boundary row each.  Every matrix
entry has the form a(λ)·e^{iks} with s ∈ {0, ±l_e}.

Assembly is vectorized over a grid of wavenumbers: the internal variable is
k, in which all entries are entire; the λ ↔ k map lives in SpectralContext.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import conditions as vc
from .graph import MetricGraph, local_coordinate

SINGULARITY_TOL_REL = 1e-8


class AssemblyError(ValueError):
    """Ill-posed request to the secular machinery."""


class SpectralPointError(AssemblyError):
    """λ is numerically indistinguishable from a point of Λ(ε)."""

    def __init__(self, message, sigma_min):
        super().__init__(message)
        self.sigma_min = sigma_min


# --------------------------- spectral context ---------------------------

@dataclass(frozen=True)
class SpectralContext:
    """(λ, ε) plus the derived wavenumber k = √(λ−λ0)/ε, Im k ≥ 0."""

    lam: complex
    epsilon: float
    lambda0: float
    k: complex

    @classmethod
    def for_graph(cls, graph: MetricGraph, lam, epsilon: float) -> "SpectralContext":
        lam = complex(lam)
        if epsilon <= 0:
            raise AssemblyError(f"epsilon must be positive, got {epsilon}")
        if lam.imag < 0:
            raise AssemblyError("only the extension from Im λ >= 0 is defined")
        if lam.imag == 0 and lam.real >= graph.lambda1:
            raise AssemblyError(
                f"lambda={lam.real:.9g} >= lambda1={graph.lambda1:.9g}: "
                f"multi-mode regime is out of range")
        k = cmath.sqrt(lam - graph.lambda0) / epsilon
        if k.imag < 0:  # principal branch already has Im >= 0; guard roundoff
            k = -k
        if lam.imag == 0:
            lam = lam.real
            k = k.real if lam > graph.lambda0 else complex(0.0, abs(k.imag))
        return cls(lam=lam, epsilon=float(epsilon), lambda0=graph.lambda0, k=k)

    @classmethod
    def from_k(cls, graph: MetricGraph, k: float, epsilon: float) -> "SpectralContext":
        lam = graph.lambda0 + (epsilon * k) ** 2
        return cls(lam=lam, epsilon=float(epsilon), lambda0=graph.lambda0, k=k)


# --------------------------- structural layout ---------------------------

@dataclass(frozen=True)
class Slot:
    """One channel of a vertex: an incident edge seen in vertex-local coordinates."""

    edge_id: str
    forward: bool
    length: float      # inf for leads
    col_a: int
    col_b: int | None  # None for leads (incoming coefficient is data)


@dataclass(frozen=True)
class VertexBlock:
    vertex_id: str
    kind: str
    row_start: int
    n_rows: int
    slots: tuple[Slot, ...]
    bc: object = None
    condition: object = None


@dataclass(frozen=True)
class SystemLayout:
    n: int
    blocks: tuple[VertexBlock, ...]
    col_meta: tuple[tuple[str, str], ...]   # (edge id, "a" | "b")
    row_meta: tuple[tuple[str, int], ...]   # (vertex id, slot within its block)


def system_layout(graph: MetricGraph) -> SystemLayout:
    cols: dict[tuple[str, str], int] = {}
    col_meta = []
    for e in graph.edges:
        cols[(e.id, "a")] = len(col_meta)
        col_meta.append((e.id, "a"))
        if not e.is_lead:
            cols[(e.id, "b")] = len(col_meta)
            col_meta.append((e.id, "b"))

    blocks, row_meta = [], []
    row = 0
    for v in graph.vertices:
        slots = []
        for eid in v.order:
            e = graph.edge(eid)
            emap = local_coordinate(e, v.id)
            slots.append(Slot(edge_id=eid, forward=emap.forward, length=e.length,
                              col_a=cols[(eid, "a")], col_b=cols.get((eid, "b"))))
        blocks.append(VertexBlock(vertex_id=v.id, kind=v.kind, row_start=row,
                                  n_rows=v.degree, slots=tuple(slots),
                                  bc=v.bc, condition=v.condition))
        row_meta.extend((v.id, j) for j in range(v.degree))
        row += v.degree

    if row != len(col_meta):
        raise AssemblyError(
            f"unbalanced system: {row} vertex rows vs {len(col_meta)} unknowns")
    return SystemLayout(n=row, blocks=tuple(blocks),
                        col_meta=tuple(col_meta), row_meta=tuple(row_meta))


# --------------------------- row pairs ---------------------------

def _row_pair(block: VertexBlock, k, eps, lam):
    """(A, B) with vertex rows A·ς′(0) + B·ς(0) = 0, shape (nk, d, d)."""
    nk = len(k)
    if block.kind == "free":
        table = {"dirichlet": (0.0, 1.0), "neumann": (1.0, 0.0)}
        if block.bc.kind == "robin":
            a, b = eps, block.bc.alpha
        else:
            a, b = table[block.bc.kind]
        A = np.full((nk, 1, 1), a, dtype=complex)
        B = np.full((nk, 1, 1), b, dtype=complex)
        return A, B

    cond = block.condition
    d = block.n_rows
    eye = np.eye(d)
    if isinstance(cond, vc.ProjectionCondition):
        kdim = cond.w_minus.shape[1]
        A = np.zeros((d, d), dtype=complex)
        B = np.zeros((d, d), dtype=complex)
        B[:kdim, :] = cond.w_minus.T
        A[kdim:, :] = cond.w_plus.T
        return (np.broadcast_to(A, (nk, d, d)),
                np.broadcast_to(B, (nk, d, d)))

    T = cond.evaluate(lam)
    if T.ndim == 2:
        T = np.broadcast_to(T, (nk, d, d))
    A = 1j * eps * (eye + T)
    B = -(eps * k)[:, None, None] * (eye - T)
    return A, B


def _slot_forms(slot: Slot, k):
    """Linear forms (S_a, S_b, D_a, D_b) giving ς(0), ς′(0) at the vertex."""
    ik = 1j * k
    if slot.forward:
        one = np.ones_like(k, dtype=complex)
        return one, one.copy(), ik.astype(complex), -ik
    ph = np.exp(ik * slot.length)
    phm = np.exp(-ik * slot.length)
    return ph, phm, -ik * ph, ik * phm


# --------------------------- matrix assembly ---------------------------

def assemble_batch(graph: MetricGraph, epsilon: float, k_values,
                   layout: SystemLayout | None = None) -> np.ndarray:
    """Secular matrices M(λ(k), ε) for a whole k grid, shape (nk, n, n)."""
    layout = layout or system_layout(graph)
    k = np.atleast_1d(np.asarray(k_values))
    lam = graph.lambda0 + (epsilon * k) ** 2
    tabulated = any(b.kind == "junction" and not b.condition.is_analytic
                    for b in layout.blocks)
    if np.iscomplexobj(lam):
        if np.all(lam.imag == 0):
            lam = lam.real
        elif tabulated:
            raise vc.ConditionError("tabulated conditions are not evaluable at complex λ")
    if np.isrealobj(lam) and np.any(lam >= graph.lambda1):
        raise AssemblyError(
            f"lambda up to {float(np.max(lam)):.9g} >= lambda1={graph.lambda1:.9g}")

    M = np.zeros((len(k), layout.n, layout.n), dtype=complex)
    for block in layout.blocks:
        A, B = _row_pair(block, k, epsilon, lam)
        r0, r1 = block.row_start, block.row_start + block.n_rows
        for j, slot in enumerate(block.slots):
            sa, sb, da, db = _slot_forms(slot, k)
            M[:, r0:r1, slot.col_a] += A[:, :, j] * da[:, None] + B[:, :, j] * sa[:, None]
            if slot.col_b is not None:
                M[:, r0:r1, slot.col_b] += A[:, :, j] * db[:, None] + B[:, :, j] * sb[:, None]
    return M


# --------------------------- point sources ---------------------------

@dataclass(frozen=True)
class PointSource:
    """δ source at coordinate τ of an edge, for −ε²g″ − (λ−λ0)g = δ.

    The particular solution C·sin[k(t−τ)_−] with C = 1/(ε²k) lives on
    [0, τ]; it is continuous at τ and its derivative jumps by −1/ε².
    """

    edge_id: str
    tau: float
    prefactor: complex


def _make_source(graph: MetricGraph, ctx: SpectralContext, edge_id: str, tau: float):
    e = graph.edge(edge_id)
    if not (tau > 0 and (e.is_lead or tau < e.length)):
        raise AssemblyError(
            f"source at tau={tau} sits on a vertex or outside edge '{edge_id}'")
    if ctx.k == 0:
        raise AssemblyError("Green source undefined at the branch point λ = λ0")
    return PointSource(edge_id=edge_id, tau=float(tau),
                       prefactor=1.0 / (ctx.epsilon ** 2 * ctx.k))


def _source_endpoint_data(src: PointSource, slot: Slot, k):
    """(value, d/ds) of the particular solution at a vertex of its edge."""
    if slot.forward:
        # s = t = 0: P(0) = −C sin(kτ), P′(0) = C k cos(kτ)
        return (-src.prefactor * cmath.sin(k * src.tau),
                src.prefactor * k * cmath.cos(k * src.tau))
    # t = l > τ: the (t−τ)_− support ends below l
    return 0.0, 0.0


# --------------------------- full system ---------------------------

@dataclass
class SecularSystem:
    """Assembled 2N′×2N′ system with row/column provenance."""

    matrix: np.ndarray
    rhs: np.ndarray | None
    layout: SystemLayout
    context: SpectralContext

    @property
    def row_meta(self):
        return self.layout.row_meta

    @property
    def col_meta(self):
        return self.layout.col_meta


def build_system(graph: MetricGraph, context: SpectralContext,
                 incident: dict | None = None,
                 source: tuple[str, float] | None = None) -> SecularSystem:
    """Assemble M(λ,ε) together with the right-hand side.

    incident maps lead ids to the prescribed e^{−ikt} coefficient (scattering
    data); source = (edge id, τ) adds the Green point-source mismatch.
    """
    layout = system_layout(graph)
    k = np.array([context.k])
    M = assemble_batch(graph, context.epsilon, k, layout)[0]

    rhs = np.zeros(layout.n, dtype=complex)
    incident = incident or {}
    for lead_id in incident:
        if not graph.edge(lead_id).is_lead:
            raise AssemblyError(f"incident data on '{lead_id}', which is not a lead")
    src = _make_source(graph, context, *source) if source else None

    if incident or src:
        lam = np.array([context.lam])
        for block in layout.blocks:
            A, B = _row_pair(block, k, context.epsilon, lam)
            for j, slot in enumerate(block.slots):
                val = dval = 0.0
                if slot.edge_id in incident:
                    c = incident[slot.edge_id]
                    val += c                      # c·e^{−ik·0}
                    dval += -1j * context.k * c
                if src is not None and slot.edge_id == src.edge_id:
                    v0, d0 = _source_endpoint_data(src, slot, context.k)
                    val += v0
                    dval += d0
                if val != 0.0 or dval != 0.0:
                    rhs[block.row_start:block.row_start + block.n_rows] -= (
                        A[0, :, j] * dval + B[0, :, j] * val)

    system = SecularSystem(matrix=M, rhs=rhs, layout=layout, context=context)
    system._source = src
    system._incident = dict(incident)
    return system


def secular_determinant(graph: MetricGraph, context: SpectralContext) -> complex:
    """D(λ,ε) via pivoted LU; zeros of D are the graph spectrum Λ(ε)."""
    system = build_system(graph, context)
    return complex(np.linalg.det(system.matrix))


def singularity_proximity(graph: MetricGraph, context: SpectralContext) -> float:
    """Smallest singular value of M(λ,ε): the distance-to-Λ(ε) proxy."""
    system = build_system(graph, context)
    return float(np.linalg.svd(system.matrix, compute_uv=False)[-1])


def solve_system(system: SecularSystem,
                 singularity_tol: float = SINGULARITY_TOL_REL) -> np.ndarray:
    sv = np.linalg.svd(system.matrix, compute_uv=False)
    if sv[-1] <= singularity_tol * sv[0]:
        raise SpectralPointError(
            f"spectral point: sigma_min={sv[-1]:.3e} <= {singularity_tol:g}·‖M‖"
            f" at lambda={system.context.lam}", sigma_min=float(sv[-1]))
    return np.linalg.solve(system.matrix, system.rhs)


# --------------------------- amplitude fields ---------------------------

class AmplitudeField:
    """Per-edge plane-wave coefficients of a solution on the graph.

    coeffs[edge] = (a, b) with ς = a·e^{ikt} + b·e^{−ikt}; for leads b holds
    the prescribed incident coefficient.  When built from a point source the
    particular solution is part of the represented function, so the field
    doubles as the Green-evaluation record.
    """

    def __init__(self, graph, context, coeffs, source: PointSource | None = None):
        self.graph = graph
        self.context = context
        self.coeffs = coeffs
        self.source = source

    def value(self, edge_id: str, t):
        a, b = self.coeffs[edge_id]
        k = self.context.k
        t = np.asarray(t, dtype=float)
        out = a * np.exp(1j * k * t) + b * np.exp(-1j * k * t)
        if self.source is not None and edge_id == self.source.edge_id:
            dt = np.minimum(t - self.source.tau, 0.0)
            out = out + self.source.prefactor * np.sin(k * dt)
        return complex(out) if out.ndim == 0 else out

    def derivative(self, edge_id: str, t):
        a, b = self.coeffs[edge_id]
        k = self.context.k
        t = np.asarray(t, dtype=float)
        out = 1j * k * (a * np.exp(1j * k * t) - b * np.exp(-1j * k * t))
        if self.source is not None and edge_id == self.source.edge_id:
            dt = t - self.source.tau
            out = out + np.where(dt < 0, self.source.prefactor * k * np.cos(k * np.minimum(dt, 0.0)), 0.0)
        return complex(out) if out.ndim == 0 else out

    def l2_norm_sq(self) -> float:
        """∫_Γ |ς|² in closed form; bounded graphs with real k only."""
        k = self.context.k
        if abs(complex(k).imag) > 1e-12 * max(1.0, abs(k)):
            raise AssemblyError("closed-form norm needs real k (λ > λ0)")
        k = complex(k).real
        total = 0.0
        for e in self.graph.finite_edges:
            a, b = self.coeffs[e.id]
            cross = a * np.conj(b) * (np.exp(2j * k * e.length) - 1.0) / (2j * k)
            total += (abs(a) ** 2 + abs(b) ** 2) * e.length + 2.0 * cross.real
        return float(total)


def field_from_solution(graph, context, x, layout, incident=None,
                        source: PointSource | None = None) -> AmplitudeField:
    incident = incident or {}
    cols = {meta: i for i, meta in enumerate(layout.col_meta)}
    coeffs = {}
    for e in graph.edges:
        a = x[cols[(e.id, "a")]]
        b = incident.get(e.id, 0.0) if e.is_lead else x[cols[(e.id, "b")]]
        coeffs[e.id] = (complex(a), complex(b))
    return AmplitudeField(graph, context, coeffs, source=source)


# --------------------------- Green function ---------------------------

def green_solution(graph: MetricGraph, context: SpectralContext,
                   source: tuple[str, float],
                   singularity_tol: float = SINGULARITY_TOL_REL) -> AmplitudeField:
    """Outgoing Green function g_λ(·, ξ) as an amplitude field."""
    system = build_system(graph, context, source=source)
    x = solve_system(system, singularity_tol=singularity_tol)
    return field_from_solution(graph, context, x, system.layout, source=system._source)


def green_function(graph: MetricGraph, context: SpectralContext,
                   source: tuple[str, float], target: tuple[str, float],
                   singularity_tol: float = SINGULARITY_TOL_REL) -> complex:
    field = green_solution(graph, context, source, singularity_tol=singularity_tol)
    return complex(field.value(*target))


# --------------------------- residual diagnostics ---------------------------

def vertex_residuals(graph: MetricGraph, context: SpectralContext,
                     field: AmplitudeField) -> dict[str, float]:
    """‖A·ς′(0) + B·ς(0)‖ per vertex for a given field (GC/BC defect)."""
    layout = system_layout(graph)
    k = np.array([context.k])
    lam = np.array([context.lam])
    out = {}
    for block in layout.blocks:
        A, B = _row_pair(block, k, context.epsilon, lam)
        vals = np.zeros(block.n_rows, dtype=complex)
        for j, slot in enumerate(block.slots):
            emap_t0 = 0.0 if slot.forward else slot.length
            s_sign = 1.0 if slot.forward else -1.0
            val = field.value(slot.edge_id, emap_t0)
            dval = s_sign * field.derivative(slot.edge_id, emap_t0)
            vals += A[0, :, j] * dval + B[0, :, j] * val
        out[block.vertex_id] = float(np.linalg.norm(vals))
    return out
