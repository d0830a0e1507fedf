"""Metric graphs: edges with lengths, free ends, and junction gluing data.

A graph is the ε → 0 skeleton of a branched waveguide: finite edges carry a
coordinate t ∈ [0, l] with t = 0 at the start vertex, leads (infinite edges)
carry t ∈ [0, ∞) with t = 0 at their junction.  Graphs are immutable after
validation and safe to share across solver runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import conditions as vc


class GraphError(ValueError):
    """Base for graph construction failures."""


class GraphSchemaError(GraphError):
    """Document does not conform to the graph schema."""


class GraphInvariantError(GraphError):
    """Well-formed document violating a structural invariant."""


# --------------------------- vertex data ---------------------------

@dataclass(frozen=True)
class FreeEndBC:
    """Free-end boundary condition: Dirichlet, Neumann, or Robin ε·ς′ + α·ς = 0."""

    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise GraphSchemaError(f"unknown free-end BC variant '{self.kind}'")
        if self.kind == "robin" and self.alpha < 0:
            raise GraphInvariantError(f"Robin coefficient must be >= 0, got {self.alpha}")
        if self.kind != "robin" and self.alpha != 0.0:
            raise GraphSchemaError(f"{self.kind} BC takes no coefficient")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def robin(cls, alpha: float):
        return cls("robin", float(alpha))


@dataclass(frozen=True)
class Edge:
    id: str
    start: str
    end: str | None = None
    length: float = math.inf

    @property
    def is_lead(self) -> bool:
        return self.end is None

    def __post_init__(self):
        if self.is_lead:
            if math.isfinite(self.length):
                raise GraphInvariantError(f"edge '{self.id}': leads must have infinite length")
        else:
            if not (math.isfinite(self.length) and self.length > 0):
                raise GraphInvariantError(
                    f"edge '{self.id}': finite edge needs a strictly positive length, "
                    f"got {self.length}")


@dataclass(frozen=True)
class Vertex:
    """Graph vertex: a free end (bc) or a junction (condition).

    order fixes the channel numbering of the incident edges; the junction
    scattering matrix is indexed in exactly this order.
    """

    id: str
    kind: str
    order: tuple[str, ...]
    bc: FreeEndBC | None = None
    condition: object | None = None

    @property
    def degree(self) -> int:
        return len(self.order)

    def __post_init__(self):
        if self.kind not in ("free", "junction"):
            raise GraphSchemaError(f"vertex '{self.id}': unknown kind '{self.kind}'")
        object.__setattr__(self, "order", tuple(self.order))
        if self.kind == "free":
            if self.bc is None or self.condition is not None:
                raise GraphSchemaError(f"vertex '{self.id}': free ends carry a bc, not a condition")
        else:
            if self.condition is None or self.bc is not None:
                raise GraphSchemaError(f"vertex '{self.id}': junctions carry a condition, not a bc")


# --------------------------- the graph ---------------------------

class MetricGraph:
    """Validated metric graph with transverse thresholds λ0 < λ1.

    λ0, λ1 are data (first two transverse eigenvalues of the channel
    cross-section); the graph solvers never recompute them.
    """

    def __init__(self, vertices, edges, lambda0: float, lambda1: float):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.lambda0 = float(lambda0)
        self.lambda1 = float(lambda1)
        self._vmap = {v.id: v for v in self.vertices}
        self._emap = {e.id: e for e in self.edges}
        self._validate()

    # -- accessors

    def vertex(self, vid: str) -> Vertex:
        try:
            return self._vmap[vid]
        except KeyError:
            raise GraphError(f"no vertex '{vid}'") from None

    def edge(self, eid: str) -> Edge:
        try:
            return self._emap[eid]
        except KeyError:
            raise GraphError(f"no edge '{eid}'") from None

    @property
    def finite_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if not e.is_lead)

    @property
    def leads(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.is_lead)

    @property
    def n_finite(self) -> int:
        return len(self.finite_edges)

    @property
    def n_leads(self) -> int:
        return len(self.leads)

    @property
    def is_bounded(self) -> bool:
        return self.n_leads == 0

    @property
    def junctions(self) -> tuple[Vertex, ...]:
        return tuple(v for v in self.vertices if v.kind == "junction")

    @property
    def max_finite_length(self) -> float:
        return max((e.length for e in self.finite_edges), default=1.0)

    def __eq__(self, other):
        return (isinstance(other, MetricGraph)
                and self.lambda0 == other.lambda0 and self.lambda1 == other.lambda1
                and self.vertices == other.vertices and self.edges == other.edges)

    # -- validation

    def _validate(self):
        if len(self._vmap) != len(self.vertices):
            raise GraphInvariantError("duplicate vertex ids")
        if len(self._emap) != len(self.edges):
            raise GraphInvariantError("duplicate edge ids")
        if not self.lambda0 < self.lambda1:
            raise GraphInvariantError(
                f"need lambda0 < lambda1, got {self.lambda0} >= {self.lambda1}")

        incident: dict[str, list[str]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            for vid in (e.start,) if e.is_lead else (e.start, e.end):
                if vid not in self._vmap:
                    raise GraphInvariantError(f"edge '{e.id}': unknown vertex '{vid}'")
                incident[vid].append(e.id)
            if not e.is_lead and e.start == e.end:
                raise GraphInvariantError(
                    f"edge '{e.id}': endpoints must be two distinct vertices")

        for v in self.vertices:
            inc = incident[v.id]
            if sorted(v.order) != sorted(inc):
                raise GraphInvariantError(
                    f"vertex '{v.id}': channel order {list(v.order)} does not match "
                    f"incident edges {sorted(inc)}")
            if v.kind == "free" and v.degree != 1:
                raise GraphInvariantError(
                    f"vertex '{v.id}': free ends have degree 1, got {v.degree}")
            if v.kind == "junction":
                if v.degree < 2:
                    raise GraphInvariantError(
                        f"vertex '{v.id}': junctions need degree >= 2, got {v.degree}")
                if v.condition.degree != v.degree:
                    raise GraphInvariantError(
                        f"vertex '{v.id}': condition matrix size {v.condition.degree} "
                        f"!= degree {v.degree}")

    # -- derived graphs

    def with_conditions(self, condition_map=None, bc_map=None,
                        lambda0=None, lambda1=None) -> "MetricGraph":
        """Copy of the graph with some vertex data and thresholds replaced."""
        condition_map = condition_map or {}
        bc_map = bc_map or {}
        new_vertices = []
        for v in self.vertices:
            if v.id in condition_map:
                new_vertices.append(Vertex(v.id, "junction", v.order,
                                           condition=condition_map[v.id]))
            elif v.id in bc_map:
                new_vertices.append(Vertex(v.id, "free", v.order, bc=bc_map[v.id]))
            else:
                new_vertices.append(v)
        return MetricGraph(new_vertices, self.edges,
                           self.lambda0 if lambda0 is None else lambda0,
                           self.lambda1 if lambda1 is None else lambda1)


# --------------------------- endpoint coordinate maps ---------------------------

@dataclass(frozen=True)
class EndpointMap:
    """Affine map between edge coordinate t and vertex-local coordinate s.

    s = 0 at the queried vertex and grows into the edge: s = t at the start
    vertex (forward), s = length − t at the end vertex (reversed).
    """

    forward: bool
    length: float

    def s(self, t):
        return t if self.forward else self.length - t

    def t(self, s):
        return s if self.forward else self.length - s


def local_coordinate(edge: Edge, vertex_id: str) -> EndpointMap:
    """Orientation of an edge as seen from one of its endpoints."""
    if vertex_id == edge.start:
        return EndpointMap(forward=True, length=edge.length)
    if vertex_id == edge.end:
        return EndpointMap(forward=False, length=edge.length)
    raise GraphError(f"vertex '{vertex_id}' is not an endpoint of edge '{edge.id}'")


# --------------------------- parsing / serialization ---------------------------

def _parse_bc(raw, vid: str) -> FreeEndBC:
    if raw == "dirichlet":
        return FreeEndBC.dirichlet()
    if raw == "neumann":
        return FreeEndBC.neumann()
    if isinstance(raw, dict) and set(raw) == {"robin"}:
        try:
            return FreeEndBC.robin(float(raw["robin"]))
        except GraphError:
            raise
        except (TypeError, ValueError):
            raise GraphSchemaError(f"vertex '{vid}': Robin coefficient must be a number")
    raise GraphSchemaError(f"vertex '{vid}': unknown bc variant {raw!r}")


def _parse_condition(raw, vid: str, base_dir):
    if raw == "kirchhoff":
        return None  # degree not known yet; resolved after 'order' is read
    if isinstance(raw, dict) and set(raw) == {"matrix"}:
        try:
            return vc.ConstantCondition(vc.pairs_to_matrix(raw["matrix"]))
        except vc.ConditionError as exc:
            raise GraphSchemaError(f"vertex '{vid}': {exc}") from exc
    if isinstance(raw, dict) and set(raw) == {"table"}:
        path = Path(raw["table"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            cond = vc.load_tabulated(path)
        except (OSError, json.JSONDecodeError, vc.ConditionError) as exc:
            raise GraphSchemaError(f"vertex '{vid}': cannot load table: {exc}") from exc
        cond.source = str(raw["table"])
        return cond
    raise GraphSchemaError(f"vertex '{vid}': unknown condition variant {raw!r}")


def parse_graph(document: dict, base_dir=None) -> MetricGraph:
    """Build a validated MetricGraph from its schema document.

    base_dir resolves relative tabulated-matrix paths (set automatically by
    load_graph).
    """
    if not isinstance(document, dict):
        raise GraphSchemaError("graph document must be a mapping")
    for key in ("lambda0", "lambda1", "vertices", "edges"):
        if key not in document:
            raise GraphSchemaError(f"missing top-level field '{key}'")

    edges = []
    for raw in document["edges"]:
        if "id" not in raw or "start" not in raw:
            raise GraphSchemaError(f"edge entry {raw!r}: needs 'id' and 'start'")
        eid = str(raw["id"])
        length = raw.get("length", "inf")
        if length == "inf":
            length = math.inf
        else:
            try:
                length = float(length)
            except (TypeError, ValueError):
                raise GraphSchemaError(f"edge '{eid}': bad length {raw.get('length')!r}")
        end = raw.get("end")
        if end is None and math.isfinite(length):
            raise GraphSchemaError(f"edge '{eid}': finite edge needs an 'end' vertex")
        edges.append(Edge(id=eid, start=str(raw["start"]),
                          end=None if end is None else str(end), length=length))

    vertices = []
    for raw in document["vertices"]:
        for key in ("id", "kind", "order"):
            if key not in raw:
                raise GraphSchemaError(f"vertex entry {raw!r}: missing '{key}'")
        vid = str(raw["id"])
        order = tuple(str(e) for e in raw["order"])
        if raw["kind"] == "free":
            if "bc" not in raw:
                raise GraphSchemaError(f"vertex '{vid}': free end needs a 'bc'")
            vertices.append(Vertex(vid, "free", order, bc=_parse_bc(raw["bc"], vid)))
        elif raw["kind"] == "junction":
            if "condition" not in raw:
                raise GraphSchemaError(f"vertex '{vid}': junction needs a 'condition'")
            cond = _parse_condition(raw["condition"], vid, base_dir)
            if cond is None:
                if len(order) < 2:
                    raise GraphInvariantError(
                        f"vertex '{vid}': junctions need degree >= 2, got {len(order)}")
                cond = vc.KirchhoffCondition(degree=len(order))
            vertices.append(Vertex(vid, "junction", order, condition=cond))
        else:
            raise GraphSchemaError(f"vertex '{vid}': unknown kind '{raw['kind']}'")

    return MetricGraph(vertices, edges,
                       lambda0=_as_float(document, "lambda0"),
                       lambda1=_as_float(document, "lambda1"))


def _as_float(doc, key) -> float:
    try:
        return float(doc[key])
    except (TypeError, ValueError):
        raise GraphSchemaError(f"field '{key}' must be a number, got {doc[key]!r}")


def load_graph(path) -> MetricGraph:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GraphSchemaError(f"{path}: not valid JSON: {exc}") from exc
    return parse_graph(document, base_dir=path.parent)


def graph_to_document(graph: MetricGraph) -> dict:
    """Inverse of parse_graph (field-by-field round-trip)."""
    vertices = []
    for v in graph.vertices:
        entry = {"id": v.id, "kind": v.kind, "order": list(v.order)}
        if v.kind == "free":
            entry["bc"] = v.bc.kind if v.bc.kind != "robin" else {"robin": v.bc.alpha}
        else:
            entry["condition"] = _condition_to_document(v)
        vertices.append(entry)
    edges = []
    for e in graph.edges:
        entry = {"id": e.id, "start": e.start}
        if e.is_lead:
            entry["length"] = "inf"
        else:
            entry["end"] = e.end
            entry["length"] = e.length
        edges.append(entry)
    return {"lambda0": graph.lambda0, "lambda1": graph.lambda1,
            "vertices": vertices, "edges": edges}


def _condition_to_document(v: Vertex):
    cond = v.condition
    if isinstance(cond, vc.KirchhoffCondition):
        return "kirchhoff"
    if isinstance(cond, vc.ConstantCondition):
        return {"matrix": vc.matrix_to_pairs(cond.matrix)}
    if isinstance(cond, vc.TabulatedCondition):
        source = getattr(cond, "source", None)
        if source is None:
            raise GraphError(
                f"vertex '{v.id}': tabulated condition has no source path; "
                f"write it with conditions.save_tabulated first")
        return {"table": source}
    raise GraphError(f"vertex '{v.id}': condition {type(cond).__name__} is not serializable")


def save_graph(path, graph: MetricGraph):
    Path(path).write_text(json.dumps(graph_to_document(graph), indent=1))
