"""Axis-aligned waveguide geometries and their conforming grids.

A geometry is a union of rectangles (the junction region, or a whole
bounded network) plus leads attached to rectangle faces.  Truncated leads
are semi-infinite channels cut at length L and closed by the modal
radiation condition; finite leads are capped by the wall BC.  The grid
spacing must divide every rectangle dimension and lead measurement so
that the 5-point stencil conforms exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    """Malformed geometry or non-conforming grid request."""


_FACE_AXES = {"right": (1, 0), "left": (-1, 0), "top": (0, 1), "bottom": (0, -1)}


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError(f"degenerate rectangle {self}")

    def scaled(self, s: float) -> "Rect":
        return Rect(self.x0 * s, self.y0 * s, self.x1 * s, self.y1 * s)


@dataclass(frozen=True)
class LeadSpec:
    """Channel attached to a rectangle face.

    offset displaces the lead's low transverse edge from the face's low
    corner; mode is "truncated" (radiating, extent = truncation length L)
    or "finite" (wall-capped stub, extent = axis length).
    """

    id: str
    rect: int
    face: str
    width: float
    extent: float
    offset: float = 0.0
    mode: str = "truncated"

    def __post_init__(self):
        if self.face not in _FACE_AXES:
            raise GeometryError(f"lead '{self.id}': unknown face '{self.face}'")
        if self.mode not in ("truncated", "finite"):
            raise GeometryError(f"lead '{self.id}': unknown mode '{self.mode}'")
        if self.width <= 0 or self.extent <= 0 or self.offset < 0:
            raise GeometryError(f"lead '{self.id}': nonpositive measurements")
        if self.mode == "truncated" and self.extent < 2.0 * self.width:
            raise GeometryError(
                f"lead '{self.id}': truncation length {self.extent} < 2·width")

    @property
    def axis(self) -> tuple[int, int]:
        return _FACE_AXES[self.face]


@dataclass(frozen=True)
class Geometry:
    rects: tuple[Rect, ...]
    leads: tuple[LeadSpec, ...]
    wall_bc: str = "dirichlet"

    def __post_init__(self):
        if self.wall_bc != "dirichlet":
            raise GeometryError(
                f"wall BC '{self.wall_bc}' is not supported by the 2D solvers "
                f"(Dirichlet walls only)")
        ids = [lead.id for lead in self.leads]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate lead ids")
        for lead in self.leads:
            if not 0 <= lead.rect < len(self.rects):
                raise GeometryError(f"lead '{lead.id}': no rectangle {lead.rect}")
            r = self.rects[lead.rect]
            face_len = (r.y1 - r.y0) if lead.face in ("left", "right") else (r.x1 - r.x0)
            if lead.offset + lead.width > face_len + 1e-12:
                raise GeometryError(
                    f"lead '{lead.id}': offset {lead.offset} + width {lead.width} "
                    f"exceeds the attach face (length {face_len})")

    @property
    def is_bounded(self) -> bool:
        return all(lead.mode == "finite" for lead in self.leads)

    def lead(self, lead_id: str) -> LeadSpec:
        for lead in self.leads:
            if lead.id == lead_id:
                return lead
        raise GeometryError(f"no lead '{lead_id}'")

    def lead_rect(self, lead: LeadSpec) -> Rect:
        r = self.rects[lead.rect]
        if lead.face == "right":
            return Rect(r.x1, r.y0 + lead.offset, r.x1 + lead.extent,
                        r.y0 + lead.offset + lead.width)
        if lead.face == "left":
            return Rect(r.x0 - lead.extent, r.y0 + lead.offset, r.x0,
                        r.y0 + lead.offset + lead.width)
        if lead.face == "top":
            return Rect(r.x0 + lead.offset, r.y1, r.x0 + lead.offset + lead.width,
                        r.y1 + lead.extent)
        return Rect(r.x0 + lead.offset, r.y0 - lead.extent,
                    r.x0 + lead.offset + lead.width, r.y0)

    def scaled(self, s: float) -> "Geometry":
        return Geometry(
            rects=tuple(r.scaled(s) for r in self.rects),
            leads=tuple(replace(l, width=l.width * s, extent=l.extent * s,
                                offset=l.offset * s) for l in self.leads),
            wall_bc=self.wall_bc)

    def min_feature(self) -> float:
        sides = [min(r.x1 - r.x0, r.y1 - r.y0) for r in self.rects]
        sides += [lead.width for lead in self.leads]
        return min(sides)


def network_from_junction(geometry: Geometry, epsilon: float,
                          lengths: dict[str, float]) -> Geometry:
    """Bounded ε-network from a reference junction geometry.

    The junction polygon contracts by ε; each truncated lead becomes a
    finite channel of width ε·w and the requested axis length, closed by
    the wall BC (the single-junction star family of the convergence study).
    """
    leads = []
    for lead in geometry.leads:
        if lead.id not in lengths:
            raise GeometryError(f"no channel length for lead '{lead.id}'")
        leads.append(replace(lead, width=lead.width * epsilon,
                             offset=lead.offset * epsilon,
                             extent=float(lengths[lead.id]), mode="finite"))
    return Geometry(rects=tuple(r.scaled(epsilon) for r in geometry.rects),
                    leads=tuple(leads), wall_bc=geometry.wall_bc)


# --------------------------- parsing / serialization ---------------------------

def parse_geometry(document: dict) -> Geometry:
    if not isinstance(document, dict) or "rectangles" not in document:
        raise GeometryError("geometry document needs a 'rectangles' list")
    rects = []
    for raw in document["rectangles"]:
        try:
            rects.append(Rect(float(raw["x0"]), float(raw["y0"]),
                              float(raw["x1"]), float(raw["y1"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise GeometryError(f"bad rectangle entry {raw!r}: {exc}") from exc
    leads = []
    for raw in document.get("leads", []):
        for key in ("id", "attach", "width"):
            if key not in raw:
                raise GeometryError(f"lead entry {raw!r}: missing '{key}'")
        attach = raw["attach"]
        if "truncated" in raw:
            mode, extent = "truncated", float(raw["truncated"])
        elif "length" in raw:
            mode, extent = "finite", float(raw["length"])
        else:
            raise GeometryError(f"lead '{raw['id']}': needs 'truncated' or 'length'")
        lead = LeadSpec(id=str(raw["id"]), rect=int(attach.get("rect", 0)),
                        face=str(attach["face"]), offset=float(attach.get("offset", 0.0)),
                        width=float(raw["width"]), extent=extent, mode=mode)
        axis = raw.get("axis")
        if axis is not None:
            want = {(1, 0): "+x", (-1, 0): "-x", (0, 1): "+y", (0, -1): "-y"}[lead.axis]
            if axis != want:
                raise GeometryError(
                    f"lead '{lead.id}': axis '{axis}' contradicts face "
                    f"'{lead.face}' (expects '{want}')")
        leads.append(lead)
    return Geometry(rects=tuple(rects), leads=tuple(leads),
                    wall_bc=document.get("wall_bc", "dirichlet"))


def geometry_to_document(geometry: Geometry) -> dict:
    doc = {"wall_bc": geometry.wall_bc,
           "rectangles": [{"x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}
                          for r in geometry.rects],
           "leads": []}
    for lead in geometry.leads:
        entry = {"id": lead.id,
                 "attach": {"rect": lead.rect, "face": lead.face, "offset": lead.offset},
                 "width": lead.width,
                 "axis": {(1, 0): "+x", (-1, 0): "-x", (0, 1): "+y", (0, -1): "-y"}[lead.axis]}
        entry["truncated" if lead.mode == "truncated" else "length"] = lead.extent
        doc["leads"].append(entry)
    return doc


def load_geometry(path) -> Geometry:
    try:
        return parse_geometry(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise GeometryError(f"{path}: not valid JSON: {exc}") from exc


# --------------------------- conforming grids ---------------------------

def _to_index(x: float, h: float, what: str) -> int:
    ix = x / h
    if abs(ix - round(ix)) > 1e-6:
        raise GeometryError(
            f"{what} = {x} is not a multiple of the grid spacing h = {h}")
    return int(round(ix))


@dataclass
class LeadNodes:
    """Unknown indices of one lead, organized by cross-section.

    node_ids[j, i] addresses cross-section t = j·h, interior transverse
    node i; −1 marks a missing unknown (never happens for valid grids).
    """

    spec: LeadSpec
    n_cols: int           # number of stored cross-sections
    n_trans: int          # interior transverse nodes
    node_ids: np.ndarray  # (n_cols, n_trans) int
    face_col: int | None  # column index of the DtN face (truncated leads)


class Grid:
    def __init__(self, geometry: Geometry, h: float):
        self.geometry = geometry
        self.h = float(h)
        cells = set()
        for r in list(geometry.rects) + [geometry.lead_rect(l) for l in geometry.leads]:
            ix0 = _to_index(r.x0, h, "rectangle corner")
            ix1 = _to_index(r.x1, h, "rectangle corner")
            iy0 = _to_index(r.y0, h, "rectangle corner")
            iy1 = _to_index(r.y1, h, "rectangle corner")
            cells.update((ix, iy) for ix in range(ix0, ix1) for iy in range(iy0, iy1))
        self.cells = cells

        # interior nodes: all four incident cells covered (Dirichlet walls drop out)
        index: dict[tuple[int, int], int] = {}
        for (ix, iy) in cells:
            for node in ((ix, iy), (ix + 1, iy), (ix, iy + 1), (ix + 1, iy + 1)):
                if node in index:
                    continue
                nx, ny = node
                if {(nx - 1, ny - 1), (nx, ny - 1), (nx - 1, ny), (nx, ny)} <= cells:
                    index[node] = -1

        # truncation-face nodes are unknowns too (ghost handled by the DtN)
        self._lead_frames = {}
        for lead in geometry.leads:
            frame = self._lead_frame(lead)
            self._lead_frames[lead.id] = frame
            if lead.mode == "truncated":
                mouth, trans, axis, n_trans, F = frame
                for i in range(1, n_trans + 1):
                    node = (mouth[0] + F * axis[0] + i * trans[0],
                            mouth[1] + F * axis[1] + i * trans[1])
                    index.setdefault(node, -1)

        self.nodes = sorted(index)
        self.index = {node: i for i, node in enumerate(self.nodes)}
        self.n = len(self.nodes)

        self.leads: dict[str, LeadNodes] = {}
        for lead in geometry.leads:
            self.leads[lead.id] = self._collect_lead_nodes(lead)

    def _lead_frame(self, lead: LeadSpec):
        h = self.h
        r = self.geometry.rects[lead.rect]
        axis = lead.axis
        trans = (0, 1) if axis[0] else (1, 0)
        if lead.face == "right":
            corner = (r.x1, r.y0 + lead.offset)
        elif lead.face == "left":
            corner = (r.x0, r.y0 + lead.offset)
        elif lead.face == "top":
            corner = (r.x0 + lead.offset, r.y1)
        else:
            corner = (r.x0 + lead.offset, r.y0)
        mouth = (_to_index(corner[0], h, f"lead '{lead.id}' corner"),
                 _to_index(corner[1], h, f"lead '{lead.id}' corner"))
        n_trans = _to_index(lead.width, h, f"lead '{lead.id}' width") - 1
        F = _to_index(lead.extent, h, f"lead '{lead.id}' extent")
        if n_trans < 3:
            raise GeometryError(
                f"lead '{lead.id}': only {n_trans} interior transverse nodes at "
                f"h = {h}; insufficient resolution")
        return mouth, trans, axis, n_trans, F

    def _collect_lead_nodes(self, lead: LeadSpec) -> LeadNodes:
        mouth, trans, axis, n_trans, F = self._lead_frames[lead.id]
        n_cols = F + 1 if lead.mode == "truncated" else F
        ids = np.full((n_cols, n_trans), -1, dtype=int)
        for j in range(n_cols):
            for i in range(1, n_trans + 1):
                node = (mouth[0] + j * axis[0] + i * trans[0],
                        mouth[1] + j * axis[1] + i * trans[1])
                ids[j, i - 1] = self.index.get(node, -1)
        if np.any(ids < 0):
            raise GeometryError(f"lead '{lead.id}': grid does not cover its channel")
        return LeadNodes(spec=lead, n_cols=n_cols, n_trans=n_trans,
                         node_ids=ids, face_col=F if lead.mode == "truncated" else None)

    def laplacian(self):
        """−Δ_h as a sparse CSR matrix over the unknowns (Dirichlet walls)."""
        from scipy import sparse

        h2 = self.h ** 2
        rows, cols, vals = [], [], []
        for i, (ix, iy) in enumerate(self.nodes):
            rows.append(i)
            cols.append(i)
            vals.append(4.0 / h2)
            for nb in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)):
                j = self.index.get(nb)
                if j is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(-1.0 / h2)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))


def build_grid(geometry: Geometry, h: float) -> Grid:
    return Grid(geometry, h)
