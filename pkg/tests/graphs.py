"""Shared graph builders for the test suite."""

from __future__ import annotations

import numpy as np

from wgnet.conditions import ConstantCondition, KirchhoffCondition
from wgnet.graph import Edge, FreeEndBC, MetricGraph, Vertex

PI2 = np.pi ** 2
LAM0 = PI2
LAM1 = 4 * PI2


def _bc(spec) -> FreeEndBC:
    if isinstance(spec, FreeEndBC):
        return spec
    if spec == "dirichlet":
        return FreeEndBC.dirichlet()
    if spec == "neumann":
        return FreeEndBC.neumann()
    return FreeEndBC.robin(float(spec))


def single_edge(length=1.0, bcs=("dirichlet", "dirichlet"), lam0=LAM0, lam1=LAM1):
    vertices = [
        Vertex("v0", "free", ("e0",), bc=_bc(bcs[0])),
        Vertex("v1", "free", ("e0",), bc=_bc(bcs[1])),
    ]
    edges = [Edge("e0", "v0", "v1", length)]
    return MetricGraph(vertices, edges, lam0, lam1)


def star(n, lengths=None, condition=None, tips="dirichlet", lam0=LAM0, lam1=LAM1):
    """n finite edges joined at one junction, free ends at the tips."""
    lengths = [1.0] * n if lengths is None else list(lengths)
    cond = condition if condition is not None else KirchhoffCondition(degree=n)
    edge_ids = tuple(f"e{i}" for i in range(n))
    vertices = [Vertex("c", "junction", edge_ids, condition=cond)]
    edges = []
    for i in range(n):
        vertices.append(Vertex(f"t{i}", "free", (f"e{i}",), bc=_bc(tips)))
        edges.append(Edge(f"e{i}", "c", f"t{i}", lengths[i]))
    return MetricGraph(vertices, edges, lam0, lam1)


def spider(condition, lam0=LAM0, lam1=LAM1):
    """One junction, all channels infinite."""
    m = condition.degree
    lead_ids = tuple(f"l{i}" for i in range(m))
    vertices = [Vertex("c", "junction", lead_ids, condition=condition)]
    edges = [Edge(f"l{i}", "c") for i in range(m)]
    return MetricGraph(vertices, edges, lam0, lam1)


def two_port_chain(t_a, t_b, length=1.0, lam0=LAM0, lam1=LAM1):
    """lead0 — junction A — interior edge — junction B — lead1.

    Channel order at each junction: (lead, interior edge), matching the
    2×2 condition matrices.
    """
    vertices = [
        Vertex("A", "junction", ("l0", "e"), condition=ConstantCondition(t_a)),
        Vertex("B", "junction", ("l1", "e"), condition=ConstantCondition(t_b)),
    ]
    edges = [Edge("l0", "A"), Edge("e", "A", "B", length), Edge("l1", "B")]
    return MetricGraph(vertices, edges, lam0, lam1)


def random_symmetric_orthogonal(rng, d):
    """Random real symmetric orthogonal matrix (valid analytic vertex data)."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    signs = rng.choice([-1.0, 1.0], size=d)
    if np.all(signs == 1.0):
        signs[0] = -1.0  # avoid the trivial identity
    return q @ np.diag(signs) @ q.T


def random_graph(rng, with_leads=True, lam0=LAM0, lam1=LAM1):
    """Small random network with analytic junction data.

    1–3 junctions joined in a path, each padded with finite tip edges to
    degree >= 2 and (optionally) leads; random lengths and tip conditions.
    """
    n_junction = int(rng.integers(1, 4))
    vertices, edges = [], []
    orders = {f"j{i}": [] for i in range(n_junction)}

    def add_edge(eid, start, end=None, length=None):
        edges.append(Edge(eid, start, end, np.inf if end is None and length is None else length))
        orders[start].append(eid)
        if end in orders:
            orders[end].append(eid)

    for i in range(n_junction - 1):
        add_edge(f"c{i}", f"j{i}", f"j{i+1}", float(rng.uniform(0.5, 1.8)))

    tip_count = 0
    for i in range(n_junction):
        want = max(2 - len(orders[f"j{i}"]), int(rng.integers(0, 3)))
        for _ in range(max(want, 2 - len(orders[f"j{i}"]))):
            tid = f"t{tip_count}"
            tip_count += 1
            add_edge(f"e{tid}", f"j{i}", tid, float(rng.uniform(0.5, 1.8)))
            bc = rng.choice(["dirichlet", "neumann", "robin"])
            vertices.append(Vertex(tid, "free", (f"e{tid}",),
                                   bc=_bc(float(rng.uniform(0.1, 2.0)) if bc == "robin" else bc)))
        if with_leads:
            for n_lead in range(int(rng.integers(0, 3)) if i else int(rng.integers(1, 3))):
                add_edge(f"l{i}_{n_lead}", f"j{i}")

    for i in range(n_junction):
        order = tuple(orders[f"j{i}"])
        d = len(order)
        cond = (KirchhoffCondition(degree=d) if rng.random() < 0.5
                else ConstantCondition(random_symmetric_orthogonal(rng, d)))
        vertices.append(Vertex(f"j{i}", "junction", order, condition=cond))
    return MetricGraph(vertices, edges, lam0, lam1)
