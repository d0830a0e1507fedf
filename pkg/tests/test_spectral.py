"""Eigenvalue search, scattering matrices, and the scattering-basis Green check."""

from __future__ import annotations

import numpy as np
import pytest

from wgnet.assembly import SpectralContext, green_function, secular_determinant, vertex_residuals
from wgnet.conditions import ConstantCondition, KirchhoffCondition, kirchhoff_matrix
from wgnet.graph import Edge, MetricGraph, Vertex, FreeEndBC
from wgnet.spectral import (SpectralError, eigenfunction, find_eigenvalues,
                            green_via_scattering, network_smatrix,
                            scattering_solution)

from graphs import (LAM0, LAM1, random_graph, random_symmetric_orthogonal,
                    single_edge, spider, star, two_port_chain)
from oracles import half_line_green, scan_abs_minima, two_port_chain_smatrix


def ctx_for(graph, lam, eps):
    return SpectralContext.for_graph(graph, lam, eps)


# --------------------------- eigenvalues ---------------------------

def test_single_edge_separable_spectrum():
    g = single_edge(length=1.0)
    eps = 0.1
    hi = LAM0 + (eps * np.pi * 5.5) ** 2
    result = find_eigenvalues(g, eps, (LAM0, hi))
    lams = result.lams()
    assert len(lams) == 5
    expected = LAM0 + eps ** 2 * np.pi ** 2 * np.arange(1, 6) ** 2
    np.testing.assert_allclose(lams, expected, rtol=1e-10)
    assert all(ev.multiplicity == 1 for ev in result)


def test_neumann_star_matches_independent_oracle():
    """3-star, Kirchhoff center, Neumann tips, unit lengths.

    Oracle: cosine/sine ansatz from each tip, continuity + flux at the
    center, assembled without any solver code; zeros of its determinant and
    their null-space dimensions fix the spectrum and multiplicities.
    """
    def oracle_matrix(k):
        M = np.zeros((6, 6))
        c, s = np.cos(k), np.sin(k)
        for e in range(3):
            M[e, 2 * e + 1] = 1.0              # tip Neumann: sine coefficient dies
        M[3, 0:2] = [c, s]
        M[3, 2:4] = [-c, -s]                   # value(e0) = value(e1) at center
        M[4, 2:4] = [c, s]
        M[4, 4:6] = [-c, -s]                   # value(e1) = value(e2)
        M[5, 0::2] = k * s                     # Kirchhoff flux at the center
        M[5, 1::2] = -k * c
        return M

    zeros = scan_abs_minima(lambda k: np.linalg.det(oracle_matrix(k)), 0.3, 7.5, 900)
    mults = [int(np.sum(np.linalg.svd(oracle_matrix(k), compute_uv=False) < 1e-6))
             for k in zeros]

    g = star(3, tips="neumann")
    eps = 0.5
    lam_hi = LAM0 + (eps * 7.5) ** 2
    assert lam_hi < LAM1
    result = find_eigenvalues(g, eps, (LAM0, lam_hi))
    got_k = np.array([ev.k for ev in result])
    keep = (zeros > got_k[0] - 0.1)
    np.testing.assert_allclose(got_k, zeros[keep][:len(got_k)], atol=1e-9)
    assert [ev.multiplicity for ev in result] == mults[:len(got_k)]
    # cosine modes: simple at k = mπ (all edges equal), double at cos k = 0
    np.testing.assert_allclose(got_k[:4], [np.pi / 2, np.pi, 3 * np.pi / 2, 2 * np.pi],
                               atol=1e-9)
    assert [ev.multiplicity for ev in result][:4] == [2, 1, 2, 1]


def test_empty_interval_gives_empty_list():
    g = single_edge(length=1.0)
    eps = 0.1
    lo = LAM0 + (eps * np.pi * 1.2) ** 2
    hi = LAM0 + (eps * np.pi * 1.8) ** 2
    assert len(find_eigenvalues(g, eps, (lo, hi))) == 0


def test_unbounded_graph_rejected():
    g = spider(KirchhoffCondition(3))
    with pytest.raises(SpectralError, match="leads"):
        find_eigenvalues(g, 0.1, (LAM0 + 0.1, LAM0 + 1.0))


def test_interval_outside_band_rejected():
    g = single_edge()
    with pytest.raises(SpectralError, match="outside"):
        find_eigenvalues(g, 0.1, (LAM0 - 5.0, LAM0 - 1.0))


def test_interlacing_count_single_edge():
    g = single_edge(length=1.3)
    for eps in (0.2, 0.35):
        result = find_eigenvalues(g, eps)
        expected = int(np.floor(np.sqrt(LAM1 - LAM0) * 1.3 / (eps * np.pi)))
        assert len(result.flat()) == expected


def test_eigenvalues_match_determinant_scan():
    """find_eigenvalues vs a 10× finer brute-force |D| zero scan."""
    g = star(2, lengths=[1.0, 0.5], tips="dirichlet")  # rational ratio 2:1
    eps = 0.6
    result = find_eigenvalues(g, eps, (LAM0 + 0.5, LAM0 + (eps * 7.0) ** 2))

    def det_of_k(k):
        return secular_determinant(g, SpectralContext.from_k(g, k, eps))

    k_lo, k_hi = np.sqrt(0.5) / eps, 7.0
    n_fine = int((k_hi - k_lo) * g.max_finite_length * 20000)
    zeros = scan_abs_minima(det_of_k, k_lo, k_hi, n_fine)
    got = np.array([ev.k for ev in result])
    assert len(got) == len(zeros)
    np.testing.assert_allclose(got, zeros, atol=1e-9)


# --------------------------- scattering ---------------------------

def test_spider_smatrix_equals_vertex_matrix():
    T = kirchhoff_matrix(3)
    g = spider(KirchhoffCondition(3))
    for lam in np.linspace(LAM0 + 0.2, LAM1 - 0.2, 20):
        S = network_smatrix(g, ctx_for(g, lam, 0.17))
        np.testing.assert_allclose(S.matrix, T, atol=1e-12)


def test_transparent_chain_is_pure_phase():
    T2 = kirchhoff_matrix(2)
    g = two_port_chain(T2, T2, length=0.9)
    ctx = ctx_for(g, LAM0 + 2.6, 0.33)
    S = network_smatrix(g, ctx)
    phase = np.exp(1j * ctx.k * 0.9)
    np.testing.assert_allclose(S.matrix, [[0, phase], [phase, 0]], atol=1e-12)
    assert abs(abs(S.matrix[0, 1]) - 1.0) < 1e-12


def test_chain_matches_redheffer_oracle():
    rng = np.random.default_rng(21)
    t_a = random_symmetric_orthogonal(rng, 2)
    t_b = random_symmetric_orthogonal(rng, 2)
    g = two_port_chain(t_a, t_b, length=1.4)
    for lam in np.linspace(LAM0 + 0.4, LAM1 - 0.6, 10):
        ctx = ctx_for(g, lam, 0.21)
        S = network_smatrix(g, ctx)
        want = two_port_chain_smatrix(t_a, t_b, np.exp(1j * ctx.k * 1.4))
        np.testing.assert_allclose(S.matrix, want, atol=1e-10)


def test_random_networks_unitary_symmetric():
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 12:
        g = random_graph(rng, with_leads=True)
        if g.n_leads == 0:
            continue
        lam = float(rng.uniform(LAM0 + 0.3, LAM1 - 0.5))
        ctx = ctx_for(g, lam, float(rng.uniform(0.1, 0.6)))
        try:
            S = network_smatrix(g, ctx)
        except Exception:
            continue
        assert S.unitarity <= 1e-10
        assert S.symmetry <= 1e-10
        checked += 1


def test_below_threshold_smatrix_real():
    rng = np.random.default_rng(41)
    for _ in range(6):
        g = random_graph(rng, with_leads=True)
        if g.n_leads == 0:
            continue
        ctx = ctx_for(g, LAM0 - float(rng.uniform(0.5, 4.0)), 0.3)
        S = network_smatrix(g, ctx)
        assert S.imag_norm <= 1e-10


def test_below_threshold_spider_smatrix_orthogonal():
    # with all channels infinite the network matrix is the junction matrix,
    # and only there is the below-threshold S orthogonal: finite edges
    # contribute real contraction factors e^{−κl}
    rng = np.random.default_rng(43)
    g = spider(ConstantCondition(random_symmetric_orthogonal(rng, 4)))
    for lam in (LAM0 - 0.7, LAM0 - 3.1):
        S = network_smatrix(g, ctx_for(g, lam, 0.3))
        assert S.imag_norm <= 1e-12
        np.testing.assert_allclose(S.matrix.real @ S.matrix.real.T,
                                   np.eye(4), atol=1e-10)


def test_below_threshold_chain_contracts():
    T2 = kirchhoff_matrix(2)
    g = two_port_chain(T2, T2, length=0.8)
    ctx = ctx_for(g, LAM0 - 1.0, 0.4)
    S = network_smatrix(g, ctx)
    kappa = ctx.k.imag
    # transparent chain below threshold: pure real decay across the edge
    np.testing.assert_allclose(
        S.matrix, [[0, np.exp(-0.8 * kappa)], [np.exp(-0.8 * kappa), 0]], atol=1e-12)


def test_scattering_solution_decays_below_threshold():
    g = spider(KirchhoffCondition(3))
    ctx = ctx_for(g, LAM0 - 1.5, 0.4)
    psi = scattering_solution(g, ctx, "l0")
    kappa = ctx.k.imag
    # outgoing part decays; the prescribed incident term grows
    a, b = psi.coeffs["l1"]
    assert b == 0
    assert abs(psi.value("l1", 2.0)) == pytest.approx(abs(a) * np.exp(-2 * kappa), rel=1e-12)


def test_scattering_requires_lead():
    g = star(3)
    ctx = ctx_for(g, LAM0 + 1.0, 0.3)
    with pytest.raises(SpectralError):
        scattering_solution(g, ctx, "e0")


# --------------------------- Green via scattering ---------------------------

def test_green_expansion_matches_direct():
    rng = np.random.default_rng(51)
    T = random_symmetric_orthogonal(rng, 3)
    g = spider(ConstantCondition(T))
    done = 0
    while done < 20:
        lam = float(rng.uniform(LAM0 + 0.3, LAM1 - 0.5))
        ctx = ctx_for(g, lam, float(rng.uniform(0.15, 0.7)))
        src = (f"l{rng.integers(3)}", float(rng.uniform(0.2, 1.5)))
        tgt = (f"l{rng.integers(3)}", float(rng.uniform(0.2, 2.5)))
        direct = green_function(g, ctx, src, tgt)
        expanded = green_via_scattering(g, ctx, src, tgt)
        assert abs(direct - expanded) <= 1e-10 * max(abs(direct), 1e-8)
        done += 1


def test_green_expansion_half_line_oracle():
    g = spider(ConstantCondition(np.eye(2)))
    eps, lam = 0.5, LAM0 + 2.0
    ctx = ctx_for(g, lam, eps)
    tau = 0.8
    for t in (0.3, 0.8, 1.7):
        got = green_via_scattering(g, ctx, ("l0", tau), ("l0", t))
        want = half_line_green(eps, ctx.k, tau, t, reflection=1.0)
        assert got == pytest.approx(want, rel=1e-12)


def test_green_expansion_real_below_threshold():
    g = spider(ConstantCondition(kirchhoff_matrix(3)))
    ctx = ctx_for(g, LAM0 - 2.0, 0.5)
    psi = scattering_solution(g, ctx, "l0")
    C = 1.0 / (ctx.epsilon ** 2 * ctx.k)
    beta = 0.5j * C * np.exp(1j * ctx.k * 0.7)
    assert abs(beta.imag) < 1e-12 * abs(beta)
    assert all(abs(a.imag) < 1e-10 and abs(b.imag) < 1e-10
               for a, b in psi.coeffs.values())


def test_green_expansion_requires_spider():
    g = star(3)
    ctx = ctx_for(g, LAM0 + 1.0, 0.3)
    with pytest.raises(SpectralError, match="spider"):
        green_via_scattering(g, ctx, ("e0", 0.3), ("e0", 0.5))


# --------------------------- eigenfunctions ---------------------------

def test_eigenfunction_single_edge():
    g = single_edge(length=1.0)
    eps = 0.25
    lam = LAM0 + (eps * np.pi) ** 2
    field = eigenfunction(g, eps, lam)
    assert field.l2_norm_sq() == pytest.approx(1.0, rel=1e-10)
    ts = np.linspace(0.1, 0.9, 9)
    got = np.abs([field.value("e0", t) for t in ts])
    want = np.sqrt(2.0) * np.abs(np.sin(np.pi * ts))
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_eigenfunction_symmetric_star_mode():
    g = star(3, tips="dirichlet")
    eps = 0.5
    lam = LAM0 + (eps * np.pi / 2) ** 2  # symmetric mode: cos(k·l) = 0
    field = eigenfunction(g, eps, lam)
    vals = [field.value(f"e{i}", 0.4) for i in range(3)]
    assert abs(vals[0] - vals[1]) < 1e-9 and abs(vals[1] - vals[2]) < 1e-9

    ctx = SpectralContext.for_graph(g, lam, eps)
    res = vertex_residuals(g, ctx, field)
    assert all(r <= 1e-8 for r in res.values())


def test_eigenfunction_rejects_non_eigenvalue():
    g = single_edge()
    with pytest.raises(SpectralError, match="not an eigenvalue"):
        eigenfunction(g, 0.25, LAM0 + 1.234)
