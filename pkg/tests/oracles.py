"""Independent oracles: brute-force references the solver code never touches."""

from __future__ import annotations

import numpy as np


def kirchhoff_scattering_brute_force(d):
    """Vertex scattering matrix from continuity + zero flux, solved per column.

    Incident wave e^{-ikt} on channel p, outgoing r_j e^{ikt}: continuity of
    the vertex value and a vanishing derivative sum give a d×d linear system
    (k drops out).  Wholly independent of the closed form.
    """
    T = np.zeros((d, d))
    for p in range(d):
        # unknowns r_0..r_{d-1}; value on channel j at the vertex: δ_{jp} + r_j
        # rows 0..d-2: value_j − value_{j+1} = 0;  row d-1: Σ_j (r_j − δ_{jp}) = 0
        A = np.zeros((d, d))
        rhs = np.zeros(d)
        for j in range(d - 1):
            A[j, j] = 1.0
            A[j, j + 1] = -1.0
            rhs[j] = -(1.0 if j == p else 0.0) + (1.0 if j + 1 == p else 0.0)
        A[d - 1, :] = 1.0
        rhs[d - 1] = 1.0
        T[:, p] = np.linalg.solve(A, rhs)
    return T


def two_port_chain_smatrix(t_a, t_b, phase):
    """Redheffer-style composition of two 2-ports over an interior link.

    Port 1 of each junction is its lead, port 2 faces the interior edge,
    which multiplies amplitudes by `phase` per traversal.
    """
    a, b = np.asarray(t_a, dtype=complex), np.asarray(t_b, dtype=complex)
    den = 1.0 - a[1, 1] * b[1, 1] * phase ** 2
    s = np.empty((2, 2), dtype=complex)
    s[0, 0] = a[0, 0] + a[0, 1] * a[1, 0] * b[1, 1] * phase ** 2 / den
    s[1, 0] = b[0, 1] * a[1, 0] * phase / den
    s[0, 1] = a[0, 1] * b[1, 0] * phase / den
    s[1, 1] = b[0, 0] + b[0, 1] * b[1, 0] * a[1, 1] * phase ** 2 / den
    return s


def fd_interval_green(length, epsilon, lam_shift, tau, n=20000,
                      bc=("dirichlet", "dirichlet")):
    """Finite-difference Green function of −ε²g″ − (λ−λ0)g = δ_τ on (0, l).

    Returns (grid, g).  Dirichlet ends drop the boundary node; Neumann ends
    keep it with a reflected ghost.  The δ is a 1/h unit load at the nearest
    node (τ should sit on a node for a clean comparison).
    """
    h = length / n
    i_lo = 0 if bc[0] == "neumann" else 1
    i_hi = n if bc[1] == "neumann" else n - 1
    idx = np.arange(i_lo, i_hi + 1)
    t = idx * h
    m = len(idx)
    c = epsilon ** 2 / h ** 2
    A = np.zeros((m, m), dtype=complex)
    for row, i in enumerate(idx):
        A[row, row] = 2.0 * c - lam_shift
        for di in (-1, +1):
            j = i + di
            if i_lo <= j <= i_hi:
                A[row, row + di] -= c
            elif (j < 0 and bc[0] == "neumann") or (j > n and bc[1] == "neumann"):
                A[row, row - di] -= c  # ghost reflection across the wall
            # else: Dirichlet neighbor, zero contribution
    rhs = np.zeros(m, dtype=complex)
    rhs[int(np.argmin(np.abs(t - tau)))] = 1.0 / h
    return t, np.linalg.solve(A, rhs)


def half_line_green(epsilon, k, tau, t, reflection):
    """Green function on [0, ∞) with a prescribed reflection coefficient at 0."""
    pref = 1j / (2.0 * epsilon ** 2 * k)
    return pref * (np.exp(1j * k * np.abs(t - tau))
                   + reflection * np.exp(1j * k * (t + tau)))


def scan_abs_minima(f, x_lo, x_hi, n, depth=80):
    """Locations where |f| dips to (numerical) zero on [x_lo, x_hi].

    Dense scan plus golden-section refinement of every interior local
    minimum of |f|; keeps minima at least 1e6 times below the scan median.
    """
    xs = np.linspace(x_lo, x_hi, n)
    vals = np.array([abs(f(x)) for x in xs])
    floor = np.median(vals)
    out = []
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    for i in range(1, n - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            a, b = xs[i - 1], xs[i + 1]
            x1 = b - inv * (b - a)
            x2 = a + inv * (b - a)
            f1, f2 = abs(f(x1)), abs(f(x2))
            for _ in range(depth):
                if f1 < f2:
                    b, x2, f2 = x2, x1, f1
                    x1 = b - inv * (b - a)
                    f1 = abs(f(x1))
                else:
                    a, x1, f1 = x1, x2, f2
                    x2 = a + inv * (b - a)
                    f2 = abs(f(x2))
                if b - a < 1e-13 * max(1.0, abs(b)):
                    break
            x_star = 0.5 * (a + b)
            if abs(f(x_star)) < 1e-6 * max(floor, 1e-300):
                out.append(x_star)
    return np.array(out)


def fit_order(eps_values, errors):
    """Least-squares slope of log err vs log ε."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])
