"""Eigenvalues of −ε²Δ on bounded planar networks (Dirichlet everywhere)."""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .geometry import Geometry, GeometryError, build_grid


class EigenSolveError(RuntimeError):
    """Shift-invert iteration failed to deliver the requested eigenvalues."""


def network_eigenvalues_2d(geometry: Geometry, epsilon: float, h: float,
                           count: int, lambda_min: float | None = None):
    """The `count` smallest eigenvalues of −ε²Δ_h with their residuals.

    Shift-invert Lanczos around a shift below the spectrum bottom (default
    half the narrowest channel's transverse threshold), swept upward if a
    window comes back short.  Returns a list of (λ, residual) pairs with
    residual = ‖A x − λ x‖₂ for the normalized eigenvector.
    """
    if not geometry.is_bounded:
        raise GeometryError("network eigensolve needs a bounded geometry "
                            "(finite leads only)")
    if h > epsilon / 10.0 + 1e-12:
        raise GeometryError(f"h = {h} too coarse: need h <= epsilon/10 = {epsilon / 10:g}")
    grid = build_grid(geometry, h)
    A = (epsilon ** 2) * grid.laplacian().tocsc()
    if lambda_min is None:
        lambda_min = 0.5 * epsilon ** 2 * (math.pi / geometry.min_feature()) ** 2

    collected: dict[float, float] = {}
    sigma = lambda_min
    k = min(count + 4, grid.n - 2)
    if k < count:
        raise EigenSolveError(f"grid has only {grid.n} unknowns for {count} eigenvalues")
    for _ in range(8):
        try:
            vals, vecs = eigsh(A, k=k, sigma=sigma, which="LM")
        except ArpackNoConvergence as exc:
            raise EigenSolveError(
                f"shift-invert at sigma={sigma:.6g} did not converge "
                f"({len(exc.eigenvalues)} of {k} eigenpairs after the ARPACK "
                f"iteration limit)") from exc
        order = np.argsort(vals)
        for idx in order:
            lam = float(vals[idx])
            if lam < lambda_min:
                continue
            x = vecs[:, idx]
            res = float(np.linalg.norm(A @ x - lam * x))
            key = min(collected, key=lambda c: abs(c - lam), default=None)
            if key is None or abs(key - lam) > 1e-9 * max(1.0, abs(lam)):
                collected[lam] = res
        if len(collected) >= count:
            break
        sigma = max(vals) + 1e-6  # sweep the shift upward
    else:
        raise EigenSolveError(f"found only {len(collected)} of {count} eigenvalues")

    pairs = sorted(collected.items())[:count]
    return [(lam, res) for lam, res in pairs]
