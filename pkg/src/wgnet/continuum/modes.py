"""Transverse mode bases of a channel cross-section.

Continuum closed forms (sine/cosine) feed the graph model; the discrete
counterparts of the same modes diagonalize the 3-point transverse stencil
exactly and carry the nonreflecting lead truncation of the FD solver.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


class ModeError(ValueError):
    """Unsupported or under-resolved cross-section request."""


@dataclass(frozen=True)
class ModeBasis:
    """Orthonormal eigenpairs of −d²/dy² on (0, w) with the wall BC."""

    width: float
    wall_bc: str
    n_modes: int
    lambdas: np.ndarray

    def phi(self, n: int, y):
        w = self.width
        y = np.asarray(y, dtype=float)
        if self.wall_bc == "dirichlet":
            return math.sqrt(2.0 / w) * np.sin((n + 1) * math.pi * y / w)
        if n == 0:
            return np.full_like(y, 1.0 / math.sqrt(w))
        return math.sqrt(2.0 / w) * np.cos(n * math.pi * y / w)

    def k_n(self, n: int, lam: float) -> complex:
        """Longitudinal wavenumber √(λ − λ_n), Im ≥ 0."""
        k = cmath.sqrt(lam - self.lambdas[n])
        return -k if k.imag < 0 else k


def transverse_modes(width: float, wall_bc: str, n_modes: int) -> ModeBasis:
    if width <= 0:
        raise ModeError(f"width must be positive, got {width}")
    if n_modes < 1:
        raise ModeError(f"need n_modes >= 1, got {n_modes}")
    if wall_bc == "dirichlet":
        lams = np.array([((n + 1) * math.pi / width) ** 2 for n in range(n_modes)])
    elif wall_bc == "neumann":
        lams = np.array([(n * math.pi / width) ** 2 for n in range(n_modes)])
    else:
        raise ModeError(f"unsupported wall BC variant '{wall_bc}'")
    return ModeBasis(width=float(width), wall_bc=wall_bc, n_modes=n_modes, lambdas=lams)


# --------------------------- discrete (grid) counterparts ---------------------------

def discrete_dirichlet_modes(width: float, h: float, n_modes: int):
    """Sampled sine modes and stencil eigenvalues on the interior nodes.

    The sampled continuum sines are exactly orthonormal under the h-weighted
    inner product, with transverse stencil eigenvalues
    λ_n(h) = (2/h²)(1 − cos((n+1)πh/w)).
    """
    nw = int(round(width / h))
    n_int = nw - 1
    if n_int < 3:
        raise ModeError(f"cross-section of {n_int} interior nodes is too coarse")
    n_modes = min(n_modes, n_int)
    y = h * np.arange(1, nw)
    phi = np.empty((n_int, n_modes))
    lam_h = np.empty(n_modes)
    for n in range(n_modes):
        phi[:, n] = math.sqrt(2.0 / width) * np.sin((n + 1) * math.pi * y / width)
        lam_h[n] = (2.0 / h ** 2) * (1.0 - math.cos((n + 1) * math.pi * h / width))
    return phi, lam_h


def outgoing_ghost_factor(lam: float, lam_n_h: float, h: float) -> complex:
    """e^{iκh} of the outgoing discrete wave: cos(κh) = 1 − h²(λ − λ_n(h))/2."""
    c = 1.0 - 0.5 * h * h * (lam - lam_n_h)
    if c < -1.0:
        raise ModeError(
            f"lambda={lam:.6g} is above the discrete band for spacing h={h:g}; "
            f"refine the grid")
    if c <= 1.0:
        return complex(c, math.sqrt(1.0 - c * c))
    return complex(c - math.sqrt(c * c - 1.0), 0.0)


def discrete_wavenumber(lam: float, lam_n_h: float, h: float) -> float:
    """Real propagating κ with cos(κh) = 1 − h²(λ − λ_n(h))/2 (λ above λ_n(h))."""
    c = 1.0 - 0.5 * h * h * (lam - lam_n_h)
    if not -1.0 <= c < 1.0:
        raise ModeError(f"mode is not propagating at lambda={lam:.6g}")
    return math.acos(c) / h
