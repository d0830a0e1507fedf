"""Junction scattering matrices from the 5-point Helmholtz system.

Each truncated lead is closed by a modal radiation condition: the ghost
column behind the truncation face is expanded in the discrete transverse
modes and propagated outward with the grid dispersion factor e^{iκ_n h}.
That closure is exactly nonreflecting for the discrete operator, so mode-0
amplitudes read off at the lead mouths are uncontaminated by the cut.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .. import conditions as vc
from .geometry import Geometry, GeometryError, Grid, build_grid
from .modes import (ModeError, discrete_dirichlet_modes, discrete_wavenumber,
                    outgoing_ghost_factor, transverse_modes)

log = logging.getLogger(__name__)

DEFAULT_N_MODES = 8
MIN_POINTS_PER_WAVELENGTH = 12.0


@dataclass
class LeadModeData:
    phi: np.ndarray       # (n_trans, n_modes) sampled modes, h-orthonormal
    lam_h: np.ndarray     # discrete transverse eigenvalues
    ghosts: np.ndarray    # e^{iκ_n h} at the working λ
    kappa0: float         # propagating mode-0 wavenumber


@dataclass
class DiscreteField:
    """Grid solution of one incident-lead scattering solve."""

    grid: Grid
    lam: float
    values: np.ndarray
    incident_lead: str | None
    lead_modes: dict[str, LeadModeData]

    @property
    def h(self) -> float:
        return self.grid.h

    def cross_section(self, lead_id: str, col: int) -> np.ndarray:
        ids = self.grid.leads[lead_id].node_ids
        return self.values[ids[col]]

    def modal_trace(self, lead_id: str, n: int) -> np.ndarray:
        """c_n(t_j) = ⟨u(t_j, ·), φ_n⟩ along the lead."""
        md = self.lead_modes[lead_id]
        ids = self.grid.leads[lead_id].node_ids
        return self.h * (self.values[ids] @ md.phi[:, n])


@dataclass
class JunctionScatteringResult:
    matrix: np.ndarray
    lead_ids: tuple[str, ...]
    lam: float
    h: float
    n_modes: int
    kappa0: dict[str, float]
    evanescent: dict[str, float]   # max |c_n(face)|, n >= 1, over incidences
    fields: list[DiscreteField]
    lambda0_discrete: float
    lambda0: float
    lambda1: float


def _lead_mode_data(grid: Grid, lam: float, n_modes: int) -> dict[str, LeadModeData]:
    out = {}
    for lead in grid.geometry.leads:
        if lead.mode != "truncated":
            continue
        n_trans = grid.leads[lead.id].n_trans
        n_eff = min(n_modes, n_trans)
        if n_eff < n_modes:
            log.debug("lead %s: capping modal truncation at %d (grid supports no more)",
                      lead.id, n_eff)
        phi, lam_h = discrete_dirichlet_modes(lead.width, grid.h, n_eff)
        if not lam_h[0] < lam:
            raise ModeError(
                f"lead '{lead.id}': lambda={lam:.6g} is below the discrete "
                f"threshold {lam_h[0]:.6g}; no propagating mode")
        if len(lam_h) > 1 and lam >= lam_h[1]:
            raise ModeError(
                f"lead '{lead.id}': lambda={lam:.6g} is above the second "
                f"transverse eigenvalue {lam_h[1]:.6g}; multi-mode regime")
        ghosts = np.array([outgoing_ghost_factor(lam, ln, grid.h) for ln in lam_h])
        kappa0 = discrete_wavenumber(lam, lam_h[0], grid.h)
        if kappa0 * grid.h > 2.0 * math.pi / MIN_POINTS_PER_WAVELENGTH:
            raise ModeError(
                f"lead '{lead.id}': {2 * math.pi / (kappa0 * grid.h):.1f} points per "
                f"wavelength < {MIN_POINTS_PER_WAVELENGTH:g}; refine the grid")
        out[lead.id] = LeadModeData(phi=phi, lam_h=lam_h, ghosts=ghosts, kappa0=kappa0)
    return out


def _radiating_operator(grid: Grid, lam: float, lead_modes: dict[str, LeadModeData]):
    A = (grid.laplacian() - lam * sparse.identity(grid.n, format="csr")).astype(complex)
    blocks = []
    for lead_id, md in lead_modes.items():
        face = grid.leads[lead_id].node_ids[grid.leads[lead_id].face_col]
        dtn = (md.phi * md.ghosts[None, :]) @ md.phi.T  # Σ_n g_n φ_n φ_nᵀ
        rows = np.repeat(face, len(face))
        cols = np.tile(face, len(face))
        blocks.append(sparse.coo_matrix(
            ((-dtn / grid.h).ravel(), (rows, cols)), shape=(grid.n, grid.n)))
    return (A + sum(blocks)).tocsc() if blocks else A.tocsc()


def junction_smatrix(geometry: Geometry, lam: float, h: float,
                     n_modes: int = DEFAULT_N_MODES) -> JunctionScatteringResult:
    """Mode-0 scattering matrix of a junction with truncated leads.

    For each incident lead p the total field solves the radiating system
    with the incident mismatch on p's truncation face; t_{p,j} is the
    outgoing mode-0 coefficient at the mouth (t = 0) of lead j.
    """
    if not geometry.leads or any(l.mode != "truncated" for l in geometry.leads):
        raise GeometryError("junction scattering needs all leads truncated")
    widths = {l.width for l in geometry.leads}
    basis = transverse_modes(min(widths), "dirichlet", 2)
    grid = build_grid(geometry, h)
    lead_modes = _lead_mode_data(grid, lam, n_modes)
    A = _radiating_operator(grid, lam, lead_modes)
    lu = splu(A)

    lead_ids = tuple(l.id for l in geometry.leads)
    d = len(lead_ids)
    T = np.zeros((d, d), dtype=complex)
    fields = []
    evanescent = {lid: 0.0 for lid in lead_ids}
    for p, lead_p in enumerate(lead_ids):
        md = lead_modes[lead_p]
        ln = grid.leads[lead_p]
        F = ln.face_col
        g0 = md.ghosts[0]
        inc_face = np.conj(g0) ** F            # e^{−iκ0·L}
        rhs = np.zeros(grid.n, dtype=complex)
        rhs[ln.node_ids[F]] = (-2j * math.sin(md.kappa0 * h) * inc_face
                               * md.phi[:, 0] / h ** 2)
        u = lu.solve(rhs)
        field = DiscreteField(grid=grid, lam=lam, values=u,
                              incident_lead=lead_p, lead_modes=lead_modes)
        fields.append(field)
        for j, lead_j in enumerate(lead_ids):
            mdj = lead_modes[lead_j]
            mouth = u[grid.leads[lead_j].node_ids[0]]
            T[j, p] = h * (mouth @ mdj.phi[:, 0]) - (1.0 if j == p else 0.0)
            # leftover evanescent content at the truncation face
            face_vals = u[grid.leads[lead_j].node_ids[grid.leads[lead_j].face_col]]
            if j == p:
                face_vals = face_vals - inc_face * md.phi[:, 0]
            cn = h * (face_vals @ mdj.phi[:, 1:])
            if cn.size:
                evanescent[lead_j] = max(evanescent[lead_j], float(np.max(np.abs(cn))))

    return JunctionScatteringResult(
        matrix=T, lead_ids=lead_ids, lam=lam, h=h, n_modes=n_modes,
        kappa0={lid: lead_modes[lid].kappa0 for lid in lead_ids},
        evanescent=evanescent, fields=fields,
        lambda0_discrete=float(next(iter(lead_modes.values())).lam_h[0]),
        lambda0=float(basis.lambdas[0]), lambda1=float(basis.lambdas[1]))


# --------------------------- tabulation ---------------------------

def tabulate_junction(geometry: Geometry, lambda_grid, h: float,
                      n_modes: int = DEFAULT_N_MODES, path=None):
    """Tabulated vertex condition from a junction λ sweep.

    Each matrix is symmetrized to (T + Tᵀ)/2 with the asymmetry magnitude
    logged per entry, alongside its unitarity deviation.  Returns the
    condition and the per-entry diagnostics; `path` additionally writes the
    tabulated-matrix file (with the discrete threshold in the metadata).
    """
    widths = {l.width for l in geometry.leads}
    if len(widths) != 1:
        raise GeometryError("tabulation requires a uniform lead width")
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    mats, extras = [], []
    lam0_disc = lam0_cont = None
    for lam in lambda_grid:
        res = junction_smatrix(geometry, float(lam), h, n_modes)
        lam0_disc, lam0_cont = res.lambda0_discrete, res.lambda0
        T = res.matrix
        sym = 0.5 * (T + T.T)
        asym = float(np.linalg.norm(T - T.T, 2))
        unit = float(np.linalg.norm(sym @ sym.conj().T - np.eye(len(T)), 2))
        mats.append(sym)
        extras.append({"asymmetry": asym, "unitarity": unit,
                       "evanescent": max(res.evanescent.values())})
    cond = vc.TabulatedCondition(lambda_grid, mats, lambda0=lam0_cont)
    if path is not None:
        vc.save_tabulated(path, lambda_grid, mats, lambda0=lam0_cont,
                          extra={"h": h, "n_modes": n_modes,
                                 "lambda0_discrete": lam0_disc},
                          entry_extras=extras)
        cond.source = str(path)
    return cond, extras


# --------------------------- invariance and profiles ---------------------------

def scaling_invariance_check(geometry: Geometry, lam: float, scale: float,
                             h: float, n_modes: int = DEFAULT_N_MODES,
                             scale_grid: bool = True) -> dict:
    """Compare T on the s-contracted geometry against the reference.

    The contracted problem −s²Δu = λu equals the reference after dividing
    by s², so it is solved at λ/s² on the scaled geometry; with the grid
    scaled along (spacing s·h) the two discrete systems are identical up to
    relabeling and the deviation is pure roundoff.
    """
    ref = junction_smatrix(geometry, lam, h, n_modes)
    h_scaled = scale * h if scale_grid else h
    scaled = junction_smatrix(geometry.scaled(scale), lam / scale ** 2,
                              h_scaled, n_modes)
    dev = float(np.max(np.abs(ref.matrix - scaled.matrix)))
    return {"deviation": dev, "reference": ref.matrix, "scaled": scaled.matrix,
            "scale": scale, "grid_scaled": scale_grid}


@dataclass
class Mode0Profile:
    lead_id: str
    t: np.ndarray
    c0: np.ndarray
    residual: np.ndarray   # ‖u(t, ·) − c0(t)·φ0‖ per cross-section


def mode0_profile(field: DiscreteField, lead_id: str) -> Mode0Profile:
    """Mode-0 coefficient along a lead with the off-mode residual norm."""
    if lead_id not in field.grid.leads:
        raise GeometryError(f"no lead '{lead_id}'")
    md = field.lead_modes[lead_id]
    ids = field.grid.leads[lead_id].node_ids
    h = field.h
    vals = field.values[ids]                   # (n_cols, n_trans)
    c0 = h * (vals @ md.phi[:, 0])
    rem = vals - np.outer(c0, md.phi[:, 0])
    residual = np.sqrt(h * np.sum(np.abs(rem) ** 2, axis=1))
    t = h * np.arange(vals.shape[0])
    return Mode0Profile(lead_id=lead_id, t=t, c0=c0, residual=residual)


def fit_two_wave(profile: Mode0Profile, kappa: float, t_min: float = 0.0):
    """Least-squares (a, b) with c0(t) ≈ a·e^{iκt} + b·e^{−iκt} for t ≥ t_min.

    Returns (a, b, rms misfit).  κ should be the solver's own discrete
    wavenumber; it converges to √(λ−λ0) as h → 0.
    """
    mask = profile.t >= t_min
    t = profile.t[mask]
    design = np.column_stack([np.exp(1j * kappa * t), np.exp(-1j * kappa * t)])
    coef, *_ = np.linalg.lstsq(design, profile.c0[mask], rcond=None)
    misfit = design @ coef - profile.c0[mask]
    return complex(coef[0]), complex(coef[1]), float(np.sqrt(np.mean(np.abs(misfit) ** 2)))
