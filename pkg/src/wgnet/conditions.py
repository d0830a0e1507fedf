"""Vertex scattering matrices and their threshold eigenstructure.

A junction of degree d couples the d incident edge waves through a
λ-dependent d×d matrix T(λ): unitary and symmetric in the propagating band
(λ0, λ1), real orthogonal below λ0.  Three representations are supported
(exact Kirchhoff, constant matrix, λ-tabulated with linear interpolation),
plus the decomposition of T(λ0) into ±1 eigenprojections that drives the
near-threshold limit problem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_ANALYTIC_TOL = 1e-10
DEFAULT_TABULATED_TOL = 1e-6
DEFAULT_SNAP_TOL = 1e-6


class ConditionError(ValueError):
    """Invalid vertex-condition data or evaluation outside its domain."""


# --------------------------- matrix codecs ---------------------------

def matrix_to_pairs(matrix: np.ndarray) -> list:
    """Encode a complex matrix as rows of [re, im] pairs."""
    m = np.asarray(matrix, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def pairs_to_matrix(rows: list) -> np.ndarray:
    """Decode rows of [re, im] pairs into a complex matrix."""
    try:
        m = np.array([[complex(p[0], p[1]) for p in row] for row in rows])
    except (TypeError, IndexError) as exc:
        raise ConditionError(f"malformed complex-matrix encoding: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ConditionError(f"matrix must be square and nonempty, got shape {m.shape}")
    return m


# --------------------------- closed forms ---------------------------

def kirchhoff_matrix(d: int) -> np.ndarray:
    """Scattering matrix of a degree-d Kirchhoff vertex.

    Continuity plus zero flux gives reflection 2/d − 1 and transmission
    2/d; the result is real symmetric, an involution, with eigenvalue +1
    on constants and −1 on their orthogonal complement.
    """
    if d < 2:
        raise ConditionError(f"Kirchhoff vertex needs degree >= 2, got {d}")
    return (2.0 / d) * np.ones((d, d)) - np.eye(d)


# --------------------------- condition variants ---------------------------

@dataclass(frozen=True)
class KirchhoffCondition:
    degree: int

    is_analytic = True

    def __post_init__(self):
        if self.degree < 2:
            raise ConditionError(f"Kirchhoff vertex needs degree >= 2, got {self.degree}")

    def evaluate(self, lam):
        T = kirchhoff_matrix(self.degree).astype(complex)
        if np.ndim(lam) == 0:
            return T
        return np.broadcast_to(T, (np.shape(lam)[0],) + T.shape)


class ConstantCondition:
    """λ-independent scattering matrix."""

    is_analytic = True

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConditionError(f"condition matrix must be square, got shape {m.shape}")
        self.matrix = m
        self.matrix.setflags(write=False)

    @property
    def degree(self) -> int:
        return self.matrix.shape[0]

    def evaluate(self, lam):
        if np.ndim(lam) == 0:
            return self.matrix
        return np.broadcast_to(self.matrix, (np.shape(lam)[0],) + self.matrix.shape)

    def __eq__(self, other):
        return isinstance(other, ConstantCondition) and np.array_equal(self.matrix, other.matrix)


class TabulatedCondition:
    """Entrywise-linear interpolation of T on a strictly increasing λ grid.

    Interpolated matrices are *not* re-unitarized; deviations surface in
    validate_condition instead of being masked by projection.
    """

    is_analytic = False

    def __init__(self, grid, matrices, lambda0=None, allow_extrapolation=False):
        grid = np.asarray(grid, dtype=float)
        matrices = np.asarray(matrices, dtype=complex)
        if grid.ndim != 1 or len(grid) < 1:
            raise ConditionError("tabulation grid must be a nonempty 1-D array")
        if np.any(np.diff(grid) <= 0):
            raise ConditionError("tabulation grid must be strictly increasing")
        if matrices.ndim != 3 or matrices.shape[0] != len(grid) or matrices.shape[1] != matrices.shape[2]:
            raise ConditionError(
                f"need one square matrix per grid point, got shape {matrices.shape} "
                f"for {len(grid)} grid points")
        self.grid = grid
        self.matrices = matrices
        self.lambda0 = lambda0
        self.allow_extrapolation = allow_extrapolation

    @property
    def degree(self) -> int:
        return self.matrices.shape[1]

    def __eq__(self, other):
        return (isinstance(other, TabulatedCondition)
                and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.matrices, other.matrices)
                and self.lambda0 == other.lambda0)

    def evaluate(self, lam):
        scalar = np.ndim(lam) == 0
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        if not self.allow_extrapolation:
            lo, hi = self.grid[0], self.grid[-1]
            bad = (lam_arr < lo) | (lam_arr > hi)
            if np.any(bad):
                raise ConditionError(
                    f"lambda={lam_arr[bad][0]:.9g} outside tabulated range "
                    f"[{lo:.9g}, {hi:.9g}]")
        if len(self.grid) == 1:
            out = np.broadcast_to(self.matrices[0], (len(lam_arr),) + self.matrices[0].shape).copy()
        else:
            idx = np.clip(np.searchsorted(self.grid, lam_arr) - 1, 0, len(self.grid) - 2)
            x0 = self.grid[idx]
            x1 = self.grid[idx + 1]
            w = ((lam_arr - x0) / (x1 - x0))[:, None, None]
            out = (1.0 - w) * self.matrices[idx] + w * self.matrices[idx + 1]
        return out[0] if scalar else out


@dataclass(frozen=True)
class ProjectionCondition:
    """Decoupled threshold rows: Dirichlet on ran P, Neumann on ran P⊥.

    w_minus / w_plus hold orthonormal bases (columns) of the −1 / +1
    eigenspaces of T(λ0); the vertex rows are w_minusᵀ·ς(0) = 0 and
    w_plusᵀ·ς′(0) = 0.
    """

    w_minus: np.ndarray
    w_plus: np.ndarray

    is_analytic = True

    @property
    def degree(self) -> int:
        return self.w_minus.shape[0]

    def evaluate(self, lam):
        raise ConditionError("projection conditions have no scattering matrix; "
                             "they define vertex rows directly")


VertexCondition = (KirchhoffCondition, ConstantCondition, TabulatedCondition, ProjectionCondition)


def default_tolerance(condition) -> float:
    return DEFAULT_ANALYTIC_TOL if condition.is_analytic else DEFAULT_TABULATED_TOL


def evaluate(condition, lam, lambda1=None):
    """T_v(λ), guarded against the multi-mode regime λ >= λ1."""
    if lambda1 is not None and np.any(np.real(np.atleast_1d(lam)) >= lambda1):
        raise ConditionError(f"lambda >= lambda1={lambda1:.9g}: above the single-mode band")
    return condition.evaluate(lam)


# --------------------------- validation ---------------------------

@dataclass(frozen=True)
class ValidationReport:
    """Max deviations of T(λ) from its band-dependent symmetry class."""

    tolerance: float
    n_band: int            # samples in (lambda0, lambda1)
    n_below: int           # samples below lambda0
    max_unitarity: float   # ‖T·T* − I‖₂ over band samples
    max_symmetry: float    # ‖T − Tᵀ‖₂ over band samples
    max_imag: float        # ‖Im T‖₂ over below-threshold samples
    max_orthogonality: float  # ‖T·Tᵀ − I‖₂ over below-threshold samples

    @property
    def passed(self) -> bool:
        return max(self.max_unitarity, self.max_symmetry,
                   self.max_imag, self.max_orthogonality) <= self.tolerance


def validate_condition(condition, lambda_samples, lambda0, lambda1=None,
                       tolerance=None) -> ValidationReport:
    """Check unitarity/symmetry in the band and reality/orthogonality below it."""
    tol = default_tolerance(condition) if tolerance is None else tolerance
    band, below = [], []
    for lam in np.atleast_1d(np.asarray(lambda_samples, dtype=float)):
        if lambda1 is not None and lam >= lambda1:
            raise ConditionError(f"sample lambda={lam:.9g} >= lambda1")
        T = condition.evaluate(lam)
        (band if lam > lambda0 else below).append(T)

    eye = np.eye(condition.degree)
    norm = lambda m: float(np.linalg.norm(m, 2))
    mu = max((norm(T @ T.conj().T - eye) for T in band), default=0.0)
    ms = max((norm(T - T.T) for T in band), default=0.0)
    mi = max((norm(T.imag) for T in below), default=0.0)
    mo = max((norm(T @ T.T - eye) for T in below), default=0.0)
    return ValidationReport(tolerance=tol, n_band=len(band), n_below=len(below),
                            max_unitarity=mu, max_symmetry=ms,
                            max_imag=mi, max_orthogonality=mo)


# --------------------------- threshold decomposition ---------------------------

@dataclass(frozen=True)
class ThresholdDecomposition:
    """±1 eigenprojections of T(λ0).

    p projects on the −1 eigenspace (k Dirichlet-type conditions), p_perp
    on the +1 eigenspace (d−k Neumann-type conditions).  classification is
    "dirichlet" for k = d, "kirchhoff" for k = d−1 with a constant +1
    eigenvector, otherwise "mixed" (which includes the all-Neumann k = 0).
    """

    p: np.ndarray
    p_perp: np.ndarray
    k: int
    w_minus: np.ndarray
    w_plus: np.ndarray
    classification: str

    @property
    def degree(self) -> int:
        return self.p.shape[0]

    def projection_condition(self) -> ProjectionCondition:
        return ProjectionCondition(w_minus=self.w_minus, w_plus=self.w_plus)


def threshold_decomposition(condition, lambda0, snap_tol=DEFAULT_SNAP_TOL,
                            allow_extrapolation=False) -> ThresholdDecomposition:
    """Decompose T(λ0) into its ±1 eigenprojections.

    T(λ0) must be symmetric and (within snap_tol) an involution: every
    eigenvalue of sym(Re T(λ0)) is snapped to ±1 or rejected.
    """
    if isinstance(condition, TabulatedCondition) and allow_extrapolation:
        condition = TabulatedCondition(condition.grid, condition.matrices,
                                       lambda0=condition.lambda0, allow_extrapolation=True)
    T0 = condition.evaluate(lambda0)
    d = condition.degree
    sym_dev = float(np.linalg.norm(T0 - T0.T, 2))
    if sym_dev > max(snap_tol, 1e3 * DEFAULT_TABULATED_TOL):
        raise ConditionError(f"T(lambda0) is not symmetric: ‖T − Tᵀ‖ = {sym_dev:.3e}")
    S = 0.5 * (T0.real + T0.real.T)
    evals, evecs = np.linalg.eigh(S)
    off = np.abs(np.abs(evals) - 1.0)
    if np.any(off > snap_tol):
        worst = evals[np.argmax(off)]
        raise ConditionError(
            f"eigenvalue {worst:.9g} of T(lambda0) is farther than {snap_tol:g} from ±1")

    minus = evals < 0
    w_minus = evecs[:, minus]
    w_plus = evecs[:, ~minus]
    k = int(np.count_nonzero(minus))
    p = w_minus @ w_minus.T
    p_perp = w_plus @ w_plus.T

    if k == d:
        label = "dirichlet"
    elif k == d - 1 and _is_constant_vector(w_plus[:, 0]):
        label = "kirchhoff"
    else:
        label = "mixed"
    return ThresholdDecomposition(p=p, p_perp=p_perp, k=k,
                                  w_minus=w_minus, w_plus=w_plus, classification=label)


def _is_constant_vector(v, tol=1e-10) -> bool:
    return float(np.max(np.abs(v - np.mean(v)))) <= tol * max(1.0, float(np.max(np.abs(v))))


# --------------------------- tabulated-matrix files ---------------------------

def load_tabulated(path) -> TabulatedCondition:
    """Read the tabulated vertex-matrix file format.

    Layout: {"degree": d, "lambda0": λ0, "entries": [{"lambda": λ,
    "matrix": rows of [re, im] pairs}, ...]} with strictly increasing λ.
    Extra keys (diagnostics written by the junction tabulator) are ignored.
    """
    with open(path) as f:
        doc = json.load(f)
    for key in ("degree", "lambda0", "entries"):
        if key not in doc:
            raise ConditionError(f"tabulated file {path}: missing field '{key}'")
    entries = doc["entries"]
    if not entries:
        raise ConditionError(f"tabulated file {path}: empty entry list")
    grid, mats = [], []
    for i, entry in enumerate(entries):
        if "lambda" not in entry or "matrix" not in entry:
            raise ConditionError(f"tabulated file {path}: entry {i} needs 'lambda' and 'matrix'")
        grid.append(float(entry["lambda"]))
        m = pairs_to_matrix(entry["matrix"])
        if m.shape[0] != doc["degree"]:
            raise ConditionError(
                f"tabulated file {path}: entry {i} has size {m.shape[0]}, "
                f"declared degree {doc['degree']}")
        mats.append(m)
    try:
        return TabulatedCondition(grid, mats, lambda0=float(doc["lambda0"]))
    except ConditionError as exc:
        raise ConditionError(f"tabulated file {path}: {exc}") from exc


def save_tabulated(path, grid, matrices, lambda0, extra=None, entry_extras=None):
    """Write the tabulated vertex-matrix file format (see load_tabulated)."""
    grid = np.asarray(grid, dtype=float)
    matrices = np.asarray(matrices, dtype=complex)
    entries = []
    for i, (lam, mat) in enumerate(zip(grid, matrices)):
        entry = {"lambda": float(lam), "matrix": matrix_to_pairs(mat)}
        if entry_extras is not None:
            entry.update(entry_extras[i])
        entries.append(entry)
    doc = {"degree": int(matrices.shape[1]), "lambda0": float(lambda0), "entries": entries}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1))
