"""Principal eigenpair of the discrete operator and the radius sweep.

Two conventions are carried side by side: ``lambda_T`` is the smallest
eigenvalue of ``T`` and ``lambda1 = 2 * lambda_T`` is the value of the
energy quotient ``sum_ij K (u_i - u_j)^2 / sum_i u_i^2``, which is the
normalisation every closed-form bound uses.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize

from .discretize import DiscreteOperator, Grid, assemble_operator, build_grid, kernel_pairs
from .kernel import DeformationKernel

log = logging.getLogger(__name__)


@dataclass
class SpectralResult:
    lambda_T: float
    eigvec: np.ndarray
    residual: float
    iterations: int
    converged: bool
    gershgorin_bound: float
    psi_mass: float
    near_degenerate: bool = False
    gap: Optional[float] = None

    @property
    def lambda1(self) -> float:
        return 2.0 * self.lambda_T

    @property
    def relative_residual(self) -> float:
        return self.residual / self.gershgorin_bound

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda_T": self.lambda_T,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "near_degenerate": self.near_degenerate,
            "psi_mass": self.psi_mass,
        }


def _normalize(v: np.ndarray, hd: float) -> np.ndarray:
    v = v / np.sqrt(np.sum(v * v) * hd)
    s = np.sum(v)
    return -v if s < 0 else v


def smallest_eigenpair(op: DiscreteOperator, tol: float = 1e-10, maxiter: Optional[int] = None) -> SpectralResult:
    """Lowest eigenpair of T by shift-invert Lanczos (ARPACK).

    Convergence is declared when ``||T v - lambda v|| <= tol * 2 max_i d_i``
    for the unit-norm Ritz vector.  ``iterations`` counts applications of
    the shifted inverse.  Near-degeneracy is flagged when the two lowest
    eigenvalues are within ``10 * tol * 2 max_i d_i``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = op.n
    bound = op.gershgorin_bound
    hd = op.grid.cell_volume
    mass = op.kernel.psi_mass
    T = op.T
    if n == 1:
        t = float(T[0, 0])
        return SpectralResult(t, _normalize(np.ones(1), hd), 0.0, 0, True, bound, mass)
    if n == 2:
        # ARPACK needs n > k + 1; a symmetric 2x2 is solved in closed form
        w, V = np.linalg.eigh(T.toarray())
        v = V[:, 0] / np.linalg.norm(V[:, 0])
        res = float(np.linalg.norm(T @ v - w[0] * v))
        return SpectralResult(float(w[0]), _normalize(v, hd), res, 0, res <= tol * bound, bound, mass,
                              near_degenerate=bool(w[1] - w[0] <= 10 * tol * bound), gap=float(w[1] - w[0]))
    # T is PSD, so a shift just below zero keeps T - sigma I positive definite
    sigma = -1e-3 * bound
    lu = spla.splu((T - sigma * sp.identity(n, format="csr")).tocsc())
    calls = [0]

    def solve(b):
        calls[0] += 1
        return lu.solve(np.asarray(b, dtype=float))

    OPinv = spla.LinearOperator((n, n), matvec=solve, dtype=float)
    k = 2 if n >= 4 else 1
    rng = np.random.default_rng(0)
    v0 = np.abs(rng.standard_normal(n)) + 1.0
    if maxiter is None:
        maxiter = max(1000, 20 * n)
    converged = True
    try:
        w, V = spla.eigsh(T, k=k, sigma=sigma, which="LM", OPinv=OPinv, v0=v0, maxiter=maxiter, tol=0)
    except spla.ArpackNoConvergence as exc:
        converged = False
        if len(exc.eigenvalues) == 0:
            v = v0 / np.linalg.norm(v0)
            lam = float(v @ (T @ v))
            res = float(np.linalg.norm(T @ v - lam * v))
            return SpectralResult(lam, _normalize(v, hd), res, calls[0], False, bound, mass)
        w, V = exc.eigenvalues, exc.eigenvectors
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    v = V[:, 0] / np.linalg.norm(V[:, 0])
    lam = float(v @ (T @ v))
    res = float(np.linalg.norm(T @ v - lam * v))
    converged = converged and res <= tol * bound
    gap = float(w[1] - w[0]) if len(w) > 1 else None
    near = gap is not None and gap <= 10 * tol * bound
    if not converged:
        log.warning("eigensolver did not reach relative residual %.2e (got %.2e)", tol, res / bound)
    return SpectralResult(lam, _normalize(v, hd), res, calls[0], converged, bound, mass,
                          near_degenerate=near, gap=gap)


def dense_smallest_eigenpair(op: DiscreteOperator) -> tuple[float, np.ndarray]:
    """Full dense eigendecomposition; the oracle for small problems."""
    w, V = sla.eigh(op.T.toarray())
    return float(w[0]), _normalize(V[:, 0], op.grid.cell_volume)


def rayleigh_quotient(grid: Grid, kernel: DeformationKernel, u) -> float:
    """Discrete energy quotient of the zero-extended vector.

    Evaluated from the kernel values directly, not through ``T``:
    ``sum_{i,j} K(x_i,x_j) (u~_i - u~_j)^2 h^{2d} / sum_i u_i^2 h^d`` with
    both indices over interior and extension nodes.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_interior,):
        raise ValueError("vector length does not match the interior node count")
    if not np.any(u):
        raise ValueError("Rayleigh quotient of the zero vector is undefined")
    K = kernel_pairs(grid, kernel).tocoo()
    n = grid.n_interior
    hd = grid.cell_volume
    ut = np.concatenate([u, np.zeros(len(grid.extension))])
    # rows are interior only; pairs with both ends exterior contribute nothing,
    # and (interior, exterior) pairs appear once here but twice in the full sum
    diff2 = (ut[K.row] - ut[K.col]) ** 2
    inner = K.col < n
    energy = np.sum(K.data[inner] * diff2[inner]) + 2.0 * np.sum(K.data[~inner] * diff2[~inner])
    return float(energy * hd * hd / (np.sum(u * u) * hd))


@dataclass
class SweepRow:
    R: float
    h: float
    lambda1: float
    lambda_T: float
    iterations: int
    residual: float
    converged: bool
    min_eigvec: float
    n_interior: int


@dataclass
class ConvergenceTable:
    rows: list[SweepRow] = field(default_factory=list)
    limit: float = float("nan")
    method: str = "last-value"
    psi_mass: float = float("nan")

    def column(self) -> np.ndarray:
        return np.array([r.lambda1 for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "h", "lambda1", "lambda_T", "iterations", "residual", "converged"])
        for r in self.rows:
            w.writerow([repr(float(r.R)), repr(float(r.h)), repr(float(r.lambda1)), repr(float(r.lambda_T)),
                        int(r.iterations), repr(float(r.residual)), str(bool(r.converged)).lower()])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {
            "rows": [
                {"R": r.R, "h": r.h, "lambda1": r.lambda1, "lambda_T": r.lambda_T,
                 "iterations": r.iterations, "residual": r.residual, "converged": r.converged}
                for r in self.rows
            ],
            "limit": self.limit,
            "limit_method": self.method,
            "psi_mass": self.psi_mass,
        }


SpacingRule = Union[float, Callable[[float], float]]


def _spacing(rule: SpacingRule, R: float) -> float:
    return float(rule(R)) if callable(rule) else float(rule)


def extrapolate_power_tail(radii: Sequence[float], values: Sequence[float]) -> tuple[float, str]:
    """Fit ``lam(R) = lam_inf + c R^-p`` through the last three points.

    Falls back to the last value when the tail is not monotone or the fit
    has no positive exponent.
    """
    if len(values) < 3:
        return float(values[-1]), "last-value"
    R1, R2, R3 = (float(r) for r in radii[-3:])
    l1, l2, l3 = (float(v) for v in values[-3:])
    d1, d2 = l1 - l2, l2 - l3
    if d1 <= 0 or d2 <= 0:
        return l3, "last-value"
    target = d2 / d1

    def g(p):
        return (R2 ** -p - R3 ** -p) / (R1 ** -p - R2 ** -p) - target

    try:
        p = optimize.brentq(g, 1e-6, 20.0)
    except ValueError:
        return l3, "last-value"
    c = d2 / (R2 ** -p - R3 ** -p)
    return l3 - c * R3 ** -p, f"power-tail(p={p:.4g})"


def _sweep_row(kernel, R, h, tol, maxiter) -> SweepRow:
    grid = build_grid(kernel.dim, R, h, kernel.map)
    op = assemble_operator(grid, kernel)
    res = smallest_eigenpair(op, tol=tol, maxiter=maxiter)
    return SweepRow(R, h, res.lambda1, res.lambda_T, res.iterations, res.residual, res.converged,
                    float(np.min(res.eigvec)), op.n)


def sweep_radius(
    kernel: DeformationKernel,
    radii: Sequence[float],
    spacing: SpacingRule,
    tol: float = 1e-10,
    maxiter: Optional[int] = None,
    jobs: int = 1,
    extrapolate: bool = True,
) -> ConvergenceTable:
    """lambda1(B_R) for increasing radii; rows are independent and may run concurrently."""
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("need at least one radius")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    hs = [_spacing(spacing, R) for R in radii]
    for R, h in zip(radii, hs):
        if not (0 < h <= R / 4):
            raise ValueError(f"spacing {h} at R={R} violates 0 < h <= R/4")
    if jobs > 1 and len(radii) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda rh: _sweep_row(kernel, rh[0], rh[1], tol, maxiter), zip(radii, hs)))
    else:
        rows = [_sweep_row(kernel, R, h, tol, maxiter) for R, h in zip(radii, hs)]
    table = ConvergenceTable(rows=rows, psi_mass=kernel.psi_mass)
    vals = [r.lambda1 for r in rows]
    if extrapolate:
        table.limit, table.method = extrapolate_power_tail(radii, vals)
    else:
        table.limit, table.method = vals[-1], "last-value"
    return table
