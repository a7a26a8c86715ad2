"""Midpoint-rule discretization of the Dirichlet-constrained operator on B_R.

Nodes are cell centres ``(k + 1/2) h`` of a uniform lattice.  Interior
nodes lie strictly inside B_R; extension nodes are the remaining lattice
points the kernel can reach from the interior, where the zero exterior
value is imposed.  The assembled matrix is ``T = D - W`` with

    W_ij = K(x_i, x_j) h^d            (i, j interior)
    d_i  = sum_j K(x_i, x_j) h^d      (j interior or extension)

so that ``<T u, u> h^d`` equals half the discrete double-sum energy of the
zero-extended vector exactly.
"""

from __future__ import annotations

import itertools
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .kernel import DeformationKernel, MapSpec, profile_eval

DEFAULT_MAX_NODES = 4_000_000
DEFAULT_MAX_NNZ = 60_000_000


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    radius: float
    spacing: float
    interior: np.ndarray
    extension: np.ndarray
    reach: float

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes first, then extension nodes."""
        return np.vstack([self.interior, self.extension])


def lattice_points(d: int, h: float, radius: float, strict: bool = True) -> np.ndarray:
    """Cell centres of the h-lattice with |x| < radius (or <= if not strict)."""
    kmax = int(np.ceil(radius / h))
    ks = np.arange(-kmax, kmax)
    centres = (ks + 0.5) * h
    if d == 1:
        pts = centres[:, None]
    else:
        mesh = np.meshgrid(*([centres] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    r = np.linalg.norm(pts, axis=1)
    keep = r < radius if strict else r <= radius
    return pts[keep]


def count_interior_nodes(d: int, R: float, h: float) -> int:
    """Number of cell centres strictly inside B_R, by direct enumeration."""
    kmax = int(np.ceil(R / h))
    count = 0
    for k in itertools.product(range(-kmax, kmax), repeat=d):
        if sum(((ki + 0.5) * h) ** 2 for ki in k) < R * R:
            count += 1
    return count


def build_grid(d: int, R: float, h: float, map: MapSpec, max_nodes: int = DEFAULT_MAX_NODES) -> Grid:
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if map.dim != d:
        raise ValueError("map dimension does not match grid dimension")
    if not h > 0:
        raise ValueError("spacing must be positive")
    if h >= 2 * R or R < h:
        raise ValueError(f"spacing h={h} too coarse for radius R={R}")
    fwd_reach, inv_reach = map.reach_radii(R)
    reach = max(fwd_reach + 1.0, inv_reach, R)
    est = (2 * np.ceil(reach / h)) ** d
    if est > max_nodes * (2 ** d):
        raise MemoryError(f"grid would need about {est:.3g} lattice cells (cap {max_nodes})")
    interior = lattice_points(d, h, R)
    everything = lattice_points(d, h, reach)
    outside = np.linalg.norm(everything, axis=1) >= R
    extension = everything[outside]
    if len(interior) + len(extension) > max_nodes:
        raise MemoryError(f"{len(interior) + len(extension)} nodes exceed the cap of {max_nodes}")
    if len(interior) == 0:
        raise ValueError("no interior nodes; decrease the spacing")
    return Grid(d, float(R), float(h), interior, extension, float(reach))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    kernel: DeformationKernel
    W: sp.csr_matrix
    diag: np.ndarray

    @property
    def T(self) -> sp.csr_matrix:
        return (sp.diags(self.diag) - self.W).tocsr()

    @property
    def n(self) -> int:
        return self.grid.n_interior

    @property
    def gershgorin_bound(self) -> float:
        """Upper bound 2 max_i d_i on the spectrum of T."""
        return 2.0 * float(np.max(self.diag))

    def matvec(self, u) -> np.ndarray:
        return apply_operator(self, u)

    def dump_triplets(self, path) -> None:
        dump_triplets(self.T, path)


def kernel_pairs(grid: Grid, kernel: DeformationKernel) -> sp.csr_matrix:
    """Sparse n_interior x n_all matrix of K(x_i, y_j), y over interior+extension."""
    X = grid.interior
    Y = grid.nodes
    a = kernel.map.forward
    aY = a(Y)
    aX = aY[: len(X)]
    r = 1.0 + 1e-9
    rows, cols = [], []
    # psi(y - a(x)) nonzero only for y near a(x)
    pairs = cKDTree(aX).sparse_distance_matrix(cKDTree(Y), r, output_type="ndarray")
    rows.append(pairs["i"])
    cols.append(pairs["j"])
    # psi(x - a(y)) nonzero only for a(y) near x
    pairs = cKDTree(X).sparse_distance_matrix(cKDTree(aY), r, output_type="ndarray")
    rows.append(pairs["i"])
    cols.append(pairs["j"])
    i = np.concatenate(rows).astype(np.int64)
    j = np.concatenate(cols).astype(np.int64)
    # unique (i, j), then evaluate the full two-term kernel once per pair
    key = np.unique(i * len(Y) + j)
    i, j = key // len(Y), key % len(Y)
    vals = profile_eval(kernel.profile, Y[j] - aX[i]) + profile_eval(kernel.profile, X[i] - aY[j])
    nz = vals != 0
    return sp.csr_matrix((vals[nz], (i[nz], j[nz])), shape=(len(X), len(Y)))


def assemble_operator(grid: Grid, kernel: DeformationKernel, max_nnz: int = DEFAULT_MAX_NNZ) -> DiscreteOperator:
    if grid.dim != kernel.dim:
        raise ValueError("grid and kernel dimensions differ")
    # rough nnz estimate from the kernel footprint: two unit balls per row
    from .kernel import unit_ball_volume

    est = 2 * grid.n_interior * (unit_ball_volume(grid.dim) / grid.cell_volume + 1)
    if est > max_nnz:
        raise MemoryError(f"operator would hold about {est:.3g} nonzeros (cap {max_nnz})")
    K = kernel_pairs(grid, kernel)
    hd = grid.cell_volume
    n = grid.n_interior
    diag = np.asarray(K.sum(axis=1)).ravel() * hd
    W = K[:, :n] * hd
    # K is symmetric by construction; averaging makes the stored matrix bitwise symmetric
    W = ((W + W.T) * 0.5).tocsr()
    W.sort_indices()
    return DiscreteOperator(grid, kernel, W, diag)


def apply_operator(op: DiscreteOperator, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[0] != op.n:
        raise ValueError(f"vector length {u.shape[0]} does not match {op.n} interior nodes")
    if u.ndim == 1:
        return op.diag * u - op.W @ u
    return op.diag[:, None] * u - op.W @ u


def dump_triplets(matrix, path) -> None:
    """Write ``row col value`` lines (zero-based) atomically."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
    os.replace(tmp, path)


def load_triplets(path, shape=None) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    rows = data[:, 0].astype(int)
    cols = data[:, 1].astype(int)
    if shape is None:
        n = int(max(rows.max(), cols.max())) + 1
        shape = (n, n)
    return sp.csr_matrix((data[:, 2], (rows, cols)), shape=shape)
