"""Brute-force reference computations, deliberately written without the sparse machinery."""

import numpy as np

from nonlocal_eig import kernel_eval


def double_loop_energy(grid, kernel, u):
    """sum_i sum_j K(x_i, x_j) (u~_i - u~_j)^2 h^{2d} over interior and extension nodes."""
    nodes = grid.nodes
    ut = np.concatenate([u, np.zeros(len(grid.extension))])
    hd = grid.cell_volume
    total = 0.0
    for i in range(len(nodes)):
        Ki = kernel_eval(kernel, np.repeat(nodes[i:i + 1], len(nodes), axis=0), nodes)
        total += float(np.sum(Ki * (ut[i] - ut) ** 2))
    return total * hd * hd


def dense_operator(grid, kernel):
    """T assembled entry by entry from the kernel definition."""
    nodes = grid.nodes
    n = grid.n_interior
    hd = grid.cell_volume
    T = np.zeros((n, n))
    for i in range(n):
        Ki = kernel_eval(kernel, np.repeat(nodes[i:i + 1], len(nodes), axis=0), nodes)
        T[i, :] = -Ki[:n] * hd
        T[i, i] += Ki.sum() * hd
    return T
