"""Structured test-matrix generators: 3D Poisson and 3D linear elasticity.

Desk-scale stand-ins for finite-element stiffness matrices: a 7-point
finite-difference Laplacian on a box with eliminated Dirichlet boundary, and
trilinear 8-node hexahedral elasticity with one clamped face.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix


@dataclass(frozen=True)
class MeshSpec:
    """Element counts and Lame parameters for the elasticity generator."""

    nx: int
    ny: int
    nz: int
    lame_lambda: float = 1.0
    lame_mu: float = 1.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("element counts must be at least 1")
        if self.lame_mu <= 0:
            raise ValueError("mu must be positive")
        if self.lame_lambda < 0:
            raise ValueError("lambda must be nonnegative")


def gen_poisson7(nx, ny, nz):
    """7-point Laplacian on an nx*ny*nz interior grid, Dirichlet eliminated.

    Returns the SPD matrix (diagonal 6, couplings -1) and an all-ones
    right-hand side.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("grid dimensions must be at least 1")
    n = nx * ny * nz

    def vid(i, j, k):
        return i + nx * (j + ny * k)

    rows, cols, vals = [], [], []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                v = vid(i, j, k)
                rows.append(v)
                cols.append(v)
                vals.append(6.0)
                for di, dj, dk in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    ii, jj, kk = i + di, j + dj, k + dk
                    if ii < nx and jj < ny and kk < nz:
                        w = vid(ii, jj, kk)
                        rows += [v, w]
                        cols += [w, v]
                        vals += [-1.0, -1.0]
    A = SparseMatrix.from_triplets(n, n, rows, cols, vals, symmetric=True)
    return A, np.ones(n)


def hex_element_stiffness(lam, mu):
    """Stiffness of a unit trilinear hexahedron, 2x2x2 Gauss quadrature.

    Node order: (i, j, k) bits with x fastest; 3 displacement dofs per node.
    """
    corners = np.array(
        [[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)], dtype=float
    )
    signs = 2.0 * corners - 1.0  # reference-cube corner signs
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[:3, :3] += 2.0 * mu * np.eye(3)
    D[3:, 3:] = mu * np.eye(3)
    gauss = np.array([-1.0, 1.0]) / np.sqrt(3.0)
    Ke = np.zeros((24, 24))
    for gx in gauss:
        for gy in gauss:
            for gz in gauss:
                xi = np.array([gx, gy, gz])
                # dN/dxi for trilinear shape functions on [-1, 1]^3
                dN = np.zeros((8, 3))
                for a in range(8):
                    sx, sy, sz = signs[a]
                    dN[a, 0] = sx * (1 + sy * xi[1]) * (1 + sz * xi[2]) / 8.0
                    dN[a, 1] = (1 + sx * xi[0]) * sy * (1 + sz * xi[2]) / 8.0
                    dN[a, 2] = (1 + sx * xi[0]) * (1 + sy * xi[1]) * sz / 8.0
                # unit cube element: x = (xi + 1) / 2, so J = I/2
                dNdx = dN * 2.0
                detJ = 0.125
                B = np.zeros((6, 24))
                for a in range(8):
                    bx, by, bz = dNdx[a]
                    c = 3 * a
                    B[0, c] = bx
                    B[1, c + 1] = by
                    B[2, c + 2] = bz
                    B[3, c] = by
                    B[3, c + 1] = bx
                    B[4, c + 1] = bz
                    B[4, c + 2] = by
                    B[5, c] = bz
                    B[5, c + 2] = bx
                Ke += B.T @ D @ B * detJ
    return Ke


def gen_elasticity_hex(spec):
    """Assembled stiffness of a clamped hex-mesh block under a face load.

    The x=0 node layer is fully clamped (rows/columns eliminated); the
    opposite face carries a unit load in +x. Returns the SPD reduced matrix
    and the reduced right-hand side.
    """
    nx, ny, nz = spec.nx, spec.ny, spec.nz
    mx, my, mz = nx + 1, ny + 1, nz + 1

    def nid(i, j, k):
        return i + mx * (j + my * k)

    n_nodes = mx * my * mz
    Ke = hex_element_stiffness(spec.lame_lambda, spec.lame_mu)
    rows, cols, vals = [], [], []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                nodes = [
                    nid(i + di, j + dj, k + dk)
                    for dk in (0, 1)
                    for dj in (0, 1)
                    for di in (0, 1)
                ]
                dofs = np.array([3 * nd + c for nd in nodes for c in range(3)])
                rr = np.repeat(dofs, 24)
                cc = np.tile(dofs, 24)
                rows.append(rr)
                cols.append(cc)
                vals.append(Ke.ravel())
    K = sp.coo_matrix(
        (
            np.concatenate(vals),
            (np.concatenate(rows), np.concatenate(cols)),
        ),
        shape=(3 * n_nodes, 3 * n_nodes),
    ).tocsc()

    clamped_nodes = [nid(0, j, k) for k in range(mz) for j in range(my)]
    clamped = np.zeros(3 * n_nodes, dtype=bool)
    for nd in clamped_nodes:
        clamped[3 * nd : 3 * nd + 3] = True
    keep = np.flatnonzero(~clamped)

    force = np.zeros(3 * n_nodes)
    for k in range(mz):
        for j in range(my):
            force[3 * nid(nx, j, k)] = 1.0  # +x load on the free face

    K_red = K[keep][:, keep]
    K_red = (K_red + K_red.T) * 0.5  # exact symmetry despite summation order
    return SparseMatrix(K_red.tocsc(), symmetric=True), force[keep]
