"""Block assembly of the full (12 per dimer) and reduced (6 per dimer) systems.

Unknown ordering per dimer is ``(Q1, R1, Q2, R2)`` for the full system and
``(Q1, R2)`` for the reduced one, each a 3-vector.  Both systems read

    diag[m] @ U[m] - sum_{j != m} offdiag[m, j] @ U[j] = source[m].

Coupling blocks are products ``prefactor * P @ K`` where ``P`` is a
polarization tensor and ``K`` is either the dyadic kernel ``Upsilon_k`` or
the cross-product matrix of ``grad phi_k``.  Kernels between different dimers
are evaluated at the particle centres ``z1``/``z2``, not at the midpoints.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IndexEqual, SingularTensor
from .fields import incident_fields
from .kernels import cross_matrix, grad_phi_k, upsilon_k

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """``n`` block rows of size ``b``; ``offdiag[m, m]`` is unused and zero."""

    diag: np.ndarray      # (n, b, b)
    offdiag: np.ndarray   # (n, n, b, b)
    source: np.ndarray    # (n, b)

    @property
    def n_dimers(self):
        return self.diag.shape[0]

    @property
    def block_size(self):
        return self.diag.shape[1]

    @property
    def size(self):
        return self.n_dimers * self.block_size

    def dense(self):
        n, b = self.n_dimers, self.block_size
        full = -self.offdiag.transpose(0, 2, 1, 3).reshape(n * b, n * b).copy()
        for m in range(n):
            full[m * b:(m + 1) * b, m * b:(m + 1) * b] = self.diag[m]
        return full

    def rhs(self):
        return self.source.reshape(-1)

    def matvec(self, x):
        """Block-wise product; ``x`` is flat ``(n*b,)`` or blocked ``(n, b)``."""
        xb = np.asarray(x).reshape(self.n_dimers, self.block_size)
        y = np.einsum("mab,mb->ma", self.diag, xb) - np.einsum("mjab,jb->ma", self.offdiag, xb)
        return y.reshape(np.shape(x))

    def permuted(self, order):
        order = np.asarray(order)
        return type(self)(self.diag[order], self.offdiag[np.ix_(order, order)], self.source[order])


class ReducedSystem(BlockSystem):
    """The 6-per-dimer dipole system; ``diag`` holds the ``A_m`` blocks."""


def _grid(blocks):
    """4x4 (or 2x2) nested list of (..., 3, 3) arrays -> (..., 3r, 3r)."""
    rows = [np.concatenate(row, axis=-1) for row in blocks]
    return np.concatenate(rows, axis=-2)


def _apply(tensor, kernel):
    return np.einsum("ij,...jk->...ik", tensor, kernel)


def _prefactors(p):
    """Per block row: (tensor name, Upsilon prefactor, grad-cross prefactor)."""
    k, a, h = p.k, p.a, p.h
    s = a ** (3 - h)
    return {
        "row1": ("P011", k**4 * p.eta0 / p.signed_c0 * s, k**2 * p.eta0 / p.signed_c0 * s),
        "row2": ("P012", k**2 * a**3, k**2 * a**3),
        "row3": ("P021", k**4 * p.eta2 * a**5, k**2 * p.eta2 * a**5),
        "row4": ("P022", k**2 * p.eta2 / p.signed_d0 * s, k**2 * p.eta2 / p.signed_d0 * s),
    }


def _kernels(x, y, k):
    return upsilon_k(x, y, k), cross_matrix(grad_phi_k(x, y, k))


def _intra_blocks(z1, z2, p, t):
    """Diagonal blocks ``B_m`` for dimers with centres ``z1``, ``z2`` of shape (..., 3)."""
    pre = _prefactors(p)
    u12, g12 = _kernels(z1, z2, p.k)
    u21, g21 = _kernels(z2, z1, p.k)
    _, y1, x1 = pre["row1"]
    _, y2, x2 = pre["row2"]
    _, y3, _ = pre["row3"]
    _, y4, x4 = pre["row4"]
    b13 = y1 * _apply(t.P011, u12)
    b14 = x1 * _apply(t.P011, g12)
    b23 = x2 * _apply(t.P012, g12)
    b24 = y2 * _apply(t.P012, u12)
    # the intra-dimer grad-cross block of row 3 carries k^4, unlike its
    # inter-dimer counterpart
    b31 = y3 * _apply(t.P021, u21)
    b32 = y3 * _apply(t.P021, g21)
    b41 = x4 * _apply(t.P022, g21)
    b42 = y4 * _apply(t.P022, u21)
    eye = np.broadcast_to(np.eye(3, dtype=complex), b13.shape)
    zero = np.zeros_like(b13)
    return _grid([
        [eye, zero, -b13, -b14],
        [zero, eye, -b23, -b24],
        [-b31, -b32, eye, zero],
        [-b41, -b42, zero, eye],
    ])


def _inter_blocks(zm1, zm2, zj1, zj2, p, t):
    """Coupling blocks ``Psi_mj`` for pairs given as (..., 3) arrays."""
    k = p.k
    src = {"row1": zm1, "row2": zm1, "row3": zm2, "row4": zm2}
    grid = []
    for row, (name, py, px) in _prefactors(p).items():
        tensor = getattr(t, name)
        blocks = []
        for target in (zj1, zj2):
            ups, grd = _kernels(src[row], target, k)
            ky = py * _apply(tensor, ups)
            kx = px * _apply(tensor, grd)
            blocks += [ky, kx] if row in ("row1", "row3") else [kx, ky]
        grid.append(blocks)
    return _grid(grid)


def assemble_B(m, g, p, t):
    return _intra_blocks(g.z1[m], g.z2[m], p, t)


def assemble_Psi(m, j, g, p, t):
    if m == j:
        raise IndexEqual(f"Psi is defined for m != j only (got m=j={m})")
    return _inter_blocks(g.z1[m], g.z2[m], g.z1[j], g.z2[j], p, t)


def assemble_source(m, g, p, t, inc):
    return _sources(g.z1[m:m + 1], g.z2[m:m + 1], p, t, inc)[0]


def _sources(z1, z2, p, t, inc):
    k, a, s = p.k, p.a, p.a ** (3 - p.h)
    e1, h1 = incident_fields(inc, z1)
    e2, h2 = incident_fields(inc, z2)
    return np.concatenate([
        (1j * k * p.eta0 / p.signed_c0 * s) * h1 @ t.P011.T,
        a**3 * e1 @ t.P012.T,
        (1j * k * a**5) * h2 @ t.P021.T,
        (p.eta2 / p.signed_d0 * s) * e2 @ t.P022.T,
    ], axis=-1)


def _pairs(n):
    m, j = np.nonzero(~np.eye(n, dtype=bool))
    return m, j


def assemble_full_system(g, p, t, inc):
    n = len(g)
    diag = _intra_blocks(g.z1, g.z2, p, t)
    offdiag = np.zeros((n, n, 12, 12), dtype=complex)
    if n > 1:
        m, j = _pairs(n)
        offdiag[m, j] = _inter_blocks(g.z1[m], g.z2[m], g.z1[j], g.z2[j], p, t)
    return BlockSystem(diag, offdiag, _sources(g.z1, g.z2, p, t, inc))


def checked_inverse(tensor, name):
    """Inverse of a 3x3 tensor, refusing numerically singular input."""
    sv = np.linalg.svd(tensor, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularTensor(f"{name} is numerically singular (sigma_min={sv[-1]:.3g})")
    return np.linalg.inv(tensor)


def assemble_A(z1, z2, p, t):
    """Reduced self block(s) ``A_m`` for centres of shape (..., 3)."""
    k = p.k
    inv011 = checked_inverse(t.P011, "P011")
    inv022 = checked_inverse(t.P022, "P022")
    gx = cross_matrix(grad_phi_k(z1, z2, k))
    hh = p.a ** (p.h - 3) * p.signed_c0 / (1j * k * p.eta0) * inv011
    ee = p.a ** (p.h - 3) * p.signed_d0 / p.eta2 * inv022
    hh = np.broadcast_to(hh, gx.shape)
    ee = np.broadcast_to(ee, gx.shape)
    return _grid([[hh, 1j * k * gx], [-k**2 * gx, ee]])


def assemble_C(zm1, zm2, zj1, zj2, k):
    """Reduced coupling block(s) ``C_mj``."""
    return _grid([
        [-1j * k**3 * upsilon_k(zm1, zj1, k), -1j * k * cross_matrix(grad_phi_k(zm1, zj2, k))],
        [k**2 * cross_matrix(grad_phi_k(zm2, zj1, k)), k**2 * upsilon_k(zm2, zj2, k)],
    ])


def reduced_sources(g, inc):
    _, h1 = incident_fields(inc, g.z1)
    e2, _ = incident_fields(inc, g.z2)
    return np.concatenate([h1, e2], axis=-1)


def assemble_reduced_system(g, p, t, inc):
    n = len(g)
    diag = assemble_A(g.z1, g.z2, p, t)
    offdiag = np.zeros((n, n, 6, 6), dtype=complex)
    if n > 1:
        m, j = _pairs(n)
        offdiag[m, j] = assemble_C(g.z1[m], g.z2[m], g.z1[j], g.z2[j], p.k)
    return ReducedSystem(diag, offdiag, reduced_sources(g, inc))
