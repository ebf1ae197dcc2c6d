"""Free-space Helmholtz kernels.

All functions broadcast over leading axes: points are arrays of shape
``(..., 3)``; scalars come back as ``(...)``, vectors as ``(..., 3)`` and
matrices as ``(..., 3, 3)``.  Derivatives are always taken with respect to the
first argument.
"""

import numpy as np

from .errors import CoincidentPoints, ZeroWavenumber

R_MIN = 1e-12
FOUR_PI = 4.0 * np.pi


def _separation(x, y, r_min):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    if np.any(r < r_min):
        raise CoincidentPoints(f"points closer than r_min={r_min:g}")
    return d, r


def phi_k(x, y, k, r_min=R_MIN):
    """exp(ik|x-y|) / (4 pi |x-y|)."""
    _, r = _separation(x, y, r_min)
    return np.exp(1j * k * r) / (FOUR_PI * r)


def grad_phi_k(x, y, k, r_min=R_MIN):
    """Gradient of :func:`phi_k` in ``x``."""
    d, r = _separation(x, y, r_min)
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    return ((1j * k - 1.0 / r) * phi / r)[..., None] * d


def hess_phi_k(x, y, k, r_min=R_MIN):
    """Hessian of :func:`phi_k` in ``x``.

    With ``u = (x-y)/r``::

        Hess = phi * [(ik/r - 1/r^2) I + (3/r^2 - 3ik/r - k^2) u u^T]
    """
    d, r = _separation(x, y, r_min)
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    u = d / r[..., None]
    iso = phi * (1j * k / r - 1.0 / r**2)
    rad = phi * (3.0 / r**2 - 3j * k / r - k**2)
    uu = u[..., :, None] * u[..., None, :]
    return iso[..., None, None] * np.eye(3) + rad[..., None, None] * uu


def upsilon_k(x, y, k, r_min=R_MIN):
    """Dyadic Green's kernel ``Hess(phi_k)/k^2 + phi_k I``."""
    if k == 0:
        raise ZeroWavenumber("upsilon_k needs k != 0; use upsilon_0")
    phi = phi_k(x, y, k, r_min)
    return hess_phi_k(x, y, k, r_min) / k**2 + phi[..., None, None] * np.eye(3)


def upsilon_0(x, y, r_min=R_MIN):
    """Static dyadic ``Hess(1/(4 pi r)) = (3 u u^T - I) / (4 pi r^3)``."""
    d, r = _separation(x, y, r_min)
    u = d / r[..., None]
    uu = u[..., :, None] * u[..., None, :]
    return (3.0 * uu - np.eye(3)) / (FOUR_PI * r**3)[..., None, None]


def cross_matrix(v):
    """Matrix ``M`` with ``M @ w == np.cross(v, w)``."""
    v = np.asarray(v)
    m = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    m[..., 0, 1] = -v[..., 2]
    m[..., 0, 2] = v[..., 1]
    m[..., 1, 0] = v[..., 2]
    m[..., 1, 2] = -v[..., 0]
    m[..., 2, 0] = -v[..., 1]
    m[..., 2, 1] = v[..., 0]
    return m
