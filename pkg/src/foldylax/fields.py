"""Incident plane waves, scattered and far fields, far-field grids."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonTransversePolarization, NonUnitDirection, ObservationTooClose
from .kernels import FOUR_PI, grad_phi_k, upsilon_k

UNIT_TOL = 1e-12

# Far-field normalizations.  "limit" is the radial limit
# |x| exp(-ik|x|) E^s(|x| xhat) of the scattered field.  "compact" drops the
# common k^2/(4 pi) and flips the sign of the magnetic-dipole term.
FAR_FIELD_NORMALIZATIONS = ("limit", "compact")


@dataclass(frozen=True, eq=False)
class IncidentWave:
    theta: np.ndarray
    p: np.ndarray
    k: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        p = np.array(self.p, dtype=float)
        if abs(np.linalg.norm(theta) - 1) > UNIT_TOL or abs(np.linalg.norm(p) - 1) > UNIT_TOL:
            raise NonUnitDirection("incident direction and polarization must be unit vectors")
        if abs(theta @ p) > UNIT_TOL:
            raise NonTransversePolarization(f"theta.p = {theta @ p:g}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_angles(cls, polar, azimuth, psi, k):
        """Direction from spherical angles; ``p = cos(psi) e_polar + sin(psi) e_azimuth``."""
        st, ct = np.sin(polar), np.cos(polar)
        sp, cp = np.sin(azimuth), np.cos(azimuth)
        d = np.array([st * cp, st * sp, ct])
        e_t = np.array([ct * cp, ct * sp, -st])
        e_p = np.array([-sp, cp, 0.0])
        p = np.cos(psi) * e_t + np.sin(psi) * e_p
        # renormalize away the last-ulp drift so the unit checks are exact
        return cls(d / np.linalg.norm(d), p / np.linalg.norm(p), k)


def incident_fields(w, x):
    """``E = p exp(ik theta.x)`` and ``H = (theta x p) exp(ik theta.x)`` at ``x`` (..., 3)."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * w.k * (x @ w.theta))[..., None]
    return phase * w.p, phase * np.cross(w.theta, w.p)


def _check_clearance(x, geometry, a):
    x = np.asarray(x, dtype=float)
    centers = np.concatenate([geometry.z1, geometry.z2])
    dist = np.linalg.norm(x[..., None, :] - centers, axis=-1)
    if np.any(dist < 2 * a):
        raise ObservationTooClose(f"observation point within 2a={2 * a:g} of a particle")
    return x


def _dipole_sum(x, anchors, q, r, k):
    """``-k^2 sum [grad_y phi(x, z) x Q - Upsilon(x, z) R]`` over anchors ``z``."""
    xs = x[..., None, :]
    # grad in the second slot equals grad in the first slot with arguments swapped
    gy = grad_phi_k(anchors, xs, k)
    ups = upsilon_k(xs, anchors, k)
    term = np.cross(gy, q) - np.einsum("...nij,nj->...ni", ups, r)
    return -k**2 * term.sum(axis=-2)


def scattered_field(x, moments, geometry, k, a):
    """Scattered electric field of the full model at points ``x`` (..., 3).

    ``moments`` is the full solution, shape ``(n, 4, 3)`` holding
    ``(Q1, R1, Q2, R2)`` per dimer.  Points closer than ``2a`` to any particle
    are rejected.
    """
    x = _check_clearance(x, geometry, a)
    u = np.asarray(moments)
    return (_dipole_sum(x, geometry.z1, u[:, 0], u[:, 1], k)
            + _dipole_sum(x, geometry.z2, u[:, 2], u[:, 3], k))


def reduced_scattered_field(x, moments, geometry, k, a):
    """Scattered field of the reduced model; ``moments`` is ``(n, 2, 3)`` = ``(Q1, R2)``.

    Both dipoles sit at the dimer midpoints.
    """
    x = _check_clearance(x, geometry, a)
    u = np.asarray(moments)
    return _dipole_sum(x, geometry.z0, u[:, 0], u[:, 1], k)


def _unit_directions(xhat):
    xhat = np.asarray(xhat, dtype=float)
    if np.any(np.abs(np.linalg.norm(xhat, axis=-1) - 1) > UNIT_TOL):
        raise NonUnitDirection("far-field directions must be unit vectors")
    return xhat


def _far_sum(xhat, anchors, q, r, k, normalization):
    phase = np.exp(-1j * k * (xhat @ anchors.T))            # (..., n)
    xq = np.cross(xhat[..., None, :], q)                     # (..., n, 3)
    proj_r = r - np.einsum("...j,nj->...n", xhat, r)[..., None] * xhat[..., None, :]
    if normalization == "limit":
        terms = (k**2 / FOUR_PI) * (1j * k * xq + proj_r)
    elif normalization == "compact":
        terms = -1j * k * xq + proj_r
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return np.einsum("...n,...nj->...j", phase, terms)


def far_field(xhat, moments, geometry, k, normalization="limit"):
    """Far-field pattern of the full model in directions ``xhat`` (..., 3).

    With the default normalization the result is the radial limit of
    :func:`scattered_field`.
    """
    xhat = _unit_directions(xhat)
    u = np.asarray(moments)
    return (_far_sum(xhat, geometry.z1, u[:, 0], u[:, 1], k, normalization)
            + _far_sum(xhat, geometry.z2, u[:, 2], u[:, 3], k, normalization))


def reduced_far_field(xhat, moments, geometry, k, normalization="limit"):
    xhat = _unit_directions(xhat)
    u = np.asarray(moments)
    return _far_sum(xhat, geometry.z0, u[:, 0], u[:, 1], k, normalization)


@dataclass
class FarFieldPattern:
    """Far field sampled on a product quadrature grid over the unit sphere."""

    theta: np.ndarray       # polar angle per node
    phi: np.ndarray         # azimuth per node
    directions: np.ndarray  # (n, 3)
    weights: np.ndarray     # solid-angle quadrature weights, sum 4 pi
    values: np.ndarray      # (n, 3) complex

    def power(self):
        return np.sum(np.abs(self.values) ** 2, axis=1)


def sphere_grid(n_theta, n_phi):
    """Gauss-Legendre nodes in cos(theta) times uniform azimuths."""
    if n_theta < 2 or n_phi < 2:
        raise ValueError("need n_theta, n_phi >= 2")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.repeat(w, n_phi) * (2 * np.pi / n_phi)
    tt, pp = tt.ravel(), pp.ravel()
    st = np.sin(tt)
    dirs = np.stack([st * np.cos(pp), st * np.sin(pp), np.cos(tt)], axis=1)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return tt, pp, dirs, weights


def far_field_grid(moments, geometry, k, n_theta, n_phi, reduced=False, normalization="limit"):
    tt, pp, dirs, weights = sphere_grid(n_theta, n_phi)
    fn = reduced_far_field if reduced else far_field
    values = fn(dirs, moments, geometry, k, normalization)
    return FarFieldPattern(tt, pp, dirs, weights, values)


def scattering_cross_section(pattern):
    """Quadrature of ``|E_inf|^2`` over the sphere."""
    return float(pattern.weights @ pattern.power())


FAR_FIELD_COLUMNS = ("theta", "phi", "Ex_re", "Ex_im", "Ey_re", "Ey_im",
                     "Ez_re", "Ez_im", "power")


def write_far_field_csv(pattern, path, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FAR_FIELD_COLUMNS)
        for t, ph, e, pw in zip(pattern.theta, pattern.phi, pattern.values, pattern.power()):
            row = [t, ph]
            for c in e:
                row += [c.real, c.imag]
            row.append(pw)
            w.writerow([repr(float(v)) for v in row])


__all__ = [
    "IncidentWave", "incident_fields", "scattered_field", "reduced_scattered_field",
    "far_field", "reduced_far_field", "FarFieldPattern", "sphere_grid", "far_field_grid",
    "scattering_cross_section", "write_far_field_csv",
]
