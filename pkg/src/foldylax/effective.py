"""Dimer polarizabilities, local fields and effective constitutive tensors.

The reduced system ``A_m U_m - sum_j C_mj U_j = F_m`` is read as
``U_m = P_m F_loc_m`` with ``P_m = A_m^-1`` and the local field
``F_loc_m = F_m + sum_j C_mj U_j``.  Scaling a number density by ``P`` gives
the susceptibility blocks and from them the bi-anisotropic tensors.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .assembly import assemble_A
from .errors import RegimeViolation, SingularA
from .kernels import cross_matrix, grad_phi_k
from .materials import check_regime

SINGULAR_RTOL = 1e-12
BLOCKS = ("HH", "HE", "EH", "EE")


def _split(m):
    return m[:3, :3], m[:3, 3:], m[3:, :3], m[3:, 3:]


@dataclass(frozen=True, eq=False)
class Polarizability6:
    """6x6 polarizability in (H, E) block order."""

    matrix: np.ndarray

    @classmethod
    def from_blocks(cls, hh, he, eh, ee):
        return cls(np.block([[hh, he], [eh, ee]]))

    @property
    def HH(self):
        return self.matrix[:3, :3]

    @property
    def HE(self):
        return self.matrix[:3, 3:]

    @property
    def EH(self):
        return self.matrix[3:, :3]

    @property
    def EE(self):
        return self.matrix[3:, 3:]


def _check_invertible(a):
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularA(f"A is numerically singular (sigma_min/sigma_max={sv[-1] / max(sv[0], 1e-300):.3g})")


def schur_inverse(a):
    """Block inverse of a 6x6 matrix through the Schur complement of its EE block."""
    a11, a12, a21, a22 = _split(np.asarray(a))
    inv11 = np.linalg.inv(a11)
    s = a22 - a21 @ inv11 @ a12
    inv_s = np.linalg.inv(s)
    p12 = -inv11 @ a12 @ inv_s
    p21 = -inv_s @ a21 @ inv11
    p11 = inv11 + inv11 @ a12 @ inv_s @ a21 @ inv11
    return np.block([[p11, p12], [p21, inv_s]])


def dimer_polarizability(a, method="direct"):
    a = np.asarray(a, dtype=complex)
    _check_invertible(a)
    if method == "direct":
        return Polarizability6(np.linalg.inv(a))
    if method == "schur":
        return Polarizability6(schur_inverse(a))
    raise ValueError(f"unknown method {method!r}")


def local_fields(moments, sys):
    """Per-dimer local fields ``F_m + sum_{j != m} C_mj U_j``, shape (n, 6)."""
    u = np.asarray(moments).reshape(sys.n_dimers, 6)
    return sys.source + np.einsum("mjab,jb->ma", sys.offdiag, u)


def number_density(p):
    return p.beta0**-3 * p.a ** (-3 * p.t2)


@dataclass(frozen=True, eq=False)
class SusceptibilitySet:
    chiHH: np.ndarray
    chiHE: np.ndarray
    chiEH: np.ndarray
    chiEE: np.ndarray
    rho: float


def susceptibilities(pol, rho):
    return SusceptibilitySet(rho * pol.HH, rho * pol.HE, rho * pol.EH, rho * pol.EE, rho)


def min_hermitian_eig(m):
    """Smallest eigenvalue of ``(M + M^H)/2``, i.e. ``min Re(v^H M v)`` over unit ``v``."""
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


@dataclass(frozen=True, eq=False)
class EffectiveTensors:
    eps_eff: np.ndarray
    mu_eff: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    min_eig_eps: float
    min_eig_mu: float

    @property
    def eps_negative(self):
        return self.min_eig_eps < 0

    @property
    def mu_negative(self):
        return self.min_eig_mu < 0

    @property
    def double_negative(self):
        return self.eps_negative and self.mu_negative

    def flags(self):
        return {"eps_negative": self.eps_negative, "mu_negative": self.mu_negative,
                "double_negative": self.double_negative}


def effective_tensors(chi, p):
    eye = np.eye(3)
    eps = p.eps0 * (eye + chi.chiEE)
    mu = p.mu0 * (eye + chi.chiHH)
    return EffectiveTensors(eps, mu, p.eps0 * chi.chiEH, p.mu0 * chi.chiHE,
                            min_hermitian_eig(eps), min_hermitian_eig(mu))


def dominant_polarizability(p, t, d_in_vec):
    """Leading-order blocks of ``A^-1`` for a dimer with separation ``z2 - z1 = d_in_vec``.

    The diagonal blocks invert the diagonal of ``A`` exactly; the off-diagonal
    ones are first order in the intra-dimer coupling ``G = grad phi_k(z1, z2) x``.
    Their sign follows the product of the two branch signs.
    """
    d = np.asarray(d_in_vec, dtype=float)
    k = p.k
    g = cross_matrix(grad_phi_k(-d, np.zeros(3), k))
    s = p.a ** (3 - p.h)
    hh = 1j * k * p.eta0 / p.signed_c0 * s * t.P011
    ee = p.eta2 / p.signed_d0 * s * t.P022
    coupling = p.eta0 * p.eta2 / (p.signed_c0 * p.signed_d0) * s**2
    he = k**2 * coupling * t.P011 @ g @ t.P022
    eh = 1j * k**3 * coupling * t.P022 @ g @ t.P011
    return Polarizability6.from_blocks(hh, he, eh, ee)


def exact_polarizability(p, t, d_in_vec):
    """``A^-1`` for a single dimer with separation ``d_in_vec``."""
    d = np.asarray(d_in_vec, dtype=float)
    return dimer_polarizability(assemble_A(np.zeros(3), d, p, t))


def predicted_exponents(p):
    diag = 3 - p.h - 3 * p.t2
    off = 6 - 2 * p.h - 2 * p.t1 - 3 * p.t2
    return {"HH": diag, "HE": off, "EH": off, "EE": diag}


@dataclass
class SweepResult:
    a_values: np.ndarray
    norms: dict            # block -> spectral norms of chi over a_values
    slopes: dict           # block -> fitted log-log slope
    residuals: dict        # block -> max abs residual of the linear fit
    predicted: dict        # block -> predicted exponent
    min_eig_eps: np.ndarray
    min_eig_mu: np.ndarray
    flags: list            # per a: dict of sign flags
    path: str

    def relative_slope_errors(self):
        return {b: abs(self.slopes[b] - self.predicted[b]) / max(abs(self.predicted[b]), 1e-300)
                for b in BLOCKS}


def _fit(log_a, log_n):
    coef = np.polyfit(log_a, log_n, 1)
    resid = log_n - np.polyval(coef, log_a)
    return float(coef[0]), float(np.max(np.abs(resid)))


def scaling_sweep(p_template, t, a_values, orientation=(0.0, 0.0, 1.0), path="dominant"):
    """Fit log-log slopes of the susceptibility norms against ``a``.

    ``path='dominant'`` uses the leading-order closed forms, ``path='full'``
    inverts ``A`` exactly.  The intra-dimer separation is
    ``alpha0 a^t1 * orientation`` at each ``a``.
    """
    a_values = np.asarray(sorted(a_values), dtype=float)
    if len(a_values) < 4 or a_values[-1] / a_values[0] < 10 * (1 - 1e-12):
        raise ValueError("sweep needs >= 4 values of a spanning >= 1 decade")
    axis = np.asarray(orientation, dtype=float)
    axis = axis / np.linalg.norm(axis)
    norms = {b: [] for b in BLOCKS}
    eps_eig, mu_eig, flags = [], [], []
    for a in a_values:
        p = replace(p_template, a=float(a))
        report = check_regime(p)
        if not report.passed:
            bad = [c.name for c in report.conditions if not c.passed]
            raise RegimeViolation(f"a={a:g} fails regime conditions {bad}")
        d = p.d_in * axis
        if path == "dominant":
            pol = dominant_polarizability(p, t, d)
        elif path == "full":
            pol = exact_polarizability(p, t, d)
        else:
            raise ValueError(f"unknown path {path!r}")
        chi = susceptibilities(pol, number_density(p))
        for b in BLOCKS:
            norms[b].append(np.linalg.norm(getattr(chi, "chi" + b), 2))
        eff = effective_tensors(chi, p)
        eps_eig.append(eff.min_eig_eps)
        mu_eig.append(eff.min_eig_mu)
        flags.append(eff.flags())
    log_a = np.log(a_values)
    slopes, residuals = {}, {}
    for b in BLOCKS:
        norms[b] = np.array(norms[b])
        slopes[b], residuals[b] = _fit(log_a, np.log(norms[b]))
    return SweepResult(a_values, norms, slopes, residuals, predicted_exponents(p_template),
                       np.array(eps_eig), np.array(mu_eig), flags, path)


SWEEP_COLUMNS = ("a", "norm_chiHH", "norm_chiHE", "norm_chiEH", "norm_chiEE",
                 "min_eig_re_eps", "min_eig_re_mu", "flags")


def _flag_text(f):
    names = [k for k in ("eps_negative", "mu_negative", "double_negative") if f[k]]
    return "|".join(names) if names else "none"


def write_sweep_csv(result, path, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for i, a in enumerate(result.a_values):
            w.writerow([repr(float(a))]
                       + [repr(float(result.norms[b][i])) for b in BLOCKS]
                       + [repr(float(result.min_eig_eps[i])), repr(float(result.min_eig_mu[i])),
                          _flag_text(result.flags[i])])


def nontrivial_h(t2):
    """The ``h`` making the diagonal susceptibilities order one: ``3 - 3 t2``."""
    return 3.0 - 3.0 * t2

