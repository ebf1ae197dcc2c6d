"""Model parameters, polarization tensors, resonance and regime checks."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ComplexEta0Unsupported, NonPositiveRadicand
from .geometry import ScalingParams

IMAG_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the dimer model.

    ``sign_c`` and ``sign_d`` pick the branch of the resonance offsets
    ``+-c0 a^h`` and ``+-d0 a^h``; they enter only as the signed
    denominators ``sign_c*c0`` and ``sign_d*d0``.
    """

    a: float
    h: float
    t1: float
    t2: float
    k: float
    alpha0: float = 1.0
    beta0: float = 1.0
    eta0: complex = 1.0
    eta2: complex = 1.0
    c0: float = 1.0
    d0: float = 1.0
    sign_c: int = 1
    sign_d: int = 1
    eps0: float = 1.0
    mu0: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not complex(self.eta0).real > 0:
            raise ValueError(f"Re(eta0) must be positive, got {self.eta0}")
        if not (self.c0 > 0 and self.d0 > 0):
            raise ValueError("c0 and d0 must be positive")
        if self.sign_c not in (1, -1) or self.sign_d not in (1, -1):
            raise ValueError("sign_c and sign_d must be +1 or -1")

    @property
    def eta1(self):
        return self.eta0 * self.a**-2

    @property
    def signed_c0(self):
        return self.sign_c * self.c0

    @property
    def signed_d0(self):
        return self.sign_d * self.d0

    @property
    def scaling(self):
        return ScalingParams(self.a, self.t1, self.t2, self.alpha0, self.beta0)

    @property
    def d_in(self):
        return self.alpha0 * self.a**self.t1

    @property
    def d_out(self):
        return self.beta0 * self.a**self.t2


def _frozen(m):
    m = np.array(m, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError(f"polarization tensor must be 3x3, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("polarization tensor has non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class PolarizationTensors:
    """The four 3x3 tensors ``P011, P012, P021, P022``.

    Naming: ``P0ij`` is the tensor of particle ``i`` (1 dielectric,
    2 plasmonic) and projection ``j``.  Zero tensors are accepted; they switch
    the corresponding coupling off, which the tests rely on.
    """

    P011: np.ndarray = field(default_factory=lambda: np.eye(3))
    P012: np.ndarray = field(default_factory=lambda: np.eye(3))
    P021: np.ndarray = field(default_factory=lambda: np.eye(3))
    P022: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        for name in ("P011", "P012", "P021", "P022"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, PolarizationTensors):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n))
                   for n in ("P011", "P012", "P021", "P022"))

    @classmethod
    def isotropic(cls, c011=1.0, c012=1.0, c021=1.0, c022=1.0):
        return cls(isotropic_tensor(c011), isotropic_tensor(c012),
                   isotropic_tensor(c021), isotropic_tensor(c022))

    @classmethod
    def zeros(cls):
        return cls.isotropic(0, 0, 0, 0)

    def scaled(self, **factors):
        kw = {n: getattr(self, n) * factors.get(n, 1.0) for n in ("P011", "P012", "P021", "P022")}
        return PolarizationTensors(**kw)


def isotropic_tensor(c):
    return complex(c) * np.eye(3, dtype=complex)


def wavenumber_from_resonance(lambda_n0, p):
    """Real ``k`` solving ``1 - k^2 eta0 lambda = sign_c c0 a^h``."""
    eta0 = complex(p.eta0)
    if abs(eta0.imag) > IMAG_TOL:
        raise ComplexEta0Unsupported(f"Im(eta0)={eta0.imag:g} gives a complex wavenumber")
    radicand = (1.0 - p.sign_c * p.c0 * p.a**p.h) / (eta0.real * lambda_n0)
    if not radicand > 0:
        raise NonPositiveRadicand(f"k^2 = {radicand:g} is not positive")
    return math.sqrt(radicand)


@dataclass
class Condition:
    name: str
    value: float
    bound: float
    passed: bool
    margin: float
    detail: str = ""

    def __post_init__(self):
        # plain Python scalars keep reports JSON-serializable
        self.value = float(self.value)
        self.bound = float(self.bound)
        self.passed = bool(self.passed)
        self.margin = float(self.margin)


@dataclass
class RegimeReport:
    conditions: list

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed,
                "conditions": [dict(c.__dict__) for c in self.conditions]}


def check_regime(p):
    """Exponent window and frequency smallness condition.

    (i) ``0 < t2 <= t1 < 1``; (ii) ``9/5 < h < min(2, 5 - 8 t1)``;
    (iii) ``k^4 / ((4 pi)^4 c0^2 d0^2) < 1``.  Margins are positive on pass.
    """
    m1 = min(p.t2, p.t1 - p.t2, 1 - p.t1)
    c1 = Condition("exponents", p.t2, p.t1, 0 < p.t2 <= p.t1 < 1, m1,
                   "0 < t2 <= t1 < 1")
    upper = min(2.0, 5.0 - 8.0 * p.t1)
    lower = 9.0 / 5.0
    c2 = Condition("h_window", p.h, upper, lower < p.h < upper,
                   min(p.h - lower, upper - p.h), f"9/5 < h < {upper!r}")
    val = abs(p.k) ** 4 / ((4 * math.pi) ** 4 * p.c0**2 * p.d0**2)
    c3 = Condition("frequency", val, 1.0, val < 1.0, 1.0 - val,
                   "k^4/((4 pi)^4 c0^2 d0^2) < 1")
    return RegimeReport([c1, c2, c3])


def invertibility_values(p, t):
    """The two contraction constants ``(L1, L2)``; ``L2`` is inf when ``L1 >= 1``."""
    k2 = abs(p.k) ** 2
    n011 = np.linalg.norm(t.P011, 2)
    n022 = np.linalg.norm(t.P022, 2)
    eta0 = abs(p.eta0)
    eta2 = abs(p.eta2)
    scale = p.a ** (3 - p.h)
    l1 = 0.5 * k2 * (k2 * eta0 / p.c0 * n011 + eta2 / p.d0 * n022) * scale * p.d_in**-3
    if l1 >= 1:
        return l1, math.inf
    l2 = (k2 * (max(1.0, k2) * eta0 / p.c0 * n011 + eta2 / p.d0 * n022)
          / (1.0 - l1) * scale * p.d_out**-3)
    return l1, l2


def check_invertibility(p, t):
    l1, l2 = invertibility_values(p, t)
    return RegimeReport([
        Condition("L1", l1, 1.0, l1 < 1.0, 1.0 - l1, "intra-dimer coupling < 1"),
        Condition("L2", l2, 1.0, l2 < 1.0, 1.0 - l2, "inter-dimer coupling < 1"),
    ])
