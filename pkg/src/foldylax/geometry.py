"""Dimer cluster construction and validation.

A cluster lives in the unit cube.  Each dimer is a pair of point particles: a
dielectric one at ``z1`` and a plasmonic one at ``z2``.  Their midpoint ``z0``
anchors the reduced dipole model and defines the inter-dimer distance.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidScaling, PlacementFailed, TooDense


@dataclass(frozen=True)
class ScalingParams:
    """Size ``a`` and the power laws ``d_in = alpha0 a^t1``, ``d_out = beta0 a^t2``."""

    a: float
    t1: float
    t2: float
    alpha0: float = 1.0
    beta0: float = 1.0

    def validate(self):
        if not self.a > 0:
            raise InvalidScaling(f"a must be positive, got {self.a}")
        if not 0 < self.t2 <= self.t1 < 1:
            raise InvalidScaling(f"need 0 < t2 <= t1 < 1, got t1={self.t1}, t2={self.t2}")
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise InvalidScaling("alpha0 and beta0 must be positive")

    @property
    def d_in(self):
        return self.alpha0 * self.a**self.t1

    @property
    def d_out(self):
        return self.beta0 * self.a**self.t2

    @property
    def count(self):
        return count_from_d_out(self.d_out)


def count_from_d_out(d_out):
    """Integer part of ``d_out**-3``, guarded against round-off just below an integer."""
    x = d_out**-3.0
    n = math.floor(x)
    if math.isclose(x, n + 1, rel_tol=1e-12):
        n += 1
    return n


@dataclass(frozen=True)
class DimerSites:
    z1: np.ndarray
    z2: np.ndarray
    z0: np.ndarray = field(init=False)

    def __post_init__(self):
        z1 = np.array(self.z1, dtype=float)
        z2 = np.array(self.z2, dtype=float)
        if z1.shape != (3,) or z2.shape != (3,):
            raise ValueError("dimer sites must be 3-vectors")
        if np.array_equal(z1, z2):
            raise ValueError("dimer particles must not coincide")
        for arr in (z1, z2):
            arr.setflags(write=False)
        z0 = z1 + (z2 - z1) / 2
        z0.setflags(write=False)
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "z2", z2)
        object.__setattr__(self, "z0", z0)

    @property
    def axis(self):
        d = self.z2 - self.z1
        return d / np.linalg.norm(d)


class ClusterGeometry:
    """Immutable ordered collection of dimers with realized separations."""

    def __init__(self, dimers):
        dimers = tuple(dimers)
        if not dimers:
            raise ValueError("a cluster needs at least one dimer")
        self.dimers = dimers
        self.z1 = np.array([d.z1 for d in dimers])
        self.z2 = np.array([d.z2 for d in dimers])
        self.z0 = np.array([d.z0 for d in dimers])
        for arr in (self.z1, self.z2, self.z0):
            arr.setflags(write=False)
        self.realized_d_in = float(np.min(np.linalg.norm(self.z2 - self.z1, axis=1)))
        self.realized_d_out = min_pairwise_distance(self.z0)

    @classmethod
    def from_sites(cls, z1, z2):
        return cls(DimerSites(p, q) for p, q in zip(np.asarray(z1, float), np.asarray(z2, float)))

    def __len__(self):
        return len(self.dimers)

    def __eq__(self, other):
        if not isinstance(other, ClusterGeometry):
            return NotImplemented
        return np.array_equal(self.z1, other.z1) and np.array_equal(self.z2, other.z2)

    def __repr__(self):
        return (f"ClusterGeometry(n={len(self)}, d_in={self.realized_d_in:.6g}, "
                f"d_out={self.realized_d_out:.6g})")

    def permuted(self, order):
        return ClusterGeometry(self.dimers[i] for i in order)

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        return ClusterGeometry.from_sites(self.z1 + shift, self.z2 + shift)

    def shared_orientation(self, tol=1e-12):
        """Common unit axis of all dimers, or None if the orientations differ."""
        axes = (self.z2 - self.z1) / np.linalg.norm(self.z2 - self.z1, axis=1)[:, None]
        if np.all(np.linalg.norm(axes - axes[0], axis=1) <= tol):
            return axes[0]
        return None


def min_pairwise_distance(points):
    """Exhaustive O(n^2) minimum distance; +inf for fewer than two points."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n < 2:
        return math.inf
    best = math.inf
    for i in range(n - 1):
        dist = np.linalg.norm(points[i + 1:] - points[i], axis=1)
        best = min(best, float(dist.min()))
    return best


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or not abs(n - 1.0) <= 1e-12:
        raise ValueError(f"orientation must be a unit 3-vector, got {v}")
    return v


def _checked(s):
    s.validate()
    if s.d_in >= s.d_out:
        raise TooDense(f"dimer length {s.d_in:.6g} >= spacing {s.d_out:.6g}")


def _dimers_from_centers(centers, axes, length):
    half = 0.5 * length * np.asarray(axes, dtype=float)
    return ClusterGeometry.from_sites(centers - half, centers + half)


def make_lattice_cluster(s, orientation=(0.0, 0.0, 1.0), count_override=None):
    """Dimers on a cubic lattice of pitch ``d_out`` centred in the unit cube.

    The smallest cube of ``ceil(n^(1/3))`` sites per side is filled in
    lexicographic order, so ``n`` need not be a perfect cube.
    """
    _checked(s)
    axis = _unit(orientation)
    n = s.count if count_override is None else int(count_override)
    if n < 1:
        raise InvalidScaling(f"dimer count must be >= 1, got {n}")
    pitch = s.d_out
    side = round(n ** (1 / 3))
    if side**3 < n:
        side += 1
    span = (side - 1) * pitch
    if span > 1.0 + 1e-12:
        raise TooDense(f"{n} dimers at pitch {pitch:.6g} do not fit in the unit cube")
    offset = 0.5 * (1.0 - span)
    idx = np.array(np.unravel_index(np.arange(n), (side, side, side))).T
    centers = offset + pitch * idx
    return _dimers_from_centers(centers, np.broadcast_to(axis, centers.shape), s.d_in)


def random_unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def make_random_cluster(s, seed, max_attempts=100_000, count_override=None, orientation=None):
    """Rejection-sample dimer midpoints in the unit cube at mutual distance >= d_out.

    Axes are uniform on the sphere unless ``orientation`` fixes a shared one.
    """
    _checked(s)
    n = s.count if count_override is None else int(count_override)
    if n < 1:
        raise InvalidScaling(f"dimer count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    d_min = s.d_out
    centers = np.empty((n, 3))
    placed = 0
    attempts = 0
    while placed < n:
        if attempts >= max_attempts:
            raise PlacementFailed(f"placed {placed}/{n} dimers in {max_attempts} attempts")
        attempts += 1
        c = rng.random(3)
        if placed and np.min(np.linalg.norm(centers[:placed] - c, axis=1)) < d_min:
            continue
        centers[placed] = c
        placed += 1
    if orientation is None:
        axes = random_unit_vectors(rng, n)
    else:
        axes = np.broadcast_to(_unit(orientation), (n, 3))
    return _dimers_from_centers(centers, axes, s.d_in)


@dataclass
class ValidationReport:
    n_dimers: int
    realized_d_in: float
    realized_d_out: float
    expected_d_in: float
    expected_d_out: float
    expected_count: int
    d_in_ok: bool
    d_out_ok: bool
    stored_ok: bool
    count_matches: bool
    flags: list

    @property
    def ok(self):
        return self.d_in_ok and self.d_out_ok and self.stored_ok

    def to_dict(self):
        out = dict(self.__dict__)
        out["ok"] = self.ok
        return out


def validate_geometry(g, s, tol=1e-9):
    """Re-scan ``g`` and compare against the scaling laws in ``s``.

    ``d_in`` must match ``alpha0 a^t1`` to relative ``tol``; ``d_out`` is a
    lower bound and may only undershoot ``beta0 a^t2`` by ``tol``.
    """
    d_in = float(np.min(np.linalg.norm(g.z2 - g.z1, axis=1)))
    d_out = min_pairwise_distance(g.z0)
    flags = []
    d_in_ok = abs(d_in - s.d_in) <= tol * s.d_in
    if not d_in_ok:
        flags.append(f"d_in {d_in:.6g} deviates from {s.d_in:.6g}")
    d_out_ok = d_out >= s.d_out * (1 - tol)
    if not d_out_ok:
        flags.append(f"d_out {d_out:.6g} below {s.d_out:.6g}")
    stored_ok = d_in == g.realized_d_in and d_out == g.realized_d_out
    if not stored_ok:
        flags.append("stored separations disagree with rescan")
    mid = g.z1 + (g.z2 - g.z1) / 2
    if not np.array_equal(mid, g.z0):
        stored_ok = False
        flags.append("midpoint identity violated")
    expected_count = s.count
    return ValidationReport(
        n_dimers=len(g),
        realized_d_in=d_in,
        realized_d_out=d_out,
        expected_d_in=s.d_in,
        expected_d_out=s.d_out,
        expected_count=expected_count,
        d_in_ok=d_in_ok,
        d_out_ok=d_out_ok,
        stored_ok=stored_ok,
        count_matches=len(g) == expected_count,
        flags=flags,
    )


GEOMETRY_COLUMNS = ("z1_x", "z1_y", "z1_z", "z2_x", "z2_y", "z2_z")


def write_geometry(g, path, comment=None):
    """One row per dimer; floats use ``repr`` so reloading is exact."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GEOMETRY_COLUMNS)
        for z1, z2 in zip(g.z1, g.z2):
            w.writerow([repr(float(v)) for v in (*z1, *z2)])


def read_geometry(path):
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != GEOMETRY_COLUMNS:
        raise ConfigError(f"{path}: expected header {','.join(GEOMETRY_COLUMNS)}")
    for i, row in enumerate(reader, start=2):
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise ConfigError(f"{path}:{i}: {exc}") from None
        if len(row) != 6:
            raise ConfigError(f"{path}:{i}: expected 6 values, got {len(row)}")
    if not rows:
        raise ConfigError(f"{path}: no dimers")
    data = np.array(rows)
    return ClusterGeometry.from_sites(data[:, :3], data[:, 3:])
