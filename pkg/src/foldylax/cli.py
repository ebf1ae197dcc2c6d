"""Command-line driver: YAML config in, deterministic CSV/JSON out.

Every subcommand reads one config file and writes into an output directory
(``--out``, else ``$FOLDYLAX_OUT``, else ``output.dir`` from the config, else
``./out``).  CSV files start with a ``# config_sha256=...`` comment line;
JSON files use sorted keys.  Nothing time- or host-dependent is written.

Exit codes: 0 success, 1 domain error, 2 config error.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .assembly import assemble_A, assemble_full_system, assemble_reduced_system
from .effective import (dimer_polarizability, dominant_polarizability, effective_tensors,
                        number_density, scaling_sweep, susceptibilities, write_sweep_csv)
from .errors import ConfigError, FoldyLaxError, NotConverged
from .fields import (FAR_FIELD_NORMALIZATIONS, IncidentWave, far_field_grid,
                     scattering_cross_section, write_far_field_csv)
from .geometry import (make_lattice_cluster, make_random_cluster, read_geometry,
                       validate_geometry, write_geometry)
from .materials import (ModelParams, PolarizationTensors, check_invertibility, check_regime,
                        wavenumber_from_resonance)
from .solver import solve

SUBCOMMANDS = ("geometry", "check", "solve", "farfield", "reduced", "effective", "sweep")
OUT_ENV = "FOLDYLAX_OUT"
MODEL_KEYS = ("a", "h", "t1", "t2", "alpha0", "beta0", "eta0", "eta2", "c0", "d0",
              "sign_c", "sign_d", "eps0", "mu0")
COMPLEX_KEYS = ("eta0", "eta2")
INT_KEYS = ("sign_c", "sign_d")
TENSOR_NAMES = ("P011", "P012", "P021", "P022")
SECTIONS = ("tensors", "geometry", "incident", "solver", "farfield", "effective", "sweep", "output")
MAX_SEED = 2**64


# ---------------------------------------------------------------- config types

@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "lattice"                 # lattice | random | file
    seed: int = 0
    count_override: int = None
    orientation: tuple = (0.0, 0.0, 1.0)  # None = random axes; the random kind defaults to None
    path: str = None
    max_attempts: int = 100_000


@dataclass(frozen=True)
class IncidentSpec:
    theta: float = 0.0                    # polar angle of the propagation direction
    phi: float = 0.0                      # azimuth of the propagation direction
    polarization: float = 0.0             # angle from the polar unit vector


@dataclass(frozen=True)
class SolverSpec:
    method: str = "auto"                  # auto | dense | jacobi | gauss-seidel
    tol: float = 1e-12
    max_iter: int = 500
    cap: int = 6000


@dataclass(frozen=True)
class FarFieldSpec:
    n_theta: int = 32
    n_phi: int = 64
    normalization: str = "limit"


@dataclass(frozen=True)
class EffectiveSpec:
    path: str = "exact"                   # exact | dominant


@dataclass(frozen=True)
class SweepSpec:
    a_values: tuple = ()
    path: str = "dominant"                # dominant | full


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    tensors: PolarizationTensors
    lambda_n0: float = None               # k came from the resonance condition
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    incident: IncidentSpec = field(default_factory=IncidentSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    farfield: FarFieldSpec = field(default_factory=FarFieldSpec)
    effective: EffectiveSpec = field(default_factory=EffectiveSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    out_dir: str = None

    def wave(self):
        return IncidentWave.from_angles(self.incident.theta, self.incident.phi,
                                        self.incident.polarization, self.params.k)


# ---------------------------------------------------------------- parsing

def _complex(v, key):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_real(v[0], key), _real(v[1], key))
    if isinstance(v, bool):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"{key}: cannot read {v!r} as a complex number")


def _real(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if isinstance(v, str):
            try:
                return float(v)
            except ValueError:
                pass
        raise ConfigError(f"{key}: expected a real number, got {v!r}")
    return float(v)


def _int(v, key):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return v


def _vector(v, key):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"{key}: expected a list of three numbers")
    vec = tuple(_real(x, key) for x in v)
    if abs(math.sqrt(sum(x * x for x in vec)) - 1.0) > 1e-12:
        raise ConfigError(f"{key}: {list(vec)} is not a unit vector")
    return vec


def _tensor(v, key):
    if isinstance(v, dict):
        if set(v) != {"iso"}:
            raise ConfigError(f"{key}: a mapping must be {{iso: c}}")
        return _complex(v["iso"], key) * np.eye(3, dtype=complex)
    if isinstance(v, (list, tuple)) and len(v) == 3 and all(
            isinstance(r, (list, tuple)) and len(r) == 3 for r in v):
        return np.array([[_complex(x, key) for x in row] for row in v], dtype=complex)
    raise ConfigError(f"{key}: expected a 3x3 array or {{iso: c}}")


def _section(raw, name, spec_cls, converters):
    data = raw.get(name) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    names = {f.name for f in fields(spec_cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        conv = converters.get(k)
        kw[k] = conv(v, f"{name}.{k}") if conv and v is not None else v
    try:
        return spec_cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _choice(options):
    def conv(v, key):
        if v not in options:
            raise ConfigError(f"{key}: expected one of {list(options)}, got {v!r}")
        return v
    return conv


def _geometry_path(base_dir):
    def conv(v, key):
        p = Path(str(v))
        if not p.is_absolute():
            p = Path(base_dir) / p
        p = p.resolve()
        if not p.is_file():
            raise ConfigError(f"{key}: file {p} does not exist")
        return str(p)
    return conv


def _orientation(v, key):
    return None if v is None else _vector(v, key)


def _a_values(v, key):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list")
    return tuple(_real(x, key) for x in v)


def parse_config(raw, base_dir="."):
    """Build a :class:`RunConfig` from a parsed YAML mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    allowed = set(MODEL_KEYS) | {"k", "resonance"} | set(SECTIONS)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("a", "h", "t1", "t2"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    model = {}
    for key in MODEL_KEYS:
        if key not in raw:
            continue
        if key in COMPLEX_KEYS:
            model[key] = _complex(raw[key], key)
        elif key in INT_KEYS:
            model[key] = _int(raw[key], key)
        else:
            model[key] = _real(raw[key], key)
    if ("k" in raw) == ("resonance" in raw):
        raise ConfigError("give exactly one of 'k' or 'resonance: {lambda_n0: ...}'")
    lambda_n0 = None
    try:
        if "k" in raw:
            params = ModelParams(k=_real(raw["k"], "k"), **model)
        else:
            res = raw["resonance"]
            if not isinstance(res, dict) or set(res) != {"lambda_n0"}:
                raise ConfigError("resonance: expected {lambda_n0: value}")
            lambda_n0 = _real(res["lambda_n0"], "resonance.lambda_n0")
            probe = ModelParams(k=1.0, **model)
            params = replace(probe, k=wavenumber_from_resonance(lambda_n0, probe))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    tdata = raw.get("tensors") or {}
    if not isinstance(tdata, dict) or set(tdata) - set(TENSOR_NAMES):
        raise ConfigError(f"tensors: keys must be among {list(TENSOR_NAMES)}")
    tensors = PolarizationTensors(**{n: _tensor(tdata[n], f"tensors.{n}") if n in tdata else np.eye(3)
                                     for n in TENSOR_NAMES})

    geometry = _section(raw, "geometry", GeometrySpec, {
        "kind": _choice(("lattice", "random", "file")), "seed": _int, "count_override": _int,
        "orientation": _orientation, "path": _geometry_path(base_dir), "max_attempts": _int,
    })
    if geometry.kind == "random" and "orientation" not in (raw.get("geometry") or {}):
        # random clusters draw their axes unless an orientation is fixed
        geometry = replace(geometry, orientation=None)
    if geometry.kind == "file" and geometry.path is None:
        raise ConfigError("geometry.path is required when geometry.kind is 'file'")
    if geometry.kind == "lattice" and geometry.orientation is None:
        raise ConfigError("a lattice cluster needs a shared orientation")
    if not 0 <= geometry.seed < MAX_SEED:
        raise ConfigError("geometry.seed must be an unsigned 64-bit integer")
    incident = _section(raw, "incident", IncidentSpec,
                        {"theta": _real, "phi": _real, "polarization": _real})
    solver = _section(raw, "solver", SolverSpec, {
        "method": _choice(("auto", "dense", "jacobi", "gauss-seidel")), "tol": _real,
        "max_iter": _int, "cap": _int,
    })
    farfield = _section(raw, "farfield", FarFieldSpec, {
        "n_theta": _int, "n_phi": _int, "normalization": _choice(FAR_FIELD_NORMALIZATIONS),
    })
    effective = _section(raw, "effective", EffectiveSpec, {"path": _choice(("exact", "dominant"))})
    sweep = _section(raw, "sweep", SweepSpec, {"a_values": _a_values,
                                               "path": _choice(("dominant", "full"))})
    out = raw.get("output") or {}
    if not isinstance(out, dict) or set(out) - {"dir"}:
        raise ConfigError("output: only the key 'dir' is allowed")
    return RunConfig(params, tensors, lambda_n0, geometry, incident, solver, farfield,
                     effective, sweep, out.get("dir"))


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(raw, base_dir=path.parent)


# ---------------------------------------------------------------- emitting

def _emit_complex(c):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


def _emit_tensor(m):
    if np.array_equal(m, m[0, 0] * np.eye(3)):
        return {"iso": _emit_complex(m[0, 0])}
    return [[_emit_complex(x) for x in row] for row in m]


def config_to_dict(cfg):
    """Canonical mapping; ``parse_config(config_to_dict(cfg)) == cfg``."""
    p = cfg.params
    out = {}
    for key in MODEL_KEYS:
        v = getattr(p, key)
        out[key] = _emit_complex(v) if key in COMPLEX_KEYS else v
    if cfg.lambda_n0 is None:
        out["k"] = p.k
    else:
        out["resonance"] = {"lambda_n0": cfg.lambda_n0}
    out["tensors"] = {n: _emit_tensor(getattr(cfg.tensors, n)) for n in TENSOR_NAMES}
    geo = asdict(cfg.geometry)
    geo["orientation"] = None if cfg.geometry.orientation is None else list(cfg.geometry.orientation)
    out["geometry"] = geo
    out["incident"] = asdict(cfg.incident)
    out["solver"] = asdict(cfg.solver)
    out["farfield"] = asdict(cfg.farfield)
    out["effective"] = asdict(cfg.effective)
    out["sweep"] = {"a_values": list(cfg.sweep.a_values), "path": cfg.sweep.path}
    if cfg.out_dir is not None:
        out["output"] = {"dir": cfg.out_dir}
    return out


def emit_config(cfg):
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True)


def config_hash(cfg):
    text = json.dumps(_jsonable(config_to_dict(cfg)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- output helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


class Writer:
    def __init__(self, out_dir, digest):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.digest = digest
        self.comment = f"config_sha256={digest}"
        self.written = []

    def path(self, name):
        p = self.dir / name
        self.written.append(p)
        return p

    def json(self, name, data):
        payload = dict(_jsonable(data))
        payload["config_sha256"] = self.digest
        self.path(name).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


MOMENT_COLUMNS = ("dimer", "moment", "x_re", "x_im", "y_re", "y_im", "z_re", "z_im")


def _moment_rows(u, names):
    for m, per in enumerate(u):
        for name, vec in zip(names, per):
            row = [m, name]
            for c in vec:
                row += [float(c.real), float(c.imag)]
            yield row


# ---------------------------------------------------------------- subcommands

def build_geometry(cfg):
    geo, s = cfg.geometry, cfg.params.scaling
    if geo.kind == "lattice":
        return make_lattice_cluster(s, orientation=geo.orientation, count_override=geo.count_override)
    if geo.kind == "random":
        return make_random_cluster(s, seed=geo.seed, max_attempts=geo.max_attempts,
                                   count_override=geo.count_override, orientation=geo.orientation)
    return read_geometry(geo.path)


def _solve(sys, cfg):
    sp = cfg.solver
    return solve(sys, method=sp.method, cap=sp.cap, tol=sp.tol, max_iter=sp.max_iter)


def cmd_geometry(cfg, out, log):
    g = build_geometry(cfg)
    write_geometry(g, out.path("geometry.csv"), comment=out.comment)
    rep = validate_geometry(g, cfg.params.scaling)
    out.json("validation.json", rep.to_dict())
    log(f"{len(g)} dimers, d_in={g.realized_d_in:.6g}, d_out={g.realized_d_out:.6g}, ok={rep.ok}")


REGIME_COLUMNS = ("condition", "value", "bound", "passed", "margin", "detail")


def cmd_check(cfg, out, log):
    reg = check_regime(cfg.params)
    inv = check_invertibility(cfg.params, cfg.tensors)
    conds = reg.conditions + inv.conditions
    out.csv("regime.csv", REGIME_COLUMNS,
            ([c.name, c.value, c.bound, c.passed, c.margin, c.detail] for c in conds))
    out.json("regime.json", {"regime": reg.to_dict(), "invertibility": inv.to_dict(),
                             "passed": reg.passed and inv.passed})
    for c in conds:
        log(f"{c.name:10s} {'pass' if c.passed else 'FAIL'}  value={c.value:.6g}  bound={c.bound:.6g}")


def _solved(cfg, out, reduced):
    g = build_geometry(cfg)
    asm = assemble_reduced_system if reduced else assemble_full_system
    sys = asm(g, cfg.params, cfg.tensors, cfg.wave())
    tag = "reduced_" if reduced else ""
    names = ("Q1", "R2") if reduced else ("Q1", "R1", "Q2", "R2")
    try:
        u, rep = _solve(sys, cfg)
    except NotConverged as exc:
        out.csv(f"{tag}moments.csv", MOMENT_COLUMNS, _moment_rows(exc.moments, names))
        out.json(f"{tag}solve_report.json", exc.report.to_dict())
        raise
    out.csv(f"{tag}moments.csv", MOMENT_COLUMNS, _moment_rows(u, names))
    out.json(f"{tag}solve_report.json", rep.to_dict())
    return g, sys, u, rep


def cmd_solve(cfg, out, log):
    _, _, _, rep = _solved(cfg, out, reduced=False)
    log(f"{rep.method}: {rep.iterations} iteration(s), relative residual {rep.relative_residual:.3g}")


def _pattern(cfg, out, g, u, reduced, name):
    ff = cfg.farfield
    pat = far_field_grid(u, g, cfg.params.k, ff.n_theta, ff.n_phi, reduced=reduced,
                         normalization=ff.normalization)
    write_far_field_csv(pat, out.path(name), comment=out.comment)
    return scattering_cross_section(pat)


def cmd_farfield(cfg, out, log):
    g, _, u, _ = _solved(cfg, out, reduced=False)
    sigma = _pattern(cfg, out, g, u, False, "farfield.csv")
    out.json("cross_section.json", {"cross_section": sigma, "n_theta": cfg.farfield.n_theta,
                                    "n_phi": cfg.farfield.n_phi,
                                    "normalization": cfg.farfield.normalization})
    log(f"cross section {sigma:.6g}")


def cmd_reduced(cfg, out, log):
    g, _, u, _ = _solved(cfg, out, reduced=True)
    sigma = _pattern(cfg, out, g, u, True, "reduced_farfield.csv")
    out.json("reduced_cross_section.json", {"cross_section": sigma, "n_theta": cfg.farfield.n_theta,
                                            "n_phi": cfg.farfield.n_phi,
                                            "normalization": cfg.farfield.normalization})
    log(f"reduced cross section {sigma:.6g}")


TENSOR_COLUMNS = ("tensor", "row", "col", "re", "im")


def cmd_effective(cfg, out, log):
    g = build_geometry(cfg)
    if g.shared_orientation() is None:
        raise ConfigError("the effective pipeline needs identically oriented dimers")
    p, t = cfg.params, cfg.tensors
    d = g.z2[0] - g.z1[0]
    if cfg.effective.path == "exact":
        pol = dimer_polarizability(assemble_A(np.zeros(3), d, p, t))
    else:
        pol = dominant_polarizability(p, t, d)
    chi = susceptibilities(pol, number_density(p))
    eff = effective_tensors(chi, p)
    named = [("eps_eff", eff.eps_eff), ("mu_eff", eff.mu_eff), ("xi", eff.xi), ("zeta", eff.zeta),
             ("chiHH", chi.chiHH), ("chiHE", chi.chiHE), ("chiEH", chi.chiEH), ("chiEE", chi.chiEE)]
    rows = ([name, i, j, float(m[i, j].real), float(m[i, j].imag)]
            for name, m in named for i in range(3) for j in range(3))
    out.csv("effective.csv", TENSOR_COLUMNS, rows)
    out.json("effective.json", {"path": cfg.effective.path, "rho": chi.rho,
                                "min_eig_re_eps": eff.min_eig_eps, "min_eig_re_mu": eff.min_eig_mu,
                                **eff.flags()})
    log(f"min eig Re eps={eff.min_eig_eps:.6g}, Re mu={eff.min_eig_mu:.6g}, flags={eff.flags()}")


def cmd_sweep(cfg, out, log):
    if not cfg.sweep.a_values:
        raise ConfigError("sweep.a_values is empty")
    orientation = cfg.geometry.orientation or (0.0, 0.0, 1.0)
    try:
        res = scaling_sweep(cfg.params, cfg.tensors, cfg.sweep.a_values,
                            orientation=orientation, path=cfg.sweep.path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_sweep_csv(res, out.path("sweep.csv"), comment=out.comment)
    out.json("sweep.json", {"path": res.path, "slopes": res.slopes, "predicted": res.predicted,
                            "residuals": res.residuals,
                            "relative_slope_errors": res.relative_slope_errors()})
    for b in ("HH", "HE", "EH", "EE"):
        log(f"chi{b}: slope {res.slopes[b]:.10g} (predicted {res.predicted[b]:.10g})")


COMMANDS = {
    "geometry": cmd_geometry, "check": cmd_check, "solve": cmd_solve, "farfield": cmd_farfield,
    "reduced": cmd_reduced, "effective": cmd_effective, "sweep": cmd_sweep,
}


# ---------------------------------------------------------------- entry point

def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="foldylax", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    parser.add_argument("--seed", type=_seed, help="geometry seed (overrides the config)")
    parser.add_argument("--quiet", action="store_true", help="suppress the console summary")
    return parser


def resolve_out_dir(arg, cfg):
    return arg or os.environ.get(OUT_ENV) or cfg.out_dir or "out"


def run(subcommand, cfg, out_dir, quiet=False):
    """Run one subcommand; returns the exit status."""
    log = (lambda msg: None) if quiet else (lambda msg: print(msg))
    try:
        out = Writer(out_dir, config_hash(cfg))
        COMMANDS[subcommand](cfg, out, log)
    except ConfigError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except FoldyLaxError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # remaining ValueErrors come from argument validation in the library
        print(f"error[config_error]: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, geometry=replace(cfg.geometry, seed=args.seed))
    except ConfigError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except FoldyLaxError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    return run(args.subcommand, cfg, resolve_out_dir(args.out, cfg), args.quiet)


if __name__ == "__main__":
    sys.exit(main())
