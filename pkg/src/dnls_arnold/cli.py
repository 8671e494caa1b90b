"""Command-line front end.

Every subcommand writes its artifacts into ``--out`` (a directory) together
with ``manifest.json`` holding the resolved configuration, the package
version and SHA-256 checksums of the outputs.  Options may also come from a
flat ``key = value`` file given with ``--config``; explicit flags win.

Exit status: 0 on success, 1 on numerical failure, 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import chain as ch
from . import darboux as dx
from . import integrator as integ
from . import isospectral as iso
from . import lattice as lat
from . import melnikov as mel

SUBCOMMANDS = ("simulate", "spectrum", "homoclinic", "melnikov", "chain", "verify")

# fixed spectral sample points for drift reports: on and off the unit circle
DRIFT_Z = (0.7 + 0.2j, 1.3 - 0.4j, np.exp(0.5j), np.exp(2.1j), 2.2 + 0.0j, 0.45j, -1.6 + 0.9j, np.exp(-1.2j))


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str = "verify"
    N: int = 3
    omega: float = 0.0
    mode: str = "none"           # perturbation / Melnikov mode
    epsilon: float = 0.0
    alpha: float = 0.0
    tol: float = 1e-11
    t0: float = 0.0
    t1: float = 10.0
    samples: int = 201
    a: float = 6.0
    gamma: float = 0.0
    p: float = 0.0
    branch: int = 1
    noise: float = 0.0
    seed: int = 0
    r_min: float = 0.2
    r_max: float = 5.0
    grid: int = 64
    a_min: float = 5.3
    a_max: float = 12.0
    points: int = 64
    T: float = 0.0               # 0 selects the automatic window
    A1: float = 6.0
    A2: float = 6.01
    margin: float = 0.1
    threads: int = 0             # 0 defers to the environment
    out: str = "out"

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.mode not in ("none",) + mel.MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        checks = [
            (self.N >= 3, "N must be >= 3"),
            (self.omega >= 0, "omega must be >= 0"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (1e-14 < self.tol < 1e-3, "tol must lie in (1e-14, 1e-3)"),
            (self.t1 > self.t0, "t1 must exceed t0"),
            (self.samples >= 2, "samples must be >= 2"),
            (self.branch in (1, -1), "branch must be +1 or -1"),
            (0 < self.r_min < self.r_max, "need 0 < r_min < r_max"),
            (self.grid >= 2, "grid must be >= 2"),
            (self.a_min <= self.a_max, "need a_min <= a_max"),
            (self.points >= 1, "points must be >= 1"),
            (self.T >= 0, "T must be >= 0"),
            (self.A1 <= self.A2, "need A1 <= A2"),
            (0 <= self.margin < 1, "margin must lie in [0, 1)"),
            (self.threads >= 0, "threads must be >= 0"),
            (self.noise >= 0, "noise must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)
        return self

    @property
    def params(self) -> lat.LatticeParams:
        return lat.LatticeParams(self.N, self.omega)

    @property
    def pert(self) -> lat.PerturbationSpec:
        return lat.PerturbationSpec(self.mode, self.epsilon, self.alpha)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(**parse_kv(text))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"int": int, "float": float, "str": str}


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {num}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise UsageError(f"config line {num}: unknown key {key!r}")
        try:
            out[key] = _CASTS[_TYPES[key]](val)
        except ValueError as e:
            raise UsageError(f"config line {num}: bad value for {key}: {val!r}") from e
    return out


# -- output helpers --------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, outdir: Path, files) -> Path:
    man = {
        "package": "dnls_arnold",
        "version": __version__,
        "config": cfg.to_dict(),
        "outputs": {p.name: sha256(p) for p in sorted(files)},
    }
    return write_json(outdir / "manifest.json", man)


# -- subcommands ------------------------------------------------------------------

def _initial_state(cfg: RunConfig) -> np.ndarray:
    P = cfg.params
    q = lat.plane_wave(P, cfg.a, cfg.gamma)
    if cfg.noise > 0:
        q = q + lat.random_even_state(P, np.random.default_rng(cfg.seed), cfg.noise)
    return lat.lattice_state(q, P)


def cmd_simulate(cfg: RunConfig, outdir: Path):
    P = cfg.params
    traj = integ.evolve(_initial_state(cfg), cfg.t0, cfg.t1, P, cfg.pert, tol=cfg.tol, samples=cfg.samples)
    header = ["t"] + [f"{part}_q{n}" for n in range(P.N) for part in ("re", "im")]
    rows = ([t] + [v for z in q for v in (z.real, z.imag)] for t, q in zip(traj.times, traj.states))
    files = [write_csv(outdir / "trajectory.csv", header, rows)]
    rows = [[k, "", "", r.max_abs_drift, r.at_time]
            for k, r in ((k, integ.drift_monitor(traj, k)) for k in ("H0", "I", "D"))]
    for z in DRIFT_Z:
        r = integ.drift_monitor(traj, "Delta", complex(z))
        rows.append(["Delta", complex(z).real, complex(z).imag, r.max_abs_drift, r.at_time])
    files.append(write_csv(outdir / "drift.csv", ["quantity", "re_z", "im_z", "max_abs_drift", "at_time"], rows))
    for name, zr, zi, d, at in rows:
        label = name if zr == "" else f"Delta({zr:+.3f}{zi:+.3f}i)"
        print(f"{label:>22s}  drift {d:.3e}  at t = {at:.6g}")
    return files, True


def cmd_spectrum(cfg: RunConfig, outdir: Path):
    P = cfg.params
    q = _initial_state(cfg)
    r = np.geomspace(cfg.r_min, cfg.r_max, cfg.grid)
    th = np.linspace(-np.pi, np.pi, cfg.grid, endpoint=False)
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    d = iso.discriminant(z, q, P)
    dd = iso.discriminant_derivative(z, q, P)
    files = [write_csv(outdir / "spectrum.csv", ["re_z", "im_z", "re_delta", "im_delta", "abs_ddelta"],
                       zip(z.real, z.imag, d.real, d.imag, np.abs(dd)))]
    scans = iso.find_critical_points(q, P, cfg.r_min, cfg.r_max)
    files.append(write_csv(outdir / "critical_points.csv",
                           ["re_z", "im_z", "re_delta", "im_delta", "abs_ddelta", "abs_d2delta", "simple"],
                           ([s.z.real, s.z.imag, s.delta.real, s.delta.imag, abs(s.ddelta_dz), abs(s.d2delta_dz2), s.is_simple]
                            for s in scans)))
    print(f"{len(scans)} critical points in {len(iso.spectral_classes(scans))} classes")
    return files, True


def cmd_homoclinic(cfg: RunConfig, outdir: Path):
    P = cfg.params
    hp = dx.HomoclinicParams(cfg.a, cfg.gamma, cfg.p, cfg.branch, P)
    c = hp.const
    ts = np.linspace(-5 / c.mu, 5 / c.mu, cfg.points) - cfg.p / c.mu
    Q = dx.homoclinic_orbit(hp, ts)
    dQ = dx.homoclinic_time_derivative(hp, ts)
    cp, cm = dx.closed_form_coefficients(hp)
    frame = dx.PlaneWaveFrame.build(hp)
    rows = []
    worst = 0.0
    for k, t in enumerate(ts):
        resid = float(np.max(np.abs(dQ[k] - lat.rhs_unperturbed(Q[k], P))))
        Qd, _ = dx.dressed_plane_wave(hp, cp, cm, t, frame)
        diff = float(np.max(np.abs(Qd - Q[k])))
        worst = max(worst, resid)
        rows.append([t] + [v for z in Q[k] for v in (z.real, z.imag)] + [resid, diff])
    header = ["t"] + [f"{part}_Q{n}" for n in range(P.N) for part in ("re", "im")] + ["residual", "darboux_diff"]
    files = [write_csv(outdir / "homoclinic.csv", header, rows)]
    print(f"mu = {c.mu:.17g}, z_hat = {c.z_hat:.17g}, phi = {c.phi:.17g}, max residual {worst:.3e}")
    return files, True


def _threads(cfg):
    return cfg.threads or None


def cmd_melnikov(cfg: RunConfig, outdir: Path):
    mode = cfg.mode
    P = cfg.params
    grid = np.linspace(cfg.a_min, cfg.a_max, cfg.points) if cfg.points > 1 else np.array([cfg.a_min])
    sweep = mel.sweep_curves(mode, grid, P, branch=cfg.branch, tol=cfg.tol, workers=_threads(cfg), T=cfg.T or None)
    files = [write_csv(outdir / "melnikov.csv", mel.CSV_COLUMNS, (r.row() for r in sweep.results))]
    for f in sweep.flags:
        print("flag:", f)
    print(f"{len(sweep.results)} points, {len(sweep.flags)} flags")
    return files, True


def cmd_chain(cfg: RunConfig, outdir: Path):
    mode = cfg.mode
    if cfg.epsilon <= 0:
        raise UsageError("chain needs --epsilon > 0")
    P = cfg.params
    alpha = cfg.alpha
    if alpha == 0.0:
        # default: ten times the largest threshold over a coarse grid of the span
        grid = np.linspace(cfg.A1, cfg.A2, 9)
        alpha = 10.0 * max(mel.alpha_threshold(mel.compute_M(mode, a, P, branch=cfg.branch)) for a in grid)
    chain = ch.build_chain(mode, cfg.A1, cfg.A2, cfg.epsilon, alpha, P, margin=cfg.margin, branch=cfg.branch)
    files = [write_json(outdir / "chain.json", chain.to_dict())]
    print(f"{len(chain.amplitudes)} levels, {len(chain.links)} links, bridging at {chain.bridging}")
    return files, True


def cmd_verify(cfg: RunConfig, outdir: Path):
    from .verify import run_battery

    rows = run_battery(seed=cfg.seed)
    files = [write_csv(outdir / "verify.csv", ["check", "value", "threshold", "passed"],
                       ([r.name, r.value, r.threshold, r.passed] for r in rows))]
    width = max(len(r.name) for r in rows)
    for r in rows:
        print(f"{r.name:<{width}s}  {r.value:10.3e}  <= {r.threshold:8.1e}  {'PASS' if r.passed else 'FAIL'}")
    ok = all(r.passed for r in rows)
    print("all checks passed" if ok else "some checks FAILED")
    return files, ok


COMMANDS = {
    "simulate": cmd_simulate, "spectrum": cmd_spectrum, "homoclinic": cmd_homoclinic,
    "melnikov": cmd_melnikov, "chain": cmd_chain, "verify": cmd_verify,
}


# -- argument parsing ------------------------------------------------------------------

_FLAG_NAMES = {
    "a_min": "--a-min", "a_max": "--a-max", "r_min": "--r-min", "r_max": "--r-max",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnls-arnold", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        for f in fields(RunConfig):
            if f.name == "subcommand":
                continue
            flag = _FLAG_NAMES.get(f.name, "--" + f.name)
            kind = _CASTS[_TYPES[f.name]]
            extra = {"choices": ("none",) + mel.MODES} if f.name == "mode" else {}
            sp.add_argument(flag, dest=f.name, type=kind, default=None, **extra)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        try:
            values.update(parse_kv(Path(ns.config).read_text()))
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from e
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            values[f.name] = v
    values["subcommand"] = ns.subcommand
    if ns.subcommand in ("melnikov", "chain"):
        if values.get("mode", "none") == "none":
            values["mode"] = "nonresonant"
        if ns.subcommand == "chain":
            values.setdefault("epsilon", 1e-3)
    return RunConfig(**values).validate()


def run(cfg: RunConfig) -> int:
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        files, ok = COMMANDS[cfg.subcommand](cfg, outdir)
    except (integ.IntegrationError, mel.SolvabilityError, ch.ChainError, iso.CriticalPointLost,
            FloatingPointError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    write_manifest(cfg, outdir, files)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        cfg.params, cfg.pert  # noqa: B018  (validates through the dataclasses)
    except (UsageError, ValueError) as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
