"""Command-line front end: ``angelesco {equilibrium,hermite-pade,verify}``.

Exit codes: 0 success, 1 configuration error, 2 solver failure for the
equilibrium / hermite-pade commands, and for ``verify`` the failing stage:
3 equilibrium, 4 szego, 5 hermite-pade, 6 harness.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys as _sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import mpmath as mp
import numpy as np
from filelock import FileLock

from . import __version__
from . import hermite_pade as hp
from .asymptotics import StageError, default_probe_points, fmt, run_experiment
from .equilibrium import EquilibriumOptions, EquilibriumSolution, RayVector, divergence_regions, frostman_residual, solve_vector_equilibrium
from .quadrature import PrecisionPolicy
from .surface import build_surface
from .szego import SzegoEvaluator
from .weights import AngelescoSystem, RegularPart, SingularPoint, WeightSpec, validate_system

log = logging.getLogger("angelesco")

EXIT_CONFIG, EXIT_SOLVER = 1, 2
EXIT_STAGE = {"equilibrium": 3, "szego": 4, "hp": 5, "harness": 6}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    system: AngelescoSystem
    c: tuple
    indices: tuple
    points: tuple
    policy: PrecisionPolicy = field(default_factory=PrecisionPolicy)
    eq_opts: EquilibriumOptions = field(default_factory=EquilibriumOptions)
    modes: int = 256
    drift_bound: float = 2.0
    cache_dir: str = ".angelesco-cache"
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False)


_TOP = {"system", "ray", "indices", "generator", "points", "extra_points", "precision", "equilibrium", "szego_modes", "drift_bound", "cache_dir", "out_dir"}
_WEIGHT = {"interval", "regular", "singular"}
_REGULAR = {"kind", "coefficients"}
_SINGULAR = {"position", "exponent", "jump"}
_PRECISION = {"start_bits", "max_bits", "escalation_factor", "target_residual"}
_EQ = {"n_modes", "tol", "max_sweeps", "damping", "probe_points"}
_GEN = {"direction", "m"}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def _num(v, where) -> float:
    try:
        return float(mp.mpf(v)) if isinstance(v, str) else float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a number: {v!r}") from exc


def _cnum(v, where) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"{where}: complex numbers are [re, im] pairs")
        return complex(_num(v[0], where), _num(v[1], where))
    if isinstance(v, str) and "j" in v:
        try:
            return complex(v.replace(" ", ""))
        except ValueError as exc:
            raise ConfigError(f"{where}: not a complex number: {v!r}") from exc
    return complex(_num(v, where))


def _weight(d, k) -> WeightSpec:
    where = f"system[{k}]"
    _check_keys(d, _WEIGHT, where)
    if "interval" not in d:
        raise ConfigError(f"{where}: missing interval")
    iv = tuple(_num(v, where + ".interval") for v in d["interval"])
    reg = RegularPart()
    if "regular" in d:
        _check_keys(d["regular"], _REGULAR, where + ".regular")
        coeffs = tuple(_cnum(v, where + ".regular") for v in d["regular"].get("coefficients", [1]))
        coeffs = tuple(c.real if c.imag == 0 else c for c in coeffs)
        reg = RegularPart(d["regular"].get("kind", "polynomial"), coeffs)
    sing = []
    for j, s in enumerate(d.get("singular", [])):
        _check_keys(s, _SINGULAR, f"{where}.singular[{j}]")
        jump = _cnum(s.get("jump", 1), f"{where}.singular[{j}]")
        sing.append(SingularPoint(_num(s["position"], where), _num(s.get("exponent", 0), where), jump.real if jump.imag == 0 else jump))
    try:
        return WeightSpec(iv, reg, tuple(sing))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(text: str, base_dir: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    _check_keys(raw, _TOP, "config")
    if "system" not in raw or not raw["system"]:
        raise ConfigError("config: system must list at least one weight")
    system = AngelescoSystem(tuple(_weight(w, k) for k, w in enumerate(raw["system"])))
    problems = validate_system(system)
    if problems:
        raise ConfigError("invalid system: " + "; ".join(problems))
    p = system.p
    if "indices" in raw and "generator" in raw:
        raise ConfigError("config: give either indices or generator, not both")
    if "generator" in raw:
        g = raw["generator"]
        _check_keys(g, _GEN, "generator")
        k = [int(v) for v in g["direction"]]
        lo, hi = (int(v) for v in g["m"])
        indices = tuple(tuple(m * v for v in k) for m in range(lo, hi))
    else:
        indices = tuple(tuple(int(v) for v in n) for n in raw.get("indices", []))
    for n in indices:
        if len(n) != p:
            raise ConfigError(f"index {list(n)} has length {len(n)}, expected {p}")
    if "ray" in raw:
        c = tuple(_num(v, "ray") for v in raw["ray"])
    elif indices:
        c = RayVector.from_index(indices[-1]).entries
    elif p == 1:
        c = (1.0,)
    else:
        raise ConfigError("config: ray is required when no indices are given")
    try:
        c = RayVector(c).entries
    except ValueError as exc:
        raise ConfigError(f"ray: {exc}") from exc
    if len(c) != p:
        raise ConfigError(f"ray has length {len(c)}, expected {p}")
    pts_raw = raw.get("points", "default")
    if pts_raw == "default":
        points = default_probe_points(system.intervals)
    else:
        points = [_cnum(z, "points") for z in pts_raw]
    points += [_cnum(z, "extra_points") for z in raw.get("extra_points", [])]
    pol = raw.get("precision", {})
    _check_keys(pol, _PRECISION, "precision")
    try:
        policy = PrecisionPolicy(
            int(pol.get("start_bits", 128)), int(pol.get("max_bits", 4096)), _num(pol.get("escalation_factor", 2.0), "precision"),
            _num(pol.get("target_residual", "1e-30"), "precision"),
        )
    except ValueError as exc:
        raise ConfigError(f"precision: {exc}") from exc
    eq = raw.get("equilibrium", {})
    _check_keys(eq, _EQ, "equilibrium")
    eq_opts = EquilibriumOptions(**{k: (_num(v, "equilibrium") if k in ("tol", "damping") else int(v)) for k, v in eq.items()})
    base = Path(base_dir) if base_dir else Path(".")
    cache_dir = os.environ.get("ANGELESCO_CACHE_DIR") or str(base / raw.get("cache_dir", ".angelesco-cache"))
    return ExperimentConfig(
        system, c, indices, tuple(points), policy, eq_opts, int(raw.get("szego_modes", 256)), _num(raw.get("drift_bound", 2.0), "drift_bound"),
        cache_dir, str(base / raw.get("out_dir", "out")), raw,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(Path(path).parent))


# ---------------------------------------------------------------------------
# cache


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _system_key(sys: AngelescoSystem) -> list:
    out = []
    for w in sys.components:
        out.append({
            "interval": [repr(v) for v in w.interval],
            "regular": [w.regular.kind, [repr(complex(c)) for c in w.regular.coefficients]],
            "singular": [[repr(s.position), repr(s.exponent), repr(complex(s.jump))] for s in w.singular],
        })
    return out


@dataclass(frozen=True)
class CacheEntry:
    key: str
    header: str  # canonical JSON of the inputs
    payload: dict


class Cache:
    """Content-addressed JSON cache; single writer through a lock file."""

    def __init__(self, root: str):
        self.root = Path(root)

    def _paths(self, key):
        return self.root / f"{key}.json", self.root / ".lock"

    def _lookup(self, header: str):
        key = hashlib.sha256(header.encode()).hexdigest()
        path, lock = self._paths(key)
        if not path.exists():
            return key, None
        with FileLock(str(lock)):
            try:
                doc = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError):
                return key, None
        if doc.get("header") != header:
            log.warning("cache key %s matched but inputs differ; ignoring entry", key[:12])
            return key, None
        return key, CacheEntry(key, header, doc["payload"])

    def _store(self, key, header, payload):
        self.root.mkdir(parents=True, exist_ok=True)
        path, lock = self._paths(key)
        with FileLock(str(lock)):
            atomic_write(path, _canonical({"header": header, "payload": payload}))

    def _eq_header(self, intervals, c, opts):
        return _canonical({"kind": "equilibrium", "intervals": [[repr(float(v)) for v in iv] for iv in intervals], "c": [repr(float(v)) for v in c], "opts": repr(opts), "version": __version__})

    def get_equilibrium(self, intervals, c, opts):
        header = self._eq_header(intervals, c, opts)
        key, entry = self._lookup(header)
        if entry is None:
            return None
        log.info("cache hit: equilibrium %s", key[:12])
        return EquilibriumSolution.from_dict(entry.payload)

    def put_equilibrium(self, intervals, c, opts, sol):
        header = self._eq_header(intervals, c, opts)
        key = hashlib.sha256(header.encode()).hexdigest()
        self._store(key, header, sol.to_dict())

    def _sz_header(self, sys, sol, modes):
        return _canonical({"kind": "szego", "system": _system_key(sys), "equilibrium": sol.to_dict(), "modes": modes, "version": __version__})

    def get_szego(self, sys, sol, modes):
        header = self._sz_header(sys, sol, modes)
        key, entry = self._lookup(header)
        if entry is None:
            return None
        log.info("cache hit: szego %s", key[:12])
        return SzegoEvaluator.from_dict(entry.payload)

    def put_szego(self, sys, sol, modes, sz):
        header = self._sz_header(sys, sol, modes)
        key = hashlib.sha256(header.encode()).hexdigest()
        self._store(key, header, sz.to_dict())


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_all(out_dir, files: dict):
    """Write every file only after all contents are ready."""
    for name, text in files.items():
        atomic_write(Path(out_dir) / name, text)


# ---------------------------------------------------------------------------
# commands


def _csv(header, rows) -> str:
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _equilibrium(cfg: ExperimentConfig, cache: Cache):
    sol = cache.get_equilibrium(cfg.system.intervals, cfg.c, cfg.eq_opts)
    if sol is None:
        sol = solve_vector_equilibrium(cfg.system.intervals, cfg.c, cfg.eq_opts)
        cache.put_equilibrium(cfg.system.intervals, cfg.c, cfg.eq_opts, sol)
    return sol


def cmd_equilibrium(cfg: ExperimentConfig, out_dir: str) -> int:
    cache = Cache(cfg.cache_dir)
    try:
        sol = _equilibrium(cfg, cache)
        zeros = list(build_surface(cfg.system.intervals, _ray_index(cfg.c), sol).gap_zeros) if sol.p >= 2 else []
    except Exception as exc:
        print(f"equilibrium solver failed: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    doc = sol.to_dict()
    doc["frostman"] = frostman_residual(sol)
    doc["gap_zeros"] = zeros
    rows = []
    for i, d in enumerate(sol.densities):
        a, b = d.support
        for x in np.linspace(a, b, 203)[1:-1]:
            rows.append([i + 1, fmt(x), fmt(float(d.density(np.array([x]))[0]))])
    lo = min(a for a, _ in sol.intervals)
    hi = max(b for _, b in sol.intervals)
    L = hi - lo
    xs = np.linspace(lo - 0.5 * L, hi + 0.5 * L, 81)
    ys = np.linspace(-0.5 * L, 0.5 * L, 40)  # even count keeps the real axis off the grid
    dm = divergence_regions(sol, (xs, ys))
    reg_rows = []
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            reg_rows.append([fmt(x), fmt(y)] + [int(dm.labels[i][iy, ix]) for i in range(sol.p)] + [fmt(float(dm.u[i][iy, ix])) for i in range(sol.p)])
    p = sol.p
    write_all(out_dir, {
        "equilibrium.json": json.dumps(doc, indent=1, sort_keys=True) + "\n",
        "density.csv": _csv(["component", "x", "density"], rows),
        "regions.csv": _csv(["x", "y"] + [f"label_{i + 1}" for i in range(p)] + [f"u_{i + 1}" for i in range(p)], reg_rows),
    })
    return 0


def _ray_index(c):
    # a multi-index on the ray (for gap zeros only the direction matters)
    return tuple(max(1, round(1000 * v)) for v in c)


def _full(v, bits):
    """Decimal string at the stored precision; complex values become [re, im]."""
    digits = max(30, int(bits * math.log10(2)))
    v = mp.mpmathify(v)
    if isinstance(v, mp.mpc) and v.imag == 0:
        v = v.real
    with mp.workprec(bits + 16):
        if isinstance(v, mp.mpc):
            return [mp.nstr(v.real, digits, strip_zeros=False), mp.nstr(v.imag, digits, strip_zeros=False)]
        return mp.nstr(v, digits, strip_zeros=False)


def cmd_hermite_pade(cfg: ExperimentConfig, out_dir: str) -> int:
    files, rows, failures = {}, [], 0
    for n in cfg.indices:
        try:
            res = hp.solve(cfg.system, n, cfg.policy)
        except Exception as exc:
            failures += 1
            print(f"index {list(n)} failed: {exc}", file=_sys.stderr)
            continue
        tag = "_".join(str(v) for v in n)
        bits = res.precision_bits
        files[f"hp_{tag}.json"] = json.dumps({
            "index": list(n),
            "Q": [_full(c, bits) for c in res.Q],
            "P": [[_full(c, bits) for c in Pi] for Pi in res.P],
            "ortho_residual": fmt(res.ortho_residual),
            "precision_bits": res.precision_bits,
            "normal": res.normal,
        }, indent=1) + "\n"
        rows.append(list(n) + [sum(n), fmt(res.ortho_residual), res.precision_bits, fmt(bool(res.normal))])
    if cfg.indices and failures == len(cfg.indices):
        return EXIT_SOLVER
    p = cfg.system.p
    files["summary.csv"] = _csv([f"n_{i + 1}" for i in range(p)] + ["n_total", "ortho_residual", "precision_bits", "normal"], rows)
    write_all(out_dir, files)
    return 0


def cmd_verify(cfg: ExperimentConfig, out_dir: str) -> int:
    cache = Cache(cfg.cache_dir)
    try:
        rep = run_experiment(cfg, cache)
    except StageError as exc:
        print(str(exc), file=_sys.stderr)
        return EXIT_STAGE[exc.stage]
    write_all(out_dir, {"asymptotics.csv": rep["csv"], "asymptotics.json": rep["json"]})
    return 0


def plan(cfg: ExperimentConfig, command: str, out_dir: str) -> str:
    lines = [f"command: {command}", f"components: {cfg.system.p}", f"intervals: {cfg.system.intervals}", f"ray: {cfg.c}"]
    if command in ("hermite-pade", "verify"):
        lines.append(f"indices: {len(cfg.indices)} (max |n| = {max((sum(n) for n in cfg.indices), default=0)})")
        lines.append(f"precision: start {cfg.policy.start_bits} bits, max {cfg.policy.max_bits} bits")
    if command == "verify":
        lines.append(f"probe points: {len(cfg.points)}")
        lines.append(f"stages: equilibrium -> szego ({cfg.modes} modes) -> surfaces -> hermite-pade -> tables")
    lines.append(f"cache: {cfg.cache_dir}")
    lines.append(f"output: {out_dir}")
    return "\n".join(lines)


COMMANDS = {"equilibrium": cmd_equilibrium, "hermite-pade": cmd_hermite_pade, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="angelesco", description="Hermite-Pade approximants for Angelesco systems.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment description")
        sp.add_argument("--out", default=None, help="output directory (default: out_dir from the config)")
        sp.add_argument("--dry-run", action="store_true", help="print the execution plan and exit")
        sp.add_argument("--precision-bits", type=int, default=None, help="override the starting precision")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=_sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(logging.INFO)
    try:
        cfg = load_config(args.config)
        if args.precision_bits is not None:
            cfg = replace(cfg, policy=replace(cfg.policy, start_bits=args.precision_bits, max_bits=max(cfg.policy.max_bits, args.precision_bits)))
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.out_dir
    if args.dry_run:
        print(plan(cfg, args.command, out_dir))
        return 0
    return COMMANDS[args.command](cfg, out_dir)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
