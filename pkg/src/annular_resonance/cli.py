"""Batch front end: ``modes``, ``resonances``, ``enhance``, ``kappa`` and ``validate``.

A run is described by a JSON config with nested groups; every leaf can be
overridden by a flag of the same name (``--h 0.01``, ``--quad_radial 48``).
Exit status: 2 on a config error, 1 if ``validate`` reports a FAIL, else 0.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .annulus_modes import Family, Geometry, Parity, first_roots, find_roots, radial_mode
from .enhancement import ExcitationKind, enhancement_scan, scan_to_csv
from .kernel import gram_from_csv, kappa_target, singlelayer_gram
from .resonance import (
    NoConvergenceError,
    asymptotic_resonances,
    default_k_max,
    refine_many,
    resonances_to_csv,
)
from .validation import CriterionResult, format_result, run_suite

__all__ = ["ConfigError", "RunConfig", "load_config", "main"]

THREADS_ENV = "ANNULAR_RESONANCE_THREADS"
KAPPA_ORDERS = (8, 16, 32, 64)
MODE_COLUMNS = ["family", "m", "n", "h", "beta", "lambda", "bracket_lo", "bracket_hi"]
PROFILE_COLUMNS = ["family", "m", "n", "r", "value", "deriv"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    a: float = 1.0
    h: float | None = None
    l: float | None = None
    N: int = 8
    quad_radial: int = 32
    quad_angular: int = 256
    k_max: float | None = None
    momenta: tuple[int, ...] = (0, 1, 2)
    parities: tuple[str, ...] = ("even", "odd")
    root_tol: float = 1e-12
    newton_tol: float = 1e-9
    format: str = "csv"
    path: str | None = None

    def validate(self) -> "RunConfig":
        for name in ("a", "N", "quad_radial", "quad_angular", "root_tol", "newton_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        for name in ("h", "l", "k_max"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.h is not None and self.h > 0.2:
            raise ConfigError(f"h must lie in (0, 0.2], got {self.h}")
        if not 1 <= self.N <= 64:
            raise ConfigError("N must lie in [1, 64]")
        if self.root_tol > 1e-9:
            raise ConfigError("root_tol must not exceed 1e-9")
        if not self.momenta:
            raise ConfigError("momenta must be a non-empty list")
        for p in self.parities:
            if p not in ("even", "odd"):
                raise ConfigError(f"unknown parity {p!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.format!r}")
        return self

    def geometry(self) -> Geometry:
        if self.h is None or self.l is None:
            raise ConfigError("geometry needs both h and l")
        return Geometry(self.h, self.l, self.a)

    def band(self) -> float:
        return self.k_max if self.k_max is not None else default_k_max(self.geometry().l)


# config group -> keys; flags use the leaf names
GROUPS = {
    "geometry": ("a", "h", "l"),
    "truncation": ("N", "quad_radial", "quad_angular"),
    "band": ("k_max",),
    "tolerances": ("root_tol", "newton_tol"),
    "output": ("format", "path"),
}
TOP_LEVEL = ("momenta", "parities")
INT_KEYS = {"N", "quad_radial", "quad_angular"}


def _coerce(key: str, value):
    try:
        if key in INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if key == "momenta":
            return tuple(int(v) for v in value)
        if key == "parities":
            return tuple(str(v) for v in value)
        if key in ("format",):
            return str(value)
        if key == "path":
            return None if value is None else str(value)
        return None if value is None else float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def load_config(data: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated config from nested ``data`` and flat ``overrides``."""
    flat: dict = {}
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = set(GROUPS) | set(TOP_LEVEL)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for group, keys in GROUPS.items():
        sub = data.get(group, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"config group {group!r} must be an object")
        extra = set(sub) - set(keys)
        if extra:
            raise ConfigError(f"unknown keys in {group}: {sorted(extra)}")
        flat.update({k: _coerce(k, v) for k, v in sub.items()})
    for key in TOP_LEVEL:
        if key in data:
            flat[key] = _coerce(key, data[key])
    for k, v in (overrides or {}).items():
        if v is not None:
            flat[k] = _coerce(k, v)
    return RunConfig(**flat).validate()


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1")
    return n


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_atomic(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=f".{target.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, target)


def _emit(cfg: RunConfig, text: str, suffix: str = "") -> None:
    if cfg.path is None:
        sys.stdout.write(text)
        return
    path = cfg.path
    if suffix:
        p = Path(path)
        path = str(p.with_name(p.stem + suffix + p.suffix))
    _write_atomic(path, text)


def _csv(columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _as_json(columns: list[str], rows: list[list]) -> list[dict]:
    return [dict(zip(columns, r)) for r in rows]


# -- subcommands --------------------------------------------------------------


def cmd_modes(cfg: RunConfig, args) -> int:
    geom = cfg.geometry()
    rows, prof = [], []
    n_pts = args.profiles
    r = np.linspace(1.0, 1.0 + geom.h, n_pts) if n_pts else None
    for m in cfg.momenta:
        for fam in (Family.D, Family.N):
            roots = first_roots(fam, abs(m), geom.h, cfg.N)
            if cfg.root_tol != 1e-12:
                beta_max = roots[-1].bracket[1] * (1 + 1e-9)
                roots = find_roots(fam, abs(m), geom.h, beta_max, rel_tol=cfg.root_tol)[: cfg.N]
            for root in roots:
                rows.append(
                    [fam.value, m, root.n, _fmt(geom.h), _fmt(root.beta), _fmt(root.lam),
                     _fmt(root.bracket[0]), _fmt(root.bracket[1])]
                )
                if n_pts:
                    mode = radial_mode(fam, abs(m), root.n, geom.h)
                    for x, v, d in zip(r, mode.value(r), mode.deriv(r)):
                        prof.append([fam.value, m, root.n, _fmt(x), _fmt(v), _fmt(d)])
    if cfg.format == "json":
        doc = {"eigenvalues": _as_json(MODE_COLUMNS, rows)}
        if n_pts:
            doc["eigenfunctions"] = _as_json(PROFILE_COLUMNS, prof)
        _emit(cfg, json.dumps(doc, indent=1) + "\n")
        return 0
    _emit(cfg, _csv(MODE_COLUMNS, rows))
    if n_pts:
        text = _csv(PROFILE_COLUMNS, prof)
        if cfg.path is None:
            sys.stdout.write("\n")
        _emit(cfg, text, suffix="_profiles")
    return 0


def cmd_resonances(cfg: RunConfig, args) -> int:
    geom = cfg.geometry()
    gram = singlelayer_gram(64)
    seeds = []
    for m in cfg.momenta:
        for p in cfg.parities:
            seeds += asymptotic_resonances(m, Parity(p), geom, k_max=cfg.band(), gram=gram, variant=args.variant)
    refined = []
    if not args.no_refine:
        kw = {"n_radial": cfg.quad_radial, "n_angular": cfg.quad_angular}
        refined = _refine_all(seeds, geom, cfg, kw, _threads())
    results = seeds + refined
    if cfg.format == "json":
        doc = [
            {"m": r.m, "parity": r.parity.value, "class": r.classification.value, "mprime": r.mprime,
             "h": r.h, "l": r.l, "re_k": r.k.real, "im_k": r.k.imag, "residual": r.residual,
             "certified": r.certified, "method": r.method.value}
            for r in results
        ]
        _emit(cfg, json.dumps(doc, indent=1, default=str) + "\n")
    else:
        _emit(cfg, resonances_to_csv(results))
    return 0


def _refine_one(seed, geom, cfg: RunConfig, kw):
    try:
        return refine_many([seed], geom, cfg.N, cfg.newton_tol, 1, **kw)[0]
    except NoConvergenceError as exc:
        print(f"warning: m={seed.m} {seed.parity.value} q={seed.mprime}: {exc}", file=sys.stderr)
        return replace(seed, residual=math.inf, certified=False)


def _refine_all(seeds, geom, cfg: RunConfig, kw, threads: int):
    if threads > 1:
        try:
            return refine_many(seeds, geom, cfg.N, cfg.newton_tol, threads, **kw)
        except NoConvergenceError:
            pass  # redo serially so one stalled root does not drop the table
    return [_refine_one(s, geom, cfg, kw) for s in seeds]


def cmd_enhance(cfg: RunConfig, args) -> int:
    if cfg.l is None:
        raise ConfigError("enhance needs the slab thickness l")
    try:
        h_list = [float(x) for x in args.h_list.split(",")]
        geom = Geometry(max(h_list), cfg.l, cfg.a)
        selector = {"m": args.m, "parity": args.parity, "class": args.resonance, "mprime": args.mprime}
        rows = enhancement_scan(
            args.excitation, selector, h_list, geom, cfg.N, d1=args.d1, y3=args.y3, detune=args.detune
        )
    except (ValueError, LookupError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.format == "json":
        _emit(cfg, json.dumps([asdict(r) for r in rows], indent=1) + "\n")
    else:
        _emit(cfg, scan_to_csv(rows))
    return 0


def cmd_kappa(cfg: RunConfig, args) -> int:
    target = kappa_target()
    rows = []
    for n in KAPPA_ORDERS:
        kappa = singlelayer_gram(n).kappa
        rows.append([n, _fmt(kappa), _fmt(abs(kappa - target))])
    lines = _csv(["N", "kappa", "abs_error"], rows)
    lines += f"target={_fmt(target)} abs_error_64={_fmt(abs(singlelayer_gram(64).kappa - target))}\n"
    _emit(cfg, lines)
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    only = None
    if args.only:
        try:
            only = sorted({int(x) for x in args.only.split(",")})
        except ValueError as exc:
            raise ConfigError(f"bad --only list {args.only!r}") from exc
        if not set(only) <= set(range(1, 10)):
            raise ConfigError("criteria are numbered 1..9")
    gram = None
    if args.gram_fixture:
        try:
            text = Path(args.gram_fixture).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read Gram fixture: {exc}") from exc
        try:
            gram = gram_from_csv(text)
        except (ValueError, np.linalg.LinAlgError) as exc:
            # a fixture that does not even load fails the kappa criterion
            res = CriterionResult(1, "kappa constant", False, f"fixture rejected: {exc}", 0.0)
            print(format_result(res))
            rest = [n for n in (only or range(1, 10)) if n != 1]
            if rest:
                run_suite(only=rest, report=print)
            return 1
    results = run_suite(only=only, gram=gram, report=print)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "modes": cmd_modes,
    "resonances": cmd_resonances,
    "enhance": cmd_enhance,
    "kappa": cmd_kappa,
    "validate": cmd_validate,
}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration (overrides the config file)")
    g.add_argument("--config", help="JSON config file with nested groups")
    g.add_argument("--a", type=float)
    g.add_argument("--h", type=float)
    g.add_argument("--l", type=float)
    g.add_argument("--N", type=int)
    g.add_argument("--quad_radial", "--quad-radial", dest="quad_radial", type=int)
    g.add_argument("--quad_angular", "--quad-angular", dest="quad_angular", type=int)
    g.add_argument("--k_max", "--k-max", dest="k_max", type=float)
    g.add_argument("--momenta", help="comma separated, e.g. 0,1,2")
    g.add_argument("--parities", help="comma separated subset of even,odd")
    g.add_argument("--root_tol", "--root-tol", dest="root_tol", type=float)
    g.add_argument("--newton_tol", "--newton-tol", dest="newton_tol", type=float)
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--path", help="output file (default: stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="annular-resonance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", parents=[common], help="annulus eigenvalue and eigenfunction tables")
    p.add_argument("--profiles", type=int, default=0, help="radial samples per eigenfunction (0: none)")

    p = sub.add_parser("resonances", parents=[common], help="asymptotic and refined resonance tables")
    p.add_argument("--variant", choices=("consistent", "literal"), default="consistent",
                   help="asymptotic coefficient set used for the seeds")
    p.add_argument("--no-refine", action="store_true", help="emit the asymptotic rows only")

    p = sub.add_parser("enhance", parents=[common], help="field enhancement scan at a resonance")
    p.add_argument("--excitation", choices=[e.value for e in ExcitationKind], default="normal_plane")
    p.add_argument("--resonance", choices=("TE_FabryPerot", "TE_near_m", "TEM"), default="TE_FabryPerot")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--mprime", type=int, default=2, help="axial order q of the Fabry-Perot resonance")
    p.add_argument("--parity", choices=("even", "odd"), default="even")
    p.add_argument("--h-list", default="0.02,0.01,0.005", help="strictly descending gap widths")
    p.add_argument("--d1", type=float, default=0.0, help="in-plane direction cosine (oblique drive)")
    p.add_argument("--y3", type=float, default=1.0, help="dipole height")
    p.add_argument("--detune", type=float, default=0.0, help="offset added to Re k*")

    sub.add_parser("kappa", parents=[common], help="convergence of the Gram constant kappa(N)")

    p = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", help="comma separated criterion numbers")
    p.add_argument("--gram-fixture", help="Gram CSV to use for the kappa criterion")
    return parser


def _overrides(args) -> dict:
    out = {k: getattr(args, k) for k in ("a", "h", "l", "N", "quad_radial", "quad_angular", "k_max",
                                          "root_tol", "newton_tol", "format", "path")}
    if args.momenta is not None:
        out["momenta"] = args.momenta.split(",")
    if args.parities is not None:
        out["parities"] = args.parities.split(",")
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        data = {}
        if args.config:
            try:
                data = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config: {exc}") from exc
        cfg = load_config(data, _overrides(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # domain checks raised by the library (e.g. Geometry) are config problems too
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
