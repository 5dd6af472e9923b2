"""Command-line front end: configuration, orchestration, result emission.

Configs are flat ``key = value`` text files with ``#`` comments.  Momentum
triples are whitespace-separated; scan lists use whitespace between numbers
and ``;`` between momentum triples.  Outputs are CSV tables with a trailing
metadata comment block (config hash and package version), plus a
gnuplot-compatible script for the effective-mass scan.  All numeric paths
are deterministic, so rerunning a command on the same config reproduces
byte-identical files at any thread count.

Subcommands: validate, cascade, mass-scan, verify, grid-dump.
Exit codes: 0 ok, 1 assertion or constraint failure, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import (CascadeError, SolverOptions, convergence_report,
                      run_cascade, trace_csv, validate_params,
                      write_vector_file)
from .fock import FockBasis, ResourceError, enumerate_basis
from .hamiltonian import ModelParams
from .modes import ModeGrid, ParameterError, build_grid
from .observables import (cross_term_probe, displaced_frame_ground,
                          energy_lipschitz_probe, mass_scan,
                          pull_through_summary, resolvent_bound_probes,
                          scan_csv, scan_tail_summary, soft_photon_probe)
from .spectral import ConditioningError, ContourError, SolverError


class ConfigError(ValueError):
    """Config file problem, with file/line location in the message."""


_REQUIRED_KEYS = ("alpha", "epsilon", "P", "J")

_DEFAULTS = {
    "Lambda": "1.0",
    "mu": "0.2",
    "rho_minus": "0.1",
    "rho_plus": "0.4",
    "C_alpha": "0.35",
    "ir_floor_C": "2.5",
    "n_radial": "1",
    "angular_set": "octahedral6",
    "n_max": "2",
    "c_max": "2",
    "dense_limit": "4000",
    "dense_eig_cutoff": "600",
    "ground_tol": "1e-10",
    "contour_nodes": "64",
    "defect_tol": "1e-8",
    "max_nodes": "512",
    "krylov_tol": "1e-10",
    "krylov_max": "1200",
    "allow_invalid": "false",
    "mass_route": "displaced",
    "fd_gradient": "true",
    "alphas": "",
    "P_list": "",
    "out_dir": ".",
    "dump_vectors": "false",
    "basis_limit": "2000000",
    "delta": "0.2",
}


def _parse_bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _parse_triple(text: str, where: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ConfigError(f"{where}: expected 3 numbers, got {text!r}")
    try:
        return np.array([float(x) for x in parts])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    """Validated configuration: model, grid, basis, solver, and scan."""

    params: ModelParams
    n_radial: int
    angular_set: str
    n_max: int
    c_max: int
    basis_limit: int
    opts: SolverOptions
    alphas: list = field(default_factory=list)
    p_list: list = field(default_factory=list)
    out_dir: str = "."
    dump_vectors: bool = False
    delta: float = 0.2
    sha256: str = ""

    def build_grid(self) -> ModeGrid:
        return build_grid(self.params.cutoffs, self.n_radial,
                          self.angular_set)

    def build_basis(self, grid: ModeGrid) -> FockBasis:
        return enumerate_basis(grid.n_modes, self.n_max, self.c_max,
                               size_limit=self.basis_limit)


def parse_config(path) -> RunConfig:
    """Read and validate a flat key=value config with line diagnostics."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    text = raw.decode("utf-8")

    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(
                f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in values:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} "
                f"(first set on line {lines[key]})")
        values[key] = val
        lines[key] = lineno

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"{path}: missing required key {key!r}")
    unknown = set(values) - set(_DEFAULTS) - set(_REQUIRED_KEYS)
    if unknown:
        where = ", ".join(f"{k!r} (line {lines[k]})" for k in sorted(unknown))
        raise ConfigError(f"{path}: unknown keys: {where}")

    def get(key: str) -> str:
        return values[key] if key in values else _DEFAULTS[key]

    def num(key: str, cast=float):
        txt = get(key)
        where = f"{path}:{lines.get(key, '?')}: key {key!r}"
        try:
            return cast(txt)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    try:
        params = ModelParams(
            lambda_uv=num("Lambda"), alpha=num("alpha"),
            epsilon=num("epsilon"), mu=num("mu"),
            rho_minus=num("rho_minus"), rho_plus=num("rho_plus"),
            c_alpha=num("C_alpha"), ir_floor_c=num("ir_floor_C"),
            p_total=_parse_triple(values["P"],
                                  f"{path}:{lines['P']}: key 'P'"),
            n_scales=num("J", int))
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    opts = SolverOptions(
        ground_tol=num("ground_tol"),
        dense_eig_cutoff=num("dense_eig_cutoff", int),
        dense_limit=num("dense_limit", int),
        contour_nodes=num("contour_nodes", int),
        defect_tol=num("defect_tol"),
        max_nodes=num("max_nodes", int),
        krylov_tol=num("krylov_tol"),
        krylov_max=num("krylov_max", int),
        allow_invalid=_parse_bool(get("allow_invalid"), "allow_invalid"),
        mass_route=get("mass_route"),
    )
    if opts.mass_route not in ("displaced", "direct", "fd"):
        raise ConfigError(
            f"{path}: mass_route must be displaced, direct, or fd")

    alphas = [float(x) for x in get("alphas").split()]
    p_list = [_parse_triple(t, f"{path}: key 'P_list'")
              for t in get("P_list").split(";") if t.strip()]

    return RunConfig(
        params=params, n_radial=num("n_radial", int),
        angular_set=get("angular_set"), n_max=num("n_max", int),
        c_max=num("c_max", int), basis_limit=num("basis_limit", int),
        opts=opts, alphas=alphas, p_list=p_list, out_dir=get("out_dir"),
        dump_vectors=_parse_bool(get("dump_vectors"), "dump_vectors"),
        delta=num("delta"), sha256=hashlib.sha256(raw).hexdigest(),
    )


def _metadata_block(cfg: RunConfig) -> str:
    return (f"# config_sha256: {cfg.sha256}\n"
            f"# fqed_version: {__version__}\n")


def _out_path(cfg: RunConfig, args, name: str) -> Path:
    out = Path(args.out if args.out else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def cmd_validate(cfg: RunConfig, args) -> int:
    report = validate_params(cfg.params)
    print("parameter constraint report:")
    print(report.table())
    if report.passed:
        print("all constraints PASS")
        return 0
    print(f"FAILED: {report.first_failure().name}")
    return 1


def cmd_grid_dump(cfg: RunConfig, args) -> int:
    grid = cfg.build_grid()
    path = _out_path(cfg, args, "grid.csv")
    path.write_text(grid.dump_csv() + _metadata_block(cfg))
    print(f"wrote {path} ({grid.n_modes} modes)")
    return 0


def cmd_cascade(cfg: RunConfig, args) -> int:
    grid = cfg.build_grid()
    basis = cfg.build_basis(grid)
    state = run_cascade(cfg.params, grid, basis, cfg.opts)
    path = _out_path(cfg, args, "trace.csv")
    path.write_text(trace_csv(state) + _metadata_block(cfg))
    print(f"wrote {path} ({len(state.records)} scales)")
    if len(state.records) >= 4:
        rep = convergence_report(state, delta=cfg.delta)
        rpath = _out_path(cfg, args, "convergence.txt")
        rpath.write_text(rep.table())
        print(rep.table())
    if cfg.dump_vectors:
        for rec in state.records:
            write_vector_file(
                _out_path(cfg, args, f"phi_{rec.j:03d}.fqed"), rec.phi)
        print(f"wrote {len(state.records)} vector sidecars")
    return 0


def _scan_one(cfg: RunConfig, grid, basis, alpha, p):
    return mass_scan(cfg.params, grid, basis, [alpha], [p], cfg.opts)[0]


def cmd_mass_scan(cfg: RunConfig, args) -> int:
    if not cfg.alphas:
        print("usage error: config key 'alphas' is empty", file=sys.stderr)
        return 2
    if not cfg.p_list:
        print("usage error: config key 'P_list' is empty", file=sys.stderr)
        return 2
    grid = cfg.build_grid()
    basis = cfg.build_basis(grid)
    jobs = [(a, p) for a in cfg.alphas for p in cfg.p_list]
    if args.threads > 1:
        with cf.ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = [pool.submit(_scan_one, cfg, grid, basis, a, p)
                       for a, p in jobs]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_scan_one(cfg, grid, basis, a, p) for a, p in jobs]
    rows = [r for chunk in chunks for r in chunk]

    path = _out_path(cfg, args, "scan.csv")
    tail = scan_tail_summary(rows, delta=cfg.delta)
    meta = _metadata_block(cfg)
    for key, entry in sorted(tail.items()):
        p_txt = " ".join(repr(float(x)) for x in key[1])
        meta += (f"# family alpha={float(key[0])!r} P=({p_txt}): "
                 f"last_scale_curvature={entry['last_scale_value']!r} "
                 f"tail_estimate={entry['tail_estimate']!r}\n")
    path.write_text(scan_csv(rows) + meta)

    plot = _out_path(cfg, args, "scan.gp")
    plot.write_text(
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale x\n"
        "set xlabel 'alpha'; set ylabel 'm_r'\n"
        f"plot 'scan.csv' using 1:17 with points title 'm_r vs alpha'\n"
        "pause -1\n"
        "set xlabel 'j'; set ylabel 'd2E'\n"
        f"plot 'scan.csv' using 2:16 with linespoints title 'd2E vs j'\n"
        "pause -1\n")
    n_err = sum(1 for r in rows if r.error)
    print(f"wrote {path} ({len(rows)} rows, {n_err} with errors) and {plot}")
    return 0 if n_err == 0 else 3


_SUITES = ("identities", "gaps", "softphoton", "pullthrough", "calpha",
           "bounds", "all")


def _verify_lines(cfg: RunConfig, suite: str):
    """Yield (hard, name, passed, detail) tuples for the selected suite."""
    grid = cfg.build_grid()
    basis = cfg.build_basis(grid)
    params = cfg.params
    state = run_cascade(params, grid, basis, cfg.opts)
    cut = params.cutoffs

    if suite in ("identities", "all"):
        for rec in state.records:
            orth = float(np.max(np.abs(rec.gamma_orth)))
            yield (True, f"gamma-orthogonality j={rec.j}", orth <= 1e-10,
                   f"max |<phi,Gamma phi>| = {orth:.2e} (tol 1e-10)")
        from .observables import (dispersion_curvature_direct,
                                  dispersion_curvature_fd)
        for rec in state.records:
            d2h = dispersion_curvature_direct(
                params, grid, basis, rec.j, psi=rec.psi, energy=rec.energy,
                gap=rec.gap_sector, opts=cfg.opts)
            frame = displaced_frame_ground(params, grid, basis, rec.j,
                                           rec.grad_energy, cfg.opts,
                                           gamma_start=rec.gamma_shift)
            from .observables import dispersion_curvature_displaced
            d2k, d2kr = dispersion_curvature_displaced(
                params, grid, basis, rec.j, frame=frame, opts=cfg.opts)
            d2f = dispersion_curvature_fd(params, grid, basis, rec.j,
                                          opts=cfg.opts)
            axis_grad = rec.grad_energy[np.argmax(np.abs(params.p_total))] \
                if np.any(params.p_total) else rec.grad_energy[0]
            cross = cross_term_probe(params, grid, basis, rec.j, frame,
                                     axis_grad, cfg.opts)
            yield (True, f"route H vs K j={rec.j}", abs(d2h - d2k) <= 1e-5,
                   f"|{d2h:.8f} - {d2k:.8f}| = {abs(d2h - d2k):.2e} "
                   "(tol 1e-5)")
            yield (True, f"route H vs FD j={rec.j}", abs(d2h - d2f) <= 1e-4,
                   f"delta = {abs(d2h - d2f):.2e} (tol 1e-4)")
            yield (True, f"reduced form j={rec.j}", abs(d2k - d2kr) <= 1e-7,
                   f"delta = {abs(d2k - d2kr):.2e} (tol 1e-7)")
            yield (True, f"cross-term j={rec.j}", cross <= 1e-8,
                   f"|value| = {cross:.2e} (tol 1e-8)")

    if suite in ("gaps", "all"):
        for rec in state.records:
            if np.isfinite(rec.gap_sector):
                bound = params.rho_minus * rec.sigma
                yield (True, f"sector gap j={rec.j}",
                       rec.gap_sector >= bound,
                       f"{rec.gap_sector:.4e} >= rho-*sigma = {bound:.4e}")
            if np.isfinite(rec.gap_next_sector):
                bound = params.rho_plus * cut.sigma(rec.j + 1)
                yield (True, f"next-sector gap j={rec.j}",
                       rec.gap_next_sector >= bound,
                       f"{rec.gap_next_sector:.4e} >= rho+*sigma' "
                       f"= {bound:.4e}")

    if suite in ("softphoton", "all"):
        consts = []
        for rec in state.records[1:]:
            rep = soft_photon_probe(rec.psi, params, grid, basis, rec.j)
            consts.append(rep.empirical_c)
            yield (False, f"soft-photon constant j={rec.j}", True,
                   f"C = {rep.empirical_c:.4f}")
        if len(consts) >= 2 and min(consts) > 0:
            ratio = max(consts) / min(consts)
            yield (False, "soft-photon stability", ratio <= 2.0,
                   f"max/min = {ratio:.3f} (target <= 2)")

    if suite in ("pullthrough", "all"):
        j = params.n_scales
        agg, _ = pull_through_summary(params, grid, basis, j, opts=cfg.opts)
        yield (False, f"pull-through aggregate j={j}", agg <= 0.05,
               f"residual = {agg:.4f} (target <= 0.05)")

    if suite in ("calpha", "all"):
        c_emp, _ = energy_lipschitz_probe(params, grid, basis,
                                          params.n_scales, cfg.opts)
        yield (False, "energy-slope constant", 0.0 <= c_emp <= 0.45,
               f"C = {c_emp:.4f} (free-theory limit 1/3)")

    if suite in ("bounds", "all"):
        rep = resolvent_bound_probes(state, delta=cfg.delta,
                                     dense_limit=cfg.opts.dense_limit,
                                     opts=cfg.opts)
        if rep.skipped:
            yield (False, "resolvent bounds", True, rep.skipped)
        else:
            for i, j in enumerate(rep.scales):
                for name, xs in (("C3", rep.c3), ("C4", rep.c4),
                                 ("C5", rep.c5)):
                    if np.isfinite(xs[i]):
                        yield (False, f"bound {name} j={j}", xs[i] >= 1.0,
                               f"{name} = {xs[i]:.4f} (>= 1)")


def cmd_verify(cfg: RunConfig, args) -> int:
    if args.suite not in _SUITES:
        print(f"usage error: unknown suite {args.suite!r}; "
              f"available: {', '.join(_SUITES)}", file=sys.stderr)
        return 2
    hard_fail = soft_fail = 0
    for hard, name, passed, detail in _verify_lines(cfg, args.suite):
        mark = "PASS" if passed else "FAIL"
        kind = "hard" if hard else "soft"
        print(f"[{mark}] ({kind}) {name}: {detail}")
        if not passed:
            if hard:
                hard_fail += 1
            else:
                soft_fail += 1
    print(f"verify: {hard_fail} hard failures, {soft_fail} soft failures")
    if hard_fail or (args.strict and soft_fail):
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fqed",
        description="infrared-cascade laboratory for momentum-fiber QED "
                    "models on truncated photon Fock spaces")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("validate", cmd_validate), ("cascade", cmd_cascade),
                     ("mass-scan", cmd_mass_scan), ("verify", cmd_verify),
                     ("grid-dump", cmd_grid_dump)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--strict", action="store_true")
        sp.add_argument("--suite", default="all")
        sp.set_defaults(func=fn)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except (ParameterError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CascadeError, SolverError, ConditioningError,
            ContourError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
