"""Command-line entry point: ``nozzleflow <command> --config <path> [--out <dir>]``.

Exit status: 0 success, 1 invalid invocation or configuration,
2 non-convergence (including far-field failure), 3 margin violation.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import build_config, parse_config
from .critical_flux import MARGIN_VIOLATED, NON_CONVERGED, CriticalContext, classify, find_critical
from .diagnostics import diagnose, reconstruct_flow
from .elliptic_solver import StreamField, solve
from .errors import ConfigError, ConvergenceError, DomainError, FarFieldError, SupersonicStateError
from .farfield import mass_flux_range, solve_farfield
from .geometry import truncate
from .io import csv_text, read_field, write_csv, write_field, write_json, atomic_write_text

log = logging.getLogger("nozzleflow")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NONCONVERGED = 2
EXIT_MARGIN = 3

COMMANDS = ("farfield", "solve", "diagnose", "critical", "sweep")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # keep exit status 2 reserved for non-convergence
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="nozzleflow", description="Stream-function solver for steady compressible nozzle flow.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def worker_count(requested):
    n = max(1, int(requested))
    cap = os.environ.get("NOZZLEFLOW_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer NOZZLEFLOW_THREADS=%r", cap)
    return n


def _single_m(cfg):
    if len(cfg.m_values) != 1:
        raise ConfigError([f"this command takes exactly one mass flux, got {len(cfg.m_values)}"])
    return cfg.m_values[0]


def _convergence_log(sf):
    lines = ["iteration update residual cutoff_cells relaxation cg_iterations ritz_min"]
    for h in sf.history:
        lines.append(" ".join(str(h.get(k, "nan")) for k in
                              ("iteration", "update", "residual", "cutoff_cells", "relaxation",
                               "cg_iterations", "ritz_min")))
    return "\n".join(lines) + "\n"


def _solve_one(cfg, m, initial=None):
    """Far field, elliptic solve and diagnostics for one mass flux; returns (code, payload)."""
    try:
        ff = solve_farfield(cfg.profiles, cfg.gas, m, cfg.walls.a, cfg.walls.b)
    except FarFieldError as exc:
        return EXIT_NONCONVERGED, {"status": "non_converged", "cause": f"far field: {exc}"}
    dom = truncate(cfg.walls, cfg.L, cfg.nx, cfg.ny)
    try:
        sf = solve(dom, cfg.profiles, ff, cfg.gas, m, cfg.solver, initial=initial or cfg.initial_guess)
    except ConvergenceError as exc:
        return EXIT_NONCONVERGED, {"status": "non_converged", "cause": str(exc), "field": exc.last, "ff": ff}
    return _diagnose_field(cfg, sf, ff)


def _diagnose_field(cfg, sf, ff):
    try:
        rep = diagnose(sf, ff, cfg.profiles, cfg.gas, n_sections=cfg.n_sections)
    except SupersonicStateError as exc:
        return EXIT_MARGIN, {"status": MARGIN_VIOLATED, "cause": str(exc), "field": sf, "ff": ff}
    code = EXIT_OK
    status = "subsonic"
    # same rule as the critical-flux classification
    if sf.cutoff_active or not rep.M_margin <= -4.0 * sf.epsilon:
        code, status = EXIT_MARGIN, MARGIN_VIOLATED
    return code, {"status": status, "field": sf, "ff": ff, "report": rep}


def cmd_farfield(cfg, out):
    entries, rows = [], []
    code = EXIT_OK
    for m in cfg.m_values:
        try:
            ff = solve_farfield(cfg.profiles, cfg.gas, m, cfg.walls.a, cfg.walls.b)
        except FarFieldError as exc:
            print(f"m={m!r}: {exc}", file=sys.stderr)
            entries.append({"m": m, "status": "non_converged", "cause": str(exc)})
            code = EXIT_NONCONVERGED
            continue
        up, down = ff.upstream, ff.downstream
        s = up.x2[::20]
        entries.append({
            "m": m, "status": "ok", "p0": up.p0, "p1": down.p1, "a": down.a, "b": down.b,
            "rho0_min": float(np.min(up.rho0(up.x2))), "rho0_max": float(np.max(up.rho0(up.x2))),
            "default_epsilon": up.default_epsilon(),
        })
        for k, sk in enumerate(s):
            rows.append((m, sk, up.rho0(sk), up.u0(sk), up.psi_bar(sk), down.y[20 * k],
                         down.rho1_s[20 * k], down.u1_s[20 * k]))
    rng = mass_flux_range(cfg.profiles, cfg.gas, cfg.walls.b - cfg.walls.a)
    doc = {"states": entries, "m_tilde": rng.m_tilde_up, "m_bar": rng.m_bar,
           "oscillation_delta": rng.delta, "advisory_lower": rng.lower}
    write_json(out / "farfield.json", doc)
    write_csv(out / "farfield.csv", ("m", "x2", "rho0", "u0", "psi_bar", "y", "rho1", "u1"), rows)
    return code


def cmd_solve(cfg, out, write_field_dump=True):
    m = _single_m(cfg)
    code, res = _solve_one(cfg, m)
    sf = res.get("field")
    if sf is not None:
        atomic_write_text(out / "convergence.log", _convergence_log(sf))
    if "report" in res:
        write_json(out / "diagnostics.json", res["report"].as_dict())
        if write_field_dump:
            write_field(out / "field.csv", sf, res["report"].details["flow"])
    elif sf is not None and write_field_dump:
        write_field(out / "field.csv", sf, None)
    if code != EXIT_OK:
        print(f"m={m!r}: {res['status']}: {res.get('cause', 'margin violated')}", file=sys.stderr)
    return code


def cmd_diagnose(cfg, out):
    if cfg.field_path is None:
        code = cmd_solve(cfg, out, write_field_dump=False)
        if (out / "diagnostics.json").exists():
            sys.stdout.write((out / "diagnostics.json").read_text())
        return code
    m = _single_m(cfg)
    data = read_field(cfg.base_dir / cfg.field_path)
    dom = truncate(cfg.walls, cfg.L, cfg.nx, cfg.ny)
    if data["psi"].shape != dom.shape:
        raise ConfigError([f"diagnostics/field: grid {data['psi'].shape} does not match config {dom.shape}"])
    try:
        ff = solve_farfield(cfg.profiles, cfg.gas, m, cfg.walls.a, cfg.walls.b)
    except FarFieldError as exc:
        print(f"far field: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    sf = StreamField(values=data["psi"], grid=dom, m=m, converged=True,
                     epsilon=cfg.solver.epsilon or ff.upstream.default_epsilon())
    code, res = _diagnose_field(cfg, sf, ff)
    if "report" in res:
        write_json(out / "diagnostics.json", res["report"].as_dict())
        sys.stdout.write((out / "diagnostics.json").read_text())
    else:
        print(res["cause"], file=sys.stderr)
    return code


def cmd_critical(cfg, out):
    ctx = CriticalContext(cfg.walls, cfg.profiles, cfg.gas, cfg.L, cfg.nx, cfg.ny, cfg.solver)
    seed = cfg.m_seed if cfg.m_seed is not None else (cfg.m_values[0] if cfg.m_values else None)
    if seed is None:
        raise ConfigError(["critical/m_seed: a seed mass flux is required"])
    try:
        res = find_critical(ctx, seed, tol_m=cfg.tol_m, growth=cfg.growth, epsilon0=cfg.solver.epsilon)
    except DomainError as exc:
        print(str(exc), file=sys.stderr)
        eps = cfg.solver.epsilon or 1e-3
        c = classify(seed, ctx, eps)
        return EXIT_NONCONVERGED if c.label == NON_CONVERGED else EXIT_MARGIN
    write_csv(out / "margin_curve.csv", ("m", "M", "classification", "epsilon"), res.margin_table())
    write_json(out / "critical.json", res.as_dict())
    return EXIT_OK


def _sweep_task(args):
    doc, base_dir, m = args
    cfg = build_config(doc, base_dir=base_dir)
    code, res = _solve_one(cfg, m)
    sf = res.get("field")
    rep = res.get("report")
    nan = float("nan")
    return (
        m, res["status"], code,
        sf.iterations if sf is not None else 0,
        sf.final_residual if sf is not None else nan,
        bool(sf.cutoff_active) if sf is not None else False,
        rep.M_margin if rep else nan,
        rep.mass_flux_max_dev if rep else nan,
        rep.bernoulli_drift if rep else nan,
        rep.farfield_band_gap if rep else nan,
    )


SWEEP_COLUMNS = ("m", "status", "exit_code", "iterations", "final_residual", "cutoff_active",
                 "M_margin", "mass_flux_max_dev", "bernoulli_drift", "farfield_gap")


def cmd_sweep(cfg, out):
    if not cfg.m_values:
        raise ConfigError(["sweep: give m, m_list or a sweep block"])
    ms = sorted(cfg.m_values)
    tasks = [(cfg.raw, str(cfg.base_dir), m) for m in ms]
    n = min(worker_count(cfg.workers), len(tasks))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    codes = {r[2] for r in rows}
    if EXIT_NONCONVERGED in codes:
        return EXIT_NONCONVERGED
    if EXIT_MARGIN in codes:
        return EXIT_MARGIN
    return EXIT_OK


HANDLERS = {
    "farfield": cmd_farfield,
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "critical": cmd_critical,
    "sweep": cmd_sweep,
}


def run(cfg, command, out):
    """Dispatch ``command`` on a validated configuration; returns the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[command](cfg, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        out = Path(args.out) if args.out else Path(cfg.output or "nozzleflow_out")
        if not out.is_absolute() and args.out is None and cfg.output:
            out = cfg.base_dir / out
        return run(cfg, args.command, out)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
