"""Command-line entry point.

    pqsingular COMMAND [--config FILE] [--out DIR] [--jobs N] [--section.key=value ...]

Every run writes an artifact tree::

    manifest.json        config copy, code version, wall times, file list
    fields/*.csv         nodal fields (index, x, d, u) and Theta tables
    traces/*.json        continuation traces
    verdicts/*.json      probe verdict documents
    plotdata/*.csv       tidy series for plotting
    error.json           only when the run failed

Exit status: 0 when every asserted check passes, 2 when a check fails,
1 on configuration or solver errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
import warnings
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance
from .barriers import (
    q_companion,
    scaling_exponents,
    theta_scaling_check,
    theta_shoot,
    torsion_oracle,
    torsion_residual,
)
from .config import ConfigError, RunConfig, load_config
from .diagnostics import (
    BOUNDED,
    DIVERGENT,
    barrier_sandwich,
    comparison_check,
    fit_boundary_exponent,
    fit_log_regime,
    level_fields,
    nonexistence_probe,
    solve_level_on,
    sobolev_probes,
    verdict_document,
    verdicts_antitone,
)
from .domain_mesh import INTERVAL, build_mesh
from .energy_solver import (
    SolverFailure,
    continuation,
    direct_energy,
    fixed_point_residual,
    initial_guess,
    solve_direct,
    solve_eps,
    solve_source_problem,
)
from .weights import CRITICAL, SUBLINEAR, SUPERLINEAR, NonExistenceThreshold

EXIT_PASS, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2
COMMANDS = (
    "solve",
    "continue",
    "direct",
    "oracle-torsion",
    "oracle-theta",
    "probe-regime",
    "probe-sobolev",
    "probe-compare",
    "probe-nonexistence",
    "verify-all",
)
# keys whose values vary between identical runs; excluded from determinism digests
VOLATILE_KEYS = frozenset({"wall_time", "wall_times", "timestamp", "runtime"})


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# --------------------------------------------------------------------------
# artifact tree


def fresh_directory(path: Path) -> Path:
    """``path`` if absent or empty, else the first free ``path-1``, ``path-2``, ..."""
    path = Path(path)
    if not path.exists() or not any(path.iterdir()):
        return path
    k = 1
    while True:
        cand = path.with_name(f"{path.name}-{k}")
        if not cand.exists() or not any(cand.iterdir()):
            return cand
        k += 1


def _plain_json(obj):
    from .diagnostics import _plain

    return _plain(obj)


class Artifacts:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        if rel not in self.files:
            self.files.append(rel)
        return p

    def json(self, rel: str, doc) -> str:
        self.path(rel).write_text(json.dumps(_plain_json(doc), indent=2, sort_keys=True))
        return rel

    def field(self, rel: str, u) -> str:
        u.to_csv(self.path(rel))
        return rel

    def rows(self, rel: str, header, rows) -> str:
        with self.path(rel).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        return rel


def _strip_volatile(obj):
    if isinstance(obj, dict):
        return {k: _strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [_strip_volatile(v) for v in obj]
    return obj


def payload_digest(run_dir) -> str:
    """sha256 over every payload file except the manifest, with volatile JSON keys removed."""
    root = Path(run_dir)
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if not p.is_file() or p.name == "manifest.json":
            continue
        rel = p.relative_to(root).as_posix()
        h.update(rel.encode())
        if p.suffix == ".json":
            data = _strip_volatile(json.loads(p.read_text()))
            h.update(json.dumps(data, sort_keys=True).encode())
        else:
            h.update(p.read_bytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# plot data


def _read_csv(path: Path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(run_dir, art: Artifacts | None = None) -> dict:
    """Write one tidy CSV per figure class from whatever the run produced."""
    root = Path(run_dir)
    art = art or Artifacts(root)
    (root / "plotdata").mkdir(parents=True, exist_ok=True)
    written, missing = [], []

    field_files = sorted((root / "fields").glob("*.csv")) if (root / "fields").exists() else []
    rows = []
    for f in field_files:
        for r in _read_csv(f):
            if "u" not in r:
                continue
            d, u = float(r["d"]), float(r["u"])
            if d > 0 and u > 0:
                rows.append((f.stem, math.log(d), math.log(u)))
    if rows:
        written.append(art.rows("plotdata/fit_series.csv", ["field", "log_d", "log_u"], rows))
    else:
        missing.append("fields/*.csv with (d, u) columns")

    trace = root / "traces" / "continuation.json"
    if trace.exists():
        recs = json.loads(trace.read_text())["records"]
        written.append(
            art.rows("plotdata/continuation.csv", ["eps", "sup_norm"], [(r["eps"], r["sup_norm"]) for r in recs])
        )
    else:
        missing.append("traces/continuation.json")

    sob = root / "verdicts" / "probe-sobolev.json"
    if sob.exists():
        rows = []
        for pr in json.loads(sob.read_text())["data"]["probes"]:
            for j, (n, e) in enumerate(zip(pr["levels"], pr["energies"])):
                rows.append((pr["rho"], n, e, pr["ratios"][j - 1] if j else ""))
        written.append(art.rows("plotdata/sobolev.csv", ["rho", "level", "energy", "growth_ratio"], rows))
    else:
        missing.append("verdicts/probe-sobolev.json")

    nex = root / "verdicts" / "probe-nonexistence.json"
    if nex.exists():
        data = json.loads(nex.read_text())["data"]
        rows = []
        for g, per_beta in data["hardy"].items():
            for bt, H in zip(data["beta_tilde"], per_beta):
                for n, val in zip(data["levels"], H):
                    rows.append((bt, float(g), n, val))
        written.append(art.rows("plotdata/nonexistence.csv", ["beta_tilde", "gamma", "level", "H"], rows))
    else:
        missing.append("verdicts/probe-nonexistence.json")

    if not written:
        warnings.warn(f"no plot inputs found under {root}; empty plot bundle", stacklevel=2)
    return {"written": written, "missing": missing}


# --------------------------------------------------------------------------
# commands; each returns a dict of named boolean checks


def _mesh(cfg: RunConfig):
    return build_mesh(cfg.spec.domain, cfg.n, cfg.grading)


def _require_solvable(cfg: RunConfig):
    if cfg.spec.beta == cfg.spec.p:
        raise NonExistenceThreshold("beta = p: no weak solution exists (non-existence threshold); solve rejected")
    if not cfg.spec.solvable:
        raise NonExistenceThreshold("beta > p: no weak solution exists; use probe-nonexistence")


def cmd_solve(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    _require_solvable(cfg)
    eps = cfg.getfloat("solve", "eps")
    mesh = _mesh(cfg)
    u = solve_eps(eps, cfg.spec, cfg.settings, initial_guess(mesh, cfg.spec, eps), cfg.get("solver", "method"))
    art.field("fields/solution.csv", u)
    fp = fixed_point_residual(u, eps, cfg.spec, cfg.settings)
    checks = {
        "dirichlet": u.satisfies_dirichlet(),
        "nonnegative": bool(np.all(u.values >= 0)),
        "fixed_point_residual": fp <= cfg.settings.picard_tol,
    }
    art.json(
        "verdicts/solve.json",
        verdict_document(
            "solve",
            cfg.spec,
            {"eps": eps, "n": cfg.n, "grading": cfg.grading},
            {"sup": u.sup, "fixed_point_residual": fp, "newton_iterations": u.info.get("newton_iterations"),
             "residual": u.info.get("residual")},
            checks,
            {"picard_tol": cfg.settings.picard_tol},
        ),
    )
    return checks


def cmd_continue(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    _require_solvable(cfg)
    trace = continuation(cfg.spec, cfg.settings, cfg.eps0, cfg.ratio, cfg.steps, _mesh(cfg),
                         method=cfg.get("solver", "method"), check_monotone=False)
    refs = [art.field(f"fields/u_eps_{k}.csv", f) for k, f in enumerate(trace.fields)]
    records = trace.summary()
    for r, ref in zip(records, refs):
        r["field"] = ref
    drops = [float(np.max(a.values - b.values)) for a, b in zip(trace.fields, trace.fields[1:])]
    art.json("traces/continuation.json", {"spec": cfg.spec.to_dict(), "records": records,
                                          "sup_differences": trace.sup_differences()})
    checks = {
        "dirichlet": all(f.satisfies_dirichlet() for f in trace.fields),
        "monotone_in_eps": all(d <= cfg.settings.picard_tol for d in drops),
    }
    art.json("verdicts/continue.json", verdict_document(
        "continue", cfg.spec, {"eps0": cfg.eps0, "ratio": cfg.ratio, "steps": cfg.steps},
        {"max_decrease_per_step": drops}, checks, {"monotone": cfg.settings.picard_tol}))
    return checks


def cmd_direct(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    mesh = _mesh(cfg)
    u = solve_direct(cfg.spec, cfg.settings, mesh)
    art.field("fields/solution.csv", u)
    e = direct_energy(u, cfg.spec)
    trials = {}
    for a in (0.25, 0.5, 1.0, 2.0):
        trial = initial_guess(mesh, cfg.spec, amplitude=a)
        trials[str(a)] = direct_energy(trial, cfg.spec)
    checks = {
        "nonnegative": bool(np.all(u.values >= 0)),
        "dirichlet": u.satisfies_dirichlet(),
        "energy_below_barrier_trials": all(e <= t for t in trials.values()),
    }
    art.json("verdicts/direct.json", verdict_document(
        "direct", cfg.spec, {"n": cfg.n, "grading": cfg.grading},
        {"energy": e, "trial_energies": trials, "sup": u.sup}, checks, {}))
    return checks


def cmd_oracle_torsion(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    rho = cfg.getfloat("oracle", "rho")
    spec, mesh = cfg.spec, _mesh(cfg)
    oracle = torsion_oracle(rho, spec, mesh)
    art.field("fields/torsion_oracle.csv", oracle)
    solved = solve_source_problem(mesh, spec, np.full(mesh.n_elements, rho), cfg.settings)
    art.field("fields/torsion_solver.csv", solved)
    err = float(np.max(np.abs(solved.values - oracle.values)))
    checks = {"solver_matches_oracle": err <= 1e-3 * oracle.sup}
    data = {"solver_sup_error": err, "oracle_sup": oracle.sup, "residual": torsion_residual(oracle, rho, spec)}
    if spec.p == 2 and spec.q == 2:
        dom = spec.domain
        if dom.kind == INTERVAL:
            exact = rho * mesh.nodes * (dom.extent - mesh.nodes) / 4.0
        else:
            exact = rho * (dom.extent**2 - mesh.nodes**2) / (4.0 * dom.dim)
        cf = float(np.max(np.abs(oracle.values - exact)))
        data["closed_form_error"] = cf
        checks["closed_form"] = cf <= 1e-10
    art.json("verdicts/oracle-torsion.json", verdict_document(
        "oracle-torsion", spec, {"rho": rho, "n": cfg.n, "grading": cfg.grading}, data, checks,
        {"solver": "1e-3 * sup", "closed_form": 1e-10}))
    return checks


def cmd_oracle_theta(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    alpha, r_max = cfg.getfloat("oracle", "alpha"), cfg.getfloat("oracle", "r_max")
    spec = cfg.spec
    if cfg.get("oracle", "h") == "auto":
        # resolve the profile of Theta_1 with about 10^4 steps up to R_1
        coarse = theta_shoot(1.0, spec, r_max, r_max / 4000)
        h = 1e-4 * (coarse.R_alpha if math.isfinite(coarse.R_alpha) else r_max)
    else:
        h = cfg.getfloat("oracle", "h")
    table = theta_shoot(alpha, spec, r_max, h)
    table.to_csv(art.path("fields/theta.csv"))
    comp = q_companion(table, spec.q)
    checks = {
        "theta_increasing": bool(np.all(np.diff(table.theta) > 0)),
        "theta_prime_decreasing": bool(np.all(np.diff(table.dtheta) < 0)),
        "q_companion_nonnegative": bool(np.all(comp >= 0)),
        "below_tangent": bool(np.all(table.theta <= alpha * table.r * (1 + 1e-14))),
    }
    data = {"R_alpha": table.R_alpha, "r_max": table.r_max, "points": len(table.r)}
    a2 = cfg.getfloat("oracle", "scale_alpha")
    if cfg.get("oracle", "r_probe") == "auto":
        # half-way to R of the scaled profile, R_scaled = R_1 / B
        one = table if alpha == 1 else theta_shoot(1.0, spec, r_max, h)
        reach = one.R_alpha if math.isfinite(one.R_alpha) else one.r_max
        r_probe = 0.5 * reach / scaling_exponents(a2, spec)[1]
    else:
        r_probe = cfg.getfloat("oracle", "r_probe")
    if r_probe > 0:
        try:
            err = theta_scaling_check(a2, spec, r_probe, h=h)
            data["scaling_relative_error"] = err
            checks["scaling_law"] = err <= 1e-6
        except ValueError as exc:
            data["scaling_skipped"] = str(exc)
    art.json("verdicts/oracle-theta.json", verdict_document(
        "oracle-theta", spec, {"alpha": alpha, "h": h, "r_max": r_max, "r_probe": r_probe}, data, checks,
        {"scaling_law": 1e-6}))
    return checks


def cmd_probe_regime(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    _require_solvable(cfg)
    spec, eps = cfg.spec, cfg.getfloat("probe", "eps")
    window = cfg.getfloats("probe", "window")
    u = solve_level_on(spec, cfg.settings, _mesh(cfg), eps)
    art.field("fields/solution.csv", u)
    data, checks = {"regime": spec.regime}, {}
    if spec.regime == CRITICAL:
        L = cfg.get("probe", "L")
        band = fit_log_regime(u, spec, float(L) if L else None, window)
        data["log_band"] = band
        checks["log_band"] = band.confirmed
    else:
        fit = fit_boundary_exponent(u, window)
        expected = spec.tau if spec.regime == SUPERLINEAR else 1.0
        data["fit"] = fit
        data["expected_slope"] = expected
        checks["slope"] = abs(fit.slope - expected) <= 0.05
    if spec.regime != SUBLINEAR or eps > 0:
        L = cfg.get("probe", "L")
        sw = barrier_sandwich(u, eps, spec, float(L) if L else None)
        data["sandwich"] = sw
        checks["sandwich_positive_finite"] = 0 < sw.eta <= sw.Gamma < math.inf
    art.json("verdicts/probe-regime.json", verdict_document(
        "probe-regime", spec, {"eps": eps, "window": window, "n": cfg.n, "grading": cfg.grading},
        data, checks, {"slope": 0.05, "band": 2.0, "drift": "half the drift of the exact log profile"}))
    return checks


def cmd_probe_sobolev(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    _require_solvable(cfg)
    spec = cfg.spec
    rhos = cfg.getfloats("probe", "rho")
    levels = cfg.getints("probe", "levels")
    eps, grading = cfg.getfloat("probe", "eps"), cfg.getfloat("probe", "grading")
    fields = level_fields(spec, cfg.settings, levels, eps, grading, jobs=jobs)
    for n, u in zip(levels, fields):
        art.field(f"fields/level_{n}.csv", u)
    probes = sobolev_probes(spec, cfg.settings, rhos, levels, eps=eps, grading=grading, fields=fields)
    thr = spec.sobolev_threshold
    consistent = all(
        not (pr.verdict == BOUNDED and pr.rho <= thr) and not (pr.verdict == DIVERGENT and pr.rho >= thr)
        for pr in probes
    )
    checks = {"antitone_in_rho": verdicts_antitone(probes), "consistent_with_threshold": consistent}
    art.json("verdicts/probe-sobolev.json", verdict_document(
        "probe-sobolev", spec, {"rho": rhos, "levels": levels, "eps": eps, "grading": grading},
        {"probes": probes, "rho0": spec.rho0, "sobolev_threshold": thr, "membership_delta": spec.membership_delta},
        {pr.rho: pr.verdict for pr in probes} | checks, {"bounded_ratio": 1.1, "divergent_ratio": 1.2}))
    return checks


def cmd_probe_compare(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    _require_solvable(cfg)
    rep = comparison_check(cfg.spec, cfg.settings, cfg.getfloats("probe", "c_pair"), _mesh(cfg),
                           eps=cfg.getfloat("probe", "eps"), exploratory=cfg.getbool("probe", "exploratory"))
    checks = {} if rep.skipped else {"ordered": rep.passed}
    art.json("verdicts/probe-compare.json", verdict_document(
        "probe-compare", cfg.spec, {"c_pair": rep.c_f, "eps": cfg.getfloat("probe", "eps")}, rep,
        "skipped" if rep.skipped else checks, {"violation": rep.tolerance}))
    return checks


def cmd_probe_nonexistence(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    if cfg.spec.solvable:
        raise ConfigError("probe-nonexistence needs beta >= p")
    rep = nonexistence_probe(
        cfg.spec, cfg.settings,
        gaps=cfg.getfloats("probe", "gaps"),
        gammas=cfg.getfloats("probe", "gammas"),
        levels=cfg.getints("probe", "nonexistence_levels"),
        grading=cfg.getfloat("probe", "nonexistence_grading"),
        eps=cfg.getfloat("probe", "eps"),
        window=cfg.getfloats("probe", "window"),
        jobs=jobs,
    )
    checks = {"tau_trend": rep.tau_ok, "hardy_growth": rep.hardy_ok, "no_solver_failures": not rep.failures}
    verdict = "non-existence signature confirmed" if rep.confirmed else "not confirmed"
    art.json("verdicts/probe-nonexistence.json", verdict_document(
        "probe-nonexistence", cfg.spec, {"levels": rep.levels, "gammas": rep.gammas}, rep, verdict,
        {"tau": rep.tau_tol, "growth": rep.growth_threshold}))
    return checks


def cmd_verify_all(cfg: RunConfig, art: Artifacts, jobs: int) -> dict:
    results = acceptance.run_all(cfg.settings, echo=print)
    art.json("verdicts/acceptance.json", {
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed, "details": r.details,
             "runtime": r.runtime, "budget": r.budget}
            for r in results
        ]
    })
    return {f"criterion_{r.number}": r.passed for r in results}


HANDLERS = {
    "solve": cmd_solve,
    "continue": cmd_continue,
    "direct": cmd_direct,
    "oracle-torsion": cmd_oracle_torsion,
    "oracle-theta": cmd_oracle_theta,
    "probe-regime": cmd_probe_regime,
    "probe-sobolev": cmd_probe_sobolev,
    "probe-compare": cmd_probe_compare,
    "probe-nonexistence": cmd_probe_nonexistence,
    "verify-all": cmd_verify_all,
}


# --------------------------------------------------------------------------
# driver


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqsingular", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", help=", ".join(COMMANDS))
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--out", help="output directory (same as --output.dir)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel solves for probe commands")
    return ap


def _write_manifest(art: Artifacts, command, cfg_raw, cfg_ini, status, checks, walls, error=None):
    manifest = {
        "command": command,
        "code_version": code_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg_raw,
        "config_ini": cfg_ini,
        "exit_code": status,
        "checks": checks,
        "wall_times": walls,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "files": sorted(set(art.files)),
    }
    if error:
        manifest["error"] = error
    (art.root / "manifest.json").write_text(json.dumps(_plain_json(manifest), indent=2, sort_keys=True))


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args, extra = _parser().parse_known_args(argv)
    t_start = time.perf_counter()
    out = args.out
    cfg = None
    try:
        overrides = [a for a in extra]
        if out:
            overrides.append(f"--output.dir={out}")
        cfg = load_config(args.config, overrides)
        out_dir = fresh_directory(cfg.output_dir)
    except ConfigError as exc:
        out_dir = fresh_directory(Path(out or "runs/latest"))
        return _fail(Artifacts(out_dir), args.command, None, "invalid-config", exc, t_start)
    art = Artifacts(out_dir)
    if args.command not in HANDLERS:
        return _fail(art, args.command, cfg, "unknown-command",
                     ValueError(f"unknown command {args.command!r}; choose from {', '.join(COMMANDS)}"), t_start)
    try:
        checks = HANDLERS[args.command](cfg, art, max(1, args.jobs))
    except ConfigError as exc:
        return _fail(art, args.command, cfg, "invalid-config", exc, t_start)
    except NonExistenceThreshold as exc:
        return _fail(art, args.command, cfg, "invalid-config", exc, t_start)
    except SolverFailure as exc:
        return _fail(art, args.command, cfg, "solver-failure", exc, t_start)
    except (ValueError, FloatingPointError) as exc:
        return _fail(art, args.command, cfg, "invalid-input", exc, t_start)
    emit_plot_data(art.root, art)
    status = EXIT_PASS if all(checks.values()) else EXIT_CHECK_FAILED
    _write_manifest(art, args.command, cfg.raw, cfg.to_ini(), status, checks,
                    {"total": time.perf_counter() - t_start})
    print(f"{args.command}: {'pass' if status == EXIT_PASS else 'check failed'} -> {art.root}")
    for name, ok in checks.items():
        print(f"  {'ok  ' if ok else 'FAIL'} {name}")
    return status


def _fail(art: Artifacts, command, cfg, kind, exc, t_start) -> int:
    record = {"kind": kind, "type": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, SolverFailure):
        record["report"] = exc.report
    art.json("error.json", record)
    _write_manifest(art, command, cfg.raw if cfg else None, cfg.to_ini() if cfg else None, EXIT_ERROR, {},
                    {"total": time.perf_counter() - t_start}, error=record)
    print(f"{command}: error ({kind}): {exc}", file=sys.stderr)
    return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
