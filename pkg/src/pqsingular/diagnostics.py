"""Quantitative checks on solved fields: boundary exponents, Sobolev energies,
barrier sandwiches, comparison and the non-existence probe.

Every probe returns a small dataclass and can be turned into a JSON verdict
document with :func:`verdict_document`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

from .barriers import barrier_unit, log_scale, BarrierParams
from .domain_mesh import INTERVAL, Mesh, build_mesh
from .energy_solver import (
    DiscreteField,
    SolverFailure,
    SolverSettings,
    continuation,
    map_jobs,
    solve_direct,
)
from .weights import CRITICAL, SUBLINEAR, ProblemSpec

DEFAULT_WINDOW = (1e-4, 1e-2)
MIN_FIT_NODES = 8

BOUNDED = "bounded"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


class FitWindowError(ValueError):
    """Too few nodes in the fit window, or a window outside the admissible range."""


# --------------------------------------------------------------------------
# boundary exponent fits


@dataclass
class ExponentFit:
    window: tuple
    slope: float
    intercept: float
    residual: float
    n_nodes: int
    side_slopes: tuple = ()
    asymmetry: float = 0.0


def _line_fit(x, y):
    """Least squares y = a + b x with centred abscissas; returns (b, a, max residual)."""
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    b = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    a = float(ym - b * xm)
    return b, a, float(np.max(np.abs(y - (a + b * x))))


def _window_sides(mesh: Mesh, window):
    lo, hi = window
    if not 0 < lo < hi:
        raise FitWindowError("fit window needs 0 < d_min < d_max")
    if hi > mesh.domain.extent / 4.0 * (1 + 1e-12):
        raise FitWindowError("fit window must stay within a quarter of the domain extent")
    inside = (mesh.dist >= lo) & (mesh.dist <= hi) & ~mesh.dirichlet
    sides = [0, 1] if mesh.domain.kind == INTERVAL else [0]
    out = []
    for s in sides:
        sel = np.flatnonzero(inside & (mesh.side == s))
        if len(sel) < MIN_FIT_NODES:
            raise FitWindowError(
                f"only {len(sel)} nodes in the window [{lo:g}, {hi:g}] on side {s}; "
                f"need {MIN_FIT_NODES}: refine the mesh or raise the grading exponent"
            )
        out.append(sel)
    return out


def fit_boundary_exponent(u: DiscreteField, window=DEFAULT_WINDOW) -> ExponentFit:
    """Fit log u = a + b log d on the nodes with d in ``window``.

    On an interval both boundary layers are fitted separately and the slopes
    and intercepts averaged; their difference is reported as the asymmetry.
    """
    mesh = u.mesh
    slopes, intercepts, residuals, count = [], [], [], 0
    for sel in _window_sides(mesh, window):
        vals = u.values[sel]
        if np.any(vals <= 0):
            raise FitWindowError("u must be positive on the fit window")
        b, a, r = _line_fit(np.log(mesh.dist[sel]), np.log(vals))
        slopes.append(b)
        intercepts.append(a)
        residuals.append(r)
        count += len(sel)
    return ExponentFit(
        window=tuple(window),
        slope=float(np.mean(slopes)),
        intercept=float(np.mean(intercepts)),
        residual=float(max(residuals)),
        n_nodes=count,
        side_slopes=tuple(slopes),
        asymmetry=float(max(slopes) - min(slopes)),
    )


@dataclass
class LogBand:
    L: float
    ratio_min: float
    ratio_max: float
    band: float
    slope_near: float
    slope_far: float
    drift: float
    confirmed: bool
    max_band: float = 2.0
    min_drift: float = 0.0


def fit_log_regime(
    u: DiscreteField,
    spec: ProblemSpec,
    L: float | None = None,
    window=DEFAULT_WINDOW,
    max_band: float = 2.0,
    min_drift: float | None = None,
) -> LogBand:
    """Ratio band of u / (d log^(1/(p-beta))(L/d)) over the window, plus power-fit drift.

    The window is split at its geometric midpoint; ``drift`` is the fitted
    power slope on the near half minus that on the far half.  A logarithmic
    profile has local slope 1 - 1/((p-beta) log(L/d)), which falls as d grows,
    so the drift of a genuine log regime is positive.  By default the drift
    must reach half of what the exact profile d log^(1/(p-beta))(L/d) shows on
    the same nodes; a pure power has drift 0.
    """
    if spec.regime != CRITICAL:
        raise ValueError("the log-band fit belongs to beta + delta = 1")
    L = log_scale(spec, BarrierParams(L=L))
    mesh = u.mesh
    k = 1.0 / (spec.p - spec.beta)
    sels = _window_sides(mesh, window)
    idx = np.concatenate(sels)
    d = mesh.dist[idx]
    r = u.values[idx] / (d * np.log(L / d) ** k)
    mid = math.sqrt(window[0] * window[1])
    near = fit_boundary_exponent(u, (window[0], mid))
    far = fit_boundary_exponent(u, (mid, window[1]))
    if min_drift is None:
        model = np.zeros(mesh.n_nodes)
        pos = mesh.dist > 0
        model[pos] = mesh.dist[pos] * np.log(L / mesh.dist[pos]) ** k
        ref = DiscreteField(mesh, model)
        min_drift = 0.5 * (fit_boundary_exponent(ref, (window[0], mid)).slope
                           - fit_boundary_exponent(ref, (mid, window[1])).slope)
    band = float(r.max() / r.min())
    drift = near.slope - far.slope
    return LogBand(
        L=L,
        ratio_min=float(r.min()),
        ratio_max=float(r.max()),
        band=band,
        slope_near=near.slope,
        slope_far=far.slope,
        drift=drift,
        confirmed=bool(band <= max_band and abs(drift) >= min_drift),
        max_band=max_band,
        min_drift=min_drift,
    )


# --------------------------------------------------------------------------
# Sobolev probe


def power_energy(u: DiscreteField, rho: float, p: float) -> float:
    """sum_e w_e |D(u^rho)|^p for the piecewise-linear interpolant of u^rho."""
    v = np.maximum(u.values, 0.0) ** rho
    g = np.diff(v) / u.mesh.lengths
    return float(np.sum(u.mesh.weights * np.abs(g) ** p))


@dataclass
class SobolevProbe:
    rho: float
    levels: tuple
    energies: list
    ratios: list
    verdict: str
    bounded_ratio: float = 1.1
    divergent_ratio: float = 1.2
    eps: float = 1e-6
    grading: float = 3.0


def classify_growth(ratios, bounded_ratio=1.1, divergent_ratio=1.2) -> str:
    if max(ratios) <= bounded_ratio:
        return BOUNDED
    if min(ratios) >= divergent_ratio:
        return DIVERGENT
    return INCONCLUSIVE


@dataclass(frozen=True)
class _LevelJob:
    spec: ProblemSpec
    settings: SolverSettings
    n: int
    grading: float
    eps: float
    eps0: float
    ratio: float

    def __call__(self):
        return solve_level(self)


def solve_level(job: _LevelJob) -> DiscreteField:
    """eps-continuation from eps0 down to eps on one mesh level."""
    mesh = build_mesh(job.spec.domain, job.n, job.grading)
    if job.eps == 0:
        return solve_direct(job.spec, job.settings, mesh)
    steps = max(0, int(round(math.log(job.eps / job.eps0) / math.log(job.ratio))))
    eps0 = job.eps / job.ratio**steps
    return continuation(job.spec, job.settings, eps0, job.ratio, steps, mesh).final


def _run_job(job):
    return job()


def level_fields(
    spec: ProblemSpec,
    settings: SolverSettings,
    levels,
    eps: float = 1e-6,
    grading: float = 3.0,
    eps0: float = 1e-2,
    ratio: float = 0.1,
    jobs: int = 1,
) -> list[DiscreteField]:
    jobs_list = [_LevelJob(spec, settings, int(n), grading, eps, eps0, ratio) for n in levels]
    return map_jobs(_run_job, jobs_list, jobs)


def sobolev_probes(
    spec: ProblemSpec,
    settings: SolverSettings,
    rhos,
    levels,
    eps: float = 1e-6,
    grading: float = 3.0,
    bounded_ratio: float = 1.1,
    divergent_ratio: float = 1.2,
    jobs: int = 1,
    fields: list | None = None,
) -> list[SobolevProbe]:
    """One probe per rho, reusing a single solve per mesh level."""
    if not spec.solvable:
        raise ValueError("the Sobolev probe needs beta < p")
    levels = tuple(int(n) for n in levels)
    if len(levels) < 3:
        raise ValueError("need at least three mesh levels")
    if fields is None:
        fields = level_fields(spec, settings, levels, eps, grading, jobs=jobs)
    out = []
    for rho in rhos:
        energies = [power_energy(u, rho, spec.p) for u in fields]
        ratios = [b / a for a, b in zip(energies, energies[1:])]
        out.append(
            SobolevProbe(
                rho=float(rho),
                levels=levels,
                energies=energies,
                ratios=ratios,
                verdict=classify_growth(ratios, bounded_ratio, divergent_ratio),
                bounded_ratio=bounded_ratio,
                divergent_ratio=divergent_ratio,
                eps=eps,
                grading=grading,
            )
        )
    return out


def sobolev_probe(spec: ProblemSpec, settings: SolverSettings, rho: float, levels, **kw) -> SobolevProbe:
    return sobolev_probes(spec, settings, [rho], levels, **kw)[0]


def verdicts_antitone(probes) -> bool:
    """Once some rho is bounded, every larger rho must be bounded too."""
    seen_bounded = False
    for pr in sorted(probes, key=lambda x: x.rho):
        if seen_bounded and pr.verdict != BOUNDED:
            return False
        seen_bounded = seen_bounded or pr.verdict == BOUNDED
    return True


# --------------------------------------------------------------------------
# barrier sandwich


@dataclass
class Sandwich:
    eta: float
    Gamma: float
    excluded: list = field(default_factory=list)


def barrier_sandwich(u: DiscreteField, eps: float, spec: ProblemSpec, L: float | None = None) -> Sandwich:
    """Extreme ratios of u to the amplitude-1 barrier of the regime over interior nodes."""
    mesh = u.mesh
    interior = np.flatnonzero(~mesh.dirichlet)
    unit = np.asarray(barrier_unit(spec, mesh.dist[interior], eps, L), dtype=float)
    ok = unit > 0
    excluded = [int(i) for i in interior[~ok]]
    if not np.any(ok):
        raise ValueError("barrier vanishes at every interior node")
    ratio = u.values[interior[ok]] / unit[ok]
    eta, Gamma = float(ratio.min()), float(ratio.max())
    if not (0 < eta <= Gamma < math.inf):
        raise ValueError(f"sandwich failed: eta={eta!r}, Gamma={Gamma!r}")
    return Sandwich(eta, Gamma, excluded)


# --------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonReport:
    c_f: tuple
    max_violation: float
    tolerance: float
    passed: bool
    skipped: bool = False
    notice: str = ""


def comparison_check(
    spec: ProblemSpec,
    settings: SolverSettings,
    c_pair=(1.0, 2.0),
    mesh: Mesh | None = None,
    eps: float = 1e-6,
    exploratory: bool = False,
    tol: float = 1e-8,
) -> ComparisonReport:
    """max_i (u1 - u2)_i for the solutions with weights c1 d^-beta and c2 d^-beta."""
    c1, c2 = map(float, c_pair)
    tolerance = tol + settings.picard_tol
    if not spec.comparison_admissible and not exploratory:
        return ComparisonReport(
            (c1, c2), math.nan, tolerance, False, True, "beta >= 2 - 1/p: comparison principle not covered; skipped"
        )
    mesh = mesh or build_mesh(spec.domain, 2048, 3.0)
    fields = [
        solve_level_on(spec.with_(c_f=c), settings, mesh, eps) for c in (c1, c2)
    ]
    viol = float(np.max(fields[0].values - fields[1].values))
    return ComparisonReport((c1, c2), viol, tolerance, bool(viol <= tolerance))


def solve_level_on(spec: ProblemSpec, settings: SolverSettings, mesh: Mesh, eps: float, eps0: float = 1e-2):
    """Continuation to ``eps`` on a given mesh (direct solve when eps == 0)."""
    if eps == 0:
        return solve_direct(spec, settings, mesh)
    steps = max(0, int(round(math.log10(eps0 / eps))))
    start = eps * 10.0**steps
    return continuation(spec, settings, start, 0.1, steps, mesh).final


# --------------------------------------------------------------------------
# non-existence probe


@dataclass
class NonExistenceReport:
    p: float
    beta: float
    beta_tilde: list
    tau_expected: list
    tau_fitted: list
    levels: tuple
    gammas: tuple
    hardy: dict  # gamma -> list over beta_tilde of H per level
    growth: dict  # gamma -> list over beta_tilde of per-refinement ratios
    tau_tol: float
    growth_threshold: float
    tau_ok: bool
    hardy_ok: bool
    confirmed: bool
    failures: list = field(default_factory=list)


def hardy_integral(u: DiscreteField, gamma: float, p: float) -> float:
    """sum_e w_e (u_mid^gamma / d_mid)^p."""
    m = np.maximum(u.midpoints, 0.0)
    return float(np.sum(u.mesh.weights * (m**gamma / u.mesh.mid_dist) ** p))


def nonexistence_probe(
    spec: ProblemSpec,
    settings: SolverSettings,
    gaps=(0.5, 0.2, 0.1, 0.05),
    gammas=(1.0, 2.0),
    levels=(512, 1024, 2048),
    grading: float = 6.0,
    eps: float = 1e-6,
    window=DEFAULT_WINDOW,
    tau_tol: float = 0.03,
    growth_threshold: float = 1.2,
    jobs: int = 1,
) -> NonExistenceReport:
    """Solve the beta~ = p - gap problems, fit tau~ and track Hardy integrals under refinement.

    The beta~ weight c_f d^-beta~ is dominated by c_f d^-beta on the domain
    (d <= 1).  The non-existence signature is tau~ -> 0 together with Hardy
    integrals that keep growing by at least ``growth_threshold`` per refinement
    at the smallest gap, for every gamma tried.
    """
    if spec.solvable:
        raise ValueError("the non-existence probe is for beta >= p")
    if spec.domain.max_distance > 1:
        raise ValueError("domination of the beta~ weight needs d <= 1 on the domain")
    levels = tuple(int(n) for n in levels)
    gammas = tuple(float(g) for g in gammas)
    bts = [spec.p - g for g in gaps]
    taus_expected, taus_fit = [], []
    hardy = {g: [] for g in gammas}
    growth = {g: [] for g in gammas}
    failures = []
    for bt in bts:
        sub = spec.with_(beta=bt)
        taus_expected.append(sub.tau)
        try:
            fields = level_fields(sub, settings, levels, eps, grading, jobs=jobs)
        except SolverFailure as exc:
            failures.append({"beta_tilde": bt, "error": str(exc)})
            taus_fit.append(math.nan)
            for g in gammas:
                hardy[g].append([])
                growth[g].append([])
            continue
        taus_fit.append(fit_boundary_exponent(fields[-1], window).slope)
        for g in gammas:
            H = [hardy_integral(u, g, spec.p) for u in fields]
            hardy[g].append(H)
            growth[g].append([b / a for a, b in zip(H, H[1:])])
    tau_ok = all(abs(a - b) <= tau_tol for a, b in zip(taus_fit, taus_expected))
    tau_ok = tau_ok and all(np.diff(taus_fit) < 0)
    last = int(np.argmin(gaps))
    hardy_ok = all(growth[g][last] and min(growth[g][last]) >= growth_threshold for g in gammas)
    return NonExistenceReport(
        p=spec.p,
        beta=spec.beta,
        beta_tilde=bts,
        tau_expected=taus_expected,
        tau_fitted=taus_fit,
        levels=levels,
        gammas=gammas,
        hardy=hardy,
        growth=growth,
        tau_tol=tau_tol,
        growth_threshold=growth_threshold,
        tau_ok=bool(tau_ok),
        hardy_ok=bool(hardy_ok),
        confirmed=bool(tau_ok and hardy_ok and not failures),
        failures=failures,
    )


# --------------------------------------------------------------------------
# verdict documents


def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def verdict_document(probe: str, spec: ProblemSpec, parameters: dict, data, verdict, tolerances: dict) -> dict:
    return _plain(
        {
            "probe": probe,
            "spec": spec.to_dict(),
            "parameters": parameters,
            "data": data,
            "verdict": verdict,
            "tolerances": tolerances,
        }
    )


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(doc), indent=2, sort_keys=True))
    return path
