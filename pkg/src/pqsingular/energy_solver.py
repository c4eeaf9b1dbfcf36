"""Discrete (p,q)-Dirichlet energies and the solvers built on them.

Fields are continuous piecewise-linear on a :class:`~pqsingular.domain_mesh.Mesh`;
gradients are elementwise constant, so the gradient energies are exact on the
discrete space.  Every other integral uses the element midpoint rule.

Three minimization problems share one damped Newton driver:

* the auxiliary problem with a frozen right-hand side ``s(x)``
  (energy ``(1/p)|w'|^p + (1/q)|w'|^q - s w``), whose minimizer defines the
  fixed-point map ``S``;
* the regularized problem (P_eps), minimizing
  ``(1/p)|u'|^p + (1/q)|u'|^q - f_eps Phi_eps(u)`` with ``Phi_eps' = (u+eps)^-delta``;
  its minimizer is exactly the discrete fixed point of ``S``;
* the direct problem (eps = 0, f unregularized), admissible when beta + delta < 1.

The gradient terms are smoothed as ``(mu^2 + |u'|^2)^(t/2)`` and driven to the
exact energy through a decreasing mu-schedule followed by a final mu = 0 stage.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_banded, solveh_banded

from .domain_mesh import Mesh
from .weights import (
    CRITICAL,
    SUBLINEAR,
    ProblemSpec,
    weight_eps_from_distance,
    weight_from_distance,
)

log = logging.getLogger(__name__)

# fraction-to-boundary factor for steps that approach u_mid = -eps
_FTB = 0.9
_ARMIJO = 1e-4
# relative size below which an energy difference is indistinguishable from round-off
_ROUNDOFF = 64 * np.finfo(float).eps
# smallest gradient scale used in Hessians of the t < 2 terms
_HESS_GUARD = 1e-150


class SolverFailure(RuntimeError):
    """A solve did not converge.  ``last`` holds the last iterate(s)."""

    def __init__(self, message, last=None, report=None):
        super().__init__(message)
        self.last = last
        self.report = report or {}


@dataclass(frozen=True, eq=False)
class DiscreteField:
    mesh: Mesh
    values: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.values) != self.mesh.n_nodes:
            raise ValueError("field length does not match the mesh")

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.values[:-1] + self.values[1:])

    @property
    def gradients(self) -> np.ndarray:
        return np.diff(self.values) / self.mesh.lengths

    def satisfies_dirichlet(self) -> bool:
        return bool(np.all(self.values[self.mesh.dirichlet] == 0.0))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "x", "d", "u"])
            m = self.mesh
            for i in range(m.n_nodes):
                writer.writerow([i, repr(float(m.nodes[i])), repr(float(m.dist[i])), repr(float(self.values[i]))])
        return path


def zero_field(mesh: Mesh) -> DiscreteField:
    return DiscreteField(mesh, np.zeros(mesh.n_nodes))


@dataclass(frozen=True)
class SolverSettings:
    mu_schedule: tuple = tuple(10.0**-k for k in range(1, 9))
    newton_tol: float = 1e-10
    newton_max_iter: int = 200
    picard_tol: float = 1e-9
    picard_max_iter: int = 400
    line_search_shrink: float = 0.5

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu_schedule)
        object.__setattr__(self, "mu_schedule", mu)
        if not mu or any(m <= 0 for m in mu):
            raise ValueError("mu schedule must be a nonempty list of positive values")
        if any(b >= a for a, b in zip(mu, mu[1:])):
            raise ValueError("mu schedule must be strictly decreasing")
        if mu[-1] > 1e-8:
            raise ValueError("last mu must be <= 1e-8")
        if self.newton_tol <= 0 or self.picard_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.newton_max_iter < 1 or self.picard_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line-search shrink factor must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "mu_schedule": list(self.mu_schedule),
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
            "picard_tol": self.picard_tol,
            "picard_max_iter": self.picard_max_iter,
            "line_search_shrink": self.line_search_shrink,
        }


# --------------------------------------------------------------------------
# pointwise kernels


def _density(g, t, mu):
    s = np.hypot(mu, g)
    return s**t / t


def _flux(g, t, mu):
    """d/dg of (1/t)(mu^2+g^2)^(t/2)."""
    s = np.hypot(mu, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s ** (t - 2.0) * g
    return np.where(s == 0, 0.0, out)


def _flux_derivative(g, t, mu):
    s = np.hypot(mu, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = g / s
        m = mu / s
        out = s ** (t - 2.0) * ((t - 1.0) * c * c + m * m)
    return out


def dirichlet_energy(u: DiscreteField, t: float, mu: float = 0.0) -> float:
    """(1/t) sum_e w_e (mu^2 + |Du|^2)^(t/2)."""
    if not t > 1:
        raise ValueError("exponent must exceed 1")
    return float(np.sum(u.mesh.weights * _density(u.gradients, t, mu)))


def _primitive(m, eps, delta):
    """Phi_eps(m) = int_0^m (s + eps)^-delta ds."""
    if delta == 1:
        return np.log1p(m / eps)
    if eps == 0:
        return m ** (1.0 - delta) / (1.0 - delta)
    return ((m + eps) ** (1.0 - delta) - eps ** (1.0 - delta)) / (1.0 - delta)


def potential_energy(u: DiscreteField, eps: float, spec: ProblemSpec) -> float:
    """int f_eps Phi_eps(u) by the midpoint rule (eps = 0: int f u^(1-delta)/(1-delta))."""
    mesh = u.mesh
    if eps == 0:
        if not spec.beta + spec.delta < 1:
            raise ValueError("eps = 0 is only admissible when beta + delta < 1")
        weight = weight_from_distance(spec, mesh.mid_dist)
    else:
        weight = weight_eps_from_distance(spec, mesh.mid_dist, eps)
    m = u.midpoints
    if np.any(m + eps < 0) or (eps == 0 and np.any(m < 0)):
        raise SolverFailure("potential undefined: u < -eps at a quadrature point", last=u)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = float(np.sum(mesh.weights * weight * _primitive(m, eps, spec.delta)))
    if not math.isfinite(val):
        raise SolverFailure("non-finite potential energy", last=u)
    return val


# --------------------------------------------------------------------------
# energy functionals


class _Functional:
    """Gradient part shared by all problems; subclasses add the load."""

    def __init__(self, mesh: Mesh, spec: ProblemSpec):
        self.mesh = mesh
        self.spec = spec
        self.w = mesh.weights
        self.h = mesh.lengths
        self.free = mesh.free
        self.mu = 0.0
        self.mu_hess = 0.0

    def _hess_mu(self, t):
        # t > 2: the curvature vanishes at g = 0 and needs the floor mu_hess.
        # t < 2: a floor would understate the (large) curvature near g = 0 and
        # make Newton overshoot, so only a tiny guard against g = 0 is kept.
        if t > 2:
            return max(self.mu, self.mu_hess)
        return max(self.mu, _HESS_GUARD)

    # load hooks: value, per-element nodal load (half of w F phi'), hessian weight
    def load_value(self, m):
        raise NotImplementedError

    def load_terms(self, m):
        raise NotImplementedError

    def admissible_step(self, m, dm):
        return 1.0

    def value(self, u):
        g = np.diff(u) / self.h
        grad_part = self.w * (_density(g, self.spec.p, self.mu) + _density(g, self.spec.q, self.mu))
        lv = self.load_value(0.5 * (u[:-1] + u[1:]))
        total = float(np.sum(grad_part) - np.sum(lv))
        scale = float(np.sum(np.abs(grad_part)) + np.sum(np.abs(lv)))
        return total, scale

    def gradient(self, u, hessian=True):
        p, q, mu = self.spec.p, self.spec.q, self.mu
        g = np.diff(u) / self.h
        flux = self.w * (_flux(g, p, mu) + _flux(g, q, mu)) / self.h
        load, load_h = self.load_terms(0.5 * (u[:-1] + u[1:]))
        n = len(u)
        grad = np.zeros(n)
        grad[:-1] -= flux + load
        grad[1:] += flux - load
        scale = np.zeros(n)
        scale[:-1] += np.abs(flux) + np.abs(load)
        scale[1:] += np.abs(flux) + np.abs(load)
        if not hessian:
            return grad, scale, None
        k = self.w * (_flux_derivative(g, p, self._hess_mu(p)) + _flux_derivative(g, q, self._hess_mu(q))) / self.h**2
        diag = np.zeros(n)
        diag[:-1] += k + load_h
        diag[1:] += k + load_h
        off = -k + load_h
        return grad, scale, (diag, off)


class _LinearLoad(_Functional):
    """Load sum_e w_e s_e (u_i + u_{i+1})/2 with a frozen elementwise source."""

    def __init__(self, mesh, spec, source):
        super().__init__(mesh, spec)
        self.source = np.broadcast_to(np.asarray(source, dtype=float), (mesh.n_elements,)).copy()

    def load_value(self, m):
        return self.w * self.source * m

    def load_terms(self, m):
        return 0.5 * self.w * self.source, np.zeros_like(m)


class _SingularLoad(_Functional):
    """Load int weight * Phi_eps(u), concave in u; eps = 0 gives the direct functional."""

    def __init__(self, mesh, spec, eps, weight):
        super().__init__(mesh, spec)
        self.eps = float(eps)
        self.weight = weight
        self.delta = spec.delta

    def _phi(self, m):
        # additive constants dropped: they would swamp the energy differences
        z = m + self.eps
        if self.delta == 1:
            return np.log(z)
        return z ** (1.0 - self.delta) / (1.0 - self.delta)

    def load_value(self, m):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.w * self.weight * self._phi(m)

    def load_terms(self, m):
        z = m + self.eps
        wf = self.w * self.weight
        zd = z ** (-self.delta)
        return 0.5 * wf * zd, 0.25 * wf * self.delta * zd / z

    def admissible_step(self, m, dm):
        neg = dm < 0
        if not np.any(neg):
            return 1.0
        room = (m[neg] + self.eps) / (-dm[neg])
        return min(1.0, _FTB * float(np.min(room)))


# --------------------------------------------------------------------------
# damped Newton


@dataclass
class NewtonStats:
    iterations: int = 0
    residual: float = math.inf
    energy_history: list = field(default_factory=list)
    roundoff_steps: int = 0
    floor_exits: int = 0
    stages: list = field(default_factory=list)


def _solve_tridiagonal(diag, off, rhs):
    ab = np.empty((2, len(diag)))
    ab[0, 0] = 0.0
    ab[0, 1:] = off
    ab[1] = diag
    try:
        return solveh_banded(ab, rhs, lower=False, check_finite=False)
    except (LinAlgError, ValueError):
        full = np.zeros((3, len(diag)))
        full[0, 1:] = off
        full[1] = diag
        full[2, :-1] = off
        return solve_banded((1, 1), full, rhs, check_finite=False)


def _residual(grad, scale, free):
    g = np.abs(grad[free])
    s = scale[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(g == 0, 0.0, g / s)
    return float(np.max(r)) if len(r) else 0.0


def _newton(fun: _Functional, u, tol, max_iter, shrink, stats: NewtonStats):
    free = fun.free
    lo, hi = free[0], free[-1] + 1  # free nodes are contiguous
    at_floor = 0
    for _ in range(max_iter):
        grad, scale, (diag, off) = fun.gradient(u)
        res = _residual(grad, scale, free)
        stats.residual = res
        if res <= tol:
            return u
        du = np.zeros_like(u)
        du[lo:hi] = _solve_tridiagonal(diag[lo:hi], off[lo : hi - 1], -grad[lo:hi])
        slope = float(grad[lo:hi] @ du[lo:hi])
        if not slope < 0:
            raise SolverFailure("Newton direction is not a descent direction", last=u)
        m = 0.5 * (u[:-1] + u[1:])
        dm = 0.5 * (du[:-1] + du[1:])
        alpha = fun.admissible_step(m, dm)
        e0, escale = fun.value(u)
        while True:
            trial = u + alpha * du
            e1, _ = fun.value(trial)
            if e1 <= e0 + _ARMIJO * alpha * slope and e1 < e0:
                stats.energy_history.append((e0, e1, False))
                # a "decrease" predicted below round-off is round-off as well
                at_floor = at_floor + 1 if -slope <= _ROUNDOFF * escale else 0
                break
            if alpha == 1.0 and abs(e1 - e0) <= _ROUNDOFF * escale and -slope <= _ROUNDOFF * escale:
                # predicted and actual changes are both below the round-off floor
                stats.energy_history.append((e0, e1, True))
                stats.roundoff_steps += 1
                at_floor += 1
                break
            alpha *= shrink
            if alpha < 1e-16:
                raise SolverFailure("line search failed", last=u, report={"residual": res})
        u = trial
        stats.iterations += 1
        if at_floor >= 2:
            # energy gap below round-off twice in a row: no further measurable progress
            grad, scale, _ = fun.gradient(u, hessian=False)
            stats.residual = _residual(grad, scale, free)
            stats.floor_exits += 1
            return u
    grad, scale, _ = fun.gradient(u, hessian=False)
    stats.residual = _residual(grad, scale, free)
    if stats.residual <= tol:
        return u
    raise SolverFailure(
        f"Newton did not converge in {max_iter} iterations (residual {stats.residual:.3e})",
        last=u,
        report={"residual": stats.residual},
    )


def _minimize(fun: _Functional, u0, settings: SolverSettings):
    """mu-continuation down the schedule, then an exact (mu = 0) Newton stage."""
    stats = NewtonStats()
    u = np.array(u0, dtype=float)
    u[fun.mesh.dirichlet] = 0.0
    stage_tol = max(settings.newton_tol, 1e-8)
    for mu in settings.mu_schedule:
        fun.mu, fun.mu_hess = mu, mu
        u = _newton(fun, u, stage_tol, settings.newton_max_iter, settings.line_search_shrink, stats)
        stats.stages.append((mu, stats.iterations, stats.residual))
    fun.mu, fun.mu_hess = 0.0, settings.mu_schedule[-1]
    u = _newton(fun, u, settings.newton_tol, settings.newton_max_iter, settings.line_search_shrink, stats)
    stats.stages.append((0.0, stats.iterations, stats.residual))
    return u, stats


def _stats_info(stats: NewtonStats) -> dict:
    return {
        "newton_iterations": stats.iterations,
        "residual": stats.residual,
        "roundoff_steps": stats.roundoff_steps,
        "floor_exits": stats.floor_exits,
        "energy_history": stats.energy_history,
    }


# --------------------------------------------------------------------------
# problems


def solve_source_problem(
    mesh: Mesh, spec: ProblemSpec, source, settings: SolverSettings, w0=None
) -> DiscreteField:
    """Minimize (1/p)int|w'|^p + (1/q)int|w'|^q - int s w with s given per element."""
    fun = _LinearLoad(mesh, spec, source)
    start = np.zeros(mesh.n_nodes) if w0 is None else np.asarray(getattr(w0, "values", w0), dtype=float)
    if np.all(fun.source == 0):
        return DiscreteField(mesh, np.zeros(mesh.n_nodes), {"newton_iterations": 0, "residual": 0.0})
    u, stats = _minimize(fun, start, settings)
    # discrete maximum principle: negative values can only be round-off
    u = np.maximum(u, 0.0) if np.all(fun.source >= 0) else u
    return DiscreteField(mesh, u, _stats_info(stats))


def auxiliary_source(v: DiscreteField, eps: float, spec: ProblemSpec) -> np.ndarray:
    """Elementwise f_eps (|v| + eps)^-delta at midpoints."""
    weight = weight_eps_from_distance(spec, v.mesh.mid_dist, eps)
    return weight * (np.abs(v.midpoints) + eps) ** (-spec.delta)


def solve_auxiliary(v: DiscreteField, eps: float, spec: ProblemSpec, settings: SolverSettings, w0=None) -> DiscreteField:
    """One application of the fixed-point map S: v -> minimizer with frozen source."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return solve_source_problem(v.mesh, spec, auxiliary_source(v, eps, spec), settings, w0=w0 if w0 is not None else v)


def regularized_energy(u: DiscreteField, eps: float, spec: ProblemSpec) -> float:
    """J_eps(u) = sum of the two Dirichlet energies minus int f_eps Phi_eps(u)."""
    return (
        dirichlet_energy(u, spec.p)
        + dirichlet_energy(u, spec.q)
        - potential_energy(u, eps, spec)
    )


def direct_energy(u: DiscreteField, spec: ProblemSpec) -> float:
    """I(u) = (1/p)int|u'|^p + (1/q)int|u'|^q - (1/(1-delta)) int f |u|^(1-delta)."""
    mesh = u.mesh
    weight = weight_from_distance(spec, mesh.mid_dist)
    m = np.abs(u.midpoints)
    pot = float(np.sum(mesh.weights * weight * m ** (1.0 - spec.delta))) / (1.0 - spec.delta)
    return dirichlet_energy(u, spec.p) + dirichlet_energy(u, spec.q) - pot


def initial_guess(mesh: Mesh, spec: ProblemSpec, eps: float = 0.0, amplitude: float = 0.1) -> DiscreteField:
    """Regime-shaped positive profile used to start solves.

    beta + delta > 1: the eps-shifted power amplitude*((d + eps^(1/tau))^tau - eps);
    otherwise a multiple of d (log-corrected in the critical regime).
    """
    d = mesh.dist
    if spec.regime == SUBLINEAR or spec.beta >= spec.p:
        prof = d / mesh.domain.max_distance
    elif spec.regime == CRITICAL:
        L = math.e * (mesh.domain.diameter + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            prof = np.where(d > 0, d * np.log(L / np.where(d > 0, d, 1.0)) ** (1.0 / (spec.p - spec.beta)), 0.0)
    else:
        tau = spec.tau
        prof = (d + eps ** (1.0 / tau)) ** tau - eps if eps > 0 else d**tau
        prof = np.maximum(prof, 0.0)
    vals = amplitude * prof
    vals[mesh.dirichlet] = 0.0
    return DiscreteField(mesh, vals)


def solve_regularized(
    eps: float, spec: ProblemSpec, settings: SolverSettings, u_init: DiscreteField
) -> DiscreteField:
    """Solve (P_eps) as the minimizer of the strictly convex functional J_eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    mesh = u_init.mesh
    weight = weight_eps_from_distance(spec, mesh.mid_dist, eps)
    if spec.c_f == 0:
        return DiscreteField(mesh, np.zeros(mesh.n_nodes), {"newton_iterations": 0, "residual": 0.0})
    fun = _SingularLoad(mesh, spec, eps, weight)
    start = np.maximum(u_init.values, 0.0)
    u, stats = _minimize(fun, start, settings)
    return DiscreteField(mesh, np.maximum(u, 0.0), _stats_info(stats))


def fixed_point_residual(u: DiscreteField, eps: float, spec: ProblemSpec, settings: SolverSettings) -> float:
    """sup |S(u) - u|."""
    su = solve_auxiliary(u, eps, spec, settings, w0=u)
    return float(np.max(np.abs(su.values - u.values)))


def picard_solve(
    eps: float,
    spec: ProblemSpec,
    settings: SolverSettings,
    u_init: DiscreteField,
    theta: float = 1.0,
) -> DiscreteField:
    """Iterate w <- w + theta (S(w) - w) until the sup-norm change is <= picard_tol.

    S is order-reversing, so undamped iterates from a subsolution alternate
    around the fixed point; whenever the update stops contracting theta is
    halved (floor 1/64).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not spec.solvable:
        raise ValueError("picard_solve needs beta < p")
    w = u_init
    prev = None
    change_prev = math.inf
    newton_total = 0
    history = []
    for k in range(1, settings.picard_max_iter + 1):
        sw = solve_auxiliary(w, eps, spec, settings)
        newton_total += sw.info.get("newton_iterations", 0)
        change = float(np.max(np.abs(sw.values - w.values)))
        history.append((theta, change))
        if change <= settings.picard_tol:
            return DiscreteField(
                w.mesh,
                sw.values,
                {"picard_iterations": k, "newton_iterations": newton_total, "theta": theta, "history": history},
            )
        if change > 0.999 * change_prev and theta > 1.0 / 64:
            theta *= 0.5
        change_prev = change
        prev = w
        w = DiscreteField(w.mesh, w.values + theta * (sw.values - w.values))
    raise SolverFailure(
        f"Picard iteration did not converge in {settings.picard_max_iter} steps",
        last=(prev, w),
        report={"history": history[-10:]},
    )


def solve_eps(
    eps: float,
    spec: ProblemSpec,
    settings: SolverSettings,
    u_init: DiscreteField,
    method: str = "newton",
) -> DiscreteField:
    if method == "newton":
        return solve_regularized(eps, spec, settings, u_init)
    if method == "picard":
        return picard_solve(eps, spec, settings, u_init)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class TraceRecord:
    eps: float
    field: DiscreteField
    picard_iterations: int
    newton_iterations: int
    energy: float
    wall_time: float


@dataclass
class ContinuationTrace:
    records: list = field(default_factory=list)
    monotone: bool = True
    retries: int = 0

    @property
    def eps(self):
        return [r.eps for r in self.records]

    @property
    def fields(self):
        return [r.field for r in self.records]

    @property
    def final(self) -> DiscreteField:
        return self.records[-1].field

    def sup_differences(self):
        f = self.fields
        return [float(np.max(np.abs(b.values - a.values))) for a, b in zip(f, f[1:])]

    def summary(self) -> list:
        return [
            {
                "eps": r.eps,
                "sup_norm": r.field.sup,
                "picard_iterations": r.picard_iterations,
                "newton_iterations": r.newton_iterations,
                "energy": r.energy,
                "wall_time": r.wall_time,
            }
            for r in self.records
        ]


def continuation(
    spec: ProblemSpec,
    settings: SolverSettings,
    eps0: float,
    ratio: float,
    steps: int,
    mesh: Mesh,
    method: str = "newton",
    u_init: DiscreteField | None = None,
    check_monotone: bool | None = None,
) -> ContinuationTrace:
    """Solve (P_eps_k), eps_k = eps0 ratio^k, k = 0..steps, warm-starting each solve.

    For beta < p the solutions must increase as eps decreases; a violation
    beyond picard_tol is retried once from the initial profile, then raises.
    """
    if not eps0 > 0 or not 0 < ratio < 1 or steps < 0:
        raise ValueError("need eps0 > 0, 0 < ratio < 1, steps >= 0")
    if spec.beta == spec.p:
        raise ValueError("beta = p is the non-existence threshold; no regularized weight")
    if check_monotone is None:
        check_monotone = spec.solvable
    trace = ContinuationTrace()
    current = u_init if u_init is not None else initial_guess(mesh, spec, eps0)
    for k in range(steps + 1):
        eps = eps0 * ratio**k
        t0 = time.perf_counter()
        u = solve_eps(eps, spec, settings, current, method)
        if check_monotone and trace.records:
            prev = trace.records[-1].field
            if np.any(u.values < prev.values - settings.picard_tol):
                log.warning("monotonicity violated at eps=%g; retrying from the initial profile", eps)
                trace.retries += 1
                u = solve_eps(eps, spec, settings, initial_guess(mesh, spec, eps), method)
                if np.any(u.values < prev.values - settings.picard_tol):
                    trace.monotone = False
                    raise SolverFailure(
                        f"continuation lost monotonicity at eps={eps:g}", last=(prev, u), report={"eps": eps}
                    )
        wall = time.perf_counter() - t0
        trace.records.append(
            TraceRecord(
                eps=eps,
                field=u,
                picard_iterations=u.info.get("picard_iterations", 0),
                newton_iterations=u.info.get("newton_iterations", 0),
                energy=regularized_energy(u, eps, spec),
                wall_time=wall,
            )
        )
        current = u
    return trace


def solve_direct(
    spec: ProblemSpec, settings: SolverSettings, mesh: Mesh, u_init: DiscreteField | None = None
) -> DiscreteField:
    """Global minimizer of I(u) for beta + delta < 1 (no eps-regularization)."""
    if not spec.beta + spec.delta < 1:
        raise ValueError("the direct method needs beta + delta < 1")
    if spec.c_f == 0:
        return zero_field(mesh)
    weight = weight_from_distance(spec, mesh.mid_dist)
    fun = _SingularLoad(mesh, spec, 0.0, weight)
    start = initial_guess(mesh, spec) if u_init is None else u_init
    vals = np.array(start.values, dtype=float)
    if np.any(vals[mesh.free] <= 0):
        raise ValueError("direct solve needs a start that is positive at interior nodes")
    u, stats = _minimize(fun, vals, settings)
    return DiscreteField(mesh, np.maximum(u, 0.0), _stats_info(stats))


def sup_distance(a: DiscreteField, b: DiscreteField) -> float:
    return float(np.max(np.abs(a.values - b.values)))


def map_jobs(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map, fanned out to worker processes when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
