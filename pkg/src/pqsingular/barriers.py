"""Explicit barrier profiles, the Theta shooting profile and the torsion oracle.

Barrier families (amplitude ``a``):

* power, beta + delta > 1:  a((d + eps^(1/tau))^tau - eps), tau = (p-beta)/(p-1+delta);
* logarithmic, beta + delta = 1:
  (a d + e') log^(1/(p-beta))(L/(a d + e')) - e' log^(1/(p-beta))(L/e');
* linear, beta + delta < 1: a d.

``theta_shoot`` integrates -(|T'|^(p-2) T')' = T^(-delta-beta), T(0) = 0,
T'(0) = alpha for the first-order pair (T, F = |T'|^(p-2) T').
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .domain_mesh import INTERVAL, Mesh, distance
from .energy_solver import DiscreteField, _LinearLoad
from .weights import CRITICAL, SUBLINEAR, SUPERLINEAR, ProblemSpec


class RegimeMismatch(ValueError):
    """A barrier family was requested outside the regime it belongs to."""


@dataclass(frozen=True)
class BarrierParams:
    eta: float = 1.0
    Gamma: float = 1.0
    L: float | None = None
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.eta > 0 and self.Gamma > 0 and self.alpha > 0):
            raise ValueError("eta, Gamma and alpha must be positive")
        if self.L is not None and not self.L > 0:
            raise ValueError("L must be positive")


def min_log_scale(spec: ProblemSpec) -> float:
    """Smallest admissible L: log(L/(diam + 1)) = 2/(p - beta)."""
    return (spec.domain.diameter + 1.0) * math.exp(2.0 / (spec.p - spec.beta))


def log_scale(spec: ProblemSpec, params: BarrierParams | None = None) -> float:
    """The L in use, validated against :func:`min_log_scale`."""
    L = params.L if params is not None and params.L is not None else min_log_scale(spec)
    if L < min_log_scale(spec) * (1.0 - 1e-12):
        raise ValueError(f"L = {L!r} too small: need log(L/(diam+1)) >= 2/(p-beta)")
    return L


def _as_output(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


# --------------------------------------------------------------------------
# power barriers


def power_profile(d, eps: float, tau: float):
    """(d + eps^(1/tau))^tau - eps; equals d^tau at eps = 0 and 0 at d = 0."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    d = np.asarray(d, dtype=float)
    if eps == 0:
        return _as_output(d**tau)
    out = (d + eps ** (1.0 / tau)) ** tau - eps
    # at d = 0 the two terms cancel only up to rounding
    out = np.where(d == 0, 0.0, out)
    return _as_output(out)


def _check_power(spec: ProblemSpec):
    if spec.regime != SUPERLINEAR or not spec.solvable:
        raise RegimeMismatch("power barriers need beta + delta > 1 and beta < p")


def lower_barrier_power(x, eps: float, spec: ProblemSpec, params: BarrierParams = BarrierParams()):
    _check_power(spec)
    return _as_output(params.eta * np.asarray(power_profile(distance(spec.domain, x), eps, spec.tau)))


def upper_barrier_power(x, eps: float, spec: ProblemSpec, params: BarrierParams = BarrierParams()):
    _check_power(spec)
    return _as_output(params.Gamma * np.asarray(power_profile(distance(spec.domain, x), eps, spec.tau)))


# --------------------------------------------------------------------------
# logarithmic barriers


def log_profile(d, eps_prime: float, amplitude: float, exponent: float, L: float):
    """(a d + e') log^k(L/(a d + e')) - e' log^k(L/e'), with the e' = 0 limit."""
    if eps_prime < 0:
        raise ValueError("eps' must be nonnegative")
    d = np.asarray(d, dtype=float)
    z = amplitude * d + eps_prime
    with np.errstate(divide="ignore", invalid="ignore"):
        main = np.where(z > 0, z * (math.log(L) - np.log(np.where(z > 0, z, 1.0))) ** exponent, 0.0)
    shift = eps_prime * (math.log(L) - math.log(eps_prime)) ** exponent if eps_prime > 0 else 0.0
    out = np.where(d == 0, 0.0, main - shift)
    return _as_output(out)


def barrier_log(x, eps_prime: float, amplitude: float, spec: ProblemSpec, params: BarrierParams = BarrierParams()):
    if spec.regime != CRITICAL:
        raise RegimeMismatch("the logarithmic barrier belongs to beta + delta = 1")
    L = log_scale(spec, params)
    return log_profile(distance(spec.domain, x), eps_prime, amplitude, 1.0 / (spec.p - spec.beta), L)


def log_shift(eps: float, spec: ProblemSpec, L: float) -> float:
    """Solve eps = e' log^(1/(p-beta))(L/e') for e' in (0, L/e)."""
    if eps <= 0:
        return 0.0
    k = 1.0 / (spec.p - spec.beta)
    top = L * math.exp(-k)
    if eps >= top * k**k:
        raise ValueError("eps too large for the logarithmic shift")
    return brentq(lambda e: e * math.log(L / e) ** k - eps, 1e-300, top, xtol=1e-300, rtol=4 * np.finfo(float).eps)


# --------------------------------------------------------------------------
# unit profiles used by the sandwich diagnostics


def barrier_unit(spec: ProblemSpec, d, eps: float, L: float | None = None):
    """Amplitude-1 barrier profile of the regime of ``spec`` at distance ``d``."""
    if spec.regime == SUPERLINEAR:
        _check_power(spec)
        return power_profile(d, eps, spec.tau)
    if spec.regime == CRITICAL:
        L = log_scale(spec, BarrierParams(L=L))
        return log_profile(d, log_shift(eps, spec, L), 1.0, 1.0 / (spec.p - spec.beta), L)
    return _as_output(np.asarray(d, dtype=float) * 1.0)


# --------------------------------------------------------------------------
# Theta shooting


@dataclass(frozen=True, eq=False)
class ThetaTable:
    alpha: float
    h: float
    r: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    R_alpha: float  # math.inf when the derivative stays positive up to r_max

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def interpolant(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.r, self.theta, self.dtheta)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.r_max):
            raise ValueError("abscissa outside the Theta table")
        return _as_output(self.interpolant()(r))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "dtheta"])
            for a, b, c in zip(self.r, self.theta, self.dtheta):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
        return path


def _graded_start(h: float, sigma: float, width: float) -> np.ndarray:
    """Abscissas on [0, width] clustered at 0 so the midpoint rule keeps O(h^2).

    The right-hand side behaves like r^-sigma near 0.  Nodes width*(j/J)^m with
    m(1 - sigma) > 2 and a last spacing of about h keep the summed local errors
    at O(h^2); a graded layer whose width shrinks with h would only give
    O(h^(1-sigma)).
    """
    m = min(max(3.0, 2.0 / (1.0 - sigma) + 1.0), 40.0)
    levels = max(8, int(math.ceil(m * width / h)))
    return width * (np.arange(levels + 1) / levels) ** m


def theta_shoot(alpha: float, spec: ProblemSpec, r_max: float, h: float) -> ThetaTable:
    """March the Theta ODE with the explicit midpoint rule.

    The first graded node r0 is started from the two-term series
    T = alpha r - alpha^(2-p-s) r^(2-s)/((p-1)(1-s)(2-s)),
    F = alpha^(p-1) - alpha^(-s) r^(1-s)/(1-s), s = beta + delta.
    The first half of [0, r_max] is graded towards 0; past it the step is
    uniform and equal to ``h``.  Integration stops at
    ``r_max`` or where T' first reaches 0 (recorded as R_alpha).
    """
    if not alpha > 0 or not h > 0 or not r_max > 0:
        raise ValueError("alpha, h and r_max must be positive")
    s = spec.beta + spec.delta
    if spec.regime != SUBLINEAR:
        raise RegimeMismatch("the Theta profile needs beta + delta < 1")
    p = spec.p
    k = 1.0 / (p - 1.0)

    def slope(F):
        return np.sign(F) * abs(F) ** k

    graded = _graded_start(h, s, 0.5 * r_max)
    n_uniform = int(math.floor((r_max - graded[-1]) / h + 1e-9))
    grid = np.concatenate([graded, graded[-1] + h * np.arange(1, n_uniform + 1)])
    if grid[-1] < r_max * (1 - 1e-12):
        grid = np.append(grid, r_max)

    r0 = grid[1]
    T = alpha * r0 - alpha ** (2.0 - p - s) * r0 ** (2.0 - s) / ((p - 1.0) * (1.0 - s) * (2.0 - s))
    F = alpha ** (p - 1.0) - alpha ** (-s) * r0 ** (1.0 - s) / (1.0 - s)
    rs, Ts, Ds = [0.0, r0], [0.0, T], [alpha, slope(F)]
    R_alpha = math.inf
    for i in range(1, len(grid) - 1):
        dr = grid[i + 1] - grid[i]
        T_half = T + 0.5 * dr * slope(F)
        F_half = F - 0.5 * dr * T ** (-s)
        if T_half <= 0:
            raise FloatingPointError(f"Theta became nonpositive near r = {grid[i]!r}")
        T_new = T + dr * slope(F_half)
        F_new = F - dr * T_half ** (-s)
        if T_new <= 0:
            raise FloatingPointError(f"Theta became nonpositive near r = {grid[i + 1]!r}")
        if F_new <= 0:
            if i < 5:
                raise ValueError("step h too large: Theta' changes sign within the first steps")
            R_alpha = grid[i] + dr * F / (F - F_new)
            break
        T, F = T_new, F_new
        rs.append(grid[i + 1])
        Ts.append(T)
        Ds.append(slope(F))
    return ThetaTable(alpha, h, np.array(rs), np.array(Ts), np.array(Ds), R_alpha)


def scaling_exponents(alpha: float, spec: ProblemSpec) -> tuple[float, float]:
    """(A, B) with Theta_alpha(r) = A Theta_1(B r).

    Matching T'(0) = alpha forces A B = alpha, and the equation forces
    alpha^(p-1) B A^s = 1, s = beta + delta; hence
    A = alpha^(p/(1-s)), B = alpha^(-(p-1+s)/(1-s)).
    """
    s = spec.beta + spec.delta
    return alpha ** (spec.p / (1.0 - s)), alpha ** (-(spec.p - 1.0 + s) / (1.0 - s))


def literal_scaling_exponents(alpha: float, spec: ProblemSpec) -> tuple[float, float]:
    """The substitution A = alpha^(p/(beta+delta-1)), B = alpha^(-p/(p-1+delta+beta)) as printed.

    Kept for comparison only: it does not satisfy A B = alpha for alpha != 1.
    """
    s = spec.beta + spec.delta
    return alpha ** (spec.p / (s - 1.0)), alpha ** (-spec.p / (spec.p - 1.0 + s))


def theta_scaling_check(
    alpha: float,
    spec: ProblemSpec,
    r_probe,
    h: float = 1e-5,
    tables: tuple[ThetaTable, ThetaTable] | None = None,
    exponents=scaling_exponents,
) -> float:
    """max over probes of |T_alpha(r) - A T_1(B r)| / T_alpha(r)."""
    r_probe = np.atleast_1d(np.asarray(r_probe, dtype=float))
    A, B = exponents(alpha, spec)
    if tables is None:
        t_alpha = theta_shoot(alpha, spec, float(r_probe.max()) * (1 + 1e-9), h)
        t_one = theta_shoot(1.0, spec, float(B * r_probe.max()) * (1 + 1e-9), h)
    else:
        t_alpha, t_one = tables
    if r_probe.max() > t_alpha.r_max or B * r_probe.max() > t_one.r_max:
        raise ValueError("probe point beyond the Theta table (check R_alpha)")
    lhs = np.atleast_1d(t_alpha(r_probe))
    rhs = A * np.atleast_1d(t_one(B * r_probe))
    return float(np.max(np.abs(lhs - rhs) / lhs))


def q_companion(table: ThetaTable, q: float) -> np.ndarray:
    """Finite-difference -(|T'|^(q-2) T')' at interior table points (uniform part)."""
    flux = np.sign(table.dtheta) * np.abs(table.dtheta) ** (q - 1.0)
    r = table.r
    return -np.gradient(flux, r)[1:-1]


# --------------------------------------------------------------------------
# torsion oracle


def h_map(s, spec: ProblemSpec):
    s = np.asarray(s, dtype=float)
    return s ** (spec.p - 1.0) + s ** (spec.q - 1.0)


def h_inverse(y, spec: ProblemSpec, tol: float = 1e-14):
    """Invert h(s) = s^(p-1) + s^(q-1) on [0, inf) by bisection."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("h^-1 is only needed for nonnegative arguments")
    lo = np.zeros_like(y)
    hi = 1.0 + y ** (1.0 / (spec.p - 1.0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = h_map(mid, spec) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
            break
    return _as_output(0.5 * (lo + hi))


def _flux_of_distance(d, rho, mesh: Mesh):
    dom = mesh.domain
    if dom.kind == INTERVAL:
        return rho * (0.5 * dom.extent - d)
    return rho * (dom.extent - d) / dom.dim


def torsion_oracle(rho: float, spec: ProblemSpec, mesh: Mesh, order: int = 8) -> DiscreteField:
    """Semi-analytic solution of -Delta_p u - Delta_q u = rho with u = 0 on the boundary.

    |u'| = h^-1(|F|) with F the exact flux; u(d) = int_0^d h^-1(F(t)) dt is
    accumulated from the boundary inward with Gauss-Legendre on each gap
    between consecutive node distances.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    gx, gw = np.polynomial.legendre.leggauss(order)
    dvals, inverse = np.unique(mesh.dist, return_inverse=True)
    a, b = dvals[:-1], dvals[1:]
    t = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gx[None, :]
    integrand = h_inverse(_flux_of_distance(t, rho, mesh), spec)
    pieces = 0.5 * (b - a) * (integrand @ gw)
    U = np.concatenate([[0.0], np.cumsum(pieces)])
    vals = U[inverse]
    vals[mesh.dirichlet] = 0.0
    return DiscreteField(mesh, vals, {"oracle": "torsion", "rho": rho})


def torsion_family(rhos, spec: ProblemSpec, mesh: Mesh) -> list[DiscreteField]:
    """The map rho -> u_rho on a list of loads (increasing in rho nodewise)."""
    return [torsion_oracle(r, spec, mesh) for r in rhos]


def torsion_residual(u: DiscreteField, rho: float, spec: ProblemSpec) -> float:
    """Largest discrete weak-form residual of -Delta_p - Delta_q - rho, relative to the nodal load."""
    mesh = u.mesh
    fun = _LinearLoad(mesh, spec, np.full(mesh.n_elements, float(rho)))
    grad, _, _ = fun.gradient(u.values, hessian=False)
    load = np.zeros(mesh.n_nodes)
    load[:-1] += 0.5 * rho * mesh.weights
    load[1:] += 0.5 * rho * mesh.weights
    free = mesh.free
    return float(np.max(np.abs(grad[free]) / load[free]))
