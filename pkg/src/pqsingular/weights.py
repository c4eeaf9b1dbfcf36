"""Problem data: exponents, the singular weight and its regularization.

The model weight is ``f(x) = c_f * d(x)**(-beta)`` on the whole domain.  The
regularized weight used by the epsilon-problems is

    f_eps = (f**(-1/beta) + eps**((p - 1 + delta)/(p - beta)))**(-beta),

which is bounded, increases to ``f`` as eps decreases when beta < p, and
decreases when beta > p.  For beta = 0 the weight is bounded already and we
take ``f_eps = f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain_mesh import Domain, distance

SUBLINEAR = "sublinear"
CRITICAL = "critical"
SUPERLINEAR = "superlinear"

# beta + delta is compared with 1 up to this slack, so that 0.4 + 0.6 counts as critical
REGIME_TOL = 1e-12


class NonExistenceThreshold(ValueError):
    """Raised when an operation needs beta != p (or beta < p)."""


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    q: float
    delta: float
    beta: float
    c_f: float = 1.0
    domain: Domain = field(default_factory=Domain.interval)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 1 < self.q <= self.p:
            raise ValueError("q must satisfy 1 < q <= p")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if not self.c_f >= 0:
            raise ValueError("c_f must be nonnegative")

    @property
    def regime(self) -> str:
        s = self.beta + self.delta - 1.0
        if abs(s) <= REGIME_TOL:
            return CRITICAL
        return SUBLINEAR if s < 0 else SUPERLINEAR

    @property
    def solvable(self) -> bool:
        return self.beta < self.p

    @property
    def solvability(self) -> str:
        return "solvable" if self.solvable else "non-existence"

    @property
    def homogeneous(self) -> bool:
        """q == p: outside the standing assumption q < p, kept as a test mode with closed-form oracles."""
        return self.q == self.p

    @property
    def tau(self) -> float:
        """Boundary growth exponent (p - beta)/(p - 1 + delta)."""
        return (self.p - self.beta) / (self.p - 1.0 + self.delta)

    @property
    def eps_exponent(self) -> float:
        if self.beta == self.p:
            raise NonExistenceThreshold("beta = p: the regularized weight is undefined (non-existence threshold)")
        return (self.p - 1.0 + self.delta) / (self.p - self.beta)

    @property
    def rho0(self) -> float:
        """Threshold (p-1)(beta+delta-1)/(p-beta) as stated for u^rho in W^{1,p}_0."""
        return (self.p - 1.0) * (self.beta + self.delta - 1.0) / (self.p - self.beta)

    @property
    def sobolev_threshold(self) -> float:
        """Sharp rho with |grad u^rho|^p integrable for u ~ d^tau: rho > (p-1)/(p*tau).

        Agrees with :attr:`rho0` exactly where either equals 1, i.e. on the
        membership boundary delta = 2 + (1 - beta p)/(p - 1).
        """
        return (self.p - 1.0) / (self.p * self.tau)

    @property
    def membership_delta(self) -> float:
        """u lies in W^{1,p}_0 iff delta < 2 + (1 - beta p)/(p - 1)."""
        return 2.0 + (1.0 - self.beta * self.p) / (self.p - 1.0)

    @property
    def comparison_admissible(self) -> bool:
        return self.beta < 2.0 - 1.0 / self.p

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "delta": self.delta,
            "beta": self.beta,
            "c_f": self.c_f,
            "domain": {"kind": self.domain.kind, "extent": self.domain.extent, "dim": self.domain.dim},
            "regime": self.regime,
            "solvability": self.solvability,
        }


@dataclass(frozen=True)
class TruncationParams:
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("truncation level m must be positive")


def weight_from_distance(spec: ProblemSpec, d):
    """c_f d^-beta; +inf where d = 0 and beta > 0."""
    d = np.asarray(d, dtype=float)
    if spec.beta == 0:
        out = np.full_like(d, spec.c_f)
    else:
        with np.errstate(divide="ignore"):
            out = spec.c_f * d ** (-spec.beta)
        out = np.where(d == 0, np.inf, out)
    return float(out) if out.ndim == 0 else out


def eval_f(spec: ProblemSpec, x):
    return weight_from_distance(spec, distance(spec.domain, x))


def weight_eps_from_distance(spec: ProblemSpec, d, eps: float):
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = np.asarray(d, dtype=float)
    if spec.beta == 0 or spec.c_f == 0:
        out = np.full_like(d, spec.c_f)
    else:
        shift = eps ** spec.eps_exponent
        # f^(-1/beta) = c_f^(-1/beta) d, finite at the boundary
        base = d * spec.c_f ** (-1.0 / spec.beta) + shift
        with np.errstate(divide="ignore", over="ignore"):
            out = base ** (-spec.beta)
    return float(out) if out.ndim == 0 else out


def eval_f_eps(spec: ProblemSpec, x, eps: float):
    return weight_eps_from_distance(spec, distance(spec.domain, x), eps)


def g_m(s, spec: ProblemSpec, trunc: TruncationParams):
    """min(s^-delta, m) for s > 0, m otherwise."""
    s = np.asarray(s, dtype=float)
    out = np.full_like(s, trunc.m)
    pos = s > 0
    out[pos] = np.minimum(s[pos] ** (-spec.delta), trunc.m)
    return float(out) if out.ndim == 0 else out


def _log_like_primitive(s, delta):
    """Primitive of s^-delta vanishing at s = 1."""
    if delta == 1:
        return np.log(s)
    return (s ** (1.0 - delta) - 1.0) / (1.0 - delta)


def upsilon_m(s, spec: ProblemSpec, trunc: TruncationParams):
    """Antiderivative of g_m normalized by Upsilon_m(1) = 0.

    Above the breakpoint s* = m^(-1/delta) it is the power/log primitive of
    s^-delta; below it continues linearly with slope m.
    """
    s = np.asarray(s, dtype=float)
    delta, m = spec.delta, trunc.m
    s_star = m ** (-1.0 / delta)
    out = np.empty_like(s)
    upper = s >= s_star
    out[upper] = _log_like_primitive(s[upper], delta)
    out[~upper] = _log_like_primitive(s_star, delta) + m * (s[~upper] - s_star)
    return float(out) if out.ndim == 0 else out


def breakpoint(spec: ProblemSpec, trunc: TruncationParams) -> float:
    return math.pow(trunc.m, -1.0 / spec.delta)
