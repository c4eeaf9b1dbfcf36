"""Computational domains, boundary distance and boundary-graded meshes.

Two geometries are supported, both with an exact distance function:

* ``interval``: the segment (0, length);
* ``radial-ball``: the ball B_R in R^N, represented by the radius r in [0, R].

Meshes keep the distance-to-boundary of every node as a separate array that is
computed from the grading formula directly, never as ``length - x``.  Strongly
graded meshes put nodes at distances far below machine epsilon relative to the
domain size, and those distances must stay exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INTERVAL = "interval"
RADIAL = "radial-ball"


@dataclass(frozen=True)
class Domain:
    kind: str
    extent: float
    dim: int = 1

    def __post_init__(self):
        if self.kind not in (INTERVAL, RADIAL):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.extent > 0:
            raise ValueError("domain length/radius must be positive")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == INTERVAL and self.dim != 1:
            raise ValueError("an interval domain has dimension 1")

    @classmethod
    def interval(cls, length: float = 1.0) -> "Domain":
        return cls(INTERVAL, float(length), 1)

    @classmethod
    def ball(cls, radius: float = 1.0, dim: int = 1) -> "Domain":
        return cls(RADIAL, float(radius), int(dim))

    @property
    def diameter(self) -> float:
        return self.extent if self.kind == INTERVAL else 2.0 * self.extent

    @property
    def max_distance(self) -> float:
        """Largest value of the distance function on the domain."""
        return self.extent / 2.0 if self.kind == INTERVAL else self.extent


def distance(domain: Domain, x):
    """Distance to the boundary: min(x, l - x) on an interval, R - r on a ball."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > domain.extent):
        raise ValueError("point outside the closed domain")
    if domain.kind == INTERVAL:
        d = np.minimum(x, domain.extent - x)
    else:
        d = domain.extent - x
    return float(d) if d.ndim == 0 else d


def _ball_shell_volume(a, b, h, dim):
    """Integral of r^(dim-1) over [a, b] (b - a = h) without cancellation."""
    if dim == 1:
        return h.copy()
    # (b^N - a^N)/N = (b - a) * sum_k a^k b^(N-1-k) / N
    acc = np.zeros_like(a)
    for k in range(dim):
        acc = acc + a**k * b ** (dim - 1 - k)
    return h * acc / dim


@dataclass(frozen=True, eq=False)
class Mesh:
    """Graded 1D node set.

    ``nodes`` are coordinates (x or r), ``dist`` the boundary distance at each
    node, ``lengths`` the element lengths, ``weights`` the quadrature weight of
    each element (length on an interval, shell volume r^(N-1) dr on a ball,
    with the sphere area normalized to 1) and ``mid_dist``/``mid_coord`` the
    element midpoints.
    """

    domain: Domain
    nodes: np.ndarray
    dist: np.ndarray
    lengths: np.ndarray
    weights: np.ndarray
    mid_dist: np.ndarray
    mid_coord: np.ndarray
    grading: float
    side: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.lengths)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def dirichlet(self) -> np.ndarray:
        """Boolean mask of nodes carrying the homogeneous Dirichlet condition."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[-1] = True
        if self.domain.kind == INTERVAL:
            mask[0] = True
        return mask

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "x", "d"])
            for i, (x, d) in enumerate(zip(self.nodes, self.dist)):
                writer.writerow([i, repr(float(x)), repr(float(d))])
        return path


def build_mesh(domain: Domain, n: int, grading: float = 3.0) -> Mesh:
    """Mesh with ``n`` elements, graded towards the boundary with exponent ``grading``.

    Interval: nodes (l/2)(2i/n)^g on [0, l/2], mirrored onto [l/2, l] (n must be
    even).  Ball: r_i = R - R(1 - i/n)^g, so the grading concentrates at r = R.
    """
    n = int(n)
    grading = float(grading)
    if grading < 1:
        raise ValueError("grading exponent must be >= 1")
    if domain.kind == INTERVAL:
        if n < 2 or n % 2:
            raise ValueError("interval meshes need an even element count n >= 2")
        half = n // 2
        ell = domain.extent
        dh = 0.5 * ell * (np.arange(half + 1) / half) ** grading
        dh[-1] = 0.5 * ell
        dist = np.concatenate([dh, dh[-2::-1]])
        nodes = np.concatenate([dh, ell - dh[-2::-1]])
        nodes[-1] = ell
        hl = np.diff(dh)
        lengths = np.concatenate([hl, hl[::-1]])
        midl = 0.5 * (dh[:-1] + dh[1:])
        mid_dist = np.concatenate([midl, midl[::-1]])
        mid_coord = np.concatenate([midl, ell - midl[::-1]])
        weights = lengths.copy()
        side = np.concatenate([np.zeros(half + 1, dtype=int), np.ones(half, dtype=int)])
    else:
        if n < 1:
            raise ValueError("need at least one element")
        R = domain.extent
        dist = R * (1.0 - np.arange(n + 1) / n) ** grading
        dist[0], dist[-1] = R, 0.0
        nodes = R - dist
        nodes[-1] = R
        lengths = dist[:-1] - dist[1:]
        mid_dist = 0.5 * (dist[:-1] + dist[1:])
        mid_coord = R - mid_dist
        weights = _ball_shell_volume(nodes[:-1], nodes[1:], lengths, domain.dim)
        side = np.zeros(n + 1, dtype=int)
    if np.any(lengths <= 0):
        raise ValueError("mesh has non-positive element lengths; reduce grading or n")
    return Mesh(domain, nodes, dist, lengths, weights, mid_dist, mid_coord, grading, side)


def quadrature_weight(mesh: Mesh, element: int) -> float:
    if not 0 <= element < mesh.n_elements:
        raise IndexError("element index out of range")
    return float(mesh.weights[element])
