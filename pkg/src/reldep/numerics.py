"""Quadrature, finite differences, root finding and seeded random streams.

Everything here is pure: rules and streams are immutable values.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError

#: nodes per axis (per panel) used for 1D/2D integrals unless overridden
DEFAULT_ORDER = 32
DEFAULT_PANELS = 4
#: nodes per axis for the 4D sign integrals
DEFAULT_ORDER_4D = 16
DEFAULT_FD_STEP = 1e-4


def default_order():
    """Quadrature order, overridable through ``CLD_QUAD_ORDER``."""
    value = os.environ.get("CLD_QUAD_ORDER")
    if value:
        order = int(value)
        if order < 1:
            raise DomainError(f"CLD_QUAD_ORDER must be positive, got {value!r}")
        return order
    return DEFAULT_ORDER


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a rule on an interval (``[0, 1]`` unless scaled)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1D arrays of equal length")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.nodes)

    def scaled(self, a, b):
        """The same rule mapped affinely from ``[0, 1]`` to ``[a, b]``."""
        return QuadratureRule(a + (b - a) * self.nodes, (b - a) * self.weights, self.order)

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=64)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre(order):
    """Gauss-Legendre rule with ``order`` nodes on ``[0, 1]``.

    Exact for polynomials of degree ``2 * order - 1``.
    """
    if int(order) != order or order < 1:
        raise DomainError(f"order must be a positive integer, got {order!r}")
    x, w = _leggauss(int(order))
    return QuadratureRule(x.copy(), w.copy(), int(order))


def composite_gauss_legendre(order=None, panels=DEFAULT_PANELS, a=0.0, b=1.0, grade=None):
    """Composite Gauss-Legendre rule on ``[a, b]``.

    Parameters
    ----------
    order : int, optional
        Nodes per panel; defaults to :func:`default_order`.
    panels : int
        Number of panels.
    grade : {None, "left", "right", "both"}
        Geometric grading of the panel breakpoints toward the named end(s);
        each refinement halves the distance to the endpoint, so ``panels``
        counts halvings. Use it for integrands with corner singularities.
    """
    order = default_order() if order is None else order
    base = gauss_legendre(order)
    if grade is None:
        edges = np.linspace(a, b, panels + 1)
    else:
        ratios = 0.5 ** np.arange(panels, 0, -1)
        if grade == "left":
            edges = np.concatenate([[0.0], ratios, [1.0]])
        elif grade == "right":
            edges = np.concatenate([[0.0], 1.0 - ratios[::-1], [1.0]])
        elif grade == "both":
            half = 0.5 * ratios
            edges = np.concatenate([[0.0], half, 1.0 - half[::-1], [1.0]])
        else:
            raise ValueError(f"unknown grading {grade!r}")
        edges = a + (b - a) * np.unique(edges)
    nodes = np.concatenate([lo + (hi - lo) * base.nodes for lo, hi in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(hi - lo) * base.weights for lo, hi in zip(edges[:-1], edges[1:])])
    return QuadratureRule(nodes, weights, order)


def integrate_2d(f, rule_u, rule_v):
    """Tensor-product integral of a vectorized ``f(u, v)``."""
    uu, vv = np.meshgrid(rule_u.nodes, rule_v.nodes, indexing="ij")
    return float(rule_u.weights @ f(uu, vv) @ rule_v.weights)


def mixed_partial_log(f, u, v, h=DEFAULT_FD_STEP):
    """Central-difference estimate of d^2 log f / du dv at ``(u, v)``.

    The four-point stencil ``{u +- h} x {v +- h}`` must lie inside the open
    unit square and ``f`` must be positive on it. ``u`` and ``v`` may be
    arrays; ``h`` may be an array broadcastable against them.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise DomainError("step must be positive")
    if np.any(u - h <= 0) or np.any(u + h >= 1) or np.any(v - h <= 0) or np.any(v + h >= 1):
        raise DomainError("finite-difference stencil leaves the open unit square")
    vals = [f(u + su * h, v + sv * h) for su, sv in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
    vals = [np.asarray(x, dtype=float) for x in vals]
    if any(np.any(~(x > 0)) for x in vals):
        raise DomainError("function is not positive on the stencil")
    pp, pm, mp, mm = (np.log(x) for x in vals)
    out = (pp - pm - mp + mm) / (4.0 * h * h)
    return float(out) if out.ndim == 0 else out


def interior_step(u, v, h=DEFAULT_FD_STEP):
    """Shrink ``h`` so that the stencil around ``(u, v)`` stays inside (0,1)^2."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    margin = np.minimum(np.minimum(u, 1 - u), np.minimum(v, 1 - v))
    return np.minimum(h, 0.5 * margin)


def solve_quadratic(a, b, c):
    """Sorted real roots of ``a x^2 + b x + c = 0`` (linear when ``a == 0``).

    Uses the cancellation-free form of the quadratic formula.
    """
    if a == 0:
        if b == 0:
            raise DomainError("degenerate equation: a = b = 0")
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    if disc == 0:
        return [-b / (2.0 * a)]
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [q / a, c / q] if q != 0 else [0.0, -b / a]
    return sorted(roots)


def invert_monotone(F, target, tol=1e-12, lo=0.0, hi=1.0, max_iter=200):
    """Solve ``F(x) = target`` for nondecreasing ``F`` on ``[lo, hi]`` by bisection."""
    f_lo, f_hi = F(lo), F(hi)
    if not (f_lo - tol <= target <= f_hi + tol):
        raise DomainError(f"target {target} outside [{f_lo}, {f_hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = F(mid)
        if abs(f_mid - target) <= tol:
            return mid
        if f_mid < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def bisect_vectorized(F, target, lo=0.0, hi=1.0, iterations=60):
    """Elementwise bisection for a vectorized nondecreasing ``F``.

    ``F`` is called with an array of trial points matching ``target``.
    Sixty halvings of the unit interval reach double precision.
    """
    target = np.asarray(target, dtype=float)
    lo = np.full_like(target, lo)
    hi = np.full_like(target, hi)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = F(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def norm_ppf(p):
    return special.ndtri(p)


def norm_cdf(x):
    return special.ndtr(x)


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Distinct stream ids spawn independent children of the same seed. A
    stream id may be an int or a tuple of ints (nested children).
    """

    seed: int
    stream_id: int | tuple = 0

    def _key(self):
        sid = self.stream_id
        return tuple(sid) if isinstance(sid, tuple) else (int(sid),)

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self._key())
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index):
        return RngStream(self.seed, self._key() + (int(index),))
