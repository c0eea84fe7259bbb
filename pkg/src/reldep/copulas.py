"""Parametric bivariate copula families.

Every family exposes vectorized ``cdf``, ``pdf``, ``conditional_cdf``
(``dC/du`` viewed as a distribution in ``v``), its inverse
``conditional_ppf`` and a conditional-inversion ``sample``. Archimedean
families additionally expose their generator through :meth:`generator`.

Inputs may be scalars or arrays; scalar inputs give ``float`` outputs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import numerics as nm
from .errors import ConvergenceError, DomainError, RelDepError, UnsupportedFamilyError

__all__ = [
    "Copula", "Independence", "Frank", "Clayton", "GumbelHougaard", "AliMikhailHaq",
    "FGM", "Gaussian", "MICS", "GeneratorBundle", "SampleSet", "Grid2D", "MicsGrid",
    "make_copula", "generator", "mics_density", "frank_pdf", "sinkhorn",
]


def _prepare(u, v, closed=True):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    scalar = u.ndim == 0 and v.ndim == 0
    u, v = np.broadcast_arrays(u, v)
    if closed:
        bad = (u < 0) | (u > 1) | (v < 0) | (v > 1) | np.isnan(u) | np.isnan(v)
    else:
        bad = (u <= 0) | (u >= 1) | (v <= 0) | (v >= 1) | np.isnan(u) | np.isnan(v)
    if np.any(bad):
        raise DomainError("coordinates must lie in the unit square")
    return u, v, scalar


def _out(x, scalar):
    return float(x) if scalar else x


class Copula:
    """Base class; subclasses implement ``_cdf`` and ``_pdf`` on arrays."""

    family = "copula"
    archimedean = False

    @property
    def params(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params.items()))))

    def to_dict(self):
        return {"family": self.family, **self.params}

    # public, validated entry points

    def cdf(self, u, v):
        u, v, scalar = _prepare(u, v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            c = self._cdf(u, v)
        c = np.where((u == 0) | (v == 0), 0.0, c)
        c = np.where(u == 1, v, c)
        c = np.where(v == 1, u, c)
        return _out(c, scalar)

    def pdf(self, u, v):
        u, v, scalar = _prepare(u, v)
        self._check_pdf_domain(u, v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            c = self._pdf(u, v)
        return _out(c, scalar)

    def conditional_cdf(self, v, given_u):
        """``P(V <= v | U = given_u)``, i.e. ``dC/du`` at ``(given_u, v)``."""
        u, v, scalar = _prepare(given_u, v)
        if np.any((u <= 0) | (u >= 1)):
            raise DomainError("conditioning value must lie in (0, 1)")
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            h = self._conditional_cdf(v, u)
        h = np.where(v == 0, 0.0, np.where(v == 1, 1.0, h))
        return _out(np.clip(h, 0.0, 1.0), scalar)

    def conditional_ppf(self, p, given_u):
        """Inverse of :meth:`conditional_cdf` in ``v``."""
        u, p, scalar = _prepare(given_u, p)
        if np.any((u <= 0) | (u >= 1)):
            raise DomainError("conditioning value must lie in (0, 1)")
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = self._conditional_ppf(p, u)
        return _out(np.clip(v, 0.0, 1.0), scalar)

    def sample(self, n, rng):
        """Draw ``n`` points by conditional inversion.

        ``rng`` is a :class:`~reldep.numerics.RngStream`; equal streams give
        identical samples.
        """
        if n < 1:
            raise DomainError("n must be at least 1")
        gen = rng.generator()
        draws = gen.random((int(n), 2))
        # keep u away from the closed ends, where conditionals are undefined
        u = np.clip(draws[:, 0], 1e-300, 1.0 - 2.0**-53)
        v = self.conditional_ppf(draws[:, 1], u)
        return SampleSet(np.column_stack([u, v]), seed=rng.seed, source=self.family,
                         params=dict(self.params), stream_id=rng.stream_id)

    # defaults

    def _check_pdf_domain(self, u, v):
        pass

    def _conditional_cdf(self, v, u):
        h = np.minimum(nm.DEFAULT_FD_STEP, 0.5 * np.minimum(u, 1 - u))
        return (self.cdf(u + h, v) - self.cdf(u - h, v)) / (2 * h)

    def _conditional_ppf(self, p, u):
        return nm.bisect_vectorized(lambda x: self.conditional_cdf(x, u), p)


# ---------------------------------------------------------------- simple families


class Independence(Copula):
    family = "independence"
    archimedean = True

    def _cdf(self, u, v):
        return u * v

    def _pdf(self, u, v):
        return np.ones_like(u)

    def _conditional_cdf(self, v, u):
        return v

    def _conditional_ppf(self, p, u):
        return p

    def generator(self):
        return GeneratorBundle(
            psi=lambda t: np.exp(-t),
            psi_inverse=lambda s: -np.log(s),
            derivatives=tuple((lambda t, k=k: (-1) ** k * np.exp(-t)) for k in range(1, 5)),
            exponent=(lambda t: -t, lambda t: -np.ones_like(t),
                      *(lambda t: np.zeros_like(t) for _ in range(3))),
        )


class FGM(Copula):
    """Farlie-Gumbel-Morgenstern copula, ``theta`` in ``[-1, 1]``."""

    family = "fgm"

    def __init__(self, theta):
        theta = float(theta)
        if not -1.0 <= theta <= 1.0:
            raise DomainError(f"FGM requires theta in [-1, 1], got {theta}")
        self.theta = theta

    @property
    def params(self):
        return {"theta": self.theta}

    def _cdf(self, u, v):
        return u * v * (1 + self.theta * (1 - u) * (1 - v))

    def _pdf(self, u, v):
        return 1 + self.theta * (2 * u - 1) * (2 * v - 1)

    def _conditional_cdf(self, v, u):
        return v + self.theta * v * (1 - v) * (1 - 2 * u)

    def _conditional_ppf(self, p, u):
        # v + b v (1 - v) = p, written in the cancellation-free root form
        b = self.theta * (1 - 2 * u)
        return 2 * p / ((1 + b) + np.sqrt((1 + b) ** 2 - 4 * b * p))


class Gaussian(Copula):
    """Gaussian copula with correlation ``rho`` in ``(-1, 1)``."""

    family = "gaussian"

    def __init__(self, rho):
        rho = float(rho)
        if not -1.0 < rho < 1.0:
            raise DomainError(f"Gaussian copula requires rho in (-1, 1), got {rho}")
        self.rho = rho

    @property
    def params(self):
        return {"rho": self.rho}

    def _cdf(self, u, v):
        # Plackett's identity: dPhi2/drho is the bivariate normal density
        x = np.clip(nm.norm_ppf(u), -40, 40)[..., None]
        y = np.clip(nm.norm_ppf(v), -40, 40)[..., None]
        rule = nm.composite_gauss_legendre(32, 4, 0.0, self.rho)
        r = rule.nodes
        q = 1 - r * r
        dens = np.exp(-(x * x - 2 * r * x * y + y * y) / (2 * q)) / np.sqrt(q)
        return u * v + (dens @ rule.weights) / (2 * math.pi)

    def _check_pdf_domain(self, u, v):
        if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
            raise DomainError("Gaussian copula density needs an interior point")

    def _pdf(self, u, v):
        x, y, r = nm.norm_ppf(u), nm.norm_ppf(v), self.rho
        q = 1 - r * r
        return np.exp(-(r * r * (x * x + y * y) - 2 * r * x * y) / (2 * q)) / math.sqrt(q)

    def _conditional_cdf(self, v, u):
        s = math.sqrt(1 - self.rho**2)
        return nm.norm_cdf((nm.norm_ppf(v) - self.rho * nm.norm_ppf(u)) / s)

    def _conditional_ppf(self, p, u):
        s = math.sqrt(1 - self.rho**2)
        return nm.norm_cdf(self.rho * nm.norm_ppf(u) + s * nm.norm_ppf(p))


# ---------------------------------------------------------------- Archimedean


@dataclass(frozen=True)
class GeneratorBundle:
    """Generator ``psi`` of an Archimedean copula with derivatives.

    ``derivatives[k-1]`` is the k-th derivative of ``psi`` (k = 1..4).
    ``exponent`` holds ``A, A', A'', A''', A''''`` where ``psi = exp(A)``.
    """

    psi: object
    psi_inverse: object
    derivatives: tuple
    exponent: tuple = ()

    def d(self, k, t):
        return self.derivatives[k - 1](t)

    def A(self, k, t):
        return self.exponent[k](t)


def _exponent_from_psi(psi, d1, d2, d3, d4):
    """Derivatives of ``A = log(psi)`` from those of ``psi``."""

    def a1(t):
        return d1(t) / psi(t)

    def a2(t):
        return d2(t) / psi(t) - a1(t) ** 2

    def a3(t):
        p1, p2 = a1(t), a2(t)
        return d3(t) / psi(t) - 3 * p1 * p2 - p1**3

    def a4(t):
        p1, p2, p3 = a1(t), a2(t), a3(t)
        return d4(t) / psi(t) - 4 * p1 * p3 - 3 * p2**2 - 6 * p1**2 * p2 - p1**4

    return (lambda t: np.log(psi(t)), a1, a2, a3, a4)


def _psi_from_exponent(A):
    """Derivatives of ``psi = exp(A)`` via the complete Bell polynomials."""
    a0, a1, a2, a3, a4 = A

    def d(k):
        def f(t):
            e = np.exp(a0(t))
            p1, p2, p3, p4 = a1(t), a2(t), a3(t), a4(t)
            if k == 1:
                return p1 * e
            if k == 2:
                return (p2 + p1**2) * e
            if k == 3:
                return (p3 + 3 * p1 * p2 + p1**3) * e
            return (p4 + 4 * p1 * p3 + 3 * p2**2 + 6 * p1**2 * p2 + p1**4) * e
        return f

    return tuple(d(k) for k in range(1, 5))


class Archimedean(Copula):
    archimedean = True

    def __init__(self, theta):
        self.theta = float(theta)
        self._validate()

    def _validate(self):
        pass

    @property
    def params(self):
        return {"theta": self.theta}

    @cached_property
    def _gen(self):
        return self.generator()

    def _cdf(self, u, v):
        g = self._gen
        return g.psi(g.psi_inverse(u) + g.psi_inverse(v))

    def _pdf(self, u, v):
        g = self._gen
        tu, tv = g.psi_inverse(u), g.psi_inverse(v)
        return g.d(2, tu + tv) / (g.d(1, tu) * g.d(1, tv))

    def _conditional_cdf(self, v, u):
        g = self._gen
        tu = g.psi_inverse(u)
        return g.d(1, tu + g.psi_inverse(v)) / g.d(1, tu)


def frank_pdf(theta, u, v):
    """Frank density on arrays, with the independence limit at ``theta = 0``.

    Used directly by the local likelihood search, where ``theta = 0`` is a
    legitimate candidate.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if theta == 0:
        return np.ones(np.broadcast(u, v).shape)
    a = -math.expm1(-theta)
    den = a - (-np.expm1(-theta * u)) * (-np.expm1(-theta * v))
    return theta * a * np.exp(-theta * (u + v)) / (den * den)


class Frank(Archimedean):
    """Frank copula, ``theta != 0``."""

    family = "frank"

    def _validate(self):
        if self.theta == 0 or not math.isfinite(self.theta):
            raise DomainError("Frank copula requires a finite theta != 0")

    def generator(self):
        th = self.theta
        a = -math.expm1(-th)

        def w(t):
            return a * np.exp(-t)

        # psi = -log(1 - w)/theta; the k-th derivative is (-1)^k Li_{1-k}(w)/theta
        polylog = (
            lambda x: x / (1 - x),
            lambda x: x / (1 - x) ** 2,
            lambda x: x * (1 + x) / (1 - x) ** 3,
            lambda x: x * (1 + 4 * x + x * x) / (1 - x) ** 4,
        )
        derivs = tuple((lambda t, k=k: (-1) ** k * polylog[k - 1](w(t)) / th) for k in range(1, 5))
        psi = lambda t: -np.log1p(-w(t)) / th  # noqa: E731
        return GeneratorBundle(
            psi=psi,
            psi_inverse=lambda s: -np.log(np.expm1(-th * s) / math.expm1(-th)),
            derivatives=derivs,
            exponent=_exponent_from_psi(psi, *derivs),
        )

    def _cdf(self, u, v):
        th = self.theta
        return -np.log1p(np.expm1(-th * u) * np.expm1(-th * v) / math.expm1(-th)) / th

    def _pdf(self, u, v):
        return frank_pdf(self.theta, u, v)

    def _conditional_cdf(self, v, u):
        th = self.theta
        eu, ev = np.exp(-th * u), np.expm1(-th * v)
        return eu * ev / (math.expm1(-th) + np.expm1(-th * u) * ev)

    def _conditional_ppf(self, p, u):
        th = self.theta
        x = p * math.expm1(-th) / (np.exp(-th * u) - p * np.expm1(-th * u))
        return -np.log1p(x) / th


class Clayton(Archimedean):
    """Clayton copula, ``theta > 0``."""

    family = "clayton"

    def _validate(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise DomainError("Clayton copula requires theta > 0")

    def generator(self):
        th = self.theta

        def deriv(k):
            coef = math.prod(-1 / th - j for j in range(k))
            return lambda t: coef * (1 + t) ** (-1 / th - k)

        def a_deriv(k):
            if k == 0:
                return lambda t: -np.log1p(t) / th
            coef = -((-1) ** (k - 1)) * math.factorial(k - 1) / th
            return lambda t: coef * (1 + t) ** (-k)

        return GeneratorBundle(
            psi=lambda t: (1 + t) ** (-1 / th),
            psi_inverse=lambda s: s ** (-th) - 1,
            derivatives=tuple(deriv(k) for k in range(1, 5)),
            exponent=tuple(a_deriv(k) for k in range(5)),
        )

    def _check_pdf_domain(self, u, v):
        if np.any((u == 0) | (v == 0)):
            raise DomainError("Clayton density is singular on the lower edges")

    def _cdf(self, u, v):
        th = self.theta
        return np.maximum(u ** (-th) + v ** (-th) - 1, 0) ** (-1 / th)

    def _pdf(self, u, v):
        th = self.theta
        s = u ** (-th) + v ** (-th) - 1
        return (1 + th) * (u * v) ** (-1 - th) * s ** (-1 / th - 2)

    def _conditional_cdf(self, v, u):
        th = self.theta
        return u ** (-th - 1) * (u ** (-th) + v ** (-th) - 1) ** (-1 / th - 1)

    def _conditional_ppf(self, p, u):
        th = self.theta
        return ((p * u ** (th + 1)) ** (-th / (1 + th)) - u ** (-th) + 1) ** (-1 / th)


class GumbelHougaard(Archimedean):
    """Gumbel-Hougaard copula, ``theta >= 1``."""

    family = "gumbel"

    def _validate(self):
        if not (self.theta >= 1 and math.isfinite(self.theta)):
            raise DomainError("Gumbel-Hougaard copula requires theta >= 1")

    def generator(self):
        th = self.theta
        e = 1 / th

        def a_deriv(k):
            coef = -math.prod(e - j for j in range(k))
            return lambda t: coef * t ** (e - k)

        A = tuple(a_deriv(k) for k in range(5))
        return GeneratorBundle(
            psi=lambda t: np.exp(-t**e),
            psi_inverse=lambda s: (-np.log(s)) ** th,
            derivatives=_psi_from_exponent(A),
            exponent=A,
        )

    def _check_pdf_domain(self, u, v):
        if np.any((u == 0) | (v == 0)):
            raise DomainError("Gumbel-Hougaard density is singular on the lower edges")

    def _cdf(self, u, v):
        th = self.theta
        s = (-np.log(u)) ** th + (-np.log(v)) ** th
        return np.exp(-s ** (1 / th))

    def _pdf(self, u, v):
        th = self.theta
        x, y = -np.log(u), -np.log(v)
        s = x**th + y**th
        a = s ** (1 / th)
        return np.exp(-a) / (u * v) * (x * y) ** (th - 1) * s ** (1 / th - 2) * (a + th - 1)


class AliMikhailHaq(Archimedean):
    """Ali-Mikhail-Haq copula with ``psi(t) = (1 - theta)/(e^t - theta)``, ``theta`` in ``[0, 1)``."""

    family = "amh"

    def _validate(self):
        if not 0 <= self.theta < 1:
            raise DomainError("Ali-Mikhail-Haq copula requires theta in [0, 1)")

    def generator(self):
        th = self.theta

        def q(t):
            return th / (np.exp(t) - th)

        A = (
            lambda t: math.log1p(-th) - np.log(np.exp(t) - th),
            lambda t: -1 - q(t),
            lambda t: q(t) * (1 + q(t)),
            lambda t: -q(t) * (1 + q(t)) * (1 + 2 * q(t)),
            lambda t: q(t) * (1 + q(t)) * (1 + 6 * q(t) + 6 * q(t) ** 2),
        )
        return GeneratorBundle(
            psi=lambda t: (1 - th) / (np.exp(t) - th),
            psi_inverse=lambda s: np.log((1 - th) / s + th),
            derivatives=_psi_from_exponent(A),
            exponent=A,
        )

    def _cdf(self, u, v):
        return u * v / (1 - self.theta * (1 - u) * (1 - v))

    def _pdf(self, u, v):
        th = self.theta
        d = 1 - th * (1 - u) * (1 - v)
        return (1 + th * ((1 + u) * (1 + v) - 3) + th**2 * (1 - u) * (1 - v)) / d**3


def generator(model):
    """Generator bundle of an Archimedean model."""
    if not getattr(model, "archimedean", False):
        raise UnsupportedFamilyError(f"{model!r} is not an Archimedean copula")
    return model.generator()


# ---------------------------------------------------------------- MICS


def sinkhorn(kernel, row_weights, col_weights, tol=1e-10, max_iter=10000):
    """Scale ``kernel`` so that ``a_i b_j K_ij`` has unit weighted margins.

    Solves ``sum_j w_j a_i b_j K_ij = 1`` and ``sum_i w_i a_i b_j K_ij = 1``
    by alternating proportional fitting. Returns ``(a, b, iterations,
    residual)``; raises :class:`ConvergenceError` when ``max_iter`` is hit.
    """
    K = np.asarray(kernel, dtype=float)
    wr = np.asarray(row_weights, dtype=float)
    wc = np.asarray(col_weights, dtype=float)
    a = np.ones(K.shape[0])
    b = np.ones(K.shape[1])
    residual = np.inf
    for it in range(1, max_iter + 1):
        a = 1.0 / (K @ (wc * b))
        b = 1.0 / (K.T @ (wr * a))
        # columns are exact after the b-step; rows carry the residual
        residual = np.max(np.abs(a * (K @ (wc * b)) - 1.0))
        if residual < tol:
            return a, b, it, residual
    raise ConvergenceError(f"proportional fitting stalled at residual {residual:.3e}", residual)


@dataclass(frozen=True)
class Grid2D:
    """Values on a rectangular lattice; ``values[i, j]`` sits at ``(u[i], v[j])``."""

    u: np.ndarray
    v: np.ndarray
    values: np.ndarray

    def to_csv(self, path, name="value"):
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        rows = zip(uu.ravel(), vv.ravel(), self.values.ravel())
        write_csv(path, ["u", "v", name], rows)


@dataclass(frozen=True)
class MicsGrid:
    """Discretized minimum-information density on cell midpoints."""

    density: Grid2D
    a: np.ndarray
    b: np.ndarray
    iterations: int
    residual: float

    @property
    def masses(self):
        n = len(self.a)
        return self.density.values / (n * n)


def mics_density(theta, resolution, tol=1e-10, max_iter=10000):
    """Midpoint discretization of ``a(u) b(v) exp(theta u v)`` with uniform margins.

    Cell masses ``a_i b_j exp(theta u_i v_j) / n^2`` have every row and
    column summing to ``1/n``; adjacent 2x2 log-odds equal ``theta / n^2``.
    """
    n = int(resolution)
    if n < 2:
        raise DomainError("resolution must be at least 2")
    mid = (np.arange(n) + 0.5) / n
    K = np.exp(theta * np.outer(mid, mid))
    w = np.full(n, 1.0 / n)
    a, b, it, res = sinkhorn(K, w, w, tol=tol, max_iter=max_iter)
    dens = a[:, None] * b[None, :] * K
    return MicsGrid(Grid2D(mid, mid, dens), a, b, it, float(res))


class MICS(Copula):
    """Minimum information copula ``a(u) b(v) exp(theta u v)``.

    The normalizers are solved on ``resolution`` Gauss-Legendre nodes and
    extended to the whole interval through their fixed-point equations
    (Nystrom interpolation), e.g. ``a(u) = 1 / sum_j w_j b_j exp(theta u v_j)``.
    """

    family = "mics"

    def __init__(self, theta, resolution=64):
        theta = float(theta)
        if not math.isfinite(theta):
            raise DomainError("MICS requires finite theta")
        if int(resolution) < 2:
            raise DomainError("MICS resolution must be at least 2")
        self.theta = theta
        self.resolution = int(resolution)
        rule = nm.gauss_legendre(self.resolution)
        self._x, self._w = rule.nodes, rule.weights
        K = np.exp(theta * np.outer(self._x, self._x))
        self._a, self._b, _, _ = sinkhorn(K, self._w, self._w, tol=1e-14, max_iter=100000)

    @property
    def params(self):
        return {"theta": self.theta, "resolution": self.resolution}

    def a(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (np.exp(self.theta * u[..., None] * self._x) @ (self._w * self._b))

    def b(self, v):
        v = np.asarray(v, dtype=float)
        return 1.0 / (np.exp(self.theta * v[..., None] * self._x) @ (self._w * self._a))

    def _pdf(self, u, v):
        return self.a(u) * self.b(v) * np.exp(self.theta * u * v)

    def _partial_v_integral(self, u, v):
        # int_0^v b(t) exp(theta u t) dt, elementwise
        t = v[..., None] * self._x
        return (self.b(t) * np.exp(self.theta * u[..., None] * t)) @ self._w * v

    def _cdf(self, u, v):
        s = u[..., None] * self._x
        inner = self._partial_v_integral(s, np.broadcast_to(v[..., None], s.shape))
        return (self.a(s) * inner) @ self._w * u

    def _conditional_cdf(self, v, u):
        return self.a(u) * self._partial_v_integral(u, v)


# ---------------------------------------------------------------- factory

_FAMILIES = {
    "independence": Independence,
    "frank": Frank,
    "clayton": Clayton,
    "gumbel": GumbelHougaard,
    "gumbel-hougaard": GumbelHougaard,
    "gumbelhougaard": GumbelHougaard,
    "amh": AliMikhailHaq,
    "ali-mikhail-haq": AliMikhailHaq,
    "alimikhailhaq": AliMikhailHaq,
    "fgm": FGM,
    "gaussian": Gaussian,
    "mics": MICS,
}


def make_copula(family, theta=None, rho=None, resolution=None):
    """Build a model from a family name and its parameter."""
    key = family.lower().replace("_", "-")
    try:
        cls = _FAMILIES[key]
    except KeyError:
        raise UnsupportedFamilyError(f"unknown copula family {family!r}") from None
    if cls is Independence:
        return cls()
    if cls is Gaussian:
        param = rho if rho is not None else theta
        if param is None:
            raise DomainError("Gaussian copula needs rho")
        return cls(param)
    if theta is None:
        raise DomainError(f"{family} copula needs theta")
    if cls is MICS and resolution is not None:
        return cls(theta, resolution)
    return cls(theta)


def model_from_dict(d):
    d = dict(d)
    return make_copula(d.pop("family"), **d)


# ---------------------------------------------------------------- samples and I/O


def fmt(x):
    """17 significant digits, the round-trip precision of a double."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else fmt(x) for x in row])


class SampleParseError(RelDepError, ValueError):
    """Malformed sample file; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class SampleSet:
    """An ordered set of bivariate observations with provenance."""

    points: np.ndarray
    seed: int | None = None
    source: str = "unknown"
    params: dict = field(default_factory=dict)
    stream_id: object = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.points)

    @property
    def u(self):
        return self.points[:, 0]

    @property
    def v(self):
        return self.points[:, 1]

    def margin_check(self):
        """Kolmogorov-Smirnov distance of each margin to U(0,1).

        ``uniform`` is False when either statistic exceeds the 1% critical
        value ``1.63 / sqrt(n)``; this is a flag, not an error.
        """
        n = len(self)
        grid = np.arange(1, n + 1) / n
        stats = []
        for col in (self.u, self.v):
            x = np.sort(col)
            stats.append(float(max(np.max(grid - x), np.max(x - (grid - 1.0 / n)))))
        crit = 1.63 / math.sqrt(n)
        return {"ks_u": stats[0], "ks_v": stats[1], "critical": crit,
                "uniform": bool(max(stats) < crit)}

    def metadata(self):
        sid = self.stream_id
        return {"seed": self.seed, "family": self.source, "parameter": self.params,
                "n": len(self), "stream_id": list(sid) if isinstance(sid, tuple) else sid}

    def to_csv(self, path, sidecar=True):
        path = Path(path)
        write_csv(path, ["u", "v"], self.points)
        if sidecar:
            path.with_suffix(path.suffix + ".json").write_text(
                json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise SampleParseError("empty sample file", 1)
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["u", "v"] and header[:2] != ["x", "y"]:
            raise SampleParseError(f"expected header 'u,v', got {','.join(rows[0])!r}", 1)
        pts = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise SampleParseError("expected two columns", lineno)
            try:
                pts.append((float(row[0]), float(row[1])))
            except ValueError:
                raise SampleParseError(f"non-numeric value in {row!r}", lineno) from None
        if not pts:
            raise SampleParseError("sample file has no observations", 2)
        meta = {}
        side = path.with_suffix(path.suffix + ".json")
        if side.exists():
            meta = json.loads(side.read_text())
        sid = meta.get("stream_id", 0)
        return cls(np.array(pts), seed=meta.get("seed"), source=meta.get("family", path.stem),
                   params=meta.get("parameter", {}) or {},
                   stream_id=tuple(sid) if isinstance(sid, list) else sid)
