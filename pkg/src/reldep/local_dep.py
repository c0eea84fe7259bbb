"""Local dependence ``i = d^2 log c / du dv`` and relative local dependence ``r = i / c``.

Four routes are available and cross-check each other:

``closed``
    Family closed forms (independence, Frank, Clayton, FGM, Gaussian, MICS).
``generator``
    ``r = (log psi'')'' / psi''`` at ``t = psi^-1(u) + psi^-1(v)``.
``exponent``
    The same quantity written through the derivatives of ``A = log psi``.
``numeric``
    Central finite differences of ``log c``.

``method="auto"`` picks the closed form when there is one and the generator
route otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import copulas as cop
from . import numerics as nm
from .errors import DomainError, UndefinedValueError, UnsupportedFamilyError


def _interior(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
        raise DomainError("local dependence needs an interior point of the unit square")
    return u, v, u.ndim == 0 and v.ndim == 0


def _clayton_constant(theta):
    return theta * (1 + 2 * theta) / (1 + theta)


def _closed_i(model, u, v):
    if isinstance(model, cop.Independence):
        return np.zeros(np.broadcast(u, v).shape)
    if isinstance(model, cop.Frank):
        return 2 * model.theta * model.pdf(u, v)
    if isinstance(model, cop.Clayton):
        return _clayton_constant(model.theta) * model.pdf(u, v) / model.cdf(u, v)
    if isinstance(model, cop.FGM):
        return 4 * model.theta * model.pdf(u, v) ** -2.0
    if isinstance(model, cop.Gaussian):
        r = model.rho
        return r / (1 - r * r) / (nm.norm_pdf(nm.norm_ppf(u)) * nm.norm_pdf(nm.norm_ppf(v)))
    if isinstance(model, cop.MICS):
        return np.full(np.broadcast(u, v).shape, model.theta)
    return None


def _closed_r(model, u, v):
    shape = np.broadcast(u, v).shape
    if isinstance(model, cop.Independence):
        return np.zeros(shape)
    if isinstance(model, cop.Frank):
        return np.full(shape, 2 * model.theta)
    if isinstance(model, cop.Clayton):
        return _clayton_constant(model.theta) / model.cdf(u, v)
    if isinstance(model, cop.FGM):
        return 4 * model.theta * model.pdf(u, v) ** -3.0
    if isinstance(model, cop.MICS):
        return model.theta / model.pdf(u, v)
    if isinstance(model, cop.Gaussian):
        return _closed_i(model, u, v) / model.pdf(u, v)
    return None


def has_closed_form(model):
    return isinstance(model, (cop.Independence, cop.Frank, cop.Clayton, cop.FGM,
                              cop.Gaussian, cop.MICS))


def numeric_local_dependence(model, u, v, h=nm.DEFAULT_FD_STEP):
    """Finite-difference ``d^2 log c / du dv``; ``h`` shrinks near the edges."""
    u, v, _ = _interior(u, v)
    return nm.mixed_partial_log(model.pdf, u, v, nm.interior_step(u, v, h))


def archimedean_r_from_generator(bundle, u, v):
    """Relative local dependence of an Archimedean copula from its generator."""
    u, v, scalar = _interior(u, v)
    t = bundle.psi_inverse(u) + bundle.psi_inverse(v)
    d2, d3, d4 = bundle.d(2, t), bundle.d(3, t), bundle.d(4, t)
    if np.any(d2 == 0):
        raise UndefinedValueError("psi'' vanishes at the evaluation point")
    r = (d4 / d2 - (d3 / d2) ** 2) / d2
    return float(r) if scalar else r


def appendix_a_r(bundle, u, v):
    """Relative local dependence through the exponent ``A = log psi``.

    The rational expression in ``A', ..., A''''`` divided by
    ``(A'' + A'^2)^3`` and by ``C(u, v) = psi(t)``.
    """
    if len(bundle.exponent) < 5:
        raise UnsupportedFamilyError("generator bundle carries no exponent derivatives")
    u, v, scalar = _interior(u, v)
    t = bundle.psi_inverse(u) + bundle.psi_inverse(v)
    a1, a2, a3, a4 = (bundle.A(k, t) for k in range(1, 5))
    den = (a2 + a1**2) ** 3
    if np.any(den == 0):
        raise UndefinedValueError("A'' + A'^2 vanishes at the evaluation point")
    num = (a4 * a2 + a4 * a1**2 + a1**4 * a2 + 3 * a2**3
           + 2 * a1**3 * a3 - 2 * a1 * a2 * a3 - a3**2)
    r = num / den / bundle.psi(t)
    return float(r) if scalar else r


def local_dependence(model, u, v, method="auto"):
    """``i(u, v) = d^2 log c / du dv`` at interior points."""
    u, v, scalar = _interior(u, v)
    if method == "numeric":
        out = numeric_local_dependence(model, u, v)
    elif method in ("auto", "closed") and has_closed_form(model):
        out = _closed_i(model, u, v)
    elif method == "closed":
        raise UnsupportedFamilyError(f"no closed form for {model!r}")
    else:
        out = relative_local_dependence(model, u, v, method=method) * model.pdf(u, v)
    return float(out) if scalar else np.asarray(out)


def relative_local_dependence(model, u, v, method="auto"):
    """``r(u, v) = i(u, v) / c(u, v)`` at interior points."""
    u, v, scalar = _interior(u, v)
    if method == "numeric":
        dens = model.pdf(u, v)
        if np.any(dens <= 0):
            raise UndefinedValueError("relative local dependence undefined where c = 0")
        out = numeric_local_dependence(model, u, v) / dens
    elif method in ("auto", "closed") and has_closed_form(model):
        out = _closed_r(model, u, v)
    elif method == "closed":
        raise UnsupportedFamilyError(f"no closed form for {model!r}")
    elif method in ("auto", "generator"):
        out = archimedean_r_from_generator(cop.generator(model), u, v)
    elif method in ("exponent", "appendix"):
        out = appendix_a_r(cop.generator(model), u, v)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if scalar else np.asarray(out)


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class DiagonalProfile:
    coordinates: np.ndarray
    values: np.ndarray
    model: cop.Copula
    kind: str

    def to_csv(self, path):
        cop.write_csv(path, ["u", "value"], zip(self.coordinates, self.values))


def diagonal_profile(model, kind="relative", grid=None, method="auto"):
    """``r(u, u)`` (``kind="relative"``) or ``i(u, u)`` (``kind="local"``)."""
    grid = np.linspace(0.01, 0.99, 99) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise DomainError("profile coordinates must be strictly increasing")
    if kind == "relative":
        vals = relative_local_dependence(model, grid, grid, method=method)
    elif kind == "local":
        vals = local_dependence(model, grid, grid, method=method)
    else:
        raise ValueError(f"kind must be 'relative' or 'local', got {kind!r}")
    return DiagonalProfile(grid, np.asarray(vals), model, kind)


# ---------------------------------------------------------------- lower tail

DEFAULT_TAIL_SEQUENCE = 2.0 ** -np.arange(3, 15)


@dataclass(frozen=True)
class TailRate:
    slope: float
    constant: float
    coordinates: np.ndarray
    values: np.ndarray
    truncated: bool


def _finite_prefix(us, vals):
    ok = np.isfinite(vals)
    if ok.all():
        return us, vals, False
    stop = int(np.argmin(ok))
    return us[:stop], vals[:stop], True


def tail_rate(model, sequence=None, fit_points=6):
    """Log-log slope of ``r(u, u)`` as ``u -> 0`` and the constant ``u r(u, u)``.

    The slope is a least-squares fit over the last ``fit_points`` finite
    values; values that overflow end the sequence and set ``truncated``.
    """
    us = DEFAULT_TAIL_SEQUENCE if sequence is None else np.asarray(sequence, dtype=float)
    if np.any(np.diff(us) >= 0):
        raise DomainError("tail sequence must decrease toward 0")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        vals = np.asarray(relative_local_dependence(model, us, us), dtype=float)
    us, vals, truncated = _finite_prefix(us, vals)
    if len(us) < 2:
        raise UndefinedValueError("fewer than two finite tail values")
    k = min(fit_points, len(us))
    x, y = np.log(us[-k:]), vals[-k:]
    if np.all(y > 0):
        slope = float(np.polyfit(x, np.log(y), 1)[0])
    elif np.all(y == y[0]):
        slope = 0.0
    else:
        slope = math.nan
    return TailRate(slope, float(us[-1] * vals[-1]), us, vals, truncated)


@dataclass(frozen=True)
class TailDependence:
    value: float
    last: float
    coordinates: np.ndarray
    ratios: np.ndarray
    truncated: bool


def lower_tail_dependence(model, sequence=None, fit_points=6):
    """Extrapolated ``lim C(u, u) / u``.

    A straight line in ``u`` is fitted to the last ``fit_points`` ratios and
    its intercept reported; ``last`` is the raw ratio at the smallest ``u``.
    """
    us = DEFAULT_TAIL_SEQUENCE if sequence is None else np.asarray(sequence, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratios = np.asarray(model.cdf(us, us), dtype=float) / us
    us, ratios, truncated = _finite_prefix(us, ratios)
    k = min(fit_points, len(us))
    intercept = float(np.polyfit(us[-k:], ratios[-k:], 1)[1]) if k >= 2 else float(ratios[-1])
    return TailDependence(max(intercept, 0.0), float(ratios[-1]), us, ratios, truncated)


# ---------------------------------------------------------------- invariance


@dataclass(frozen=True)
class InvarianceReport:
    max_discrepancy: float
    r_joint: np.ndarray
    r_copula: np.ndarray
    i_joint: np.ndarray
    i_copula: np.ndarray
    marginal_product: np.ndarray

    @property
    def i_relation_discrepancy(self):
        """Relative error of ``i^f = i^c g1 g2`` (the non-invariant relation)."""
        target = self.i_copula * self.marginal_product
        return float(np.max(np.abs(self.i_joint - target) / np.maximum(np.abs(target), 1e-300)))


def _mixed_partial_log_free(f, x, y, h):
    pp, pm, mp, mm = (np.log(f(x + a * h, y + b * h))
                      for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1)))
    return (pp - pm - mp + mm) / (4 * h * h)


def invariance_check(model, margin_x, margin_y, grid=None, h=1e-4):
    """Push ``model`` through margins and compare ``r`` of the joint density.

    ``margin_x`` and ``margin_y`` are continuous distributions with ``cdf``,
    ``pdf`` and ``ppf`` (e.g. frozen ``scipy.stats`` distributions). The joint
    density ``f(x, y) = g1(x) g2(y) c(G1(x), G2(y))`` is differentiated
    numerically at ``(G1^-1(u), G2^-1(v))`` and its ``r`` compared with the
    copula's; the maximum relative discrepancy over the grid is returned in
    the report.
    """
    grid = np.linspace(0.1, 0.9, 9) if grid is None else np.asarray(grid, dtype=float)
    uu, vv = np.meshgrid(grid, grid, indexing="ij")

    def joint(x, y):
        return margin_x.pdf(x) * margin_y.pdf(y) * model.pdf(margin_x.cdf(x), margin_y.cdf(y))

    x, y = margin_x.ppf(uu), margin_y.ppf(vv)
    i_f = _mixed_partial_log_free(joint, x, y, h)
    r_f = i_f / joint(x, y)
    r_c = np.asarray(relative_local_dependence(model, uu, vv))
    i_c = np.asarray(local_dependence(model, uu, vv))
    scale = np.maximum(np.abs(r_c), 1.0)
    disc = float(np.max(np.abs(r_f - r_c) / scale))
    return InvarianceReport(disc, r_f, r_c, i_f, i_c, margin_x.pdf(x) * margin_y.pdf(y))
