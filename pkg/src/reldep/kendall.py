"""Global and local Kendall's tau of a copula.

``tau_LL`` is the lower-left corner version normalized by ``C(p, q)^2``.
The rectangle versions are built on the sign integral

    S(R) = int_R int_R sgn(u - u~) sgn(v - v~) c(u, v) c(u~, v~)

normalized by the squared (naive) or cubed (modified) rectangle mass. The
sign function is never integrated across its jump: the 4D domain is split
at ``u = u~`` and ``v = v~`` and each piece is mapped to a smooth cube.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import DomainError, UndefinedValueError

#: geometric refinements toward each end of an integration axis
GRADING_LEVELS = 10


@dataclass(frozen=True)
class RectRegion:
    p1: float
    p2: float
    q1: float
    q2: float

    def __post_init__(self):
        if not (0 <= self.p1 < self.p2 <= 1 and 0 <= self.q1 < self.q2 <= 1):
            raise DomainError(f"invalid rectangle {self}")

    @classmethod
    def square(cls, corner_u, corner_v, side):
        return cls(corner_u, corner_u + side, corner_v, corner_v + side)

    def mass(self, model):
        """``C(p1,q1) + C(p2,q2) - C(p1,q2) - C(p2,q1)``."""
        return (model.cdf(self.p1, self.q1) + model.cdf(self.p2, self.q2)
                - model.cdf(self.p1, self.q2) - model.cdf(self.p2, self.q1))

    def as_list(self):
        return [self.p1, self.p2, self.q1, self.q2]


def _axis_rule(a, b, order):
    return nm.composite_gauss_legendre(order, GRADING_LEVELS, a, b, grade="both")


def tau_LL(model, p, q, order=None):
    """``4 int_0^p int_0^q C dC / C(p, q)^2 - 1`` by 2D quadrature."""
    if not (0 < p <= 1 and 0 < q <= 1):
        raise DomainError("p and q must lie in (0, 1]")
    cpq = model.cdf(p, q)
    if cpq < 1e-150:  # cpq**2 would underflow
        raise UndefinedValueError(f"C({p}, {q}) = {cpq} is too small to normalize by")
    ru, rv = _axis_rule(0.0, p, order), _axis_rule(0.0, q, order)
    integral = nm.integrate_2d(lambda u, v: model.cdf(u, v) * model.pdf(u, v), ru, rv)
    return 4 * integral / cpq**2 - 1


def tau_global(model, order=None):
    """Kendall's tau, ``4 int int C dC - 1``."""
    return tau_LL(model, 1.0, 1.0, order=order)


def _triangle_nodes(outer, inner, lo, hi, below):
    """Map the inner unit rule onto ``[lo, x]`` (below) or ``[x, hi]`` for each outer node x."""
    x = outer.nodes[:, None]
    if below:
        return lo + inner.nodes[None, :] * (x - lo), inner.weights[None, :] * (x - lo)
    return x + inner.nodes[None, :] * (hi - x), inner.weights[None, :] * (hi - x)


def _block(model, region, ru, rv, inner, u_below, v_below):
    """Integral of ``c(u, v) c(u~, v~)`` over one ordering of ``(u, u~)`` and ``(v, v~)``."""
    ut, wut = _triangle_nodes(ru, inner, region.p1, region.p2, u_below)
    vt, wvt = _triangle_nodes(rv, inner, region.q1, region.q2, v_below)
    outer = model.pdf(*np.meshgrid(ru.nodes, rv.nodes, indexing="ij"))
    inner_int = np.empty_like(outer)
    for i in range(len(ru)):
        # vals[k, j, l] = c(ut[i, k], vt[j, l])
        vals = model.pdf(ut[i, :, None, None], vt[None, :, :])
        inner_int[i] = np.einsum("kjl,k,jl->j", vals, wut[i], wvt)
    return float(ru.weights @ (outer * inner_int) @ rv.weights)


def _rules_4d(region, order, panels, grade=None):
    order = nm.DEFAULT_ORDER_4D if order is None else order
    ru = nm.composite_gauss_legendre(order, panels, region.p1, region.p2, grade=grade)
    rv = nm.composite_gauss_legendre(order, panels, region.q1, region.q2, grade=grade)
    inner = nm.composite_gauss_legendre(order, panels, grade=grade)
    return ru, rv, inner


def sign_integral_split(model, region, order=None, panels=1, grade=None):
    """Brute-force 4D sign integral as the signed sum of four ordered blocks.

    ``grade="left"`` refines every axis geometrically toward its lower end
    (``panels`` halvings), for densities singular at the lower-left corner.
    """
    ru, rv, inner = _rules_4d(region, order, panels, grade)
    blocks = {}
    for ub in (True, False):
        for vb in (True, False):
            blocks[ub, vb] = _block(model, region, ru, rv, inner, ub, vb)
    # u~ < u and v~ < v is concordant, and so is u~ > u, v~ > v
    return blocks[True, True] + blocks[False, False] - blocks[True, False] - blocks[False, True]


def sign_integral(model, region, order=None, panels=1):
    """4D sign integral in antisymmetrized form.

    Swapping ``u`` and ``u~`` flips the sign kernel, so
    ``S = 2 int_{u~<u, v~<v} [c(u,v) c(u~,v~) - c(u~,v) c(u,v~)]``. The
    bracket vanishes to second order as the rectangle shrinks, which keeps
    small-rectangle values free of cancellation.
    """
    ru, rv, inner = _rules_4d(region, order, panels)
    ut, wut = _triangle_nodes(ru, inner, region.p1, region.p2, True)
    vt, wvt = _triangle_nodes(rv, inner, region.q1, region.q2, True)
    U = ru.nodes[:, None, None, None]
    V = rv.nodes[None, None, :, None]
    Ut = ut[:, :, None, None]
    Vt = vt[None, None, :, :]
    bracket = model.pdf(U, V) * model.pdf(Ut, Vt) - model.pdf(Ut, V) * model.pdf(U, Vt)
    inner_int = np.einsum("ikjl,ik,jl->ij", bracket, wut, wvt)
    return 2.0 * float(ru.weights @ inner_int @ rv.weights)


def tau_LL_bruteforce(model, p, q, order=None, panels=4):
    """``tau_LL`` from the 4D sign-integral representation (test oracle).

    Axes are graded toward the origin, where Archimedean densities with
    lower tail dependence blow up.
    """
    region = RectRegion(0.0, p, 0.0, q)
    cpq = model.cdf(p, q)
    if cpq < 1e-150:  # cpq**2 would underflow
        raise UndefinedValueError(f"C({p}, {q}) = {cpq} is too small to normalize by")
    return sign_integral_split(model, region, order, panels, grade="left") / cpq**2


def _rect_tau(model, region, power, order, panels):
    mass = region.mass(model)
    if not mass > 0:
        raise UndefinedValueError(f"rectangle {region} carries no mass")
    return sign_integral(model, region, order, panels) / mass**power


def tau_rect_naive(model, region, order=None, panels=1):
    """Local tau on a rectangle, normalized by the squared rectangle mass."""
    return _rect_tau(model, region, 2, order, panels)


def tau_rect_modified(model, region, order=None, panels=1):
    """Local tau on a rectangle, normalized by the cubed rectangle mass.

    Tends to ``r(p1, q1) / 18`` as the rectangle shrinks to its corner.
    """
    return _rect_tau(model, region, 3, order, panels)


# ---------------------------------------------------------------- limits


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    values: np.ndarray
    parameters: np.ndarray
    max_step_change: float
    truncated: bool = False


def lambda_LL_kendall(model, sequence=(0.2, 0.1, 0.05, 0.025), order=None):
    """``tau_LL(p, p)`` along a decreasing ``p`` sequence.

    Reports the final value and the largest change between successive
    values as a convergence diagnostic; existence of the limit is not
    asserted. Terms that cannot be normalized end the sequence.
    """
    ps = np.asarray(sequence, dtype=float)
    if np.any(np.diff(ps) >= 0):
        raise DomainError("p sequence must decrease")
    vals, truncated = [], False
    for p in ps:
        try:
            vals.append(tau_LL(model, p, p, order=order))
        except UndefinedValueError:
            truncated = True
            break
    vals = np.asarray(vals)
    if not len(vals):
        raise UndefinedValueError("no p in the sequence could be evaluated")
    change = float(np.max(np.abs(np.diff(vals)))) if len(vals) > 1 else np.nan
    return LimitEstimate(float(vals[-1]), vals, ps[: len(vals)], change, truncated)


def shrinking_squares(model, corner, sides, modified=True, order=None):
    """Rectangle tau on squares ``[p1, p1 + e] x [q1, q1 + e]`` for each side ``e``."""
    fn = tau_rect_modified if modified else tau_rect_naive
    return np.array([fn(model, RectRegion.square(corner[0], corner[1], e), order) for e in sides])


def naive_rate(model, corner, sides=(0.16, 0.08, 0.04, 0.02), order=None):
    """Fitted log-log slope of the naive rectangle tau against the side length."""
    sides = np.asarray(sides, dtype=float)
    vals = shrinking_squares(model, corner, sides, modified=False, order=order)
    if np.any(vals <= 0):
        raise UndefinedValueError("naive tau changes sign; log-log slope undefined")
    slope = float(np.polyfit(np.log(sides), np.log(vals), 1)[0])
    return slope, vals


def modified_limit(model, corner, sides=(0.02, 0.01), order=None):
    """Richardson extrapolation of the modified tau to zero side length.

    The leading error is linear in the side, so with ``sides = (e, e/2)``
    the estimate is ``2 tau(e/2) - tau(e)``.
    """
    e1, e2 = sides
    t1, t2 = shrinking_squares(model, corner, sides, modified=True, order=order)
    ratio = e1 / e2
    limit = (ratio * t2 - t1) / (ratio - 1)
    return LimitEstimate(float(limit), np.array([t1, t2]), np.asarray(sides, dtype=float),
                         float(abs(t2 - t1)))


def kendall_report(model, region=None, pq=None, order=None):
    """Dictionary of the local tau variants for one region (CLI payload)."""
    if region is None and pq is None:
        region = RectRegion(0.0, 1.0, 0.0, 1.0)
    if pq is not None:
        p, q = pq
        region = RectRegion(0.0, p, 0.0, q)
    out = {
        "model": model.to_dict(),
        "region": region.as_list(),
        "tau_naive": tau_rect_naive(model, region, order),
        "tau_modified": tau_rect_modified(model, region, order),
        "tau_LL": None,
        "diagnostics": {"rectangle_mass": float(region.mass(model)),
                        "order_4d": order or nm.DEFAULT_ORDER_4D},
    }
    if region.p1 == 0 and region.q1 == 0:
        out["tau_LL"] = tau_LL(model, region.p2, region.q2)
        out["diagnostics"]["tau_LL_minus_naive"] = out["tau_LL"] - out["tau_naive"]
    return out
