"""Checkerboard copulas and the greedy solver for constant scaled log-odds.

An ``n x n`` checkerboard copula is a matrix of cell masses ``pi[i, j]``
(row ``i`` indexes ``u``, column ``j`` indexes ``v``) whose rows and columns
each sum to ``1/n``. The block at ``(i, j)`` is the 2x2 submatrix with top
left cell ``(i, j)``; its log-odds ``log(pi_ij pi_i+1,j+1 / (pi_i+1,j pi_i,j+1))``
is the discrete counterpart of ``d^2 log c / du dv``.

Scale convention
----------------
The target equation ``c^-k d^2 log c / du dv = zeta`` is discretized as

* ``convention="density"`` (default): ``n^2 LO / (n^2 M / 4)^k = zeta``, with
  ``LO`` the block log-odds and ``M`` the block mass. ``n^2 LO`` approximates
  the mixed derivative and ``n^2 M / 4`` the average density, so ``zeta`` has
  the same meaning for every ``n``: ``k = 0`` reproduces the minimum
  information copula with ``theta = zeta``, ``k = 1`` the Frank copula with
  ``theta = zeta / 2`` and ``k = -2`` the FGM copula with ``theta = zeta / 4``.
* ``convention="mass"``: the raw cell-mass form ``LO / M^k = zeta``.

Either way a block update moves mass ``+delta`` onto the diagonal cells and
``-delta`` off it, which leaves the block mass and all margins unchanged,
so the per-block target ``T = exp(LO_target)`` is fixed during the update.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .copulas import Grid2D, fmt, write_csv
from .errors import BlockError, DomainError, UnsupportedFamilyError, RelDepError

CONVENTIONS = ("density", "mass")
SCHEDULES = ("colour", "row-major")


class CheckerboardMatrix:
    """Square matrix of nonnegative cell masses with optional metadata."""

    def __init__(self, mass, meta=None):
        mass = np.array(mass, dtype=float)
        if mass.ndim != 2 or mass.shape[0] != mass.shape[1]:
            raise DomainError("checkerboard mass must be a square matrix")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise DomainError("checkerboard masses must be finite and nonnegative")
        self.mass = mass
        self.meta = dict(meta or {})

    @property
    def n(self):
        return self.mass.shape[0]

    @property
    def density(self):
        """Cell densities ``n^2 pi``."""
        return self.mass * self.n**2

    def margin_error(self):
        """Largest deviation of a row or column sum from ``1/n``."""
        target = 1.0 / self.n
        return float(max(np.max(np.abs(self.mass.sum(axis=1) - target)),
                         np.max(np.abs(self.mass.sum(axis=0) - target))))

    def diagonal_mass(self):
        return float(np.trace(self.mass))

    def __repr__(self):
        return f"CheckerboardMatrix(n={self.n})"

    def to_csv(self, path):
        """``n`` rows of ``n`` masses, plus a JSON sidecar at ``path + '.json'``."""
        with open(path, "w", newline="") as fh:
            for row in self.mass:
                fh.write(",".join(fmt(x) for x in row) + "\n")
        side = {"n": self.n, "k": None, "zeta": None, "tol": None, "sweeps": None,
                "converged": None, "max_residual": None}
        side.update(self.meta)
        with open(str(path) + ".json", "w") as fh:
            json.dump(side, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path):
        mass = np.loadtxt(path, delimiter=",", ndmin=2)
        try:
            with open(str(path) + ".json") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            meta = {}
        return cls(mass, meta)


def uniform(n):
    return CheckerboardMatrix(np.full((n, n), 1.0 / (n * n)))


def discretize(model, n):
    """Exact cell masses of a copula on the uniform ``n x n`` grid."""
    n = int(n)
    if n < 1:
        raise DomainError("grid size must be at least 1")
    g = np.linspace(0.0, 1.0, n + 1)
    C = model.cdf(*np.meshgrid(g, g, indexing="ij"))
    C = np.asarray(C, dtype=float)
    # boundary values are exact: C(0, v) = 0 and C(1, v) = v
    C[0, :] = 0.0
    C[:, 0] = 0.0
    C[-1, :] = g
    C[:, -1] = g
    mass = C[1:, 1:] - C[:-1, 1:] - C[1:, :-1] + C[:-1, :-1]
    return CheckerboardMatrix(np.maximum(mass, 0.0), {"source": model.to_dict()})


@dataclass(frozen=True)
class PdeSpec:
    """Parameters of the discrete equation ``c^-k d^2 log c = zeta``."""

    k: float
    zeta: float
    n: int
    tol: float = 1e-8
    max_sweeps: int = 50000
    convention: str = "density"
    schedule: str = "colour"
    relaxation: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.zeta) or not math.isfinite(self.k):
            raise DomainError("k and zeta must be finite")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("grid size must be an integer >= 2")
        if not self.tol > 0:
            raise DomainError("tolerance must be positive")
        if self.convention not in CONVENTIONS:
            raise DomainError(f"convention must be one of {CONVENTIONS}")
        if self.schedule not in SCHEDULES:
            raise DomainError(f"schedule must be one of {SCHEDULES}")
        if not 0 < self.relaxation < 2:
            raise DomainError("relaxation must lie in (0, 2)")

    def to_dict(self):
        return {"k": self.k, "zeta": self.zeta, "n": self.n, "tol": self.tol,
                "max_sweeps": self.max_sweeps, "convention": self.convention,
                "schedule": self.schedule, "relaxation": self.relaxation}


def _block_view(mass):
    """Cells ``(p11, p12, p21, p22)`` of every block; ``p12`` is ``(i, j+1)``."""
    return mass[:-1, :-1], mass[:-1, 1:], mass[1:, :-1], mass[1:, 1:]


def _target_log_odds(block_mass, k, zeta, n, convention):
    if convention == "mass":
        return zeta * block_mass**k
    return zeta * (n * n * block_mass / 4.0) ** k / (n * n)


def block_log_odds(mass):
    p11, p12, p21, p22 = _block_view(np.asarray(mass, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(p11) + np.log(p22) - np.log(p12) - np.log(p21)


def residual_map(matrix, k, zeta, convention="density"):
    """Block residuals of the discrete equation as a :class:`Grid2D`.

    Values sit at the inner grid nodes ``(i + 1) / n``. Blocks touching a
    zero cell get an infinite residual.
    """
    mass = matrix.mass if isinstance(matrix, CheckerboardMatrix) else np.asarray(matrix, float)
    n = mass.shape[0]
    p11, p12, p21, p22 = _block_view(mass)
    M = p11 + p12 + p21 + p22
    lo = block_log_odds(mass)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if convention == "mass":
            scaled = lo / M**k
        elif convention == "density":
            scaled = n * n * lo / (n * n * M / 4.0) ** k
        else:
            raise DomainError(f"convention must be one of {CONVENTIONS}")
        res = scaled - zeta
    zero = (p11 <= 0) | (p12 <= 0) | (p21 <= 0) | (p22 <= 0)
    res = np.where(zero, np.inf, res)
    nodes = np.arange(1, n) / n
    return Grid2D(nodes, nodes, res)


def max_residual(matrix, k, zeta, convention="density"):
    return float(np.max(np.abs(residual_map(matrix, k, zeta, convention).values)))


def _solve_blocks(p11, p12, p21, p22, log_t):
    """Admissible ``delta`` for arrays of blocks given ``log T``.

    The quadratic ``(1-T) d^2 + (p11 + p22 + T (p12 + p21)) d + p11 p22 - T p12 p21``
    changes sign on ``[-min(p11, p22), min(p12, p21)]``, so an admissible
    root always exists; the one of smallest magnitude is taken. Infinite
    ``log T`` drives the root to an end of that interval.
    """
    # divide through by T when T > 1 so no coefficient overflows
    big = log_t > 0
    S = np.exp(-np.abs(log_t))  # min(T, 1 / T)
    a = np.where(big, S - 1.0, 1.0 - S)
    b = np.where(big, S * (p11 + p22) + p12 + p21, p11 + p22 + S * (p12 + p21))
    c = np.where(big, S * p11 * p22 - p12 * p21, p11 * p22 - S * p12 * p21)
    disc = np.maximum(b * b - 4.0 * a * c, 0.0)
    # b > 0 for nonnegative cells, so this is the cancellation-free branch
    q = -0.5 * (b + np.sqrt(disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = c / q
    lo = -np.minimum(p11, p22)
    hi = np.minimum(p12, p21)
    slack = 1e-14 * (p11 + p12 + p21 + p22)
    roots = np.stack([r1, r2])
    ok = np.isfinite(roots) & (roots >= lo - slack) & (roots <= hi + slack)
    mag = np.where(ok, np.abs(roots), np.inf)
    pick = np.argmin(mag, axis=0)
    delta = np.take_along_axis(roots, pick[None], axis=0)[0]
    valid = np.isfinite(np.min(mag, axis=0)) & ~np.isnan(log_t)
    return np.clip(delta, lo, hi), valid


def block_delta(block, k, zeta, convention="mass", n=None):
    """Tilt ``delta`` that brings one 2x2 block to the target scaled log-odds.

    ``block`` is ``[[p11, p12], [p21, p22]]``. With the default
    ``convention="mass"`` the target is ``T = exp(zeta * M^k)``; with
    ``convention="density"`` the grid size ``n`` sets the scaling.
    """
    blk = np.asarray(block, dtype=float)
    if blk.shape != (2, 2) or np.any(blk < 0):
        raise DomainError("block must be a nonnegative 2x2 array")
    M = float(blk.sum())
    if not M > 0:
        raise DomainError("block mass must be positive")
    if convention == "density" and n is None:
        raise DomainError("the density convention needs the grid size n")
    log_t = _target_log_odds(M, k, zeta, n, convention)
    delta, valid = _solve_blocks(*(np.array([x]) for x in blk.ravel()), np.array([log_t]))
    if not valid[0]:
        raise BlockError("no admissible root for block", block=None)
    return float(delta[0])


@dataclass
class GreedyResult:
    matrix: CheckerboardMatrix
    residual_trace: np.ndarray
    margin_trace: np.ndarray
    converged: bool
    sweeps: int
    spec: PdeSpec
    error: str | None = None

    @property
    def max_residual(self):
        return float(self.residual_trace[-1])


def _colour_classes(n):
    idx = np.arange(n - 1)
    return [(idx[idx % 2 == a], idx[idx % 2 == b]) for a in (0, 1) for b in (0, 1)]


def _update(mass, ii, jj, spec):
    p11 = mass[ii, jj]
    p12 = mass[ii, jj + 1]
    p21 = mass[ii + 1, jj]
    p22 = mass[ii + 1, jj + 1]
    log_t = _target_log_odds(p11 + p12 + p21 + p22, spec.k, spec.zeta, spec.n, spec.convention)
    if spec.relaxation != 1.0:
        # overshoot the current log-odds toward the target; same fixed point
        with np.errstate(divide="ignore", invalid="ignore"):
            cur = np.log(p11) + np.log(p22) - np.log(p12) - np.log(p21)
        log_t = np.where(np.isfinite(cur), cur + spec.relaxation * (log_t - cur), log_t)
    with np.errstate(over="ignore", invalid="ignore"):
        delta, valid = _solve_blocks(p11, p12, p21, p22, log_t)
    if not np.all(valid):
        bad = int(np.flatnonzero(~np.atleast_1d(valid))[0])
        where = (int(np.atleast_1d(ii)[bad]), int(np.atleast_1d(jj)[bad]))
        raise BlockError(f"no admissible root for block {where}", block=where)
    mass[ii, jj] = p11 + delta
    mass[ii + 1, jj + 1] = p22 + delta
    mass[ii, jj + 1] = p12 - delta
    mass[ii + 1, jj] = p21 - delta


def _sweep(mass, spec, classes):
    if spec.schedule == "row-major":
        for i in range(spec.n - 1):
            for j in range(spec.n - 1):
                _update(mass, i, j, spec)
        return
    for rows, cols in classes:
        # blocks of one parity class share no cells
        ii, jj = np.meshgrid(rows, cols, indexing="ij")
        _update(mass, ii.ravel(), jj.ravel(), spec)


def greedy_solve(spec, initial=None):
    """Greedy block updates from the uniform matrix until the residual is below ``tol``.

    Each sweep visits every adjacent 2x2 block once. ``schedule="colour"``
    processes the four parity classes of disjoint blocks in turn
    (vectorized); ``schedule="row-major"`` visits blocks one at a time.
    The residual trace holds the maximum absolute block residual before
    the first sweep and after each sweep. ``relaxation > 1`` overshoots
    each block's log-odds toward its target (successive over-relaxation),
    which cuts the sweep count from ``O(n^2)`` to ``O(n)`` near convergence.
    Without convergence the last iterate is returned with ``converged=False``.
    """
    n = spec.n
    mass = np.full((n, n), 1.0 / (n * n)) if initial is None else np.array(initial.mass)
    classes = _colour_classes(n)
    residuals = [max_residual(mass, spec.k, spec.zeta, spec.convention)]
    margins = [CheckerboardMatrix(mass).margin_error()]
    sweeps, error = 0, None
    while residuals[-1] > spec.tol and sweeps < spec.max_sweeps:
        try:
            _sweep(mass, spec, classes)
        except BlockError as exc:
            error = str(exc)
            break
        sweeps += 1
        residuals.append(max_residual(mass, spec.k, spec.zeta, spec.convention))
        margins.append(float(max(np.max(np.abs(mass.sum(axis=1) - 1.0 / n)),
                                 np.max(np.abs(mass.sum(axis=0) - 1.0 / n)))))
        if not np.isfinite(residuals[-1]):
            error = "residual became non-finite"
            break
    converged = error is None and residuals[-1] <= spec.tol
    meta = {"n": n, "k": spec.k, "zeta": spec.zeta, "tol": spec.tol, "sweeps": sweeps,
            "converged": converged, "max_residual": residuals[-1],
            "convention": spec.convention, "schedule": spec.schedule,
            "relaxation": spec.relaxation}
    return GreedyResult(CheckerboardMatrix(np.maximum(mass, 0.0), meta), np.array(residuals),
                        np.array(margins), converged, sweeps, spec, error)


@dataclass
class PanelResult:
    ks: tuple
    zetas: tuple
    n: int
    cells: dict = field(default_factory=dict)

    def converged(self):
        return {key: (res is not None and res.converged) for key, res in self.cells.items()}

    def failures(self):
        return {key: (res.error if res is not None else "failed")
                for key, res in self.cells.items() if res is None or not res.converged}


def panel_sweep(ks=(-2, -1, 0, 1), zetas=(1, 2, 4), n=5, tol=1e-8, max_sweeps=50000,
                convention="density"):
    """Solve every ``(k, zeta)`` cell; failures are recorded, never raised."""
    out = PanelResult(tuple(ks), tuple(zetas), n)
    for k in ks:
        for zeta in zetas:
            try:
                out.cells[k, zeta] = greedy_solve(PdeSpec(k, zeta, n, tol, max_sweeps, convention))
            except RelDepError:
                out.cells[k, zeta] = None
    return out


# ---------------------------------------------------------------- power transform


def frank_param_from_scaling(k, zeta, Z):
    """Frank parameter ``k zeta Z / 2`` of the copula implied by ``c^k / Z``."""
    if k == 0:
        raise UnsupportedFamilyError("k = 0 does not map to a Frank copula")
    return k * zeta * Z / 2.0


@dataclass
class PowerTransform:
    """Density ``f = c^k / Z`` with quadrature margins; ``pdf`` is its implied copula."""

    density: object
    k: float
    Z: float
    order: int
    panels: int

    def __post_init__(self):
        rule = nm.composite_gauss_legendre(self.order, self.panels)
        self._t, self._w = rule.nodes, rule.weights

    def f(self, x, y):
        return self.density(x, y) ** self.k / self.Z

    def marginal_pdf(self, x, axis=0):
        x = np.asarray(x, dtype=float)
        t = self._t.reshape((1,) * x.ndim + (-1,))
        vals = self.f(x[..., None], t) if axis == 0 else self.f(t, x[..., None])
        return vals @ self._w

    def marginal_cdf(self, x, axis=0):
        """``F(x) = int_0^x f_margin`` with the rule mapped to ``[0, x]``."""
        x = np.asarray(x, dtype=float)
        s = x[..., None] * self._t
        return (self.marginal_pdf(s, axis) @ self._w) * x

    def marginal_ppf(self, p, axis=0):
        return nm.bisect_vectorized(lambda x: self.marginal_cdf(x, axis), p)

    def pdf(self, u, v):
        """Implied copula density ``f(Fx^-1(u), Fy^-1(v)) / (f_x f_y)``."""
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        # invert each distinct coordinate once; grids repeat them heavily
        ux, ui = np.unique(u, return_inverse=True)
        vy, vi = np.unique(v, return_inverse=True)
        x = self.marginal_ppf(ux, 0)[ui].reshape(u.shape)
        y = self.marginal_ppf(vy, 1)[vi].reshape(v.shape)
        return self.f(x, y) / (self.marginal_pdf(x, 0) * self.marginal_pdf(y, 1))


def power_transform_copula(density, k, order=None, panels=nm.DEFAULT_PANELS):
    """Raise a copula density to the power ``k`` and return the implied copula.

    ``density`` is a vectorized callable on ``(0, 1)^2`` or a copula model;
    ``Z`` is the integral of ``c^k`` over the unit square.
    """
    dens = density.pdf if hasattr(density, "pdf") else density
    order = nm.default_order() if order is None else order
    rule = nm.composite_gauss_legendre(order, panels)
    uu, vv = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    vals = np.asarray(dens(uu, vv), dtype=float)
    if np.any(~(vals > 0)):
        raise DomainError("density must be strictly positive for a power transform")
    Z = float(rule.weights @ vals**k @ rule.weights)
    return PowerTransform(dens, k, Z, order, panels)


def power_transform_checkerboard(matrix, k):
    """Checkerboard analogue: ``pi^k`` renormalized, returned with its ``Z``.

    ``Z`` is the mean of ``(n^2 pi)^k``, the integral of the piecewise
    constant density raised to ``k``. The result has non-uniform margins.
    """
    d = matrix.density
    if np.any(d <= 0):
        raise DomainError("cells must be positive for a power transform")
    dk = d**k
    Z = float(dk.mean())
    n = matrix.n
    return CheckerboardMatrix(dk / (Z * n * n)), Z


def implied_relative_log_odds(matrix):
    """Block ``4 LO / M`` of a (possibly non-uniform-margin) checkerboard.

    Sending the margins to uniform stretches each cell but keeps its odds
    and mass, so this is the ``k = 1`` density-scale quantity of the
    implied copula. It is constant, equal to ``2 theta``, for a discretized
    Frank-type checkerboard.
    """
    p11, p12, p21, p22 = _block_view(matrix.mass)
    return 4.0 * block_log_odds(matrix.mass) / (p11 + p12 + p21 + p22)


def write_panel(panel, directory):
    """One sub-directory per ``(k, zeta)`` holding ``matrix.csv`` and its sidecar."""
    os.makedirs(directory, exist_ok=True)
    index = []
    for (k, zeta), res in panel.cells.items():
        sub = os.path.join(directory, f"k{fmt(k)}_zeta{fmt(zeta)}")
        os.makedirs(sub, exist_ok=True)
        entry = {"k": k, "zeta": zeta, "path": os.path.relpath(sub, directory)}
        if res is None:
            entry["converged"] = False
            entry["error"] = "failed"
        else:
            res.matrix.to_csv(os.path.join(sub, "matrix.csv"))
            entry.update(converged=res.converged, sweeps=res.sweeps,
                         max_residual=res.max_residual, error=res.error)
        index.append(entry)
    with open(os.path.join(directory, "panel.json"), "w") as fh:
        json.dump({"n": panel.n, "ks": list(panel.ks), "zetas": list(panel.zetas),
                   "cells": index}, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return index


def residual_csv(grid, path):
    write_csv(path, ["u", "v", "residual"],
              zip(*(a.ravel() for a in np.meshgrid(grid.u, grid.v, indexing="ij")),
                  grid.values.ravel()))
