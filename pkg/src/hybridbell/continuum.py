"""Discretized continuum space: quadrature grids and amplitude bundles.

A :class:`Bundle` is a complex amplitude function sampled on the nodes of a
:class:`Grid`; integrals over the continuum label become weighted sums
``sum_k w_k f(q_k)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite as _herm

from .errors import DegenerateInputError, InvalidArgumentError

NORM_TOL = 1e-10
TABULATED_NODE_TOL = 1e-9


class GridKind(str, Enum):
    UNIFORM_TRAPEZOID = "uniform-trapezoid"
    GAUSS_LEGENDRE = "gauss-legendre"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    weights: np.ndarray
    kind: GridKind

    def __post_init__(self):
        pts = _frozen(np.asarray(self.points, dtype=float))
        wts = _frozen(np.asarray(self.weights, dtype=float))
        if pts.ndim != 1 or pts.size < 2 or pts.shape != wts.shape:
            raise InvalidArgumentError("grid needs matching 1-D points/weights of length >= 2")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgumentError("grid points must be strictly increasing")
        if np.any(wts <= 0) or not np.all(np.isfinite(wts)):
            raise InvalidArgumentError("grid weights must be positive and finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "kind", GridKind(self.kind))

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def integrate(self, values) -> complex | float:
        return np.sum(self.weights * np.asarray(values))

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.kind == other.kind
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_dict(self) -> dict:
        lo, hi = self.span
        return {"kind": self.kind.value, "n": self.n, "range": [lo, hi]}


def make_grid(kind: str | GridKind = GridKind.UNIFORM_TRAPEZOID, n: int = 512,
              range: Sequence[float] = (-8.0, 8.0)) -> Grid:
    """Build a quadrature grid with ``n`` nodes covering ``range``.

    For ``uniform-trapezoid`` the end nodes sit on the interval bounds and
    carry half weight. ``gauss-legendre`` uses interior nodes and is exact
    for polynomials up to degree ``2n - 1``.
    """
    try:
        kind = GridKind(kind)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown grid kind {kind!r}") from exc
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"grid needs n >= 2 nodes, got {n}")
    lo, hi = (float(x) for x in range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise InvalidArgumentError(f"degenerate grid range [{lo}, {hi}]")
    n = int(n)
    if kind is GridKind.UNIFORM_TRAPEZOID:
        points = np.linspace(lo, hi, n)
        h = (hi - lo) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2
    else:
        x, w = np.polynomial.legendre.leggauss(n)
        half = (hi - lo) / 2
        points = lo + half * (x + 1.0)
        weights = half * w
    return Grid(points, weights, kind)


@dataclass(frozen=True, eq=False)
class Bundle:
    """Complex amplitude function on a grid (not necessarily normalized)."""

    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != self.grid.points.shape:
            raise InvalidArgumentError(
                f"bundle has {amps.size} amplitudes for a {self.grid.n}-node grid")
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("bundle amplitudes must be finite")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self).real))

    def _lift(self, other) -> np.ndarray:
        if not isinstance(other, Bundle):
            return NotImplemented
        _check_grids(self, other)
        return other.amplitudes

    def __add__(self, other):
        amps = self._lift(other)
        if amps is NotImplemented:
            return amps
        return Bundle(self.grid, self.amplitudes + amps)

    def __sub__(self, other):
        amps = self._lift(other)
        if amps is NotImplemented:
            return amps
        return Bundle(self.grid, self.amplitudes - amps)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Bundle(self.grid, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Bundle(self.grid, -self.amplitudes)


def _check_grids(a: Bundle, b: Bundle) -> None:
    if not a.grid.same_as(b.grid):
        raise InvalidArgumentError("bundles live on different grids")


def inner(a: Bundle, b: Bundle) -> complex:
    """Quadrature scalar product, conjugate-linear in ``a``."""
    _check_grids(a, b)
    if a is b:
        return complex(np.sum(a.grid.weights * (a.amplitudes.real**2 + a.amplitudes.imag**2)))
    return complex(np.sum(a.grid.weights * np.conj(a.amplitudes) * b.amplitudes))


def normalize(b: Bundle) -> Bundle:
    nsq = inner(b, b).real
    if not nsq > 0.0:
        raise DegenerateInputError("cannot normalize a zero-norm bundle")
    return Bundle(b.grid, b.amplitudes / np.sqrt(nsq))


def is_normalized(b: Bundle, tol: float = NORM_TOL) -> bool:
    return abs(inner(b, b).real - 1.0) <= tol


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    HERMITE_GAUSSIAN = "hermite-gaussian"
    TABULATED = "tabulated"


def _gaussian_envelope(q, mu, sigma, chirp=0.0):
    # |amplitude|^2 is a normal density of standard deviation sigma
    x = q - mu
    return np.exp(-x**2 / (4.0 * sigma**2) + 1j * chirp * x**2)


def sample_function(family: str | Family, params: dict | None, grid: Grid) -> Bundle:
    """Sample a built-in amplitude family on ``grid`` and normalize it.

    gaussian:          mu, sigma, chirp (phase ``exp(i chirp (q-mu)^2)``)
    hermite-gaussian:  order, mu, sigma
    tabulated:         values (one complex amplitude per node)
    """
    params = dict(params or {})
    try:
        family = Family(family)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown function family {family!r}") from exc
    q = grid.points
    if family is Family.TABULATED:
        values = np.asarray(params.get("values", ()), dtype=complex)
        if values.shape != q.shape:
            raise InvalidArgumentError(
                f"tabulated data has {values.size} values for a {q.size}-node grid")
        amps = values
    else:
        mu = float(params.get("mu", 0.0))
        sigma = float(params.get("sigma", 1.0))
        if not sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
        if family is Family.GAUSSIAN:
            amps = _gaussian_envelope(q, mu, sigma, float(params.get("chirp", 0.0)))
        else:
            order = params.get("order", 0)
            if int(order) != order or order < 0:
                raise InvalidArgumentError(f"hermite order must be a non-negative integer, got {order}")
            coef = np.zeros(int(order) + 1)
            coef[-1] = 1.0
            x = (q - mu) / (np.sqrt(2.0) * sigma)
            # scale the polynomial down so high orders don't overflow before normalizing
            amps = _herm.hermval(x, coef) * _gaussian_envelope(q, mu, sigma) / np.sqrt(2.0**order)
    return normalize(Bundle(grid, amps))


def load_tabulated(path: str | Path, grid: Grid) -> Bundle:
    """Read a ``q, re, im`` CSV whose nodes coincide with ``grid``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["q", "re", "im"]:
                raise InvalidArgumentError(f"{path}: expected header 'q,re,im'")
            rows = [(float(r["q"]), float(r["re"]), float(r["im"])) for r in reader]
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read tabulated bundle {path}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"{path}: malformed row ({exc})") from exc
    data = np.array(rows, dtype=float).reshape(-1, 3)
    if data.shape[0] != grid.n:
        raise InvalidArgumentError(f"{path}: {data.shape[0]} rows for a {grid.n}-node grid")
    if np.max(np.abs(data[:, 0] - grid.points)) > TABULATED_NODE_TOL:
        raise InvalidArgumentError(f"{path}: nodes do not match the active grid")
    return sample_function(Family.TABULATED, {"values": data[:, 1] + 1j * data[:, 2]}, grid)


def save_tabulated(bundle: Bundle, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "re", "im"])
        for q, a in zip(bundle.grid.points, bundle.amplitudes):
            w.writerow([repr(float(q)), repr(float(a.real)), repr(float(a.imag))])


def gram_schmidt(candidate: Bundle, against: Sequence[Bundle], min_norm: float = 1e-6) -> Bundle:
    """Remove the components of ``candidate`` along the (orthonormal) ``against``
    and normalize what is left."""
    out = normalize(candidate)
    for _ in range(2):  # second pass cleans up rounding
        for e in against:
            out = out - inner(e, out) * e
    if out.norm() < min_norm:
        raise DegenerateInputError("candidate lies in the span of the reference bundles")
    return normalize(out)
