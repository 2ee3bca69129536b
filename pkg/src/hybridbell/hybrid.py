"""Polarization-continuum two-photon states and their Schmidt form.

The state is ``cos(theta)|H>|h> + sin(theta)|V>|v>`` with unit bundles
``h`` and ``v``.  Internally it is held as a ``2 x n`` amplitude array,
row 0 the H component and row 1 the V component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .continuum import (
    NORM_TOL,
    Bundle,
    Family,
    Grid,
    gram_schmidt,
    inner,
    is_normalized,
    load_tabulated,
    make_grid,
    normalize,
    sample_function,
)
from .errors import DegenerateInputError, InvalidArgumentError, NumericalValidationError

# kappa2 below this is treated as a product state
PRODUCT_STATE_TOL = 1e-7
REALIZABLE_IMAG_TOL = 1e-9
# canonical settings give B = sqrt(2) (2 k1 k2 + 1), which exceeds 2 exactly above this
VIOLATION_THRESHOLD = (math.sqrt(2.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class HybridState:
    theta: float
    h: Bundle
    v: Bundle

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise InvalidArgumentError("theta must be finite")
        if not self.h.grid.same_as(self.v.grid):
            raise InvalidArgumentError("h and v must share one grid")
        for name, b in (("h", self.h), ("v", self.v)):
            if not is_normalized(b):
                raise InvalidArgumentError(f"{name} is not unit-normalized")

    @property
    def grid(self) -> Grid:
        return self.h.grid

    def amplitudes(self) -> np.ndarray:
        """Joint amplitude array of shape ``(2, n)``."""
        return np.vstack([math.cos(self.theta) * self.h.amplitudes,
                          math.sin(self.theta) * self.v.amplitudes])

    def norm(self) -> float:
        psi = self.amplitudes()
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(psi) ** 2)))

    def project_polarization(self, u: np.ndarray) -> Bundle:
        """Unnormalized continuum bundle left after projecting photon A onto ``u``."""
        u = np.asarray(u, dtype=complex)
        return Bundle(self.grid, np.conj(u) @ self.amplitudes())


@dataclass(frozen=True, eq=False)
class SchmidtForm:
    kappa1: float
    kappa2: float
    u1: np.ndarray
    u2: np.ndarray
    f1: Bundle
    f2: Bundle
    degenerate: bool = False
    linear_polarizer_realizable: bool = True

    @property
    def grid(self) -> Grid:
        return self.f1.grid

    @property
    def kappa_product(self) -> float:
        return self.kappa1 * self.kappa2

    def amplitudes(self) -> np.ndarray:
        """Joint ``(2, n)`` amplitude array rebuilt from the Schmidt terms."""
        return (self.kappa1 * np.outer(self.u1, self.f1.amplitudes)
                + self.kappa2 * np.outer(self.u2, self.f2.amplitudes))

    def reconstruction_error(self, state: HybridState) -> float:
        diff = state.amplitudes() - self.amplitudes()
        return float(np.sqrt(np.sum(state.grid.weights * np.abs(diff) ** 2)))


def overlap_z(state: HybridState) -> complex:
    return inner(state.h, state.v)


def reduced_density_A(state: HybridState) -> np.ndarray:
    c, s = math.cos(state.theta), math.sin(state.theta)
    z = overlap_z(state)
    return np.array([[c * c, c * s * np.conj(z)],
                     [c * s * z, s * s]], dtype=complex)


def _phase_fix(u: np.ndarray) -> np.ndarray:
    for comp in u:
        if abs(comp) > 1e-12:
            return u * (abs(comp) / comp)
    return u


def _eigh_2x2(rho: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Closed-form eigenpairs of a 2x2 Hermitian matrix, larger eigenvalue first."""
    a, d = rho[0, 0].real, rho[1, 1].real
    b = rho[0, 1]
    mean = (a + d) / 2
    radius = math.hypot((a - d) / 2, abs(b))
    lam1, lam2 = mean + radius, mean - radius
    if radius <= 1e-15:
        u1 = np.array([1.0, 0.0], dtype=complex)
    elif a >= d:
        u1 = np.array([lam1 - d, np.conj(b)], dtype=complex)
    else:
        u1 = np.array([b, lam1 - a], dtype=complex)
    u1 = u1 / np.linalg.norm(u1)
    u2 = np.array([-np.conj(u1[1]), np.conj(u1[0])])
    return lam1, lam2, _phase_fix(u1), _phase_fix(u2)


def _fallback_partner(f1: Bundle) -> Bundle:
    lo, hi = f1.grid.span
    mu, sigma = (lo + hi) / 2, (hi - lo) / 16
    for order in range(1, 6):
        cand = sample_function(Family.HERMITE_GAUSSIAN, {"order": order, "mu": mu, "sigma": sigma}, f1.grid)
        try:
            return gram_schmidt(cand, [f1])
        except DegenerateInputError:
            continue
    raise DegenerateInputError("could not build a bundle orthogonal to f1")


def schmidt_decompose(state: HybridState) -> SchmidtForm:
    """Two-term Schmidt decomposition via the polarization reduced density matrix.

    The continuum partners are ``f_i = <u_i|psi> / kappa_i``.  For a product
    state the second partner is an arbitrary unit bundle orthogonal to ``f1``
    and the result is flagged ``degenerate``.
    """
    lam1, lam2, u1, u2 = _eigh_2x2(reduced_density_A(state))
    kappa1 = math.sqrt(max(lam1, 0.0))
    kappa2 = math.sqrt(max(lam2, 0.0))
    f1 = normalize(state.project_polarization(u1))
    degenerate = kappa2 < PRODUCT_STATE_TOL
    if degenerate:
        f2 = _fallback_partner(f1)
    else:
        f2 = normalize(state.project_polarization(u2))
    z = overlap_z(state)
    return SchmidtForm(kappa1, kappa2, u1, u2, f1, f2,
                       degenerate=degenerate,
                       linear_polarizer_realizable=abs(z.imag) <= REALIZABLE_IMAG_TOL)


def check_schmidt(state: HybridState, s: SchmidtForm, tol: float = 1e-8) -> None:
    """Raise if ``s`` is not a Schmidt form of ``state``."""
    if not state.grid.same_as(s.grid):
        raise InvalidArgumentError("Schmidt form and state live on different grids")
    if s.reconstruction_error(state) > tol:
        raise InvalidArgumentError("Schmidt form does not belong to this state")


def state_with_overlap(theta: float, z: float, grid: Grid | None = None, sigma: float = 1.0) -> HybridState:
    """State with Gaussian ``h`` and ``v = z h + sqrt(1-z^2) h_perp`` (real ``z``)."""
    if not -1.0 <= z <= 1.0:
        raise InvalidArgumentError(f"overlap must lie in [-1, 1], got {z}")
    grid = grid if grid is not None else make_grid()
    h = sample_function(Family.GAUSSIAN, {"mu": 0.0, "sigma": sigma}, grid)
    h_perp = sample_function(Family.HERMITE_GAUSSIAN, {"order": 1, "mu": 0.0, "sigma": sigma}, grid)
    v = normalize(z * h + math.sqrt(1.0 - z * z) * h_perp)
    return HybridState(theta, h, v)


def state_with_kappa(kappa1: float, grid: Grid | None = None) -> HybridState:
    """State whose Schmidt coefficients are ``(kappa1, sqrt(1 - kappa1^2))`` (z = 0)."""
    if not 1 / math.sqrt(2) - 1e-15 <= kappa1 <= 1.0:
        raise InvalidArgumentError("kappa1 must lie in [1/sqrt(2), 1]")
    return state_with_overlap(math.acos(min(kappa1, 1.0)), 0.0, grid)


def grid_from_config(spec: dict | None) -> Grid:
    spec = spec or {}
    return make_grid(spec.get("kind", "uniform-trapezoid"), spec.get("n", 512), spec.get("range", (-8.0, 8.0)))


def bundle_from_config(spec, grid: Grid, base_dir: str | Path = ".") -> Bundle:
    """A bundle spec is either a CSV path or ``{"family": ..., **params}``."""
    if isinstance(spec, str):
        path = Path(spec)
        return load_tabulated(path if path.is_absolute() else Path(base_dir) / path, grid)
    if not isinstance(spec, dict) or "family" not in spec:
        raise InvalidArgumentError(f"bundle spec must be a CSV path or a dict with 'family': {spec!r}")
    params = {k: v for k, v in spec.items() if k != "family"}
    if spec["family"] == "tabulated" and "path" in params:
        return bundle_from_config(params["path"], grid, base_dir)
    return sample_function(spec["family"], params, grid)


def state_from_config(record: dict, base_dir: str | Path = ".") -> HybridState:
    """Build a state from ``{theta, h, v, grid}``."""
    try:
        theta = float(record["theta"])
        grid = grid_from_config(record.get("grid"))
        h = bundle_from_config(record["h"], grid, base_dir)
        v = bundle_from_config(record["v"], grid, base_dir)
    except KeyError as exc:
        raise InvalidArgumentError(f"state record is missing {exc}") from exc
    state = HybridState(theta, h, v)
    if abs(state.norm() - 1.0) > NORM_TOL:
        raise NumericalValidationError(f"state norm {state.norm()!r} differs from 1")
    return state


def validate_schmidt(state: HybridState, s: SchmidtForm, tol: float = 1e-9) -> None:
    """Raise :class:`NumericalValidationError` if ``s`` breaks a Schmidt-form invariant."""
    problems = []
    if abs(s.kappa1**2 + s.kappa2**2 - 1.0) > 1e-10 or s.kappa1 < s.kappa2:
        problems.append(f"coefficients ({s.kappa1}, {s.kappa2})")
    gram_u = np.array([[np.vdot(a, b) for b in (s.u1, s.u2)] for a in (s.u1, s.u2)])
    gram_f = np.array([[inner(a, b) for b in (s.f1, s.f2)] for a in (s.f1, s.f2)])
    if np.max(np.abs(gram_u - np.eye(2))) > tol or np.max(np.abs(gram_f - np.eye(2))) > tol:
        problems.append("non-orthonormal Schmidt vectors")
    err = s.reconstruction_error(state)
    if err > max(tol, s.kappa2 if s.degenerate else 0.0):
        problems.append(f"reconstruction error {err:.3g}")
    if problems:
        raise NumericalValidationError("invalid Schmidt form: " + "; ".join(problems))
