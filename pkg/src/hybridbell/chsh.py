"""CHSH analysis in rotated Schmidt bases.

Probabilities here are computed by explicit projection of the grid-level
state; the closed-form expressions in terms of the Schmidt coefficients are
kept alongside as independent cross-checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .continuum import Bundle
from .errors import InvalidArgumentError
from .hybrid import HybridState, SchmidtForm, check_schmidt

TSIRELSON = 2.0 * math.sqrt(2.0)
LOCAL_BOUND = 2.0


@dataclass(frozen=True)
class AngleSettings:
    alpha: float
    alpha_prime: float
    beta: float
    beta_prime: float

    def __post_init__(self):
        for name in ("alpha", "alpha_prime", "beta", "beta_prime"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, value % math.pi)

    def pairs(self) -> list[tuple[float, float]]:
        """(alpha, beta) pairs in the order C1, C2, C3, C4 of the Bell sum."""
        return [(self.alpha, self.beta), (self.alpha, self.beta_prime),
                (self.alpha_prime, self.beta), (self.alpha_prime, self.beta_prime)]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.alpha_prime, self.beta, self.beta_prime)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "alpha_prime": self.alpha_prime,
                "beta": self.beta, "beta_prime": self.beta_prime}


# sign of each correlation in B = C1 - C2 + C3 + C4
BELL_SIGNS = (1.0, -1.0, 1.0, 1.0)


@dataclass(frozen=True)
class BellReport:
    correlations: tuple[float, float, float, float]
    bell_value: float
    violation: bool
    kappa_product: float
    settings: AngleSettings

    @property
    def margin(self) -> float:
        return self.bell_value - LOCAL_BOUND

    def to_dict(self) -> dict:
        return {"correlations": list(self.correlations), "bell_value": self.bell_value,
                "violation": self.violation, "margin": self.margin,
                "kappa_product": self.kappa_product, "settings": self.settings.to_dict()}


def canonical_settings() -> AngleSettings:
    return AngleSettings(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)


def _check_index(i: int) -> None:
    if i not in (1, 2):
        raise InvalidArgumentError(f"basis index must be 1 or 2, got {i}")


def rotated_u(s: SchmidtForm, alpha: float, index: int) -> np.ndarray:
    _check_index(index)
    c, sn = math.cos(alpha), math.sin(alpha)
    if index == 1:
        return c * s.u1 + sn * s.u2
    return -sn * s.u1 + c * s.u2


def rotated_f(s: SchmidtForm, beta: float, index: int) -> Bundle:
    _check_index(index)
    c, sn = math.cos(beta), math.sin(beta)
    if index == 1:
        return c * s.f1 + sn * s.f2
    return -sn * s.f1 + c * s.f2


def _projection_amplitude(state: HybridState, s: SchmidtForm, i: int, j: int,
                          alpha: float, beta: float) -> complex:
    remainder = state.project_polarization(rotated_u(s, alpha, i))
    f = rotated_f(s, beta, j)
    return complex(np.sum(state.grid.weights * np.conj(f.amplitudes) * remainder.amplitudes))


def joint_probability(state: HybridState, s: SchmidtForm, i: int, j: int,
                      alpha: float, beta: float) -> float:
    """Probability of finding photon A in ``u_i^alpha`` and photon B in ``f_j^beta``."""
    check_schmidt(state, s)
    return abs(_projection_amplitude(state, s, i, j, alpha, beta)) ** 2


def joint_probability_closed(kappa1: float, kappa2: float, i: int, j: int,
                             alpha: float, beta: float) -> float:
    _check_index(i)
    _check_index(j)
    if i == 2:
        alpha += math.pi / 2
    if j == 2:
        beta += math.pi / 2
    ca, sa, cb, sb = math.cos(alpha), math.sin(alpha), math.cos(beta), math.sin(beta)
    return (kappa1 * ca * cb + kappa2 * sa * sb) ** 2


def correlation(state: HybridState, s: SchmidtForm, alpha: float, beta: float) -> float:
    check_schmidt(state, s)
    p = {(i, j): abs(_projection_amplitude(state, s, i, j, alpha, beta)) ** 2
         for i in (1, 2) for j in (1, 2)}
    return p[1, 1] - p[1, 2] - p[2, 1] + p[2, 2]


def correlation_closed(kappa1: float, kappa2: float, alpha: float, beta: float) -> float:
    return (2 * kappa1 * kappa2 * math.sin(2 * alpha) * math.sin(2 * beta)
            + math.cos(2 * alpha) * math.cos(2 * beta))


def make_report(correlations, kappa_product: float, settings: AngleSettings) -> BellReport:
    correlations = tuple(float(c) for c in correlations)
    b = sum(sign * c for sign, c in zip(BELL_SIGNS, correlations))
    return BellReport(correlations, b, b > LOCAL_BOUND, kappa_product, settings)


def bell_value(state: HybridState, s: SchmidtForm, settings: AngleSettings) -> BellReport:
    """Bell operator from directly projected correlations."""
    corr = [correlation(state, s, a, b) for a, b in settings.pairs()]
    return make_report(corr, s.kappa_product, settings)


def bell_value_closed(kappa1: float, kappa2: float, settings: AngleSettings) -> float:
    a, ap, b, bp = (2 * x for x in settings.as_tuple())
    k = 2 * kappa1 * kappa2
    return (k * (math.sin(a) * (math.sin(b) - math.sin(bp)) + math.sin(ap) * (math.sin(b) + math.sin(bp)))
            + math.cos(a) * (math.cos(b) - math.cos(bp)) + math.cos(ap) * (math.cos(b) + math.cos(bp)))


def canonical_bell_value(kappa_product: float) -> float:
    return math.sqrt(2.0) * (2.0 * kappa_product + 1.0)


def _check_kappas(kappa1: float, kappa2: float) -> None:
    ok = (math.isfinite(kappa1) and math.isfinite(kappa2) and kappa1 >= kappa2 >= 0
          and abs(kappa1**2 + kappa2**2 - 1.0) <= 1e-10)
    if not ok:
        raise InvalidArgumentError(f"invalid Schmidt coefficients ({kappa1}, {kappa2})")


def _grid_block(k: float, trig: tuple[np.ndarray, np.ndarray], rows: slice) -> tuple[float, tuple]:
    S, C = trig
    Sa, Ca = S[rows, None, None, None], C[rows, None, None, None]
    Sap, Cap = S[None, :, None, None], C[None, :, None, None]
    Sb, Cb = S[None, None, :, None], C[None, None, :, None]
    Sbp, Cbp = S[None, None, None, :], C[None, None, None, :]
    vals = k * (Sa * (Sb - Sbp) + Sap * (Sb + Sbp)) + Ca * (Cb - Cbp) + Cap * (Cb + Cbp)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return float(vals[idx]), (idx[0] + rows.start,) + tuple(int(x) for x in idx[1:])


def optimize_settings(kappa1: float, kappa2: float, workers: int = 1,
                      coarse_step: float = math.pi / 36, final_step: float = 1e-7
                      ) -> tuple[AngleSettings, float]:
    """Maximize the closed-form Bell value over all four angles.

    A coarse 4-D grid over ``[0, pi)`` picks the starting point (first
    maximum in lexicographic angle order), then coordinate ascent with
    step halving refines it until the step falls below ``final_step``.
    """
    _check_kappas(kappa1, kappa2)
    nodes = np.arange(int(round(math.pi / coarse_step))) * coarse_step
    trig = (np.sin(2 * nodes), np.cos(2 * nodes))
    k = 2 * kappa1 * kappa2
    bounds = np.linspace(0, nodes.size, max(1, workers) + 1).astype(int)
    blocks = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda r: _grid_block(k, trig, r), blocks))
    else:
        results = [_grid_block(k, trig, r) for r in blocks]
    best_val, best_idx = results[0]
    for val, idx in results[1:]:
        if val > best_val:  # strict: earlier block wins ties
            best_val, best_idx = val, idx
    x = [float(nodes[i]) for i in best_idx]

    def f(angles):
        return bell_value_closed(kappa1, kappa2, AngleSettings(*angles))

    fx = f(x)
    step = coarse_step
    while step >= final_step:
        improved = False
        for c in range(4):
            for delta in (step, -step):
                trial = list(x)
                trial[c] += delta
                ft = f(trial)
                if ft > fx:
                    x, fx, improved = trial, ft, True
                    break
        if not improved:
            step /= 2
    return AngleSettings(*x), fx


def horodecki_max(kappa1: float, kappa2: float) -> float:
    """Largest CHSH value reachable by a pure state with these coefficients."""
    return 2.0 * math.sqrt(1.0 + (2.0 * kappa1 * kappa2) ** 2)
