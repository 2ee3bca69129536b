"""Indirect measurement of the continuum party with an auxiliary photon pair.

A test pair and an identical auxiliary pair are each filtered by a
polarizer.  The auxiliary polarizer sits at a *stripping* angle chosen so
that its continuum partner collapses onto the rotated bundle ``f1^beta``.
The two continuum photons then meet on a 50:50 beam splitter; a
one-photon-per-port coincidence survives only through the ``f2^beta``
component of the test photon, which realises a projection in the
continuum space without any operator acting on it directly.

Every joint probability is measured as a "(1, 2)-type" quantity: the other
three follow from shifting the polarizer and/or bundle angle by pi/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .chsh import BELL_SIGNS, AngleSettings, make_report, rotated_f, rotated_u
from .continuum import Bundle, inner, is_normalized
from .errors import DegenerateInputError, InvalidArgumentError
from .hybrid import PRODUCT_STATE_TOL, HybridState, SchmidtForm, check_schmidt

HALF_PI = math.pi / 2
STRIP_POLE_MARGIN = 1e-6


class ModeLabel(str, Enum):
    t = "t"
    t_bar = "t_bar"
    a = "a"
    a_bar = "a_bar"
    T = "T"
    T_bar = "T_bar"
    A = "A"
    A_bar = "A_bar"


# ---------------------------------------------------------------- singles

def singles_probability(alpha: float, kappa1: float, kappa2: float) -> float:
    """Probability that the mode-t polarizer at ``alpha`` passes the photon."""
    return kappa1**2 * math.cos(alpha) ** 2 + kappa2**2 * math.sin(alpha) ** 2


def singles_from_state(state: HybridState, s: SchmidtForm, alpha: float) -> float:
    r = state.project_polarization(rotated_u(s, alpha, 1))
    return inner(r, r).real


def singles_from_counts(passed: int | float, passed_orthogonal: int | float) -> float:
    """Singles estimate from coincidence counts at ``alpha`` and ``alpha + pi/2``.

    Each argument is the total over both continuum output ports.
    """
    total = passed + passed_orthogonal
    if total <= 0:
        raise InvalidArgumentError("no coincidences recorded at either polarizer angle")
    return passed / total


@dataclass(frozen=True)
class Calibration:
    alpha_origin: float
    kappa1: float
    kappa2: float
    degenerate: bool = False


def calibrate(scan: Iterable[tuple[float, float]], noise_floor: float = 1e-9) -> Calibration:
    """Locate the polarizer origin and Schmidt coefficients from a singles scan.

    Fits ``P(delta) = c0 + a cos(2 delta) + b sin(2 delta)`` by least squares.
    The origin is the maximum of the fit and ``kappa1^2`` the fitted maximum;
    ``kappa2^2 = 1 - kappa1^2``.  If the modulation depth is below
    ``noise_floor`` the origin is arbitrary: the result carries
    ``degenerate=True`` with origin 0 and equal coefficients.
    """
    data = np.asarray(list(scan), dtype=float).reshape(-1, 2)
    if data.shape[0] < 8:
        raise InvalidArgumentError(f"calibration scan needs >= 8 points, got {data.shape[0]}")
    angles, probs = data[:, 0], data[:, 1]
    if np.ptp(angles) < HALF_PI - 1e-12:
        raise InvalidArgumentError("calibration scan must cover at least pi/2 of polarizer angle")
    design = np.column_stack([np.ones_like(angles), np.cos(2 * angles), np.sin(2 * angles)])
    (c0, a, b), *_ = np.linalg.lstsq(design, probs, rcond=None)
    depth = math.hypot(a, b)
    if depth < noise_floor:
        k = 1 / math.sqrt(2)
        return Calibration(0.0, k, k, degenerate=True)
    origin = (0.5 * math.atan2(b, a)) % math.pi
    k1sq = min(max(c0 + depth, 0.5), 1.0)
    return Calibration(origin, math.sqrt(k1sq), math.sqrt(1.0 - k1sq))


# ------------------------------------------------------- polarizer projection

@dataclass(frozen=True)
class ProjectedPairState:
    """Mode-t polarizer outcome: ``prefactor * (c11 f1^beta + c12 f2^beta)``."""

    prefactor: float
    polarizer_angle: float
    beta: float
    c11: complex
    c12: complex

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.c11, self.c12], dtype=complex)


def _project(state: HybridState, s: SchmidtForm, angle: float, beta: float) -> ProjectedPairState:
    remainder = state.project_polarization(rotated_u(s, angle, 1))
    p1 = inner(remainder, remainder).real
    if p1 <= 1e-14:
        raise DegenerateInputError(f"polarizer at {angle} passes nothing")
    norm = math.sqrt(p1)
    c11 = inner(rotated_f(s, beta, 1), remainder) / norm
    c12 = inner(rotated_f(s, beta, 2), remainder) / norm
    return ProjectedPairState(norm, angle, beta, c11, c12)


def project_polarizer(state: HybridState, s: SchmidtForm, alpha: float, beta: float) -> ProjectedPairState:
    """Project photon A onto ``u1^alpha`` and expand its partner over ``{f1^beta, f2^beta}``."""
    check_schmidt(state, s)
    return _project(state, s, alpha, beta)


def projection_coefficients_closed(alpha: float, beta: float, kappa1: float, kappa2: float
                                   ) -> tuple[float, float, float]:
    """(P1(alpha), c11, c12) from the Schmidt coefficients alone."""
    ca, sa, cb, sb = math.cos(alpha), math.sin(alpha), math.cos(beta), math.sin(beta)
    p1 = singles_probability(alpha, kappa1, kappa2)
    root = math.sqrt(p1)
    return p1, (kappa1 * ca * cb + kappa2 * sa * sb) / root, (-kappa1 * ca * sb + kappa2 * sa * cb) / root


# --------------------------------------------------------------- stripping

def stripping_angle(beta: float, kappa1: float, kappa2: float) -> float:
    """Polarizer angle ``s`` with ``kappa1 tan(beta) = kappa2 tan(s)``, in (-pi/2, pi/2)."""
    if kappa2 < PRODUCT_STATE_TOL:
        raise DegenerateInputError("stripping is undefined for a product state (kappa2 = 0)")
    if abs(beta % math.pi - HALF_PI) <= STRIP_POLE_MARGIN:
        raise InvalidArgumentError(f"beta = {beta} is too close to pi/2 (mod pi)")
    return math.atan(kappa1 / kappa2 * math.tan(beta))


def strip_polarizer_angle(beta: float, kappa1: float, kappa2: float) -> float:
    """Stripping polarizer angle that stays defined at ``beta = pi/2`` (mod pi).

    Same solution as :func:`stripping_angle` modulo pi, written with
    ``atan2`` so the pole maps continuously to ``s = pi/2``.  Result in
    (-pi/2, pi/2].
    """
    if kappa2 < PRODUCT_STATE_TOL:
        raise DegenerateInputError("stripping is undefined for a product state (kappa2 = 0)")
    s = math.atan2(kappa1 * math.sin(beta), kappa2 * math.cos(beta))
    if s > HALF_PI:
        s -= math.pi
    elif s <= -HALF_PI:
        s += math.pi
    return s


@dataclass(frozen=True)
class StrippingConfig:
    s: float
    s_prime: float
    beta: float
    beta_prime: float
    kappa1: float
    kappa2: float

    def to_dict(self) -> dict:
        return {"s": self.s, "s_prime": self.s_prime}


def stripping_config(settings: AngleSettings, kappa1: float, kappa2: float) -> StrippingConfig:
    return StrippingConfig(strip_polarizer_angle(settings.beta, kappa1, kappa2),
                           strip_polarizer_angle(settings.beta_prime, kappa1, kappa2),
                           settings.beta, settings.beta_prime, kappa1, kappa2)


# ------------------------------------------------------------ beam splitter

# single-photon transfer to output modes (T_bar, A_bar)
_BS_FROM_TBAR = np.array([1j, 1.0]) / math.sqrt(2)
_BS_FROM_ABAR = np.array([1.0, 1j]) / math.sqrt(2)


@dataclass(frozen=True)
class BeamSplitterOutput:
    """Two-boson state after the beam splitter.

    ``amplitudes[p, j, q, k]`` is the symmetrized coefficient of
    ``a+_{p,j} a+_{q,k}|0>`` with ports ``p, q`` in (T_bar, A_bar) and
    bundle indices ``j, k``.  ``one_each[j, k]`` is the amplitude of the
    normalized state ``|f_j>_T_bar |f_k>_A_bar``.
    """

    amplitudes: np.ndarray
    one_each: np.ndarray
    p_one_each: float
    p_both_tbar: float
    p_both_abar: float


def _port_probability(sym: np.ndarray) -> float:
    # both photons in one port: |1_j 1_k> (j != k) has prob 4|S_jk|^2, |2_j> has 2|S_jj|^2
    off = np.abs(sym) ** 2
    return float(2.0 * np.sum(off))


def beamsplitter(in_tbar: Sequence[complex], in_abar: Sequence[complex]) -> BeamSplitterOutput:
    """Send one photon in each input port of a lossless 50:50 splitter.

    Inputs are coefficient vectors over a common orthonormal bundle basis.
    The output amplitude tensor is built from the single-photon transfer
    rules and explicitly symmetrized over the two bosons.
    """
    x = np.asarray(in_tbar, dtype=complex)
    y = np.asarray(in_abar, dtype=complex)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidArgumentError("beam-splitter inputs must be equal-length coefficient vectors")
    for name, vec in (("t_bar", x), ("a_bar", y)):
        if abs(np.vdot(vec, vec).real - 1.0) > 1e-10:
            raise InvalidArgumentError(f"{name} input is not normalized")
    out_t = np.multiply.outer(_BS_FROM_TBAR, x)  # (port, mode)
    out_a = np.multiply.outer(_BS_FROM_ABAR, y)
    raw = np.multiply.outer(out_t, out_a)  # (p, j, q, k), first index from t_bar photon
    sym = 0.5 * (raw + raw.transpose(2, 3, 0, 1))
    one_each = 2.0 * sym[0, :, 1, :]
    p_one = float(np.sum(np.abs(one_each) ** 2))
    return BeamSplitterOutput(sym, one_each, p_one,
                              _port_probability(sym[0, :, 0, :]), _port_probability(sym[1, :, 1, :]))


def hom_coincidence(x: Bundle, y: Bundle) -> float:
    """One-photon-per-port probability for normalized bundles ``x`` and ``y``."""
    if not (is_normalized(x) and is_normalized(y)):
        raise InvalidArgumentError("HOM inputs must be normalized bundles")
    return (1.0 - abs(inner(x, y)) ** 2) / 2.0


# -------------------------------------------------------- four-photon events

@dataclass(frozen=True)
class FourPhotonResult:
    alpha: float
    beta: float
    strip: float
    P4: float
    P1_alpha: float
    P1_s: float
    c11: complex
    c12: complex
    p_one_each: float


def _require_nondegenerate(s: SchmidtForm) -> None:
    if s.degenerate or s.kappa2 < PRODUCT_STATE_TOL:
        raise DegenerateInputError("four-photon protocol needs an entangled state (kappa2 > 0)")


def four_photon_probability(state: HybridState, s: SchmidtForm, alpha: float, beta: float) -> float:
    """Four-fold coincidence probability ``P1(alpha) P1(s) |c12|^2 / 2``."""
    _require_nondegenerate(s)
    check_schmidt(state, s)
    strip = strip_polarizer_angle(beta, s.kappa1, s.kappa2)
    p1a, _, c12 = projection_coefficients_closed(alpha, beta, s.kappa1, s.kappa2)
    return p1a * singles_probability(strip, s.kappa1, s.kappa2) * c12**2 / 2.0


def four_photon_pipeline(state: HybridState, s: SchmidtForm, alpha: float, beta: float,
                         strip: float | None = None) -> FourPhotonResult:
    """Run projection, stripping, beam splitter and post-selection on the grid.

    ``strip`` overrides the auxiliary polarizer angle (e.g. one computed from
    estimated rather than true Schmidt coefficients).
    """
    _require_nondegenerate(s)
    check_schmidt(state, s)
    if strip is None:
        strip = strip_polarizer_angle(beta, s.kappa1, s.kappa2)
    test = _project(state, s, alpha, beta)
    aux = _project(state, s, strip, beta)
    bs = beamsplitter(test.coefficients, aux.coefficients)
    p1a, p1s = test.prefactor**2, aux.prefactor**2
    return FourPhotonResult(alpha, beta, strip, p1a * p1s * bs.p_one_each, p1a, p1s,
                            test.c11, test.c12, bs.p_one_each)


def reconstruct_joint(counts4: int | float, total4: int | float, P1_s: float) -> float:
    """Joint probability ``(2 / P1(s)) * counts4 / total4``.

    Exact probabilities may be passed in place of counts (``total4 = 1``).
    """
    if not total4 > 0:
        raise InvalidArgumentError("total four-photon count must be positive")
    if not 0 < P1_s <= 1:
        raise InvalidArgumentError(f"P1(s) must lie in (0, 1], got {P1_s}")
    if counts4 < 0:
        raise InvalidArgumentError("counts must be non-negative")
    return 2.0 / P1_s * counts4 / total4


# ---------------------------------------------------------- angle bookkeeping

JOINT_ORDER = ((1, 1), (1, 2), (2, 1), (2, 2))
JOINT_SIGNS = {(1, 1): 1.0, (1, 2): -1.0, (2, 1): -1.0, (2, 2): 1.0}


def measured_angles(i: int, j: int, alpha: float, beta: float) -> tuple[float, float]:
    """Polarizer and bundle angles at which P_ij(alpha, beta) is measured as a (1,2) quantity.

    ``u2^alpha = u1^(alpha + pi/2)`` and ``f2^(beta + pi/2) = -f1^beta``.
    """
    if (i, j) not in JOINT_SIGNS:
        raise InvalidArgumentError(f"no joint probability ({i}, {j})")
    a = alpha + (HALF_PI if i == 2 else 0.0)
    b = beta + (HALF_PI if j == 1 else 0.0)
    return a, b


def full_correlation(state: HybridState, s: SchmidtForm, alpha: float, beta: float) -> float:
    """Correlation assembled from four reconstructed joints (exact probabilities)."""
    total = 0.0
    for i, j in JOINT_ORDER:
        a, b = measured_angles(i, j, alpha, beta)
        res = four_photon_pipeline(state, s, a, b)
        total += JOINT_SIGNS[i, j] * reconstruct_joint(res.P4, 1.0, res.P1_s)
    return total


@dataclass(frozen=True)
class ProtocolReport:
    settings: AngleSettings
    stripping: StrippingConfig
    per_setting: tuple[dict, ...]
    correlations: tuple[float, float, float, float]
    bell_value: float
    kappa1: float
    kappa2: float

    def to_dict(self) -> dict:
        return {"settings": self.settings.to_dict(), "stripping": self.stripping.to_dict(),
                "kappa1": self.kappa1, "kappa2": self.kappa2,
                "per_setting": list(self.per_setting), "correlations": list(self.correlations),
                "bell_value": self.bell_value}


def run_protocol(state: HybridState, s: SchmidtForm, settings: AngleSettings) -> ProtocolReport:
    """Exact-probability run of the full protocol at all four CHSH settings."""
    _require_nondegenerate(s)
    rows = []
    correlations = []
    for alpha, beta in settings.pairs():
        corr = 0.0
        for i, j in JOINT_ORDER:
            a, b = measured_angles(i, j, alpha, beta)
            res = four_photon_pipeline(state, s, a, b)
            p = reconstruct_joint(res.P4, 1.0, res.P1_s)
            corr += JOINT_SIGNS[i, j] * p
            rows.append({"alpha": alpha, "beta": beta, "i": i, "j": j,
                         "measured_alpha": a, "measured_beta": b, "strip": res.strip,
                         "P4": res.P4, "P1_alpha": res.P1_alpha, "P1_s": res.P1_s,
                         "reconstructed_P": p})
        correlations.append(corr)
    report = make_report(correlations, s.kappa_product, settings)
    return ProtocolReport(settings, stripping_config(settings, s.kappa1, s.kappa2), tuple(rows),
                          report.correlations, report.bell_value, s.kappa1, s.kappa2)


def bell_from_correlations(correlations: Sequence[float]) -> float:
    return float(sum(sign * c for sign, c in zip(BELL_SIGNS, correlations)))
