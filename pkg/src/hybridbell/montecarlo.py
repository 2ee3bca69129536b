"""Seeded simulation of coincidence-counting runs and the resulting estimates.

Random numbers come from Philox streams keyed by ``(seed, stream key,
block index)``.  Events are processed in fixed-size blocks, so any
partition of the blocks over workers sums to the same integers as a
sequential run.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chsh import AngleSettings, BellReport, bell_value
from .errors import InvalidArgumentError
from .hybrid import HybridState, SchmidtForm, check_schmidt
from .protocol import (
    JOINT_ORDER,
    JOINT_SIGNS,
    Calibration,
    calibrate,
    four_photon_pipeline,
    measured_angles,
    singles_from_state,
    strip_polarizer_angle,
)

BLOCK_SIZE = 1 << 16
PORT_TBAR = "T,T_bar"
PORT_ABAR = "T,A_bar"

# first element of every stream key
_QUADRUPLES, _SCAN, _STRIP, _SINGLES = 0, 1, 2, 3


def _generator(seed: int, key: Sequence[int]) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def _check_run(n_events: int, seed: int) -> None:
    if int(n_events) != n_events or n_events <= 0:
        raise InvalidArgumentError(f"n_events must be a positive integer, got {n_events}")
    if int(seed) != seed or seed < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed}")


def _run_blocks(n_events: int, seed: int, key: Sequence[int],
                draw: Callable[[np.random.Generator, int], np.ndarray], workers: int = 1) -> np.ndarray:
    """Sum ``draw(rng, block_events)`` over all event blocks."""
    n_blocks = -(-int(n_events) // BLOCK_SIZE)

    def one(b: int) -> np.ndarray:
        size = min(BLOCK_SIZE, n_events - b * BLOCK_SIZE)
        return np.asarray(draw(_generator(seed, (*key, b)), size), dtype=np.int64)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(n_blocks)))
    else:
        parts = [one(b) for b in range(n_blocks)]
    return np.sum(parts, axis=0)


@dataclass
class CountTable:
    singles: dict[tuple[float, str], int] = field(default_factory=dict)
    quadruples: dict[tuple[float, float], int] = field(default_factory=dict)
    total_quadruples: int = 0
    singles_events: int = 0

    def __post_init__(self):
        for k, v in list(self.singles.items()) + list(self.quadruples.items()):
            if int(v) != v or v < 0:
                raise InvalidArgumentError(f"count {k} = {v} is not a non-negative integer")
            if k in self.quadruples and v > self.total_quadruples:
                raise InvalidArgumentError(f"quadruple count {k} exceeds the total")

    def passed(self, angle: float) -> int:
        return self.singles.get((angle, PORT_TBAR), 0) + self.singles.get((angle, PORT_ABAR), 0)


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n_events: int
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "n_events": self.n_events, "seed": self.seed}


# ------------------------------------------------------------------ singles

def _singles_draw(p: float):
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        passed = rng.binomial(size, p)
        tbar = rng.binomial(passed, 0.5)
        return np.array([tbar, passed - tbar])
    return draw


def _singles_from_probs(alpha: float, probs: tuple[float, float], n_events: int, seed: int,
                        stream: Sequence[int], workers: int) -> CountTable:
    singles = {}
    for sub, (delta, p) in enumerate(zip((alpha, alpha + math.pi / 2), probs)):
        tbar, abar = _run_blocks(n_events, seed, (*stream, sub), _singles_draw(p), workers)
        singles[delta, PORT_TBAR] = int(tbar)
        singles[delta, PORT_ABAR] = int(abar)
    return CountTable(singles=singles, singles_events=n_events)


def simulate_singles(state: HybridState, s: SchmidtForm, alpha: float, n_events: int, seed: int,
                     *, stream: Sequence[int] = (_SINGLES, 0), workers: int = 1) -> CountTable:
    """Singles runs with the auxiliary arm blocked, at ``alpha`` and ``alpha + pi/2``.

    Each of the ``n_events`` pairs per angle passes the mode-t polarizer
    with the state's singles probability and then leaves the splitter in
    either output port with probability 1/2.
    """
    _check_run(n_events, seed)
    check_schmidt(state, s)
    probs = (singles_from_state(state, s, alpha), singles_from_state(state, s, alpha + math.pi / 2))
    probs = tuple(min(max(p, 0.0), 1.0) for p in probs)
    return _singles_from_probs(alpha, probs, n_events, seed, stream, workers)


def singles_estimate(table: CountTable, alpha: float) -> Estimate:
    """Singles probability at ``alpha`` from a table holding both polarizer angles."""
    x, y = table.passed(alpha), table.passed(alpha + math.pi / 2)
    total = x + y
    if total == 0:
        raise InvalidArgumentError(f"no singles recorded at {alpha}")
    p = x / total
    n = table.singles_events
    # X ~ Bin(n, px), Y ~ Bin(n, py) independent; delta method on X / (X + Y)
    var = (y**2 * x * (1 - x / n) + x**2 * y * (1 - y / n)) / total**4
    return Estimate(p, math.sqrt(max(var, 0.0)), n)


# ---------------------------------------------------------------- quadruples

def _quadruple_draw(p_t: float, p_a: float, p_oe: float):
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        passed_t = rng.binomial(size, p_t)
        passed_both = rng.binomial(passed_t, p_a)
        return np.array([rng.binomial(passed_both, p_oe)])
    return draw


def simulate_quadruples(state: HybridState, s: SchmidtForm, alpha: float, beta: float,
                        n_events: int, seed: int, *, strip: float | None = None,
                        stream: Sequence[int] = (_QUADRUPLES, 0), workers: int = 1) -> CountTable:
    """Four-fold coincidence runs with both polarizers and the beam splitter in place.

    Per generated quadruple: the test polarizer passes with P1(alpha), the
    stripping polarizer with P1(s), and the two continuum photons leave in
    different ports with the beam splitter's one-each probability.
    """
    _check_run(n_events, seed)
    res = four_photon_pipeline(state, s, alpha, beta, strip=strip)
    probs = [min(max(p, 0.0), 1.0) for p in (res.P1_alpha, res.P1_s, res.p_one_each)]
    (count,) = _run_blocks(n_events, seed, stream, _quadruple_draw(*probs), workers)
    return CountTable(quadruples={(alpha, beta): int(count)}, total_quadruples=n_events)


# ------------------------------------------------------------ Bell estimate

@dataclass(frozen=True)
class QuadrupleRecord:
    setting_alpha: float
    setting_beta: float
    i: int
    j: int
    polarizer: float
    strip: float
    counts: int
    total: int


@dataclass(frozen=True)
class BellExperiment:
    estimate: Estimate
    analytic: BellReport
    correlations: tuple[Estimate, ...]
    joints: tuple[Estimate, ...]
    calibration: Calibration
    strip_singles: tuple[Estimate, ...]
    records: tuple[QuadrupleRecord, ...]
    seed: int
    n_per_setting: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "analytic": self.analytic.to_dict(),
            "correlations": [c.to_dict() for c in self.correlations],
            "calibration": {"alpha_origin": self.calibration.alpha_origin,
                            "kappa1": self.calibration.kappa1, "kappa2": self.calibration.kappa2,
                            "degenerate": self.calibration.degenerate},
            "seed": self.seed,
            "n_per_setting": self.n_per_setting,
        }

    def write_counts_csv(self, path: str | Path) -> None:
        write_counts_csv(self.records, path)


def write_counts_csv(records: Sequence[QuadrupleRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting_alpha", "setting_beta", "i", "j", "counts", "total"])
        for r in records:
            w.writerow([repr(r.setting_alpha), repr(r.setting_beta), r.i, r.j, r.counts, r.total])


def _calibrate_from_scan(state, s, n_events, seed, scan_points, workers) -> Calibration:
    scan = []
    for k in range(scan_points):
        delta = k * math.pi / scan_points
        table = simulate_singles(state, s, delta, n_events, seed, stream=(_SCAN, k), workers=workers)
        scan.append((delta, singles_estimate(table, delta).value))
    return calibrate(scan, noise_floor=1.0 / math.sqrt(n_events))


def run_bell_experiment(state: HybridState, s: SchmidtForm, settings: AngleSettings,
                        n_per_setting: int, seed: int, *, use_true_kappa: bool = False,
                        scan_points: int = 16, workers: int = 1) -> BellExperiment:
    """Simulate the whole counting experiment and reconstruct the Bell value.

    Calibration scans (auxiliary arm blocked) fix the polarizer origin and
    estimated Schmidt coefficients; these set the stripping angles.  Each
    stripping angle gets its own singles run for P1(s), and each of the 16
    (setting, i, j) combinations its own four-fold run of ``n_per_setting``
    quadruples.  The standard error is first-order propagation over all
    independent binomial counts.
    """
    _check_run(n_per_setting, seed)
    check_schmidt(state, s)
    if use_true_kappa:
        cal = Calibration(0.0, s.kappa1, s.kappa2)
    else:
        cal = _calibrate_from_scan(state, s, n_per_setting, seed, scan_points, workers)
    origin = cal.alpha_origin

    strip_index: dict[float, int] = {}
    strip_est: list[Estimate] = []
    records: list[QuadrupleRecord] = []
    joint_terms = []  # (setting index, sign, ratio, strip index)
    for m, (alpha, beta) in enumerate(settings.pairs()):
        for i, j in JOINT_ORDER:
            a, b = measured_angles(i, j, alpha, beta)
            strip = strip_polarizer_angle(b, cal.kappa1, cal.kappa2) + origin
            if strip not in strip_index:
                k = strip_index[strip] = len(strip_index)
                table = simulate_singles(state, s, strip, n_per_setting, seed, stream=(_STRIP, k), workers=workers)
                strip_est.append(singles_estimate(table, strip))
            run = len(records)
            table = simulate_quadruples(state, s, a + origin, b, n_per_setting, seed, strip=strip,
                                        stream=(_QUADRUPLES, run), workers=workers)
            counts = table.quadruples[a + origin, b]
            records.append(QuadrupleRecord(alpha, beta, i, j, a + origin, strip, counts, n_per_setting))
            joint_terms.append((m, JOINT_SIGNS[i, j], counts / n_per_setting, strip_index[strip]))

    n = n_per_setting
    bell_signs = (1.0, -1.0, 1.0, 1.0)
    joints, corr_val = [], np.zeros(4)
    # first-order sensitivities of each correlation to the independent inputs
    grad_r = np.zeros((4, len(joint_terms)))
    grad_p1s = np.zeros((4, len(strip_est)))
    var_r = np.zeros(len(joint_terms))
    for idx, (m, sign, r, k) in enumerate(joint_terms):
        p1s = strip_est[k].value
        if p1s <= 0:
            raise InvalidArgumentError("a stripping singles run recorded no passes")
        p = 2.0 * r / p1s
        var_r[idx] = r * (1.0 - r) / n
        joints.append(Estimate(p, math.sqrt((2.0 / p1s) ** 2 * var_r[idx]), n, seed))
        corr_val[m] += sign * p
        grad_r[m, idx] = sign * 2.0 / p1s
        grad_p1s[m, k] -= sign * p / p1s
    var_p1s = np.array([e.std_error**2 for e in strip_est])

    def variance(weights: np.ndarray) -> float:
        return float((weights @ grad_r) ** 2 @ var_r + (weights @ grad_p1s) ** 2 @ var_p1s)

    signs = np.array(bell_signs)
    bell = float(signs @ corr_val)
    correlations = tuple(Estimate(float(corr_val[m]), math.sqrt(variance(np.eye(4)[m])), n, seed)
                         for m in range(4))
    return BellExperiment(
        estimate=Estimate(bell, math.sqrt(variance(signs)), n, seed),
        analytic=bell_value(state, s, settings),
        correlations=correlations,
        joints=tuple(joints),
        calibration=cal,
        strip_singles=tuple(strip_est),
        records=tuple(records),
        seed=seed,
        n_per_setting=n,
    )


def estimate_bell(state: HybridState, s: SchmidtForm, settings: AngleSettings, n_per_setting: int,
                  seed: int, **kwargs) -> tuple[Estimate, BellReport]:
    exp = run_bell_experiment(state, s, settings, n_per_setting, seed, **kwargs)
    return exp.estimate, exp.analytic
