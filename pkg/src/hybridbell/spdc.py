"""Down-conversion source model: joint spectra, filtering, and the hybrid state.

Two crystals (type I giving HH pairs, type II giving VH pairs) share one
pump.  Each joint spectral amplitude is a Gaussian pump envelope in
``w1 + w2`` times Gaussian phase matching in each frequency.  Filtering the
signal photon at ``w0`` leaves a polarization-spectrum entangled state of
the idler.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .continuum import Bundle, Grid, normalize
from .errors import DegenerateInputError, InvalidArgumentError
from .hybrid import HybridState, grid_from_config


@dataclass(frozen=True)
class CrystalSpec:
    center1: float
    center2: float
    width1: float
    width2: float
    weight: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "CrystalSpec":
        try:
            return cls(float(d["center1"]), float(d["center2"]), float(d["width1"]),
                       float(d["width2"]), float(d.get("weight", 1.0)))
        except KeyError as exc:
            raise InvalidArgumentError(f"crystal spec is missing {exc}") from exc


@dataclass(frozen=True)
class SourceModel:
    pump_center: float
    pump_width: float
    crystal1: CrystalSpec  # type I: |H>_t |H>_tbar
    crystal2: CrystalSpec  # type II: |V>_t |H>_tbar
    grid1: Grid
    grid2: Grid


@dataclass(frozen=True, eq=False)
class BiAmplitude:
    grid1: Grid
    grid2: Grid
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        shape = (self.grid1.n, self.grid2.n)
        if self.phi.shape != shape or self.psi.shape != shape:
            raise InvalidArgumentError("joint amplitude matrices do not match the grids")

    def norm_sq(self) -> float:
        w = np.outer(self.grid1.weights, self.grid2.weights)
        return float(np.sum(w * (np.abs(self.phi) ** 2 + np.abs(self.psi) ** 2)))


class FilterShape(str, Enum):
    GAUSSIAN = "gaussian"
    RECTANGULAR = "rectangular"


@dataclass(frozen=True)
class FilterSpec:
    """Signal-arm interference filter.

    ``bandwidth`` is the standard deviation of a Gaussian amplitude response
    or the full width of a rectangular one.
    """

    omega0: float
    bandwidth: float
    shape: FilterShape = FilterShape.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "shape", FilterShape(self.shape))
        if not self.bandwidth > 0:
            raise InvalidArgumentError(f"filter bandwidth must be positive, got {self.bandwidth}")

    def response(self, omega: np.ndarray) -> np.ndarray:
        d = np.asarray(omega) - self.omega0
        if self.shape is FilterShape.GAUSSIAN:
            return np.exp(-d**2 / (2 * self.bandwidth**2))
        return (np.abs(d) <= self.bandwidth / 2).astype(float)


def _gauss(x, width):
    return np.exp(-x**2 / (4 * width**2))


def _crystal_amplitude(model: SourceModel, c: CrystalSpec) -> np.ndarray:
    for w in (c.width1, c.width2):
        if not w > 0:
            raise InvalidArgumentError("phase-matching widths must be positive")
    w1 = model.grid1.points[:, None]
    w2 = model.grid2.points[None, :]
    amp = (_gauss(w1 + w2 - model.pump_center, model.pump_width)
           * _gauss(w1 - c.center1, c.width1) * _gauss(w2 - c.center2, c.width2))
    wts = np.outer(model.grid1.weights, model.grid2.weights)
    nsq = np.sum(wts * amp**2)
    if not nsq > 0:
        raise InvalidArgumentError("crystal spectrum has no support on the grid")
    return c.weight * amp / math.sqrt(nsq)


def generate_joint_amplitudes(model: SourceModel) -> BiAmplitude:
    """Jointly normalized type-I (``phi``) and type-II (``psi``) amplitudes.

    Each crystal's spectrum is first normalized on its own and scaled by its
    relative ``weight``.
    """
    if not model.pump_width > 0:
        raise InvalidArgumentError("pump width must be positive")
    if model.crystal1.weight < 0 or model.crystal2.weight < 0:
        raise InvalidArgumentError("crystal weights must be non-negative")
    phi = _crystal_amplitude(model, model.crystal1)
    psi = _crystal_amplitude(model, model.crystal2)
    amp = BiAmplitude(model.grid1, model.grid2, phi.astype(complex), psi.astype(complex))
    nsq = amp.norm_sq()
    if not nsq > 0:
        raise InvalidArgumentError("both crystal weights are zero")
    scale = 1.0 / math.sqrt(nsq)
    return BiAmplitude(model.grid1, model.grid2, amp.phi * scale, amp.psi * scale)


@dataclass(frozen=True, eq=False)
class FilteredPair:
    phi: Bundle
    psi: Bundle
    heralding_probability: float


def apply_filter(amp: BiAmplitude, filt: FilterSpec) -> FilteredPair:
    """Integrate the signal frequency against the conjugate filter response.

    The returned idler bundles keep their relative (unnormalized) weight.
    ``heralding_probability`` is the joint probability mass transmitted by
    the filter, ``sum |f(w1 - w0)|^2 (|phi|^2 + |psi|^2)``.
    """
    lo, hi = amp.grid1.span
    if not lo <= filt.omega0 <= hi:
        raise InvalidArgumentError(f"filter center {filt.omega0} lies outside the signal grid")
    f = filt.response(amp.grid1.points)
    kernel = amp.grid1.weights * np.conj(f)
    phi_w0 = kernel @ amp.phi
    psi_w0 = kernel @ amp.psi
    wts = np.outer(amp.grid1.weights * np.abs(f) ** 2, amp.grid2.weights)
    herald = float(np.sum(wts * (np.abs(amp.phi) ** 2 + np.abs(amp.psi) ** 2)))
    return FilteredPair(Bundle(amp.grid2, phi_w0), Bundle(amp.grid2, psi_w0), herald)


def to_hybrid_state(phi_w0: Bundle, psi_w0: Bundle) -> HybridState:
    """Read off ``cos(theta) h = phi_w0`` and ``sin(theta) v = psi_w0`` up to overall scale."""
    a, b = phi_w0.norm(), psi_w0.norm()
    if a == 0 and b == 0:
        raise DegenerateInputError("filtered state is empty")
    theta = math.atan2(b, a)
    h = normalize(phi_w0) if a > 0 else None
    v = normalize(psi_w0) if b > 0 else None
    # the partner of a vanishing branch is irrelevant; reuse the other one
    return HybridState(theta, h or v, v or h)


# ------------------------------------------------------------------ config

def default_config() -> dict:
    with resources.files("hybridbell").joinpath("data/spdc_default.json").open() as fh:
        return json.load(fh)


def model_from_config(cfg: dict) -> tuple[SourceModel, FilterSpec]:
    """Parse ``{pump, crystal1, crystal2, filter, grids}`` into a model and filter."""
    try:
        grids = cfg.get("grids", {})
        grid1 = grid_from_config({"n": grids.get("n1", 512), "range": grids.get("range1", (-8.0, 8.0)),
                                  "kind": grids.get("kind", "uniform-trapezoid")})
        grid2 = grid_from_config({"n": grids.get("n2", 512), "range": grids.get("range2", (-8.0, 8.0)),
                                  "kind": grids.get("kind", "uniform-trapezoid")})
        pump = cfg["pump"]
        model = SourceModel(float(pump.get("center", 0.0)), float(pump["width"]),
                            CrystalSpec.from_dict(cfg["crystal1"]), CrystalSpec.from_dict(cfg["crystal2"]),
                            grid1, grid2)
        fcfg = cfg.get("filter", {})
        lo, hi = grid1.span
        filt = FilterSpec(float(fcfg.get("center", (lo + hi) / 2)),
                          float(fcfg.get("bandwidth", 0.05 * (hi - lo))),
                          fcfg.get("shape", "gaussian"))
    except KeyError as exc:
        raise InvalidArgumentError(f"source config is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"malformed source config: {exc}") from exc
    return model, filt


def state_from_source(cfg: dict) -> tuple[HybridState, FilteredPair]:
    model, filt = model_from_config(cfg)
    filtered = apply_filter(generate_joint_amplitudes(model), filt)
    return to_hybrid_state(filtered.phi, filtered.psi), filtered


def load_config(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
