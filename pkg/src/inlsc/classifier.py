"""Sufficient conditions for finite-time blowup of focusing energy-critical data.

A solution blows up if E(u0) < 0, or if 0 <= E(u0) < E(W_{b,cbar}) and
||u0||_{H^1_c} > ||W_{b,cbar}||_{H^1_cbar} with cbar = min(c, 0).  The two norms
live in different spaces on purpose; nothing here reconciles them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import functionals as fn
from .grid import RadialField, RadialGrid
from .ground_state import GroundStateSpec, W_field, identities_report
from .params import ParameterError, ParamSet, validate_wellposed


class Branch(str, Enum):
    NEGATIVE_ENERGY = "negative_energy"
    ABOVE_THRESHOLD = "above_threshold"
    NO_PREDICTION = "no_prediction"


DATA_CLASSES = ("finite_variance", "radial", "neither")


@dataclass(frozen=True)
class Thresholds:
    E_W: float
    K_W: float          # ||W_{b,cbar}||_{H^1_cbar}, the square root of its kinetic term
    c_bar: float


def thresholds(params: ParamSet, grid: RadialGrid, with_tail: bool = True) -> Thresholds:
    """E(W_{b,cbar}) and ||W_{b,cbar}||_{H^1_cbar} by quadrature on ``grid`` (plus tails)."""
    if not params.is_energy_critical:
        raise ParameterError("thresholds need sigma = sigma*")
    c_bar = min(params.c, 0)
    spec = GroundStateSpec(params.d, params.b, c_bar)
    rep = identities_report(spec, grid, with_tail=with_tail)
    return Thresholds(rep.energy, math.sqrt(rep.kinetic), float(c_bar))


@dataclass
class Verdict:
    branch: Branch
    data_class: str
    energy: float
    E_W: float
    norm: float          # ||u0||_{H^1_c}
    K_W: float
    c_bar: float
    notes: list = field(default_factory=list)

    @property
    def predicts_blowup(self) -> bool:
        return self.branch is not Branch.NO_PREDICTION and self.data_class != "neither"

    def summary(self) -> dict:
        return {
            "branch": self.branch.value, "data_class": self.data_class,
            "predicts_blowup": self.predicts_blowup,
            "E_u0": self.energy, "E_W": self.E_W,
            "norm_u0_Hc": self.norm, "norm_W_Hcbar": self.K_W, "c_bar": self.c_bar,
            "notes": "; ".join(self.notes),
        }


def decide(energy: float, norm: float, th: Thresholds) -> Branch:
    if energy < 0:
        return Branch.NEGATIVE_ENERGY
    if energy < th.E_W and norm > th.K_W:
        return Branch.ABOVE_THRESHOLD
    return Branch.NO_PREDICTION


def classify(u0: RadialField, params: ParamSet, data_class: str = "radial",
             th: Thresholds | None = None) -> Verdict:
    """Compare E(u0) and ||u0||_{H^1_c} with the W thresholds.

    The energy uses the focusing sign regardless of ``params.lam``, since the
    blowup criterion concerns the focusing equation.  Thresholds default to W sampled
    on ``u0.grid`` with tail corrections.
    """
    if data_class not in DATA_CLASSES:
        raise ValueError(f"data_class must be one of {DATA_CLASSES}")
    if not params.is_energy_critical:
        raise ParameterError(f"classify needs sigma = sigma* = {params.sigma_star}, got {params.sigma}")
    report = validate_wellposed(params)
    if not report.passed:
        raise ParameterError("parameters outside the local theory: " + ", ".join(
            ch.name for ch in report.checks if not ch.passed))
    focusing = params.replace(lam=-1)
    th = th or thresholds(params, u0.grid)
    kin = fn.kinetic_c(u0, params.c)
    E = fn.energy(u0, focusing)
    norm = math.sqrt(kin)
    notes = []
    if params.c > 0:
        notes.append("c > 0: u0 measured in H^1_c, W in H^1_0")
    if params.lam != -1:
        notes.append("defocusing parameters; verdict refers to the focusing equation")
    return Verdict(decide(E, norm, th), data_class, E, th.E_W, norm, th.K_W, th.c_bar, notes)


@dataclass
class ProbeRow:
    a: float
    eps: float
    kinetic: float
    potential: float
    lhs: float
    neg_margin: float    # -lhs when lhs < 0, else 0

    @property
    def negative(self) -> bool:
        return self.lhs < 0


def probe_lhs(kinetic: float, potential: float, params: ParamSet, eps: float) -> float:
    """8K - 4(d s + 2b)/(s + 2) P + eps K at the energy-critical power s."""
    s, b, d = float(params.sigma_star), float(params.b), params.d
    return 8 * kinetic - 4 * (d * s + 2 * b) / (s + 2) * potential + eps * kinetic


def sharpness_probe(params: ParamSet, grid: RadialGrid, amplitudes=(1.0, 1.05, 1.1, 1.2),
                    epsilons=(0.0, 1e-2, 1e-1), with_tail: bool = True) -> list[ProbeRow]:
    """Sign of 8K - 4(d s+2b)/(s+2) P + eps K at t = 0 for u0 = a W_{b,cbar}.

    K and P of W come from the tail-corrected quadrature and are scaled by
    a^2 and a^{s+2}.
    """
    if not params.is_energy_critical:
        raise ParameterError("sharpness probe needs sigma = sigma*")
    spec = GroundStateSpec(params.d, params.b, min(params.c, 0))
    rep = identities_report(spec, grid, with_tail=with_tail)
    s = float(params.sigma_star)
    rows = []
    for a in amplitudes:
        K = a ** 2 * rep.kinetic
        P = a ** (s + 2) * rep.potential
        for eps in epsilons:
            lhs = probe_lhs(K, P, params, eps)
            rows.append(ProbeRow(a, eps, K, P, lhs, max(-lhs, 0.0)))
    return rows


def scaled_ground_state(params: ParamSet, grid: RadialGrid, a: float, epsilon: float = 1.0) -> RadialField:
    """a W_{b,cbar} sampled on ``grid``."""
    spec = GroundStateSpec(params.d, params.b, min(params.c, 0), epsilon)
    return W_field(spec, grid).scaled(a)
