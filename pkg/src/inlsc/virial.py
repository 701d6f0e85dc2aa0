"""Variance, the virial right-hand side and its localized version.

For focusing data the variance V(t) = int |x|^2 |u|^2 satisfies

    V'' = 8 ||u||_{H^1_c}^2 - 4 (d sigma + 2b)/(sigma + 2) int |x|^-b |u|^{sigma+2}.

The localized form replaces |x|^2 by phi_R(x) = R^2 theta(|x|/R) with the
piecewise cutoff theta' = 2r on [0,1], 2r(2-r)^2 on [1,2], 0 beyond.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fn
from .functionals import variance  # noqa: F401  (re-exported)
from .grid import RadialField, RadialGrid
from .params import ParamSet

# theta(2) = 1 + int_1^2 2r(2-r)^2 dr = 11/6
THETA_PLATEAU = 11.0 / 6.0


def _vectorised(func):
    def wrapper(r):
        arr = np.asarray(r, dtype=float)
        out = func(np.atleast_1d(arr))
        return float(out[0]) if arr.ndim == 0 else out
    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


def _theta_mid(s):
    # antiderivative of 2s(2-s)^2 = 8s - 8s^2 + 2s^3, anchored at theta(1) = 1
    prim = 4 * s ** 2 - 8 * s ** 3 / 3 + s ** 4 / 2
    return prim - 5.0 / 6.0


@_vectorised
def theta(r):
    """theta(r): r^2 on [0,1], the integral of 2s(2-s)^2 on [1,2], constant after."""
    return np.where(r <= 1, r ** 2, np.where(r < 2, _theta_mid(np.clip(r, 1, 2)), THETA_PLATEAU))


@_vectorised
def theta_p(r):
    return np.where(r <= 1, 2 * r, np.where(r < 2, 2 * r * (2 - r) ** 2, 0.0))


@_vectorised
def theta_p_over_r(r):
    """theta'(r)/r in closed form, so that it is exactly 2 on [0, 1]."""
    return np.where(r <= 1, 2.0, np.where(r < 2, 2 * (2 - r) ** 2, 0.0))


@_vectorised
def theta_pp(r):
    """theta''; at the kinks r = 1, 2 the left value is used."""
    return np.where(r <= 1, 2.0, np.where(r <= 2, 2 * (2 - r) * (2 - 3 * r), 0.0))


@dataclass(frozen=True)
class CutoffSpec:
    """phi_R(x) = R^2 theta(|x|/R)."""

    R: float

    def __post_init__(self):
        if not self.R > 1:
            raise ValueError("cutoff radius R must exceed 1")

    def phi(self, r):
        return self.R ** 2 * theta(np.asarray(r) / self.R)

    def dphi(self, r):
        return self.R * theta_p(np.asarray(r) / self.R)

    def dphi_over_r(self, r):
        return theta_p_over_r(np.asarray(r) / self.R)

    def d2phi(self, r):
        return theta_pp(np.asarray(r) / self.R)

    def laplacian(self, r, d: int):
        """Delta phi_R = phi'' + (d-1) phi'/r."""
        return self.d2phi(r) + (d - 1) * self.dphi_over_r(r)


def virial_rhs(u: RadialField, params: ParamSet, gradient: str = "faces") -> float:
    """8 kinetic_c - 4(d sigma + 2b)/(sigma + 2) potential (focusing form)."""
    sig, b, d = float(params.sigma), float(params.b), params.d
    kin = fn.kinetic_c(u, params.c, gradient)
    pot = fn.potential_term(u, b, sig)
    return 8.0 * kin - 4.0 * (d * sig + 2 * b) / (sig + 2) * pot


def virial_rhs_energy_form(u: RadialField, params: ParamSet, gradient: str = "faces") -> float:
    """4(d sigma + 2b) E - 2(d sigma - 4 + 2b) kinetic_c, with E the focusing energy."""
    sig, b, d = float(params.sigma), float(params.b), params.d
    kin = fn.kinetic_c(u, params.c, gradient)
    pot = fn.potential_term(u, b, sig)
    E = 0.5 * kin - pot / (sig + 2)
    return 4 * (d * sig + 2 * b) * E - 2 * (d * sig - 4 + 2 * b) * kin


def _terms(u: RadialField, params: ParamSet, qphi_n, d2phi_f, lap_n, bilap_n) -> dict:
    """The five integrals of the radial localized identity; ``qphi_n`` holds phi'/r."""
    g = u.grid
    sig, b, c = float(params.sigma), float(params.b), float(params.c)
    a2 = u.abs2
    du = g.face_diff(u.values)
    dens = fn.potential_density(u, sig)
    return {
        "bilaplacian": -g.integrate(bilap_n * a2),
        "kinetic": 4.0 * float(np.sum(g.face_weights * d2phi_f * (du.real ** 2 + du.imag ** 2))),
        "hardy": 4.0 * c * g.integrate(qphi_n * a2, 2),
        "potential_lap": -(2 * sig / (sig + 2)) * g.integrate(lap_n * dens, b),
        "potential_grad": -(4 * b / (sig + 2)) * g.integrate(qphi_n * dens, b),
    }


def _cutoff_samples(cut: CutoffSpec, grid: RadialGrid):
    r = grid.nodes
    lap = cut.laplacian(r, grid.d)
    # Delta^2 phi = -(-Delta)(Delta phi); Neumann closure since Delta phi is flat at r_max
    bilap = -grid.neg_laplacian(lap, outer="neumann")
    return cut.dphi_over_r(r), cut.d2phi(grid.faces), lap, bilap


def localized_virial_terms(u: RadialField, params: ParamSet, cut: CutoffSpec) -> dict:
    return _terms(u, params, *_cutoff_samples(cut, u.grid))


def localized_virial_rhs(u: RadialField, params: ParamSet, cut: CutoffSpec) -> float:
    """-int D^2phi |u|^2 + 4 int phi''|u_r|^2 + 4c int phi'/r^3 |u|^2
    - 2 sigma/(sigma+2) int Dphi r^-b |u|^{sigma+2} - 4b/(sigma+2) int phi' r^{-b-1} |u|^{sigma+2}."""
    return math.fsum(localized_virial_terms(u, params, cut).values())


@dataclass
class CorrectionReport:
    localized: float
    standard: float
    corrections: dict
    bound: float

    @property
    def identity_gap(self) -> float:
        """localized - (standard + sum of corrections); zero up to round-off."""
        return self.localized - (self.standard + math.fsum(self.corrections.values()))

    @property
    def bound_holds(self) -> bool:
        tol = 1e-10 * max(1.0, abs(self.standard))
        return self.localized <= self.bound + tol


def correction_report(u: RadialField, params: ParamSet, cut: CutoffSpec) -> CorrectionReport:
    """Split the localized RHS into the standard RHS plus terms living where phi_R != |x|^2.

    The kinetic correction 4 int (phi'' - 2)|u_r|^2 is non-positive, so dropping
    it gives an upper bound for the localized RHS.
    """
    g = u.grid
    loc = _terms(u, params, *_cutoff_samples(cut, g))
    std = _terms(u, params, np.full(g.n, 2.0), np.full(len(g.faces), 2.0), np.full(g.n, 2.0 * g.d), np.zeros(g.n))
    corrections = {k: loc[k] - std[k] for k in loc}
    standard = math.fsum(std.values())
    bound = standard + math.fsum(v for k, v in corrections.items() if k != "kinetic")
    return CorrectionReport(math.fsum(loc.values()), standard, corrections, bound)


@dataclass
class CutoffCheck:
    R: float
    margins: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(m >= -1e-12 for m in self.margins.values())


def cutoff_check(cut: CutoffSpec, grid: RadialGrid) -> CutoffCheck:
    """Worst margins of 2 - phi'', 2 - phi'/r, 2d - Delta phi and 2 - theta'' over the nodes."""
    r = grid.nodes
    d2 = cut.d2phi(r)
    margins = {
        "2-phi''": float(np.min(2 - d2)),
        "2-phi'/r": float(np.min(2 - cut.dphi_over_r(r))),
        "2d-lap_phi": float(np.min(2 * grid.d - cut.laplacian(r, grid.d))),
        "2-theta''": float(np.min(2 - theta_pp(r / cut.R))),
    }
    return CutoffCheck(cut.R, margins)


@dataclass
class ConsistencyReport:
    times: np.ndarray
    d2v: np.ndarray
    rhs: np.ndarray
    max_abs: float
    max_rel: float     # max |d2V - RHS| / max |RHS| over the window


def virial_consistency(series, window: tuple[float, float] | None = None) -> ConsistencyReport:
    """Central second difference of the variance against the recorded RHS.

    ``series`` is a TimeSeries (or a mapping of columns) with uniformly spaced
    ``t`` and columns ``variance`` and ``virial_rhs``.  Only interior samples
    inside ``window`` are compared.
    """
    col = series.column if hasattr(series, "column") else series.__getitem__
    t = np.asarray(col("t"), dtype=float)
    V = np.asarray(col("variance"), dtype=float)
    rhs = np.asarray(col("virial_rhs"), dtype=float)
    if len(t) < 3:
        raise ValueError("virial consistency needs at least 3 samples")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("samples must be uniformly spaced in time")
    d2v = (V[2:] - 2 * V[1:-1] + V[:-2]) / dt[0] ** 2
    tm, rm = t[1:-1], rhs[1:-1]
    if window is not None:
        keep = (tm >= window[0] - 1e-12) & (tm <= window[1] + 1e-12)
        tm, d2v, rm = tm[keep], d2v[keep], rm[keep]
        if len(tm) == 0:
            raise ValueError("no interior samples inside the window")
    err = np.abs(d2v - rm)
    scale = float(np.max(np.abs(rm)))
    return ConsistencyReport(tm, d2v, rm, float(err.max()),
                             float(err.max() / scale) if scale > 0 else math.inf)
