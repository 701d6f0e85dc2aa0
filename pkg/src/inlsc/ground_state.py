"""The explicit Hardy-Sobolev extremiser W_{b,c} and its identities.

For -c(d) < c <= 0 and every eps > 0,

    W(r) = [eps (d-b)(d-2) beta^2]^{(d-2)/(4-2b)}
           / ([eps + r^{(2-b) beta}]^{(d-2)/(2-b)} r^rho)

with rho from the Hardy constant and beta = 1 - 2 rho/(d-2).  W decays like
r^{-(d-2-rho)}, so integrals over a truncated grid miss a polynomial tail;
the tail is estimated separately and reported next to the raw sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fn
from .grid import RadialField, RadialGrid, apply_Pc
from .params import ParamSet, as_fraction, hardy_constant, rho_float
from .tridiag import TridiagonalSolver


@dataclass(frozen=True)
class GroundStateSpec:
    d: int
    b: float
    c: float = 0.0
    epsilon: float = 1.0

    def __post_init__(self):
        # strings such as "-3/16" are accepted and stored exactly
        object.__setattr__(self, "b", as_fraction(self.b))
        object.__setattr__(self, "c", as_fraction(self.c))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if as_fraction(self.c) > 0:
            raise ValueError("closed-form extremiser only for -c(d) < c <= 0")
        if as_fraction(self.c) <= -hardy_constant(self.d):
            raise ValueError("c must exceed -c(d)")
        if not 0 < float(self.b) < 2:
            raise ValueError("b must lie in (0, 2)")

    @classmethod
    def from_params(cls, params: ParamSet, epsilon: float = 1.0, c=None) -> "GroundStateSpec":
        return cls(params.d, params.b, params.c if c is None else c, epsilon)

    @property
    def rho(self) -> float:
        return rho_float(self.d, self.c)

    @property
    def beta(self) -> float:
        return 1.0 - 2.0 * self.rho / (self.d - 2)

    @property
    def sigma_star(self) -> float:
        return (4.0 - 2.0 * float(self.b)) / (self.d - 2)

    @property
    def params(self) -> ParamSet:
        return ParamSet(self.d, self.b, lam=-1, c=self.c)

    @property
    def amplitude(self) -> float:
        d, b, beta = self.d, float(self.b), self.beta
        return (self.epsilon * (d - b) * (d - 2) * beta ** 2) ** ((d - 2) / (4 - 2 * b))

    @property
    def decay_exponent(self) -> float:
        """W ~ r^{-(d-2-rho)} at infinity."""
        return self.d - 2 - self.rho

    @property
    def correction_exponent(self) -> float:
        """Relative size of the next asymptotic term, r^{-(2-b) beta}."""
        return (2 - float(self.b)) * self.beta


def eval_W(spec: GroundStateSpec, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("W is evaluated at r > 0 only")
    d, b, beta, eps = spec.d, float(spec.b), spec.beta, spec.epsilon
    denom = (eps + r ** ((2 - b) * beta)) ** ((d - 2) / (2 - b)) * r ** spec.rho
    out = spec.amplitude / denom
    return float(out) if out.ndim == 0 else out


def W_field(spec: GroundStateSpec, grid: RadialGrid) -> RadialField:
    if grid.d != spec.d:
        raise ValueError("grid dimension does not match ground-state dimension")
    return grid.field(eval_W(spec, grid.nodes))


def power_law_tail(r, f, p: float, q: float, start: float, terms: int = 3) -> float:
    """Integral over [start, inf) of an integrand f ~ r^-p (a0 + a1 r^-q + a2 r^-2q + ...).

    The coefficients are fitted by least squares to the samples (r, f), which
    should come from the outer part of the domain.  Requires p > 1.
    """
    if p <= 1:
        raise ValueError(f"tail exponent {p} is not integrable")
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    powers = p + q * np.arange(terms)
    basis = r[:, None] ** -powers[None, :]
    # column scaling keeps the least-squares problem well conditioned
    scale = np.abs(basis).max(axis=0)
    coef, *_ = np.linalg.lstsq(basis / scale, f, rcond=None)
    coef = coef / scale
    return float(np.sum(coef * start ** (1 - powers) / (powers - 1)))


def _outer(x, frac: float = 0.25):
    k = max(8, int(len(x) * frac))
    return slice(len(x) - k, len(x))


@dataclass
class Tails:
    kinetic: float
    potential: float


def tail_estimates(spec: GroundStateSpec, grid: RadialGrid, u: RadialField | None = None) -> Tails:
    """Tails of kinetic_c(W) and potential_term(W) beyond the grid."""
    u = W_field(spec, grid) if u is None else u
    g = grid
    p_kin = g.d - 1 - 2 * spec.rho
    sig = spec.sigma_star
    p_pot = spec.decay_exponent * (sig + 2) - (g.d - 1 - float(spec.b))
    q = spec.correction_exponent

    du = g.face_diff(u.values.real)
    dens_face = g.face_weights / g.h * du ** 2
    s = _outer(g.faces)
    kin = power_law_tail(g.faces[s], dens_face[s], p_kin, q, g.r_max - 0.5 * g.h)
    if float(spec.c) != 0.0:
        dens = g.omega * float(spec.c) * u.abs2 * g.nodes ** (g.d - 3)
        s = _outer(g.nodes)
        kin += power_law_tail(g.nodes[s], dens[s], p_kin, q, g.r_max)
    dens = g.omega * fn.potential_density(u, sig) * g.nodes ** (g.d - 1 - float(spec.b))
    s = _outer(g.nodes)
    pot = power_law_tail(g.nodes[s], dens[s], p_pot, q, g.r_max)
    return Tails(kin, pot)


def el_residual(spec: GroundStateSpec, grid: RadialGrid, window=None) -> float:
    """Relative weighted L^2 norm of P_c W - |x|^-b W^{s+1} on r in [10h, r_max/2]."""
    u = W_field(spec, grid)
    lhs = apply_Pc(u, float(spec.c)).values.real
    w = u.values.real
    rhs = grid.nodes ** (-float(spec.b)) * w ** (spec.sigma_star + 1)
    lo, hi = window if window is not None else (10 * grid.h, grid.r_max / 2)
    m = (grid.nodes >= lo) & (grid.nodes <= hi)
    wt = grid.weights[m]
    return math.sqrt(np.sum(wt * (lhs[m] - rhs[m]) ** 2) / np.sum(wt * rhs[m] ** 2))


@dataclass
class IdentitiesReport:
    kinetic_raw: float
    potential_raw: float
    tails: Tails
    kinetic: float
    potential: float
    energy: float
    C_HS: float
    quotient: float
    energy_factor: object           # exact rational (2-b)/(2(d-b)) when b is rational
    kp_discrepancy: float           # |K - P| / K
    energy_factor_discrepancy: float  # |E - factor*K| / |E|
    g_at_W: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kinetic_raw": self.kinetic_raw, "potential_raw": self.potential_raw,
            "kinetic_tail": self.tails.kinetic, "potential_tail": self.tails.potential,
            "kinetic": self.kinetic, "potential": self.potential, "energy": self.energy,
            "C_HS": self.C_HS, "quotient_at_W": self.quotient,
            "energy_factor": self.energy_factor,
            "kp_discrepancy": self.kp_discrepancy,
            "energy_factor_discrepancy": self.energy_factor_discrepancy, "g_at_W": self.g_at_W,
        }


def energy_factor(d: int, b):
    """1/2 - 1/(s*+2), equal to (2-b)/(2(d-b)); exact when b is rational."""
    b = as_fraction(b)
    sigma = (4 - 2 * b) / (d - 2)
    f = as_fraction(1) / 2 - 1 / (sigma + 2)
    assert f == (2 - b) / (2 * (d - b))
    return f


def identities_report(spec: GroundStateSpec, grid: RadialGrid, with_tail: bool = True) -> IdentitiesReport:
    u = W_field(spec, grid)
    sig = spec.sigma_star
    k_raw = fn.kinetic_c(u, spec.c)
    p_raw = fn.potential_term(u, spec.b, sig)
    tails = tail_estimates(spec, grid, u) if with_tail else Tails(0.0, 0.0)
    K = k_raw + tails.kinetic
    P = p_raw + tails.potential
    E = 0.5 * K - P / (sig + 2)
    # ||W||^s = C^{-(s+2)}
    C = K ** (-sig / (2 * (sig + 2)))
    factor = energy_factor(spec.d, spec.b)
    return IdentitiesReport(
        kinetic_raw=k_raw, potential_raw=p_raw, tails=tails,
        kinetic=K, potential=P, energy=E, C_HS=C,
        quotient=math.sqrt(K) / P ** (1 / (sig + 2)),
        energy_factor=factor,
        kp_discrepancy=abs(K - P) / K,
        energy_factor_discrepancy=abs(E - float(factor) * K) / abs(E),
        g_at_W=fn.g_curve(math.sqrt(K), C, sig),
    )


@dataclass
class MinimizerResult:
    field: RadialField
    quotient: float
    trace: list
    iterations: int
    converged: bool
    diverged: bool


def _dirichlet_quotient(grid, coeffs, u, params):
    Lu = grid.apply_tridiag(coeffs, u)
    K = float(np.sum(grid.weights * u * Lu))
    a2 = u * u
    dens = a2 * fn.abs_power(a2, float(params.sigma))
    P = float(np.sum(grid.weights * grid.nodes ** -float(params.b) * dens))
    return math.sqrt(K) / P ** (1 / (float(params.sigma) + 2)), K, P, Lu


def minimize_quotient(params: ParamSet, grid: RadialGrid, seed: RadialField,
                      max_iters: int = 5000, step: float = 0.5, tol: float = 1e-10,
                      patience: int = 50) -> MinimizerResult:
    """Preconditioned descent on log Q over real radial fields, renormalising mass.

    The kinetic part is the full quadratic form <P_c u, u>_w of the discrete
    operator (Dirichlet at r_max).  Each iterate moves along
    -(P_c + 1)^{-1}(P_c u - (K/P)|x|^-b |u|^s u); a step that raises Q is
    halved until it does not, so the trace is non-increasing.
    """
    if not params.is_energy_critical:
        raise ValueError("minimiser requires sigma = sigma*")
    u = np.array(seed.values.real, dtype=float)
    if not np.any(u):
        raise ValueError("seed must be non-zero")
    coeffs = grid.laplacian_coefficients(float(params.c))
    lower, diag, upper = coeffs
    precond = TridiagonalSolver(lower, diag + 1.0, upper)
    m0 = float(np.sum(grid.weights * u * u))
    sig = float(params.sigma)
    rb = grid.nodes ** -float(params.b)

    Q, K, P, Lu = _dirichlet_quotient(grid, coeffs, u, params)
    trace = [Q]
    stalled = 0
    converged = diverged = False
    it = 0
    for it in range(1, max_iters + 1):
        resid = Lu - (K / P) * rb * np.abs(u) ** sig * u
        direction = precond.solve(resid)
        tau = step
        accepted = False
        for _ in range(30):
            trial = u - tau * direction
            trial *= math.sqrt(m0 / float(np.sum(grid.weights * trial * trial)))
            Qt, Kt, Pt, Lt = _dirichlet_quotient(grid, coeffs, trial, params)
            if Qt <= Q:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            stalled += 1
            trace.append(Q)
            if stalled >= patience:
                diverged = True
                break
            continue
        change = (Q - Qt) / Q
        u, Q, K, P, Lu = trial, Qt, Kt, Pt, Lt
        trace.append(Q)
        stalled = stalled + 1 if change == 0.0 else 0
        if stalled >= patience:
            diverged = True
            break
        if change < tol:
            converged = True
            break
    return MinimizerResult(grid.field(u), Q, trace, it, converged, diverged)
