"""Exact exponent bookkeeping for the energy-critical INLS_c equation.

Every quantity that is rational in (d, b, sigma, c) is carried as a
:class:`fractions.Fraction`.  Only ``rho`` and ``beta`` involve a square root
and are floats (an exact value is attempted where the root is rational).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

Number = Union[int, float, Fraction, str]

#: Time exponent of the (infinity, 2) pair.  Compared by identity, never used
#: as a large number.
INFINITY = math.inf


class ParameterError(ValueError):
    """Raised for parameters outside the equation's admissible range."""


def as_fraction(x: Number) -> Fraction:
    """Exact rational from ints, Fractions, ``"p/q"`` strings or decimal floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ParameterError(f"non-finite value {x!r}")
        # repr gives the shortest decimal that round-trips
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def exact_sqrt(q: Fraction) -> Fraction | None:
    """Square root of a non-negative rational if it is rational, else None."""
    if q < 0:
        return None
    n, m = q.numerator, q.denominator
    rn, rm = math.isqrt(n), math.isqrt(m)
    if rn * rn == n and rm * rm == m:
        return Fraction(rn, rm)
    return None


def hardy_constant(d: int) -> Fraction:
    """c(d) = ((d-2)/2)^2."""
    return Fraction(d - 2, 2) ** 2


def energy_critical_power(d: int, b: Number) -> Fraction:
    return (4 - 2 * as_fraction(b)) / (d - 2)


def rho_exact(d: int, c: Number) -> Fraction | float:
    """rho = (d-2)/2 - sqrt(((d-2)/2)^2 + c); a Fraction when the root is rational."""
    cq = as_fraction(c)
    radicand = hardy_constant(d) + cq
    if radicand <= 0:
        raise ParameterError(f"c={cq} must exceed -c(d)={-hardy_constant(d)}")
    root = exact_sqrt(radicand)
    if root is not None:
        return Fraction(d - 2, 2) - root
    return (d - 2) / 2 - math.sqrt(float(radicand))


def rho_float(d: int, c: Number) -> float:
    return float(rho_exact(d, c))


@dataclass(frozen=True)
class ParamSet:
    """Model parameters (d, b, sigma, lambda, c).

    ``sigma`` defaults to the energy-critical power (4-2b)/(d-2).
    """

    d: int
    b: Fraction
    sigma: Fraction = None  # type: ignore[assignment]
    lam: int = -1
    c: Fraction = Fraction(0)

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d:
            raise ParameterError(f"d must be an integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.d < 3:
            raise ParameterError(f"d must be >= 3, got {self.d}")
        object.__setattr__(self, "b", as_fraction(self.b))
        if self.sigma is None:
            object.__setattr__(self, "sigma", energy_critical_power(self.d, self.b))
        else:
            object.__setattr__(self, "sigma", as_fraction(self.sigma))
        object.__setattr__(self, "c", as_fraction(self.c))
        if not 0 < self.b < 2:
            raise ParameterError(f"b must lie in (0, 2), got {self.b}")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.lam not in (-1, 1):
            raise ParameterError(f"lambda must be +1 or -1, got {self.lam}")
        if self.c <= -hardy_constant(self.d):
            raise ParameterError(
                f"c={self.c} must exceed -c(d)={-hardy_constant(self.d)}")

    @property
    def sigma_star(self) -> Fraction:
        return energy_critical_power(self.d, self.b)

    @property
    def is_energy_critical(self) -> bool:
        return self.sigma == self.sigma_star

    @property
    def focusing(self) -> bool:
        return self.lam == -1

    def replace(self, **changes) -> "ParamSet":
        kw = dict(d=self.d, b=self.b, sigma=self.sigma, lam=self.lam, c=self.c)
        kw.update(changes)
        return ParamSet(**kw)


@dataclass(frozen=True)
class DerivedExponents:
    c_d: Fraction
    sigma_star: Fraction
    sigma_mass: Fraction
    s_c: Fraction
    rho: float
    beta: float
    r: Fraction
    r_bar: Fraction
    gamma_r: Fraction
    c_equiv_threshold: Fraction

    def as_rows(self) -> list[tuple[str, str]]:
        return [(name, str(getattr(self, name))) for name in self.__dataclass_fields__]


@dataclass(frozen=True)
class AdmissiblePair:
    gamma: Fraction | float
    p: Fraction

    def __post_init__(self):
        if self.gamma is not INFINITY:
            object.__setattr__(self, "gamma", as_fraction(self.gamma))
        object.__setattr__(self, "p", as_fraction(self.p))


def critical_index(d: int, b: Number, sigma: Number) -> Fraction:
    """s_c = d/2 - (2-b)/sigma."""
    return Fraction(d, 2) - (2 - as_fraction(b)) / as_fraction(sigma)


def strichartz_r(d: int, b: Number) -> Fraction:
    """r = 2d(d+2-2b)/(d^2-2db+4)."""
    b = as_fraction(b)
    return Fraction(2 * d) * (d + 2 - 2 * b) / (d * d - 2 * d * b + 4)


def gamma_of(d: int, p: Number) -> Fraction | float:
    """Time exponent paired with p through 2/gamma = d/2 - d/p."""
    two_over = Fraction(d, 2) - Fraction(d) / as_fraction(p)
    if two_over == 0:
        return INFINITY
    return 2 / two_over


def dual(p: Fraction | float) -> Fraction | float:
    """Hoelder conjugate p' with 1/p + 1/p' = 1."""
    if p is INFINITY:
        return Fraction(1)
    p = as_fraction(p)
    if p == 1:
        return INFINITY
    return p / (p - 1)


def _reciprocal(x: Fraction | float) -> Fraction:
    return Fraction(0) if x is INFINITY else 1 / as_fraction(x)


def equiv_threshold(d: int, b: Number) -> Fraction:
    """-((d+2-2b)^2 - 4)/(d+2-2b)^2 * c(d), the lower bound on c for the local theory."""
    k = d + 2 - 2 * as_fraction(b)
    return -(k * k - 4) / (k * k) * hardy_constant(d)


def derive(params: ParamSet) -> DerivedExponents:
    d, b = params.d, params.b
    rho = rho_float(d, params.c)
    r = strichartz_r(d, b)
    return DerivedExponents(
        c_d=hardy_constant(d),
        sigma_star=energy_critical_power(d, b),
        sigma_mass=(4 - 2 * b) / d,
        s_c=critical_index(d, b, params.sigma),
        rho=rho,
        beta=1 - 2 * rho / (d - 2),
        r=r,
        r_bar=Fraction(2 * d, d - 2),
        gamma_r=gamma_of(d, r),
        c_equiv_threshold=equiv_threshold(d, b),
    )


def is_admissible(d: int, pair: AdmissiblePair) -> bool:
    if d < 3:
        raise ParameterError(f"d must be >= 3, got {d}")
    p = pair.p
    if not Fraction(2) <= p <= Fraction(2 * d, d - 2):
        return False
    return 2 * _reciprocal(pair.gamma) == Fraction(d, 2) - Fraction(d) / p


def equivalence_window(d: int, c: Number, s: Number) -> tuple:
    """Open interval of p on which the P_c and -Delta homogeneous Sobolev norms agree.

    Endpoints are Fractions when rho is rational, floats otherwise.
    """
    s = as_fraction(s)
    if not 0 < s < 2:
        raise ParameterError(f"s must lie in (0, 2), got {s}")
    cq = as_fraction(c)
    if cq <= -hardy_constant(d):
        raise ParameterError(f"c={cq} must exceed -c(d)")
    if cq >= 0:
        return (Fraction(1), Fraction(d) / s)
    rho = rho_exact(d, cq)
    if isinstance(rho, Fraction):
        return (Fraction(d) / (d - rho), Fraction(d) / (s + rho))
    return (d / (d - rho), d / (float(s) + rho))


def _inside(p, window) -> bool:
    lo, hi = window
    if isinstance(lo, float) or isinstance(hi, float):
        return float(lo) < float(p) < float(hi)
    return lo < p < hi


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class Report:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def __getitem__(self, name: str) -> Check:
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{ch.name}={'pass' if ch.passed else 'fail'}"
                + (f" ({ch.detail})" if ch.detail else "") for ch in self.checks]


def validate_wellposed(params: ParamSet) -> Report:
    """Check the hypotheses of the local well-posedness theory one by one."""
    d, b, c = params.d, params.b, params.c
    rep = Report()
    rep.add("energy_critical", params.sigma == params.sigma_star,
            f"sigma={params.sigma}, sigma_star={params.sigma_star}")
    rep.add("b_range", 0 < b < Fraction(4, d), f"b={b}, 4/d={Fraction(4, d)}")
    thr = equiv_threshold(d, b)
    rep.add("c_threshold", c > thr, f"c={c}, threshold={thr}")
    window = equivalence_window(d, c, 1)
    r = strichartz_r(d, b)
    rbar_dual = dual(Fraction(2 * d, d - 2))
    rep.add("r_in_window", _inside(r, window), f"r={r}, window={_fmt_window(window)}")
    rep.add("rbar_dual_in_window", _inside(rbar_dual, window),
            f"rbar'={rbar_dual}, window={_fmt_window(window)}")
    return rep


def _fmt_window(w) -> str:
    return f"({w[0]}, {w[1]})"


def dual_exponent_identity(d: int, b: Number) -> tuple[Fraction, Fraction]:
    """Both sides of 1/gamma(r_bar)' = (sigma*+1)/gamma(r).  Holds for all 0<b<2."""
    b = as_fraction(b)
    sigma = energy_critical_power(d, b)
    r = strichartz_r(d, b)
    gamma_bar = gamma_of(d, Fraction(2 * d, d - 2))
    lhs = _reciprocal(dual(gamma_bar))
    rhs = (sigma + 1) * _reciprocal(gamma_of(d, r))
    return lhs, rhs


def exponent_identities(d: int, b: Number) -> dict:
    """Hoelder-exponent bookkeeping of the nonlinear estimate, in exact rationals.

    Returns a dict with the auxiliary exponents and, per identity, a
    ``(lhs, rhs, holds)`` triple.  The gradient identity is checked against
    1/r_bar'; the variant with 1/r' is reported under ``literal_r_dual``.
    """
    b = as_fraction(b)
    if not 0 < b < Fraction(4, d):
        raise ParameterError(f"need 0 < b < 4/d, got b={b}, d={d}")
    sigma = energy_critical_power(d, b)
    r = strichartz_r(d, b)
    r_bar = Fraction(2 * d, d - 2)
    positivity = 1 - (b + 1) / (sigma + 1)
    inv_rho_hat = 1 / r - positivity / d
    inv_gamma_hat = 1 / r - (1 - b / sigma) / d
    inv_rbar_dual = 1 - 1 / r_bar
    inv_r_dual = 1 - 1 / r

    out = {
        "sigma": sigma, "r": r, "r_bar": r_bar,
        "positivity_factor": positivity,
        "inv_rho_hat": inv_rho_hat, "inv_gamma_hat": inv_gamma_hat,
    }
    lhs, rhs = inv_rbar_dual, (sigma + 1) * inv_rho_hat
    out["potential_holder"] = (lhs, rhs, lhs == rhs)
    lhs, rhs = sigma * inv_gamma_hat + 1 / r, inv_rbar_dual
    out["gradient_holder"] = (lhs, rhs, lhs == rhs)
    out["literal_r_dual"] = (lhs, inv_r_dual, lhs == inv_r_dual)
    lhs, rhs = dual_exponent_identity(d, b)
    out["time_exponent"] = (lhs, rhs, lhs == rhs)
    out["passed"] = all(out[k][2] for k in ("potential_holder", "gradient_holder",
                                            "time_exponent"))
    return out
