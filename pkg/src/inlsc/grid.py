"""Cell-centred radial grid for radial functions on R^d.

Nodes sit at r_j = (j + 1/2) h so that neither c/r^2 nor |x|^-b is ever
evaluated at the origin.  Integrals use the midpoint rule against the radial
measure omega_{d-1} r^{d-1} dr.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


def gamma_half_integer(d: int) -> float:
    """Gamma(d/2) for integer d >= 1 by the half-integer recursion."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    if d % 2 == 0:
        return float(math.factorial(d // 2 - 1))
    g = math.sqrt(math.pi)  # Gamma(1/2)
    k = 0.5
    while k < d / 2:
        g *= k
        k += 1.0
    return g


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2) / gamma_half_integer(d)


@dataclass(frozen=True)
class RadialGrid:
    d: int
    n: int
    h: float

    def __post_init__(self):
        if self.d < 1 or self.n < 3 or not self.h > 0:
            raise ValueError(f"bad grid d={self.d} n={self.n} h={self.h}")

    @classmethod
    def from_rmax(cls, d: int, r_max: float, h: float) -> "RadialGrid":
        n = int(round(r_max / h))
        return cls(d, n, float(h))

    @property
    def r_max(self) -> float:
        return self.n * self.h

    @property
    def omega(self) -> float:
        return sphere_area(self.d)

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def faces(self) -> np.ndarray:
        """Interior faces r_{j+1/2} = (j+1) h, j = 0..n-2."""
        return np.arange(1, self.n) * self.h

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights omega r_j^{d-1} h (the discrete inner product)."""
        return self.omega * self.nodes ** (self.d - 1) * self.h

    @cached_property
    def face_weights(self) -> np.ndarray:
        return self.omega * self.faces ** (self.d - 1) * self.h

    def field(self, values) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=complex))

    def sample(self, func) -> "RadialField":
        return self.field(func(self.nodes))

    # -- quadrature -------------------------------------------------------
    def integrate(self, f, w: float = 0.0) -> float:
        """omega * sum_j f(r_j) r_j^{d-1-w} h, i.e. the integral of |x|^-w f(|x|)."""
        if w >= self.d:
            raise ValueError(f"weight |x|^-{w} is not integrable at the origin in d={self.d}")
        f = np.asarray(f)
        if f.shape != (self.n,):
            raise ValueError("integrand length does not match grid")
        return float(self.omega * self.h * np.sum(f * self.nodes ** (self.d - 1 - w)))

    def inner(self, u, v) -> complex:
        """Weighted inner product <u, v>_w = sum w_j conj(u_j) v_j."""
        return complex(np.sum(self.weights * np.conj(u) * v))

    # -- operators -------------------------------------------------------
    @cached_property
    def _stencil(self):
        d, h = self.d, self.h
        a_face = self.faces ** (d - 1)          # r_{j+1/2}^{d-1}, j=0..n-2
        a_out = self.r_max ** (d - 1)           # outer face, Dirichlet ghost u_n = 0
        vol = self.nodes ** (d - 1) * h * h
        upper = -a_face / vol[:-1]
        lower = -a_face / vol[1:]
        diag = np.zeros(self.n)
        diag[:-1] += a_face
        diag[1:] += a_face
        diag[-1] += a_out
        diag /= vol
        return lower, diag, upper

    def laplacian_coefficients(self, c: float = 0.0):
        """Tridiagonal (lower, diag, upper) of the discrete P_c = -Delta + c/r^2."""
        lower, diag, upper = self._stencil
        return lower, diag + c / self.nodes ** 2, upper

    def apply_tridiag(self, coeffs, u):
        lower, diag, upper = coeffs
        out = diag * u
        out[:-1] += upper * u[1:]
        out[1:] += lower * u[:-1]
        return out

    def neg_laplacian(self, u, outer: str = "dirichlet"):
        """-Delta u with zero flux at the origin; Dirichlet or Neumann at r_max."""
        u = np.asarray(u)
        out = self.apply_tridiag(self._stencil, u)
        if outer == "neumann":
            out[-1] -= self.r_max ** (self.d - 1) / (self.nodes[-1] ** (self.d - 1) * self.h ** 2) * u[-1]
        elif outer != "dirichlet":
            raise ValueError(f"unknown outer closure {outer!r}")
        return out

    def face_diff(self, u):
        """(u_{j+1} - u_j)/h at the interior faces."""
        u = np.asarray(u)
        return np.diff(u) / self.h

    def edge_taper(self, start: float = 0.5, stop: float = 0.8) -> np.ndarray:
        """Smooth (C^2) step from 1 at start*r_max down to 0 at stop*r_max."""
        if not 0 < start < stop <= 1:
            raise ValueError("need 0 < start < stop <= 1")
        x = np.clip((self.nodes - start * self.r_max) / ((stop - start) * self.r_max), 0.0, 1.0)
        return 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)

    def outer_shell(self, fraction: float = 0.05) -> slice:
        k = max(1, int(math.ceil(fraction * self.n)))
        return slice(self.n - k, self.n)


@dataclass
class RadialField:
    """Complex radial profile u(r_j) on a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"field length {self.values.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite samples")

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def abs2(self) -> np.ndarray:
        return self.values.real ** 2 + self.values.imag ** 2

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())

    def scaled(self, a) -> "RadialField":
        return RadialField(self.grid, a * self.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values - other.values)

    def norm(self) -> float:
        """Weighted L^2 norm."""
        return math.sqrt(self.grid.integrate(self.abs2))

    def to_csv(self, path) -> None:
        write_field_csv(path, self)


def integrate(grid: RadialGrid, f, w: float = 0.0) -> float:
    return grid.integrate(f, w)


def ddr(u: RadialField) -> RadialField:
    """Second-order centred d/dr with one-sided second-order closures at both ends."""
    g = u.grid
    v = u.values
    return RadialField(g, np.gradient(v, g.h, edge_order=2))


def apply_Pc(u: RadialField, c: float) -> RadialField:
    """Flux-form discrete -Delta + c/r^2 (zero flux at 0, u_n = 0 beyond r_max)."""
    g = u.grid
    return RadialField(g, g.apply_tridiag(g.laplacian_coefficients(float(c)), u.values))


def write_field_csv(path, u: RadialField) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "re(u)", "im(u)"])
        for r, z in zip(u.grid.nodes, u.values):
            w.writerow([f"{r:.16e}", f"{z.real:.16e}", f"{z.imag:.16e}"])


def read_field_csv(path, d: int) -> RadialField:
    """Read a field CSV; the grid is reconstructed from the node spacing."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    r = data[:, 0]
    if len(r) < 3:
        raise ValueError("field CSV needs at least 3 rows")
    h = 2.0 * r[0]
    grid = RadialGrid(d, len(r), h)
    if not np.allclose(grid.nodes, r, rtol=1e-12, atol=1e-12 * h):
        raise ValueError("field CSV nodes are not a cell-centred grid r_j = (j+1/2)h")
    return grid.field(data[:, 1] + 1j * data[:, 2])
