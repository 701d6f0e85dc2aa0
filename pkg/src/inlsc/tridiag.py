"""Factor-once tridiagonal solves (LAPACK ?gttrf / ?gttrs)."""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack


class SingularSystemError(RuntimeError):
    pass


class TridiagonalSolver:
    """LU factorisation of a general tridiagonal matrix, reused across solves.

    ``lower`` and ``upper`` have length n-1, ``diag`` length n.
    """

    def __init__(self, lower, diag, upper):
        complex_ = any(np.iscomplexobj(a) for a in (lower, diag, upper))
        dtype = complex if complex_ else float
        self.lower = np.asarray(lower, dtype=dtype)
        self.diag = np.asarray(diag, dtype=dtype)
        self.upper = np.asarray(upper, dtype=dtype)
        prefix = "z" if complex_ else "d"
        gttrf = getattr(lapack, prefix + "gttrf")
        self._gttrs = getattr(lapack, prefix + "gttrs")
        dl, d, du, du2, ipiv, info = gttrf(self.lower, self.diag, self.upper)
        if info > 0:
            raise SingularSystemError(f"zero pivot at row {info - 1}")
        if info < 0:
            raise ValueError(f"illegal argument {-info} to gttrf")
        self._lu = (dl, d, du, du2, ipiv)

    @property
    def dtype(self):
        return self.diag.dtype

    def matvec(self, x):
        out = self.diag * x
        out[:-1] += self.upper * x[1:]
        out[1:] += self.lower * x[:-1]
        return out

    def solve(self, rhs):
        dl, d, du, du2, ipiv = self._lu
        x, info = self._gttrs(dl, d, du, du2, ipiv, np.asarray(rhs, dtype=self.dtype))
        if info != 0:
            raise ValueError(f"gttrs failed with info={info}")
        return x
