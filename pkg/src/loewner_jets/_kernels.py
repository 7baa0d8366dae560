"""Hot loops for truncated polynomial arithmetic.

Each kernel exists twice: a numba ``@njit`` version and a plain numpy version.
The numba path is used when numba imports cleanly and the environment variable
``LOEWNER_JETS_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths are
always importable so that tests and the benchmark can compare them directly.

Monomials are addressed through a "parent pointer" table: for every monomial
``m`` of degree at least two, ``z^m = z^parent[m] * z_var[m]``.  Degree-one
monomials have ``parent == -1``.  Products of truncated polynomials use the
pair table ``(pa, pb, pr)``: monomial ``pa[k]`` times ``pb[k]`` lands on
``pr[k]``, listing only pairs whose product stays within the degree cap.
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "LOEWNER_JETS_DISABLE_NUMBA"

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False


def numba_requested() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip().lower()
    return flag in ("", "0", "false", "no", "off")


# --------------------------------------------------------------------------
# numpy reference implementations


def poly_mul_numpy(a, b, pa, pb, pr, size):
    prod = a[pa] * b[pb]
    re = np.bincount(pr, weights=prod.real, minlength=size)
    im = np.bincount(pr, weights=prod.imag, minlength=size)
    return re + 1j * im


def monomial_powers_numpy(inner, parent, var, pa, pb, pr):
    """Rows ``V[m]`` hold the truncated coefficients of ``inner^m``."""
    size = inner.shape[1]
    V = np.zeros((size, size), dtype=np.complex128)
    for m in range(size):
        p = parent[m]
        if p < 0:
            V[m] = inner[var[m]]
        else:
            V[m] = poly_mul_numpy(V[p], inner[var[m]], pa, pb, pr, size)
    return V


def compose_numpy(outer, inner, parent, var, pa, pb, pr):
    V = monomial_powers_numpy(inner, parent, var, pa, pb, pr)
    return outer @ V


def eval_monomials_numpy(z, parent, var):
    """Values of every basis monomial at the points ``z`` (shape ``(K, N)``)."""
    K = z.shape[0]
    size = parent.shape[0]
    out = np.empty((K, size), dtype=np.complex128)
    for m in range(size):
        p = parent[m]
        if p < 0:
            out[:, m] = z[:, var[m]]
        else:
            out[:, m] = out[:, p] * z[:, var[m]]
    return out


# --------------------------------------------------------------------------
# numba implementations

if HAS_NUMBA:

    @njit(cache=True)
    def _powers_nb(inner, parent, var, pa, pb, pr):
        size = inner.shape[1]
        V = np.zeros((size, size), dtype=np.complex128)
        npairs = pa.shape[0]
        for m in range(size):
            p = parent[m]
            l = var[m]
            if p < 0:
                for r in range(size):
                    V[m, r] = inner[l, r]
            else:
                for k in range(npairs):
                    x = V[p, pa[k]]
                    if x != 0.0:
                        y = inner[l, pb[k]]
                        if y != 0.0:
                            V[m, pr[k]] += x * y
        return V

    @njit(cache=True)
    def _compose_nb(outer, inner, parent, var, pa, pb, pr):
        V = _powers_nb(inner, parent, var, pa, pb, pr)
        dim = outer.shape[0]
        size = outer.shape[1]
        out = np.zeros((dim, size), dtype=np.complex128)
        for j in range(dim):
            for m in range(size):
                c = outer[j, m]
                if c != 0.0:
                    for r in range(size):
                        out[j, r] += c * V[m, r]
        return out

    @njit(cache=True)
    def _poly_mul_nb(a, b, pa, pb, pr, size):
        out = np.zeros(size, dtype=np.complex128)
        for k in range(pa.shape[0]):
            out[pr[k]] += a[pa[k]] * b[pb[k]]
        return out

    @njit(cache=True)
    def _eval_monomials_nb(z, parent, var):
        K = z.shape[0]
        size = parent.shape[0]
        out = np.empty((K, size), dtype=np.complex128)
        for k in range(K):
            for m in range(size):
                p = parent[m]
                if p < 0:
                    out[k, m] = z[k, var[m]]
                else:
                    out[k, m] = out[k, p] * z[k, var[m]]
        return out

    compose_numba = _compose_nb
    poly_mul_numba = _poly_mul_nb
    eval_monomials_numba = _eval_monomials_nb
else:  # pragma: no cover
    compose_numba = None
    poly_mul_numba = None
    eval_monomials_numba = None


USE_NUMBA = HAS_NUMBA and numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    compose_coeffs = compose_numba
    poly_mul = poly_mul_numba
    eval_monomials = eval_monomials_numba
else:
    compose_coeffs = compose_numpy
    poly_mul = poly_mul_numpy
    eval_monomials = eval_monomials_numpy
