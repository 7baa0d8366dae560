"""Truncated polynomial maps of C^N fixing the origin.

A :class:`JetMap` stores its coefficients densely, as an ``(N, M)`` complex array
whose columns follow the graded-lex monomial basis of degrees ``1..D``.  Within a
degree, monomials are ordered lexicographically with larger powers of ``z1``
first, so the first ``N`` columns are ``z1, ..., zN``.
"""

from __future__ import annotations

import functools
import itertools
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from math import comb

import numpy as np

from . import _kernels
from .errors import ContractViolation, NonInvertibleError

MultiIndex = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    dim: int
    degree: int
    exps: np.ndarray  # (M, N) exponents
    degrees: np.ndarray  # (M,)
    index: Mapping[MultiIndex, int]
    parent: np.ndarray
    var: np.ndarray
    pa: np.ndarray
    pb: np.ndarray
    pr: np.ndarray
    starts: tuple[int, ...]  # columns of degree d occupy starts[d-1]:starts[d]
    dshift: np.ndarray  # (N, M) position of I - e_l among [1, monomials...]
    dfac: np.ndarray  # (N, M) exponent i_l

    @property
    def size(self) -> int:
        return int(self.exps.shape[0])

    def degree_slice(self, d: int) -> slice:
        return slice(self.starts[d - 1], self.starts[d])


def _exponents(dim: int, d: int) -> list[MultiIndex]:
    out = []
    for combo in itertools.combinations_with_replacement(range(dim), d):
        e = [0] * dim
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    out.sort(reverse=True)
    return out


@functools.lru_cache(maxsize=None)
def monomial_basis(dim: int, degree: int) -> MonomialBasis:
    """Graded-lex basis of monomials with ``1 <= |I| <= degree``."""
    if dim < 1 or degree < 1:
        raise ContractViolation(f"need dim >= 1 and degree >= 1, got {dim}, {degree}")
    exps_list: list[MultiIndex] = []
    starts = [0]
    for d in range(1, degree + 1):
        exps_list.extend(_exponents(dim, d))
        starts.append(len(exps_list))
    index = {e: k for k, e in enumerate(exps_list)}
    size = len(exps_list)
    exps = np.array(exps_list, dtype=np.int64).reshape(size, dim)
    degrees = exps.sum(axis=1)

    parent = np.full(size, -1, dtype=np.int64)
    var = np.zeros(size, dtype=np.int64)
    for k, e in enumerate(exps_list):
        l = next(i for i, v in enumerate(e) if v > 0)
        var[k] = l
        if degrees[k] > 1:
            p = list(e)
            p[l] -= 1
            parent[k] = index[tuple(p)]

    pa, pb, pr = [], [], []
    for a, ea in enumerate(exps_list):
        for b, eb in enumerate(exps_list):
            if degrees[a] + degrees[b] <= degree:
                pa.append(a)
                pb.append(b)
                pr.append(index[tuple(x + y for x, y in zip(ea, eb))])

    dshift = np.zeros((dim, size), dtype=np.int64)
    dfac = np.zeros((dim, size), dtype=np.int64)
    for k, e in enumerate(exps_list):
        for l in range(dim):
            if e[l] == 0:
                continue
            lowered = list(e)
            lowered[l] -= 1
            dfac[l, k] = e[l]
            dshift[l, k] = 0 if sum(lowered) == 0 else index[tuple(lowered)] + 1

    return MonomialBasis(
        dim=dim,
        degree=degree,
        exps=exps,
        degrees=degrees,
        index=index,
        parent=parent,
        var=var,
        pa=np.array(pa, dtype=np.int64),
        pb=np.array(pb, dtype=np.int64),
        pr=np.array(pr, dtype=np.int64),
        starts=tuple(starts),
        dshift=dshift,
        dfac=dfac,
    )


def basis_size(dim: int, degree: int) -> int:
    return comb(dim + degree, dim) - 1


class JetMap:
    """An origin-fixing polynomial map of C^N truncated at degree ``D``.

    Instances are immutable; arithmetic returns new objects.

    Parameters
    ----------
    dim, degree:
        Number of variables ``N`` and truncation degree ``D``.
    coeffs:
        Optional ``(N, M)`` complex array in graded-lex column order.  Zero if omitted.
    """

    __slots__ = ("basis", "coeffs")

    def __init__(self, dim: int, degree: int, coeffs: np.ndarray | None = None):
        basis = monomial_basis(int(dim), int(degree))
        if coeffs is None:
            arr = np.zeros((basis.dim, basis.size), dtype=np.complex128)
        else:
            arr = np.array(coeffs, dtype=np.complex128)
            if arr.shape != (basis.dim, basis.size):
                raise ContractViolation(
                    f"coefficient array shape {arr.shape} != {(basis.dim, basis.size)}"
                )
        arr.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("JetMap is immutable")

    # ---- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, dim: int, degree: int) -> JetMap:
        return cls(dim, degree)

    @classmethod
    def identity(cls, dim: int, degree: int) -> JetMap:
        return cls.from_linear(np.eye(dim), degree)

    @classmethod
    def from_linear(cls, matrix, degree: int) -> JetMap:
        A = np.asarray(matrix, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ContractViolation("linear part must be a square matrix")
        dim = A.shape[0]
        c = np.zeros((dim, basis_size(dim, degree)), dtype=np.complex128)
        c[:, :dim] = A  # column l of the basis is z_l
        return cls(dim, degree, c)

    @classmethod
    def diagonal(cls, values, degree: int) -> JetMap:
        return cls.from_linear(np.diag(np.asarray(values, dtype=np.complex128)), degree)

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: Mapping[tuple[int, MultiIndex], complex]) -> JetMap:
        """Build from ``{(component, multi_index): coefficient}`` (components are 0-based)."""
        basis = monomial_basis(dim, degree)
        c = np.zeros((dim, basis.size), dtype=np.complex128)
        for (j, idx), value in terms.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != dim or min(idx) < 0:
                raise ContractViolation(f"bad multi-index {idx} for dim {dim}")
            if not 1 <= sum(idx) <= degree:
                raise ContractViolation(f"multi-index {idx} outside degrees 1..{degree}")
            if not 0 <= j < dim:
                raise ContractViolation(f"component {j} out of range")
            c[j, basis.index[idx]] += value
        return cls(dim, degree, c)

    # ---- basic accessors --------------------------------------------------

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def degree(self) -> int:
        return self.basis.degree

    @property
    def linear_part(self) -> np.ndarray:
        """The ``N x N`` matrix of the degree-one terms."""
        return np.array(self.coeffs[:, : self.dim])

    def coefficient(self, component: int, index: MultiIndex) -> complex:
        return complex(self.coeffs[component, self.basis.index[tuple(index)]])

    def terms(self) -> Iterator[tuple[int, MultiIndex, complex]]:
        """Nonzero coefficients in component-major, graded-lex order."""
        exps = self.basis.exps
        for j, m in zip(*np.nonzero(self.coeffs)):
            yield int(j), tuple(int(x) for x in exps[m]), complex(self.coeffs[j, m])

    def actual_degree(self, tol: float = 0.0) -> int:
        """Largest degree carrying a coefficient of modulus above ``tol`` (0 for the zero map)."""
        mask = np.abs(self.coeffs) > tol
        cols = np.nonzero(mask.any(axis=0))[0]
        return int(self.basis.degrees[cols].max()) if cols.size else 0

    def component_degrees(self, tol: float = 0.0) -> list[int]:
        degs = []
        for j in range(self.dim):
            cols = np.nonzero(np.abs(self.coeffs[j]) > tol)[0]
            degs.append(int(self.basis.degrees[cols].max()) if cols.size else 0)
        return degs

    # ---- arithmetic -------------------------------------------------------

    def _check_same(self, other: JetMap) -> None:
        if not isinstance(other, JetMap):
            raise TypeError(f"expected JetMap, got {type(other).__name__}")
        if other.dim != self.dim or other.degree != self.degree:
            raise ContractViolation(
                f"jet shape mismatch: (N={self.dim}, D={self.degree}) vs (N={other.dim}, D={other.degree})"
            )

    def __add__(self, other: JetMap) -> JetMap:
        self._check_same(other)
        return JetMap(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: JetMap) -> JetMap:
        self._check_same(other)
        return JetMap(self.dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> JetMap:
        return JetMap(self.dim, self.degree, -self.coeffs)

    def __mul__(self, scalar) -> JetMap:
        if isinstance(scalar, JetMap):
            return NotImplemented
        return JetMap(self.dim, self.degree, complex(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, JetMap):
            return NotImplemented
        return (
            other.dim == self.dim
            and other.degree == self.degree
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        parts = []
        for j in range(self.dim):
            terms = [f"({c:.4g})*z^{idx}" for jj, idx, c in self.terms() if jj == j]
            parts.append(" + ".join(terms) or "0")
        return f"JetMap(N={self.dim}, D={self.degree}: " + "; ".join(parts) + ")"

    def __call__(self, z) -> np.ndarray:
        return evaluate(self, z)

    def left_matmul(self, matrix) -> JetMap:
        """The jet of ``matrix @ self``."""
        return JetMap(self.dim, self.degree, np.asarray(matrix, dtype=np.complex128) @ self.coeffs)

    def with_degree(self, degree: int) -> JetMap:
        """Truncate to, or zero-pad up to, another degree."""
        if degree == self.degree:
            return self
        nb = monomial_basis(self.dim, degree)
        c = np.zeros((self.dim, nb.size), dtype=np.complex128)
        k = min(nb.size, self.basis.size)
        c[:, :k] = self.coeffs[:, :k]  # graded order makes truncation a prefix
        return JetMap(self.dim, degree, c)

    def homogeneous_part(self, i: int) -> JetMap:
        return homogeneous_part(self, i)

    def nonlinear_part(self) -> JetMap:
        c = np.array(self.coeffs)
        c[:, : self.dim] = 0
        return JetMap(self.dim, self.degree, c)

    def degree_range(self, lo: int, hi: int) -> JetMap:
        """Keep only the terms with ``lo <= |I| <= hi``."""
        c = np.zeros_like(self.coeffs)
        b = self.basis
        lo = max(lo, 1)
        hi = min(hi, self.degree)
        if lo <= hi:
            s = slice(b.starts[lo - 1], b.starts[hi])
            c[:, s] = self.coeffs[:, s]
        return JetMap(self.dim, self.degree, c)

    def is_triangular(self, diagonal=None, tol: float = 0.0) -> bool:
        """Component ``j`` is ``lambda_j z_j`` plus terms of degree >= 2 in ``z_1..z_{j-1}``."""
        L = self.linear_part
        off = L - np.diag(np.diag(L))
        if np.abs(off).max(initial=0.0) > tol:
            return False
        if diagonal is not None and np.abs(np.diag(L) - np.asarray(diagonal)).max(initial=0.0) > tol:
            return False
        b = self.basis
        nl = np.abs(self.coeffs[:, self.dim :]) > tol
        exps = b.exps[self.dim :]
        for j in range(self.dim):
            cols = np.nonzero(nl[j])[0]
            if cols.size and np.any(exps[cols][:, j:] > 0):
                return False
        return True

    # ---- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        comps = []
        exps = self.basis.exps
        for j in range(self.dim):
            mons = []
            for m in np.nonzero(self.coeffs[j])[0]:
                c = self.coeffs[j, m]
                mons.append(
                    {"index": [int(x) for x in exps[m]], "re": float(c.real), "im": float(c.imag)}
                )
            comps.append({"monomials": mons})
        return {"dim": self.dim, "degree": self.degree, "components": comps}

    @classmethod
    def from_dict(cls, data: Mapping) -> JetMap:
        try:
            dim = int(data["dim"])
            degree = int(data["degree"])
            comps = data["components"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"malformed jet JSON: {exc}") from exc
        if len(comps) != dim:
            raise ContractViolation(f"jet JSON has {len(comps)} components, expected {dim}")
        terms: dict[tuple[int, MultiIndex], complex] = {}
        for j, comp in enumerate(comps):
            for mon in comp.get("monomials", []):
                key = (j, tuple(int(i) for i in mon["index"]))
                terms[key] = terms.get(key, 0) + complex(float(mon["re"]), float(mon.get("im", 0.0)))
        return cls.from_terms(dim, degree, terms)


# ---------------------------------------------------------------------------
# free functions


def compose(outer: JetMap, inner: JetMap) -> JetMap:
    """The degree-``D`` jet of ``outer o inner``."""
    outer._check_same(inner)
    b = outer.basis
    c = _kernels.compose_coeffs(outer.coeffs, inner.coeffs, b.parent, b.var, b.pa, b.pb, b.pr)
    return JetMap(b.dim, b.degree, c)


def compose_all(*maps: JetMap) -> JetMap:
    """``maps[0] o maps[1] o ... o maps[-1]``."""
    if not maps:
        raise ContractViolation("compose_all needs at least one map")
    out = maps[-1]
    for f in reversed(maps[:-1]):
        out = compose(f, out)
    return out


def invert(f: JetMap) -> JetMap:
    """Compositional inverse up to degree ``D``.

    Uses the fixed point ``g = L^{-1}(z - N(g))`` where ``f = L + N``; each sweep
    fixes one more degree, so ``D - 1`` sweeps are exact.
    """
    L = f.linear_part
    try:
        cond = np.linalg.cond(L)
    except np.linalg.LinAlgError:  # pragma: no cover
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise NonInvertibleError(f"linear part is singular (condition number {cond:.3e})")
    Linv = np.linalg.inv(L)
    ident = JetMap.identity(f.dim, f.degree)
    g = JetMap.from_linear(Linv, f.degree)
    N = f.nonlinear_part()
    if not N.coeffs.any():
        return g
    for _ in range(f.degree - 1):
        g = (ident - compose(N, g)).left_matmul(Linv)
    return g


def homogeneous_part(f: JetMap, i: int) -> JetMap:
    if not 1 <= i <= f.degree:
        raise ContractViolation(f"degree {i} outside 1..{f.degree}")
    return f.degree_range(i, i)


def evaluate(f: JetMap, z) -> np.ndarray:
    """Exact polynomial evaluation at one point ``(N,)`` or many points ``(K, N)``."""
    pts = np.asarray(z, dtype=np.complex128)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != f.dim:
        raise ContractViolation(f"points have dimension {pts.shape[1]}, map has {f.dim}")
    b = f.basis
    V = _kernels.eval_monomials(np.ascontiguousarray(pts), b.parent, b.var)
    out = V @ f.coeffs.T
    return out[0] if single else out


def jacobian(f: JetMap, z) -> np.ndarray:
    """Exact Jacobian matrices ``(K, N, N)`` (or ``(N, N)`` for a single point)."""
    pts = np.asarray(z, dtype=np.complex128)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    b = f.basis
    V = _kernels.eval_monomials(np.ascontiguousarray(pts), b.parent, b.var)
    Vext = np.concatenate([np.ones((V.shape[0], 1), dtype=np.complex128), V], axis=1)
    J = np.empty((pts.shape[0], f.dim, f.dim), dtype=np.complex128)
    for l in range(f.dim):
        D_l = Vext[:, b.dshift[l]] * b.dfac[l]  # (K, M) derivative of each monomial in z_l
        J[:, :, l] = D_l @ f.coeffs.T
    return J[0] if single else J


def coefficient_norm(f: JetMap, degree: int | None = None, *, min_degree: int | None = None) -> float:
    """Max coefficient modulus, optionally restricted to one degree or to degrees >= ``min_degree``."""
    c = f.coeffs
    b = f.basis
    if degree is not None:
        if not 1 <= degree <= f.degree:
            return 0.0
        c = c[:, b.degree_slice(degree)]
    elif min_degree is not None:
        if min_degree > f.degree:
            return 0.0
        c = c[:, b.starts[max(min_degree, 1) - 1] :]
    return float(np.abs(c).max(initial=0.0))


def distance(f: JetMap, g: JetMap, **kw) -> float:
    return coefficient_norm(f - g, **kw)


def conjugate_diagonal(f: JetMap, log_out, log_in) -> JetMap:
    """``diag(exp(log_out)) o f o diag(exp(log_in))``, computed in log space.

    Coefficient ``(j, I)`` is multiplied by ``exp(log_out[j] + I . log_in)``, which
    avoids forming huge or tiny intermediate powers.
    """
    lo = np.asarray(log_out, dtype=np.complex128)
    li = np.asarray(log_in, dtype=np.complex128)
    return _scale_coeffs(f, lo[:, None] + (f.basis.exps @ li)[None, :])


def rescale_power(f: JetMap, alphas, k_out: float, k_in: float) -> JetMap:
    """``A^{k_out} o f o A^{k_in}`` for ``A = diag(exp(alphas))``.

    The exponent of coefficient ``(j, I)`` is ``sum_l c_l alpha_l`` with
    ``c = k_out e_j + k_in I``; forming ``c`` first keeps cancellations exact, so for
    example the diagonal of ``A^{-k} o A o A^{k}`` stays exactly ``lambda``.
    """
    al = np.asarray(alphas, dtype=np.complex128)
    b = f.basis
    c = k_in * b.exps[None, :, :].astype(float) + k_out * np.eye(b.dim)[:, None, :]
    return _scale_coeffs(f, c @ al)


def _scale_coeffs(f: JetMap, expo: np.ndarray) -> JetMap:
    c = f.coeffs
    out = np.zeros_like(c)
    nz = c != 0
    with np.errstate(over="ignore"):
        out[nz] = c[nz] * np.exp(expo[nz])
    return JetMap(f.dim, f.degree, out)


def random_jet(
    rng: np.random.Generator,
    dim: int,
    degree: int,
    *,
    scale: float = 1.0,
    linear=None,
    min_degree: int = 2,
    decay: float = 1.0,
) -> JetMap:
    """Random jet with the given linear part (identity-like default) and Gaussian higher terms.

    Degree-``d`` coefficients have standard deviation ``scale * decay**(d - 2)``.
    """
    b = monomial_basis(dim, degree)
    c = np.zeros((dim, b.size), dtype=np.complex128)
    start = b.starts[min_degree - 1]
    shape = (dim, b.size - start)
    weights = scale * decay ** (b.degrees[start:] - 2.0)
    c[:, start:] = weights * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    if linear is None:
        linear = np.eye(dim) + 0.3 * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    c[:, :dim] = np.asarray(linear, dtype=np.complex128)
    return JetMap(dim, degree, c)
