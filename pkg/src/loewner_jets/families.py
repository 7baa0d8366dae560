"""Discrete dilation evolution families and triangular families."""

from __future__ import annotations

import itertools
import threading
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from math import comb, prod, sqrt

import numpy as np

from .errors import CertificateError, ContractViolation
from .jets import JetMap, compose
from .spectrum import Spectrum

TAILS = ("linear", "periodic")
COEFF_CAP = 1e8
LINEAR_SNAP_TOL = 1e-12


class DiscreteFamily:
    """One-step jets ``phi_{n,n+1}`` sharing the linear part ``A = diag(lambda)``.

    The stored steps cover ``0 <= n < horizon``.  Beyond the horizon the family is
    continued either by the linear map ``A`` (``tail="linear"``, the finite-horizon
    convention) or by cycling the stored steps (``tail="periodic"``).
    """

    def __init__(self, spectrum: Spectrum, steps: Sequence[JetMap], tail: str = "linear", degree: int | None = None):
        spectrum = spectrum.to_discrete()
        if tail not in TAILS:
            raise ContractViolation(f"tail must be one of {TAILS}")
        if tail == "periodic" and not steps:
            raise ContractViolation("a periodic family needs at least one step")
        if degree is None:
            if not steps:
                raise ContractViolation("degree is required for a family without steps")
            degree = steps[0].degree
        lam = spectrum.lambdas
        A = np.diag(lam)
        clean = []
        for n, s in enumerate(steps):
            if s.dim != spectrum.dim or s.degree != degree:
                raise ContractViolation(f"step {n} has shape (N={s.dim}, D={s.degree})")
            L = s.linear_part
            if np.abs(L - A).max() > LINEAR_SNAP_TOL * max(1.0, np.abs(A).max()):
                raise ContractViolation(f"step {n} linear part is not diag(lambda)")
            if not np.array_equal(L, A):
                c = np.array(s.coeffs)
                c[:, : spectrum.dim] = A
                s = JetMap(s.dim, s.degree, c)
            clean.append(s)
        self.spectrum = spectrum
        self.steps: tuple[JetMap, ...] = tuple(clean)
        self.tail = tail
        self.degree = int(degree)
        self._linear = JetMap.diagonal(lam, self.degree)
        self._prefix: dict[int, list[JetMap]] = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def period(self) -> int | None:
        return self.horizon if self.tail == "periodic" else None

    @property
    def linear_map(self) -> JetMap:
        return self._linear

    def step(self, n: int) -> JetMap:
        """``phi_{n,n+1}``."""
        if n < 0:
            raise ContractViolation(f"negative step index {n}")
        if n < self.horizon:
            return self.steps[n]
        if self.tail == "periodic":
            return self.steps[n % self.horizon]
        return self._linear

    def is_linear(self, tol: float = 0.0) -> bool:
        return all(np.abs(s.coeffs[:, self.dim :]).max(initial=0.0) <= tol for s in self.steps)

    def two_index_map(self, n: int, m: int) -> JetMap:
        if not 0 <= n <= m:
            raise ContractViolation(f"need 0 <= n <= m, got n={n}, m={m}")
        with self._lock:
            chain = self._prefix.setdefault(n, [JetMap.identity(self.dim, self.degree)])
            while len(chain) <= m - n:
                p = n + len(chain) - 1
                chain.append(compose(self.step(p), chain[-1]))
            return chain[m - n]

    def with_steps(self, steps: Sequence[JetMap]) -> DiscreteFamily:
        return DiscreteFamily(self.spectrum, steps, self.tail, self.degree)

    # ---- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "spectrum": self.spectrum.to_dict(),
            "degree": self.degree,
            "tail": self.tail,
            "steps": [s.to_dict() for s in self.steps],
        }


class TriangularFamily(DiscreteFamily):
    """A family whose steps are triangular polynomial automorphisms.

    Component ``j`` of every step is ``lambda_j z_j`` plus a polynomial of degree >= 2
    in ``z_1..z_{j-1}``.  The check is exact unless ``tol`` is given.
    """

    def __init__(self, spectrum: Spectrum, steps: Sequence[JetMap], tail: str = "linear", degree: int | None = None, tol: float = 0.0):
        super().__init__(spectrum, steps, tail, degree)
        lam = self.spectrum.lambdas
        for n, s in enumerate(self.steps):
            if not s.is_triangular(lam, tol):
                raise ContractViolation(f"step {n} is not triangular")
        self._inverse: dict[int, JetMap] = {}

    @classmethod
    def linear(cls, spectrum: Spectrum, degree: int, horizon: int = 0, tail: str = "linear") -> TriangularFamily:
        lin = JetMap.diagonal(spectrum.to_discrete().lambdas, degree)
        steps = [lin] * max(horizon, 1 if tail == "periodic" else 0)
        return cls(spectrum, steps, tail, degree)

    @property
    def coeff_bound(self) -> float:
        return max((float(np.abs(s.coeffs).max()) for s in self.steps), default=float(self.spectrum.moduli[0]))

    @property
    def component_degrees(self) -> list[int]:
        """``mu^(j)``: the largest degree of component ``j`` over all steps (at least 1)."""
        mu = [1] * self.dim
        for s in self.steps:
            mu = [max(a, b) for a, b in zip(mu, s.component_degrees())]
        return mu

    @property
    def degree_bound(self) -> int:
        return max([1] + [s.actual_degree() for s in self.steps])

    def inverse_step_exact(self, n: int) -> JetMap:
        """Exact polynomial inverse of ``T_{n,n+1}``, at the degree needed to hold it."""
        if n < self.horizon:
            key = n
        else:
            key = -1 if self.tail == "linear" else n % self.horizon
        with self._lock:
            got = self._inverse.get(key)
        if got is None:
            got = triangular_inverse_step(self.step(n))
            with self._lock:
                self._inverse[key] = got
        return got

    def inverse_step(self, n: int) -> JetMap:
        """The degree-``D`` jet of ``T_{n+1,n}``."""
        return self.inverse_step_exact(n).with_degree(self.degree)

    def inverse_steps_for_certificate(self) -> list[JetMap]:
        idx = list(range(self.horizon))
        if self.tail == "linear":
            idx.append(self.horizon)  # the linear tail step
        return [self.inverse_step_exact(n) for n in idx]


def two_index_map(family: DiscreteFamily, n: int, m: int) -> JetMap:
    """``phi_{n,m} = phi_{m-1,m} o ... o phi_{n,n+1}`` (identity when ``n == m``)."""
    return family.two_index_map(n, m)


def triangular_inverse_step(T: JetMap, degree: int | None = None) -> JetMap:
    """Exact inverse of a triangular automorphism by back-substitution.

    ``z_1 = w_1 / lambda_1`` and ``z_j = (w_j - t_j(z_1, ..., z_{j-1})) / lambda_j``.
    With ``degree=None`` the result is computed at the smallest degree that holds the
    inverse exactly (the product of the component degrees), or ``T.degree`` if larger.
    """
    L = T.linear_part
    lam = np.diag(L)
    if not T.is_triangular(lam):
        raise ContractViolation("triangular_inverse_step needs a triangular map")
    if np.any(lam == 0):
        raise ContractViolation("triangular map with zero diagonal entry")
    if degree is None:
        degree = max(T.degree, prod(max(1, d) for d in T.component_degrees()))
    Tl = T.with_degree(degree)
    t = Tl.nonlinear_part()
    N = T.dim
    Z = np.zeros_like(Tl.coeffs)
    Z[0, 0] = 1.0 / lam[0]
    for j in range(1, N):
        if t.coeffs[j].any():
            tj = compose(t, JetMap(N, degree, Z)).coeffs[j]
            Z[j] = -tj / lam[j]
        Z[j, j] += 1.0 / lam[j]
    return JetMap(N, degree, Z)


def reversed_map(family: TriangularFamily, m: int, n: int) -> JetMap:
    """``T_{m,n} = T_{n,m}^{-1}``, as the composition of per-step inverses."""
    if not 0 <= n <= m:
        raise ContractViolation(f"need 0 <= n <= m, got m={m}, n={n}")
    out = JetMap.identity(family.dim, family.degree)
    for p in range(n, m):
        out = compose(out, family.inverse_step(p))
    return out


def degree_bound_composed(family: TriangularFamily) -> int:
    """Product bound ``mu^(1) * ... * mu^(N)`` on the degree of every ``T_{0,k}``."""
    return prod(family.component_degrees)


@dataclass(frozen=True)
class GrowthConstants:
    C: float
    d: int
    M: int
    gamma: float
    beta: float


def _polydisc_boundary(dim: int, grid: int, rng: np.random.Generator | None) -> np.ndarray:
    if dim < 4:
        th = 2 * np.pi * np.arange(grid) / grid
        pts = np.array(list(itertools.product(th, repeat=dim)))
    else:
        rng = rng or np.random.default_rng(0)
        pts = 2 * np.pi * rng.random((2**dim * 64, dim))
    return np.exp(1j * pts)


def growth_constants(
    family: TriangularFamily,
    *,
    safety: float = 1.05,
    grid: int = 16,
    coeff_cap: float = COEFF_CAP,
    rng: np.random.Generator | None = None,
) -> GrowthConstants:
    """``gamma = M C^d`` and ``beta = 2 N sqrt(N) gamma``.

    ``C`` is the sampled sup of the inverse steps on the distinguished boundary of the
    unit polydisc (by the maximum principle this is the sup over the polydisc), times
    ``safety`` and floored at 1.  ``d`` bounds the degrees of all ``T_{k,0}``.
    """
    if not np.isfinite(family.coeff_bound) or family.coeff_bound > coeff_cap:
        raise CertificateError(f"coefficient bound {family.coeff_bound:.3e} exceeds cap {coeff_cap:.1e}")
    N = family.dim
    pts = _polydisc_boundary(N, grid, rng)
    inverses = family.inverse_steps_for_certificate()
    raw = max((float(np.abs(S(pts)).max()) for S in inverses), default=1.0)
    C = max(1.0, safety * raw)
    mu = [1] * N
    for S in inverses:
        mu = [max(a, b) for a, b in zip(mu, S.component_degrees())]
    d = prod(mu)
    M = comb(d + N, N)
    gamma = M * C**d
    return GrowthConstants(C=C, d=d, M=M, gamma=gamma, beta=2 * N * sqrt(N) * gamma)


@dataclass(frozen=True)
class AttractionReport:
    max_modulus: np.ndarray  # index n -> max_k |T_{0,n}(z_k)|
    first_component_error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.max_modulus[-1] < self.threshold and self.first_component_error < 1e-12)


def attraction_check(family: TriangularFamily, z_samples, n_max: int, threshold: float = 1e-6) -> AttractionReport:
    """Evaluate ``T_{0,n}`` on samples for ``n <= n_max`` and record the decay."""
    z = np.atleast_2d(np.asarray(z_samples, dtype=np.complex128))
    z0 = z[:, 0].copy()
    lam1 = family.spectrum.lambdas[0]
    mods = [float(np.abs(z).max())]
    err = 0.0
    for n in range(n_max):
        z = family.step(n)(z)
        mods.append(float(np.abs(z).max()))
        expected = lam1 ** (n + 1) * z0
        scale = max(float(np.abs(expected).max()), 1e-300)
        err = max(err, float(np.abs(z[:, 0] - expected).max()) / scale)
    return AttractionReport(np.array(mods), err, threshold)


def contraction_radius(family: DiscreteFamily, alpha: float, radius: float = 1.0) -> float:
    """A radius ``s`` with ``|phi_{n,n+1}(z)| <= alpha |z|`` for ``|z| <= s`` and every step.

    With ``C`` the Euclidean norm of the per-component sums of nonlinear coefficient
    moduli, ``|phi(z)| <= |lambda_1| |z| + C |z|^2`` on the unit ball, so
    ``s = min(radius, (alpha - |lambda_1|) / C)`` works.
    """
    lam1 = float(family.spectrum.moduli[0])
    if not lam1 < alpha < 1:
        raise ContractViolation(f"need |lambda_1| < alpha < 1, got alpha={alpha}, |lambda_1|={lam1}")
    C = 0.0
    N = family.dim
    for s in family.steps:
        sums = np.abs(s.coeffs[:, N:]).sum(axis=1)
        C = max(C, float(np.sqrt((sums**2).sum())))
    if C == 0.0:
        return radius
    return min(radius, (alpha - lam1) / C)


def family_from_dict(data: Mapping, *, degree: int | None = None, horizon: int | None = None) -> DiscreteFamily:
    """Parse family JSON: explicit ``steps`` or a ``generator`` block."""
    try:
        if "generator" in data:
            gen = data["generator"]
            kind = gen["kind"]
            if kind == "scenario":
                from .scenarios import scenario_family

                return scenario_family(gen["name"], dict(gen.get("params", {})), degree=degree, horizon=horizon)
            spectrum = Spectrum.from_dict(gen.get("spectrum", data.get("spectrum")))
            if kind == "periodic":
                raw = gen["steps"] if "steps" in gen else [gen["step"]]
                steps = [JetMap.from_dict(s) for s in raw]
                return DiscreteFamily(spectrum, steps, "periodic")
            if kind == "table":
                steps = [JetMap.from_dict(s) for s in gen["steps"]]
                return DiscreteFamily(spectrum, steps, "linear", int(gen.get("degree", data.get("degree", 0))) or None)
            raise ContractViolation(f"unknown generator kind {kind!r}")
        spectrum = Spectrum.from_dict(data["spectrum"])
        steps = [JetMap.from_dict(s) for s in data["steps"]]
        return DiscreteFamily(spectrum, steps, data.get("tail", "linear"), int(data["degree"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ContractViolation):
            raise
        raise ContractViolation(f"malformed family JSON: {exc}") from exc
