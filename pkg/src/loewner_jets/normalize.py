"""Degree-by-degree removal of non-resonant terms from a discrete dilation family.

At degree ``i`` every coefficient sequence ``a_n`` of a monomial ``z^I`` in component
``j`` is either kept (resonant, moved into the triangular family) or removed by the
shear ``z_j -> z_j + alpha_n z^I`` where ``alpha`` solves the recurrence

    lambda^I alpha_{n+1} + a_n = lambda_j alpha_n.
"""

from __future__ import annotations

import threading
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ComplexResonanceError, ContractViolation, SmallDivisorError
from .families import DiscreteFamily, GrowthConstants, TriangularFamily, growth_constants
from .jets import JetMap, coefficient_norm, compose, invert
from .spectrum import (
    NEAR_BAND,
    RES_TOL,
    ResonanceReport,
    Spectrum,
    enumerate_resonances,
    koenigs_degree_l,
    resonance_cutoff_q,
)

ALPHA_CAP = 1e12
BRANCHES = ("forward", "backward", "periodic", "resonant")


@dataclass(frozen=True)
class HomologicalSolution:
    """Shear coefficients ``alpha_n`` for one monomial ``(j, I)``.

    ``values`` covers ``n = 0..horizon`` for finite-horizon families and one period
    for periodic ones; :meth:`value` extends it to every ``n >= 0``.
    """

    component: int
    index: tuple[int, ...]
    values: np.ndarray
    branch: str
    divisor_magnitude: float
    ratio: complex  # lambda_j / lambda^I
    periodic: bool = False
    near_resonant: bool = False

    def value(self, n: int) -> complex:
        if self.branch == "resonant":
            return 0j
        if self.periodic:
            return complex(self.values[n % len(self.values)])
        H = len(self.values) - 1
        if n <= H:
            return complex(self.values[n])
        if self.branch == "forward":
            return complex(self.values[H] * self.ratio ** (n - H))
        return 0j

    @property
    def peak(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "index": list(self.index),
            "branch": self.branch,
            "divisor_magnitude": self.divisor_magnitude,
            "near_resonant": self.near_resonant,
            "values": [{"re": float(v.real), "im": float(v.imag)} for v in self.values],
        }


def solve_homological(
    spec: Spectrum,
    j: int,
    I: Sequence[int],
    a_sequence,
    *,
    periodic: bool = False,
    tol: float = RES_TOL,
    cap: float = ALPHA_CAP,
    near_band: float = NEAR_BAND,
) -> HomologicalSolution:
    """Solve ``lambda^I alpha_{n+1} + a_n = lambda_j alpha_n``.

    Finite horizon (``periodic=False``): ``a_n = 0`` past the data.  The forward
    branch starts from ``alpha_0 = 0``; the backward branch is the convergent tail
    sum, which for finitely many data is the exact backward recursion from
    ``alpha_H = 0``.  Periodic data (one period given) gets the periodic solution,
    which exists whenever ``mu^p != 1`` for ``mu = lambda_j / lambda^I``; this also
    covers pure real resonances.
    """
    I = tuple(int(i) for i in I)
    a = np.asarray(a_sequence, dtype=np.complex128)
    lam = spec.to_discrete().lambdas
    lam_j = complex(lam[j])
    lam_I = complex(np.prod(lam ** np.asarray(I)))
    mu = lam_j / lam_I
    real_defect = abs(abs(lam_j) - abs(lam_I))
    near = tol < real_defect < near_band
    H = len(a)

    def done(values, branch, divisor):
        values = np.asarray(values, dtype=np.complex128)
        peak = float(np.abs(values).max(initial=0.0))
        if not np.isfinite(peak) or peak > cap:
            raise SmallDivisorError(j, I, divisor, peak)
        values.flags.writeable = False
        return HomologicalSolution(j, I, values, branch, divisor, mu, periodic, near)

    if periodic:
        if H == 0:
            raise ContractViolation("periodic data needs at least one period")
        mu_p = mu**H
        divisor = abs(1 - mu_p)
        if divisor <= tol:
            return done(np.zeros(H), "resonant", divisor)
        vals = np.empty(H, dtype=np.complex128)
        if abs(mu) <= 1:
            # alpha_{n+1} = mu alpha_n - a_n / lambda^I, closed over one period
            S = sum(mu ** (H - 1 - n) * a[n] for n in range(H)) / lam_I
            vals[0] = -S / (1 - mu_p)
            for n in range(H - 1):
                vals[n + 1] = mu * vals[n] - a[n] / lam_I
        else:
            rho = 1 / mu
            S = sum(rho**n * a[n] for n in range(H)) / lam_j
            alpha_p = S / (1 - rho**H)
            nxt = alpha_p
            for n in range(H - 1, -1, -1):
                vals[n] = rho * nxt + a[n] / lam_j
                nxt = vals[n]
        return done(vals, "periodic", divisor)

    if real_defect <= tol:
        return done(np.zeros(H + 1), "resonant", abs(lam_j - lam_I))
    vals = np.zeros(H + 1, dtype=np.complex128)
    if abs(lam_j) < abs(lam_I):
        for n in range(H):
            vals[n + 1] = (lam_j * vals[n] - a[n]) / lam_I
        return done(vals, "forward", abs(mu))
    rho = lam_I / lam_j
    for n in range(H - 1, -1, -1):
        vals[n] = rho * vals[n + 1] + a[n] / lam_j
    return done(vals, "backward", abs(rho))


def shear_jet(dim: int, degree: int, shears: Sequence[tuple[int, tuple[int, ...], complex]]) -> JetMap:
    """``s_K o ... o s_1`` with ``s_q(z) = z + alpha_q z^{I_q} e_{j_q}``; ``s_1`` is applied first."""
    ident = JetMap.identity(dim, degree)
    out = ident
    for j, I, alpha in shears:
        if alpha == 0:
            continue
        s = ident + JetMap.from_terms(dim, degree, {(j, I): alpha})
        out = compose(s, out) if out is not ident else s
    return out


@dataclass
class StageResult:
    degree: int
    solutions: list[HomologicalSolution]
    resonant_terms: list[tuple[int, tuple[int, ...]]]
    conjugators: list[JetMap]  # k_n for the stored range
    family: DiscreteFamily  # phi^{i+1}
    triangular: TriangularFamily  # T^{i+1}
    residual_norm: float
    warnings: list[dict] = field(default_factory=list)
    conjugation_residual: float = 0.0
    _tail_cache: dict = field(default_factory=dict, repr=False)

    def conjugator(self, n: int) -> JetMap:
        if n < len(self.conjugators):
            return self.conjugators[n]
        if self.family.tail == "periodic":
            return self.conjugators[n % len(self.conjugators)]
        got = self._tail_cache.get(n)
        if got is None:
            F = self.family
            got = shear_jet(F.dim, F.degree, [(s.component, s.index, s.value(n)) for s in self.solutions])
            self._tail_cache[n] = got
        return got

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "residual_norm": self.residual_norm,
            "conjugation_residual": self.conjugation_residual,
            "resonant_terms": [{"component": j, "index": list(I)} for j, I in self.resonant_terms],
            "solutions": [
                {
                    "component": s.component,
                    "index": list(s.index),
                    "branch": s.branch,
                    "divisor_magnitude": s.divisor_magnitude,
                }
                for s in self.solutions
            ],
            "conjugators": [k.to_dict() for k in self.conjugators],
        }


def stage_eliminate(
    family: DiscreteFamily,
    triangular: TriangularFamily,
    i: int,
    *,
    tol: float = RES_TOL,
    cap: float = ALPHA_CAP,
    near_band: float = NEAR_BAND,
) -> StageResult:
    """One elimination stage at degree ``i``.

    ``family`` must already agree with ``triangular`` through degree ``i - 1``.
    """
    N, D = family.dim, family.degree
    if not 2 <= i <= D:
        raise ContractViolation(f"stage degree {i} outside 2..{D}")
    spec = family.spectrum
    b = family.linear_map.basis
    sl = b.degree_slice(i)
    periodic = family.tail == "periodic"
    H = family.horizon
    P = np.stack([s.coeffs[:, sl] for s in family.steps]) if H else np.zeros((0, N, sl.stop - sl.start))

    solutions: list[HomologicalSolution] = []
    resonant: list[tuple[int, tuple[int, ...]]] = []
    warnings: list[dict] = []
    R = np.zeros_like(P)
    for col, exp in enumerate(b.exps[sl]):
        I = tuple(int(x) for x in exp)
        for j in range(N):
            a = P[:, j, col]
            sol = solve_homological(spec, j, I, a, periodic=periodic, tol=tol, cap=cap, near_band=near_band)
            if sol.branch == "resonant":
                if a.any():
                    R[:, j, col] = a
                    resonant.append((j, I))
                continue
            if sol.near_resonant and a.any():
                warnings.append(
                    {"kind": "near_resonance", "stage": i, "component": j, "index": list(I),
                     "divisor_magnitude": sol.divisor_magnitude, "peak": sol.peak}
                )
            if a.any():
                solutions.append(sol)

    n_conj = H if periodic else H + 1
    conj = [
        shear_jet(N, D, [(s.component, s.index, s.value(n)) for s in solutions]) for n in range(n_conj)
    ]

    new_T = []
    for n in range(H):
        c = np.array(triangular.step(n).coeffs)
        c[:, sl] += R[n]
        new_T.append(JetMap(N, D, c))
    T_next = TriangularFamily(spec, new_T, family.tail, D)

    new_steps = []
    for n in range(H):
        k_next = conj[(n + 1) % n_conj] if periodic else conj[n + 1]
        new_steps.append(compose(compose(k_next, family.step(n)), invert(conj[n])))
    fam_next = DiscreteFamily(spec, new_steps, family.tail, D)

    residual = max(
        (coefficient_norm((s - t).degree_range(1, i)) for s, t in zip(fam_next.steps, T_next.steps)),
        default=0.0,
    )
    return StageResult(i, solutions, resonant, conj, fam_next, T_next, residual, warnings)


@dataclass
class NormalizationResult:
    family: DiscreteFamily
    stages: list[StageResult]
    triangular: TriangularFamily
    normalized_family: DiscreteFamily  # phi after the last stage
    resonances: ResonanceReport
    q: int
    l: int
    growth: GrowthConstants
    warnings: list[dict]
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def final_degree(self) -> int:
        return self.stages[-1].degree if self.stages else 1

    @property
    def agreement_order(self) -> int:
        """``k`` with ``phi - T = O(|z|^k)`` for the normalized family."""
        return self.final_degree + 1

    @property
    def residual_norms(self) -> list[float]:
        return [s.residual_norm for s in self.stages]

    @property
    def conjugation_residuals(self) -> list[float]:
        return [s.conjugation_residual for s in self.stages]

    def conjugator(self, n: int) -> JetMap:
        """Cumulative conjugator ``K_n = k^{last}_n o ... o k^{2}_n``."""
        with self._lock:
            got = self._cache.get(n)
        if got is None:
            got = JetMap.identity(self.family.dim, self.family.degree)
            for st in self.stages:
                got = compose(st.conjugator(n), got)
            with self._lock:
                self._cache[n] = got
        return got

    def to_dict(self) -> dict:
        return {
            "spectrum": self.family.spectrum.to_dict(),
            "degree": self.family.degree,
            "tail": self.family.tail,
            "q": self.q,
            "l": self.l,
            "growth": {"C": self.growth.C, "d": self.growth.d, "M": self.growth.M,
                       "gamma": self.growth.gamma, "beta": self.growth.beta},
            "resonances": self.resonances.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "triangular_steps": [s.to_dict() for s in self.triangular.steps],
            "residual_norms": self.residual_norms,
            "conjugation_residuals": self.conjugation_residuals,
            "warnings": self.warnings,
        }


def normalize_family(
    family: DiscreteFamily,
    spec: Spectrum | None = None,
    *,
    tol: float = RES_TOL,
    cap: float = ALPHA_CAP,
    near_band: float = NEAR_BAND,
    through_degree: int | None = None,
) -> NormalizationResult:
    """Run elimination stages ``i = 2..min(D, l)``.

    ``l`` is the smallest integer with ``|lambda_1|^l < 1/beta``, where ``beta`` is
    the Lipschitz constant of the final triangular family.  ``through_degree``
    overrides the last stage (``D`` gives a full degree-``D`` normalization).
    """
    if spec is not None and not np.allclose(spec.to_discrete().lambdas, family.spectrum.lambdas, rtol=0, atol=1e-14):
        raise ContractViolation("spectrum does not match the family")
    spec = family.spectrum
    D = family.degree
    if D < 2:
        raise ContractViolation("normalization needs degree >= 2")
    q = resonance_cutoff_q(spec)
    report = enumerate_resonances(spec, D, tol, near_band)
    T = TriangularFamily.linear(spec, D, family.horizon, family.tail)
    phi = family
    periodic = family.tail == "periodic"
    n_conj = family.horizon if periodic else family.horizon + 1
    cum = [JetMap.identity(family.dim, D)] * n_conj
    stages: list[StageResult] = []
    warnings: list[dict] = []
    growth = None
    l = None
    last = through_degree
    i = 2
    while i <= D:
        st = stage_eliminate(phi, T, i, tol=tol, cap=cap, near_band=near_band)
        if i >= q:
            assert not st.resonant_terms, f"resonant terms at degree {i} >= q = {q}"
        cum = [compose(st.conjugators[n], cum[n]) for n in range(n_conj)]
        # K_{n+1} o phi_n = phi^{i+1}_n o K_n holds as an identity of jets
        st.conjugation_residual = max(
            coefficient_norm(
                (compose(cum[(n + 1) % n_conj] if periodic else cum[n + 1], family.step(n))
                 - compose(st.family.step(n), cum[n])).degree_range(1, D)
            )
            for n in range(family.horizon)
        ) if family.horizon else 0.0
        stages.append(st)
        warnings.extend(st.warnings)
        phi, T = st.family, st.triangular
        if growth is None and i + 1 >= q:
            growth = growth_constants(T)
            l = koenigs_degree_l(spec, growth.beta)
            if last is None:
                last = min(D, l)
        if last is not None and i >= last:
            break
        i += 1
    if growth is None:
        growth = growth_constants(T)
        l = koenigs_degree_l(spec, growth.beta)
    result = NormalizationResult(family, stages, T, phi, report, q, l, growth, warnings)
    for n in range(n_conj):
        result._cache[n] = cum[n]
    return result


def autonomous_linearize(f: JetMap, spec: Spectrum | None = None, *, tol: float = RES_TOL) -> JetMap:
    """Tangent-to-identity ``h`` with ``h o f = A o h`` through degree ``D``.

    Solved independently of the family machinery: at each degree the unknown
    coefficient satisfies ``c (lambda_j - lambda^I) = R_{j,I}`` where ``R`` is the
    degree-``d`` part of ``h_{<d} o f - A h_{<d}``.
    """
    lam = np.diag(f.linear_part)
    if spec is not None and not np.allclose(spec.to_discrete().lambdas, lam, rtol=0, atol=1e-14):
        raise ContractViolation("spectrum does not match the map")
    if not np.allclose(f.linear_part, np.diag(lam), rtol=0, atol=0):
        raise ContractViolation("linear part must be diagonal")
    N, D = f.dim, f.degree
    b = f.basis
    A = np.diag(lam)
    h = JetMap.identity(N, D)
    for d in range(2, D + 1):
        sl = b.degree_slice(d)
        R = (compose(h, f) - h.left_matmul(A)).coeffs[:, sl]
        lam_I = np.prod(lam[None, :] ** b.exps[sl], axis=1)
        div = lam[:, None] - lam_I[None, :]
        bad = np.argwhere(np.abs(div) <= tol)
        if bad.size:
            j, col = bad[0]
            raise ComplexResonanceError(int(j), tuple(int(x) for x in b.exps[sl][col]))
        c = np.array(h.coeffs)
        c[:, sl] = R / div
        h = JetMap(N, D, c)
    return h
