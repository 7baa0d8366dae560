"""Discrete Loewner chains built from Koenigs-type limits.

Chain entries ``f_n`` have linear part ``A^{-n}``, which under- or overflows quickly.
Everything here is therefore carried in normalized form ``h_n = A^n f_n`` (tangent
to the identity), and every rescaling ``A^p o g o A^r`` is applied coefficientwise in
log space by :func:`~loewner_jets.jets.rescale_power`.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NonConvergenceError
from .families import DiscreteFamily, TriangularFamily
from .jets import JetMap, coefficient_norm, compose, invert, rescale_power
from .normalize import NormalizationResult
from .spectrum import Spectrum

CONV_TOL = 1e-11
M_MAX = 200
BOUND_CAP = 1e6
SLOPE_TOL = 1e-3
GROWTH_TOL = 1e-2
BURN_IN = 3
DELTA_FLOOR = 1e-13
AGREEMENT_TOL = 1e-9


def rescale(f: JetMap, alphas: np.ndarray, k_out: float, k_in: float) -> JetMap:
    """``A^{k_out} o f o A^{k_in}`` with ``A = diag(exp(alphas))``."""
    return rescale_power(f, alphas, k_out, k_in)


def _finite(f: JetMap, what: str, history: Sequence[float]) -> JetMap:
    if not np.all(np.isfinite(f.coeffs)):
        raise NonConvergenceError(f"{what}: coefficients overflowed", list(history))
    return f


@dataclass
class ChainJets:
    """A discrete chain stored as ``h_n = A^n f_n`` for ``n = 0..horizon``."""

    spectrum: Spectrum
    normalized: list[JetMap]
    provenance: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.normalized) - 1

    @property
    def degree(self) -> int:
        return self.normalized[0].degree

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    def entry(self, n: int) -> JetMap:
        """``f_n = A^{-n} h_n``."""
        return rescale(self.normalized[n], self.spectrum.alphas, -n, 0)

    def to_dict(self) -> dict:
        out = {
            "spectrum": self.spectrum.to_dict(),
            "degree": self.degree,
            "provenance": self.provenance,
            "scaling": "entries hold A^n f_n",
            "entries": [h.to_dict() for h in self.normalized],
        }
        out.update(self.diagnostics)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> ChainJets:
        try:
            spec = Spectrum.from_dict(data["spectrum"]).to_discrete()
            entries = [JetMap.from_dict(e) for e in data["entries"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ContractViolation):
                raise
            raise ContractViolation(f"malformed chain JSON: {exc}") from exc
        diag = {k: data[k] for k in ("normality",) if k in data}
        return cls(spec, entries, str(data.get("provenance", "")), diag)


@dataclass(frozen=True)
class KoenigsLimit:
    jet: JetMap
    iterations: int
    deltas: list[float]
    empirical_ratio: float | None
    predicted_ratio: float | None
    gap_ok: bool


def geometric_ratio(deltas: Sequence[float], burn_in: int = BURN_IN, floor: float = DELTA_FLOOR) -> float | None:
    """Fitted per-iteration ratio of a geometrically decaying sequence (``None`` if too short)."""
    d = np.asarray(deltas[burn_in:], dtype=float)
    keep = np.nonzero(d > floor)[0]
    if keep.size < 2:
        return None
    d = d[: keep[-1] + 1]
    if np.any(d <= 0):
        d = np.maximum(d, floor)
    x = np.arange(d.size, dtype=float)
    slope = np.polyfit(x, np.log(d), 1)[0]
    return float(np.exp(slope))


def predicted_rate(spec: Spectrum, beta: float, k: int) -> tuple[float, bool]:
    """``c^k beta`` with ``c`` the geometric mean of ``|lambda_1|`` and ``beta^{-1/k}``."""
    m1 = float(spec.moduli[0])
    gap_ok = m1**k * beta < 1
    c = np.sqrt(m1 * beta ** (-1.0 / k))
    return float(c**k * beta), bool(gap_ok)


def _agreeing_step(phi: JetMap, t: JetMap, k: int) -> JetMap:
    """``phi`` with its degree ``< k`` part replaced by that of ``t`` (after checking they agree)."""
    diff = (phi - t).degree_range(1, k - 1)
    if coefficient_norm(diff) > AGREEMENT_TOL:
        raise ContractViolation(f"family and triangular step differ below degree {k}")
    return phi - diff


def koenigs_intertwiner(
    family: DiscreteFamily,
    T: TriangularFamily,
    n: int,
    m_max: int = M_MAX,
    *,
    tol: float = CONV_TOL,
    agreement_order: int | None = None,
    beta: float | None = None,
) -> KoenigsLimit:
    """``h_n = lim_j T_{j,n} o phi_{n,j}``.

    Iterates ``X_j = Z_j o Y_j`` with ``Y_j = A^{n-j} phi_{n,j}`` and
    ``Z_j = T_{j,n} o A^{j-n}``, both tangent to the identity, and stops once two
    consecutive coefficient deltas are at most ``tol``.
    """
    if family.dim != T.dim or family.degree != T.degree:
        raise ContractViolation("family and triangular family differ in shape")
    if not np.allclose(family.spectrum.lambdas, T.spectrum.lambdas, rtol=0, atol=1e-14):
        raise ContractViolation("family and triangular family have different spectra")
    al = family.spectrum.alphas
    N, D = family.dim, family.degree
    if agreement_order is None:
        agreement_order = D + 1
        for p in range(family.horizon):
            diff = family.step(p) - T.step(p)
            for d in range(1, D + 1):
                if coefficient_norm(diff, d) > AGREEMENT_TOL:
                    agreement_order = min(agreement_order, d)
                    break
    k = agreement_order
    t_linear = T.is_linear()
    ident = JetMap.identity(N, D)
    Y = ident
    Z = ident
    X = ident
    deltas: list[float] = []
    small = 0
    for it in range(m_max):
        j = n + it
        phi_j = _agreeing_step(family.step(j), T.step(j), k) if k > 1 else family.step(j)
        Y = _finite(compose(rescale(phi_j, al, n - j - 1, j - n), Y), "Koenigs iterate", deltas)
        if not t_linear:
            Z = compose(Z, rescale(T.inverse_step(j), al, n - j, j + 1 - n))
        X_new = compose(Z, Y) if not t_linear else Y
        delta = coefficient_norm(X_new - X)
        deltas.append(delta)
        X = X_new
        small = small + 1 if delta <= tol else 0
        if small >= 2:
            pred, gap = (None, False)
            if beta is not None:
                pred, gap = predicted_rate(family.spectrum, beta, k)
            return KoenigsLimit(X, it + 1, deltas, geometric_ratio(deltas), pred, gap)
    raise NonConvergenceError(f"Koenigs limit for n={n} did not converge in {m_max} iterations", deltas)


def build_chain(
    family: DiscreteFamily,
    normalization: NormalizationResult,
    m_max: int = M_MAX,
    *,
    tol: float = CONV_TOL,
    horizon: int | None = None,
    check: bool = True,
) -> ChainJets:
    """Chain ``f_n = lim_m T_{m,0} o K_m o phi_{n,m}`` for ``n = 0..horizon``.

    In normalized form ``H_{n,m} = A^n T_{m,0} K_m phi_{n,m}`` obeys
    ``H_{n,m+1} = (A^{n-m} G_m A^{m-n}) o H_{n,m}`` where ``G_m = P_m E_m P_m^{-1}``,
    ``P_m = A^m T_{m,0}`` and ``E_m = T_{m+1,m} o psi_m`` with ``psi_m`` the
    normalized step.  ``E_m`` is the identity through degree ``l``, so the rescaled
    corrections shrink geometrically.
    """
    if normalization.family is not family:
        raise ContractViolation("normalization was computed for a different family")
    spec = family.spectrum
    al = spec.alphas
    N, D = family.dim, family.degree
    T = normalization.triangular
    psi = normalization.normalized_family
    k = normalization.agreement_order
    H = family.horizon if horizon is None else horizon
    ident = JetMap.identity(N, D)
    t_linear = T.is_linear()

    P = [ident]
    Pinv = [ident]

    def ensure_P(m: int) -> None:
        while len(P) <= m:
            p = len(P) - 1
            if t_linear:
                P.append(ident)
                Pinv.append(ident)
                continue
            step_inv = T.inverse_step(p)
            # P_{p+1} = A P_p A^{-1} o (A T_p^{-1}),  P_{p+1}^{-1} = (T_p A^{-1}) o A P_p^{-1} A^{-1}
            P.append(compose(rescale(P[p], al, 1, -1), rescale(step_inv, al, 1, 0)))
            Pinv.append(compose(rescale(T.step(p), al, 0, -1), rescale(Pinv[p], al, 1, -1)))

    G: dict[int, JetMap | None] = {}

    def G_at(m: int) -> JetMap | None:
        """``G_m - id`` restricted to degrees >= k, or ``None`` when it vanishes."""
        if m not in G:
            E = compose(T.inverse_step(m), psi.step(m))
            if not t_linear:
                ensure_P(m)
                E = compose(P[m], compose(E, Pinv[m]))
            corr = E - ident
            low = corr.degree_range(1, k - 1)
            if coefficient_norm(low) > AGREEMENT_TOL:
                raise ContractViolation(f"normalized step {m} departs from T below degree {k}")
            corr = corr.degree_range(k, D)
            G[m] = corr if corr.coeffs.any() else None
        return G[m]

    entries: list[JetMap] = []
    iterations: list[int] = []
    for n in range(H + 1):
        ensure_P(n)
        Hnm = compose(P[n], normalization.conjugator(n))
        small = 0
        deltas: list[float] = []
        for it in range(m_max):
            m = n + it
            corr = G_at(m)
            if corr is None:
                delta = 0.0
            else:
                C = ident + rescale(corr, al, n - m, m - n)
                new = _finite(compose(C, Hnm), "chain iterate", deltas)
                delta = coefficient_norm(new - Hnm)
                Hnm = new
            deltas.append(delta)
            small = small + 1 if delta <= tol else 0
            if small >= 2:
                break
        else:
            raise NonConvergenceError(f"chain entry {n} did not converge in {m_max} iterations", deltas)
        entries.append(Hnm)
        iterations.append(len(deltas))
    chain = ChainJets(spec, entries, "koenigs-normal-form")
    chain.diagnostics["iterations"] = iterations
    if check:
        chain.diagnostics["subordination_residual"] = subordination_residual(chain, family)
    return chain


def chain_from_koenigs(
    family: DiscreteFamily, normalization: NormalizationResult, n: int, m_max: int = M_MAX, *, tol: float = CONV_TOL
) -> JetMap:
    """Second construction path for ``A^n f_n``: ``P_n o h_n o K_n`` with ``h_n`` a Koenigs limit."""
    T = normalization.triangular
    al = family.spectrum.alphas
    lim = koenigs_intertwiner(
        normalization.normalized_family, T, n, m_max, tol=tol, agreement_order=normalization.agreement_order
    )
    P = reversed_scaled(T, n, al)
    return compose(P, compose(lim.jet, normalization.conjugator(n)))


def reversed_scaled(T: TriangularFamily, n: int, alphas: np.ndarray) -> JetMap:
    """``A^n T_{n,0}``, accumulated with unit-modulus rescalings."""
    ident = JetMap.identity(T.dim, T.degree)
    P = ident
    for p in range(n):
        P = compose(rescale(P, alphas, 1, -1), rescale(T.inverse_step(p), alphas, 1, 0))
    return P


def _scaled_extension(chain: ChainJets, family: DiscreteFamily, n: int, m_stop: int):
    """Yield ``(m, A^n f_m o phi_{n,m})`` for ``m = n..m_stop``."""
    al = family.spectrum.alphas
    Y = JetMap.identity(family.dim, family.degree)  # A^{n-m} phi_{n,m}
    for m in range(n, m_stop + 1):
        if m > n:
            Y = compose(rescale(family.step(m - 1), al, n - m, m - 1 - n), Y)
        yield m, compose(rescale(chain.normalized[m], al, n - m, m - n), Y)


def extend_chain_jet(chain: ChainJets, family: DiscreteFamily, n: int, m: int, *, normalized: bool = False) -> JetMap:
    """``f_m o phi_{n,m}``; equals ``f_n`` for a chain subordinate to ``family``."""
    if not 0 <= n <= m <= chain.horizon:
        raise ContractViolation(f"need 0 <= n <= m <= {chain.horizon}")
    out = None
    for _, out in _scaled_extension(chain, family, n, m):
        pass
    return out if normalized else rescale(out, family.spectrum.alphas, -n, 0)


def subordination_residual(chain: ChainJets, family: DiscreteFamily, *, max_gap: int | None = None) -> float:
    """``max_{n <= m} |A^n (f_m o phi_{n,m} - f_n)|`` over the chain's horizon."""
    worst = 0.0
    H = chain.horizon
    for n in range(H + 1):
        stop = H if max_gap is None else min(H, n + max_gap)
        for _, ext in _scaled_extension(chain, family, n, stop):
            worst = max(worst, coefficient_norm(ext - chain.normalized[n]))
    return worst


def transfer_map(chain_f: ChainJets, chain_g: ChainJets, n: int) -> JetMap:
    """``Psi_n = g_n o f_n^{-1}``."""
    if chain_f.dim != chain_g.dim or chain_f.degree != chain_g.degree:
        raise ContractViolation("chains differ in shape")
    if not np.allclose(chain_f.spectrum.lambdas, chain_g.spectrum.lambdas, rtol=0, atol=1e-14):
        raise ContractViolation("chains have different linear parts")
    hf, hg = chain_f.normalized[n], chain_g.normalized[n]
    eye = np.eye(chain_f.dim)
    if np.abs(hf.linear_part - eye).max() > 1e-12 or np.abs(hg.linear_part - eye).max() > 1e-12:
        raise ContractViolation("chain entries do not have linear part A^{-n}")
    return rescale(compose(hg, invert(hf)), chain_f.spectrum.alphas, -n, n)


def transfer_deviation(chain_f: ChainJets, chain_g: ChainJets) -> float:
    """``max_n |Psi_n - Psi_0|``; zero when the transfer map is independent of ``n``."""
    psi0 = transfer_map(chain_f, chain_g, 0)
    H = min(chain_f.horizon, chain_g.horizon)
    return max((coefficient_norm(transfer_map(chain_f, chain_g, n) - psi0) for n in range(1, H + 1)), default=0.0)


@dataclass(frozen=True)
class NormalityDiagnostic:
    weights: np.ndarray
    slope: float
    verdict: str
    bound_cap: float = BOUND_CAP
    slope_tol: float = SLOPE_TOL
    fitted_slope: float = 0.0

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "slope": self.slope,
            "fitted_slope": self.fitted_slope,
            "verdict": self.verdict,
        }


def growth_fit(weights: Sequence[float], start: int = 1) -> tuple[float, float]:
    """Power-law exponent of ``w_n`` for ``n >= start`` and its standard error.

    The error is inflated by the lag-1 autocorrelation of the residuals (AR(1)
    effective sample size), since chain weights wander slowly rather than jitter.
    """
    w = np.asarray(weights, dtype=float)
    e = w[start:]
    if e.size < 3 or not np.any(e > 0):
        return 0.0, 0.0
    x = np.log(np.arange(start, len(w), dtype=float))
    # exact zeros (linear tail of a finite family) sit far below the level, not at -inf
    y = np.log(np.maximum(e, 1e-3 * np.median(e[e > 0])))
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    r = y - y.mean() - slope * xc
    rr = float(r @ r)
    if rr < 1e-24:
        return slope, 0.0
    rho = float(np.clip(r[1:] @ r[:-1] / rr, 0.0, 0.95))
    var = rr / (e.size - 2) / (xc @ xc) * (1 + rho) / (1 - rho)
    return slope, float(np.sqrt(var))


def growth_slope(weights: Sequence[float]) -> float:
    """Growth exponent that the data support at two standard errors.

    Takes the smaller lower bound of two fits, over the whole horizon and over its
    second half, so a rise has to persist across both to count.
    """
    H = len(weights) - 1
    bounds = [s - 2 * se for s, se in (growth_fit(weights, lo) for lo in (1, max(1, H // 2)))]
    return min(bounds)


def normality_diagnostic(
    chain: ChainJets,
    *,
    bound_cap: float = BOUND_CAP,
    slope_tol: float = SLOPE_TOL,
    growth_tol: float = GROWTH_TOL,
) -> NormalityDiagnostic:
    """Classify ``w_n = |A^n f_n|_{deg >= 2}`` as bounded, growing or inconclusive.

    ``slope`` is :func:`growth_slope`: linear growth reads as 1, while a bounded chain
    whose weights drift around a level reads at or below 0. ``fitted_slope`` is the
    plain second-half exponent, kept for reporting.
    """
    if chain.horizon < 8:
        raise ContractViolation("normality diagnostic needs horizon >= 8")
    w = np.array([coefficient_norm(h, min_degree=2) for h in chain.normalized])
    slope = growth_slope(w)
    if w.max() > bound_cap or slope >= growth_tol:
        verdict = "growing"
    elif slope <= slope_tol:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    fitted = growth_fit(w, max(1, chain.horizon // 2))[0]
    return NormalityDiagnostic(w, slope, verdict, bound_cap, slope_tol, fitted)
