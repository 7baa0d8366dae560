"""Continuous time: Herglotz fields, jet-level flows, and chains at real times.

The evolution ``phi_{s,t}`` solves ``d/dt phi = H(phi, t)``.  Writing
``phi = L(t) + N`` with ``L(t) = exp(Lambda (t - s))`` exact, the nonlinear part obeys

    N' = Lambda N + G_t o (L(t) + N),

which is integrated with classical RK4 on the coefficient array.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .chains import ChainJets, normality_diagnostic
from .errors import ContractViolation
from .families import DiscreteFamily
from .jets import JetMap, coefficient_norm, compose, evaluate, jacobian, rescale_power
from .spectrum import Spectrum, complex_to_json

STEP = 1e-3
PDE_DELTA = 1e-3
SAMPLE_RADIUS = 0.05
DISSIPATIVE_MARGIN = 1e-12
INDEPENDENCE_TOL = 1e-9


@dataclass(frozen=True)
class SchedulePiece:
    t_start: float
    t_end: float
    perturbation: JetMap


@dataclass(frozen=True)
class HerglotzSpec:
    """``H(z, t) = Lambda z + G_t(z)`` with ``G_t`` piecewise constant in ``t``.

    With ``periodic=True`` the schedule lives on ``[0, 1]`` and repeats with period 1.
    Times not covered by any piece carry no perturbation.
    """

    spectrum: Spectrum
    schedule: tuple[SchedulePiece, ...]
    T: float
    degree: int
    periodic: bool = False
    check_dissipative: bool = True

    def __post_init__(self):
        if self.spectrum.mode != "continuous":
            raise ContractViolation("a Herglotz field needs a continuous-mode spectrum")
        object.__setattr__(self, "schedule", tuple(sorted(self.schedule, key=lambda p: p.t_start)))
        span = 1.0 if self.periodic else self.T
        prev = 0.0
        for p in self.schedule:
            G = p.perturbation
            if G.dim != self.spectrum.dim or G.degree != self.degree:
                raise ContractViolation("perturbation shape does not match the field")
            if np.abs(G.linear_part).max() != 0:
                raise ContractViolation("perturbations must have no linear part")
            if not (0 <= p.t_start < p.t_end <= span + 1e-12) or p.t_start < prev - 1e-12:
                raise ContractViolation(f"schedule piece [{p.t_start}, {p.t_end}] is out of order or range")
            prev = p.t_end
        if self.T <= 0:
            raise ContractViolation("horizon T must be positive")
        if self.check_dissipative:
            worst = dissipativity_defect(self)
            if worst > DISSIPATIVE_MARGIN:
                raise ContractViolation(f"field fails the dissipativity sample: Re<H(z,t), z> = {worst:.3e}")

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def alphas(self) -> np.ndarray:
        return self.spectrum.alphas

    def perturbation(self, t: float) -> JetMap | None:
        """``G_t`` (right-continuous; ``None`` where the schedule is silent)."""
        if self.periodic:
            t = t - math.floor(t)
        for p in self.schedule:
            if p.t_start <= t < p.t_end:
                return p.perturbation
        if self.schedule and not self.periodic and t >= self.T and self.schedule[-1].t_end >= self.T:
            return self.schedule[-1].perturbation
        return None

    def field(self, t: float) -> JetMap:
        lin = JetMap.diagonal(self.alphas, self.degree)
        G = self.perturbation(t)
        return lin if G is None else lin + G

    def __call__(self, z, t: float) -> np.ndarray:
        return evaluate(self.field(t), z)

    def breakpoints(self, s: float, t: float) -> list[float]:
        """Schedule boundaries and integers strictly inside ``(s, t)``."""
        pts = set(float(k) for k in range(math.floor(s) + 1, math.ceil(t)))
        if self.periodic:
            for k in range(math.floor(s), math.ceil(t) + 1):
                for p in self.schedule:
                    pts.update((k + p.t_start, k + p.t_end))
        else:
            for p in self.schedule:
                pts.update((p.t_start, p.t_end))
        return sorted(x for x in pts if s < x < t)

    def to_dict(self) -> dict:
        return {
            "spectrum": self.spectrum.to_dict(),
            "degree": self.degree,
            "T": self.T,
            "periodic": self.periodic,
            "schedule": [
                {"t_start": p.t_start, "t_end": p.t_end, "perturbation": p.perturbation.to_dict()}
                for p in self.schedule
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping, *, degree: int | None = None) -> HerglotzSpec:
        try:
            spec = Spectrum.from_dict(data["spectrum"])
            pieces = [
                SchedulePiece(float(p["t_start"]), float(p["t_end"]), JetMap.from_dict(p["perturbation"]))
                for p in data["schedule"]
            ]
            deg = int(data.get("degree", pieces[0].perturbation.degree if pieces else degree or 6))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            if isinstance(exc, ContractViolation):
                raise
            raise ContractViolation(f"malformed Herglotz JSON: {exc}") from exc
        if spec.mode != "continuous":
            spec = Spectrum.continuous(tuple(spec.alphas))
        if degree is not None and degree != deg:
            pieces = [SchedulePiece(p.t_start, p.t_end, p.perturbation.with_degree(degree)) for p in pieces]
            deg = degree
        return cls(spec, tuple(pieces), float(data["T"]), deg, bool(data.get("periodic", False)))


def dissipativity_defect(H: HerglotzSpec, *, samples: int = 400, radius: float = 1.0, seed: int = 0) -> float:
    """Largest sampled ``Re <H(z, t), z>`` over ``|z| < radius`` and the schedule's pieces."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, H.dim)) + 1j * rng.standard_normal((samples, H.dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z *= radius * (1 - 1e-9) * rng.random((samples, 1)) ** (1 / (2 * H.dim))
    times = [0.5 * (p.t_start + p.t_end) for p in H.schedule] or [0.0]
    worst = -np.inf
    for t in times:
        val = np.real(np.sum(H(z, t) * np.conj(z), axis=1))
        worst = max(worst, float(val.max()))
    return worst


# ---------------------------------------------------------------------------
# integration


def _rk4_interval(Nc, G, alphas, s0, a, b, n_steps, basis):
    """Advance the nonlinear coefficients ``Nc`` of ``phi_{s0, a}`` to time ``b``."""
    dim = basis.dim
    h = (b - a) / n_steps
    lam_col = alphas[:, None]
    args = (basis.parent, basis.var, basis.pa, basis.pb, basis.pr)
    compose_coeffs = _kernels.compose_coeffs
    idx = np.arange(dim)

    def rhs(tau, X):
        phi = X.copy()
        phi[idx, idx] += np.exp(alphas * (tau - s0))
        return lam_col * X + compose_coeffs(G, phi, *args)

    for k in range(n_steps):
        tau = a + k * h
        k1 = rhs(tau, Nc)
        k2 = rhs(tau + h / 2, Nc + (h / 2) * k1)
        k3 = rhs(tau + h / 2, Nc + (h / 2) * k2)
        k4 = rhs(tau + h, Nc + h * k3)
        Nc = Nc + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return Nc


def integrate_evolution(H: HerglotzSpec, s: float, t: float, step: float = STEP) -> JetMap:
    """The jet of ``phi_{s,t}``, with linear part exactly ``exp(Lambda (t - s))``."""
    if step <= 0:
        raise ContractViolation("step must be positive")
    if not (0 <= s <= t) or (not H.periodic and t > H.T + 1e-12):
        raise ContractViolation(f"need 0 <= s <= t <= T, got s={s}, t={t}, T={H.T}")
    basis = JetMap.identity(H.dim, H.degree).basis
    al = H.alphas
    Nc = np.zeros((H.dim, basis.size), dtype=np.complex128)
    grid = [s, *H.breakpoints(s, t), t]
    for a, b in zip(grid[:-1], grid[1:]):
        if b <= a:
            continue
        G = H.perturbation(0.5 * (a + b))
        if G is None or not G.coeffs.any():
            Nc = np.exp(al * (b - a))[:, None] * Nc  # N' = Lambda N
            continue
        n_steps = max(1, math.ceil((b - a) / step - 1e-9))
        Nc = _rk4_interval(Nc, np.ascontiguousarray(G.coeffs), al, s, a, b, n_steps, basis)
    Nc[:, : H.dim] = np.diag(np.exp(al * (t - s)))
    return JetMap(H.dim, H.degree, Nc)


def discretize(H: HerglotzSpec, step: float = STEP) -> DiscreteFamily:
    """``phi_{n,n+1}`` for ``n < floor(T)``; a periodic field gives a one-step periodic family."""
    spec = H.spectrum.to_discrete()
    if H.periodic:
        return DiscreteFamily(spec, [integrate_evolution(H, 0.0, 1.0, step)], "periodic")
    n_steps = int(math.floor(H.T + 1e-12))
    if n_steps < 1:
        raise ContractViolation("discretization needs T >= 1")
    steps = [integrate_evolution(H, float(n), float(n + 1), step) for n in range(n_steps)]
    return DiscreteFamily(spec, steps, "linear", H.degree)


# ---------------------------------------------------------------------------
# chains at real times


@dataclass
class ContinuousChain:
    """Chain jets at sample times, stored as ``g_s = exp(Lambda s) f_s``."""

    times: list[float]
    normalized: list[JetMap]
    discrete: ChainJets
    field: HerglotzSpec
    step: float
    diagnostics: dict = field(default_factory=dict)

    def entry(self, k: int) -> JetMap:
        """``f_{s_k}``."""
        return rescale_power(self.normalized[k], self.field.alphas, -self.times[k], 0)

    def jet_at(self, s: float, j: int | None = None, *, normalized: bool = False) -> JetMap:
        """``f_s = f_j o phi_{s,j}`` for any real ``s`` (default ``j = ceil(s)``)."""
        g = extension_at(self.discrete, self.field, s, self.step, j)
        return g if normalized else rescale_power(g, self.field.alphas, -s, 0)

    def to_dict(self) -> dict:
        al = self.field.alphas
        return {
            "spectrum": self.field.spectrum.to_dict(),
            "degree": self.field.degree,
            "times": list(self.times),
            "scaling": "entries hold exp(Lambda s) f_s",
            "entries": [g.to_dict() for g in self.normalized],
            "linear_parts": [[complex_to_json(complex(np.exp(-a * s))) for a in al] for s in self.times],
            **self.diagnostics,
        }


def _is_integer(s: float) -> bool:
    return abs(s - round(s)) < 1e-12


def extension_at(chain: ChainJets, H: HerglotzSpec, s: float, step: float = STEP, j: int | None = None) -> JetMap:
    """``exp(Lambda s) f_j o phi_{s,j}``, normalized; integer ``s`` returns the stored entry."""
    if j is None:
        if _is_integer(s):
            return chain.normalized[int(round(s))]
        j = math.ceil(s)
    if not (j >= s and j <= chain.horizon):
        raise ContractViolation(f"need s <= j <= {chain.horizon}, got s={s}, j={j}")
    phi = integrate_evolution(H, s, float(j), step)
    # exp(Lambda s) A^{-j} h_j o phi_{s,j} = exp(Lambda (s - j)) h_j o phi_{s,j}
    g = compose(chain.normalized[j], phi)
    return g.left_matmul(np.diag(np.exp(H.alphas * (s - j))))


def transfer_factor(spec: Spectrum) -> float:
    """``sup_{0 <= u <= 1} |exp(-Lambda u)| |exp(Lambda u)|`` in the operator norm."""
    re = np.real(spec.alphas)
    return float(np.exp(re.max() - re.min()))


def extend_to_real_times(
    chain: ChainJets, H: HerglotzSpec, times: Sequence[float], step: float = STEP, *, check: bool = True
) -> ContinuousChain:
    """Chain entries ``f_s = f_j o phi_{s,j}`` with ``j = ceil(s)``."""
    times = [float(s) for s in times]
    if any(s < 0 or s > chain.horizon + 1e-12 for s in times):
        raise ContractViolation(f"sample times must lie in [0, {chain.horizon}]")
    entries = [extension_at(chain, H, s, step) for s in times]
    out = ContinuousChain(times, entries, chain, H, step)
    if not check:
        return out
    eye = np.eye(H.dim)
    lin_err = max(float(np.abs(g.linear_part - eye).max()) for g in entries)
    if lin_err > 1e-12:
        raise ContractViolation(f"linear part of an extended entry is off by {lin_err:.2e}")
    indep = 0.0
    for s, g in zip(times, entries):
        j = math.ceil(s) if not _is_integer(s) else int(round(s))
        if j + 1 <= chain.horizon:
            indep = max(indep, coefficient_norm(extension_at(chain, H, s, step, j + 1) - g))
    if indep > INDEPENDENCE_TOL:
        raise ContractViolation(f"extension depends on the chosen integer time (delta {indep:.2e})")
    weights = [coefficient_norm(g, min_degree=2) for g in entries]
    out.diagnostics["independence_delta"] = indep
    out.diagnostics["weights"] = weights
    if chain.horizon >= 8:
        diag = normality_diagnostic(chain)
        bound = transfer_factor(H.spectrum) * float(diag.weights.max())
        out.diagnostics["normality"] = {
            "discrete_verdict": diag.verdict,
            "continuous_max_weight": max(weights, default=0.0),
            "transfer_bound": bound,
        }
    return out


def pde_residual_of(
    f_at: Callable[[float], JetMap], H: HerglotzSpec, s: float, z_samples, delta: float = PDE_DELTA
) -> float:
    """``max_z |(f_{s+d}(z) - f_{s-d}(z)) / 2d + D f_s(z) H(z, s)|``."""
    z = np.atleast_2d(np.asarray(z_samples, dtype=np.complex128))
    dt = (evaluate(f_at(s + delta), z) - evaluate(f_at(s - delta), z)) / (2 * delta)
    J = jacobian(f_at(s), z)
    Hz = H(z, s)
    res = dt + np.einsum("kij,kj->ki", J, Hz)
    return float(np.abs(res).max())


def pde_residual(
    chain: ContinuousChain, H: HerglotzSpec, s: float, z_samples, delta: float = PDE_DELTA
) -> float:
    """Loewner PDE residual of the chain at time ``s`` by central differences in time."""
    if s - delta < 0 or s + delta > chain.discrete.horizon:
        raise ContractViolation(f"time {s} is too close to the ends of the grid for offset {delta}")
    if any(abs(b - s) <= delta for b in H.breakpoints(s - 2 * delta, s + 2 * delta) if not _is_integer(b)):
        raise ContractViolation(f"a schedule breakpoint lies within {delta} of {s}")
    j = math.ceil(s + delta)
    return pde_residual_of(lambda u: chain.jet_at(u, j), H, s, z_samples, delta)


def sample_points(dim: int, count: int, radius: float = SAMPLE_RADIUS, seed: int = 0) -> np.ndarray:
    """Random points on the sphere of the given radius."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return radius * z / np.linalg.norm(z, axis=1, keepdims=True)
