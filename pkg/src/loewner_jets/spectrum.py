"""Multipliers, resonances and the structural constants ``q`` and ``l``."""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

RES_TOL = 1e-9
NEAR_BAND = 1e-3

MODES = ("continuous", "discrete")


def _complex_from_json(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v["re"]), float(v.get("im", 0.0)))
    return complex(v)


def complex_to_json(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


@dataclass(frozen=True)
class Spectrum:
    """Diagonal data ``alpha_j`` (continuous) or ``lambda_j = exp(alpha_j)`` (discrete).

    Entries must be ordered with ``|lambda_1| >= ... >= |lambda_N|``, all inside the
    unit disc.  Use :meth:`sorted` to reorder arbitrary input.
    """

    values: tuple[complex, ...]
    mode: str = "discrete"

    def __post_init__(self):
        vals = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.mode not in MODES:
            raise ContractViolation(f"mode must be one of {MODES}, got {self.mode!r}")
        if not vals:
            raise ContractViolation("empty spectrum")
        mods = np.abs(self.lambdas)
        if not np.all(mods > 0) or not np.all(mods < 1):
            raise ContractViolation(f"multipliers must satisfy 0 < |lambda| < 1, got moduli {mods}")
        if np.any(np.diff(mods) > 0):
            raise ContractViolation("spectrum must be ordered by non-increasing modulus")

    @classmethod
    def discrete(cls, lambdas: Sequence[complex]) -> Spectrum:
        return cls(tuple(lambdas), "discrete")

    @classmethod
    def continuous(cls, alphas: Sequence[complex]) -> Spectrum:
        return cls(tuple(alphas), "continuous")

    @classmethod
    def sorted(cls, values: Sequence[complex], mode: str = "discrete") -> tuple[Spectrum, list[int]]:
        """Reorder ``values`` into admissible order; returns the spectrum and the permutation used."""
        vals = [complex(v) for v in values]
        key = (lambda v: -v.real) if mode == "continuous" else (lambda v: -abs(v))
        perm = sorted(range(len(vals)), key=lambda k: key(vals[k]))
        return cls(tuple(vals[k] for k in perm), mode), perm

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def lambdas(self) -> np.ndarray:
        v = np.array(self.values, dtype=np.complex128)
        return np.exp(v) if self.mode == "continuous" else v

    @property
    def alphas(self) -> np.ndarray:
        """Logarithms of the multipliers (principal branch in discrete mode)."""
        v = np.array(self.values, dtype=np.complex128)
        return v if self.mode == "continuous" else np.log(v)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.lambdas)

    def to_discrete(self) -> Spectrum:
        return self if self.mode == "discrete" else Spectrum.discrete(tuple(self.lambdas))

    def power(self, index: Sequence[int]) -> complex:
        """``lambda^I``."""
        return complex(np.prod(self.lambdas ** np.asarray(index)))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "values": [complex_to_json(v) for v in self.values]}

    @classmethod
    def from_dict(cls, data: Mapping) -> Spectrum:
        try:
            return cls(tuple(_complex_from_json(v) for v in data["values"]), data.get("mode", "discrete"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ContractViolation):
                raise
            raise ContractViolation(f"malformed spectrum JSON: {exc}") from exc


@dataclass(frozen=True)
class Resonance:
    component: int  # 0-based target j
    index: tuple[int, ...]
    kind: str  # "complex" or "real-pure"
    defect: float  # | |lambda_j| - |lambda^I| | for real-pure, |lambda_j - lambda^I| for complex

    def to_dict(self) -> dict:
        return {"component": self.component, "index": list(self.index), "kind": self.kind, "defect": self.defect}


@dataclass(frozen=True)
class NearResonance:
    component: int
    index: tuple[int, ...]
    defect: float

    def to_dict(self) -> dict:
        return {"component": self.component, "index": list(self.index), "defect": self.defect}


@dataclass(frozen=True)
class ResonanceReport:
    entries: tuple[Resonance, ...]
    max_degree: int
    tol: float
    near: tuple[NearResonance, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, component: int, index: Sequence[int]) -> Resonance | None:
        key = (component, tuple(index))
        for e in self.entries:
            if (e.component, e.index) == key:
                return e
        return None

    @property
    def complex_entries(self) -> tuple[Resonance, ...]:
        return tuple(e for e in self.entries if e.kind == "complex")

    def to_dict(self) -> dict:
        return {
            "max_degree": self.max_degree,
            "tol": self.tol,
            "entries": [e.to_dict() for e in self.entries],
            "near_resonances": [e.to_dict() for e in self.near],
        }


def multi_indices(dim: int, degree: int) -> list[tuple[int, ...]]:
    """All exponents of total degree ``degree`` in graded-lex order (``z1`` first)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(dim), degree):
        e = [0] * dim
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    out.sort(reverse=True)
    return out


def enumerate_resonances(
    spec: Spectrum, max_degree: int, tol: float = RES_TOL, near_band: float = NEAR_BAND
) -> ResonanceReport:
    """Every ``(j, I)`` with ``2 <= |I| <= max_degree`` and ``| |lambda_j| - |lambda^I| | <= tol``."""
    if max_degree < 2:
        raise ContractViolation("max_degree must be at least 2")
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    lam = spec.lambdas
    mods = np.abs(lam)
    entries: list[Resonance] = []
    near: list[NearResonance] = []
    for d in range(2, max_degree + 1):
        for idx in multi_indices(spec.dim, d):
            lam_I = complex(np.prod(lam ** np.asarray(idx)))
            mod_I = float(np.prod(mods ** np.asarray(idx)))
            for j in range(spec.dim):
                real_defect = abs(mods[j] - mod_I)
                if real_defect <= tol:
                    # |lambda^I| = |lambda_j| forces i_j = ... = i_N = 0
                    assert all(i == 0 for i in idx[j:]), (j, idx)
                    cdef = abs(lam[j] - lam_I)
                    if cdef <= tol:
                        entries.append(Resonance(j, idx, "complex", cdef))
                    else:
                        entries.append(Resonance(j, idx, "real-pure", real_defect))
                elif real_defect < near_band:
                    near.append(NearResonance(j, idx, real_defect))
    return ResonanceReport(tuple(entries), max_degree, tol, tuple(near))


def resonance_cutoff_q(spec: Spectrum) -> int:
    """Smallest ``q`` with ``|lambda_1|^q < |lambda_N|``."""
    m1 = float(spec.moduli[0])
    mN = float(spec.moduli[-1])
    q = 1
    while m1**q >= mN:
        q += 1
    return q


def koenigs_degree_l(spec: Spectrum, beta: float) -> int:
    """Smallest ``l >= 1`` with ``|lambda_1|^l < 1/beta``."""
    if beta < 1:
        raise ContractViolation(f"beta must be >= 1, got {beta}")
    m1 = float(spec.moduli[0])
    target = 1.0 / beta
    l = 1
    while m1**l >= target:
        l += 1
    return l


def taylor_constant(M: float, r: float, A_norm: float, k: int) -> float:
    """``C_k = M / r^k + ||A|| / r^(k-1)``."""
    if M <= 0 or r <= 0 or k < 2:
        raise ContractViolation("need M > 0, r > 0, k >= 2")
    return M / r**k + A_norm / r ** (k - 1)
