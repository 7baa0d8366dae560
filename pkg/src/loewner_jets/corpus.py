"""Seeded generators for random families used by tests, the CLI and benchmarks."""

from __future__ import annotations

import numpy as np

from .jets import JetMap, monomial_basis, random_jet
from .families import DiscreteFamily, TriangularFamily
from .spectrum import RES_TOL, Spectrum, enumerate_resonances

# |lambda_2| = |lambda_1|^s.  Exponents below 2 keep every homological branch
# backward; the thin band above 2 adds forward terms with modest growth ratios.
EXPONENT_BANDS = ((1.2, 1.9), (2.03, 2.06))


def random_spectrum(rng: np.random.Generator, dim: int = 2, *, modulus=(0.25, 0.7)) -> Spectrum:
    """Random discrete spectrum with no real resonances through degree 8."""
    for _ in range(1000):
        m1 = rng.uniform(*modulus)
        mods = [m1]
        for _ in range(dim - 1):
            lo, hi = EXPONENT_BANDS[rng.integers(len(EXPONENT_BANDS))]
            mods.append(mods[-1] ** rng.uniform(lo, hi) if dim > 2 else m1 ** rng.uniform(lo, hi))
        lam = np.array(mods) * np.exp(1j * rng.uniform(-np.pi, np.pi, dim))
        spec = Spectrum.discrete(sorted(lam, key=abs, reverse=True))
        if not len(enumerate_resonances(spec, 8, RES_TOL)):
            return spec
    raise RuntimeError("could not draw a resonance-free spectrum")


def random_family(
    rng: np.random.Generator,
    dim: int = 2,
    degree: int = 6,
    horizon: int = 64,
    *,
    scale: float = 0.2,
    decay: float = 0.5,
    spectrum: Spectrum | None = None,
) -> DiscreteFamily:
    """Random dilation family with diagonal linear part and Gaussian higher terms."""
    spec = random_spectrum(rng, dim) if spectrum is None else spectrum
    A = np.diag(spec.lambdas)
    steps = [random_jet(rng, dim, degree, scale=scale, decay=decay, linear=A) for _ in range(horizon)]
    return DiscreteFamily(spec, steps, "linear", degree)


def random_triangular_step(rng: np.random.Generator, spec: Spectrum, degree: int, *, scale: float = 0.3, poly_degree: int = 2) -> JetMap:
    """``z_j -> lambda_j z_j + p_j(z_1..z_{j-1})`` with ``deg p_j <= poly_degree``."""
    N = spec.dim
    b = monomial_basis(N, degree)
    c = np.zeros((N, b.size), dtype=np.complex128)
    c[:, :N] = np.diag(spec.lambdas)
    for j in range(1, N):
        for col in range(N, b.size):
            e = b.exps[col]
            if b.degrees[col] <= poly_degree and not e[j:].any():
                c[j, col] = scale * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
    return JetMap(N, degree, c)


def random_triangular_family(
    rng: np.random.Generator, dim: int = 2, degree: int = 6, horizon: int = 8, *, scale: float = 0.3
) -> TriangularFamily:
    spec = random_spectrum(rng, dim)
    steps = [random_triangular_step(rng, spec, degree, scale=scale) for _ in range(horizon)]
    return TriangularFamily(spec, steps, "linear", degree)
