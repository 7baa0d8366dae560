import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loewner_jets.corpus import random_family, random_triangular_family
from loewner_jets.errors import CertificateError, ContractViolation
from loewner_jets.families import (
    DiscreteFamily,
    TriangularFamily,
    attraction_check,
    contraction_radius,
    degree_bound_composed,
    family_from_dict,
    growth_constants,
    reversed_map,
    triangular_inverse_step,
    two_index_map,
)
from loewner_jets.jets import JetMap, coefficient_norm, compose, invert


def adversary_family(a, lam1=0.6 * np.exp(1j), lam2=0.36, degree=4):
    spec = __import__("loewner_jets").Spectrum.discrete([lam1, lam2])
    steps = [JetMap.from_terms(2, degree, {(0, (1, 0)): lam1, (1, (0, 1)): lam2, (1, (2, 0)): x}) for x in a]
    return TriangularFamily(spec, steps)


def test_two_index_identity_and_linear():
    F = random_family(np.random.default_rng(0), horizon=6)
    assert two_index_map(F, 3, 3) == JetMap.identity(2, 6)
    L = TriangularFamily.linear(F.spectrum, 4, 5)
    got = two_index_map(L, 1, 4)
    assert coefficient_norm(got - JetMap.diagonal(F.spectrum.lambdas**3, 4)) < 1e-15
    with pytest.raises(ContractViolation):
        two_index_map(F, 4, 2)


def test_two_index_closed_form_for_shear_family():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    F = adversary_family(a)
    l1, l2 = F.spectrum.lambdas
    n, m = 2, 9
    coeff = sum(l2 ** (m - 1 - p) * a[p] * l1 ** (2 * (p - n)) for p in range(n, m))
    want = JetMap.from_terms(2, 4, {(0, (1, 0)): l1 ** (m - n), (1, (0, 1)): l2 ** (m - n), (1, (2, 0)): coeff})
    assert coefficient_norm(two_index_map(F, n, m) - want) < 1e-13


def test_semigroup_law():
    F = random_family(np.random.default_rng(2), horizon=12)
    for n, l, m in [(0, 3, 7), (2, 2, 9), (5, 8, 12)]:
        lhs = compose(two_index_map(F, l, m), two_index_map(F, n, l))
        assert coefficient_norm(lhs - two_index_map(F, n, m)) < 1e-10


def test_memo_is_thread_safe():
    F = random_family(np.random.default_rng(3), horizon=20)
    ref = [compose(two_index_map(F, 0, k), JetMap.identity(2, 6)) for k in range(21)]
    G = F.with_steps(F.steps)
    out = {}

    def work(k):
        out[k] = G.two_index_map(0, k)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(21)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(coefficient_norm(out[k] - ref[k]) == 0 for k in range(21))


def test_linear_part_checked():
    spec = __import__("loewner_jets").Spectrum.discrete([0.5, 0.25])
    with pytest.raises(ContractViolation):
        DiscreteFamily(spec, [JetMap.diagonal([0.5, 0.3], 3)])


def test_triangular_inverse_examples():
    lam = np.array([0.5 + 0.2j, 0.3])
    assert triangular_inverse_step(JetMap.diagonal(lam, 3)) == JetMap.diagonal(1 / lam, 3)
    t = 0.7 - 0.1j
    T = JetMap.from_terms(2, 3, {(0, (1, 0)): lam[0], (1, (0, 1)): lam[1], (1, (2, 0)): t})
    want = JetMap.from_terms(2, 3, {(0, (1, 0)): 1 / lam[0], (1, (0, 1)): 1 / lam[1], (1, (2, 0)): -t / (lam[1] * lam[0] ** 2)})
    assert coefficient_norm(triangular_inverse_step(T) - want) < 1e-14
    with pytest.raises(ContractViolation):
        triangular_inverse_step(JetMap.from_terms(2, 3, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.3, (0, (0, 2)): 1.0}))


def test_triangular_inverse_exact_at_n3():
    F = random_triangular_family(np.random.default_rng(4), dim=3, degree=4, horizon=3)
    for T in F.steps:
        S = triangular_inverse_step(T)
        assert S.degree >= 4
        big = T.with_degree(S.degree)
        ident = JetMap.identity(3, S.degree)
        assert coefficient_norm(compose(big, S) - ident) < 1e-12
        assert coefficient_norm(compose(S, big) - ident) < 1e-12
        assert S.is_triangular(1 / T.linear_part.diagonal(), 1e-14)


def test_reversed_map():
    F = random_triangular_family(np.random.default_rng(5), horizon=6)
    assert reversed_map(F, 2, 2) == JetMap.identity(2, 6)
    assert coefficient_norm(reversed_map(F, 5, 1) - invert(two_index_map(F, 1, 5))) < 1e-10
    L = TriangularFamily.linear(F.spectrum, 6, 6)
    assert coefficient_norm(reversed_map(L, 4, 0) - JetMap.diagonal(F.spectrum.lambdas ** -4.0, 6)) < 1e-12


def test_degree_bound():
    spec = __import__("loewner_jets").Spectrum.discrete([0.5, 0.3, 0.2])
    assert degree_bound_composed(TriangularFamily.linear(spec, 6, 3)) == 1
    F = adversary_family([0.1, 0.2])
    assert degree_bound_composed(F) == 2
    T = JetMap.from_terms(3, 6, {(0, (1, 0, 0)): 0.5, (1, (0, 1, 0)): 0.3, (2, (0, 0, 1)): 0.2,
                                 (1, (2, 0, 0)): 0.4, (2, (1, 2, 0)): 0.3})
    G = TriangularFamily(spec, [T] * 10)
    assert degree_bound_composed(G) == 6
    for k in range(1, 11):
        assert two_index_map(G, 0, k).actual_degree(1e-14) <= 6


def test_growth_constants_linear():
    lam = np.array([0.5, 0.25])
    G = growth_constants(TriangularFamily.linear(__import__("loewner_jets").Spectrum.discrete(lam), 4, 3))
    assert G.C == pytest.approx(1.05 * 4.0)
    assert (G.d, G.M) == (1, 3)
    assert G.gamma == pytest.approx(3 * G.C)
    assert G.beta / G.gamma == pytest.approx(2 * 2 * np.sqrt(2))


def test_growth_constants_refuses_unbounded():
    with pytest.raises(CertificateError):
        growth_constants(adversary_family([1e9]))


def test_attraction():
    rng = np.random.default_rng(6)
    z = (rng.random((20, 2)) - 0.5) + 1j * (rng.random((20, 2)) - 0.5)
    lin = TriangularFamily.linear(__import__("loewner_jets").Spectrum.discrete([0.5, 0.3]), 4, 40)
    rep = attraction_check(lin, z, 25)
    assert rep.passed
    n_needed = int(np.ceil(np.log(1e-6) / np.log(0.6))) + 5
    F = adversary_family(0.05 * np.ones(n_needed))
    rep = attraction_check(F, z, n_needed)
    assert rep.passed and rep.first_component_error < 1e-12


def test_contraction_radius():
    spec = __import__("loewner_jets").Spectrum.discrete([0.5, 0.5])
    phi = JetMap.from_terms(2, 3, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.5, (1, (2, 0)): 1.0})
    F = DiscreteFamily(spec, [phi])
    s = contraction_radius(F, 0.75)
    assert s == pytest.approx(0.25)
    rng = np.random.default_rng(7)
    z = rng.standard_normal((1000, 2)) + 1j * rng.standard_normal((1000, 2))
    z *= (s * rng.random((1000, 1))) / np.linalg.norm(z, axis=1, keepdims=True)
    assert np.all(np.linalg.norm(phi(z), axis=1) <= 0.75 * np.linalg.norm(z, axis=1) + 1e-15)
    assert contraction_radius(DiscreteFamily(spec, [JetMap.diagonal([0.5, 0.5], 3)]), 0.75) == 1.0
    assert contraction_radius(F, 0.9) > s
    with pytest.raises(ContractViolation):
        contraction_radius(F, 0.4)


def test_family_json_round_trip_and_generators():
    F = random_family(np.random.default_rng(8), horizon=3)
    G = family_from_dict(F.to_dict())
    assert all(a == b for a, b in zip(F.steps, G.steps))
    P = family_from_dict({"generator": {"kind": "periodic", "spectrum": F.spectrum.to_dict(), "step": F.steps[0].to_dict()}})
    assert P.tail == "periodic" and P.step(7) == F.steps[0]
    S = family_from_dict({"generator": {"kind": "scenario", "name": "complex_resonance_semigroup", "params": {"c": 0.01}}}, horizon=9)
    assert S.horizon == 9
    with pytest.raises(ContractViolation):
        family_from_dict({"generator": {"kind": "nope"}})


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_triangular_growth_bounds_sampled(seed, k):
    rng = np.random.default_rng(seed)
    F = random_triangular_family(rng, horizon=8)
    G = growth_constants(F)
    Tk0 = reversed_map(F, k, 0)
    z = np.exp(2j * np.pi * rng.random((30, 2))) * rng.random((30, 2))
    assert np.all(np.abs(Tk0(z)) <= G.gamma**k)
    w = 0.5 * np.exp(2j * np.pi * rng.random((30, 2))) * rng.random((30, 2))
    v = 0.5 * np.exp(2j * np.pi * rng.random((30, 2))) * rng.random((30, 2))
    lhs = np.linalg.norm(Tk0(w) - Tk0(v), axis=1)
    assert np.all(lhs <= G.beta**k * np.linalg.norm(w - v, axis=1))


@given(st.integers(0, 10_000))
def test_two_index_of_triangular_is_triangular(seed):
    F = random_triangular_family(np.random.default_rng(seed), dim=3, degree=5, horizon=5)
    assert two_index_map(F, 1, 5).is_triangular(F.spectrum.lambdas**4, 1e-12)
