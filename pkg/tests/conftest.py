import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from loewner_jets import Spectrum
from loewner_jets.continuous import HerglotzSpec, SchedulePiece
from loewner_jets.jets import JetMap, random_jet

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def _mul(p, q, degree):
    out = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            if sum(e) <= degree:
                out[e] = out.get(e, 0) + c1 * c2
    return out


def to_polys(f: JetMap) -> list[dict]:
    polys = [{} for _ in range(f.dim)]
    for j, I, c in f.terms():
        polys[j][tuple(I)] = complex(c)
    return polys


def brute_compose(outer: JetMap, inner: JetMap) -> JetMap:
    """Substitution oracle on exponent dictionaries; powers built by repeated multiplication."""
    D, N = outer.degree, outer.dim
    inner_p = to_polys(inner)
    terms = {}
    for j, poly in enumerate(to_polys(outer)):
        for I, c in poly.items():
            acc = {(0,) * N: 1.0}
            for v, e in enumerate(I):
                for _ in range(e):
                    acc = _mul(acc, inner_p[v], D)
            for e, val in acc.items():
                if sum(e) >= 1:
                    terms[(j, e)] = terms.get((j, e), 0) + c * val
    return JetMap.from_terms(N, D, terms)


def well_conditioned(rng, dim, degree, scale=0.5):
    """Random jet whose linear part has singular values in [0.5, 1]."""
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    L = Q @ np.diag(rng.uniform(0.5, 1.0, dim))
    return random_jet(rng, dim, degree, scale=scale, decay=0.5, linear=L)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


FIELD_ALPHAS = [-0.5 + 0.3j, -0.8 - 0.2j]


def small_field(T=10.0, degree=6, periodic=False):
    """Dissipative two-piece field without resonances through degree 6."""
    G1 = JetMap.from_terms(2, degree, {(0, (1, 1)): 0.04, (1, (2, 0)): 0.05 - 0.02j, (1, (0, 3)): 0.01j})
    G2 = JetMap.from_terms(2, degree, {(0, (2, 0)): -0.03j, (1, (1, 1)): 0.04})
    span = 1.0 if periodic else T
    pieces = (SchedulePiece(0.0, span / 3, G1), SchedulePiece(span / 3, span, G2))
    return HerglotzSpec(Spectrum.continuous(FIELD_ALPHAS), pieces, T, degree, periodic=periodic)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
