"""Named counterexample scenarios with their assertion suites.

Each scenario builds the families and chains of one counterexample and checks the
claims made about it.  Reports have the shape
``{"name", "params", "assertions": [{"claim", "paper_ref", "pass", "detail"}], "warnings"}``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .chains import ChainJets, build_chain, normality_diagnostic, subordination_residual, transfer_deviation, transfer_map
from .continuous import HerglotzSpec, SchedulePiece, discretize, extend_to_real_times
from .errors import ContractViolation
from .families import DiscreteFamily
from .jets import JetMap, coefficient_norm, compose
from .normalize import autonomous_linearize, normalize_family
from .spectrum import RES_TOL, Spectrum, enumerate_resonances

SUB_TOL = 1e-9
LAW_TOL = 1e-10
MATCH_TOL = 1e-9
ADVERSARY_HORIZON = 256

DEFAULTS: dict[str, dict] = {
    "two_normal_chains": {"alpha": [-1.0, -2.0], "horizon": 32},
    "complex_resonance_semigroup": {"alpha1": -1.0, "alpha2": None, "c": 0.05, "horizon": 128},
    "pure_real_resonance_adversary": {
        "modulus": 0.6,
        "theta": math.pi * math.sqrt(2),
        "r": 0.1,
        "arcs": 8,
        "horizon": ADVERSARY_HORIZON,
        "control": False,
    },
    "periodic_no_complex_resonance": {
        "alpha": [[-0.5, 0.7], [-1.0, 0.3]],
        "horizon": 16,
        "step": 1e-3,
        "times": [0.25, 2.5, 7.75],
    },
}
SCENARIOS = tuple(DEFAULTS)


@dataclass
class Scenario:
    name: str
    params: dict
    degree: int
    family: DiscreteFamily
    chains: dict[str, ChainJets] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _complex(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v["re"]), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _params(name: str, params: Mapping | None, horizon: int | None) -> dict:
    if name not in DEFAULTS:
        raise ContractViolation(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    p = dict(DEFAULTS[name])
    unknown = set(params or {}) - set(p)
    if unknown:
        raise ContractViolation(f"unknown parameters for {name}: {sorted(unknown)}")
    p.update(params or {})
    if horizon is not None:
        p["horizon"] = int(horizon)
    if int(p["horizon"]) < 8:
        raise ContractViolation("scenario horizon must be at least 8")
    return p


# ---------------------------------------------------------------------------
# closed-form maps


def shear_map(dim_alphas, coeff: complex, degree: int, scale=None) -> JetMap:
    """``(s_1 z_1, s_2 (z_2 + coeff z_1^2))`` with ``s = scale`` (identity by default)."""
    s = np.ones(2, dtype=complex) if scale is None else np.asarray(scale, dtype=complex)
    return JetMap.from_terms(2, degree, {(0, (1, 0)): s[0], (1, (0, 1)): s[1], (1, (2, 0)): s[1] * coeff})


def semigroup_map(alpha1: complex, c: complex, t: float, degree: int) -> JetMap:
    """``psi_t(z) = (e^{a1 t} z_1, e^{2 a1 t}(z_2 + c t z_1^2))``."""
    return shear_map(None, c * t, degree, np.exp(np.array([alpha1, 2 * alpha1]) * t))


def two_chain_shear(alphas, s: float, degree: int) -> JetMap:
    """``k_s(z) = (z_1, z_2 + e^{(a2 - 2 a1) s} z_1^2)``."""
    return shear_map(None, np.exp((alphas[1] - 2 * alphas[0]) * s), degree)


def semigroup_field(alpha1: complex, c: complex, T: float, degree: int) -> HerglotzSpec:
    """Generator ``(a1 z_1, 2 a1 z_2 + c z_1^2)`` of the resonant semigroup."""
    spec = Spectrum.continuous([alpha1, 2 * alpha1])
    G = JetMap.from_terms(2, degree, {(1, (2, 0)): c})
    return HerglotzSpec(spec, (SchedulePiece(0.0, T, G),), T, degree)


def adversary_coefficients(zeta: complex, horizon: int, r: float, arcs: int) -> tuple[np.ndarray, int]:
    """Shear coefficients ``a_{m-1,m}``: ``r/2`` when ``zeta^m`` lies in the most visited arc.

    Arc ``j`` (0-based) is ``2 pi j / arcs <= arg < 2 pi (j + 1) / arcs``.
    """
    m = np.arange(1, horizon + 1)
    ang = np.mod(np.angle(zeta**m), 2 * np.pi)
    which = np.minimum((ang / (2 * np.pi / arcs)).astype(int), arcs - 1)
    best = int(np.bincount(which, minlength=arcs).argmax())
    return np.where(which == best, r / 2, 0.0), best


def periodic_field(alphas, degree: int) -> HerglotzSpec:
    """A period-1 field with two schedule pieces."""
    spec = Spectrum.continuous(alphas)
    G1 = JetMap.from_terms(2, degree, {(1, (2, 0)): 0.3, (0, (2, 0)): 0.1, (0, (1, 1)): 0.05j})
    G2 = JetMap.from_terms(2, degree, {(1, (2, 0)): -0.2j, (1, (1, 1)): 0.1, (0, (3, 0)): 0.05})
    pieces = (SchedulePiece(0.0, 0.5, G1), SchedulePiece(0.5, 1.0, G2))
    return HerglotzSpec(spec, pieces, 1.0, degree, periodic=True)


# ---------------------------------------------------------------------------
# builders


def _build_two_normal_chains(p: dict, degree: int) -> Scenario:
    al = np.array([_complex(a) for a in p["alpha"]])
    if al.size != 2:
        raise ContractViolation("two_normal_chains needs two exponents")
    if not al[1].real <= 2 * al[0].real:
        raise ContractViolation("two_normal_chains requires Re alpha2 <= 2 Re alpha1")
    H = int(p["horizon"])
    spec = Spectrum.continuous(al).to_discrete()
    fam = DiscreteFamily(spec, [], "linear", degree)
    ident = JetMap.identity(2, degree)
    sc = Scenario("two_normal_chains", p, degree, fam)
    sc.chains["linear"] = ChainJets(spec, [ident] * (H + 1), "closed-form")
    sc.chains["sheared"] = ChainJets(spec, [two_chain_shear(al, n, degree) for n in range(H + 1)], "closed-form")
    sc.extras["alphas"] = al
    return sc


def _build_semigroup(p: dict, degree: int) -> Scenario:
    a1 = _complex(p["alpha1"])
    if p.get("alpha2") is not None and abs(_complex(p["alpha2"]) - 2 * a1) > 1e-12:
        raise ContractViolation("complex_resonance_semigroup requires alpha2 = 2 alpha1")
    if a1.real >= 0:
        raise ContractViolation("complex_resonance_semigroup requires Re alpha1 < 0")
    c = _complex(p["c"])
    H = int(p["horizon"])
    spec = Spectrum.continuous([a1, 2 * a1]).to_discrete()
    fam = DiscreteFamily(spec, [semigroup_map(a1, c, 1.0, degree)] * H, "linear", degree)
    sc = Scenario("complex_resonance_semigroup", p, degree, fam)
    sc.extras.update(alpha1=a1, c=c)
    return sc


def _build_adversary(p: dict, degree: int) -> Scenario:
    rho, theta, r = float(p["modulus"]), float(p["theta"]), float(p["r"])
    if not 0 < rho < 1:
        raise ContractViolation("adversary requires 0 < |lambda1| < 1")
    if r <= 0:
        raise ContractViolation("adversary requires r > 0")
    lam1, lam2 = rho * np.exp(1j * theta), rho**2
    zeta = lam1**2 / lam2
    if abs(zeta - 1) <= RES_TOL:
        raise ContractViolation("adversary requires lambda1^2 != lambda2 (theta not a multiple of pi)")
    H = int(p["horizon"])
    if p.get("control"):
        a, best = np.zeros(H), -1
    else:
        a, best = adversary_coefficients(zeta, H, r, int(p["arcs"]))
    spec = Spectrum.discrete([lam1, lam2])
    steps = [
        JetMap.from_terms(2, degree, {(0, (1, 0)): lam1, (1, (0, 1)): lam2, (1, (2, 0)): a[n]}) for n in range(H)
    ]
    sc = Scenario("pure_real_resonance_adversary", p, degree, DiscreteFamily(spec, steps, "linear", degree))
    sums = np.concatenate([[0.0], np.cumsum(a * zeta ** np.arange(1, H + 1))])
    sc.extras.update(zeta=zeta, lam1=lam1, coefficients=a, arc=best, partial_sums=sums)
    return sc


def _build_periodic(p: dict, degree: int) -> Scenario:
    al = [_complex(a) for a in p["alpha"]]
    if abs(al[1].real - 2 * al[0].real) > 1e-12:
        raise ContractViolation("periodic_no_complex_resonance requires Re alpha2 = 2 Re alpha1")
    field_ = periodic_field(al, degree)
    report = enumerate_resonances(field_.spectrum.to_discrete(), degree, RES_TOL)
    if report.complex_entries:
        e = report.complex_entries[0]
        raise ContractViolation(f"periodic_no_complex_resonance requires no complex resonance; found ({e.component}, {e.index})")
    fam = discretize(field_, float(p["step"]))
    sc = Scenario("periodic_no_complex_resonance", p, degree, fam)
    sc.extras.update(field=field_, resonances=report)
    return sc


BUILDERS: dict[str, Callable[[dict, int], Scenario]] = {
    "two_normal_chains": _build_two_normal_chains,
    "complex_resonance_semigroup": _build_semigroup,
    "pure_real_resonance_adversary": _build_adversary,
    "periodic_no_complex_resonance": _build_periodic,
}


def scenario_family(name: str, params: Mapping | None = None, *, degree: int | None = None, horizon: int | None = None) -> DiscreteFamily:
    """Only the discrete family of a scenario (no chains, no assertions)."""
    p = _params(name, params, horizon)
    sc = BUILDERS[name](p, degree or 6)
    if name == "two_normal_chains":
        return DiscreteFamily(sc.family.spectrum, [sc.family.linear_map] * int(p["horizon"]), "linear", sc.degree)
    return sc.family


def build_scenario(name: str, params: Mapping | None = None, *, degree: int = 6, horizon: int | None = None) -> Scenario:
    """Build families and chains; parameter constraints are checked here."""
    if degree < 2:
        raise ContractViolation("degree must be at least 2")
    p = _params(name, params, horizon)
    sc = BUILDERS[name](p, degree)
    if name == "two_normal_chains":
        return sc
    if name == "periodic_no_complex_resonance":
        norm = normalize_family(sc.family)
        sc.extras["normalization"] = norm
        sc.chains["koenigs"] = build_chain(sc.family, norm, horizon=int(p["horizon"]))
        return sc
    norm = normalize_family(sc.family)
    sc.extras["normalization"] = norm
    sc.chains["koenigs"] = build_chain(sc.family, norm)
    return sc


# ---------------------------------------------------------------------------
# assertions


def _entry(claim: str, ref: str, ok: bool, detail: str) -> dict:
    return {"claim": claim, "paper_ref": ref, "pass": bool(ok), "detail": detail}


def _assert_two_normal_chains(sc: Scenario) -> list[dict]:
    al, D = sc.extras["alphas"], sc.degree
    out = []
    worst = 0.0
    for s, t in ((0.0, 0.5), (0.3, 1.7), (1.0, 4.25), (2.5, 2.5)):
        E = JetMap.diagonal(np.exp(al * (t - s)), D)
        lhs = compose(two_chain_shear(al, t, D), E)
        rhs = compose(E, two_chain_shear(al, s, D))
        worst = max(worst, coefficient_norm(lhs - rhs))
    out.append(_entry("k_t o exp(Lambda(t-s)) = exp(Lambda(t-s)) o k_s", "two normal chains: intertwining identity", worst <= 1e-12, f"max residual {worst:.3e}"))
    fam = DiscreteFamily(sc.family.spectrum, [], "linear", D)
    verdicts = {}
    for key, ch in sc.chains.items():
        sub = subordination_residual(ch, fam)
        diag = normality_diagnostic(ch)
        verdicts[key] = diag.verdict
        out.append(_entry(f"{key} chain is subordinate to the linear family", "two normal chains: Loewner chain property", sub <= SUB_TOL, f"subordination residual {sub:.3e}"))
        out.append(_entry(f"{key} chain is normal", "two normal chains: uniformly bounded family", diag.verdict == "bounded", f"verdict {diag.verdict}, slope {diag.slope:.3e}, max weight {diag.weights.max():.3e}"))
    dev = transfer_deviation(sc.chains["linear"], sc.chains["sheared"])
    psi = transfer_map(sc.chains["linear"], sc.chains["sheared"], 0)
    size = coefficient_norm(psi, min_degree=2)
    out.append(_entry("the two chains differ by an n-independent nontrivial map", "two normal chains: non-uniqueness", dev <= 1e-12 and size > 0.5, f"transfer deviation {dev:.3e}, nonlinear size {size:.3e}"))
    return out


def _assert_semigroup(sc: Scenario) -> list[dict]:
    a1, c, D = sc.extras["alpha1"], sc.extras["c"], sc.degree
    out = []
    worst = 0.0
    for s, t in ((0.5, 0.25), (1.0, 1.0), (0.3, 2.2)):
        lhs = compose(semigroup_map(a1, c, t, D), semigroup_map(a1, c, s, D))
        worst = max(worst, coefficient_norm(lhs - semigroup_map(a1, c, s + t, D)))
    out.append(_entry("psi_t o psi_s = psi_{t+s}", "resonant semigroup: semigroup law", worst <= 1e-15, f"max residual {worst:.3e}"))
    norm = sc.extras["normalization"]
    kept = abs(norm.triangular.step(0).coefficient(1, (2, 0)))
    out.append(_entry("normal form keeps the resonant z1^2 term", "resonant semigroup: complex resonance alpha2 = 2 alpha1", kept > 0, f"|coefficient| {kept:.3e}"))
    ch = sc.chains["koenigs"]
    a = np.array([h.coefficient(1, (2, 0)) for h in ch.normalized])
    n = np.arange(a.size)
    err = float(np.abs(a - (a[0] - c * n)).max())
    out.append(_entry("shear coefficient a_n = a_0 - c n", "resonant semigroup: a_t = a_0 - c t", err <= LAW_TOL, f"max deviation {err:.3e} over n <= {ch.horizon}"))
    sub = ch.diagnostics["subordination_residual"]
    out.append(_entry("constructed chain is subordinate", "resonant semigroup: chain property", sub <= SUB_TOL, f"subordination residual {sub:.3e}"))
    diag = normality_diagnostic(ch)
    out.append(_entry("no normal chain: verdict growing", "resonant semigroup: (h_s) cannot be a normal family", diag.verdict == "growing", f"verdict {diag.verdict}, slope {diag.slope:.3f}"))
    return out


def running_max_ratio(sums: np.ndarray) -> float:
    """Running max of ``|S_n|`` at the horizon over its value at half the horizon."""
    env = np.maximum.accumulate(np.abs(sums))
    H = sums.size - 1
    half = env[H // 2]
    return float(env[H] / half) if half > 0 else (math.inf if env[H] > 0 else 1.0)


def _assert_adversary(sc: Scenario) -> list[dict]:
    ex = sc.extras
    zeta, lam1, sums = ex["zeta"], ex["lam1"], ex["partial_sums"]
    ch = sc.chains["koenigs"]
    H = ch.horizon
    control = bool(sc.params.get("control"))
    alpha = np.array([h.coefficient(1, (2, 0)) for h in ch.normalized])
    n = np.arange(H + 1)
    lhs = alpha * zeta**n * lam1**2
    rhs = alpha[0] * lam1**2 - sums
    err = float(np.abs(lhs - rhs).max() / max(1.0, np.abs(sums).max()))
    out = [
        _entry("chain coefficients obey alpha_n zeta^n lambda1^2 = alpha_0 lambda1^2 - sum a zeta^j", "adversary: recursion for alpha_n", err <= MATCH_TOL, f"relative deviation {err:.3e}"),
    ]
    sub = ch.diagnostics["subordination_residual"]
    out.append(_entry("constructed chain is subordinate", "adversary: chain property", sub <= SUB_TOL, f"subordination residual {sub:.3e}"))
    ratio = running_max_ratio(sums)
    diag = normality_diagnostic(ch)
    if control:
        out.append(_entry("control a = 0: partial sums vanish", "adversary: negative control", np.abs(sums).max() == 0, f"max |S_n| {np.abs(sums).max():.3e}"))
        out.append(_entry("control a = 0: verdict bounded", "adversary: negative control", diag.verdict == "bounded", f"verdict {diag.verdict}"))
        return out
    detail = f"running max ratio {ratio:.4f}, arc {ex['arc'] + 1} of {sc.params['arcs']}"
    if H < ADVERSARY_HORIZON:
        sc.warnings.append(f"horizon {H} is below {ADVERSARY_HORIZON}; growth left unasserted ({detail}, verdict {diag.verdict})")
        return out
    out.append(_entry("partial sums grow: running max doubles from H/2 to H", "adversary: unbounded partial sums", ratio >= 2.0, detail))
    out.append(_entry("no normal chain: verdict growing", "adversary: no normal family solves the equation", diag.verdict == "growing", f"verdict {diag.verdict}, slope {diag.slope:.3f}"))
    return out


def _assert_periodic(sc: Scenario) -> list[dict]:
    rep = sc.extras["resonances"]
    norm = sc.extras["normalization"]
    ch = sc.chains["koenigs"]
    fam = sc.family
    out = [
        _entry("spectrum has a pure real resonance and no complex one", "periodic families: pure real resonances", len(rep) > 0 and not rep.complex_entries, f"{len(rep)} real resonances, {len(rep.complex_entries)} complex"),
        _entry("normal form is linear", "periodic families: pure real resonances are not obstructions", norm.triangular.is_linear(1e-12), f"nonlinear size {max(coefficient_norm(s, min_degree=2) for s in norm.triangular.steps):.3e}"),
    ]
    K = autonomous_linearize(fam.step(0))
    dk = max(coefficient_norm(norm.conjugator(n) - K) for n in range(4))
    out.append(_entry("conjugators match the autonomous linearization", "periodic families: Poincare linearization", dk <= MATCH_TOL, f"max deviation {dk:.3e}"))
    dh = max(coefficient_norm(h - K) for h in ch.normalized)
    out.append(_entry("chain matches the autonomous-linearization chain", "periodic families: discrete normal Loewner chain", dh <= MATCH_TOL, f"max deviation {dh:.3e}"))
    sub = ch.diagnostics["subordination_residual"]
    out.append(_entry("constructed chain is subordinate", "periodic families: chain property", sub <= SUB_TOL, f"subordination residual {sub:.3e}"))
    diag = normality_diagnostic(ch)
    out.append(_entry("chain is normal", "periodic families: normal Loewner chain", diag.verdict == "bounded", f"verdict {diag.verdict}, slope {diag.slope:.3e}"))
    cc = extend_to_real_times(ch, sc.extras["field"], sc.params["times"], float(sc.params["step"]))
    delta = cc.diagnostics["independence_delta"]
    out.append(_entry("real-time extension does not depend on the integer time", "periodic families: discrete to continuous chain", delta <= MATCH_TOL, f"delta {delta:.3e}"))
    sc.extras["continuous_chain"] = cc
    return out


CHECKS: dict[str, Callable[[Scenario], list[dict]]] = {
    "two_normal_chains": _assert_two_normal_chains,
    "complex_resonance_semigroup": _assert_semigroup,
    "pure_real_resonance_adversary": _assert_adversary,
    "periodic_no_complex_resonance": _assert_periodic,
}


def run_assertions(sc: Scenario) -> dict:
    entries = CHECKS[sc.name](sc)
    params = {k: (v if not isinstance(v, complex) else {"re": v.real, "im": v.imag}) for k, v in sc.params.items()}
    return {
        "name": sc.name,
        "params": params,
        "degree": sc.degree,
        "assertions": entries,
        "passed": all(e["pass"] for e in entries),
        "warnings": list(sc.warnings),
    }


def run_scenario(name: str, params: Mapping | None = None, *, degree: int = 6, horizon: int | None = None) -> dict:
    return run_assertions(build_scenario(name, params, degree=degree, horizon=horizon))
