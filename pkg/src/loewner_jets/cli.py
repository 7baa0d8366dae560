"""``loewner-jets`` command line.

Exit codes: 0 success, 1 failed check, 2 bad input, 3 small divisor, 4 non-convergence.
Errors are written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import chains as ch
from . import continuous as ct
from .errors import CertificateError, ComplexResonanceError, ContractViolation, NonConvergenceError, SmallDivisorError
from .families import DiscreteFamily, family_from_dict
from .jets import coefficient_norm
from .normalize import normalize_family
from .scenarios import SCENARIOS, run_scenario
from .spectrum import NEAR_BAND, RES_TOL, Spectrum, enumerate_resonances

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DIVISOR, EXIT_CONVERGENCE = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def _clean(obj):
    """Recursively make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    return obj


def dumps(obj) -> str:
    # Python's float repr is the shortest string that round-trips, so output is bit-stable.
    return json.dumps(_clean(obj), indent=1, ensure_ascii=True, allow_nan=False) + "\n"


def _emit(payload, out: str | None) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _error(kind: str, message: str, extra: dict | None = None) -> None:
    body = {**(extra or {}), "error": kind, "message": message}
    sys.stderr.write(json.dumps(_clean(body), sort_keys=True) + "\n")


def _load(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_family(path: str, args) -> DiscreteFamily:
    data = _load(path)
    if not isinstance(data, dict):
        raise InputError("family JSON must be an object")
    fam = family_from_dict(data, degree=args.degree, horizon=args.horizon)
    if args.degree is not None and args.degree != fam.degree:
        fam = DiscreteFamily(fam.spectrum, [s.with_degree(args.degree) for s in fam.steps], fam.tail, args.degree)
    if args.horizon is not None and fam.tail == "linear" and args.horizon < fam.horizon:
        fam = fam.with_steps(fam.steps[: args.horizon])
    return fam


# ---------------------------------------------------------------------------
# subcommands


def cmd_resonances(args) -> int:
    data = _load(args.file)
    values = data.get("values") if isinstance(data, dict) else data
    mode = data.get("mode", "discrete") if isinstance(data, dict) else "discrete"
    if not isinstance(values, list):
        raise InputError("spectrum JSON needs a 'values' list")
    try:
        parsed = [complex(float(v["re"]), float(v.get("im", 0.0))) if isinstance(v, dict) else complex(v) for v in values]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed spectrum value: {exc}") from exc
    spec, perm = Spectrum.sorted(parsed, mode)
    degree = args.degree or 6
    report = enumerate_resonances(spec, max(degree, 2), args.tol_res, NEAR_BAND)
    out = {
        "header": {
            "mode": mode,
            "sorted": perm != list(range(len(perm))),
            "permutation": perm,
            "note": "indices refer to the sorted spectrum; permutation[k] is the input position of entry k",
        },
        "spectrum": spec.to_dict(),
        "report": report.to_dict(),
    }
    _emit(out, args.out)
    return EXIT_OK


def cmd_normalize(args) -> int:
    fam = _load_family(args.file, args)
    res = normalize_family(fam, tol=args.tol_res)
    _emit(res.to_dict(), args.out)
    return EXIT_OK


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in r])


def _plot_dir(args) -> Path | None:
    if not args.plot_data:
        return None
    p = Path(args.plot_data)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _discrete_chain(fam: DiscreteFamily, args, horizon: int | None = None):
    norm = normalize_family(fam, tol=args.tol_res)
    chain = ch.build_chain(fam, norm, args.m_max, tol=args.tol_conv, horizon=horizon)
    return norm, chain


def cmd_chain(args) -> int:
    data = _load(args.file)
    if not isinstance(data, dict):
        raise InputError("chain input must be a JSON object")
    plot = _plot_dir(args)
    if "schedule" in data:
        return _chain_herglotz(data, args, plot)
    fam = _load_family(args.file, args)
    horizon = args.horizon if fam.tail == "periodic" and args.horizon else None
    if fam.tail == "periodic" and horizon is None:
        horizon = 16
    norm, chain = _discrete_chain(fam, args, horizon)
    out = chain.to_dict()
    if chain.horizon >= 8:
        out["normality"] = ch.normality_diagnostic(chain).to_dict()
    out["normalization"] = {"q": norm.q, "l": norm.l, "agreement_order": norm.agreement_order, "warnings": norm.warnings}
    if plot:
        w = [coefficient_norm(h, min_degree=2) for h in chain.normalized]
        _write_csv(plot / "weights.csv", ["n", "w_n"], enumerate(w))
    _emit(out, args.out)
    return EXIT_OK


def _chain_herglotz(data: dict, args, plot: Path | None) -> int:
    H = ct.HerglotzSpec.from_dict(data, degree=args.degree)
    fam = ct.discretize(H, args.step)
    horizon = int(math.floor(H.T + 1e-12)) if not H.periodic else (args.horizon or 16)
    norm, chain = _discrete_chain(fam, args, horizon if H.periodic else None)
    times = args.times if args.times is not None else [float(n) for n in range(chain.horizon + 1)]
    cc = ct.extend_to_real_times(chain, H, times, args.step)
    out = cc.to_dict()
    out["discrete_chain"] = chain.to_dict()
    if chain.horizon >= 8:
        out["discrete_chain"]["normality"] = ch.normality_diagnostic(chain).to_dict()
    rng_seed = args.seed if args.seed is not None else 0
    z = ct.sample_points(H.dim, 16, seed=rng_seed)
    residuals = []
    for s in times:
        try:
            residuals.append({"s": s, "residual": ct.pde_residual(cc, H, s, z)})
        except ContractViolation as exc:
            residuals.append({"s": s, "residual": None, "skipped": str(exc)})
    out["pde_residuals"] = residuals
    if plot:
        w = [coefficient_norm(h, min_degree=2) for h in chain.normalized]
        _write_csv(plot / "weights.csv", ["n", "w_n"], enumerate(w))
        ref = ct.integrate_evolution(H, 0.0, 1.0, args.step / 2)
        rows = [(h, coefficient_norm(ct.integrate_evolution(H, 0.0, 1.0, h) - ref)) for h in (8 * args.step, 4 * args.step, 2 * args.step)]
        _write_csv(plot / "steps.csv", ["step", "error"], rows)
    _emit(out, args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.name not in SCENARIOS:
        raise InputError(f"unknown scenario {args.name!r}; choose from {', '.join(SCENARIOS)}")
    report = run_scenario(args.name, degree=args.degree or 6, horizon=args.horizon)
    _emit(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_verify(args) -> int:
    chain = ch.ChainJets.from_dict(_load(args.chain))
    fam = _load_family(args.family, args)
    sub = ch.subordination_residual(chain, fam)
    out = {"subordination_residual": sub, "tolerance": args.tol_residual, "passed": sub <= args.tol_residual}
    if chain.horizon >= 8:
        out["normality"] = ch.normality_diagnostic(chain).to_dict()
    _emit(out, args.out)
    return EXIT_OK if out["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------


def _positive(x: str) -> float:
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {x}")
    return v


def _count(x: str) -> int:
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {x}")
    return v


def _degree(x: str) -> int:
    v = int(x)
    if v < 2:
        raise argparse.ArgumentTypeError("degree must be at least 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--degree", type=_degree, default=None, help="jet truncation degree (default 6)")
    common.add_argument("--tol-res", type=_positive, default=RES_TOL, help="resonance tolerance")
    common.add_argument("--tol-conv", type=_positive, default=ch.CONV_TOL, help="Koenigs convergence tolerance")
    common.add_argument("--tol-residual", type=_positive, default=1e-9, help="residual tolerance for verify")
    common.add_argument("--horizon", type=int, default=None)
    common.add_argument("--step", type=_positive, default=ct.STEP, help="RK4 step")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--plot-data", metavar="DIR", default=None, help="write CSV tables into DIR")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    p = argparse.ArgumentParser(prog="loewner-jets", description="Normal forms and Loewner chains on polynomial jets.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("resonances", parents=[common], help="enumerate resonances of a spectrum")
    s.add_argument("file")
    s.set_defaults(func=cmd_resonances)
    s = sub.add_parser("normalize", parents=[common], help="normal form of a discrete family")
    s.add_argument("file")
    s.set_defaults(func=cmd_normalize)
    s = sub.add_parser("chain", parents=[common], help="Loewner chain of a family or Herglotz field")
    s.add_argument("file")
    s.add_argument("--times", type=float, nargs="+", default=None, help="real sample times (Herglotz input)")
    s.add_argument("--m-max", type=_count, default=ch.M_MAX, help="iteration cap for the Koenigs limits")
    s.set_defaults(func=cmd_chain)
    s = sub.add_parser("scenario", parents=[common], help="run a counterexample scenario")
    s.add_argument("name")
    s.set_defaults(func=cmd_scenario)
    s = sub.add_parser("verify", parents=[common], help="re-check a stored chain against a family")
    s.add_argument("chain")
    s.add_argument("family")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            _error("usage", "invalid command line")
            return EXIT_INPUT
        return EXIT_OK
    try:
        return args.func(args)
    except SmallDivisorError as exc:
        _error("small_divisor", str(exc), exc.payload())
        return EXIT_DIVISOR
    except NonConvergenceError as exc:
        _error("non_convergence", str(exc), exc.payload())
        return EXIT_CONVERGENCE
    except (InputError, ContractViolation) as exc:
        _error("invalid_input", str(exc))
        return EXIT_INPUT
    except (ComplexResonanceError, CertificateError) as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
