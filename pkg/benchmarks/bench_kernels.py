"""Compare the numba kernels with the numpy fallback.

    python benchmarks/bench_kernels.py            # kernel timings
    python benchmarks/bench_kernels.py --e2e      # also a normalize + chain run per backend

Kernel timings call both implementations directly.  The end-to-end run starts one
subprocess per backend so that ``LOEWNER_JETS_DISABLE_NUMBA`` takes effect at import.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from loewner_jets import _kernels
from loewner_jets.jets import monomial_basis, random_jet

E2E_SCRIPT = """
import time, numpy as np
from loewner_jets import BACKEND
from loewner_jets.corpus import random_family
from loewner_jets.normalize import normalize_family
from loewner_jets.chains import build_chain
fam = random_family(np.random.default_rng(0), dim={dim}, degree={degree}, horizon={horizon})
build_chain(fam, normalize_family(fam))  # warm-up (jit compile or cache load)
t = time.perf_counter()
chain = build_chain(fam, normalize_family(fam))
print(BACKEND, time.perf_counter() - t, abs(chain.normalized[0].coeffs).sum())
"""


def best_of(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(configs, repeat: int) -> list[tuple]:
    rng = np.random.default_rng(0)
    rows = []
    for N, D in configs:
        b = monomial_basis(N, D)
        f = random_jet(rng, N, D, scale=0.5, decay=0.5).coeffs
        g = random_jet(rng, N, D, scale=0.5, decay=0.5).coeffs
        z = rng.standard_normal((256, N)) + 1j * rng.standard_normal((256, N))
        cases = {
            "compose": (
                lambda: _kernels.compose_numba(f, g, b.parent, b.var, b.pa, b.pb, b.pr),
                lambda: _kernels.compose_numpy(f, g, b.parent, b.var, b.pa, b.pb, b.pr),
            ),
            "poly_mul": (
                lambda: _kernels.poly_mul_numba(f[0], g[0], b.pa, b.pb, b.pr, b.size),
                lambda: _kernels.poly_mul_numpy(f[0], g[0], b.pa, b.pb, b.pr, b.size),
            ),
            "eval_monomials": (
                lambda: _kernels.eval_monomials_numba(z, b.parent, b.var),
                lambda: _kernels.eval_monomials_numpy(z, b.parent, b.var),
            ),
        }
        for name, (fast, slow) in cases.items():
            diff = float(np.abs(fast() - slow()).max())  # also triggers compilation
            number = 20 if b.size < 100 else 3
            t_nb = best_of(fast, repeat, number)
            t_np = best_of(slow, repeat, number)
            rows.append((name, N, D, b.size, t_nb, t_np, diff))
    return rows


def bench_e2e(dim: int, degree: int, horizon: int) -> None:
    script = E2E_SCRIPT.format(dim=dim, degree=degree, horizon=horizon)
    for disable in ("0", "1"):
        env = dict(os.environ, LOEWNER_JETS_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        backend, seconds, checksum = out.stdout.split()
        print(f"  {backend:6s} {float(seconds):8.3f} s   checksum {float(checksum):.12e}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--e2e", action="store_true", help="time normalize + chain under each backend")
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        sys.exit("numba is not importable; nothing to compare")

    configs = [(2, 6), (3, 6), (2, 10), (4, 6), (3, 10)]
    print(f"{'kernel':15s} {'N':>2s} {'D':>3s} {'M':>5s} {'numba':>11s} {'numpy':>11s} {'speedup':>8s} {'max diff':>9s}")
    for name, N, D, M, t_nb, t_np, diff in bench_kernels(configs, args.repeat):
        print(f"{name:15s} {N:2d} {D:3d} {M:5d} {t_nb * 1e3:9.3f}ms {t_np * 1e3:9.3f}ms {t_np / t_nb:7.1f}x {diff:9.1e}")
    if args.e2e:
        print("\nnormalize + chain, N=2, D=6, horizon 64:")
        bench_e2e(2, 6, 64)


if __name__ == "__main__":
    main()
