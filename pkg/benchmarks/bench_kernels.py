"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import itertools
import json
import sys
import timeit

import numpy as np

from hdram import kernels
from hdram.codebook import _encode, build_product_codebook, pua_alphabets
from hdram.despread import gram_operator


def workloads(seed=0):
    rng = np.random.default_rng(seed)
    cb = build_product_codebook(pua_alphabets([12, 12, 12]), 1728)
    flat, offsets = _encode([cw.tokens for cw in cb.codewords[:400]])
    codes = np.array(list(itertools.product(range(4), repeat=5)))  # distinct rows, no early exit
    K, V = rng.normal(size=(256, 128)), rng.normal(size=(256, 128))
    Q, P = rng.normal(size=(512, 128)), rng.normal(size=(64, 128))
    A = gram_operator(rng.normal(size=(32, 128)))
    h = rng.normal(size=128)
    h /= np.linalg.norm(h)
    return {
        "bifix_violations (400 words)": lambda k: k.bifix_violations(flat, offsets),
        "min_hamming (1024 x 5)": lambda k: k.min_hamming(codes),
        "accumulate_outer (256 pairs, d=128)": lambda k: k.accumulate_outer(K, V),
        "batch_decode (512 x 64, d=128)": lambda k: k.batch_decode(Q, P, 1.0),
        "power_iteration (d=128, 200 steps)": lambda k: k.power_iteration(A, h, 1e-300, 200),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available()
    if "compiled" not in backends:
        print("compiled extension not built; timing the python backend only", file=sys.stderr)
    rows = []
    for name, call in workloads().items():
        row = {"kernel": name}
        for b in backends:
            module = kernels.BACKENDS[b]
            number = 1
            while timeit.timeit(lambda: call(module), number=number) < 0.2 and number < 10_000:
                number *= 2
            best = min(timeit.repeat(lambda: call(module), number=number, repeat=args.repeat)) / number
            row[b] = best
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
        rows.append(row)

    width = max(len(r["kernel"]) for r in rows)
    head = f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b in backends)
    print(head + ("  speedup" if "compiled" in backends else ""))
    for r in rows:
        cells = "  ".join(f"{r[b] * 1e3:>10.3f}ms" for b in backends)
        tail = f"  {r['speedup']:>6.1f}x" if "speedup" in r else ""
        print(f"{r['kernel']:<{width}}  {cells}{tail}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
