"""Compare the compiled scan kernel against the numpy reference.

Both backends run the same batched argmax on identical inputs; this script
times them on harness-shaped workloads (one call per round, a block of
perturbation rows per call) and checks the outputs stay bit-identical while
it is at it.

Usage:
    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --sizes 16,64 --rows 50 --repeats 7
"""

import argparse
import time

import numpy as np

from grouplearn import available_backends, threshold_interval_instance
from grouplearn._scan_py import scan_corr as scan_python
from grouplearn.oracles import base_table, scan_structure


def build_workload(universe_size: int, rows: int, records: int, seed: int):
    inst = threshold_interval_instance(universe_size)
    rng = np.random.default_rng(seed)
    xa = rng.integers(0, universe_size, size=records)
    ypa = rng.integers(0, 2, size=records)
    yta = rng.integers(0, 2, size=records)
    wa = rng.uniform(-2.0, 2.0, size=records)
    base = base_table(inst, xa, ypa, yta, wa)
    corr = rng.normal(0.0, 1.0, size=(rows, universe_size))
    return inst, base, corr


def time_backend(fn, args, repeats: int) -> tuple[float, tuple]:
    out = fn(*args)  # warm-up, and the output used for the parity check
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        default="16,64",
        help="comma-separated universe sizes (default: 16,64)",
    )
    parser.add_argument(
        "--rows",
        type=int,
        default=50,
        help="perturbation rows per call, the per-round block size (default: 50)",
    )
    parser.add_argument(
        "--records",
        type=int,
        default=500,
        help="history records aggregated into the base table (default: 500)",
    )
    parser.add_argument(
        "--repeats", type=int, default=5, help="timing repeats, best is kept"
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; timing the numpy reference only")

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    header = (
        f"{'m':>4} {'pairs':>8} {'rows':>5} "
        f"{'python ms':>10} {'compiled ms':>12} {'speedup':>8} {'parity':>7}"
    )
    print(header)
    print("-" * len(header))
    for m in sizes:
        inst, base, corr = build_workload(m, args.rows, args.records, args.seed)
        struct = scan_structure(inst)
        label_val = inst.tables().label_val
        pairs = inst.group_count * len(inst.hypotheses)
        call = (base, label_val, corr, *struct)

        t_py, out_py = time_backend(scan_python, call, args.repeats)
        if "compiled" in backends:
            from grouplearn._scan import scan_corr as scan_compiled

            t_c, out_c = time_backend(scan_compiled, call, args.repeats)
            parity = all(np.array_equal(a, b) for a, b in zip(out_py, out_c))
            print(
                f"{m:>4} {pairs:>8} {args.rows:>5} "
                f"{t_py * 1e3:>10.2f} {t_c * 1e3:>12.2f} "
                f"{t_py / t_c:>8.1f} {'exact' if parity else 'MISMATCH':>7}"
            )
            if not parity:
                raise SystemExit("backend outputs diverged; investigate before use")
        else:
            print(f"{m:>4} {pairs:>8} {args.rows:>5} {t_py * 1e3:>10.2f} {'-':>12} {'-':>8} {'-':>7}")


if __name__ == "__main__":
    main()
