"""Benchmark the ML detection kernels: compiled backend vs pure numpy.

Runs both builds of each kernel on identical random batches, checks that
they return exactly the same candidate indices (both resolve ties by
first minimum), and prints a throughput table.  When the package was
imported with ``SMLINK_DISABLE_NUMBA=1`` (or numba is unavailable) the
active backend already is the numpy build, and only it is timed.

Usage::

    python3 benchmarks/bench_detect.py [--vectors N] [--repeats R]
"""

import argparse
import sys
import time

import numpy as np

from smlink import kernels, modem


SCENARIOS = (
    # (scheme, nt, modulation order, nr)
    ("sm", 2, 2, 2),
    ("sm", 8, 4, 2),
    ("sm", 64, 4, 4),
    ("smx", 2, 2, 2),
    ("smx", 4, 4, 4),
    ("smx", 8, 2, 4),
)


def build_batch(scheme, nt, order, nr, n_vectors, rng):
    """Random channel, random noisy transmit candidates, candidate table."""
    constellation = modem.build_constellation(order)
    candidates = modem.candidate_vectors(scheme, nt, constellation)
    h = (rng.standard_normal((nr, nt)) + 1j * rng.standard_normal((nr, nt)))
    h /= np.sqrt(2.0)
    sent = rng.integers(0, len(candidates), n_vectors)
    noise = rng.standard_normal((n_vectors, nr)) + 1j * rng.standard_normal(
        (n_vectors, nr)
    )
    y = candidates[sent] @ h.T + np.sqrt(0.05) * noise
    return constellation, candidates, h, np.ascontiguousarray(y)


def best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--vectors", type=int, default=200_000,
                        help="received vectors per scenario (default 200000)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats, best one reported (default 3)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    have_two = kernels.BACKEND == "numba"
    print(f"active backend: {kernels.BACKEND}   "
          f"vectors per scenario: {args.vectors}")
    header = (f"{'scenario':<22}{'cands':>6}  {'numpy s':>9}"
              + (f"  {'numba s':>9}  {'speedup':>8}" if have_two else "")
              + "  match")
    print(header)
    print("-" * len(header))

    rng = np.random.default_rng(args.seed)
    all_match = True
    for scheme, nt, order, nr in SCENARIOS:
        constellation, candidates, h, y = build_batch(
            scheme, nt, order, nr, args.vectors, rng
        )
        hx = np.ascontiguousarray(candidates @ h.T)
        if scheme == "sm":
            run_numpy = lambda: kernels.sm_detect_min_indices_numpy(
                y, h, constellation.points
            )
            run_active = lambda: kernels.sm_detect_min_indices(
                y, h, constellation.points
            )
        else:
            run_numpy = lambda: kernels.detect_min_indices_numpy(y, hx)
            run_active = lambda: kernels.detect_min_indices(y, hx)

        ref = run_numpy()
        out = run_active()  # first call also covers JIT warm-up
        match = bool(np.array_equal(ref, out))
        all_match &= match

        t_numpy = best_time(run_numpy, args.repeats)
        label = f"{scheme} nt={nt} M={order} nr={nr}"
        row = f"{label:<22}{len(candidates):>6}  {t_numpy:>9.4f}"
        if have_two:
            t_numba = best_time(run_active, args.repeats)
            row += f"  {t_numba:>9.4f}  {t_numpy / t_numba:>7.1f}x"
        row += f"  {'yes' if match else 'NO'}"
        print(row)

    if not all_match:
        print("ERROR: backends disagreed on at least one scenario",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
