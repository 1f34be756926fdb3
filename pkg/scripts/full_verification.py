#!/usr/bin/env python3
"""Run the full bound-versus-estimate sweep and write one CSV of results.

Covers the cross product of the built-in continuous laws with sum sizes
{4, 16, 64} against the third-moment, normalized-sum and kernel bounds
(Wasserstein), the doubled kernel bounds against the convolution TV
estimate, and the pairwise quadratic form at 100 pairs.  Exit code 2 if any
check fails.
"""

import argparse
import math
import sys

import numpy as np

from steinbench.bounds import (
    bound_quadratic_nabla,
    bound_sum_kernel,
    bound_sum_normalized,
    bound_sum_third_moment,
    normalized_sum_family,
)
from steinbench.distributions import CenteredBeta, CenteredGamma, Gaussian, UniformSym
from steinbench.verify import (
    CHECK_CSV_HEADER,
    QuadraticSpec,
    SumSpec,
    check_bound,
    check_csv_row,
    dist_label,
)

DISTS = [Gaussian(1.0), CenteredGamma(1.0), CenteredBeta(2.0), UniformSym(1.0)]
SIZES = [4, 16, 64]


def pairwise_matrix(npairs: int) -> np.ndarray:
    size = 2 * npairs
    a = np.zeros((size, size))
    t = 1.0 / math.sqrt(2.0 * npairs)
    for k in range(npairs):
        a[2 * k, 2 * k + 1] = a[2 * k + 1, 2 * k] = t
    return a


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m", type=int, default=2 * 10**5)
    parser.add_argument("--seed", type=int, default=20240207)
    parser.add_argument("--out", default="verification.csv")
    args = parser.parse_args()

    rows = [CHECK_CSV_HEADER]
    failures = 0
    done = 0
    for dist in DISTS:
        label = dist_label(dist)
        for n in SIZES:
            fam = normalized_sum_family(dist, n)
            spec = SumSpec(tuple(fam))
            w1_kernel, tv_kernel = bound_sum_kernel(fam)
            cases = [
                ("third-moment", bound_sum_third_moment(fam)),
                ("normalized-sum", bound_sum_normalized(fam)),
                ("kernel-sum", w1_kernel),
                ("kernel-sum-tv", tv_kernel),
            ]
            for key, bound in cases:
                res = check_bound(bound, spec, args.m, args.seed)
                rows.append(check_csv_row(f"{key}-{label}-{n}", res, n, label,
                                          args.seed))
                failures += 0 if res.holds else 1
                done += 1
                print(f"[{done}] {key} {label} n={n}: "
                      f"{'ok' if res.holds else 'FAIL'}", file=sys.stderr)

    a = pairwise_matrix(100)
    for dist in (UniformSym(1.0), CenteredGamma(1.0)):
        bound = bound_quadratic_nabla(a, dist)
        res = check_bound(bound, QuadraticSpec(a, dist), args.m, args.seed)
        rows.append(check_csv_row(f"quadratic-{dist_label(dist)}", res, 200,
                                  dist_label(dist), args.seed))
        failures += 0 if res.holds else 1

    with open(args.out, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.out}: {len(rows) - 1} checks, {failures} failures")
    return 2 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
