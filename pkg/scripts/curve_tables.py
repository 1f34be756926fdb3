#!/usr/bin/env python3
"""Emit the bound-comparison curve tables as CSV (data only, no plotting).

Writes gamma_ratio.csv and beta_ratio.csv next to the chosen output
directory; these are the data behind the third-moment versus kernel bound
comparison for gamma and beta summands.
"""

import argparse
import pathlib

import numpy as np

from steinbench.bounds import comparison_curves
from steinbench.verify import format_float


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default=".", help="directory for the CSV files")
    parser.add_argument("--points", type=int, default=200)
    args = parser.parse_args()
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    specs = [
        ("gamma-ratio", np.geomspace(1e-3, 100.0, args.points), "gamma_ratio.csv"),
        ("beta-ratio", np.linspace(0.1, 10.0, args.points), "beta_ratio.csv"),
    ]
    for family, grid, name in specs:
        table = comparison_curves(family, grid)
        lines = [",".join(table.columns)]
        for row in table.rows:
            lines.append(",".join(format_float(v) for v in row))
        path = outdir / name
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path} ({len(table.rows)} rows)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
