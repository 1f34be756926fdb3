"""Command-line front end: declare experiments, emit CSV tables.

Subcommands
-----------
kernel          tabulate the Stein kernel of a law on a grid
bound           compute one bound formula and its term breakdown
verify          run Monte Carlo / convolution checks of a bound
compare         emit bound-comparison curves (gamma-ratio, beta-ratio)
multiply-check  pathwise check of the product expansion

Options may come from a TOML config file (``--config``); explicit flags
override file values.  CSV output uses '.' decimals, LF line endings and 17
significant digits, and is written atomically when ``--out`` is given.

Exit codes: 0 success, 2 at least one failed check, 1 usage/config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import bounds as B
from . import verify as V
from .chaos import ChaosTensor, PolyProfile, QuantileProfile, load_coeffs_csv
from .distributions import (
    CenteredBeta,
    CenteredGamma,
    Distribution,
    Gaussian,
    NormalizedBernoulli,
    Scaled,
    UniformSym,
    load_tabulated_csv,
    normalized,
)
from .errors import SteinbenchError
from .verify import CHECK_CSV_HEADER, check_csv_row, dist_label, format_float

COMMANDS = ("kernel", "bound", "verify", "compare", "multiply-check")


@dataclass
class ExperimentConfig:
    command: str = ""
    formula: str = ""
    dist: str = ""
    sigma: float = 1.0
    shape: float = 1.0
    alpha: float = 1.0
    p: float = 0.5
    halfwidth: float = 1.0
    nu: float = 0.0
    n: int = 0
    m: int = 0
    seed: int = 0
    grid: str = ""
    family: str = ""
    matrix: str = ""
    tensor: str = ""
    weights: str = ""
    dist_csv: str = ""
    out: str = ""

    @staticmethod
    def from_sources(args: argparse.Namespace) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        if getattr(args, "config", None):
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
            for f in fields(ExperimentConfig):
                if f.name in data:
                    setattr(cfg, f.name, type(getattr(cfg, f.name))(data[f.name]))
        for f in fields(ExperimentConfig):
            val = getattr(args, f.name, None)
            if val is not None:
                setattr(cfg, f.name, val)
        if getattr(args, "command", None):
            cfg.command = args.command
        return cfg


def _build_dist(cfg: ExperimentConfig) -> Distribution:
    name = cfg.dist or "uniform"
    if name == "gaussian":
        return Gaussian(cfg.sigma)
    if name == "gamma":
        return CenteredGamma(cfg.shape)
    if name == "beta":
        return CenteredBeta(cfg.alpha)
    if name == "uniform":
        return UniformSym(cfg.halfwidth)
    if name == "bernoulli":
        return NormalizedBernoulli(cfg.p)
    if name == "tabulated":
        if not cfg.dist_csv:
            raise SteinbenchError("tabulated distribution needs --dist-csv")
        return load_tabulated_csv(cfg.dist_csv)
    raise SteinbenchError(f"unknown distribution: {name}")


def _parse_grid(spec: str) -> list[float]:
    try:
        lo_s, hi_s, count_s = spec.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(count_s)
    except ValueError as exc:
        raise SteinbenchError(f"bad grid spec {spec!r}; expected lo:hi:count") from exc
    if count < 1 or hi < lo:
        raise SteinbenchError(f"bad grid spec {spec!r}")
    if count == 1:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _write_output(lines: list[str], out: str) -> None:
    text = "\n".join(lines) + "\n"
    if not out:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".steinbench-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _profile_from_config(entry: dict):
    kind = entry.get("kind", "")
    if kind == "polynomial":
        return PolyProfile(tuple(float(c) for c in entry["coeffs"]))
    if kind == "quantile":
        sub = ExperimentConfig()
        for key, val in entry.items():
            if hasattr(sub, key) and key != "kind":
                setattr(sub, key, val)
        sub.dist = entry.get("dist", "uniform")
        d = _build_dist(sub)
        if entry.get("normalized", True):
            d = normalized(d)
        scale = float(entry.get("scale", 1.0))
        if scale != 1.0:
            d = Scaled(d, scale)
        return QuantileProfile(d)
    raise SteinbenchError(f"unknown profile kind: {kind!r}")


def _load_tensor(cfg: ExperimentConfig, args) -> ChaosTensor:
    if not cfg.tensor:
        raise SteinbenchError("this formula needs --tensor")
    profile_entries = []
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            profile_entries = tomllib.load(fh).get("profile", [])
    if not profile_entries:
        raise SteinbenchError("tensor loading needs [[profile]] entries in the config")
    profiles = tuple(_profile_from_config(e) for e in profile_entries)
    order = len(profiles)
    with open(cfg.tensor, newline="") as fh:
        rows = [r for r in fh.read().splitlines() if r.strip()]
    cells = 0
    for row in rows:
        parts = row.split(",")
        if parts[0].strip().lower().startswith(("k", "#")):
            continue
        cells = max(cells, *(int(v) + 1 for v in parts[:order]))
    return load_coeffs_csv(cfg.tensor, order, cells, profiles)


def _bound_rows(reports) -> list[str]:
    lines = ["formula_id,metric,value,term_name,term_value"]
    for rep in reports:
        rows = list(rep.terms) or [("value", rep.value)]
        for name, val in rows:
            lines.append(
                f"{rep.formula_id},{rep.metric},{format_float(rep.value)},"
                f"{name},{format_float(val)}"
            )
        for flag in rep.flags:
            lines.append(
                f"{rep.formula_id},{rep.metric},{format_float(rep.value)},flag,{flag}"
            )
    return lines


def _compute_bound_reports(cfg: ExperimentConfig, args) -> list:
    fid = cfg.formula
    dist = _build_dist(cfg) if cfg.dist or fid in {
        "third-moment", "normalized-sum", "kernel-sum", "generic-kernel",
        "gamma-target", "single-nabla", "single-d", "quadratic-nabla",
        "quadratic-d", "comb-clt",
    } else None
    if fid in {"third-moment", "normalized-sum", "kernel-sum", "single-nabla", "single-d"}:
        if cfg.n < 1:
            raise SteinbenchError("this formula needs --n >= 1")
        fam = B.normalized_sum_family(dist, cfg.n)
        if fid == "third-moment":
            return [B.bound_sum_third_moment(fam)]
        if fid == "normalized-sum":
            return [B.bound_sum_normalized(fam)]
        if fid == "kernel-sum":
            return list(B.bound_sum_kernel(fam))
        tensor = B.sum_tensor(fam)
        if fid == "single-nabla":
            return [B.bound_single_integral_nabla(tensor)]
        return list(B.bound_single_integral_D(tensor))
    if fid == "generic-kernel":
        return list(B.bound_generic_kernel(dist.moment2, dist.kernel_second_moment()))
    if fid == "gamma-target":
        nu = cfg.nu if cfg.nu > 0 else getattr(dist, "shape", 0.0)
        return [B.bound_gamma_target(dist, nu)]
    if fid == "bernoulli-weighted":
        if cfg.weights:
            alphas = list(B.load_weights_csv(cfg.weights))
        elif cfg.n >= 1:
            alphas = [1.0 / math.sqrt(cfg.n)] * cfg.n
        else:
            raise SteinbenchError("bernoulli-weighted needs --weights or --n")
        return [B.bound_bernoulli_weighted(alphas, [cfg.p] * len(alphas))]
    if fid == "multiple-nabla":
        if cfg.tensor:
            return [B.bound_multiple_nabla(_load_tensor(cfg, args))]
        if cfg.matrix:
            a = B.load_matrix_csv(cfg.matrix)
            return [B.bound_multiple_nabla(B.quadratic_tensor(a, dist))]
        if cfg.n >= 1:
            return [B.bound_multiple_nabla(B.sum_tensor(B.normalized_sum_family(dist, cfg.n)))]
        raise SteinbenchError("multiple-nabla needs --tensor, --matrix or --n")
    if fid in {"quadratic-nabla", "quadratic-d"}:
        if not cfg.matrix:
            raise SteinbenchError("quadratic formulas need --matrix")
        a = B.load_matrix_csv(cfg.matrix)
        if fid == "quadratic-nabla":
            return [B.bound_quadratic_nabla(a, dist)]
        return list(B.bound_quadratic_D(a, dist))
    if fid == "comb-clt":
        if not cfg.tensor:
            raise SteinbenchError("comb-clt needs --tensor (rows i1,...,iq)")
        weights = B.load_weights_csv(cfg.weights) if cfg.weights else ()
        fam = B.load_index_family_csv(cfg.tensor, weights)
        return [B.comb_clt_report(fam, dist)]
    raise SteinbenchError(f"unknown or non-bound formula: {fid!r}")


def _cmd_kernel(cfg: ExperimentConfig, args) -> int:
    dist = _build_dist(cfg)
    if cfg.grid:
        ys = _parse_grid(cfg.grid)
    else:
        lo = float(dist.quantile(0.001))
        hi = float(dist.quantile(0.999))
        ys = list(np.linspace(lo, hi, 101))
    lines = ["y,kernel"]
    for y in ys:
        lines.append(f"{format_float(y)},{format_float(dist.stein_kernel(y))}")
    _write_output(lines, cfg.out)
    return 0


def _cmd_bound(cfg: ExperimentConfig, args) -> int:
    reports = _compute_bound_reports(cfg, args)
    _write_output(_bound_rows(reports), cfg.out)
    return 0


def _verify_specs(cfg: ExperimentConfig, dist: Distribution):
    """(bound, spec, n) triples to check for the configured formula."""
    fid = cfg.formula
    if fid in {"third-moment", "normalized-sum", "kernel-sum"}:
        if cfg.n < 1:
            raise SteinbenchError("verify needs --n >= 1")
        fam = B.normalized_sum_family(dist, cfg.n)
        spec = V.SumSpec(tuple(fam))
        if fid == "third-moment":
            return [(B.bound_sum_third_moment(fam), spec, cfg.n)]
        if fid == "normalized-sum":
            return [(B.bound_sum_normalized(fam), spec, cfg.n)]
        w1, tv = B.bound_sum_kernel(fam)
        out = [(w1, spec, cfg.n)]
        if dist.is_continuous and len(set(fam)) == 1:
            out.append((tv, spec, cfg.n))
        return out
    if fid == "quadratic-nabla":
        if not cfg.matrix:
            raise SteinbenchError("verify quadratic-nabla needs --matrix")
        a = B.load_matrix_csv(cfg.matrix)
        rep = B.bound_quadratic_nabla(a, dist)
        return [(rep, V.QuadraticSpec(a, dist), a.shape[0])]
    raise SteinbenchError(f"formula {fid!r} has no verification route")


def _cmd_verify(cfg: ExperimentConfig, args) -> int:
    if cfg.m < 1000:
        raise SteinbenchError("verify needs --m >= 1000")
    dist = _build_dist(cfg)
    checks = _verify_specs(cfg, dist)
    lines = [CHECK_CSV_HEADER]
    any_failed = False
    label = dist_label(dist)
    for idx, (bound, spec, n) in enumerate(checks):
        result = V.check_bound(bound, spec, cfg.m, cfg.seed)
        check_id = f"{cfg.formula}-{bound.metric.lower()}-{idx}"
        lines.append(check_csv_row(check_id, result, n, label, cfg.seed))
        any_failed = any_failed or not result.holds
        print(f"check {idx + 1}/{len(checks)}", file=sys.stderr)
    _write_output(lines, cfg.out)
    return 2 if any_failed else 0


def _cmd_compare(cfg: ExperimentConfig, args) -> int:
    family = cfg.family or cfg.formula
    if not family:
        raise SteinbenchError("compare needs --family")
    if not cfg.grid:
        raise SteinbenchError("compare needs --grid lo:hi:count")
    table = B.comparison_curves(family, _parse_grid(cfg.grid))
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(format_float(v) for v in row))
    _write_output(lines, cfg.out)
    return 0


def _cmd_multiply_check(cfg: ExperimentConfig, args) -> int:
    m = cfg.m if cfg.m >= 1 else 10**5
    seed = cfg.seed
    rng = np.random.default_rng(seed)
    s3 = math.sqrt(3.0)
    unit = PolyProfile((-s3, s3))
    single = ChaosTensor.from_coeffs([1.0], (unit,))

    def random_tensor(order: int, cells: int = 4) -> ChaosTensor:
        coeffs = rng.normal(size=(cells,) * order)
        raw = ChaosTensor.from_coeffs(
            coeffs, tuple(_random_canonical_poly(rng) for _ in range(order))
        )
        from .chaos import restrict_to_delta, symmetrize

        return symmetrize(restrict_to_delta(raw))

    cases = [
        ("single-cell", single, single),
        ("random-2x1", random_tensor(2), random_tensor(1)),
        ("random-2x2", random_tensor(2), random_tensor(2)),
    ]
    lines = ["case,max_abs_path_error,mc_zscore,holds"]
    any_failed = False
    for name, f, g in cases:
        rep = V.verify_multiplication(f, g, m, seed)
        ok = rep.max_abs_path_error <= 1e-9 and abs(rep.mc_zscore) <= 4.0
        any_failed = any_failed or not ok
        lines.append(
            f"{name},{format_float(rep.max_abs_path_error)},"
            f"{format_float(rep.mc_zscore)},{'true' if ok else 'false'}"
        )
    _write_output(lines, cfg.out)
    return 2 if any_failed else 0


def _random_canonical_poly(rng) -> PolyProfile:
    coeffs = rng.normal(size=3)
    raw = PolyProfile(tuple(coeffs))
    return PolyProfile((coeffs[0] - raw.cell_mean, coeffs[1], coeffs[2]))


def _list_formulas() -> int:
    lines = ["formula_id,reference"]
    for fid, ref in B.FORMULAS.items():
        lines.append(f'{fid},"{ref}"')
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steinbench",
        description="Explicit normal/gamma approximation bounds with verification.",
    )
    parser.add_argument("--list-formulas", action="store_true",
                        help="enumerate formula ids and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--formula")
        p.add_argument("--dist")
        p.add_argument("--sigma", type=float)
        p.add_argument("--shape", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--p", type=float)
        p.add_argument("--halfwidth", type=float)
        p.add_argument("--nu", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--grid")
        p.add_argument("--family")
        p.add_argument("--matrix")
        p.add_argument("--tensor")
        p.add_argument("--weights")
        p.add_argument("--dist-csv", dest="dist_csv")
        p.add_argument("--out")
    return parser


_HANDLERS = {
    "kernel": _cmd_kernel,
    "bound": _cmd_bound,
    "verify": _cmd_verify,
    "compare": _cmd_compare,
    "multiply-check": _cmd_multiply_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_formulas:
        return _list_formulas()
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = ExperimentConfig.from_sources(args)
        return _HANDLERS[args.command](cfg, args)
    except SteinbenchError as exc:
        print(f"steinbench: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"steinbench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
