"""Command-line front end.

Exit codes: 0 success, 1 runtime or numeric error, 2 usage error.
Options may also come from a flat ``key = value`` file given by --config; explicit
flags win over the file, and the file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import experiments as ex
from .io import ResultTable, RunManifest, load_config, write_outputs
from .kernel import (
    DEFAULT_EPS,
    Weight,
    bergman_R,
    coset_series_R,
    covariance_scale,
    dim_cusp_space,
    kernel_best,
)

DEFAULTS = {
    "eps": DEFAULT_EPS,
    "method": "best",
    "x": 0.0,
    "y_min": 2.0,
    "y_max": 80.0,
    "steps": 400,
    "k_list": "60,120,240,480,960",
    "region": "compact",
    "model": "spherical",
    "n_samples": 2000,
    "seed": 0,
    "p_list": "2,4,8",
    "k": None,
    "out": "results",
    "plots": True,
    "kernel_eps": DEFAULT_EPS,
    "quick": False,
}


def weight(s: str) -> int:
    try:
        k = int(s)
        Weight(k)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid weight {s!r}: need an even integer >= 4")
    return k


def point(s: str) -> complex:
    try:
        x, y = (float(t) for t in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be 'x,y', got {s!r}")
    if not y > 0:
        raise argparse.ArgumentTypeError("point must have y > 0")
    return complex(x, y)


def k_list(s: str) -> list[int]:
    return [weight(t) for t in str(s).split(",") if t.strip()]


def float_list(s: str) -> list[float]:
    return [float(t) for t in str(s).split(",") if t.strip()]


def p_list(s: str) -> list[float]:
    try:
        ps = float_list(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"p-list must be comma-separated numbers, got {s!r}")
    if not ps or not all(math.isfinite(p) and p >= 1 for p in ps):
        raise argparse.ArgumentTypeError("each p must be finite and at least 1")
    return ps


def _bool(s) -> bool:
    return str(s).lower() in ("1", "true", "yes", "on")


CONVERTERS = {
    "eps": float, "x": float, "y_min": float, "y_max": float, "steps": int,
    "n_samples": int, "seed": int, "k": weight, "k_list": k_list, "p_list": p_list,
    "kernel_eps": float, "plots": _bool, "quick": _bool,
}


def resolve(args: argparse.Namespace, keys) -> dict:
    """Merge flag values, config-file values and defaults."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key in keys:
        v = getattr(args, key, None)
        if v is None and key in cfg:
            v = cfg[key]
        if v is None:
            v = DEFAULTS.get(key)
        if isinstance(v, str) and key in CONVERTERS:
            try:
                v = CONVERTERS[key](v)
            except argparse.ArgumentTypeError as e:
                raise ValueError(f"config {key}: {e}") from None
        out[key] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randcusp", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value file")
    sub = p.add_subparsers(dest="cmd", required=True)

    k = sub.add_parser("kernel", help="evaluate R_k(z, w) and r_k(z, w)")
    k.add_argument("--z", type=point, required=True, help="x,y")
    k.add_argument("--w", type=point, required=True, help="x,y")
    k.add_argument("--k", type=weight, required=True)
    k.add_argument("--eps", type=float)
    k.add_argument("--method", choices=("best", "direct", "coset"))

    v = sub.add_parser("variance-profile", help="diagonal variance along a vertical line")
    v.add_argument("--k", type=weight, required=True)
    v.add_argument("--y-min", type=float)
    v.add_argument("--y-max", type=float)
    v.add_argument("--steps", type=int)
    v.add_argument("--x", type=float)
    v.add_argument("--out")
    v.add_argument("--no-plots", dest="plots", action="store_const", const=False)

    s = sub.add_parser("sup-experiment", help="grid sup of sampled fields over a k sweep")
    s.add_argument("--k-list", type=k_list)
    s.add_argument("--region", choices=("compact", "global"))
    s.add_argument("--model", choices=("spherical", "gaussian"))
    s.add_argument("--n-samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--no-plots", dest="plots", action="store_const", const=False)

    lp = sub.add_parser("lp-experiment", help="empirical L^p norms against the closed form")
    lp.add_argument("--k", type=weight)
    lp.add_argument("--p-list", type=p_list)
    lp.add_argument("--n-samples", type=int)
    lp.add_argument("--seed", type=int)
    lp.add_argument("--out")
    lp.add_argument("--no-plots", dest="plots", action="store_const", const=False)

    c = sub.add_parser("concentration", help="tail fit of the sup around its median")
    c.add_argument("--k", type=weight)
    c.add_argument("--region", choices=("compact", "global"))
    c.add_argument("--n-samples", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")

    va = sub.add_parser("validate", help="run the oracle battery")
    va.add_argument("--kernel-eps", type=float)
    va.add_argument("--quick", action="store_const", const=True)
    return p


def cmd_kernel(args) -> int:
    o = resolve(args, ("eps", "method"))
    z, w, k = args.z, args.w, args.k
    if o["method"] == "direct":
        kv = bergman_R(z, w, k, o["eps"])
    elif o["method"] == "coset":
        kv = coset_series_R(z, w, k, o["eps"])
    else:
        kv = kernel_best(z, w, k, o["eps"])
    print(f"R_{k}(z, w) = {kv.value.real:.15g} {kv.value.imag:+.15g}i")
    print(f"tail_bound = {kv.tail_bound:.3e}")
    print(f"terms_used = {kv.terms_used}")
    print(f"method     = {kv.method}")
    if dim_cusp_space(k) > 0:
        r = covariance_scale(k) * kv.value
        print(f"r_{k}(z, w) = {r.real:.15g} {r.imag:+.15g}i  (N = {dim_cusp_space(k)})")
    else:
        print("no cusp forms at this weight (N = 0)")
    return 0


def _manifest(name, cfg, seed=None):
    return RunManifest(command=" ".join(sys.argv) or name, config=cfg, seed=seed)


def cmd_variance_profile(args) -> int:
    o = resolve(args, ("y_min", "y_max", "steps", "x", "out", "plots"))
    k = args.k
    rows = ex.profile_rows(k, o["y_min"], o["y_max"], o["steps"], o["x"])
    t = ResultTable(["y", "resonant", "strict_resonant", "tail_bound"])
    for r in rows:
        t.add(k=k, region=f"x={o['x']}", model="kernel", statistic="r_diag", value=r.r,
              stderr=0.0, y=r.y, resonant=r.resonant, strict_resonant=r.strict_resonant,
              tail_bound=r.tail_bound)
    m = _manifest("variance-profile", {"k": k, **o})
    m.error_caps["kernel_eps"] = DEFAULT_EPS
    stem = f"profile_k{k}"
    paths = write_outputs(t, m, o["out"], stem)
    if o["plots"]:
        from .plotting import plot_profile
        paths.append(plot_profile([r.y for r in rows], [r.r for r in rows],
                                  [r.strict_resonant for r in rows], k, Path(o["out"]) / f"{stem}.svg"))
    big = max(rows, key=lambda r: r.r)
    print(f"{len(rows)} rows; max r = {big.r:.4g} at y = {big.y:.4g}; "
          f"{sum(r.resonant for r in rows)} in the wide window, "
          f"{sum(r.strict_resonant for r in rows)} in the narrow one")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_sup(args) -> int:
    o = resolve(args, ("k_list", "region", "model", "n_samples", "seed", "out", "plots"))
    if o["n_samples"] < 2:
        raise ValueError("need at least 2 samples")
    t = ResultTable(["N", "median", "argmax_mode", "grid_size", "rank", "bias_cap"])
    m = _manifest("sup-experiment", o, o["seed"])
    results = []
    for k in o["k_list"]:
        r = ex.run_sup(k, o["region"], o["model"], o["n_samples"], o["seed"])
        results.append(r)
        mode = ex.argmax_mode(r.argmax_y, k)
        t.add(k=k, region=o["region"], model=o["model"], statistic="mean_sup",
              value=r.stats.mean, stderr=r.stats.stderr, N=r.N, median=r.stats.median,
              argmax_mode=mode, grid_size=r.grid["size"], rank=r.rank, bias_cap=r.bias_cap)
        m.grids.append(r.grid)
        m.error_caps[f"k{k}"] = {"dropped_mass": r.dropped_mass, "sup_bias_cap": r.bias_cap}
        print(f"k={k:4d} N={r.N:3d} grid={r.grid['size']:5d} mean={r.stats.mean:.4f} "
              f"+- {r.stats.stderr:.4f} median={r.stats.median:.4f} argmax mode y={mode:.2f}")
    stem = f"sup_{o['region']}_{o['model']}"
    paths = write_outputs(t, m, o["out"], stem)
    if len(results) >= 3:
        law = "sqrt-log" if o["region"] == "compact" else "quarter-power"
        for name, fit in ex.growth_summary(results).items():
            print(f"{name:30s} ratios " + " ".join(f"{x:.4f}" for x in fit.ratios)
                  + f"  max/min {fit.spread:.3f}")
        if o["plots"]:
            from .plotting import plot_argmax_hist, plot_growth
            paths.append(plot_growth([r.k for r in results], [r.stats.mean for r in results],
                                     [r.stats.stderr for r in results], law,
                                     Path(o["out"]) / f"{stem}_growth.svg"))
            if o["region"] == "global":
                last = results[-1]
                paths.append(plot_argmax_hist(last.argmax_y, last.k,
                                              Path(o["out"]) / f"{stem}_argmax_k{last.k}.svg"))
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_lp(args) -> int:
    o = resolve(args, ("k", "p_list", "n_samples", "seed", "out", "plots"))
    k = o["k"] or 120
    m = _manifest("lp-experiment", {**o, "k": k}, o["seed"])
    if o["n_samples"] < 2:
        print("warning: fewer than 2 samples, standard errors are undefined", file=sys.stderr)
    rows, info = ex.run_lp(k, o["p_list"], ex.COMPACT_REGION, o["n_samples"], o["seed"])
    t = ResultTable(["p", "analytic", "analytic_paper", "z", "identity_pass"])
    m.grids.append(info["grid"])
    for r in rows:
        t.add(k=k, region="compact", model="spherical", statistic="mean_norm", value=r.mean_norm,
              stderr=r.mean_norm_se, p=r.p, analytic=r.analytic, analytic_paper=r.analytic_paper,
              z=r.z_mean, identity_pass="")
        t.add(k=k, region="compact", model="spherical", statistic="moment_root",
              value=r.moment_root, stderr=r.moment_root_se, p=r.p, analytic=r.analytic,
              analytic_paper=r.analytic_paper, z=r.z_moment,
              identity_pass=bool(abs(r.z_moment) <= 5) if r.p == 2 else "")
        print(f"p={r.p:g} analytic={r.analytic:.6f} (paper {r.analytic_paper:.6f}) "
              f"mean norm={r.mean_norm:.6f} (z={r.z_mean:+.1f}) "
              f"moment root={r.moment_root:.6f} (z={r.z_moment:+.1f})")
    paths = write_outputs(t, m, o["out"], f"lp_k{k}")
    if o["plots"]:
        from .plotting import plot_lp
        paths.append(plot_lp([r.p for r in rows], [r.analytic for r in rows],
                             [r.moment_root for r in rows], [r.moment_root_se for r in rows],
                             Path(o["out"]) / f"lp_k{k}.svg"))
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_concentration(args) -> int:
    o = resolve(args, ("k", "region", "n_samples", "seed", "out"))
    k = o["k"] or 240
    m = _manifest("concentration", {**o, "k": k}, o["seed"])
    rep = ex.run_concentration(k, o["region"], o["n_samples"], o["seed"])
    t = ResultTable(["r2", "c_lower", "c_hat_corrected", "median_mean_gap"])
    t.add(k=k, region=o["region"], model="spherical", statistic="c_hat", value=rep.c_hat,
          stderr=math.nan, r2=rep.linearity_r2, c_lower=rep.c_lower,
          c_hat_corrected=rep.c_hat_corrected, median_mean_gap=rep.median_mean_gap)
    paths = write_outputs(t, m, o["out"], f"concentration_{o['region']}_k{k}")
    scale = "r^2/sqrt(k)" if o["region"] == "global" else "r^2"
    print(f"slope of -log(tail/2) vs {scale}: {rep.c_hat:.4f} (r2 {rep.linearity_r2:.4f}, "
          f"lower envelope {rep.c_lower:.4f}); median - mean = {rep.median_mean_gap:+.4f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_validate(args) -> int:
    from .validation import run_all
    o = resolve(args, ("kernel_eps", "quick"))
    checks = run_all(o["kernel_eps"], o["quick"])
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:{width}s}  {c.detail}")
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return 0 if ok else 1


COMMANDS = {
    "kernel": cmd_kernel,
    "variance-profile": cmd_variance_profile,
    "sup-experiment": cmd_sup,
    "lp-experiment": cmd_lp,
    "concentration": cmd_concentration,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (ValueError, argparse.ArgumentTypeError) as e:
        if isinstance(e, argparse.ArgumentTypeError):
            parser.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
