"""Command-line entry point: ``flatfit {fit,cluster,verify,gen,bench}``.

Exit codes: 0 success, 1 a lemma check failed (``verify`` only),
2 unreadable input, 3 invalid parameters, 4 a resource cap was hit.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import io
from .cluster import ClusterConfig, GridConfig, run_clustering
from .errors import FlatfitError, InvalidParameterError, ParseError, ResourceLimitError
from .fitting import FitConfig, fit_single_flat, optimal_flat_tau2
from .geometry import power_objective
from .regular import fit_regular
from .verify import LEMMA_IDS, assignment_accuracy, gen_planted, verify_lemma

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_PARAM, EXIT_RESOURCE = 0, 1, 2, 3, 4

# The sample-size formulas give r far beyond what 4^r enumeration allows,
# so the CLI defaults to desk-scale sizes; "--r formula" restores them.
DEFAULT_FIT_R = 4
DEFAULT_CLUSTER_R = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameterError(message)


def _sample_size(text: str):
    if text == "formula":
        return "formula"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer or 'formula'") from None
    if v < 1:
        raise argparse.ArgumentTypeError("r must be >= 1")
    return v


def _resolve_r(value, default):
    if value == "formula":
        return None
    return default if value is None else value


class _Timer:
    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = round((time.perf_counter() - self.t0) * 1000.0, 3)

        return _Stage()


def _emit(doc: dict, out):
    text = io.dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _document(argv, config: dict, seed: int, digest, timer: _Timer, result: dict) -> dict:
    return {
        "schema": io.SCHEMA,
        "result": result,
        "manifest": {"command": list(argv), "config": config, "seed": seed,
                     "input_digest": digest, "timings_ms": timer.stages},
    }


def cmd_fit(a, argv) -> int:
    timer = _Timer()
    with timer("read"):
        X, digest = io.read_points(a.input)
    default_anchor = "exact_mean" if a.regular else "sample_mean"
    r = _resolve_r(a.r, None if a.regular else DEFAULT_FIT_R)
    cfg = FitConfig(r=r, anchor=a.anchor or default_anchor, center_samples=a.center_samples,
                    center_mode=a.center_mode)
    with timer("fit"):
        if a.regular:
            res = fit_regular(X, a.j, eps=a.eps, tau=a.tau, rng=a.seed, cfg=cfg)
        else:
            res = fit_single_flat(X, a.j, gamma=a.gamma, eps=a.eps, tau=a.tau, rng=a.seed,
                                  config=cfg)
    result = {
        "flat": io.flat_to_dict(res.flat),
        "objective": res.trimmed_objective,
        "inlier_indices": res.inlier_indices,
        "path": res.path,
        "r": res.r,
        "n_paths": res.n_paths,
        "tau": res.tau,
        "gamma": res.gamma,
    }
    if a.regular:
        result["omega"] = res.info.get("omega")
    config = {"j": a.j, "gamma": a.gamma if not a.regular else 0.0, "eps": a.eps, "tau": a.tau,
              "r": r, "regular": a.regular, "anchor": cfg.anchor,
              "center_samples": cfg.center_samples, "center_mode": cfg.center_mode}
    _emit(_document(argv, config, a.seed, digest, timer, result), a.out)
    return EXIT_OK


def _cluster_result(res) -> dict:
    return {
        "flats": [io.flat_to_dict(F) for F in res.flats],
        "assignment": res.assignment,
        "outlier_indices": res.outlier_indices,
        "objective": res.objective,
        "step4_objective": res.step4_objective,
        "step6_objective": res.step6_objective,
        "grid_best_objective": res.grid_best_objective,
        "used_grid": res.used_grid,
        "r": res.r,
        "t": res.t,
        "r_B": res.r_B,
        "eps0": res.eps0,
        "n_candidates": res.n_candidates,
        "n_combinations": res.n_combinations,
    }


def cmd_cluster(a, argv) -> int:
    timer = _Timer()
    with timer("read"):
        X, digest = io.read_points(a.input)
    cfg = ClusterConfig(k=a.k, j=a.j, tau=a.tau, eps=a.eps, gamma=a.gamma, seed=a.seed,
                        r_override=_resolve_r(a.r, DEFAULT_CLUSTER_R), reduction=a.reduce, anchor=a.anchor or "subset_means",
                        center_samples=a.center_samples, center_mode=a.center_mode,
                        grid=GridConfig(enabled=a.grid == "on", per_axis_resolution=a.grid_res,
                                        radius_scale=a.grid_scale))
    with timer("cluster"):
        res = run_clustering(X, cfg)
    _emit(_document(argv, cfg.echo(), a.seed, digest, timer, _cluster_result(res)), a.out)
    return EXIT_OK


def cmd_verify(a, argv) -> int:
    ids = LEMMA_IDS if a.lemma == "all" else (a.lemma,)
    if a.lemma != "all" and a.lemma not in LEMMA_IDS:
        raise InvalidParameterError(f"unknown lemma {a.lemma!r}")
    if a.trials is not None and a.trials < 1:
        raise InvalidParameterError("--trials must be >= 1")
    timer = _Timer()
    reports = []
    for lid in ids:
        with timer(lid):
            reports.append(verify_lemma(lid, a.trials, a.seed))
    lines = [f"{'lemma':<16} {'trials':>7} {'fails':>6} {'worst_margin':>13} {'budget':>7}  verdict"]
    for r in reports:
        lines.append(f"{r.lemma_id:<16} {r.trials:>7} {r.failures:>6} {r.worst_margin:>13.6g} "
                     f"{r.budget:>7.4f}  {'PASS' if r.passed else 'FAIL'}")
    print("\n".join(lines))
    if a.out:
        doc = _document(argv, {"lemma": a.lemma, "trials": a.trials}, a.seed, None, timer,
                        {"reports": [r.to_dict() for r in reports]})
        _emit(doc, a.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_gen(a, argv) -> int:
    inst = gen_planted(a.d, a.j, a.k, a.n, a.sigma, a.outliers, a.dist, a.seed,
                       min_separation=a.min_separation)
    out = Path(a.out)
    out.write_text(io.format_csv(inst.points))
    truth = {
        "schema": io.SCHEMA,
        "true_flats": [io.flat_to_dict(F) for F in inst.true_flats],
        "true_assignment": inst.true_assignment,
        "noise_sigma": inst.noise_sigma,
        "outlier_fraction": inst.outlier_fraction,
        "echo": inst.echo,
    }
    sidecar = out.with_name(out.name + ".truth.json")
    sidecar.write_text(io.dumps(truth))
    return EXIT_OK


BENCH_SUITES = {
    "small": [
        ("fit", dict(d=3, j=1, k=1, n=200, sigma=0.05, outliers=0.1), dict(r=3)),
        ("fit", dict(d=6, j=2, k=1, n=200, sigma=0.05, outliers=0.1), dict(r=2)),
        ("cluster", dict(d=2, j=1, k=2, n=100, sigma=0.02, outliers=0.0), dict(r=2)),
    ],
    "planted": [
        ("cluster", dict(d=3, j=1, k=2, n=300, sigma=0.05, outliers=0.05), dict(r=2)),
        ("cluster", dict(d=3, j=1, k=3, n=300, sigma=0.05, outliers=0.05), dict(r=2)),
        ("fit", dict(d=4, j=2, k=1, n=500, sigma=0.1, outliers=0.1), dict(r=2)),
    ],
}


def cmd_bench(a, argv) -> int:
    if a.suite not in BENCH_SUITES:
        raise InvalidParameterError(f"unknown suite {a.suite!r}; known: {', '.join(BENCH_SUITES)}")
    timer = _Timer()
    rows = []
    for i, (kind, g, p) in enumerate(BENCH_SUITES[a.suite]):
        inst = gen_planted(g["d"], g["j"], g["k"], g["n"], g["sigma"], g["outliers"], "gaussian",
                           a.seed + i, min_separation=20 * g["sigma"] if g["d"] > 2 else 0.0)
        name = f"{kind}-d{g['d']}-j{g['j']}-k{g['k']}-n{g['n']}"
        with timer(name):
            if kind == "fit":
                res = fit_single_flat(inst.points, g["j"], gamma=0.1, rng=a.seed,
                                      config=FitConfig(r=p["r"]))
                inl = inst.true_assignment >= 0
                oracle = power_objective(inst.points[inl], optimal_flat_tau2(inst.points[inl], g["j"]))
                row = {"case": name, "objective": res.trimmed_objective, "oracle": oracle,
                       "accuracy": None}
            else:
                cfg = ClusterConfig(k=g["k"], j=g["j"], gamma=0.1, seed=a.seed, r_override=p["r"],
                                    grid=GridConfig(enabled=False))
                res = run_clustering(inst.points, cfg)
                row = {"case": name, "objective": res.objective, "oracle": None,
                       "accuracy": assignment_accuracy(inst.true_assignment, res.assignment,
                                                       g["k"])}
        row["ms"] = timer.stages[name]
        rows.append(row)
    header = f"{'case':<28} {'objective':>12} {'oracle':>12} {'accuracy':>9} {'ms':>10}"
    fmt = lambda v, w, spec: f"{'-':>{w}}" if v is None else f"{v:>{w}{spec}}"  # noqa: E731
    print(header)
    for r in rows:
        print(f"{r['case']:<28} {fmt(r['objective'], 12, '.5g')} {fmt(r['oracle'], 12, '.5g')} "
              f"{fmt(r['accuracy'], 9, '.3f')} {r['ms']:>10.1f}")
    payload = [{k: v for k, v in r.items() if k != "ms"} for r in rows]
    if a.out:
        _emit(_document(argv, {"suite": a.suite}, a.seed, None, timer, {"rows": payload}), a.out)
    return EXIT_OK


def _add_common(p, *, gamma=True):
    p.add_argument("input", help="CSV or JSON point file")
    p.add_argument("--j", type=int, required=True, help="flat dimension")
    if gamma:
        p.add_argument("--gamma", type=float, default=0.1, help="outlier fraction to trim")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--tau", type=int, default=2, help="distance exponent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=_sample_size, default=None,
                   help="sample size per tree node, or 'formula' for the theoretical size")
    p.add_argument("--anchor", choices=("sample_mean", "subset_means", "exact_mean"), default=None)
    p.add_argument("--center-samples", type=int, default=None)
    p.add_argument("--center-mode", choices=("given", "literal"), default="given")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="flatfit", description="Projective clustering by uniform sampling.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one j-flat")
    _add_common(p)
    p.add_argument("--regular", action="store_true", help="regular mode: no trimming")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cluster", help="(k, j)-projective clustering")
    _add_common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--grid", choices=("on", "off"), default="on")
    p.add_argument("--grid-res", type=int, default=3)
    p.add_argument("--grid-scale", type=float, default=1.0)
    p.add_argument("--reduce", default="identity", help="identity or rp:<d'>")
    p.set_defaults(func=cmd_cluster, center_samples=3)

    p = sub.add_parser("verify", help="run lemma verifiers")
    p.add_argument("--lemma", default="all", help="lemma id or 'all'")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a planted instance")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--dist", choices=("gaussian", "erlang"), default="gaussian")
    p.add_argument("--min-separation", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path; the sidecar is <out>.truth.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="objective/accuracy/timing table")
    p.add_argument("--suite", default="small")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv)
    except ParseError as exc:
        print(f"flatfit: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ResourceLimitError as exc:
        print(f"flatfit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (FlatfitError, ValueError) as exc:
        print(f"flatfit: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
