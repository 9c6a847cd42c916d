"""Command line interface: ``nngf <subcommand> [options]``.

Exit codes: 0 success, 1 a numerical failure or a failed verdict,
2 invalid input (bad flags, config or kernel specification).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from nngf import report as rp
from nngf.dynamics import classify_regime
from nngf.errors import NNGFError, ValidationError
from nngf.experiment import build_kernel, load_config, resolve_workers, run_experiment
from nngf.experiment import experiment_config
from nngf.fieldsim import monte_carlo_experiment
from nngf.kernel import iterate_kernel, verify_boundary_expansion
from nngf.spectral import (
    kernel_moment,
    moment_rate_prediction,
    normalized_kernel,
    normalized_spectrum,
    power_spectrum,
)


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated list of numbers: {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated list of integers: {text!r}") from None


def _kernel_from_args(args):
    if args.series is not None:
        return build_kernel({"kind": "series", "coeffs": _floats(args.series)}), \
            {"kind": "series", "coeffs": _floats(args.series)}
    if args.kind == "relu":
        return build_kernel({"kind": "relu"}), {"kind": "relu"}
    if args.kind == "identity":
        return build_kernel({"kind": "series", "coeffs": [0.0, 1.0]}), {"kind": "series", "coeffs": [0.0, 1.0]}
    raise ValidationError("give --kind relu|identity or --series c0,c1,...")


def _emit(text: str, out_file: Path | None = None):
    if out_file is None:
        sys.stdout.write(text)
    else:
        out_file.write_text(text, encoding="utf-8", newline="")


def cmd_kernel(args) -> int:
    kernel, _ = _kernel_from_args(args)
    u = np.array(_floats(args.probe))
    if np.any(np.abs(u) > 1.0):
        raise ValidationError("probe values must lie in [-1, 1]")
    vals = iterate_kernel(kernel, args.depth, u)
    if args.format == "json":
        fit = verify_boundary_expansion(kernel)
        out = {"depth": args.depth, "probe": u, "values": vals, "kprime1": kernel.kprime1,
               "boundary_fit": {"gamma": fit.gamma, "c": fit.c, "r_squared": fit.r_squared,
                                "degenerate": fit.degenerate}}
        _emit(rp.json_text(out))
    elif args.format == "csv":
        _emit(rp.csv_text(["u", "kappa_L"], zip(u, vals)))
    else:
        _emit("".join("%.7g\n" % v for v in vals))
    return 0


def cmd_regime(args) -> int:
    kernel, _ = _kernel_from_args(args)
    rep = classify_regime(kernel)
    if args.format == "csv":
        _emit(rp.csv_text(["key", "value"], sorted(rep.to_dict().items())))
    else:
        _emit(rp.json_text(rep.to_dict()))
    return 0


def _out_dir(args) -> Path:
    out = Path(args.out or "nngf-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_spectrum(args) -> int:
    started = rp.utc_now()
    kernel, kspec = _kernel_from_args(args)
    depths = _ints(args.depths)
    rep = classify_regime(kernel)
    out = _out_dir(args)
    rows, series = [], []
    for L in depths:
        ps = power_spectrum(kernel, L, args.d, lmax=args.lmax, report=rep, check=False)
        ns = normalized_spectrum(ps)
        mass = ps.mode_mass
        cum = np.cumsum(mass)
        for ell in range(ps.lmax + 1):
            rows.append((L, ell, ps.C[ell], mass[ell], ns.g[ell], cum[ell]))
        series.append((f"L={L}", np.arange(1, ns.lmax + 1), ns.g[1:]))
    csv_path = rp.write_csv(out / "spectrum.csv", ["L", "ell", "C_ell", "mode_mass", "g", "cumulative"], rows)
    svg_path = out / "spectrum.svg"
    svg_path.write_text(rp.svg_lineplot(series, "normalized angular spectrum", "l", "g_L(l)",
                                        logx=True, logy=True), encoding="utf-8")
    cfg = {"command": "spectrum", "kernel": kspec, "d": args.d, "depths": depths, "lmax": args.lmax}
    rp.write_manifest(out, "spectrum", cfg, {}, [csv_path, svg_path], started)
    sys.stdout.write(f"wrote {csv_path} and {svg_path}\n")
    return 0


def cmd_moments(args) -> int:
    started = rp.utc_now()
    kernel, kspec = _kernel_from_args(args)
    depths = _ints(args.depths)
    qs = _ints(args.q)
    rep = classify_regime(kernel)
    out = _out_dir(args)
    rows = []
    curves = {q: ([], []) for q in qs}
    for L in depths:
        nk = normalized_kernel(kernel, L, args.d, report=rep)
        v = rep.scale(L)
        for q in qs:
            m, am = kernel_moment(nk.values, q, nk.rule)
            scaled = ""
            if rep.regime != "low-disorder":
                cls = moment_rate_prediction(rep, q, args.d).rate_class
                if cls == "beta-limit":
                    scaled = m / v**q
                elif cls == "critical":
                    scaled = m / (v**q * math.log(1.0 / v))
                elif cls == "supercritical":
                    scaled = m / v ** (args.d / (2.0 * rep.nu))
            rows.append((L, q, m, am, scaled))
            curves[q][0].append(L)
            curves[q][1].append(am)
    csv_path = rp.write_csv(out / "moments.csv", ["L", "q", "moment", "abs_moment", "rate_normalized"], rows)
    svg_path = out / "moments.svg"
    series = [(f"q={q}", xs, ys) for q, (xs, ys) in curves.items()]
    svg_path.write_text(rp.svg_lineplot(series, "kernel moments", "L", "int |kappa_hat_L|^q dmu",
                                        logx=rep.regime == "sparse", logy=True), encoding="utf-8")
    cfg = {"command": "moments", "kernel": kspec, "d": args.d, "depths": depths, "q": qs}
    rp.write_manifest(out, "moments", cfg, {}, [csv_path, svg_path], started)
    sys.stdout.write(f"wrote {csv_path} and {svg_path}\n")
    return 0


def _load(args) -> dict:
    if not args.config:
        raise ValidationError("--config is required")
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = int(args.seed)
    if args.out is not None:
        config["output"] = args.out
    return config


def _samples_rows(samples):
    for s in samples:
        for r, (v, z) in enumerate(zip(s.values, s.normalized)):
            yield (s.depth, r, v, z)


def _write_samples(out, samples):
    return rp.write_csv(out / "samples.csv", ["L", "replicate", "value", "normalized"], _samples_rows(samples))


def _seeds(config, samples):
    return {"master": config["seed"], "scheme": "philox(master, L, replicate)",
            "depths": [s.depth for s in samples]}


def cmd_simulate(args) -> int:
    started = rp.utc_now()
    config = _load(args)
    workers = resolve_workers(args.workers, config.get("workers"))
    samples = monte_carlo_experiment(experiment_config(config, workers))
    out = Path(config["output"])
    out.mkdir(parents=True, exist_ok=True)
    csv_path = _write_samples(out, samples)
    norm = rp.write_json(out / "normalization.json",
                         [{"L": s.depth, "method": s.method, **s.normalization, "meta": s.meta} for s in samples])
    rp.write_manifest(out, "simulate", config, _seeds(config, samples), [csv_path, norm], started)
    for s in samples:
        sys.stdout.write(f"L={s.depth} replicates={s.values.size} mean={s.values.mean():.6g} "
                         f"var={s.values.var(ddof=1):.6g} method={s.method}\n")
    return 0


def cmd_experiment(args) -> int:
    started = rp.utc_now()
    config = _load(args)
    workers = resolve_workers(args.workers, config.get("workers"))
    rep, pred, samples, verdicts = run_experiment(config, workers)
    out = Path(config["output"])
    out.mkdir(parents=True, exist_ok=True)
    files = [_write_samples(out, samples)]
    files.append(rp.write_json(out / "prediction.json", {"regime": rep.to_dict(), "prediction": pred.to_dict()}))
    files.append(rp.write_json(out / "verdicts.json", verdicts))
    series = [("Var(F_L)", [s.depth for s in samples], [s.values.var(ddof=1) for s in samples])]
    svg = out / "variance.svg"
    svg.write_text(rp.svg_lineplot(series, "empirical variance", "L", "Var", logx=True, logy=True),
                   encoding="utf-8")
    files.append(svg)
    rp.write_manifest(out, "experiment", config, _seeds(config, samples), files, started)
    sys.stdout.write(f"case: {pred.case}; {pred.variance_rate}; {pred.wasserstein_rate}\n")
    for v in verdicts:
        sys.stdout.write(f"{'PASS' if v['passed'] else 'FAIL'} {v['name']}\n")
    return 0 if all(v["passed"] for v in verdicts) else 1


def _verify_checks():
    from nngf.kernel import ActivationSpec, kernel_via_double_integral, relu_kernel
    from nngf.spectral import eigenspace_dims, gegenbauer_table, mu_quadrature

    def gegenbauer():
        worst = 0.0
        for d in (2, 3, 5):
            rule = mu_quadrature(d, 64)
            T = gegenbauer_table(30, d, rule.nodes)
            G = (T * rule.weights) @ T.T
            worst = max(worst, float(np.max(np.abs(G - np.diag(1.0 / eigenspace_dims(30, d))))))
        return worst < 1e-10, f"max error {worst:.3g}"

    def relu_oracle():
        u = np.linspace(-1.0, 1.0, 51)
        err = float(np.max(np.abs(relu_kernel(u) - kernel_via_double_integral(ActivationSpec("relu"), u))))
        return err < 1e-6, f"max error {err:.3g}"

    def relu_boundary():
        fit = verify_boundary_expansion(relu_kernel())
        c1 = 2.0 * math.sqrt(2.0) / (3.0 * math.pi)
        return 1.49 <= fit.gamma <= 1.51 and abs(fit.c / c1 - 1) < 0.02, \
            f"gamma={fit.gamma:.4f} c={fit.c:.5f}"

    def high_params():
        rep = classify_regime(build_kernel({"kind": "series", "coeffs": [0, 0.9] + [0] * 8 + [0.1]}))
        h = rep.high
        ok = abs(h.b) < 1e-10 and abs(h.lam - 0.9) < 1e-10 and abs(h.nu - 0.1641513) < 1e-6
        return ok, f"b={h.b:.3g} lambda={h.lam:.12g} nu={h.nu:.9f}"

    def sparse_scale():
        from nngf.quadrature import mu_quadrature as mq

        nk = normalized_kernel(relu_kernel(), 5000, 2, mq(2, 600))
        val = 5000**2 * nk.one_minus_c0
        beta0 = 9 * math.pi**2 / 2
        return abs(val / beta0 - 1) < 0.1, f"L^2 (1 - C_0) = {val:.5g} vs {beta0:.5g}"

    return [("gegenbauer-orthogonality", gegenbauer), ("relu-double-integral", relu_oracle),
            ("relu-boundary-expansion", relu_boundary), ("high-disorder-parameters", high_params),
            ("sparse-scaling", sparse_scale)]


def cmd_verify(args) -> int:
    results = []
    for name, fn in _verify_checks():
        ok, msg = fn()
        results.append({"check": name, "passed": bool(ok), "detail": msg})
    if args.format == "json":
        _emit(rp.json_text(results))
    elif args.format == "csv":
        _emit(rp.csv_text(["check", "passed", "detail"], [(r["check"], r["passed"], r["detail"]) for r in results]))
    else:
        for r in results:
            sys.stdout.write(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}: {r['detail']}\n")
    return 0 if all(r["passed"] for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads (default: NNGF_WORKERS or 1)")
    common.add_argument("--format", choices=("csv", "json"), help="stdout format")

    kern = argparse.ArgumentParser(add_help=False)
    kern.add_argument("--kind", choices=("relu", "identity"), help="built-in kernel")
    kern.add_argument("--series", help="kernel coefficients c0,c1,... of kappa(u) = sum c_q u^q")
    kern.add_argument("--d", type=int, default=2, help="sphere dimension")

    parser = argparse.ArgumentParser(prog="nngf", description="Deep neural-network Gaussian fields on spheres.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common, kern], help="evaluate kappa_L at probe points")
    p.add_argument("--probe", default="0", help="comma-separated u values")
    p.add_argument("--depth", type=int, default=1)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("regime", parents=[common, kern], help="classify the regime and its constants")
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("spectrum", parents=[common, kern], help="angular power spectra over depths")
    p.add_argument("--depths", default="1,10,30")
    p.add_argument("--lmax", type=int, default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("moments", parents=[common, kern], help="kernel moments over depths")
    p.add_argument("--depths", default="10,20,40,80")
    p.add_argument("--q", default="2,3,4")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo replicates from a config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", parents=[common], help="predict, simulate and check a config")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", parents=[common], help="built-in deterministic checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "depth", 1) is not None and getattr(args, "depth", 1) < 0:
            raise ValidationError("depth must be >= 0")
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NNGFError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
