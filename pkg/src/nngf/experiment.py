"""Config loading and the predict -> simulate -> test pipeline."""
from __future__ import annotations

import copy
import json
import math
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from nngf.dynamics import classify_regime
from nngf.errors import ValidationError
from nngf.fieldsim import ExperimentConfig, FunctionalSamples, monte_carlo_experiment
from nngf.functionals import (
    hermite_expand,
    hermite_rank,
    observable_from_dict,
    predict_limit,
    total_variance,
)
from nngf.inference import fit_variance_rate, moments_summary, two_sample_stability, w1_to_gaussian
from nngf.kernel import ActivationSpec, Kernel, hermite_coefficients, kernel_from_series, relu_kernel

DEFAULTS = {
    "grid": {"kind": "random-uniform", "n": 1024},
    "method": "auto",
    "seed": 0,
    "normalization": "theoretical",
    "lmax": None,
    "q_max": 40,
    "checks": [],
    "output": "nngf-out",
}


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("nngf").joinpath("schema/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def tolerance_defaults() -> dict:
    props = schema()["$defs"]["tolerances"]["properties"]
    return {k: v["default"] for k, v in props.items()}


def validate_config(config: dict) -> dict:
    """Schema-validate and fill defaults; raises ``ValidationError``."""
    try:
        jsonschema.validate(config, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from None
    out = copy.deepcopy(DEFAULTS)
    out.update(copy.deepcopy(config))
    tol = tolerance_defaults()
    tol.update(config.get("tolerances", {}))
    out["tolerances"] = tol
    return out


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    return validate_config(raw)


def build_kernel(spec: dict) -> Kernel:
    kind = spec["kind"]
    if kind == "relu":
        return relu_kernel()
    if kind == "series":
        if "coeffs" not in spec:
            raise ValidationError("series kernel needs 'coeffs'")
        return kernel_from_series(spec["coeffs"])
    act = ActivationSpec(spec.get("activation", "relu"), tuple(spec.get("coeffs", ())))
    return kernel_from_series(hermite_coefficients(act, spec.get("q_max", 64)))


def resolve_workers(cli_value, config_value=None) -> int:
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get("NNGF_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("NNGF_WORKERS must be an integer") from None
    return max(1, int(config_value or 1))


def experiment_config(config: dict, workers: int = 1) -> ExperimentConfig:
    grid = config.get("grid", {})
    return ExperimentConfig(
        kernel=build_kernel(config["kernel"]),
        d=config["d"],
        depths=list(config["depths"]),
        replicates=config["replicates"],
        observable=observable_from_dict(config["observable"]),
        seed=config["seed"],
        method=config["method"],
        normalization=config["normalization"],
        grid_kind=grid.get("kind", "random-uniform"),
        grid_n=grid.get("n", 1024),
        lmax=config["lmax"],
        workers=workers,
        q_max=config["q_max"],
    )


def _by_depth(samples):
    return {s.depth: s for s in samples}


def _var_se(x):
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    v = float(np.mean(c * c))
    return float(np.var(x, ddof=1)), math.sqrt(max(0.0, float(np.mean(c**4)) - v * v) / x.size)


def run_checks(config: dict, cfg: ExperimentConfig, samples: list, prediction) -> list:
    """One verdict dict per registered check."""
    tol = config["tolerances"]
    data = _by_depth(samples)
    expansion = hermite_expand(cfg.observable, cfg.q_max)
    report = classify_regime(cfg.kernel)
    verdicts = []
    for i, check in enumerate(config.get("checks", [])):
        kind = check["type"]
        name = check.get("name", f"{kind}-{i}")
        depths = check.get("depths", cfg.depths)
        detail: dict = {}
        if kind == "w1-decreasing":
            w = [w1_to_gaussian(data[L].normalized, seed=cfg.seed).w1 for L in depths]
            ok = all(a > b for a, b in zip(w, w[1:])) and w[-1] < tol["w1_terminal"]
            detail = {"depths": depths, "w1": w, "terminal_max": tol["w1_terminal"]}
        elif kind == "variance-match":
            rows = []
            for L in depths:
                emp, se = _var_se(data[L].values)
                th = total_variance(expansion, cfg.kernel, L, cfg.d).totals[L]
                rows.append({"L": L, "empirical": emp, "se": se, "theory": th,
                             "z": (emp - th) / se if se > 0 else math.inf})
            ok = all(abs(r["z"]) < tol["sigma"] for r in rows)
            detail = {"rows": rows, "sigma": tol["sigma"]}
        elif kind == "variance-slope":
            tab = total_variance(expansion, cfg.kernel, depths, cfg.d)
            fit = fit_variance_rate(depths, [tab.totals[L] for L in depths], check.get("abscissa", "log L"))
            lo, hi = tol["slope_range"]
            ok = lo <= fit.slope <= hi
            detail = {"fit": fit.to_dict(), "range": [lo, hi]}
        elif kind == "stability":
            a, b = depths[0], depths[1]
            st = two_sample_stability(data[a].normalized, data[b].normalized)
            ok = st.pvalue > tol["ks_pvalue"]
            detail = {"depths": [a, b], **st.to_dict(), "min_pvalue": tol["ks_pvalue"]}
        elif kind == "skewness":
            if prediction.third_cumulant is None:
                raise ValidationError("skewness check needs a non-central Q = 2 prediction")
            pred = prediction.third_cumulant / prediction.limit_variance**1.5
            rows = []
            for L in depths:
                m = moments_summary(data[L].values)
                rows.append({"L": L, "skewness": m.skewness, "se": m.se_skewness, "prediction": pred,
                             "z_zero": m.skewness / m.se_skewness,
                             "z_pred": (m.skewness - pred) / m.se_skewness})
            ok = all(abs(r["z_zero"]) > tol["skew_zero_se"] and abs(r["z_pred"]) < tol["skew_match_se"]
                     for r in rows)
            detail = {"rows": rows}
        elif kind == "variance-ratio":
            a, b = depths[0], depths[1]
            Q = hermite_rank(expansion, cfg.kernel, cfg.d)
            tab = total_variance(expansion, cfg.kernel, [a, b], cfg.d)
            ra = tab.totals[a] / report.scale(a) ** Q
            rb = tab.totals[b] / report.scale(b) ** Q
            change = abs(rb - ra) / abs(ra)
            ok = change < tol["variance_ratio"]
            detail = {"depths": [a, b], "ratios": [ra, rb], "relative_change": change}
        else:
            raise ValidationError(f"unknown check type {kind!r}")
        verdicts.append({"name": name, "type": kind, "passed": bool(ok), "detail": detail})
    return verdicts


def run_experiment(config: dict, workers: int = 1):
    """Predict, simulate and check; returns (prediction, samples, verdicts)."""
    cfg = experiment_config(config, workers)
    report = classify_regime(cfg.kernel)
    expansion = hermite_expand(cfg.observable, cfg.q_max)
    prediction = predict_limit(report, expansion, cfg.d, kernel=cfg.kernel)
    samples: list[FunctionalSamples] = monte_carlo_experiment(cfg)
    verdicts = run_checks(config, cfg, samples, prediction)
    return report, prediction, samples, verdicts
