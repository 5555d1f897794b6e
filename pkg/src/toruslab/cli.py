"""Batch experiment runner: ``toruslab run|verify|list-experiments``.

Configs are flat ``key = value`` text files with dotted keys for nesting
(``kernel.kind = ou``).  Unknown keys are rejected.  Every experiment
requires an explicit 64-bit seed; there are no wall-clock defaults, so a
config plus a seed pins the outputs byte for byte.

``run`` writes a CSV time-series table (RFC-4180, header row, ``.`` decimal
separator), a JSON summary embedding every report the experiment produced,
and a reproducibility block (seed, package version, config hash).
``verify`` executes the experiment's acceptance checks and exits 0 only if
all of them pass, printing one line per check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from toruslab import __version__
from toruslab.core import (
    KasnerExponents,
    OperatorCoefficients,
    Radii,
    TimeGrid,
)
from toruslab.dynamics import (
    check_kasner,
    d_residual,
    h_residual,
    kasner_solution,
    kl_exponents,
    KLParameter,
)
from toruslab.estimate import (
    chernoff_tail,
    growth_law_ou,
    hoeffding_bound,
    kl_alternative_bound,
    lyapunov_from_series,
    markov_bound,
    maximal_bound,
    stable_class_moment,
    stable_class_residual,
    stable_class_residual_mc,
)
from toruslab.pulse import (
    ConstantPulse,
    GaussianPulse,
    attractor,
    constant_perturbation,
    gaussian_pulse_integral,
    perturbed_moduli,
    perturbed_norm,
    pulse_source_term,
)
from toruslab.randfield import CovarianceKernel, Ensemble, cumulative_integral, path_rng
from toruslab.stochavg import (
    KasnerBase,
    LinearBase,
    PerturbedTrajectory,
    StaticBase,
    averaged_with_preexisting_lambda,
    brownian_paths,
    gbm_exact,
    lce_empirical,
    mc_averaged_residual,
    white_noise_divergence_scan,
)

EXPERIMENTS = (
    "kasner",
    "pulse",
    "constant",
    "mc-avg",
    "estimate",
    "bounds",
    "bianchi",
    "gbm",
    "stable-class",
)

_COMMON_KEYS = {
    "experiment": str,
    "seed": int,
    "n": int,
    "zeta": float,
    "mode": str,
    "kernel.kind": str,
    "kernel.c": float,
    "kernel.varsigma": float,
    "kernel.alpha": float,
    "grid.t_start": float,
    "grid.dt": float,
    "grid.n_steps": int,
    "ensemble.n_paths": int,
    "out.csv": str,
    "out.json": str,
    "threads": int,
}

_EXPERIMENT_KEYS = {
    "kasner": {"p": list, "t_values": list},
    "pulse": {"pulse.a": float, "pulse.theta": float, "t_end": float},
    "constant": {"pulse.a": float, "t_end": float},
    "mc-avg": {"base": str, "lambda_bar": float, "selftest.corrupt_lambda": bool},
    "estimate": {"t_end": float},
    "bounds": {},
    "bianchi": {"p": list},
    "gbm": {"alpha": float, "t_end": float},
    "stable-class": {},
}

_DEFAULTS = {
    "n": 3,
    "zeta": 0.5,
    "mode": "iid",
    "kernel.kind": "ou",
    "kernel.c": 1.0,
    "kernel.varsigma": 0.5,
    "grid.t_start": 0.0,
    "grid.dt": 0.005,
    "grid.n_steps": 64,
    "ensemble.n_paths": 2000,
    "threads": 1,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict

    def get(self, key, default=None):
        if key in self.params:
            return self.params[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        return default

    def require(self, key):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        return value

    def kernel(self) -> CovarianceKernel:
        kind = self.get("kernel.kind")
        if kind == "white_limit":
            return CovarianceKernel.white_limit(self.get("kernel.alpha", 1.0))
        return CovarianceKernel(kind, C=self.get("kernel.c"), varsigma=self.get("kernel.varsigma"))

    def grid(self) -> TimeGrid:
        return TimeGrid(self.get("grid.t_start"), self.get("grid.dt"), self.get("grid.n_steps"))


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in raw:
        return [float(part) for part in raw.split(",") if part.strip()]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat key = value lines; unknown keys are rejected."""
    params = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key in params:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        params[key] = _parse_value(raw)
    if "experiment" not in params:
        raise ConfigError("missing required key 'experiment'")
    experiment = params["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    allowed = set(_COMMON_KEYS) | set(_EXPERIMENT_KEYS[experiment])
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {experiment!r}: {', '.join(unknown)}")
    if "seed" not in params:
        raise ConfigError("missing required key 'seed' (no wall-clock defaults)")
    seed = params["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return ExperimentConfig(experiment=experiment, params=params)


def serialize_config(config: ExperimentConfig) -> str:
    lines = []
    for key in sorted(config.params):
        value = config.params[key]
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, list):
            rendered = ",".join(repr(float(v)) for v in value)
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Experiment implementations: each returns (csv_rows, summary, checks)
# where checks is a list of (name, passed, detail) used by verify.
# ---------------------------------------------------------------------------


def _run_kasner(config):
    p_values = config.get("p", [-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0])
    p = KasnerExponents(np.asarray(p_values, dtype=float))
    t_values = config.get("t_values", [0.5, 1.0, 2.0, 10.0])
    coeffs = OperatorCoefficients.einstein()
    rows = []
    max_h = 0.0
    max_d = 0.0
    for t in t_values:
        state = kasner_solution(np.zeros(p.n), p, t)
        radii = np.exp(state.psi)
        da = radii * state.dpsi
        dda = radii * (state.ddpsi + state.dpsi**2)
        h = h_residual(state, coeffs)
        d = d_residual(Radii(radii), da, dda, coeffs)
        max_h = max(max_h, abs(h))
        max_d = max(max_d, abs(d))
        for i, a in enumerate(radii):
            rows.append((t, f"radius_{i}", a, ""))
        rows.append((t, "h_residual", h, ""))
        rows.append((t, "d_residual", d, ""))
    residual, valid = check_kasner(p)
    summary = {
        "p": list(map(float, p.p)),
        "constraint_residual": residual,
        "constraint_valid": valid,
        "max_abs_h_residual": max_h,
        "max_abs_d_residual": max_d,
    }
    checks = [
        ("kasner.constraint", valid, f"residual={residual:.3e}"),
        ("kasner.h_residual", max_h < 1e-9, f"max |h|={max_h:.3e}"),
        ("kasner.d_residual", max_d < 1e-9, f"max |d|={max_d:.3e}"),
        (
            "kasner.kl_chart",
            all(
                check_kasner(kl_exponents(KLParameter(u)))[0] < 1e-12
                for u in np.geomspace(1.0, 1e4, 50)
            ),
            "50 chart points",
        ),
    ]
    return rows, summary, checks


def _run_pulse(config):
    n = config.get("n")
    amp = config.get("pulse.a", 1.0)
    theta = config.get("pulse.theta", 0.05)
    t_end = config.get("t_end", 10.0 * theta)
    pulse = GaussianPulse.isotropic(amp, theta, n)
    psi_e = np.zeros(n)
    a_e = Radii(np.ones(n))
    coeffs = OperatorCoefficients.einstein()
    times = np.linspace(0.0, t_end, 201)
    rows = []
    max_identity_gap = 0.0
    for t in times:
        state = perturbed_moduli(psi_e, pulse, t)
        src = pulse_source_term(pulse, t, coeffs)
        gap = abs(h_residual(state, coeffs) - src)
        max_identity_gap = max(max_identity_gap, gap)
        rows.append((t, "norm_deviation", perturbed_norm(a_e, pulse, t), ""))
        rows.append((t, "source_term", src, ""))
    att = attractor(a_e, pulse)
    t_check = 8.0 * theta
    a_check = np.exp(perturbed_moduli(psi_e, pulse, t_check).psi)
    conv = float(np.max(np.abs(a_check - att.a) / att.a))
    summary = {
        "attractor": list(map(float, att.a)),
        "attractor_rel_gap_at_8theta": conv,
        "max_source_identity_gap": max_identity_gap,
        "pulse_integral_asymptote": gaussian_pulse_integral(amp, theta, 100.0 * theta),
    }
    checks = [
        ("pulse.attractor_convergence", conv < 1e-6, f"rel gap={conv:.3e}"),
        ("pulse.source_identity", max_identity_gap < 1e-9, f"gap={max_identity_gap:.3e}"),
    ]
    return rows, summary, checks


def _run_constant(config):
    n = config.get("n")
    amp = config.get("pulse.a", 0.5)
    t_end = config.get("t_end", 20.0)
    pulse = ConstantPulse(amp)
    psi_e = np.zeros(n)
    a_e = Radii(np.ones(n))
    times = np.linspace(0.0, t_end, 401)
    rows = []
    for t in times:
        rows.append((t, "norm_deviation", perturbed_norm(a_e, pulse, t), ""))
    _, residual = constant_perturbation(psi_e, pulse, 1.0)
    fit_window = times[times >= 0.75 * t_end]
    ratios = [perturbed_norm(a_e, pulse, t) / math.sqrt(n) for t in fit_window]
    slope = lyapunov_from_series(ratios, fit_window, burn_in=fit_window[0])
    summary = {
        "residual_diagonal": residual,
        "expected_residual": n * amp * amp,
        "fitted_growth_rate": slope,
        "amplitude": amp,
    }
    checks = [
        (
            "constant.residual",
            abs(residual - n * amp * amp) < 1e-10,
            f"residual={residual!r}",
        ),
        (
            "constant.lyapunov_rate",
            abs(slope - amp) < 0.01 * abs(amp),
            f"slope={slope:.6f} target={amp}",
        ),
    ]
    return rows, summary, checks


def _make_base(config, coeffs):
    n = config.get("n")
    base_kind = config.get("base", "static")
    if base_kind == "static":
        return StaticBase(np.zeros(n))
    if base_kind == "kasner":
        return KasnerBase(np.zeros(n), np.ones(n))
    if base_kind == "linear":
        lam_bar = config.get("lambda_bar", 1.0)
        return LinearBase.for_forcing(lam_bar, n, coeffs)
    raise ConfigError(f"unknown base {base_kind!r}")


def _run_mc_avg(config):
    coeffs = OperatorCoefficients.einstein()
    base = _make_base(config, coeffs)
    grid = config.grid()
    if isinstance(base, KasnerBase) and grid.t_start <= 0.0:
        grid = TimeGrid(1.0, grid.dt, grid.n_steps)
    ens = Ensemble(
        kernel=config.kernel(),
        grid=grid,
        mode=config.get("mode"),
        n_components=base.n,
        n_paths=config.get("ensemble.n_paths"),
        seed=config.require("seed"),
    )
    traj = PerturbedTrajectory(base=base, zeta=config.get("zeta"), ensemble=ens)
    if isinstance(base, LinearBase):
        report = averaged_with_preexisting_lambda(traj, coeffs)
    else:
        report = mc_averaged_residual(traj, coeffs)
    analytic = report.analytic
    if config.get("selftest.corrupt_lambda", False):
        # Negative-control fixture: a deliberately wrong closed form must
        # make verification fail.
        analytic = analytic * 1.5 + 1.0
    z = (report.mc_mean - analytic) / report.mc_se if report.mc_se > 0 else 0.0
    rows = [
        (grid.t_start, "mc_mean", report.mc_mean, ""),
        (grid.t_start, "analytic", report.analytic, ""),
    ]
    summary = {"averaging_report": report.to_dict(), "z_vs_checked_analytic": z}
    checks = [
        (
            "mc-avg.induced_lambda",
            abs(z) <= 3.0,
            f"mc={report.mc_mean:.6g} analytic={analytic:.6g} z={z:.2f}",
        ),
        (
            "mc-avg.linear_term_zero_mean",
            abs(report.linear_term_mean) <= 3.0 * max(report.linear_term_se, 1e-300)
            or report.linear_term_se == 0.0,
            f"mean={report.linear_term_mean:.3g}",
        ),
    ]
    return rows, summary, checks


def _run_estimate(config):
    zeta = config.get("zeta")
    kernel = config.kernel()
    if kernel.kind != "ou":
        raise ConfigError("the estimate experiment uses the ou kernel")
    law = growth_law_ou(1.0, config.get("n"), zeta, kernel.C, kernel.varsigma)
    t_end = config.get("t_end", 20.0 * kernel.varsigma)
    times = np.linspace(0.0, t_end, 200)
    rows = [(t, "growth_law", law.value(t), "") for t in times]
    grid = TimeGrid(0.0, t_end / 255, 256)
    kl = kl_alternative_bound(kernel, grid, zeta, 1.0, config.get("n"))
    scan = white_noise_divergence_scan([1.0, 0.5, 0.25, 0.125], zeta, config.get("n"), C=kernel.C)
    # sweep table rows: the abscissa is the correlation time, not t
    rows.extend(
        (row["varsigma"], "induced_lambda_vs_varsigma", row["lambda"], "") for row in scan.table
    )
    summary = {
        "rate": law.rate,
        "nominal_rate": law.nominal_rate,
        "trace_rel_error": kl["trace_rel_error"],
        "spectral_bound": kl["bound"].to_dict(),
        "divergence_scan": scan.to_dict(),
    }
    checks = [
        ("estimate.trace_identity", kl["trace_rel_error"] < 0.01, f"rel={kl['trace_rel_error']:.4f}"),
        ("estimate.spectral_bound", kl["bound"].holds, "cumulant <= bound"),
        (
            "estimate.divergence_exponent",
            abs(scan.fitted_exponent + 1.0) < 0.05,
            f"slope={scan.fitted_exponent:.3f}",
        ),
    ]
    return rows, summary, checks


def _run_bounds(config):
    seed = config.require("seed")
    n_paths = config.get("ensemble.n_paths")
    rng = path_rng(seed, 0, 0)
    lognormals = np.exp(rng.standard_normal(n_paths))
    markov = markov_bound(lognormals, 2.0 * float(lognormals.mean()))
    chern = chernoff_tail(lognormals, 0.5 * float(lognormals.mean()))
    n = config.get("n")
    uniforms = rng.uniform(1.0, 2.0, size=(n_paths, n))
    sd = float(uniforms.mean(axis=1).std(ddof=1))
    hoeff = hoeffding_bound(uniforms, 1.0, 2.0, sd)
    normals = rng.standard_normal((n_paths, 64))
    maxrep = maximal_bound(normals, sub_gaussian_C=1.0)
    rows = []
    summary = {
        "markov": markov.to_dict(),
        "chernoff": chern.to_dict(),
        "hoeffding": hoeff.to_dict(),
        "maximal": maxrep.to_dict(),
    }
    checks = [
        ("bounds.markov", markov.holds, f"emp={markov.empirical_value:.4f} bound={markov.bound_value:.4f}"),
        ("bounds.chernoff", chern.holds, f"emp={chern.empirical_value:.4f} bound={chern.bound_value:.4f}"),
        ("bounds.hoeffding", hoeff.holds, f"emp={hoeff.empirical_value:.4f} bound={hoeff.bound_value:.4f}"),
        ("bounds.maximal", maxrep.holds, f"mean_max={maxrep.mean_max:.3f} bound={maxrep.mean_bound:.3f}"),
    ]
    return rows, summary, checks


def _run_bianchi(config):
    p_values = config.get("p", [-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0])
    p = np.asarray(p_values, dtype=float)
    n = len(p)
    zeta = config.get("zeta")
    kernel = config.kernel()
    if kernel.kind != "ou":
        raise ConfigError("the bianchi experiment uses the ou kernel")
    seed = config.require("seed")
    n_paths = config.get("ensemble.n_paths")
    vs = kernel.varsigma
    grid = TimeGrid(1.0, 0.01 * vs, int(round(10.0 * vs / (0.01 * vs))) + 1)
    ens = Ensemble(kernel=kernel, grid=grid, mode="shared", n_components=n, n_paths=n_paths, seed=seed)
    mean_factor = np.zeros(grid.n_steps)
    for _, vals in ens.iter_chunks():
        integrals = cumulative_integral(vals[:, 0, :], grid.dt)
        mean_factor += np.exp(zeta * integrals).sum(axis=0)
    mean_factor /= n_paths
    times = grid.times()
    law = growth_law_ou(1.0, 1, zeta, kernel.C, kernel.varsigma)
    rows = []
    step = max(1, grid.n_steps // 200)
    for k in range(0, grid.n_steps, step):
        for i in range(n):
            rows.append((times[k], f"mean_radius_{i}", (times[k] ** p[i]) * mean_factor[k], ""))
    slope = lyapunov_from_series(mean_factor, times - grid.t_start, burn_in=2.0 * vs)
    summary = {"boost_rate_fitted": slope, "boost_rate_analytic": law.rate, "p": list(map(float, p))}
    checks = [
        (
            "bianchi.boost_rate",
            abs(slope - law.rate) < 0.15 * law.rate,
            f"fit={slope:.4f} target={law.rate:.4f}",
        )
    ]
    return rows, summary, checks


def _run_gbm(config):
    alpha = config.get("alpha", 0.5)
    zeta = config.get("zeta")
    seed = config.require("seed")
    n_paths = config.get("ensemble.n_paths")
    t_end = config.get("t_end", 50.0)
    grid = TimeGrid(0.0, 0.01, int(round(t_end / 0.01)) + 1)
    b = brownian_paths(grid, n_paths, seed)
    paths = gbm_exact(1.0, alpha, zeta, b, grid)
    lce, se = lce_empirical(paths, grid.span)
    target = -alpha - 0.5 * zeta * zeta
    stabilized = alpha - 0.5 * zeta * zeta < 0.0
    times = grid.times()
    mean_path = paths.mean(axis=0)
    step = max(1, len(times) // 200)
    rows = [(times[k], "mean_path", mean_path[k], "") for k in range(0, len(times), step)]
    summary = {
        "lce_mean": lce,
        "lce_se": se,
        "lce_target": target,
        "unstable_system_stabilized": stabilized,
        "stabilization_threshold": alpha - 0.5 * zeta * zeta,
    }
    checks = [
        ("gbm.lce", abs(lce - target) <= 3.0 * se, f"lce={lce:.4f} target={target:.4f}"),
    ]
    return rows, summary, checks


def _run_stable_class(config):
    zeta = config.get("zeta")
    kernel = config.kernel()
    if kernel.kind != "squared_exp":
        kernel = CovarianceKernel.squared_exp(config.get("kernel.c"), config.get("kernel.varsigma"))
    n = config.get("n")
    seed = config.require("seed")
    n_paths = config.get("ensemble.n_paths")
    grid = TimeGrid(0.0, 0.05 * kernel.varsigma, 128)
    ens = Ensemble(kernel=kernel, grid=grid, mode="iid", n_components=1, n_paths=n_paths, seed=seed)
    analytic = stable_class_moment(kernel, zeta)
    k1, k2 = grid.n_steps // 3, 2 * grid.n_steps // 3
    sums = np.zeros(2)
    for _, vals in ens.iter_chunks():
        sums[0] += np.exp(zeta * vals[:, 0, k1]).sum()
        sums[1] += np.exp(zeta * vals[:, 0, k2]).sum()
    m1, m2 = sums / n_paths
    lam = stable_class_residual(kernel, zeta, n)
    mc_lam, mc_se = stable_class_residual_mc(
        kernel, zeta, n, TimeGrid(0.0, 0.02 * kernel.varsigma, 256), max(1000, n_paths // 10), seed + 1
    )
    rows = [(grid.times()[k1], "moment", m1, ""), (grid.times()[k2], "moment", m2, "")]
    summary = {
        "moment_analytic": analytic,
        "moment_mc": [m1, m2],
        "residual_analytic": lam,
        "residual_mc": mc_lam,
        "residual_mc_se": mc_se,
    }
    checks = [
        (
            "stable-class.moment_t1",
            abs(m1 - analytic) / analytic < 0.02,
            f"mc={m1:.5f} analytic={analytic:.5f}",
        ),
        (
            "stable-class.moment_t2",
            abs(m2 - analytic) / analytic < 0.02,
            f"mc={m2:.5f} analytic={analytic:.5f}",
        ),
        (
            "stable-class.residual",
            abs(mc_lam - lam) <= 3.0 * mc_se,
            f"mc={mc_lam:.5f} analytic={lam:.5f}",
        ),
    ]
    return rows, summary, checks


_RUNNERS = {
    "kasner": _run_kasner,
    "pulse": _run_pulse,
    "constant": _run_constant,
    "mc-avg": _run_mc_avg,
    "estimate": _run_estimate,
    "bounds": _run_bounds,
    "bianchi": _run_bianchi,
    "gbm": _run_gbm,
    "stable-class": _run_stable_class,
}


def execute(config: ExperimentConfig):
    return _RUNNERS[config.experiment](config)


def _json_payload(config, summary, checks) -> dict:
    return {
        "experiment": config.experiment,
        "summary": summary,
        "checks": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in checks],
        "reproducibility": {
            "seed": config.require("seed"),
            "version": __version__,
            "config_sha256": config_hash(config),
        },
    }


def _write_json(payload: dict, json_path: Path) -> None:
    with open(json_path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run(config: ExperimentConfig, out_dir: Path) -> int:
    """Run the experiment and write CSV + JSON artifacts; 0 on success."""
    rows, summary, checks = execute(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / config.get("out.csv", f"{config.experiment}.csv")
    json_path = out_dir / config.get("out.json", f"{config.experiment}.json")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "quantity", "value", "path_id"])
        for t, quantity, value, path_id in rows:
            writer.writerow([repr(float(t)), quantity, repr(float(value)), path_id])
    _write_json(_json_payload(config, summary, checks), json_path)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def verify(config: ExperimentConfig, out_dir: Path | None = None) -> int:
    """Run the experiment's acceptance checks; 0 iff all pass.

    With an output directory the JSON summary is written as well, so two
    verify runs with the same config and seed can be compared byte for
    byte.
    """
    _, summary, checks = execute(config)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / config.get("out.json", f"{config.experiment}.json")
        _write_json(_json_payload(config, summary, checks), json_path)
    failures = 0
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        failures += 0 if passed else 1
    return 0 if failures == 0 else 1


def _apply_overrides(config: ExperimentConfig, overrides, seed=None) -> ExperimentConfig:
    params = dict(config.params)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        params[key.strip()] = _parse_value(raw)
    if seed is not None:
        params["seed"] = seed
    text = serialize_config(ExperimentConfig(params.get("experiment", config.experiment), params))
    return parse_config(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="toruslab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify"):
        p = sub.add_parser(name)
        p.add_argument("config", type=Path)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", type=Path, default=None)
        p.add_argument("--threads", type=int, default=1, help="reserved; outputs do not depend on it")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    sub.add_parser("list-experiments")
    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(name)
        return 0

    try:
        config = parse_config(Path(args.config).read_text())
        config = _apply_overrides(config, args.override, seed=args.seed)
        if args.command == "run":
            return run(config, args.out_dir if args.out_dir is not None else Path("."))
        return verify(config, out_dir=args.out_dir)
    except (ConfigError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
