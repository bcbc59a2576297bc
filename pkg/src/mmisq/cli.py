"""Command-line front end.

Subcommands: analyze (closed forms, no RNG), simulate (sample batches),
moments (exact finite-N moments), clt and cov (full verification pipelines
producing CSV + JSON reports).

Exit codes: 0 all requested verdicts pass; 1 at least one verdict failed;
2 invalid configuration; 3 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, limits, moments
from .config import ScenarioConfig, load_config, write_effective
from .errors import ConfigError, IoFailure, MmisqError
from .experiments import CheckResult, CltReport, make_row
from .markov import analyze
from .model import Variant
from .simulate import active_backend, run_batch

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _theory(cfg: ScenarioConfig):
    """Variant-dependent fluid mean and limit variance as functions of t."""
    g = cfg.generator()
    spec = cfg.model_spec()
    an = analyze(g)
    if spec.variant is Variant.MODEL_I:
        summary = limits.model1_limits(an, spec, cfg.alpha)
        return g, spec, an, summary.rho_t, summary.sigma2_t

    def rho_t(t: float) -> float:
        return float(limits.rho2_vector(an.pi, spec, t).sum())

    def sigma2_t(t: float) -> float:
        _, v, _ = limits.model2_matrices(an, spec, cfg.alpha, t)
        return limits.model2_total_variance(v, limits.rho2_vector(an.pi, spec, t), cfg.alpha)

    return g, spec, an, rho_t, sigma2_t


def _emit(report: CltReport, cfg: ScenarioConfig, out_dir: str | None, basename: str) -> None:
    if out_dir is None:
        return
    experiments.emit_report(report, out_dir, basename)
    write_effective(cfg, Path(out_dir) / "effective_config.yaml")


def _print_checks(checks) -> None:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        rel = "outside" if c.invert else "in"
        print(f"[{status}] {c.name}: value={c.value:.6g} expected {rel} [{c.lo:.6g}, {c.hi:.6g}]")


def cmd_analyze(cfg: ScenarioConfig, out_dir: str | None) -> int:
    g, spec, an, rho_t, sigma2_t = _theory(cfg)
    lam_inf, mu_inf = limits.averaged_rates(an.pi, spec)
    u = limits.u_constant(an.pi, spec.lam, an.deviation)
    uhat, ucheck = limits.uhat_ucheck(an.pi, spec.lam, spec.mu, an.deviation)
    gamma = cfg.scaling(cfg.n_values[0]).gamma

    print(f"scenario {cfg.name} (model {cfg.variant}, alpha={cfg.alpha}, gamma={gamma})")
    print(f"pi = {np.array2string(an.pi, precision=8)}")
    print(f"deviation matrix =\n{np.array2string(an.deviation, precision=8)}")
    print(f"lambda_inf = {lam_inf:.8g}, mu_inf = {mu_inf:.8g}")
    print(f"U = {u:.8g}, Uhat = {uhat:.8g}, Ucheck = {ucheck:.8g}")

    scen = {"scenario_id": cfg.name, "model": cfg.variant, "alpha": cfg.alpha}
    rows = []
    n0 = cfg.n_values[0]

    def add(t, stat, value, theory=math.nan):
        rows.append(make_row(cfg.name, cfg.variant, cfg.alpha, n0, t, stat, value, theory))

    add(math.nan, "gamma", gamma)
    add(math.nan, "lambda_inf", lam_inf)
    add(math.nan, "mu_inf", mu_inf)
    add(math.nan, "U", u)
    add(math.nan, "Uhat", uhat)
    add(math.nan, "Ucheck", ucheck)
    for i, p in enumerate(an.pi):
        add(math.nan, f"pi_{i}", p)
    for i in range(g.dim):
        for j in range(g.dim):
            add(math.nan, f"D_{i}{j}", an.deviation[i, j])
    for t in cfg.grid:
        add(t, "rho", rho_t(t))
        add(t, "sigma2", sigma2_t(t))
        print(f"t={t:g}: rho(t)={rho_t(t):.8g}, sigma2(t)={sigma2_t(t):.8g}")
    if spec.variant is Variant.MODEL_II:
        t_last = cfg.grid[-1]
        dbar, v, c = limits.model2_matrices(an, spec, cfg.alpha, t_last)
        print(f"V({t_last:g}) =\n{np.array2string(v, precision=8)}")
        print(f"C({t_last:g}) =\n{np.array2string(c, precision=8)}")
        for i in range(g.dim):
            for j in range(g.dim):
                add(t_last, f"V_{i}{j}", v[i, j])
                add(t_last, f"C_{i}{j}", c[i, j])
    if cfg.offsets is not None and cfg.t is not None:
        if np.ptp(spec.mu) == 0.0:
            cm = limits.check_matrix(float(spec.mu[0]), u, lam_inf, cfg.alpha, cfg.t, cfg.offsets)
            print(f"cross-time covariance at t={cfg.t:g} =\n{np.array2string(cm, precision=8)}")
            for a in range(len(cfg.offsets)):
                for b in range(len(cfg.offsets)):
                    add(cfg.t, f"ctcov_{a}{b}", cm[a, b])
        else:
            print("cross-time covariance skipped: requires uniform service rates")

    report = CltReport(scenario=scen, rows=rows, checks=[], metadata={"kind": "analyze"})
    _emit(report, cfg, out_dir, "analysis")
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, out_dir: str | None, threads: int) -> int:
    g = cfg.generator()
    spec = cfg.model_spec()
    init = cfg.init_state_code()
    for n in cfg.n_values:
        batch = run_batch(g, spec, cfg.scaling(n), cfg.grid, cfg.replications,
                          cfg.master_seed, init_state=init, threads=threads)
        means = batch.counts.mean(axis=0)
        print(f"N={n}: R={batch.replications}, mean counts at grid = "
              f"{np.array2string(means, precision=4)} [{active_backend()} backend]")
        if out_dir is not None:
            path = Path(out_dir) / f"samples_N{n}.csv"
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w") as fh:
                    d = g.dim
                    head = "rep,t,count"
                    if batch.per_type is not None:
                        head += "," + ",".join(f"count_{k}" for k in range(d))
                    fh.write(head + "\n")
                    for r in range(batch.replications):
                        for i, t in enumerate(batch.grid):
                            line = f"{r},{float(t)!r},{batch.counts[r, i]}"
                            if batch.per_type is not None:
                                line += "," + ",".join(str(v) for v in batch.per_type[r, i])
                            fh.write(line + "\n")
            except OSError as exc:
                raise IoFailure(f"cannot write samples to {path}: {exc}") from exc
    if out_dir is not None:
        write_effective(cfg, Path(out_dir) / "effective_config.yaml")
    return EXIT_OK


def cmd_moments(cfg: ScenarioConfig, out_dir: str | None) -> int:
    g, spec, an, rho_t, sigma2_t = _theory(cfg)
    lam_inf, mu_inf = limits.averaged_rates(an.pi, spec)
    u = limits.u_constant(an.pi, spec.lam, an.deviation)
    init = cfg.init_state_code()
    rows = []
    for n in cfg.n_values:
        sc = cfg.scaling(n)
        if spec.variant is Variant.MODEL_I:
            mm = moments.moments_model1(g, spec, sc, cfg.grid, init_state=init)
        else:
            mm = moments.moments_model2(g, spec, sc, cfg.grid, init_state=init)
        for i, t in enumerate(cfg.grid):
            mean_asym = n * rho_t(float(t))
            var_asym = n * rho_t(float(t)) + n ** (2.0 - cfg.alpha) * _slow_var(cfg, an, spec, float(t), u, mu_inf)
            rows.append(make_row(cfg.name, cfg.variant, cfg.alpha, n, float(t),
                                 "mean", float(mm.mean[i]), mean_asym))
            rows.append(make_row(cfg.name, cfg.variant, cfg.alpha, n, float(t),
                                 "variance", float(mm.var[i]), var_asym))
            print(f"N={n} t={t:g}: mean={mm.mean[i]:.6f} (asym {mean_asym:.6f}), "
                  f"var={mm.var[i]:.6f} (asym {var_asym:.6f})")
    report = CltReport(scenario={"scenario_id": cfg.name, "model": cfg.variant,
                                 "alpha": cfg.alpha}, rows=rows, checks=[],
                       metadata={"kind": "moments"})
    _emit(report, cfg, out_dir, "moments")
    return EXIT_OK


def _slow_var(cfg: ScenarioConfig, an, spec, t: float, u: float, mu_inf: float) -> float:
    """Slow-switching variance coefficient used in the finite-N expansion."""
    if spec.variant is Variant.MODEL_I:
        return limits.model1_sigma2(an, spec, t)
    _, v, _ = limits.model2_matrices(an, spec, 0.5, t)  # alpha-independent V(t)
    return float(v.sum())


def cmd_clt(cfg: ScenarioConfig, out_dir: str | None, threads: int,
            negative_control: bool) -> int:
    g, spec, an, rho_t, sigma2_t = _theory(cfg)
    if negative_control and cfg.alpha >= 1.0:
        raise ConfigError("scaling.alpha", "the wrong-gamma negative control needs alpha < 1")
    tol = cfg.tolerances
    init = cfg.init_state_code()
    t_last = float(cfg.grid[-1])
    report = CltReport(
        scenario={"scenario_id": cfg.name, "model": cfg.variant, "alpha": cfg.alpha,
                  "N": cfg.n_values, "t": t_last, "seed": cfg.master_seed},
        metadata={"kind": "clt", "tolerances": vars(tol).copy(),
                  "note": "bands are engineering choices; the limit theorems give no convergence rate"},
    )
    emp_vars = []
    n_max = max(cfg.n_values)
    for n in cfg.n_values:
        sc = cfg.scaling(n)
        batch = run_batch(g, spec, sc, cfg.grid, cfg.replications, cfg.master_seed,
                          init_state=init, threads=threads)
        check, rows = experiments.lln_check(batch, rho_t, n, rel_slack=tol.lln_rel)
        report.checks.append(CheckResult(f"N{n}_{check.name}", check.value, check.lo, check.hi))
        report.rows += [make_row(cfg.name, cfg.variant, cfg.alpha, n, r["t"], r["stat"],
                                 r["empirical"], r["theory"], r["stderr"]) for r in rows]

        # rows at every N; the distributional verdicts attach to the largest
        # N, which is where the limit law is actually under test (smaller N
        # serve the slope fit and carry visible finite-N bias)
        checks, rows = experiments.clt_check(
            batch, rho_t(t_last), sigma2_t(t_last), n, sc.gamma,
            var_band=tol.variance_band, ks_allowance=tol.ks_allowance)
        if n == n_max:
            report.checks += [CheckResult(f"N{n}_{c.name}", c.value, c.lo, c.hi)
                              for c in checks]
        report.rows += [make_row(cfg.name, cfg.variant, cfg.alpha, n, r["t"], r["stat"],
                                 r["empirical"], r["theory"], r["stderr"]) for r in rows]
        emp_vars.append(float(batch.counts[:, -1].var(ddof=1)))

        # oracle triangle: simulated mean against the exact moment system
        if spec.variant is Variant.MODEL_I:
            mm = moments.moments_model1(g, spec, sc, [t_last], init_state=init)
        else:
            mm = moments.moments_model2(g, spec, sc, [t_last], init_state=init)
        se = batch.counts[:, -1].std(ddof=1) / math.sqrt(batch.replications)
        z = (batch.counts[:, -1].mean() - mm.mean[0]) / se if se > 0 else 0.0
        report.checks.append(CheckResult(f"N{n}_sim_vs_ode_mean_z", float(z), -3.0, 3.0))
        report.rows.append(make_row(cfg.name, cfg.variant, cfg.alpha, n, t_last,
                                    "ode_mean", float(mm.mean[0]),
                                    float(batch.counts[:, -1].mean()), float(se)))

        if negative_control and n == n_max:
            nc, nc_rows = experiments.clt_check(
                batch, rho_t(t_last), sigma2_t(t_last), n, 0.5,
                var_band=tol.variance_band, name_prefix="negative_control_",
                invert_variance=True)
            report.checks += [CheckResult(f"N{n}_{c.name}", c.value, c.lo, c.hi, c.invert)
                              for c in nc]
            report.rows += [make_row(cfg.name, cfg.variant, cfg.alpha, n, r["t"], r["stat"],
                                     r["empirical"], r["theory"], r["stderr"]) for r in nc_rows]

    if len(cfg.n_values) >= 4:
        expected = max(1.0, 2.0 - cfg.alpha)
        check, rows, slope, stderr = experiments.variance_slope(
            cfg.n_values, emp_vars, expected, band=tol.slope_band)
        report.checks.append(check)
        report.rows += [make_row(cfg.name, cfg.variant, cfg.alpha, 0, r["t"], r["stat"],
                                 r["empirical"], r["theory"], r["stderr"]) for r in rows]

    _print_checks(report.checks)
    _emit(report, cfg, out_dir, "clt_report")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def cmd_cov(cfg: ScenarioConfig, out_dir: str | None, threads: int) -> int:
    g, spec, an, rho_t, _ = _theory(cfg)
    if cfg.offsets is None or cfg.t is None:
        raise ConfigError("run.offsets", "cov requires run.offsets and run.t")
    if np.ptp(spec.mu) != 0.0:
        raise ConfigError("model.mu", "cross-time covariance requires uniform service rates")
    mu = float(spec.mu[0])
    lam_inf, _ = limits.averaged_rates(an.pi, spec)
    u = limits.u_constant(an.pi, spec.lam, an.deviation)
    tol = cfg.tolerances
    init = cfg.init_state_code()

    report = CltReport(
        scenario={"scenario_id": cfg.name, "model": cfg.variant, "alpha": cfg.alpha,
                  "N": cfg.n_values, "t": cfg.t, "offsets": cfg.offsets,
                  "seed": cfg.master_seed},
        metadata={"kind": "cov", "tolerances": vars(tol).copy()},
    )
    for n in cfg.n_values:
        sc = cfg.scaling(n)
        grid = [cfg.t + s for s in cfg.offsets]
        batch = run_batch(g, spec, sc, grid, cfg.replications, cfg.master_seed,
                          init_state=init, threads=threads)
        theory = limits.check_matrix(mu, u, lam_inf, cfg.alpha, cfg.t, cfg.offsets)
        checks, rows = experiments.covariance_check(
            batch, theory, n, sc.gamma, rho_t, mu, cfg.offsets,
            band=tol.cov_band, corr_band=tol.corr_band)
        report.checks += [CheckResult(f"N{n}_{c.name}", c.value, c.lo, c.hi) for c in checks]
        report.rows += [make_row(cfg.name, cfg.variant, cfg.alpha, n, r["t"], r["stat"],
                                 r["empirical"], r["theory"], r["stderr"]) for r in rows]

    _print_checks(report.checks)
    _emit(report, cfg, out_dir, "cov_report")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmisq",
        description="Markov-modulated infinite-server queues: analytics, simulation, verification.")
    parser.add_argument("--version", action="version", version="mmisq 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("analyze", "print/emit closed-form analytics (pure, no RNG)"),
        ("simulate", "run sample batches and emit counts as CSV"),
        ("moments", "exact finite-N moments with asymptotic comparison columns"),
        ("clt", "full CLT verification pipeline -> report CSV/JSON"),
        ("cov", "cross-time covariance verification -> report CSV/JSON"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override run.master_seed")
        p.add_argument("--threads", type=int, default=None, help="override run.threads")
        p.add_argument("--out", default=None, help="override output.dir")
        if name == "clt":
            p.add_argument("--negative-control", action="store_true",
                           help="also run the wrong-gamma normalization, expecting it to fail")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed", "must fit in an unsigned 64-bit integer")
            cfg.master_seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        out_dir = args.out if args.out is not None else cfg.out_dir
        threads = cfg.threads
        if args.command == "analyze":
            return cmd_analyze(cfg, out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, threads)
        if args.command == "moments":
            return cmd_moments(cfg, out_dir)
        if args.command == "clt":
            return cmd_clt(cfg, out_dir, threads, args.negative_control)
        if args.command == "cov":
            return cmd_cov(cfg, out_dir, threads)
        raise ConfigError("command", f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MmisqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
