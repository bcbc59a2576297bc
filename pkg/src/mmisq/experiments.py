"""Statistical verification harness.

Turns sample batches plus analytic predictions into pass/fail reports for
law-of-large-numbers, CLT, variance-scaling and covariance checks.  Every
verdict is a pure function of numbers stored in the report (an interval,
possibly inverted for negative controls), so re-running the verdict logic
on an emitted report reproduces it exactly.

Tolerance bands are engineering choices sized for desk-scale runs
(R <= 1e5, N <= 1e4); the limit theorems themselves come with no rate of
convergence.  All bands are parameters and are recorded in report metadata.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .errors import DegenerateVariance, InsufficientPoints, IoFailure, ScenarioMismatch
from .simulate import SampleBatch

#: Asymptotic one-sample Kolmogorov-Smirnov critical coefficient at the 1% level.
KS_COEFF_1PCT = 1.628


@dataclass(frozen=True)
class CheckResult:
    """One verdict: value against an interval, optionally inverted.

    ``passed`` is derived, never stored independently: a check passes when
    the value lies in [lo, hi], or outside it for inverted checks (negative
    controls).
    """

    name: str
    value: float
    lo: float
    hi: float
    invert: bool = False

    @property
    def passed(self) -> bool:
        inside = bool(self.lo <= self.value <= self.hi)
        return (not inside) if self.invert else inside

    def as_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "lo": float(self.lo),
                "hi": float(self.hi), "invert": bool(self.invert), "passed": self.passed}


@dataclass
class CltReport:
    """Scenario metadata, empirical-vs-theory rows, and derived verdicts."""

    scenario: dict
    rows: list[dict] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


CSV_COLUMNS = ["scenario_id", "model", "alpha", "N", "t", "stat", "empirical", "theory", "stderr"]


def make_row(scenario_id: str, model: str, alpha: float, n: int, t: float,
             stat: str, empirical: float, theory: float = math.nan,
             stderr: float = math.nan) -> dict:
    return {"scenario_id": scenario_id, "model": model, "alpha": alpha, "N": n,
            "t": t, "stat": stat, "empirical": empirical, "theory": theory,
            "stderr": stderr}


def _check_batch(batch: SampleBatch, r_min: int = 1) -> None:
    if batch.replications < r_min:
        raise ScenarioMismatch(f"need at least {r_min} replications, batch has {batch.replications}")


def lln_check(batch: SampleBatch, rho_fn, n_scale: int,
              rel_slack: float = 0.02) -> tuple[CheckResult, list[dict]]:
    """Fluid-limit check: mean/N within 3 standard errors plus a relative slack.

    Returns the worst excess over the grid (negative means pass) and one
    mean row per grid point.
    """
    _check_batch(batch)
    r = batch.replications
    means = batch.counts.mean(axis=0)
    sds = batch.counts.std(axis=0, ddof=1) if r > 1 else np.zeros_like(means, dtype=float)
    worst = -math.inf
    rows = []
    for i, t in enumerate(batch.grid):
        rho = rho_fn(float(t))
        dev = abs(means[i] / n_scale - rho)
        bound = 3.0 * sds[i] / (n_scale * math.sqrt(r)) + rel_slack * rho
        worst = max(worst, dev - bound)
        rows.append({"t": float(t), "stat": "mean_over_N",
                     "empirical": means[i] / n_scale, "theory": rho,
                     "stderr": sds[i] / (n_scale * math.sqrt(r))})
    return CheckResult(name="lln_max_excess", value=worst, lo=-math.inf, hi=0.0), rows


def normalized_samples(batch: SampleBatch, rho_theory: float, n_scale: int,
                       gamma: float, t_index: int = -1) -> NDArray[np.float64]:
    """Centered-and-normalized samples (count - N rho) / N^gamma at one grid time."""
    return (batch.counts[:, t_index] - n_scale * rho_theory) / float(n_scale) ** gamma


def clt_check(batch: SampleBatch, rho_theory: float, sigma2_theory: float,
              n_scale: int, gamma: float, t_index: int = -1,
              var_band: float = 0.15, ks_coeff: float = KS_COEFF_1PCT,
              ks_allowance: float = 1.0, name_prefix: str = "",
              invert_variance: bool = False) -> tuple[list[CheckResult], list[dict]]:
    """Gaussian-limit check at one grid time.

    Passes when (a) the empirical variance of the normalized samples is
    within ``var_band`` of the theoretical variance and (b) the KS distance
    to the fully specified Normal(0, sigma2) stays under
    ``ks_coeff / sqrt(R) * ks_allowance``.  With ``invert_variance`` the
    variance check becomes a negative control that must fail.
    """
    _check_batch(batch, r_min=1000)
    if sigma2_theory <= 0.0:
        raise DegenerateVariance("theoretical variance must be positive")
    r = batch.replications
    x = normalized_samples(batch, rho_theory, n_scale, gamma, t_index)
    var_ratio = float(x.var(ddof=1)) / sigma2_theory
    ks = float(stats.kstest(x, stats.norm(loc=0.0, scale=math.sqrt(sigma2_theory)).cdf).statistic)
    ks_bound = ks_coeff / math.sqrt(r) * ks_allowance
    t = float(batch.grid[t_index])
    checks = [
        CheckResult(name=name_prefix + "variance_ratio", value=var_ratio,
                    lo=1.0 - var_band, hi=1.0 + var_band, invert=invert_variance),
    ]
    rows = [
        {"t": t, "stat": name_prefix + "normalized_var",
         "empirical": var_ratio * sigma2_theory, "theory": sigma2_theory,
         "stderr": var_ratio * sigma2_theory * math.sqrt(2.0 / max(r - 1, 1))},
    ]
    if not invert_variance:
        checks.append(CheckResult(name=name_prefix + "ks_distance", value=ks,
                                  lo=0.0, hi=ks_bound))
        rows.append({"t": t, "stat": name_prefix + "ks_distance",
                     "empirical": ks, "theory": ks_bound, "stderr": math.nan})
    return checks, rows


def variance_slope(n_values, variances, expected: float,
                   band: float = 0.15) -> tuple[CheckResult, list[dict], float, float]:
    """Least-squares exponent of variance against N on log-log axes."""
    n_values = np.asarray(n_values, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if n_values.size < 4:
        raise InsufficientPoints(f"need >= 4 values of N for a slope fit, got {n_values.size}")
    x = np.log(n_values)
    y = np.log(variances)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - (y.mean() + slope * xc)
    dof = x.size - 2
    stderr = float(math.sqrt((resid @ resid) / dof / (xc @ xc))) if dof > 0 else math.nan
    check = CheckResult(name="variance_slope", value=slope,
                        lo=expected - band, hi=expected + band)
    rows = [{"t": math.nan, "stat": "variance_slope", "empirical": slope,
             "theory": expected, "stderr": stderr}]
    return check, rows, slope, stderr


def _cov_stderr(x: NDArray[np.float64], y: NDArray[np.float64]) -> float:
    r = x.shape[0]
    xc = x - x.mean()
    yc = y - y.mean()
    c = float(xc @ yc) / (r - 1)
    var_hat = float(((xc * yc - c) ** 2).mean()) / r
    return math.sqrt(max(var_hat, 0.0))


def covariance_check(batch: SampleBatch, theory_cov: NDArray[np.float64],
                     n_scale: int, gamma: float, rho_fn, mu: float, offsets,
                     band: float = 0.15, corr_band: float = 0.05
                     ) -> tuple[list[CheckResult], list[dict]]:
    """Cross-time covariance and lag-correlation check on shared paths.

    The batch must be observed at times t + s_1..s_K on the *same* paths.
    Covariance entries are compared within max(band * |entry|,
    band * max diagonal); stationary lag correlations against
    exp(-mu * lag) within ``corr_band``.
    """
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    if batch.grid.size != k:
        raise ScenarioMismatch(f"batch grid has {batch.grid.size} times, offsets have {k}")
    theory_cov = np.asarray(theory_cov, dtype=float)
    if theory_cov.shape != (k, k):
        raise ScenarioMismatch(f"theory covariance must be {k}x{k}, got {theory_cov.shape}")
    _check_batch(batch, r_min=2)

    norm = float(n_scale) ** gamma
    x = (batch.counts - np.asarray([n_scale * rho_fn(float(t)) for t in batch.grid])) / norm
    emp = np.cov(x, rowvar=False).reshape(k, k)
    tol_floor = band * float(np.abs(np.diag(theory_cov)).max())
    rows = []
    worst_cov = 0.0
    for a in range(k):
        for b in range(a, k):
            tol = max(band * abs(theory_cov[a, b]), tol_floor)
            worst_cov = max(worst_cov, abs(emp[a, b] - theory_cov[a, b]) / tol)
            rows.append({"t": float(batch.grid[b]), "stat": f"cov_{a}{b}",
                         "empirical": emp[a, b], "theory": theory_cov[a, b],
                         "stderr": _cov_stderr(x[:, a], x[:, b])})

    emp_corr = np.corrcoef(x, rowvar=False).reshape(k, k)
    worst_corr = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            lag = abs(offsets[b] - offsets[a])
            theo = math.exp(-mu * lag)
            worst_corr = max(worst_corr, abs(emp_corr[a, b] - theo))
            rows.append({"t": float(batch.grid[b]), "stat": f"corr_{a}{b}",
                         "empirical": emp_corr[a, b], "theory": theo,
                         "stderr": (1.0 - theo ** 2) / math.sqrt(batch.replications)})

    checks = [
        CheckResult(name="covariance_max_rel_dev", value=worst_cov, lo=0.0, hi=1.0),
        CheckResult(name="lag_correlation_max_dev", value=worst_corr, lo=0.0, hi=corr_band),
    ]
    return checks, rows


def emit_report(report: CltReport, out_dir, basename: str = "report") -> tuple[Path, Path]:
    """Write the report as CSV (rows) and JSON (verdicts); returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{basename}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in report.rows:
                writer.writerow({c: _fmt(row.get(c)) for c in CSV_COLUMNS})
        json_path = out / f"{basename}.json"
        payload = {
            "scenario": report.scenario,
            "metadata": report.metadata,
            "checks": [c.as_dict() for c in report.checks],
            "all_passed": report.all_passed,
        }
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out}: {exc}") from exc
    return csv_path, json_path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def read_report_csv(path) -> list[dict]:
    """Parse an emitted CSV back into typed rows (exact float round-trip)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = []
            for raw in reader:
                rows.append({
                    "scenario_id": raw["scenario_id"],
                    "model": raw["model"],
                    "alpha": float(raw["alpha"]),
                    "N": int(raw["N"]),
                    "t": float(raw["t"]),
                    "stat": raw["stat"],
                    "empirical": float(raw["empirical"]),
                    "theory": float(raw["theory"]),
                    "stderr": float(raw["stderr"]),
                })
            return rows
    except OSError as exc:
        raise IoFailure(f"cannot read report from {path}: {exc}") from exc


def recompute_verdicts(json_path) -> bool:
    """Re-derive every verdict from the stored numbers of an emitted report."""
    try:
        with open(json_path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read report from {json_path}: {exc}") from exc
    ok = True
    for c in payload["checks"]:
        rederived = CheckResult(name=c["name"], value=c["value"], lo=c["lo"],
                                hi=c["hi"], invert=c["invert"]).passed
        if rederived != c["passed"]:
            raise ScenarioMismatch(f"stored verdict for {c['name']} does not match its numbers")
        ok = ok and rederived
    if ok != payload["all_passed"]:
        raise ScenarioMismatch("stored all_passed does not match stored checks")
    return ok
