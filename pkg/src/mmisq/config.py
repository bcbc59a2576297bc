"""Scenario configuration: a single YAML file per experiment.

The surface format (documented in the README) is a nested key/value
structure with lists; :func:`load_config` validates it field by field and
:func:`write_effective` emits an "effective config" that reproduces the
identical run byte-for-byte when fed back in.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, IoFailure, MmisqError
from .markov import Generator, validate_generator
from .model import ModelSpec, Scaling, Variant


@dataclass
class Tolerances:
    variance_band: float = 0.15
    ks_allowance: float = 1.0
    slope_band: float = 0.15
    corr_band: float = 0.05
    cov_band: float = 0.15
    lln_rel: float = 0.02


@dataclass
class ScenarioConfig:
    name: str
    q_rows: list[list[float]]
    lam: list[float]
    mu: list[float]
    variant: str                      # "I" | "II"
    alpha: float
    n_values: list[int]
    grid: list[float]
    replications: int
    master_seed: int
    init_state: str | int = "stationary"
    offsets: list[float] | None = None
    t: float | None = None
    threads: int = 1
    out_dir: str | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    # -- derived objects ---------------------------------------------------
    def generator(self) -> Generator:
        try:
            return validate_generator(self.q_rows)
        except (MmisqError, ValueError) as exc:
            raise ConfigError("chain.q", str(exc)) from exc

    def model_spec(self) -> ModelSpec:
        try:
            return ModelSpec(lam=np.asarray(self.lam, dtype=float),
                             mu=np.asarray(self.mu, dtype=float),
                             variant=Variant(self.variant))
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from exc

    def scaling(self, n: int) -> Scaling:
        return Scaling(n_scale=n, alpha=self.alpha)

    def init_state_code(self) -> int | None:
        return None if self.init_state == "stationary" else int(self.init_state)


def _need(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return section[key]


def _as_floats(value, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "must be a nonempty list of numbers")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not numeric: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file; raises ConfigError with the field name."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<file>", "top level must be a mapping")

    chain = _need(raw, "chain", "")
    model = _need(raw, "model", "")
    scaling = _need(raw, "scaling", "")
    run = _need(raw, "run", "")
    output = raw.get("output", {}) or {}
    tol_raw = raw.get("tolerances", {}) or {}

    q_rows = _need(chain, "q", "chain")
    if not isinstance(q_rows, list) or not all(isinstance(r, list) for r in q_rows):
        raise ConfigError("chain.q", "must be a list of rows")

    lam = _as_floats(_need(model, "lambda", "model"), "model.lambda")
    mu = _as_floats(_need(model, "mu", "model"), "model.mu")
    variant = str(_need(model, "variant", "model")).strip().upper()
    if variant not in ("I", "II"):
        raise ConfigError("model.variant", f"must be 'I' or 'II', got {variant!r}")
    d = len(q_rows)
    if len(lam) != d or len(mu) != d:
        raise ConfigError("model", f"lambda/mu must have length {d} to match chain.q")

    alpha = float(_need(scaling, "alpha", "scaling"))
    if not alpha > 0.0:
        raise ConfigError("scaling.alpha", f"must be positive, got {alpha}")
    n_raw = _need(scaling, "n", "scaling")
    n_values = [int(n) for n in (n_raw if isinstance(n_raw, list) else [n_raw])]
    if not n_values or any(n < 1 for n in n_values):
        raise ConfigError("scaling.n", f"every N must be >= 1, got {n_values}")

    grid = _as_floats(_need(run, "grid", "run"), "run.grid")
    if any(t < 0 for t in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("run.grid", "times must be nonnegative and sorted")
    offsets = run.get("offsets")
    if offsets is not None:
        offsets = _as_floats(offsets, "run.offsets")
        if offsets[0] != 0.0 or any(b < a for a, b in zip(offsets, offsets[1:])):
            raise ConfigError("run.offsets", "must start at 0 and be nondecreasing")
    t_base = run.get("t")
    if t_base is not None:
        t_base = float(t_base)
        if t_base < 0:
            raise ConfigError("run.t", "must be nonnegative")

    replications = int(run.get("replications", 1000))
    if replications < 1:
        raise ConfigError("run.replications", "must be >= 1")
    master_seed = int(run.get("master_seed", 0))
    if not 0 <= master_seed < 2 ** 64:
        raise ConfigError("run.master_seed", "must fit in an unsigned 64-bit integer")
    init_state = run.get("init_state", "stationary")
    if init_state != "stationary":
        try:
            init_state = int(init_state)
        except (TypeError, ValueError) as exc:
            raise ConfigError("run.init_state", "must be 'stationary' or a state index") from exc
        if not 0 <= init_state < d:
            raise ConfigError("run.init_state", f"state index out of range for d={d}")
    threads = int(run.get("threads", 1))
    if threads < 1:
        raise ConfigError("run.threads", "must be >= 1")

    tol = Tolerances()
    for key, val in tol_raw.items():
        if not hasattr(tol, key):
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        setattr(tol, key, float(val))

    cfg = ScenarioConfig(
        name=str(raw.get("name", Path(path).stem)),
        q_rows=[[float(v) for v in r] for r in q_rows],
        lam=lam, mu=mu, variant=variant, alpha=alpha, n_values=n_values,
        grid=grid, offsets=offsets, t=t_base, replications=replications,
        master_seed=master_seed, init_state=init_state, threads=threads,
        out_dir=output.get("dir"), tolerances=tol,
    )
    cfg.generator()
    cfg.model_spec()
    return cfg


def effective_dict(cfg: ScenarioConfig) -> dict:
    """The full scenario as a plain mapping in the input file's schema."""
    out = {
        "name": cfg.name,
        "chain": {"q": cfg.q_rows},
        "model": {"lambda": cfg.lam, "mu": cfg.mu, "variant": cfg.variant},
        "scaling": {"alpha": cfg.alpha, "n": cfg.n_values},
        "run": {
            "grid": cfg.grid,
            "replications": cfg.replications,
            "master_seed": cfg.master_seed,
            "init_state": cfg.init_state,
            "threads": cfg.threads,
        },
        "tolerances": asdict(cfg.tolerances),
    }
    if cfg.offsets is not None:
        out["run"]["offsets"] = cfg.offsets
    if cfg.t is not None:
        out["run"]["t"] = cfg.t
    if cfg.out_dir is not None:
        out["output"] = {"dir": cfg.out_dir}
    return out


def write_effective(cfg: ScenarioConfig, path) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(effective_dict(cfg), fh, sort_keys=False)
    except OSError as exc:
        raise IoFailure(f"cannot write effective config to {path}: {exc}") from exc
