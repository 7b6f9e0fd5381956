"""Noise-replication harness comparing estimators on a common panel.

Each replication perturbs the value matrix (quantities stay fixed), re-runs
the requested estimators and records their index vectors and model-based
standard errors.  Replication r draws from its own child of the root seed
sequence, so results are bit-identical for any execution order or worker
count.  Nonpositive perturbed values are redrawn; persistent failure to
stay positive aborts the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dummy import fit_dummy_index
from .errors import EstimationError, RedrawExhausted, ValidationError
from .estimator import estimate_deflators, index_variance
from .panel import Panel

SCHEMES = ("additive_on_base", "random_walk")
ESTIMATORS = ("mpl", "tpd", "tpd_weighted")
MAX_REDRAWS = 100


@dataclass(frozen=True)
class SimulationConfig:
    """What to perturb, how often, and which estimators to run.

    noise draws are normal with mean noise_mean and a standard deviation
    drawn once per replication from Uniform(0, noise_sd_max).  k scales the
    reported bands.
    """

    scheme: str = "additive_on_base"
    replications: int = 1000
    noise_mean: float = 0.0
    noise_sd_max: float = 0.0
    seed: int = 0
    k: float = 3.0
    estimators: tuple[str, ...] = ("mpl", "tpd")
    variance_method: str = "full_partition"
    dof_rule: str = "paper"
    dump_draws: bool = False

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.noise_sd_max < 0:
            raise ValidationError("noise_sd_max must be >= 0")
        if not self.estimators:
            raise ValidationError("at least one estimator is required")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValidationError(f"unknown estimator {name!r}")
        if self.k <= 0:
            raise ValidationError("k must be positive")


@dataclass(frozen=True)
class EstimatorSummary:
    """Replication averages and bands for one estimator."""

    name: str
    mean_index: np.ndarray
    emp_sd: np.ndarray
    mean_se: np.ndarray
    lo_emp: np.ndarray
    hi_emp: np.ndarray
    lo_model: np.ndarray
    hi_model: np.ndarray
    failures: int
    failed_replications: tuple[int, ...]
    draws: np.ndarray | None = None


@dataclass(frozen=True)
class SimulationReport:
    units: tuple[str, ...]
    config: SimulationConfig
    summaries: dict = field(default_factory=dict)


def _draw_positive(rng, base: np.ndarray, mean: float, sd: float) -> np.ndarray:
    """base + normal noise, redrawing nonpositive entries up to MAX_REDRAWS."""
    out = base + rng.normal(mean, sd, size=base.shape)
    for _ in range(MAX_REDRAWS):
        bad = out <= 0
        if not bad.any():
            return out
        out[bad] = base[bad] + rng.normal(mean, sd, size=int(bad.sum()))
    raise RedrawExhausted(
        f"noise kept values nonpositive after {MAX_REDRAWS} redraws; "
        "reduce noise_mean/noise_sd_max"
    )


def _perturb_values(panel: Panel, config: SimulationConfig, rng) -> np.ndarray:
    """One replication's value matrix; quantities and presence are untouched."""
    sd = rng.uniform(0.0, config.noise_sd_max)
    values = panel.values.copy()
    base = panel.base_unit
    if config.scheme == "additive_on_base":
        for t in range(panel.n_units):
            if t == base:
                continue
            mask = panel.present[:, t]
            if mask.any():
                values[mask, t] = _draw_positive(
                    rng, panel.values[mask, t], config.noise_mean, sd
                )
    else:  # random_walk
        if base != 0:
            raise ValidationError("random_walk scheme requires the base unit first")
        # walk state: last simulated (or original, if never present) value per item
        state = values[:, 0].copy()
        never = ~panel.present[:, 0]
        state[never] = 0.0
        for t in range(1, panel.n_units):
            mask = panel.present[:, t]
            if not mask.any():
                continue
            start = state[mask]
            # an item absent so far starts its walk from its own current value
            fresh = start <= 0
            start = np.where(fresh, panel.values[mask, t], start)
            values[mask, t] = _draw_positive(rng, start, config.noise_mean, sd)
            state[mask] = values[mask, t]
    return values


def _run_mpl(panel: Panel, config: SimulationConfig):
    est = estimate_deflators(panel, variance_method=config.variance_method,
                             dof_rule=config.dof_rule)
    se = np.sqrt(index_variance(est))
    return est.indexes, se


def _run_tpd(panel: Panel, config: SimulationConfig, weighted: bool):
    fit = fit_dummy_index(panel, weighted=weighted)
    return fit.indexes, fit.index_se


_ESTIMATOR_FUNCS = {
    "mpl": _run_mpl,
    "tpd": lambda panel, config: _run_tpd(panel, config, False),
    "tpd_weighted": lambda panel, config: _run_tpd(panel, config, True),
}


def simulate(panel: Panel, config: SimulationConfig) -> SimulationReport:
    """Run the replication study; failed replications are excluded and counted."""
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    t = panel.n_units
    draws = {name: [] for name in config.estimators}
    ses = {name: [] for name in config.estimators}
    failed = {name: [] for name in config.estimators}

    for r in range(config.replications):
        rng = np.random.default_rng(children[r])
        values = _perturb_values(panel, config, rng)
        sim_panel = Panel(panel.items, panel.units, values, panel.quantities,
                          panel.present, base_unit=panel.base_unit,
                          mode=panel.mode)
        for name in config.estimators:
            try:
                index, se = _ESTIMATOR_FUNCS[name](sim_panel, config)
            except EstimationError:
                failed[name].append(r)
                continue
            draws[name].append(index)
            ses[name].append(se)

    summaries = {}
    for name in config.estimators:
        if not draws[name]:
            raise EstimationError(f"estimator {name!r} failed in every replication")
        arr = np.vstack(draws[name])
        se_arr = np.vstack(ses[name])
        mean_index = arr.mean(axis=0)
        emp_sd = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(t)
        mean_se = se_arr.mean(axis=0)
        summaries[name] = EstimatorSummary(
            name=name,
            mean_index=mean_index,
            emp_sd=emp_sd,
            mean_se=mean_se,
            lo_emp=mean_index - config.k * emp_sd,
            hi_emp=mean_index + config.k * emp_sd,
            lo_model=mean_index - config.k * mean_se,
            hi_model=mean_index + config.k * mean_se,
            failures=len(failed[name]),
            failed_replications=tuple(failed[name]),
            draws=arr if config.dump_draws else None,
        )
    return SimulationReport(units=panel.units, config=config, summaries=summaries)
