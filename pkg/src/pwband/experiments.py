"""Seeded, reproducible simulation experiments and their CSV outputs.

Four experiments mirror the evaluation protocol of the band construction:

* ``run_norm_bound_experiment``   noise-free comparison of the three norm
  bounds across sample sizes (box-plot summaries of bound minus true norm),
* ``run_voting_band_experiment``  distribution of aggregated confidence bands
  over voting randomizations on one fixed dataset,
* ``run_diameter_table``          average/median/std of per-query interval
  diameters for the standard and voting constructions,
* ``run_coverage_audit``          empirical simultaneous coverage with a
  binomial confidence interval,

plus ``run_band`` turning a single dataset into a band CSV.  Every random
quantity derives from (master seed, labels), so outputs are byte-identical
across reruns; trials are independent and aggregated in trial order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bands import BandConfig, IntervalEstimate, band_over_grid, interval_at
from .concentration import TailBudget
from .ellipsoids import (
    Ellipsoid,
    ellipsoid_to_json,
    known_noise_ball_provider,
    noise_free_provider,
)
from .kernels import Interpolant, KernelConfig, SampleSet, rkhs_norm_sq
from .norm_bounds import (
    DensityModel,
    NormBound,
    bernstein_bound_noise_free,
    bernstein_bound_noisy,
    hoeffding_bound,
    max_empirical_variance,
    max_norm_estimate,
    randomized_hoeffding_bound,
    select_bound_method,
)
from .seeding import stream, stream_seed
from .simulate import (
    Dataset,
    LaplaceDensity,
    TruthSpec,
    dataset_to_json,
    density_ratio_bound,
    random_bandlimited_function,
    sample_centered_exponential_noise,
    sample_laplace_inputs,
)
from .voting import (
    IntervalCollection,
    UnionOfIntervals,
    majority,
    random_ordering,
    randomized_threshold_full,
    randomized_threshold_half,
)

EXPERIMENTS = ("norm-bounds", "voting-bands", "diameter-table", "coverage", "band")

SCHEME_STANDARD = "ST"
SCHEME_ORDERING = "RO"
SCHEME_THRESHOLD_HALF = "RT_HALF"
SCHEME_THRESHOLD_FULL = "RT_FULL"
SCHEME_MAJORITY = "MAJ"


@dataclass
class ExperimentConfig:
    """Flat configuration shared by all experiments (JSON-serializable)."""

    experiment: str = "norm-bounds"
    trials: int = 100
    n: int = 300
    n0: int = 17
    agents: int = 51
    alpha: float = 0.025
    beta: float = 0.025
    band_limit: float = 20.0
    input_loc: float = 0.0
    input_scale: float = 0.5
    noise_scale: float = 0.3
    domain: tuple[float, float] = (-1.0, 1.0)
    master_seed: int = 20250809
    grid_points: int = 201
    grid_range: tuple[float, float] | None = None
    knot_count: int = 20
    sample_sizes: tuple[int, ...] = (50, 500)
    size_pairs: tuple[tuple[int, int], ...] = ((100, 20), (250, 50), (500, 100))
    randomizations: int = 100
    audit_mode: str = "band"
    tau_mode: str = "bound"
    coverage_slack: float = 0.03
    quantile_draws: int = 1_000_000
    plot: bool = False

    @property
    def gamma(self) -> float:
        """Per-set confidence risk: voting aggregates sets of level 1 - gamma."""
        return self.alpha + self.beta

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not (0 < self.alpha < 1 and 0 <= self.beta < 1):
            raise ValueError("alpha must be in (0,1) and beta in [0,1)")
        if self.gamma >= 1:
            raise ValueError("alpha + beta must stay below 1")
        if self.noise_scale > 0 and self.beta == 0:
            raise ValueError("beta = 0 requires noise-free data")
        if self.n0 > self.n:
            raise ValueError("n0 cannot exceed n")
        for n, n0 in self.size_pairs:
            if n0 > n:
                raise ValueError(f"size pair ({n}, {n0}) has n0 > n")
        if self.trials < 1 or self.agents < 1 or self.grid_points < 2:
            raise ValueError("trials, agents and grid_points must be positive")
        a, b = self.domain
        if not a < b:
            raise ValueError("domain must satisfy a < b")

    def kernel(self) -> KernelConfig:
        return KernelConfig(self.band_limit, 1)

    def input_density(self) -> LaplaceDensity:
        return LaplaceDensity(self.input_loc, self.input_scale)

    def grid(self) -> np.ndarray:
        lo, hi = self.grid_range if self.grid_range is not None else self.domain
        return np.linspace(lo, hi, self.grid_points)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, default=list)


PRESETS: dict[str, dict] = {
    "norm-bounds": dict(
        alpha=0.1, beta=0.0, band_limit=100.0, input_scale=1.0, noise_scale=0.0,
        domain=(0.0, 1.0), trials=100, sample_sizes=(50, 500),
    ),
    "voting-bands": dict(
        alpha=0.025, beta=0.025, band_limit=20.0, input_scale=0.5, noise_scale=0.3,
        domain=(-1.0, 1.0), n=300, n0=17, agents=51, randomizations=100,
        grid_points=201,
    ),
    "diameter-table": dict(
        alpha=0.025, beta=0.025, band_limit=30.0, input_scale=0.5, noise_scale=0.3,
        domain=(-1.0, 1.0), agents=101, trials=100,
        size_pairs=((100, 20), (250, 50), (500, 100)),
    ),
    "coverage": dict(
        alpha=0.05, beta=0.05, band_limit=20.0, input_scale=0.5, noise_scale=0.3,
        domain=(-1.0, 1.0), n=50, n0=17, trials=500, grid_points=101,
        audit_mode="band", coverage_slack=0.03,
    ),
    "band": dict(
        alpha=0.025, beta=0.025, band_limit=20.0, input_scale=0.5, noise_scale=0.3,
        domain=(-1.0, 1.0), n=300, n0=17, grid_points=201,
    ),
}

_TUPLE_FIELDS = {
    "domain": (tuple, float),
    "grid_range": (tuple, float),
    "sample_sizes": (tuple, int),
}


def make_config(experiment: str, overrides: dict | None = None) -> ExperimentConfig:
    """Preset config for an experiment, optionally updated from a dict."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    values = dict(PRESETS.get(experiment, {}))
    values["experiment"] = experiment
    overrides = dict(overrides or {})
    gamma = overrides.pop("gamma", None)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, val in overrides.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = val
    for key, (outer, inner) in _TUPLE_FIELDS.items():
        if values.get(key) is not None:
            values[key] = outer(inner(v) for v in values[key])
    if values.get("size_pairs") is not None:
        values["size_pairs"] = tuple(
            (int(n), int(n0)) for n, n0 in values["size_pairs"]
        )
    cfg = ExperimentConfig(**values)
    if gamma is not None and abs(gamma - cfg.gamma) > 1e-12:
        raise ValueError(
            f"config gamma {gamma} must equal alpha + beta = {cfg.gamma}"
        )
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# shared pipeline pieces


@lru_cache(maxsize=None)
def _noise_radius(
    noise_scale: float, n0: int, beta: float, draws: int, seed: int
) -> float:
    """Monte Carlo (1 - beta)-quantile of the noise vector's Euclidean norm.

    Uses the "higher" quantile for a conservative radius; cached per
    configuration so the expensive draw happens once.
    """
    if noise_scale == 0.0:
        return 0.0
    if beta <= 0.0:
        return math.inf
    rng = np.random.default_rng(seed)
    norms = np.empty(draws)
    done = 0
    chunk = max(1, min(draws, 20_000_000 // max(n0, 1)))
    while done < draws:
        m = min(chunk, draws - done)
        eps = rng.exponential(noise_scale, (m, n0)) - noise_scale
        norms[done : done + m] = np.linalg.norm(eps, axis=1)
        done += m
    return float(np.quantile(norms, 1.0 - beta, method="higher"))


def noise_radius_quantile(cfg: ExperimentConfig):
    """Quantile function handed to the known-noise ball provider."""
    seed = stream_seed(cfg.master_seed, "noise-radius")

    def quantile(beta: float, n0: int) -> float:
        return _noise_radius(cfg.noise_scale, n0, beta, cfg.quantile_draws, seed)

    return quantile


def _uniform_open(rng: np.random.Generator) -> float:
    """Uniform draw guaranteed inside the open interval (0, 1)."""
    while True:
        u = float(rng.random())
        if 0.0 < u < 1.0:
            return u


def _make_truth(cfg: ExperimentConfig, *labels) -> Interpolant:
    spec = TruthSpec(
        knot_count=cfg.knot_count,
        domain=cfg.domain,
        kernel=cfg.kernel(),
        seed=stream_seed(cfg.master_seed, "truth", *labels),
    )
    return random_bandlimited_function(spec)


def _make_dataset(cfg: ExperimentConfig, n: int, *labels) -> Dataset:
    truth = _make_truth(cfg, *labels)
    x = sample_laplace_inputs(
        n, cfg.input_loc, cfg.input_scale, stream(cfg.master_seed, "inputs", *labels)
    )
    noise = sample_centered_exponential_noise(
        n, cfg.noise_scale, stream(cfg.master_seed, "noise", *labels)
    )
    y = np.asarray(truth(x)) + noise
    return Dataset(
        truth=truth,
        inputs=x,
        outputs=y,
        noise_scale=cfg.noise_scale,
        input_density=cfg.input_density(),
        seed_info=f"master={cfg.master_seed} labels={labels}",
    )


def _density_model(truth: Interpolant, density: LaplaceDensity) -> DensityModel:
    return DensityModel(pdf=density.pdf, ratio_bound=density_ratio_bound(truth, density))


def _agent_ellipsoid_and_bound(
    cfg: ExperimentConfig,
    sub: SampleSet,
    dens: DensityModel,
    quantile,
    *labels,
) -> tuple[Ellipsoid, NormBound]:
    """Output ellipsoid plus norm bound for one subsample (one voting agent)."""
    if cfg.noise_scale == 0.0:
        e = noise_free_provider(sub.outputs)
    else:
        e = known_noise_ball_provider(sub, cfg.beta, quantile)
    budget = TailBudget(cfg.alpha, len(sub))
    method = select_bound_method(budget, dens)
    if method == "bernstein":
        if cfg.noise_scale == 0.0:
            bound = bernstein_bound_noise_free(sub, dens, budget, beta=cfg.beta)
        else:
            v_star, _ = max_empirical_variance(
                dens, sub, e, rng=stream(cfg.master_seed, "varmax", *labels)
            )
            base = max_norm_estimate(sub, dens, e)
            bound = bernstein_bound_noisy(base, v_star, dens, budget, beta=cfg.beta)
    else:
        base = max_norm_estimate(sub, dens, e)
        u = _uniform_open(stream(cfg.master_seed, "bound-u", *labels))
        bound = randomized_hoeffding_bound(base, dens, budget, u, beta=cfg.beta)
    return e, bound


def _band_config(cfg: ExperimentConfig, n0: int, method: str) -> BandConfig:
    return BandConfig(
        alpha=cfg.alpha, beta=cfg.beta, n0=n0, kernel=cfg.kernel(), bound_method=method
    )


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _segments_text(union: UnionOfIntervals) -> str:
    return ";".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in union.segments)


def _write_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json())


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# experiment 1: norm bounds (noise-free)


def _box_summary(values: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    lo_limit, hi_limit = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_limit) & (values <= hi_limit)]
    return {
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
    }


def run_norm_bound_experiment(
    cfg: ExperimentConfig, out_dir: Path | None = None
) -> dict:
    """Noise-free bound comparison; emits per-trial rows and box summaries."""
    cfg.validate()
    if cfg.noise_scale != 0.0:
        raise ValueError("norm-bounds experiment runs in the noise-free regime")
    density = cfg.input_density()
    rows: list[tuple] = []
    summaries: list[tuple] = []
    result: dict = {"by_n": {}}
    for n in cfg.sample_sizes:
        excesses = {"hoeffding": [], "randomized_hoeffding": [], "bernstein_noisefree": []}
        for trial in range(cfg.trials):
            ds = _make_dataset(cfg, n, n, trial)
            dens = _density_model(ds.truth, density)
            sample = SampleSet(ds.inputs, ds.outputs)
            e = noise_free_provider(sample.outputs)
            budget = TailBudget(cfg.alpha, n)
            base = max_norm_estimate(sample, dens, e)
            u = _uniform_open(stream(cfg.master_seed, "bound-u", n, trial))
            bounds = [
                hoeffding_bound(base, dens, budget),
                randomized_hoeffding_bound(base, dens, budget, u),
                bernstein_bound_noise_free(sample, dens, budget),
            ]
            true_norm = rkhs_norm_sq(ds.truth)
            for b in bounds:
                excess = b.value - true_norm
                excesses[b.method].append(excess)
                rows.append(
                    (n, trial, b.method, b.value, b.base_estimate, b.alpha, b.beta,
                     b.u_draw, true_norm, excess)
                )
        per_method = {}
        for method, vals in excesses.items():
            vals = np.asarray(vals)
            summary = _box_summary(vals)
            summary["validity"] = float(np.mean(vals >= 0))
            per_method[method] = {"excesses": vals, **summary}
            summaries.append(
                (n, method, summary["median"], summary["q1"], summary["q3"],
                 summary["whisker_lo"], summary["whisker_hi"], summary["validity"])
            )
        result["by_n"][n] = per_method
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_config(cfg, out_dir)
        _write_csv(
            out_dir / "norm_bounds.csv",
            ["n", "trial", "method", "value", "base_estimate", "alpha", "beta",
             "u_draw", "true_norm_sq", "excess"],
            rows,
        )
        _write_csv(
            out_dir / "norm_bounds_summary.csv",
            ["n", "method", "median", "q1", "q3", "whisker_lo", "whisker_hi",
             "validity"],
            summaries,
        )
        if cfg.plot:
            _plot_norm_bounds(result, out_dir / "norm_bounds.svg")
    return result


# ---------------------------------------------------------------------------
# experiment 2: voting bands on one fixed dataset


def _agent_bands(
    cfg: ExperimentConfig, ds: Dataset, grid: np.ndarray
) -> tuple[list[list[IntervalEstimate]], list[np.ndarray]]:
    """Per-agent grid bands from independent random subsamples."""
    dens = _density_model(ds.truth, ds.input_density)
    quantile = noise_radius_quantile(cfg)
    sample = SampleSet(ds.inputs, ds.outputs)
    bands = []
    perms = []
    for k in range(cfg.agents):
        perm = stream(cfg.master_seed, "subsample", k).permutation(cfg.n)[: cfg.n0]
        perms.append(perm)
        sub = sample.take(perm)
        e, bound = _agent_ellipsoid_and_bound(cfg, sub, dens, quantile, k)
        band = band_over_grid(grid, sub, e, bound, _band_config(cfg, cfg.n0, bound.method))
        bands.append(band)
    return bands, perms


def run_voting_band_experiment(
    cfg: ExperimentConfig, out_dir: Path | None = None
) -> dict:
    """Voting aggregation of K subsample bands over many randomizations."""
    cfg.validate()
    ds = _make_dataset(cfg, cfg.n)
    grid = cfg.grid()
    bands, perms = _agent_bands(cfg, ds, grid)

    collections = [
        IntervalCollection([band[j] for band in bands]) for j in range(len(grid))
    ]
    majorities = [majority(c) for c in collections]

    draw_perms = [
        stream(cfg.master_seed, "vote-perm", r).permutation(cfg.agents)
        for r in range(cfg.randomizations)
    ]
    draw_us = [
        float(stream(cfg.master_seed, "vote-u", r).random())
        for r in range(cfg.randomizations)
    ]

    rows: list[tuple] = []
    aggregates: dict[str, list[list[UnionOfIntervals]]] = {
        SCHEME_ORDERING: [],
        SCHEME_THRESHOLD_HALF: [],
        SCHEME_THRESHOLD_FULL: [],
    }
    for j, x in enumerate(grid):
        rows.append(
            (x, SCHEME_MAJORITY, -1, _segments_text(majorities[j]),
             majorities[j].total_length())
        )
    for r in range(cfg.randomizations):
        for scheme, build in (
            (SCHEME_ORDERING, lambda c: random_ordering(c, draw_perms[r])),
            (SCHEME_THRESHOLD_HALF, lambda c: randomized_threshold_half(c, draw_us[r])),
            (SCHEME_THRESHOLD_FULL, lambda c: randomized_threshold_full(c, draw_us[r])),
        ):
            per_point = [build(c) for c in collections]
            aggregates[scheme].append(per_point)
            for j, x in enumerate(grid):
                u = per_point[j]
                rows.append((x, scheme, r, _segments_text(u), u.total_length()))

    summary_rows: list[tuple] = []
    summaries: dict[str, dict] = {}
    for scheme, draws in aggregates.items():
        los = np.full((cfg.randomizations, len(grid)), np.nan)
        his = np.full_like(los, np.nan)
        widths = np.zeros_like(los)
        for r, per_point in enumerate(draws):
            for j, u in enumerate(per_point):
                b = u.bounds()
                if b is not None:
                    los[r, j], his[r, j] = b
                widths[r, j] = u.total_length()
        summaries[scheme] = {"lo": los, "hi": his, "width": widths}
        with np.errstate(all="ignore"):
            for j, x in enumerate(grid):
                summary_rows.append(
                    (x, scheme,
                     float(np.nanmean(los[:, j])), float(np.nanmean(his[:, j])),
                     float(np.mean(widths[:, j])), float(np.std(widths[:, j])))
                )

    result = {
        "grid": grid,
        "bands": bands,
        "majorities": majorities,
        "aggregates": aggregates,
        "summaries": summaries,
        "perms": draw_perms,
        "us": draw_us,
        "dataset": ds,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_config(cfg, out_dir)
        agent_rows = [
            (x, k, band[j].lo, band[j].hi, band[j].is_empty)
            for k, band in enumerate(bands)
            for j, x in enumerate(grid)
        ]
        _write_csv(out_dir / "agent_bands.csv", ["x", "agent", "lo", "hi", "empty_flag"], agent_rows)
        _write_csv(
            out_dir / "voting_bands.csv",
            ["x", "scheme", "draw", "segments", "total_length"],
            rows,
        )
        _write_csv(
            out_dir / "voting_bands_summary.csv",
            ["x", "scheme", "lo_mean", "hi_mean", "width_mean", "width_std"],
            summary_rows,
        )
        (out_dir / "dataset.json").write_text(dataset_to_json(ds))
        if cfg.plot:
            _plot_voting_bands(result, out_dir / "voting_bands.svg")
    return result


# ---------------------------------------------------------------------------
# experiment 3: diameter table


def run_diameter_table(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    """Diameters of per-query intervals under the four constructions."""
    cfg.validate()
    density = cfg.input_density()
    quantile = noise_radius_quantile(cfg)
    schemes = (SCHEME_STANDARD, SCHEME_ORDERING, SCHEME_THRESHOLD_HALF, SCHEME_THRESHOLD_FULL)
    detail_rows: list[tuple] = []
    table_rows: list[tuple] = []
    result: dict = {"by_size": {}}
    for n, n0 in cfg.size_pairs:
        diameters = {scheme: [] for scheme in schemes}
        for trial in range(cfg.trials):
            ds = _make_dataset(cfg, n, n, n0, trial)
            dens = _density_model(ds.truth, density)
            sample = SampleSet(ds.inputs, ds.outputs)
            x0 = float(
                sample_laplace_inputs(
                    1, cfg.input_loc, cfg.input_scale,
                    stream(cfg.master_seed, "query", n, n0, trial),
                )[0]
            )
            intervals = []
            for k in range(cfg.agents):
                perm = stream(cfg.master_seed, "subsample", n, n0, trial, k).permutation(n)[:n0]
                sub = sample.take(perm)
                e, bound = _agent_ellipsoid_and_bound(
                    cfg, sub, dens, quantile, n, n0, trial, k
                )
                intervals.append(
                    interval_at(x0, sub, e, bound, _band_config(cfg, n0, bound.method))
                )
            collection = IntervalCollection(intervals)
            first = intervals[0]
            perm_r = stream(cfg.master_seed, "vote-perm", n, n0, trial).permutation(cfg.agents)
            u_r = float(stream(cfg.master_seed, "vote-u", n, n0, trial).random())
            outcome = {
                SCHEME_STANDARD: first.width,
                SCHEME_ORDERING: random_ordering(collection, perm_r).total_length(),
                SCHEME_THRESHOLD_HALF: randomized_threshold_half(collection, u_r).total_length(),
                SCHEME_THRESHOLD_FULL: randomized_threshold_full(collection, u_r).total_length(),
            }
            for scheme in schemes:
                diameters[scheme].append(outcome[scheme])
                detail_rows.append((n, n0, trial, scheme, outcome[scheme]))
        stats = {}
        for scheme in schemes:
            vals = np.asarray(diameters[scheme])
            stats[scheme] = {
                "avg": float(vals.mean()),
                "med": float(np.median(vals)),
                "std": float(vals.std(ddof=1)),
                "values": vals,
            }
            table_rows.append(
                (n, n0, scheme, stats[scheme]["avg"], stats[scheme]["med"], stats[scheme]["std"])
            )
        result["by_size"][(n, n0)] = stats
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_config(cfg, out_dir)
        _write_csv(
            out_dir / "diameters.csv", ["n", "n0", "trial", "scheme", "diameter"], detail_rows
        )
        _write_csv(
            out_dir / "diameter_table.csv", ["n", "n0", "scheme", "avg", "med", "std"], table_rows
        )
        if cfg.plot:
            _plot_diameter_table(result, out_dir / "diameter_table.svg")
    return result


# ---------------------------------------------------------------------------
# experiment 4: coverage audit


def _truth_on_grid(truth: Interpolant, grid: np.ndarray) -> np.ndarray:
    return np.asarray(truth(grid))


def _band_covers(band: list[IntervalEstimate], truth_vals: np.ndarray) -> bool:
    for est, fx in zip(band, truth_vals):
        if est.is_empty or not est.lo - 1e-12 <= fx <= est.hi + 1e-12:
            return False
    return True


def run_coverage_audit(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    """Empirical simultaneous coverage of single or voted bands."""
    cfg.validate()
    if cfg.audit_mode not in ("band", "voting"):
        raise ValueError(f"unknown audit_mode {cfg.audit_mode!r}")
    density = cfg.input_density()
    quantile = noise_radius_quantile(cfg)
    grid = cfg.grid()
    covered = 0
    for trial in range(cfg.trials):
        ds = _make_dataset(cfg, cfg.n, trial)
        dens = _density_model(ds.truth, density)
        sample = SampleSet(ds.inputs, ds.outputs)
        truth_vals = _truth_on_grid(ds.truth, grid)
        if cfg.audit_mode == "band":
            perm = stream(cfg.master_seed, "subsample", trial).permutation(cfg.n)[: cfg.n0]
            sub = sample.take(perm)
            e, bound = _agent_ellipsoid_and_bound(cfg, sub, dens, quantile, trial)
            if cfg.tau_mode == "true-norm":
                bound = NormBound(
                    value=rkhs_norm_sq(ds.truth), method="hoeffding",
                    alpha=0.0, beta=cfg.beta, base_estimate=rkhs_norm_sq(ds.truth),
                )
            band = band_over_grid(grid, sub, e, bound, _band_config(cfg, cfg.n0, bound.method))
            if _band_covers(band, truth_vals):
                covered += 1
        else:
            bands = []
            for k in range(cfg.agents):
                perm = stream(cfg.master_seed, "subsample", trial, k).permutation(cfg.n)[: cfg.n0]
                sub = sample.take(perm)
                e, bound = _agent_ellipsoid_and_bound(cfg, sub, dens, quantile, trial, k)
                bands.append(
                    band_over_grid(grid, sub, e, bound, _band_config(cfg, cfg.n0, bound.method))
                )
            ok = True
            for j in range(len(grid)):
                voted = majority(IntervalCollection([band[j] for band in bands]))
                if not voted.contains(float(truth_vals[j])):
                    ok = False
                    break
            if ok:
                covered += 1
    coverage = covered / cfg.trials
    nominal = 1.0 - cfg.gamma if cfg.audit_mode == "band" else 1.0 - 2.0 * cfg.gamma
    if cfg.tau_mode == "true-norm":
        nominal = 1.0
    ci_lo, ci_hi = wilson_interval(covered, cfg.trials)
    passed = coverage >= nominal - cfg.coverage_slack
    result = {
        "mode": cfg.audit_mode,
        "trials": cfg.trials,
        "covered": covered,
        "coverage": coverage,
        "ci_lo": ci_lo,
        "ci_hi": ci_hi,
        "nominal": nominal,
        "slack": cfg.coverage_slack,
        "passed": passed,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_config(cfg, out_dir)
        _write_csv(
            out_dir / "coverage.csv",
            ["mode", "trials", "covered", "coverage", "ci_lo", "ci_hi", "nominal",
             "slack", "passed"],
            [(result["mode"], result["trials"], result["covered"], result["coverage"],
              result["ci_lo"], result["ci_hi"], result["nominal"], result["slack"],
              result["passed"])],
        )
    return result


# ---------------------------------------------------------------------------
# band command: one dataset in, one band CSV out


def run_band(
    cfg: ExperimentConfig, out_dir: Path | None = None, dataset: Dataset | None = None
) -> dict:
    """Confidence band for a single dataset (generated when not supplied)."""
    cfg.validate()
    ds = dataset if dataset is not None else _make_dataset(cfg, cfg.n)
    dens = _density_model(ds.truth, ds.input_density)
    sample = SampleSet(ds.inputs, ds.outputs)
    n = len(sample)
    n0 = min(cfg.n0, n)
    perm = stream(cfg.master_seed, "subsample").permutation(n)[:n0]
    sub = sample.take(perm)
    quantile = noise_radius_quantile(cfg)
    e, bound = _agent_ellipsoid_and_bound(cfg, sub, dens, quantile)
    grid = cfg.grid()
    band = band_over_grid(grid, sub, e, bound, _band_config(cfg, n0, bound.method))
    result = {
        "grid": grid, "band": band, "bound": bound, "ellipsoid": e, "dataset": ds,
        "subsample_indices": perm,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_config(cfg, out_dir)
        _write_csv(
            out_dir / "band.csv",
            ["x", "lo", "hi", "empty_flag"],
            [(x, est.lo, est.hi, est.is_empty) for x, est in zip(grid, band)],
        )
        (out_dir / "dataset.json").write_text(dataset_to_json(ds))
        (out_dir / "ellipsoid.json").write_text(ellipsoid_to_json(e))
        (out_dir / "norm_bound.json").write_text(
            json.dumps(
                {"method": bound.method, "value": bound.value,
                 "base_estimate": bound.base_estimate, "alpha": bound.alpha,
                 "beta": bound.beta, "u_draw": bound.u_draw,
                 "subsample_indices": perm.tolist()},
                indent=2,
            )
        )
        if cfg.plot:
            _plot_band(result, out_dir / "band.svg")
    return result


# ---------------------------------------------------------------------------
# optional SVG plots (thin layer over the CSV contract)


def _plot_norm_bounds(result: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = sorted(result["by_n"])
    fig, axes = plt.subplots(1, len(ns), figsize=(5 * len(ns), 4), squeeze=False)
    for ax, n in zip(axes[0], ns):
        data = result["by_n"][n]
        labels = list(data)
        ax.boxplot([data[m]["excesses"] for m in labels], tick_labels=labels, whis=1.5)
        ax.axhline(0.0, color="gray", lw=0.8)
        ax.set_title(f"n = {n}")
        ax.set_ylabel("bound - true squared norm")
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_band(result: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = result["grid"]
    band = result["band"]
    lo = [est.lo if not est.is_empty else np.nan for est in band]
    hi = [est.hi if not est.is_empty else np.nan for est in band]
    truth = result["dataset"].truth(grid)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(grid, lo, hi, alpha=0.3, label="confidence band")
    ax.plot(grid, truth, "k-", lw=1, label="truth")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_voting_bands(result: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = result["grid"]
    fig, axes = plt.subplots(1, 3, figsize=(15, 4), sharey=True)
    for ax, scheme in zip(axes, (SCHEME_ORDERING, SCHEME_THRESHOLD_HALF, SCHEME_THRESHOLD_FULL)):
        s = result["summaries"][scheme]
        with np.errstate(all="ignore"):
            lo_lo = np.nanmin(s["lo"], axis=0)
            lo_hi = np.nanmax(s["lo"], axis=0)
            hi_lo = np.nanmin(s["hi"], axis=0)
            hi_hi = np.nanmax(s["hi"], axis=0)
        ax.fill_between(grid, lo_lo, lo_hi, alpha=0.4)
        ax.fill_between(grid, hi_lo, hi_hi, alpha=0.4)
        ax.plot(grid, result["dataset"].truth(grid), "k-", lw=1)
        ax.set_title(scheme)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_diameter_table(result: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes = list(result["by_size"])
    schemes = (SCHEME_STANDARD, SCHEME_ORDERING, SCHEME_THRESHOLD_HALF, SCHEME_THRESHOLD_FULL)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.2
    xs = np.arange(len(sizes))
    for i, scheme in enumerate(schemes):
        avgs = [result["by_size"][size][scheme]["avg"] for size in sizes]
        ax.bar(xs + (i - 1.5) * width, avgs, width, label=scheme)
    ax.set_xticks(xs, [f"n={n}, n0={n0}" for n, n0 in sizes])
    ax.set_ylabel("average diameter")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
