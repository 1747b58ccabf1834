"""Generalization-gap experiments, rate fits, and the decomposition check.

Each error kind compares an empirical optimum with the population optimum:

``theorem1``           ``|inf d_hat - inf d|`` with two-sample ``d_hat``
``sup_gap_arora``      ``sup_theta |d_hat(theta) - d(theta)|`` over the theta grid
``plugin_zhang``       ``d(theta_hat) - inf d``, ``theta_hat`` minimizing the
                       half-empirical objective
``plugin_ji``          same with ``theta_hat`` from the two-sample objective
``expectation_liang``  the ``plugin_zhang`` gap, aggregated by its mean
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .distance import (
    ObjectiveData,
    SearchOptions,
    _combine,
    _parts,
    distance_curve,
    inf_over_theta,
    make_data,
    parameter_grid,
    select_min,
    sup_over_w,
)
from .distributions import DistributionSpec, SampleSet, draw_samples
from .errors import ConfigError, NumericalError, OracleCapError
from .nets import MeasuringFunction, NetworkSpec, WeightAssignment

ERROR_KINDS = ("theorem1", "sup_gap_arora", "plugin_zhang", "plugin_ji", "expectation_liang")
N_ONLY = ("plugin_zhang", "expectation_liang")
REGRESSORS = ("log_sqrt_logn_over_n", "log_n")
POPULATION_STREAM = 2**32 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    error_kind: str
    fspec: NetworkSpec
    gspec: NetworkSpec
    phi: MeasuringFunction
    target: DistributionSpec
    base: DistributionSpec
    n_grid: tuple
    m_grid: tuple = ()
    replicates: int = 200
    N_pop: int = 100_000
    sup_method: str = "grid"
    inf_method: str = "grid"
    master_seed: int = 0
    epsilon_slack: float = 0.0
    abs_mode: bool = True
    experiment_id: str = "exp"
    search: SearchOptions = field(default_factory=SearchOptions)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if self.error_kind not in ERROR_KINDS:
            raise ConfigError(f"error_kind must be one of {ERROR_KINDS}, got {self.error_kind!r}")
        if not self.n_grid:
            raise ConfigError("n_grid must not be empty")
        for name, grid in (("n_grid", self.n_grid), ("m_grid", self.m_grid)):
            if any(v < 1 for v in grid):
                raise ConfigError(f"{name} entries must be positive")
            if list(grid) != sorted(grid):
                raise ConfigError(f"{name} must be sorted ascending")
        if self.m_grid and self.error_kind not in N_ONLY and len(self.m_grid) != len(self.n_grid):
            raise ConfigError("m_grid must be empty or pair one-to-one with n_grid")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.N_pop < 1:
            raise ConfigError("N_pop must be >= 1")
        if not self.epsilon_slack >= 0:
            raise ConfigError("epsilon_slack must be nonnegative")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        for name, method in (("sup_method", self.sup_method), ("inf_method", self.inf_method)):
            if method not in ("grid", "pgd"):
                raise ConfigError(f"{name} must be 'grid' or 'pgd', got {method!r}")
        if not self.abs_mode and not self.phi.is_identity:
            raise ConfigError("abs_mode off requires the identity measuring function")
        cap = self.search.grid_cap
        if self.sup_method == "grid" and self.fspec.parameter_count > cap:
            raise OracleCapError(f"grid sup over {self.fspec.parameter_count} discriminator parameters exceeds cap {cap}")
        if self.inf_method == "grid" and self.gspec.parameter_count > cap:
            raise OracleCapError(f"grid inf over {self.gspec.parameter_count} generator parameters exceeds cap {cap}")
        if self.target.dimension != self.fspec.input_dim:
            raise ConfigError("target dimension must match the discriminator input")
        if self.base.dimension != self.gspec.input_dim:
            raise ConfigError("base dimension must match the generator input")

    def pairs(self) -> list[tuple[int, int]]:
        """(n, m) grid points; ``m = 0`` for kinds that draw no latent samples."""
        if self.error_kind in N_ONLY:
            return [(n, 0) for n in self.n_grid]
        if not self.m_grid:
            return [(n, n) for n in self.n_grid]
        return list(zip(self.n_grid, self.m_grid))

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "error_kind": self.error_kind,
            "fspec": self.fspec.to_dict(),
            "gspec": self.gspec.to_dict(),
            "phi": self.phi.to_dict(),
            "target": self.target.to_dict(),
            "base": self.base.to_dict(),
            "n_grid": list(self.n_grid),
            "m_grid": list(self.m_grid),
            "replicates": self.replicates,
            "N_pop": self.N_pop,
            "sup_method": self.sup_method,
            "inf_method": self.inf_method,
            "master_seed": self.master_seed,
            "epsilon_slack": self.epsilon_slack,
            "abs_mode": self.abs_mode,
            "search": self.search.to_dict(),
        }


@dataclass
class GapRecord:
    experiment_id: str
    error_kind: str
    n: int
    m: int
    replicate: int
    gap: float
    abs_mode: bool
    sup_method: str
    inf_method: str
    seed: int
    wall_time: float = 0.0
    flagged: bool = False

    def sort_key(self):
        return (self.n, self.m, self.replicate)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    regressor_kind: str
    points_used: list
    excluded: list = field(default_factory=list)
    aggregate: str = "median"

    def predict(self, n) -> np.ndarray:
        return np.exp(self.intercept + self.slope * regressor(np.asarray(n, dtype=np.float64), self.regressor_kind))

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ seeds


def replicate_seed(master_seed: int, n: int, m: int, rep: int) -> int:
    ss = np.random.SeedSequence([master_seed, n, m, rep])
    return int(ss.generate_state(1, np.uint64)[0])


def population_seed(master_seed: int) -> int:
    ss = np.random.SeedSequence([master_seed, POPULATION_STREAM])
    return int(ss.generate_state(1, np.uint64)[0])


# ------------------------------------------------------------- population


@dataclass
class PopulationPass:
    data: ObjectiveData
    curve: np.ndarray | None
    inf_value: float
    inf_theta: WeightAssignment
    sup_method: str


def _grid_ok(spec: NetworkSpec, cap: int) -> bool:
    return spec.parameter_count <= cap


def population_pass(cfg: ExperimentConfig) -> PopulationPass:
    """Population objective on the theta grid, computed once per config.

    Uses the closed-form measure when available, otherwise an ``N_pop``
    plug-in sample from a dedicated stream, and the grid oracle for the sup
    whenever the discriminator fits under the cap.
    """
    rng = np.random.default_rng(population_seed(cfg.master_seed))
    data = make_data("population", cfg.fspec, cfg.gspec, cfg.phi, target=cfg.target, base=cfg.base,
                     n_pop=cfg.N_pop, rng=rng)
    sup = "grid" if _grid_ok(cfg.fspec, cfg.search.grid_cap) else cfg.sup_method
    if cfg.inf_method == "grid":
        curve = distance_curve(cfg.fspec, cfg.gspec, cfg.phi, data, cfg.search, cfg.abs_mode, sup, rng)
        idx = select_min(curve)
        tmats = parameter_grid(cfg.gspec, cfg.search.theta_grid_points, cfg.search.grid_cap)
        theta = WeightAssignment([M[idx] for M in tmats])
        return PopulationPass(data, curve, float(curve[idx]), theta, sup)
    res = inf_over_theta(cfg.fspec, cfg.gspec, cfg.phi, data, "pgd", cfg.search, cfg.abs_mode, sup, rng=rng)
    return PopulationPass(data, None, res.value, res.theta, sup)


def _population_distance(cfg, pop: PopulationPass, res) -> float:
    if res.index is not None and pop.curve is not None:
        return float(pop.curve[res.index])
    rng = np.random.default_rng(population_seed(cfg.master_seed) ^ 1)
    return sup_over_w(cfg.fspec, cfg.gspec, res.theta, cfg.phi, pop.data, pop.sup_method, cfg.search,
                      cfg.abs_mode, rng).value


# ------------------------------------------------------------ experiments


def _one_replicate(cfg: ExperimentConfig, pop: PopulationPass, n: int, m: int, rep: int) -> GapRecord:
    t0 = time.perf_counter()
    seed = replicate_seed(cfg.master_seed, n, m, rep)
    rng = np.random.default_rng(seed)
    kind = cfg.error_kind
    samples = draw_samples(cfg.target, cfg.base, n, m, rng, seed)
    variant = "half_empirical" if kind in N_ONLY else "empirical_mn"
    data = make_data(variant, cfg.fspec, cfg.gspec, cfg.phi, samples=samples, target=cfg.target,
                     base=cfg.base, n_pop=cfg.N_pop, rng=np.random.default_rng(population_seed(cfg.master_seed)))
    flagged = False
    if kind == "sup_gap_arora":
        if pop.curve is None:
            raise OracleCapError("sup_gap_arora needs the theta grid (inf_method grid)")
        curve = distance_curve(cfg.fspec, cfg.gspec, cfg.phi, data, cfg.search, cfg.abs_mode, cfg.sup_method, rng)
        gap = float(np.max(np.abs(curve - pop.curve)))
    else:
        slack = cfg.epsilon_slack if kind in ("plugin_zhang", "plugin_ji", "expectation_liang") else 0.0
        res = inf_over_theta(cfg.fspec, cfg.gspec, cfg.phi, data, cfg.inf_method, cfg.search, cfg.abs_mode,
                             cfg.sup_method, slack, rng)
        if kind == "theorem1":
            gap = abs(res.value - pop.inf_value)
        else:
            gap = _population_distance(cfg, pop, res) - pop.inf_value
            flagged = gap < 0
    if not math.isfinite(gap):
        raise NumericalError(f"non-finite gap at n={n}, m={m}, replicate={rep}")
    return GapRecord(cfg.experiment_id, kind, n, m, rep, gap, cfg.abs_mode, cfg.sup_method, cfg.inf_method,
                     seed, time.perf_counter() - t0, flagged)


def run_error_experiment(cfg: ExperimentConfig, threads: int = 1,
                         diagnostics: list | None = None) -> list[GapRecord]:
    """All replicates at every grid point, sorted by ``(n, m, replicate)``.

    A grid point whose computation fails numerically is dropped and a
    diagnostic entry is appended to ``diagnostics`` when given.
    """
    pop = population_pass(cfg)
    records: list[GapRecord] = []
    for n, m in cfg.pairs():
        def task(rep, n=n, m=m):
            return _one_replicate(cfg, pop, n, m, rep)
        try:
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as ex:
                    point = list(ex.map(task, range(cfg.replicates)))
            else:
                point = [task(r) for r in range(cfg.replicates)]
        except NumericalError as exc:
            if diagnostics is not None:
                diagnostics.append({"n": n, "m": m, "status": "aborted", "reason": str(exc)})
            continue
        records.extend(point)
    records.sort(key=GapRecord.sort_key)
    return records


# ------------------------------------------------------------------ fits


def regressor(n: np.ndarray, kind: str) -> np.ndarray:
    if kind == "log_sqrt_logn_over_n":
        return 0.5 * np.log(np.log(n) / n)
    if kind == "log_n":
        return np.log(n)
    raise ValueError(f"regressor_kind must be one of {REGRESSORS}, got {kind!r}")


def default_aggregate(records) -> str:
    kinds = {r.error_kind for r in records}
    return "mean" if kinds == {"expectation_liang"} else "median"


def aggregate_by_n(records, how: str | None = None) -> dict[int, float]:
    how = how or default_aggregate(records)
    groups: dict[int, list] = {}
    for r in records:
        groups.setdefault(r.n, []).append(r.gap)
    fn = np.median if how == "median" else np.mean
    return {n: float(fn(groups[n])) for n in sorted(groups)}


def fit_rate(records, regressor_kind: str = "log_sqrt_logn_over_n", aggregate: str | None = None) -> RateFit:
    """OLS of log aggregated gap on the regressor, one point per n."""
    if regressor_kind not in REGRESSORS:
        raise ValueError(f"regressor_kind must be one of {REGRESSORS}, got {regressor_kind!r}")
    how = aggregate or default_aggregate(records)
    agg = aggregate_by_n(records, how)
    usable = [n for n, g in agg.items() if g > 0 and (regressor_kind == "log_n" or n >= 2)]
    excluded = [n for n in agg if n not in usable]
    if len(usable) < 3:
        raise ValueError(f"need >= 3 grid points with positive {how} gaps, got {len(usable)} (excluded {excluded})")
    x = regressor(np.array(usable, dtype=np.float64), regressor_kind)
    y = np.log([agg[n] for n in usable])
    fit = stats.linregress(x, y)
    r2 = float(fit.rvalue**2) if np.isfinite(fit.rvalue) else 0.0
    return RateFit(float(fit.slope), float(fit.intercept), min(max(r2, 0.0), 1.0), regressor_kind,
                   usable, excluded, how)


def trend_spearman(records, aggregate: str | None = None) -> float:
    """Spearman correlation of ``n`` with the aggregated gap."""
    agg = aggregate_by_n(records, aggregate)
    ns = list(agg)
    if len(ns) < 2:
        raise ValueError("need at least two grid points for a trend")
    return float(stats.spearmanr(ns, [agg[n] for n in ns]).statistic)


# --------------------------------------------------------- dyadic blocks


@dataclass
class DyadicSummary:
    rows: list
    notes: list

    def maxima(self) -> np.ndarray:
        return np.array([r["max_normalized_gap"] for r in self.rows])

    def spread(self) -> float:
        """Ratio of the largest to the smallest block maximum."""
        mx = self.maxima()
        return float(mx.max() / mx.min()) if mx.min() > 0 else math.inf


def dyadic_block(n: int) -> int:
    """``k`` with ``2**(k-1) < n <= 2**k``."""
    return max(0, (int(n) - 1).bit_length())


def dyadic_blocking_summary(records, aggregate: str | None = None) -> DyadicSummary:
    """Max over each dyadic block of ``gap * sqrt(n / log n)``.

    The per-n gap is the aggregate over replicates (median unless the
    records are expectation-type).
    """
    agg = aggregate_by_n(records, aggregate)
    agg = {n: g for n, g in agg.items() if n >= 2}
    blocks: dict[int, list] = {}
    for n, g in agg.items():
        blocks.setdefault(dyadic_block(n), []).append((n, g * math.sqrt(n / math.log(n))))
    if len(blocks) < 2:
        raise ValueError("records must span at least two dyadic blocks")
    rows, notes = [], []
    ks = sorted(blocks)
    for k in range(ks[0], ks[-1] + 1):
        if k not in blocks:
            notes.append(f"block {k} ({2 ** (k - 1)}, {2 ** k}] has no grid points; skipped")
            continue
        vals = blocks[k]
        rows.append({"k": k, "lower": 2 ** (k - 1), "upper": 2**k, "n_values": [n for n, _ in vals],
                     "max_normalized_gap": max(v for _, v in vals)})
    return DyadicSummary(rows, notes)


# -------------------------------------------------------- decomposition


def verify_decomposition(fspec: NetworkSpec, gspec: NetworkSpec, phi: MeasuringFunction,
                         samples: SampleSet, target: DistributionSpec, base: DistributionSpec,
                         options: SearchOptions | None = None, N_pop: int | None = None,
                         rng: np.random.Generator | None = None) -> dict:
    """Compare ``|inf d_hat - inf d|`` with the two uniform deviations bounding it.

    ``term1 = sup_(theta, w) |mean h_u(Z_j) - E h_u|`` with
    ``h_u = phi(1 - f_w(g_theta(z)))`` and ``term2 = sup_w |mean phi(f_w(X_i)) - E phi(f_w(X))|``.
    Every sup and inf runs over the same grids, on which the inequality
    holds exactly.
    """
    opts = options or SearchOptions()
    wmats = parameter_grid(fspec, opts.grid_points, opts.grid_cap)
    tmats = parameter_grid(gspec, opts.theta_grid_points, opts.grid_cap)
    emp = make_data("empirical_mn", fspec, gspec, phi, samples=samples)
    pop = make_data("population", fspec, gspec, phi, target=target, base=base, n_pop=N_pop, rng=rng)
    wkey, tkey = (opts.grid_points,), (opts.theta_grid_points,)
    HXe, HGe = _parts(fspec, gspec, phi, wmats, wkey, tmats, tkey, emp)
    HXp, HGp = _parts(fspec, gspec, phi, wmats, wkey, tmats, tkey, pop)
    inf_emp = float(_combine(phi, True, HXe, HGe, emp.z.mass).max(axis=1).min())
    inf_pop = float(_combine(phi, True, HXp, HGp, pop.z.mass).max(axis=1).min())
    lhs = abs(inf_emp - inf_pop)
    term1 = float(np.max(np.abs(HGe - HGp)))
    term2 = float(np.max(np.abs(HXe - HXp)))
    rhs = term1 + term2
    slack = rhs - lhs
    return {"lhs": lhs, "rhs_term1": term1, "rhs_term2": term2, "rhs": rhs, "slack": slack,
            "inf_empirical": inf_emp, "inf_population": inf_pop, "n": samples.n, "m": samples.m,
            "holds": slack >= -1e-12 * (1.0 + rhs)}


# ------------------------------------------------------------- scalar toy


def scalar_toy_specs():
    """Two-weight relu discriminator, one-weight linear generator, and the
    target pushed forward from ``U[-1, 1]`` at ``theta* = 0.7``."""
    fspec = NetworkSpec((1, 1, 1), (1.0, 1.0), ("relu",))
    gspec = NetworkSpec((1, 1), (1.0,), ())
    base = DistributionSpec.uniform_cube(1.0, 1)
    target = DistributionSpec.pushforward(gspec, WeightAssignment([[[0.7]]]), base)
    return fspec, gspec, base, target


def scalar_toy_config(error_kind: str = "theorem1", replicates: int = 200, master_seed: int = 20240601,
                      n_grid=tuple(2**k for k in range(6, 15)), **overrides) -> ExperimentConfig:
    fspec, gspec, base, target = scalar_toy_specs()
    search = overrides.pop("search", SearchOptions(grid_points=21, theta_grid_points=4001))
    phi = overrides.pop("phi", MeasuringFunction("identity"))
    return ExperimentConfig(error_kind=error_kind, fspec=fspec, gspec=gspec, phi=phi, target=target, base=base,
                            n_grid=tuple(n_grid), replicates=replicates, master_seed=master_seed,
                            experiment_id=overrides.pop("experiment_id", f"toy_{error_kind}"),
                            search=search, **overrides)
