"""Sample reweighting via LP over influence vectors with a GA threshold search.

Per candidate threshold vector alpha, a linear program picks loss weights
that maximize the predicted influence on the target classes subject to every
class keeping at least alpha_k of its baseline cumulative influence and a box
on the weights (the program is unbounded without one). A genetic algorithm
searches the alpha space, scoring each candidate by actually training one
weighted epoch and measuring per-class accuracy changes: any target class
failing to improve collapses the fitness to a sentinel, and non-target
regressions subtract their average relative drop.

Two workflows drive it: direct improvement (extend the run by one reweighted
epoch, deltas measured against the current epoch) and course correction
(replace a detrimental epoch, deltas measured against that epoch's original
outcome).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import CommitRefusedError, ConfigurationError, GaSearchError, SolverError
from .influence import InfluenceMatrix
from . import trainer as _trainer
from .trainer import DeltaVector, EpochMetrics, ModelParams

SENTINEL = -1e9

LP_OPTIMAL = "optimal"
LP_INFEASIBLE = "infeasible"

DI = "DI"
CC = "CC"

DEFAULT_WEIGHT_BOUNDS = (0.0, 2.0)
DEFAULT_ALPHA_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class WeightSet:
    """Per-sample loss weights inside a box; the all-ones vector is baseline."""

    w: np.ndarray
    bounds: tuple = DEFAULT_WEIGHT_BOUNDS

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        lo, hi = self.bounds
        if lo >= hi:
            raise ConfigurationError("weight bounds must satisfy w_min < w_max")
        if w.min() < lo - 1e-9 or w.max() > hi + 1e-9:
            raise ValueError("weights violate the configured bounds")
        w = np.clip(w, lo, hi)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def baseline(cls, n, bounds=DEFAULT_WEIGHT_BOUNDS):
        return cls(np.ones(n), bounds)


@dataclass(frozen=True)
class AlphaThresholds:
    """Per-class slack levels for the LP constraints."""

    alpha: np.ndarray
    search_range: tuple = DEFAULT_ALPHA_RANGE

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        lo, hi = self.search_range
        if a.min() < lo - 1e-12 or a.max() > hi + 1e-12:
            raise ValueError("alpha outside its search range")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class TargetSet:
    """Classes the operator wants to improve."""

    indices: tuple
    num_classes: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if not idx:
            raise ConfigurationError("target set must be non-empty")
        if len(set(idx)) != len(idx):
            raise ConfigurationError("target set has duplicates")
        if idx[0] < 0 or idx[-1] >= self.num_classes:
            raise ConfigurationError("target class out of range")
        object.__setattr__(self, "indices", idx)

    @property
    def is_proper(self):
        return len(self.indices) < self.num_classes

    @property
    def complement(self):
        return tuple(k for k in range(self.num_classes) if k not in self.indices)


@dataclass(frozen=True)
class GAConfig:
    """Population sizing and variation rates for the alpha search."""

    iterations: int = 20
    population_size: int = 24
    crossover_rate: float = 1.0
    mutation_rate: float = 0.25
    mutation_strength: float = 0.25
    num_elites: int = 6
    num_mutated_elites: int = 6
    num_randoms: int = 6
    num_crossover_children: int = 6
    seed: int = 0
    alpha_range: tuple = DEFAULT_ALPHA_RANGE

    def __post_init__(self):
        groups = (self.num_elites + self.num_mutated_elites + self.num_randoms
                  + self.num_crossover_children)
        if groups != self.population_size:
            raise ConfigurationError(
                f"elites+mutated+randoms+crossover = {groups} != "
                f"population_size {self.population_size}")
        if self.iterations < 1 or self.population_size < 1 or self.num_elites < 1:
            raise ConfigurationError("iterations, population, elites must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1]")
        lo, hi = self.alpha_range
        if lo >= hi:
            raise ConfigurationError("alpha_range must satisfy lo < hi")


# ---------------------------------------------------------------------------
# LP of the reweighting step
# ---------------------------------------------------------------------------

@dataclass
class LpSolution:
    status: str
    weights: WeightSet | None
    objective: float | None

    @property
    def feasible(self):
        return self.status == LP_OPTIMAL


def solve_reweight_lp(m: InfluenceMatrix, targets, alpha: AlphaThresholds,
                      bounds=DEFAULT_WEIGHT_BOUNDS) -> LpSolution:
    """maximize sum_{k in targets} sum_i w_i P[i,k]
       s.t.     sum_i w_i P[i,k] >= alpha_k * sum_i P[i,k]  for every class k,
                w_min <= w_i <= w_max.

    Samples with a zero objective coefficient are pinned to the baseline
    weight 1 (the program is indifferent to them; pinning keeps the output
    minimal). Returns a vertex optimum or an infeasibility signal.
    """
    lo, hi = bounds
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ConfigurationError("weight bounds must be finite with w_min < w_max")
    p = m.values
    n, k = p.shape
    target_idx = list(getattr(targets, "indices", targets))
    a = np.asarray(alpha.alpha if isinstance(alpha, AlphaThresholds) else alpha,
                   dtype=np.float64)
    if a.shape != (k,):
        raise ValueError(f"alpha has shape {a.shape}, expected ({k},)")
    c = p[:, target_idx].sum(axis=1)
    rhs = a * p.sum(axis=0)

    free = c != 0.0
    w = np.ones(n)
    if not free.any():
        # every weight pinned at baseline; just check the constraints
        lhs = p.sum(axis=0)
        if np.all(lhs >= rhs - 1e-9):
            return LpSolution(LP_OPTIMAL, WeightSet(w, bounds), 0.0)
        return LpSolution(LP_INFEASIBLE, None, None)

    a_free = p[free].T                     # (K, n_free)
    rhs_free = rhs - p[~free].sum(axis=0)  # move pinned contributions right
    res = linprog(c=-c[free], A_ub=-a_free, b_ub=-rhs_free,
                  bounds=[(lo, hi)] * int(free.sum()), method="highs-ds")
    if res.status == 2:
        return LpSolution(LP_INFEASIBLE, None, None)
    if res.status != 0:
        raise SolverError(f"LP solver failed with status {res.status}: {res.message}")
    w[free] = np.clip(res.x, lo, hi)
    objective = float(c @ w)
    return LpSolution(LP_OPTIMAL, WeightSet(w, bounds), objective)


# ---------------------------------------------------------------------------
# Fitness of a candidate threshold set
# ---------------------------------------------------------------------------

def fitness(delta, targets, sentinel=SENTINEL) -> float:
    """Sentinel-averaged target indicator plus mean non-target degradation.

    Any target class with delta <= 0 contributes sentinel/|targets|; each
    non-target class contributes its delta/|non-targets| only when negative.
    0 is the maximum, reached when all targets improve and nothing degrades.
    """
    d = np.asarray(delta.delta if isinstance(delta, DeltaVector) else delta,
                   dtype=np.float64)
    t_idx = list(getattr(targets, "indices", targets))
    nt_idx = [k for k in range(len(d)) if k not in set(t_idx)]
    if not t_idx:
        raise ConfigurationError("target set must be non-empty")
    if not nt_idx:
        raise ConfigurationError("fitness needs at least one non-target class")
    score = sum(sentinel for k in t_idx if d[k] <= 0.0) / len(t_idx)
    score += sum(d[k] for k in nt_idx if d[k] < 0.0) / len(nt_idx)
    return float(score)


def target_delta_sum(delta, targets) -> float:
    """Tie-break statistic: total relative improvement over the targets."""
    d = np.asarray(delta.delta if isinstance(delta, DeltaVector) else delta,
                   dtype=np.float64)
    return float(sum(d[k] for k in getattr(targets, "indices", targets)))


# ---------------------------------------------------------------------------
# GA search over alpha
# ---------------------------------------------------------------------------

@dataclass
class CandidateRecord:
    generation: int
    index: int
    alpha: np.ndarray
    lp_status: str
    delta: np.ndarray | None
    fitness: float
    target_delta_sum: float

    def to_dict(self):
        return {"generation": self.generation, "index": self.index,
                "alpha": [float(v) for v in self.alpha],
                "lp_status": self.lp_status,
                "delta": None if self.delta is None else [float(v) for v in self.delta],
                "fitness": self.fitness,
                "target_delta_sum": self.target_delta_sum}


@dataclass
class StagedEpoch:
    """A fully trained reweighted epoch awaiting commit."""

    params: ModelParams
    metrics: EpochMetrics
    weights: WeightSet
    base_epoch: int
    mode: str
    delta: np.ndarray


@dataclass
class ParetoResult:
    best_weights: WeightSet | None
    best_alpha: AlphaThresholds | None
    best_fitness: float
    log: list = field(default_factory=list)
    staged: StagedEpoch | None = None
    targets: tuple = ()
    mode: str = DI

    def to_dict(self):
        return {"mode": self.mode, "targets": list(self.targets),
                "best_fitness": self.best_fitness,
                "best_alpha": None if self.best_alpha is None else
                    [float(v) for v in self.best_alpha.alpha],
                "best_weights": None if self.best_weights is None else
                    [float(v) for v in self.best_weights.w],
                "best_delta": None if self.staged is None else
                    [float(v) for v in self.staged.delta],
                "log": [r.to_dict() for r in self.log]}


def _ga_rng(seed):
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, 0x6A5], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _evaluate_candidate(session, base_params, reference, m, targets, alpha_vec,
                        ga_config, lp_bounds):
    alpha = AlphaThresholds(alpha_vec, ga_config.alpha_range)
    sol = solve_reweight_lp(m, targets, alpha, lp_bounds)
    if not sol.feasible:
        return sol, None, None, None, SENTINEL * m.num_classes, 0.0
    params = _trainer.train_weighted(base_params, session.train, sol.weights.w,
                                     session.config, 1)
    metrics = _trainer.evaluate_per_class(params, session.val)
    delta = _trainer.relative_change(reference, metrics)
    f = fitness(delta, targets)
    return sol, params, metrics, delta, f, target_delta_sum(delta, targets)


def ga_search(session, m: InfluenceMatrix, targets: TargetSet,
              ga_config: GAConfig = GAConfig(), lp_bounds=DEFAULT_WEIGHT_BOUNDS,
              mode=DI, base_epoch=None, reference_metrics=None) -> ParetoResult:
    """Evolve alpha vectors; every candidate is scored by one real weighted
    epoch from the base checkpoint (identical batch order for all candidates,
    so fitness differences come from the weights alone).

    The next population is elites + mutated elite copies + uniform crossovers
    of elites + fresh uniform draws, with counts from ga_config. Returns the
    best (weights, alpha) ever seen with a per-candidate log; the trained
    best epoch is staged on the result for commit.
    """
    if not targets.is_proper:
        raise ConfigurationError(
            "target set must be a proper subset of the classes")
    if mode not in (DI, CC):
        raise ConfigurationError(f"unknown mode {mode!r}")
    base_epoch = session.current_epoch if base_epoch is None else base_epoch
    base_params = session.params_at(base_epoch)
    if reference_metrics is None:
        if mode == CC:
            raise ConfigurationError("CC mode requires the original next-epoch "
                                     "metrics as reference_metrics")
        reference_metrics = session.metrics_at(base_epoch)

    k = m.num_classes
    lo, hi = ga_config.alpha_range
    rng = _ga_rng(ga_config.seed)
    population = rng.uniform(lo, hi, size=(ga_config.population_size, k))

    log = []
    best = None  # (fitness, tds, record, staged)
    for generation in range(ga_config.iterations):
        scored = []
        for index, alpha_vec in enumerate(population):
            sol, params, metrics, delta, f, tds = _evaluate_candidate(
                session, base_params, reference_metrics, m, targets, alpha_vec,
                ga_config, lp_bounds)
            record = CandidateRecord(generation, index, alpha_vec.copy(),
                                     sol.status,
                                     None if delta is None else delta.delta.copy(),
                                     f, tds)
            log.append(record)
            scored.append((f, tds, index, record, sol, params, metrics, delta))
            if sol.feasible and (best is None or (f, tds) > (best[0], best[1])):
                staged = StagedEpoch(params, metrics, sol.weights, base_epoch,
                                     mode, delta.delta.copy())
                best = (f, tds, record, staged)
        # next generation: rank current one (stable; earlier index wins ties)
        scored.sort(key=lambda s: (-s[0], -s[1], s[2]))
        elites = [population[s[2]].copy() for s in scored[:ga_config.num_elites]]
        next_pop = list(elites)
        span = hi - lo
        for i in range(ga_config.num_mutated_elites):
            child = elites[i % len(elites)].copy()
            mask = rng.uniform(size=k) < ga_config.mutation_rate
            noise = rng.normal(0.0, ga_config.mutation_strength * span, size=k)
            child[mask] += noise[mask]
            next_pop.append(np.clip(child, lo, hi))
        for _ in range(ga_config.num_crossover_children):
            if len(elites) >= 2:
                pa, pb = rng.choice(len(elites), size=2, replace=False)
            else:
                pa = pb = 0
            if rng.uniform() < ga_config.crossover_rate:
                mask = rng.uniform(size=k) < 0.5
                child = np.where(mask, elites[pa], elites[pb])
            else:
                child = elites[pa].copy()
            next_pop.append(child)
        for _ in range(ga_config.num_randoms):
            next_pop.append(rng.uniform(lo, hi, size=k))
        population = np.asarray(next_pop[:ga_config.population_size])

    if best is None:
        raise GaSearchError("every candidate was LP-infeasible in every generation")
    f, tds, record, staged = best
    return ParetoResult(best_weights=staged.weights,
                        best_alpha=AlphaThresholds(record.alpha,
                                                   ga_config.alpha_range),
                        best_fitness=f, log=log, staged=staged,
                        targets=targets.indices, mode=mode)


# ---------------------------------------------------------------------------
# Operator workflows
# ---------------------------------------------------------------------------

def _check_committable(result: ParetoResult, targets: TargetSet):
    staged = result.staged
    if staged is None:
        raise CommitRefusedError("no feasible candidate was staged")
    if any(staged.delta[t] <= 0.0 for t in targets.indices):
        raise CommitRefusedError(
            "best candidate does not improve every target class "
            f"(deltas {staged.delta.tolist()}); refusing to commit")


def run_direct_improvement(session, targets: TargetSet,
                           ga_config: GAConfig = GAConfig(),
                           lp_bounds=DEFAULT_WEIGHT_BOUNDS, damping=None,
                           epoch=None):
    """Improve the chosen classes in the next epoch via reweighted training.

    Computes influence at the session's current epoch e, searches for weights,
    and commits the winning weighted epoch as e+1. Refuses to commit when even
    the best candidate leaves some target class flat or worse.
    """
    base_epoch = session.current_epoch if epoch is None else epoch
    m = session.influence_at(base_epoch, damping=damping)
    result = ga_search(session, m, targets, ga_config, lp_bounds, mode=DI,
                       base_epoch=base_epoch)
    _check_committable(result, targets)
    staged = result.staged
    session.append_epoch(staged.params, staged.metrics, staged.weights)
    return result, staged.metrics


def run_course_correction(session, detrimental_epoch: int, targets: TargetSet,
                          ga_config: GAConfig = GAConfig(),
                          lp_bounds=DEFAULT_WEIGHT_BOUNDS, damping=None,
                          allow_non_dropped=False):
    """Re-run a detrimental epoch with optimized weights and replace it.

    Deltas are measured against the ORIGINAL outcome of that epoch. Targets
    whose accuracy did not drop into the detrimental epoch are refused unless
    allow_non_dropped is set.
    """
    if detrimental_epoch != session.current_epoch:
        raise ConfigurationError(
            f"can only correct the latest epoch {session.current_epoch}, "
            f"got {detrimental_epoch}")
    if detrimental_epoch < 1:
        raise ConfigurationError("no prior epoch to restart from")
    base_epoch = detrimental_epoch - 1
    before = session.metrics_at(base_epoch).per_class_accuracy
    after = session.metrics_at(detrimental_epoch).per_class_accuracy
    if not allow_non_dropped:
        flat = [t for t in targets.indices if after[t] >= before[t]]
        if flat:
            raise ConfigurationError(
                f"classes {flat} did not lose accuracy in epoch "
                f"{detrimental_epoch}; pass allow_non_dropped=True to override")
    m = session.influence_at(base_epoch, damping=damping)
    result = ga_search(session, m, targets, ga_config, lp_bounds, mode=CC,
                       base_epoch=base_epoch,
                       reference_metrics=session.metrics_at(detrimental_epoch))
    _check_committable(result, targets)
    staged = result.staged
    session.replace_last_epoch(staged.params, staged.metrics, staged.weights)
    return result, staged.metrics
