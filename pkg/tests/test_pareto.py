import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from influencekit import pareto as pa
from influencekit import trainer as tr
from influencekit.errors import (CommitRefusedError, ConfigurationError,
                                 GaSearchError)
from influencekit.influence import InfluenceMatrix
from influencekit.presets import make_blobs4
from influencekit.session import TrainingSession

from conftest import brute_force_lp


def _matrix(values):
    values = np.asarray(values, dtype=np.float64)
    return InfluenceMatrix(np.arange(len(values)), values)


# ---------------------------------------------------------------------------
# LP
# ---------------------------------------------------------------------------

def test_lp_single_positive_coefficient_maxes_out():
    m = _matrix([[1.0]])
    alpha = pa.AlphaThresholds([0.0])
    sol = pa.solve_reweight_lp(m, (0,), alpha, bounds=(0.0, 2.0))
    assert sol.feasible
    assert sol.weights.w[0] == pytest.approx(2.0)
    assert sol.objective == pytest.approx(2.0)


def test_lp_zero_objective_pins_baseline():
    # sample 1 has zero influence on the target class: weight stays 1
    m = _matrix([[1.0, 0.3], [0.0, -0.2]])
    alpha = pa.AlphaThresholds([0.0, 0.0])
    sol = pa.solve_reweight_lp(m, (0,), alpha, bounds=(0.0, 2.0))
    assert sol.feasible
    assert sol.weights.w[1] == 1.0


def test_lp_matches_vertex_enumeration_on_random_instances():
    rng = np.random.default_rng(42)
    checked = 0
    for trial in range(50):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, 4))
        p = rng.standard_normal((n, k))
        if rng.uniform() < 0.3:  # exercise the zero-coefficient pinning
            p[rng.integers(n), :] = 0.0
        targets = tuple(sorted(rng.choice(k, size=int(rng.integers(1, k + 1)),
                                          replace=False).tolist()))
        alpha = rng.uniform(0.0, 1.0, size=k)
        bounds = (0.0, 2.0)
        sol = pa.solve_reweight_lp(_matrix(p), targets,
                                   pa.AlphaThresholds(alpha), bounds)
        oracle = brute_force_lp(p, targets, alpha, bounds)
        if oracle is None:
            assert not sol.feasible
        else:
            assert sol.feasible
            assert sol.objective == pytest.approx(oracle, abs=1e-8)
            checked += 1
    assert checked >= 25  # most random instances should be feasible


def test_lp_infeasible_constructed():
    # single sample, alpha pushed beyond what the box allows
    p = np.array([[1.0, 0.5]])
    # constraint for class 1: w * 0.5 >= alpha_1 * 0.5 -> w >= alpha_1
    alpha = pa.AlphaThresholds([0.0, 3.0], search_range=(0.0, 4.0))
    sol = pa.solve_reweight_lp(_matrix(p), (0,), alpha, bounds=(0.0, 2.0))
    assert sol.status == pa.LP_INFEASIBLE
    assert sol.weights is None


def test_lp_baseline_always_feasible_at_alpha_one():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = rng.standard_normal((8, 3))
        sol = pa.solve_reweight_lp(_matrix(p), (0, 1),
                                   pa.AlphaThresholds(np.ones(3)),
                                   bounds=(0.0, 2.0))
        assert sol.feasible
        baseline_objective = p[:, [0, 1]].sum()
        assert sol.objective >= baseline_objective - 1e-9


def test_lp_feasibility_monotone_in_alpha():
    # lowering alpha never breaks feasibility when column sums are positive
    rng = np.random.default_rng(12)
    for _ in range(20):
        p = np.abs(rng.standard_normal((6, 2)))  # positive columns
        alpha = rng.uniform(0.0, 1.0, 2)
        hi = pa.solve_reweight_lp(_matrix(p), (0,), pa.AlphaThresholds(alpha),
                                  (0.0, 2.0))
        lower = pa.AlphaThresholds(alpha * rng.uniform(0.0, 1.0))
        lo = pa.solve_reweight_lp(_matrix(p), (0,), lower, (0.0, 2.0))
        if hi.feasible:
            assert lo.feasible


def test_lp_rejects_bad_bounds():
    with pytest.raises(ConfigurationError):
        pa.solve_reweight_lp(_matrix([[1.0]]), (0,), pa.AlphaThresholds([0.5]),
                             bounds=(2.0, 0.0))
    with pytest.raises(ConfigurationError):
        pa.solve_reweight_lp(_matrix([[1.0]]), (0,), pa.AlphaThresholds([0.5]),
                             bounds=(0.0, np.inf))


# ---------------------------------------------------------------------------
# Fitness
# ---------------------------------------------------------------------------

def test_fitness_reference_di_worked_example():
    # percent-unit deltas of the reference direct-improvement run
    deltas = np.array([16.02, -0.78, 11.39, -2.31, -1.2, 0.00, 5.73, -0.11,
                       -2.90, 0.12])
    targets = pa.TargetSet((0, 2), 10)
    f = pa.fitness(deltas, targets)
    assert f == pytest.approx(-0.9125, abs=1e-12)


def test_fitness_sentinel_on_flat_target():
    targets = pa.TargetSet((0,), 3)
    f = pa.fitness(np.array([0.0, 0.5, 0.2]), targets)
    assert f <= pa.SENTINEL / 1


def test_fitness_max_is_zero():
    targets = pa.TargetSet((1,), 3)
    assert pa.fitness(np.array([0.0, 0.4, 0.1]), targets) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=6),
       st.data())
def test_fitness_sentinel_dominates(deltas, data):
    k = len(deltas)
    t_size = data.draw(st.integers(1, k - 1))
    t_idx = tuple(sorted(data.draw(
        st.lists(st.integers(0, k - 1), min_size=t_size, max_size=t_size,
                 unique=True))))
    targets = pa.TargetSet(t_idx, k)
    d = np.array(deltas)
    f = pa.fitness(d, targets)
    has_sentinel = any(d[t] <= 0.0 for t in t_idx)
    if has_sentinel:
        # strictly worse than any sentinel-free candidate could ever be
        assert f < -1.0
    else:
        assert -1.0 <= f <= 0.0


def test_fitness_requires_proper_target_set():
    with pytest.raises(ConfigurationError):
        pa.fitness(np.array([0.1, 0.1]), (0, 1))


# ---------------------------------------------------------------------------
# GA search and workflows
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def blob_session():
    train, val, config = make_blobs4(seed=0, n_per_class=80, n_val=150)
    session = TrainingSession(train, val, config)
    session.train_epochs(6)
    return session


SMALL_GA = pa.GAConfig(iterations=4, population_size=8, num_elites=2,
                       num_mutated_elites=2, num_randoms=2,
                       num_crossover_children=2, seed=13)


def test_ga_config_validates_group_sizes():
    with pytest.raises(ConfigurationError):
        pa.GAConfig(population_size=10, num_elites=2, num_mutated_elites=2,
                    num_randoms=2, num_crossover_children=2)


def test_ga_search_deterministic(blob_session):
    targets = pa.TargetSet((0, 2), 4)
    m = blob_session.influence_at(6)
    a = pa.ga_search(blob_session, m, targets, SMALL_GA)
    b = pa.ga_search(blob_session, m, targets, SMALL_GA)
    assert a.best_fitness == b.best_fitness
    assert np.array_equal(a.best_alpha.alpha, b.best_alpha.alpha)
    assert np.array_equal(a.best_weights.w, b.best_weights.w)
    assert len(a.log) == len(b.log) == SMALL_GA.iterations * SMALL_GA.population_size
    for ra, rb in zip(a.log, b.log):
        assert ra.fitness == rb.fitness
        assert np.array_equal(ra.alpha, rb.alpha)


def test_ga_best_fitness_non_decreasing(blob_session):
    targets = pa.TargetSet((0, 2), 4)
    m = blob_session.influence_at(6)
    result = pa.ga_search(blob_session, m, targets, SMALL_GA)
    per_generation = {}
    for rec in result.log:
        cur = per_generation.get(rec.generation, -np.inf)
        per_generation[rec.generation] = max(cur, rec.fitness)
    values = [per_generation[g] for g in sorted(per_generation)]
    for a, b in zip(values, values[1:]):
        assert b >= a
    assert result.best_fitness == max(r.fitness for r in result.log)


def test_ga_requires_proper_targets(blob_session):
    m = blob_session.influence_at(6)
    with pytest.raises(ConfigurationError):
        pa.ga_search(blob_session, m, pa.TargetSet((0, 1, 2, 3), 4), SMALL_GA)


def test_direct_improvement_commits_and_improves():
    train, val, config = make_blobs4(seed=0, n_per_class=120, n_val=300)
    session = TrainingSession(train, val, config)
    session.train_epochs(6)
    before = session.metrics_at(6).per_class_accuracy.copy()
    targets = pa.TargetSet((0, 2), 4)
    result, metrics = pa.run_direct_improvement(session, targets, SMALL_GA)
    assert session.current_epoch == 7
    delta = result.staged.delta
    for t in targets.indices:
        assert delta[t] > 0.0
        assert metrics.per_class_accuracy[t] > before[t]
    assert 7 in session.epoch_weights


def test_direct_improvement_refuses_saturated_targets():
    # class 1 sits far from everything and scores exactly 1.0: no candidate
    # can strictly improve it, so every fitness carries the sentinel
    from influencekit.datamodel import gen_class_blobs
    centers = [[0, 1.6], [12, 0], [0, -1.6], [-12, 0]]
    train = gen_class_blobs(60, centers, [1.3, 0.6, 1.3, 0.6], seed=1)
    val = gen_class_blobs(120, centers, [1.3, 0.6, 1.3, 0.6], seed=1001,
                          split_tag="validation")
    config = tr.ModelConfig(architecture="logistic", learning_rate=0.3,
                            weight_decay=1e-3, batch_size=32, epochs=6, seed=1)
    session = TrainingSession(train, val, config)
    session.train_epochs(6)
    acc = session.metrics_at(6).per_class_accuracy
    assert acc[1] == 1.0, "fixture expects class 1 saturated"
    with pytest.raises(CommitRefusedError):
        pa.run_direct_improvement(session, pa.TargetSet((1,), 4), SMALL_GA)
    assert session.current_epoch == 6  # nothing committed


def test_course_correction_restores_dropped_classes():
    train, val, config = make_blobs4(seed=3, n_per_class=120, n_val=300)
    session = TrainingSession(train, val, config)
    session.train_epochs(6)
    biased = np.ones(len(train))
    biased[np.isin(train.labels, [0, 2])] = 0.05
    biased[np.isin(train.labels, [1, 3])] = 2.0
    before = session.metrics_at(6).per_class_accuracy.copy()
    session.train_epochs(1, weights=biased)
    degraded = session.metrics_at(7).per_class_accuracy
    dropped = tuple(int(k) for k in (0, 2) if degraded[k] < before[k])
    assert len(dropped) >= 1
    targets = pa.TargetSet(dropped, 4)
    result, metrics = pa.run_course_correction(session, 7, targets, SMALL_GA)
    assert session.current_epoch == 7  # replaced, not appended
    for t in dropped:
        assert metrics.per_class_accuracy[t] > degraded[t]


def test_course_correction_rejects_non_dropped_targets(blob_session):
    train, val, config = make_blobs4(seed=4, n_per_class=60, n_val=150)
    session = TrainingSession(train, val, config)
    session.train_epochs(2)
    rising = int(np.argmax(session.metrics_at(2).per_class_accuracy
                           - session.metrics_at(1).per_class_accuracy))
    if session.metrics_at(2).per_class_accuracy[rising] > \
            session.metrics_at(1).per_class_accuracy[rising]:
        with pytest.raises(ConfigurationError, match="did not lose"):
            pa.run_course_correction(session, 2, pa.TargetSet((rising,), 4),
                                     SMALL_GA)


def test_course_correction_only_latest_epoch(blob_session):
    with pytest.raises(ConfigurationError, match="latest"):
        pa.run_course_correction(blob_session, 1, pa.TargetSet((0,), 4),
                                 SMALL_GA)


def test_cc_identity_weights_give_zero_delta():
    # with the weight box collapsed around 1, the reweighted epoch replays
    # the original bit for bit and every delta is exactly zero
    train, val, config = make_blobs4(seed=5, n_per_class=60, n_val=150)
    session = TrainingSession(train, val, config)
    session.train_epochs(3)
    m = session.influence_at(2)
    result = pa.ga_search(session, m, pa.TargetSet((0,), 4), SMALL_GA,
                          lp_bounds=(1.0 - 1e-12, 1.0 + 1e-12), mode=pa.CC,
                          base_epoch=2,
                          reference_metrics=session.metrics_at(3))
    assert np.all(result.staged.delta == 0.0)
    assert result.best_fitness <= pa.SENTINEL / 1  # flat targets => sentinel
    with pytest.raises(CommitRefusedError):
        pa._check_committable(result, pa.TargetSet((0,), 4))


def test_weight_set_validation():
    with pytest.raises(ValueError):
        pa.WeightSet(np.array([3.0]), bounds=(0.0, 2.0))
    ws = pa.WeightSet.baseline(4)
    assert np.all(ws.w == 1.0)


def test_target_set_validation():
    with pytest.raises(ConfigurationError):
        pa.TargetSet((), 4)
    with pytest.raises(ConfigurationError):
        pa.TargetSet((4,), 4)
    with pytest.raises(ConfigurationError):
        pa.TargetSet((1, 1), 4)
    assert not pa.TargetSet((0, 1), 2).is_proper
    assert pa.TargetSet((0,), 2).complement == (1,)
