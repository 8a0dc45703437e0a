import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from influencekit import ceiling as ce
from influencekit import trainer as tr
from influencekit.datamodel import gen_separable_noisy
from influencekit.errors import DegenerateGeometryError, TrimAbortedError
from influencekit.influence import InfluenceMatrix
from influencekit.presets import (NOISY_GEOMETRY, make_nonseparable,
                                  make_separable_noisy)


def _matrix(values, ids=None):
    values = np.asarray(values, dtype=np.float64)
    ids = np.arange(len(values)) if ids is None else np.asarray(ids)
    return InfluenceMatrix(ids, values)


def test_classify_regions_quadrants():
    m = _matrix([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    census = ce.classify_regions(m, zero_tol=0.0)
    assert census.joint_positive == [0]
    assert census.joint_negative == [1]
    assert sorted(census.mixed) == [2, 3]


def test_classify_regions_boundary_is_mixed():
    m = _matrix([[0.0, 0.0], [0.5, 0.0], [1e-6, 1e-6]])
    census = ce.classify_regions(m, zero_tol=0.0)
    assert census.joint_positive == [2]
    assert sorted(census.mixed) == [0, 1]
    strict = ce.classify_regions(m, zero_tol=1e-5)
    assert strict.joint_positive == []
    assert sorted(strict.mixed) == [0, 1, 2]


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 40), st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
def test_census_partitions(n, k, seed):
    rng = np.random.default_rng(seed)
    m = _matrix(rng.standard_normal((n, k)))
    census = ce.classify_regions(m, zero_tol=0.1)
    all_ids = (census.joint_positive + census.joint_negative + census.mixed)
    assert sorted(all_ids) == list(range(n))


def test_census_permutation_invariance():
    rng = np.random.default_rng(3)
    values = rng.standard_normal((30, 3))
    m = _matrix(values)
    perm = rng.permutation(30)
    mp = _matrix(values[perm], ids=np.arange(30)[perm])
    a, b = ce.classify_regions(m), ce.classify_regions(mp)
    assert a.counts == b.counts
    assert sorted(a.joint_negative) == sorted(b.joint_negative)
    ga, gb = ce.hyperplane_residual(m), ce.hyperplane_residual(mp)
    assert ga == pytest.approx(gb)


def test_geometry_scale_invariance():
    rng = np.random.default_rng(4)
    values = rng.standard_normal((25, 2))
    c = 13.7
    m, mc = _matrix(values), _matrix(c * values)
    assert ce.hyperplane_residual(m) == pytest.approx(ce.hyperplane_residual(mc))
    tol = 0.2
    a = ce.classify_regions(m, zero_tol=tol)
    b = ce.classify_regions(mc, zero_tol=c * tol)
    assert a.counts == b.counts


def test_hyperplane_exact_tradeoff_line():
    t = np.linspace(-2, 2, 9)
    m = _matrix(np.stack([t, -t], axis=1))
    residual, first_pc, alignment = ce.hyperplane_residual(m)
    assert residual == pytest.approx(0.0, abs=1e-12)
    assert first_pc == pytest.approx(1.0, abs=1e-12)
    assert alignment == pytest.approx(1.0, abs=1e-12)


def test_hyperplane_isotropic_square():
    # covariance of the four corners is isotropic: eigenvalues are equal,
    # so both ratios are exactly one half
    m = _matrix([[1, 1], [-1, -1], [1, -1], [-1, 1]])
    residual, first_pc, _ = ce.hyperplane_residual(m)
    assert residual == pytest.approx(0.5, abs=1e-12)
    assert first_pc == pytest.approx(0.5, abs=1e-12)


def test_k2_residual_complements_first_pc():
    rng = np.random.default_rng(6)
    m = _matrix(rng.standard_normal((40, 2)) @ np.array([[2.0, 0.3], [0.1, 0.5]]))
    residual, first_pc, _ = ce.hyperplane_residual(m)
    assert residual + first_pc == pytest.approx(1.0, abs=1e-12)


def test_hyperplane_degenerate_and_too_few_rows():
    with pytest.raises(DegenerateGeometryError):
        ce.hyperplane_residual(_matrix(np.zeros((5, 2))))
    with pytest.raises(ValueError, match="rows"):
        ce.hyperplane_residual(_matrix(np.ones((1, 2))))


def test_verdict_cases():
    rng = np.random.default_rng(7)
    # 10% joint-negative rows
    values = np.abs(rng.standard_normal((90, 2))) * np.array([1, -1])
    values = np.concatenate([values, -np.abs(rng.standard_normal((10, 2)))])
    census = ce.classify_regions(_matrix(values))
    assert ce.ceiling_verdict(census, (0.0, 1.0, 1.0),
                              tau_region=0.01) == ce.IMPROVABLE
    # empty joint regions, perfect hyperplane
    t = np.linspace(-1, 1, 30)
    line = _matrix(np.stack([t, -t], axis=1))
    census2 = ce.classify_regions(line)
    geometry2 = ce.hyperplane_residual(line)
    assert ce.ceiling_verdict(census2, geometry2) == ce.CEILING_REACHED
    # empty joint regions but visible residual: combinations still help
    assert ce.ceiling_verdict(census2, (0.25, 0.7, 0.8),
                              tau_residual=0.05) == ce.IMPROVABLE
    with pytest.raises(ValueError):
        ce.ceiling_verdict(census2, geometry2, tau_region=0.0)


def test_report_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    m = _matrix(rng.standard_normal((20, 2)))
    report = ce.build_ceiling_report(m)
    path = tmp_path / "report.json"
    report.save(path)
    loaded = ce.CeilingReport.from_json(path.read_text())
    assert loaded.verdict == report.verdict
    assert loaded.residual_ratio == report.residual_ratio
    assert loaded.census.counts == report.census.counts


def test_noisy_dataset_flips_flagged_joint_negative():
    train, val, config = make_separable_noisy(seed=0, n_blue=100, n_orange=100,
                                              flips_blue=15, flips_orange=6,
                                              n_val=400)
    params = tr.train(tr.init_params(config, 2, 2), train, config)
    from influencekit import influence as infl
    op = infl.build_hessian_operator(params, train,
                                     infl.relative_damping(params, train))
    m = infl.influence_matrix(params, op, train, val)
    census = ce.classify_regions(m)
    flipped = set(train.metadata["flipped_ids"])
    negative = set(census.joint_negative)
    assert len(flipped & negative) / len(flipped) >= 0.9


def test_tradeoff_dataset_reads_as_ceiling():
    train, val, config = make_nonseparable(seed=0, n_per_class=200, n_val=200)
    params = tr.train(tr.init_params(config, 2, 2), train, config)
    from influencekit import influence as infl
    op = infl.build_hessian_operator(params, train,
                                     infl.relative_damping(params, train))
    m = infl.influence_matrix(params, op, train, val)
    report = ce.build_ceiling_report(m)
    assert report.residual_ratio < 0.05
    assert report.principal_axis_alignment > 0.9


def test_trim_fixed_point_on_clean_data():
    train = gen_separable_noisy(80, 80, 0, 0, seed=1, geometry=NOISY_GEOMETRY)
    val = gen_separable_noisy(200, 200, 0, 0, seed=1001,
                              geometry=NOISY_GEOMETRY, split_tag="validation")
    config = tr.ModelConfig(architecture="logistic", bias=False,
                            learning_rate=0.4, weight_decay=1e-3,
                            batch_size=64, epochs=40, seed=1)
    trimmed, params, report = ce.trim_iteration(train, val, config)
    assert trimmed is train
    assert report.removed_ids == []
    assert np.array_equal(report.accuracy_before, report.accuracy_after)


def test_trim_loop_removes_all_flips():
    train, val, config = make_separable_noisy(seed=0, n_blue=150, n_orange=150,
                                              flips_blue=25, flips_orange=10,
                                              n_val=500)
    final, params, reports = ce.run_trimming(train, val, config,
                                             max_iterations=5)
    removed = set()
    for r in reports:
        removed |= set(r.removed_ids)
    assert set(train.metadata["flipped_ids"]) <= removed
    accs = [reports[0].accuracy_before] + [r.accuracy_after for r in reports]
    for a, b in zip(accs, accs[1:]):
        assert (b >= a).all()


def test_trim_abort_when_class_would_empty():
    # class 1 is a single mislabeled point inside the blue cloud: the census
    # marks it joint-negative, and removing it would empty the class
    from influencekit.datamodel import Dataset
    rng = np.random.default_rng(9)
    blue = rng.normal([-1.5, 0], 0.4, size=(30, 2))
    feats = np.concatenate([blue, [[-1.6, 0.1]]])
    labels = np.array([0] * 30 + [1])
    train = Dataset(np.arange(31), feats, labels, num_classes=2)
    val_feats = np.concatenate([rng.normal([-1.5, 0], 0.4, (30, 2)),
                                rng.normal([1.5, 0], 0.4, (30, 2))])
    val = Dataset(np.arange(60), val_feats, [0] * 30 + [1] * 30, 2,
                  "validation")
    config = tr.ModelConfig(architecture="logistic", bias=False,
                            learning_rate=0.4, weight_decay=1e-3,
                            batch_size=31, epochs=80, seed=2)
    with pytest.raises(TrimAbortedError) as excinfo:
        ce.run_trimming(train, val, config, max_iterations=3)
    assert excinfo.value.partial_report is not None
    assert excinfo.value.partial_report.removed_ids == [30]
