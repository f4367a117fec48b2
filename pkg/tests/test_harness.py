import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from stochopt.algorithms import PGD
from stochopt.errors import ConfigurationError, DomainError
from stochopt.functions import KullbackLeibler, L1Norm, LeastSquares, ScaledFunction
from stochopt.harness import ExperimentConfig, load_config
from stochopt.harness.experiment import RunRecord, run_experiment, write_outputs
from stochopt.harness.problem import build_problem
from stochopt.harness.problems import (build_subproblems, make_phantom, nrmse, partition, simulate_ct,
                                       simulate_pet)
from stochopt.harness.reference import compute_reference, lasso_coordinate_descent
from stochopt.operators import MatrixOperator, ToyRadon


def _sets(groups):
    return [sorted(int(i) for i in g) for g in groups]


def test_partition_examples():
    assert _sets(partition(9, 3, "staggered")) == [[0, 3, 6], [1, 4, 7], [2, 5, 8]]
    assert _sets(partition(9, 3, "sequential")) == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    for mode in ("sequential", "staggered", "random_permutation"):
        assert sorted(len(g) for g in partition(10, 3, mode, seed=1)) == [3, 3, 4]


@pytest.mark.parametrize("mode", ["sequential", "staggered", "random_permutation"])
@given(count=st.integers(1, 200), data=st.data())
@settings(max_examples=30, deadline=None)
def test_partition_is_balanced_disjoint_cover(mode, count, data):
    n = data.draw(st.integers(1, count))
    groups = partition(count, n, mode, seed=3)
    flat = np.concatenate(groups)
    assert sorted(flat.tolist()) == list(range(count))
    sizes = [len(g) for g in groups]
    assert max(sizes) - min(sizes) <= 1


def test_partition_errors():
    with pytest.raises(ConfigurationError):
        partition(3, 4)
    with pytest.raises(ConfigurationError):
        partition(9, 3, "spiral")


def test_ct_subsets_sum_to_full_objective():
    A = ToyRadon.uniform(16, 12, 20)
    rng = np.random.default_rng(0)
    b = rng.normal(size=A.range_size)
    x = rng.normal(size=256)
    full = LeastSquares(A, b)
    for mode in ("staggered", "sequential"):
        members = [s.function for s in build_subproblems(A, b, partition(12, 4, mode))]
        assert sum(f(x) for f in members) == pytest.approx(full(x), rel=1e-10)
        np.testing.assert_allclose(sum(f.gradient(x) for f in members), full.gradient(x), rtol=1e-10, atol=1e-10)


def test_single_subset_equals_unpartitioned():
    A = ToyRadon.uniform(8, 6, 10)
    b = np.random.default_rng(1).normal(size=A.range_size)
    (sub,) = build_subproblems(A, b, partition(6, 1))
    x = np.random.default_rng(2).normal(size=64)
    assert sub.function(x) == pytest.approx(LeastSquares(A, b)(x), rel=1e-12)


def test_pet_members_share_prior_evenly():
    config = ExperimentConfig(problem="pet_rdp", grid=8, angles=12, detectors=12, subsets=3, reference="none")
    p = build_problem(config)
    x = p.initial + 0.1
    prior = p.extras["prior"]
    kl = KullbackLeibler(p.b, p.eta, p.A)
    assert sum(f(x) for f in p.members) == pytest.approx(kl(x) + prior(x), rel=1e-10)
    np.testing.assert_allclose(sum(f.gradient(x) for f in p.members), kl.gradient(x) + prior.gradient(x),
                               rtol=1e-9, atol=1e-9)


def test_subproblem_row_range_check():
    A = MatrixOperator(np.ones((4, 2)))
    with pytest.raises(IndexError):
        build_subproblems(A, np.ones(4), [np.array([0, 5])])


def test_phantom_is_bounded():
    for n in (8, 32, 33):
        img = make_phantom(n)
        assert img.shape == (n, n)
        assert img.min() == 0.0 and img.max() <= 1.0
    assert make_phantom(32).max() == 1.0
    np.testing.assert_array_equal(make_phantom(32, peak=3.0), 3.0 * make_phantom(32))


def test_ct_without_noise_is_projection():
    A = ToyRadon.uniform(8, 5)
    ph = make_phantom(8)
    np.testing.assert_array_equal(simulate_ct(ph, A, 0.0), A.direct(ph.ravel()))


def test_pet_noise_has_poisson_mean():
    A = MatrixOperator(np.array([[0.5, 1.0], [2.0, 0.0]]))
    ph = np.array([3.0, 1.5])
    scale, eta = 2.0, 0.7
    mean = scale * A.direct(ph) + eta
    samples = np.array([simulate_pet(ph, A, eta, scale, seed=s)[0] for s in range(10_000)])
    assert np.all(np.abs(samples.mean(axis=0) - mean) <= 5 * np.sqrt(mean) / 100)
    counts, e = simulate_pet(ph, A, eta, scale, seed=0)
    np.testing.assert_array_equal(e, [eta, eta])
    assert np.all(counts == np.round(counts))


def test_nrmse_examples():
    ref = np.array([1.0, -2.0, 3.0])
    assert nrmse(ref, ref) == 0.0
    assert nrmse(np.zeros(3), ref) == 1.0
    assert nrmse(2 * ref, ref) == 1.0
    with pytest.raises(DomainError):
        nrmse(ref, np.zeros(3))


def test_ridge_reference_matches_augmented_least_squares(tmp_path):
    config = ExperimentConfig(problem="ridge", rows=60, cols=20, condition=1e3, alpha=0.5)
    ref = compute_reference(config, cache_dir=tmp_path)
    p = build_problem(config)
    M = p.A.todense()
    aug = np.vstack([M, np.sqrt(config.alpha) * np.eye(20)])
    x = scipy.linalg.lstsq(aug, np.r_[p.b, np.zeros(20)])[0]
    assert np.linalg.norm(ref.x - x) <= 1e-8 * np.linalg.norm(x)
    cached = compute_reference(config, cache_dir=tmp_path)
    np.testing.assert_array_equal(cached.x, ref.x)
    assert len(list(tmp_path.glob("reference-*.txt"))) == 1


def test_lasso_orthogonal_design_is_soft_threshold():
    A = np.diag([2.0, 1.0, 0.5])
    b = np.array([3.0, -0.05, 1.0])
    x, converged, _ = lasso_coordinate_descent(A, b, 0.1)
    expected = np.sign(A.T @ b) * np.maximum(np.abs(A.T @ b) - 0.1, 0) / np.diag(A) ** 2
    np.testing.assert_array_equal(x, expected)
    assert converged and x[1] == 0.0


def test_lasso_reference_satisfies_kkt(tmp_path):
    config = ExperimentConfig(problem="lasso", rows=40, cols=15, alpha=0.1)
    x = compute_reference(config, cache_dir=tmp_path).x
    p = build_problem(config)
    M = p.A.todense()
    corr = M.T @ (p.b - M @ x)
    on = x != 0
    np.testing.assert_allclose(corr[on], 0.1 * np.sign(x[on]), atol=1e-10)
    assert np.all(np.abs(corr[~on]) <= 0.1 + 1e-10)


def test_unregularised_ct_reference_matches_normal_equations(tmp_path):
    config = ExperimentConfig(problem="ct_tv", grid=8, angles=12, detectors=16, alpha=0.0,
                              nonnegativity=False, reference_tol=1e-12, reference_max_iterations=20000)
    ref = compute_reference(config, cache_dir=tmp_path)
    p = build_problem(config)
    M = p.A.matrix.toarray()
    x = np.linalg.solve(M.T @ M, M.T @ p.b)
    assert ref.converged
    assert np.linalg.norm(ref.x - x) <= 1e-6 * np.linalg.norm(x)


def test_reference_nonconvergence_warns(tmp_path):
    config = ExperimentConfig(problem="ct_tv", grid=8, angles=6, detectors=10, subsets=2, reference_max_iterations=3,
                              fgp_iterations=5, reference_fgp_iterations=5)
    with pytest.warns(RuntimeWarning, match="without meeting"):
        ref = compute_reference(config, cache_dir=tmp_path)
    assert not ref.converged and ref.iterations == 3


def _small_ct(**changes):
    base = dict(problem="ct_tv", grid=12, angles=12, detectors=16, subsets=4, passes=3, fgp_iterations=20,
                reference="none", record_wall_time=False)
    base.update(changes)
    return ExperimentConfig.from_dict(base)


@pytest.mark.parametrize("estimator", ["saga", "svrg", "lsvrg", "sg", "sag", "full_sum"])
def test_runs_are_bit_reproducible(tmp_path, estimator):
    config = _small_ct(estimator=estimator)
    a = write_outputs(run_experiment(config), tmp_path / "a")
    b = write_outputs(run_experiment(config), tmp_path / "b")
    assert (a / "record.csv").read_bytes() == (b / "record.csv").read_bytes()
    assert (a / "final_iterate.txt").read_bytes() == (b / "final_iterate.txt").read_bytes()


def test_record_has_one_row_per_pass(tmp_path):
    record = run_experiment(_small_ct(estimator="saga", passes=4))
    passes = [float(p) for p in record.column("data_passes")]
    assert passes[0] == 1.0  # warm start
    assert [int(p) for p in passes] == [1, 2, 3, 4]
    write_outputs(record, tmp_path)
    rows = RunRecord.read_csv(tmp_path / "record.csv")
    assert [r["objective"] for r in rows] == record.column("objective")
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["estimator"] == "saga"
    assert (tmp_path / "final_iterate.txt").read_text().startswith("dims: 12 12")


def test_full_sum_single_subset_matches_hand_built_pgd():
    config = ExperimentConfig.from_dict(dict(problem="lasso", rows=30, cols=10, subsets=1, estimator="full_sum",
                                             algorithm="pgd", passes=25, reference="none", record_wall_time=False))
    record = run_experiment(config)
    p = build_problem(config)
    f = LeastSquares(MatrixOperator(p.A.todense()), p.b)
    g = ScaledFunction(L1Norm(), config.alpha)
    alg = PGD(f, g, initial=np.zeros(10), step_size=1.0 / p.monolithic.L)
    hand = [f(alg.x) + g(alg.x)]
    for _ in range(25):
        alg.step()
        hand.append(f(alg.x) + g(alg.x))
    assert record.column("objective") == hand
    np.testing.assert_array_equal(record.x, alg.x)


def test_gd_on_ridge_folds_regulariser_into_members(tmp_path):
    config = ExperimentConfig.from_dict(dict(problem="ridge", rows=40, cols=10, condition=10.0, subsets=4,
                                             estimator="full_sum", algorithm="gd", passes=300))
    record = run_experiment(config, cache_dir=tmp_path)
    objective = record.column("objective")
    assert np.all(np.diff(objective) <= 1e-14 * objective[-1])
    # converges to the ridge minimiser, so the regulariser is part of the objective
    assert record.final["nrmse"] < 1e-8


def test_gd_rejects_nonsmooth_terms():
    with pytest.raises(ConfigurationError):
        run_experiment(_small_ct(algorithm="gd"))


def test_config_files(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text('problem = "pet_rdp"\nsubsets = 3\nstep.beta = 0.5\n')
    c = load_config(toml)
    assert c.subsets == 3 and c.passes == 15
    assert c.step == {"kind": "decreasing", "gamma0": "estimate", "beta": 0.5}
    assert c.precond["kind"] == "bsrem"
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"problem": "ridge", "estimator": "svrg"}))
    c = load_config(js)
    assert c.partition == "sequential" and c.alpha == 0.5
    assert ExperimentConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigurationError, match="unknown configuration keys"):
        ExperimentConfig.from_dict({"problme": "ridge"})
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="mri")
    bad = tmp_path / "bad.toml"
    bad.write_text("problem = \n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_initial_image_options(tmp_path):
    from stochopt.operators import save_array
    assert np.all(build_problem(_small_ct(initial="zeros")).initial == 0)
    path = tmp_path / "x0.txt"
    save_array(path, np.full((12, 12), 0.25))
    assert np.all(build_problem(_small_ct(initial=str(path))).initial == 0.25)
    with pytest.raises(ConfigurationError):
        build_problem(_small_ct(initial="mlem"))
